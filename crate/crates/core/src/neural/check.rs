//! Finite-difference checks of jets and parameter gradients.

use super::jet::NCOMP;
use super::{Jet, JetOrder, Mlp};

/// Worst relative disagreements found by [`fd_check`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdReport {
    /// Per jet component.
    pub jet: [f64; NCOMP],
    /// `‖g_ad − g_fd‖∞ / ‖g_ad‖∞` for the parameter gradient.
    pub grad: f64,
}

impl FdReport {
    pub fn worst_jet(&self) -> f64 {
        self.jet.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn merge(&mut self, other: &FdReport) {
        for (a, b) in self.jet.iter_mut().zip(&other.jet) {
            *a = a.max(*b);
        }
        self.grad = self.grad.max(other.grad);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Checks every jet component at `z` by central differences of a lower
/// component with step `h`, and the gradient of `⟨seed, jet(z)⟩` by
/// central differences in each parameter with step `hp`.
pub fn fd_check(net: &Mlp, z: [f64; 3], seed: &Jet, h: f64, hp: f64) -> FdReport {
    let j = net.jet(z, JetOrder::Third);
    let at = |dz: [f64; 3]| net.jet([z[0] + dz[0], z[1] + dz[1], z[2] + dz[2]], JetOrder::Third);
    let d = |axis: usize, f: fn(&Jet) -> f64| {
        let mut p = [0.0; 3];
        p[axis] = h;
        let m = [-p[0], -p[1], -p[2]];
        (f(&at(p)) - f(&at(m))) / (2.0 * h)
    };
    let fd = [
        j.v,
        d(0, |j| j.v),
        d(1, |j| j.v),
        d(2, |j| j.v),
        d(0, |j| j.x),
        d(1, |j| j.y),
        d(1, |j| j.x),
        d(2, |j| j.x),
        d(2, |j| j.y),
        d(2, |j| j.xx),
        d(2, |j| j.yy),
        d(2, |j| j.xy),
    ];
    let ad = j.to_array();
    let mut report = FdReport::default();
    for c in 1..NCOMP {
        report.jet[c] = rel(ad[c], fd[c]);
    }
    // the value itself is checked against the independent pointwise path
    report.jet[0] = rel(ad[0], net.value(z));

    let mut tape = net.tape();
    let mut grad = vec![0.0; net.param_count()];
    net.forward(z, JetOrder::Third, &mut tape);
    net.backward(&mut tape, seed, &mut grad);
    let s = seed.to_array();
    let pair = |n: &Mlp| {
        let a = n.jet(z, JetOrder::Third).to_array();
        a.iter().zip(&s).map(|(p, q)| p * q).sum::<f64>()
    };
    let mut shifted = net.clone();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..net.param_count() {
        let p0 = net.params()[i];
        shifted.params_mut()[i] = p0 + hp;
        let up = pair(&shifted);
        shifted.params_mut()[i] = p0 - hp;
        let down = pair(&shifted);
        shifted.params_mut()[i] = p0;
        let g = (up - down) / (2.0 * hp);
        worst = worst.max((g - grad[i]).abs());
        scale = scale.max(grad[i].abs());
    }
    report.grad = if worst == 0.0 { 0.0 } else { worst / scale };
    report
}

#[cfg(test)]
mod tests {
    use super::super::Init;
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn small_net_passes() {
        let net = Mlp::new(&[3, 8, 8, 1], Init::Scaled, &RngStream::new(0, "fd")).unwrap();
        let seed = Jet::from_array([0.3, -0.2, 0.5, 0.1, 0.7, -0.4, 0.45, 0.2, 0.9, -0.6, 0.25, -0.35]);
        let r = fd_check(&net, [0.3, 0.6, 0.4], &seed, 1e-4, 1e-5);
        assert!(r.worst_jet() < 1e-5, "{r:?}");
        assert!(r.grad < 1e-5, "{r:?}");
    }
}
