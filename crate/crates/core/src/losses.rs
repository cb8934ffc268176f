//! Collocation sampling, residuals and the empirical losses `J1` (excitation)
//! and `J2` (emission / source) with their parameter gradients.
//!
//! Every residual is affine in the jet of the network being trained, so a
//! squared residual `w r²` back-propagates through the seed `2 w r ∂r/∂jet`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{Coefficients, Edge};
use crate::io::Table;
use crate::neural::{Jet, JetOrder, Mlp};
use crate::rng::RngStream;
use crate::synth::{excitation_input, FluxSample};

/// Interior or initial-time point with its Monte-Carlo weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub z: [f64; 3],
    pub w: f64,
}

/// Point on the spatial boundary with its outward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub z: [f64; 3],
    pub normal: [f64; 2],
    pub w: f64,
}

/// Measurement point on Γ with the noisy flux value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint {
    pub z: [f64; 3],
    pub normal: [f64; 2],
    pub value: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollocationSet {
    pub interior: Vec<Point>,
    pub boundary: Vec<BoundaryPoint>,
    pub initial: Vec<Point>,
    pub data: Vec<DataPoint>,
}

/// Splits `n` points over edges in proportion to their lengths (largest
/// remainder).
pub fn split_by_length(n: usize, lengths: &[f64]) -> Vec<usize> {
    let total: f64 = lengths.iter().sum();
    let exact: Vec<f64> = lengths.iter().map(|l| n as f64 * l / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Fresh uniform collocation points for one epoch. Data points are drawn
/// uniformly (with replacement) from `measurement`; without it the data set
/// is empty.
pub fn sample_collocation(
    config: &ExperimentConfig,
    rng: &RngStream,
    epoch: usize,
    measurement: Option<&[FluxSample]>,
) -> CollocationSet {
    let mut r = rng.substream(format!("epoch-{epoch}")).rng();
    let [x0, x1] = config.domain.x;
    let [y0, y1] = config.domain.y;
    let t_end = config.final_time;
    let area = (x1 - x0) * (y1 - y0);
    let n = &config.collocation;

    let interior = (0..n.n_int)
        .map(|_| Point {
            z: [r.gen_range(x0..x1), r.gen_range(y0..y1), r.gen_range(0.0..t_end)],
            w: area * t_end / n.n_int as f64,
        })
        .collect();

    let lengths: Vec<f64> = Edge::ALL
        .iter()
        .map(|e| match e {
            Edge::Left | Edge::Right => y1 - y0,
            Edge::Bottom | Edge::Top => x1 - x0,
        })
        .collect();
    let counts = split_by_length(n.n_sb, &lengths);
    let mut boundary = Vec::with_capacity(n.n_sb);
    for ((edge, &count), &len) in Edge::ALL.iter().zip(&counts).zip(&lengths) {
        for _ in 0..count {
            let t = r.gen_range(0.0..t_end);
            let (x, y) = match edge {
                Edge::Left => (x0, r.gen_range(y0..y1)),
                Edge::Right => (x1, r.gen_range(y0..y1)),
                Edge::Bottom => (r.gen_range(x0..x1), y0),
                Edge::Top => (r.gen_range(x0..x1), y1),
            };
            boundary.push(BoundaryPoint {
                z: [x, y, t],
                normal: edge.normal(),
                w: len * t_end / count as f64,
            });
        }
    }

    let initial = (0..n.n_tb)
        .map(|_| Point {
            z: [r.gen_range(x0..x1), r.gen_range(y0..y1), 0.0],
            w: area / n.n_tb as f64,
        })
        .collect();

    let data = match measurement {
        Some(samples) if !samples.is_empty() => {
            let gamma_len: f64 = config
                .gamma_spec
                .iter()
                .map(|e| match e {
                    Edge::Left | Edge::Right => y1 - y0,
                    Edge::Bottom | Edge::Top => x1 - x0,
                })
                .sum();
            let w = gamma_len * t_end / n.n_d as f64;
            (0..n.n_d)
                .map(|_| {
                    let s = samples[r.gen_range(0..samples.len())];
                    DataPoint {
                        z: [s.x, s.y, s.t],
                        normal: s.normal,
                        value: s.noisy,
                        w,
                    }
                })
                .collect()
        }
        _ => Vec::new(),
    };

    CollocationSet {
        interior,
        boundary,
        initial,
        data,
    }
}

/// Which excitation residual to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcitationKind {
    Int,
    Sb,
    Tb,
}

/// Which emission residual to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionKind {
    Int,
    Sb0,
    Sb1,
    Sb2,
    Sb3,
    Tb0,
    Tb1,
    D,
}

/// Direction of the boundary derivatives of the Robin residual `B u_m`
/// penalized by the `sb1` and `sb3` terms.
///
/// `B u_m = 0` on the whole boundary, so its tangential derivative vanishes
/// for the true field. Its normal derivative generally does not: on the
/// reference problems `‖∂_n(B u_m)‖²` of the exact emission field is several
/// times `‖∂_n u_m‖²`, and penalizing it biases the recovered source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryDerivative {
    #[default]
    Tangential,
    Normal,
}

impl BoundaryDerivative {
    /// Direction of differentiation on an edge with outward normal `n`.
    pub fn direction(self, n: [f64; 2]) -> [f64; 2] {
        match self {
            BoundaryDerivative::Tangential => [-n[1], n[0]],
            BoundaryDerivative::Normal => n,
        }
    }
}

/// Data of the excitation problem: Robin input `g`, source and initial
/// state. The standard problem has `g = -20tx(x-1)` and zero source and
/// initial state.
pub struct ExcitationData<'a> {
    pub g: Box<dyn Fn(f64, f64, f64, [f64; 2]) -> f64 + 'a>,
    pub source: Box<dyn Fn(f64, f64, f64) -> f64 + 'a>,
    pub initial: Box<dyn Fn(f64, f64) -> f64 + 'a>,
}

impl Default for ExcitationData<'_> {
    fn default() -> Self {
        Self {
            g: Box::new(|x, y, t, _| excitation_input(x, y, t)),
            source: Box::new(|_, _, _| 0.0),
            initial: Box::new(|_, _| 0.0),
        }
    }
}

/// Residual `r = ⟨coef, jet⟩ + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Affine {
    coef: Jet,
    offset: f64,
}

impl Affine {
    fn eval(&self, j: &Jet) -> f64 {
        let a = self.coef.to_array();
        let b = j.to_array();
        a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() + self.offset
    }
}

fn operator_coef(c: &Coefficients) -> Jet {
    Jet {
        v: c.mu_a,
        t: 1.0 / c.c,
        xx: -c.kappa,
        yy: -c.kappa,
        ..Jet::default()
    }
}

/// `∂_n u + β u` as a jet functional.
fn robin_coef(n: [f64; 2], beta: f64) -> Jet {
    Jet {
        v: beta,
        x: n[0],
        y: n[1],
        ..Jet::default()
    }
}

fn excitation_affine(
    kind: ExcitationKind,
    z: [f64; 3],
    normal: [f64; 2],
    coeffs: &Coefficients,
    data: &ExcitationData<'_>,
) -> Affine {
    let [x, y, t] = z;
    match kind {
        ExcitationKind::Int => Affine {
            coef: operator_coef(coeffs),
            offset: -(data.source)(x, y, t),
        },
        ExcitationKind::Sb => Affine {
            coef: robin_coef(normal, coeffs.beta),
            offset: -(data.g)(x, y, t, normal),
        },
        ExcitationKind::Tb => Affine {
            coef: Jet::constant(1.0),
            offset: -(data.initial)(x, y),
        },
    }
}

fn excitation_order(kind: ExcitationKind) -> JetOrder {
    match kind {
        ExcitationKind::Int => JetOrder::Second,
        ExcitationKind::Sb => JetOrder::First,
        ExcitationKind::Tb => JetOrder::Value,
    }
}

/// Excitation residual at one point; `normal` is used by `Sb` only.
pub fn residual_excitation(
    net_e: &Mlp,
    z: [f64; 3],
    normal: [f64; 2],
    kind: ExcitationKind,
    coeffs: &Coefficients,
    data: &ExcitationData<'_>,
) -> f64 {
    let jet = net_e.jet(z, excitation_order(kind));
    excitation_affine(kind, z, normal, coeffs, data).eval(&jet)
}

fn emission_coef(kind: EmissionKind, normal: [f64; 2], coeffs: &Coefficients, boundary: BoundaryDerivative) -> Jet {
    let [nx, ny] = normal;
    let [dx, dy] = boundary.direction(normal);
    let b = coeffs.beta;
    let mut j = Jet::default();
    match kind {
        EmissionKind::Int => j = operator_coef(coeffs),
        EmissionKind::Sb0 => j = robin_coef(normal, b),
        EmissionKind::Sb1 => {
            j.xx = dx * nx;
            j.yy = dy * ny;
            j.xy = dx * ny + dy * nx;
            j.x = b * dx;
            j.y = b * dy;
        }
        EmissionKind::Sb2 => {
            j.xt = nx;
            j.yt = ny;
            j.t = b;
        }
        EmissionKind::Sb3 => {
            j.xxt = dx * nx;
            j.yyt = dy * ny;
            j.xyt = dx * ny + dy * nx;
            j.xt = b * dx;
            j.yt = b * dy;
        }
        EmissionKind::Tb0 => j.v = 1.0,
        EmissionKind::Tb1 => j.t = 1.0,
        EmissionKind::D => {
            j.x = nx;
            j.y = ny;
        }
    }
    j
}

/// Emission residual at one point. `phi` is the measured flux (data
/// residual only); `normal` is used by the boundary and data residuals.
#[allow(clippy::too_many_arguments)]
pub fn residual_emission(
    net_m: &Mlp,
    net_f: &Mlp,
    u_e_star: &Mlp,
    z: [f64; 3],
    normal: [f64; 2],
    phi: f64,
    kind: EmissionKind,
    coeffs: &Coefficients,
    boundary: BoundaryDerivative,
) -> f64 {
    let jet = net_m.jet(z, JetOrder::Third);
    let base = Affine {
        coef: emission_coef(kind, normal, coeffs, boundary),
        offset: 0.0,
    }
    .eval(&jet);
    match kind {
        EmissionKind::Int => base - net_f.value(z) * u_e_star.value(z),
        EmissionKind::D => base - phi,
        _ => base,
    }
}

/// Weighted sums of squared residuals, one per term. The data term is
/// stored without `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub int: f64,
    pub tb0: f64,
    pub tb1: f64,
    pub sb: [f64; 4],
    pub d: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.lambda * self.d + self.int + self.tb0 + self.tb1 + self.sb.iter().sum::<f64>();
        self
    }

    pub const LOG_HEADER: [&'static str; 13] = [
        "epoch", "int", "tb0", "tb1", "sb0", "sb1", "sb2", "sb3", "d", "total", "rate", "grad_norm", "clipped",
    ];

    /// Training-log row matching [`LossBreakdown::LOG_HEADER`].
    pub fn log_row(&self, epoch: usize, rate: f64, grad_norm: f64, clipped: bool) -> Vec<f64> {
        vec![
            epoch as f64,
            self.int,
            self.tb0,
            self.tb1,
            self.sb[0],
            self.sb[1],
            self.sb[2],
            self.sb[3],
            self.d,
            self.total,
            rate,
            grad_norm,
            if clipped { 1.0 } else { 0.0 },
        ]
    }

    pub fn log_table() -> Table {
        Table::new(Self::LOG_HEADER)
    }
}

/// Square roots of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainingErrors {
    pub int: f64,
    pub tb: [f64; 2],
    pub sb: [f64; 4],
    pub d: f64,
}

pub fn training_errors(b: &LossBreakdown) -> TrainingErrors {
    TrainingErrors {
        int: b.int.sqrt(),
        tb: [b.tb0.sqrt(), b.tb1.sqrt()],
        sb: b.sb.map(f64::sqrt),
        d: b.d.sqrt(),
    }
}

impl TrainingErrors {
    /// `λ E_d² + E_int² + Σ E_tb,k² + Σ E_sb,j²`.
    pub fn reconstructed_total(&self, lambda: f64) -> f64 {
        lambda * self.d * self.d
            + self.int * self.int
            + self.tb.iter().map(|e| e * e).sum::<f64>()
            + self.sb.iter().map(|e| e * e).sum::<f64>()
    }
}

/// `J1` and, if `want_grad`, its gradient.
pub fn empirical_loss_j1(
    net_e: &Mlp,
    set: &CollocationSet,
    coeffs: &Coefficients,
    data: &ExcitationData<'_>,
    want_grad: bool,
) -> (LossBreakdown, Option<Vec<f64>>) {
    let mut tape = net_e.tape();
    let mut grad = want_grad.then(|| vec![0.0; net_e.param_count()]);
    let mut out = LossBreakdown::default();
    let mut term = |kind: ExcitationKind, z: [f64; 3], normal: [f64; 2], w: f64, acc: &mut f64| {
        let aff = excitation_affine(kind, z, normal, coeffs, data);
        let jet = net_e.forward(z, excitation_order(kind), &mut tape);
        let r = aff.eval(&jet);
        *acc += w * r * r;
        if let Some(g) = grad.as_mut() {
            net_e.backward(&mut tape, &((2.0 * w * r) * aff.coef), g);
        }
    };
    for p in &set.interior {
        term(ExcitationKind::Int, p.z, [0.0, 0.0], p.w, &mut out.int);
    }
    for p in &set.boundary {
        term(ExcitationKind::Sb, p.z, p.normal, p.w, &mut out.sb[0]);
    }
    for p in &set.initial {
        term(ExcitationKind::Tb, p.z, [0.0, 0.0], p.w, &mut out.tb0);
    }
    (out.finish(), grad)
}

/// Gradients of `J2` with respect to the source and emission networks.
#[derive(Debug, Clone, PartialEq)]
pub struct J2Grad {
    pub source: Vec<f64>,
    pub emission: Vec<f64>,
}

/// `J2` and, if `want_grad`, its gradients.
#[allow(clippy::too_many_arguments)]
pub fn empirical_loss_j2(
    net_f: &Mlp,
    net_m: &Mlp,
    u_e_star: &Mlp,
    set: &CollocationSet,
    coeffs: &Coefficients,
    lambda: f64,
    boundary: BoundaryDerivative,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<J2Grad>)> {
    if !(lambda >= 0.0) {
        return Err(Error::Invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let mut tm = net_m.tape();
    let mut tf = net_f.tape();
    let mut te = u_e_star.tape();
    let mut grad = want_grad.then(|| J2Grad {
        source: vec![0.0; net_f.param_count()],
        emission: vec![0.0; net_m.param_count()],
    });
    let mut out = LossBreakdown {
        lambda,
        ..Default::default()
    };

    for p in &set.interior {
        let jm = net_m.forward(p.z, JetOrder::Second, &mut tm);
        let f = net_f.forward(p.z, JetOrder::Value, &mut tf).v;
        let ue = u_e_star.forward(p.z, JetOrder::Value, &mut te).v;
        let coef = emission_coef(EmissionKind::Int, [0.0, 0.0], coeffs, boundary);
        let r = Affine { coef, offset: 0.0 }.eval(&jm) - f * ue;
        out.int += p.w * r * r;
        if let Some(g) = grad.as_mut() {
            let s = 2.0 * p.w * r;
            net_m.backward(&mut tm, &(s * coef), &mut g.emission);
            net_f.backward(&mut tf, &Jet::constant(-s * ue), &mut g.source);
        }
    }

    let sb_kinds = [EmissionKind::Sb0, EmissionKind::Sb1, EmissionKind::Sb2, EmissionKind::Sb3];
    for p in &set.boundary {
        let jm = net_m.forward(p.z, JetOrder::Third, &mut tm);
        let mut seed = Jet::default();
        for (j, kind) in sb_kinds.iter().enumerate() {
            let coef = emission_coef(*kind, p.normal, coeffs, boundary);
            let r = Affine { coef, offset: 0.0 }.eval(&jm);
            out.sb[j] += p.w * r * r;
            seed = seed + (2.0 * p.w * r) * coef;
        }
        if let Some(g) = grad.as_mut() {
            net_m.backward(&mut tm, &seed, &mut g.emission);
        }
    }

    for p in &set.initial {
        let jm = net_m.forward(p.z, JetOrder::First, &mut tm);
        out.tb0 += p.w * jm.v * jm.v;
        out.tb1 += p.w * jm.t * jm.t;
        if let Some(g) = grad.as_mut() {
            let seed = Jet {
                v: 2.0 * p.w * jm.v,
                t: 2.0 * p.w * jm.t,
                ..Jet::default()
            };
            net_m.backward(&mut tm, &seed, &mut g.emission);
        }
    }

    for p in &set.data {
        let jm = net_m.forward(p.z, JetOrder::First, &mut tm);
        let coef = emission_coef(EmissionKind::D, p.normal, coeffs, boundary);
        let r = Affine {
            coef,
            offset: -p.value,
        }
        .eval(&jm);
        out.d += p.w * r * r;
        if let Some(g) = grad.as_mut() {
            if lambda != 0.0 {
                net_m.backward(&mut tm, &((2.0 * lambda * p.w * r) * coef), &mut g.emission);
            }
        }
    }
    Ok((out.finish(), grad))
}

/// Monte-Carlo estimate of `∫_{Ω×(0,T)} f` with `n` uniform samples, using
/// the same weights as the interior collocation set.
pub fn monte_carlo_integral(
    f: impl Fn(f64, f64, f64) -> f64,
    domain: ([f64; 2], [f64; 2], f64),
    n: usize,
    rng: &mut impl Rng,
) -> f64 {
    let ([x0, x1], [y0, y1], t_end) = domain;
    let w = (x1 - x0) * (y1 - y0) * t_end / n as f64;
    (0..n)
        .map(|_| f(rng.gen_range(x0..x1), rng.gen_range(y0..y1), rng.gen_range(0.0..t_end)))
        .sum::<f64>()
        * w
}

/// Tensor Gauss-free reference: composite Simpson rule with `m` (even)
/// panels per axis.
pub fn simpson_integral(f: impl Fn(f64, f64, f64) -> f64, domain: ([f64; 2], [f64; 2], f64), m: usize) -> f64 {
    let m = m + m % 2;
    let ([x0, x1], [y0, y1], t_end) = domain;
    let weights = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let h = (b - a) / m as f64;
        (0..=m)
            .map(|i| {
                let c = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                (a + i as f64 * h, c * h / 3.0)
            })
            .collect()
    };
    let (wx, wy, wt) = (weights(x0, x1), weights(y0, y1), weights(0.0, t_end));
    let mut s = 0.0;
    for &(x, a) in &wx {
        for &(y, b) in &wy {
            for &(t, c) in &wt {
                s += a * b * c * f(x, y, t);
            }
        }
    }
    s
}

/// Root-mean-square Monte-Carlo error over `reps` repetitions for each `n`.
pub fn quadrature_study(
    f: impl Fn(f64, f64, f64) -> f64 + Copy,
    domain: ([f64; 2], [f64; 2], f64),
    ns: &[usize],
    reps: usize,
    rng: &RngStream,
) -> Vec<(usize, f64)> {
    let exact = simpson_integral(f, domain, 64);
    ns.iter()
        .map(|&n| {
            let mut r = rng.substream(format!("n-{n}")).rng();
            let mse = (0..reps)
                .map(|_| {
                    let e = monte_carlo_integral(f, domain, n, &mut r) - exact;
                    e * e
                })
                .sum::<f64>()
                / reps as f64;
            (n, mse.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Init;
    use crate::synth::Measurement;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.collocation.n_int = 20;
        c.collocation.n_sb = 30;
        c.collocation.n_tb = 10;
        c.collocation.n_d = 15;
        c
    }

    fn samples() -> Vec<FluxSample> {
        vec![
            FluxSample {
                x: 0.0,
                y: 0.5,
                t: 0.5,
                normal: [-1.0, 0.0],
                value: 0.2,
                noisy: 0.25,
            },
            FluxSample {
                x: 0.5,
                y: 1.0,
                t: 1.0,
                normal: [0.0, 1.0],
                value: -0.1,
                noisy: -0.05,
            },
        ]
    }

    #[test]
    fn reference_counts_and_weights() {
        let cfg = ExperimentConfig::default();
        let set = sample_collocation(&cfg, &RngStream::new(0, "c"), 0, Some(&samples()));
        assert_eq!(set.interior.len(), 500);
        assert_eq!(set.boundary.len(), 2000);
        assert_eq!(set.initial.len(), 500);
        assert_eq!(set.data.len(), 500);
        assert!(set.interior.iter().all(|p| p.w == 1.0 / 500.0));
        let total: f64 = set.boundary.iter().map(|p| p.w).sum();
        assert!((total - 4.0).abs() < 1e-12);
        let data_total: f64 = set.data.iter().map(|p| p.w).sum();
        assert!((data_total - 4.0).abs() < 1e-12);
        let init_total: f64 = set.initial.iter().map(|p| p.w).sum();
        assert!((init_total - 1.0).abs() < 1e-12);
        assert!(set.initial.iter().all(|p| p.z[2] == 0.0));
    }

    #[test]
    fn boundary_points_split_by_length() {
        assert_eq!(split_by_length(2000, &[1.0; 4]), vec![500; 4]);
        assert_eq!(split_by_length(10, &[1.0, 1.0, 2.0, 2.0]), vec![2, 2, 3, 3]);
        assert_eq!(split_by_length(3, &[1.0; 4]).iter().sum::<usize>(), 3);
        let mut cfg = small_config();
        cfg.domain.x = [0.0, 2.0];
        cfg.collocation.n_sb = 60;
        let set = sample_collocation(&cfg, &RngStream::new(0, "c"), 0, None);
        let bottom = set.boundary.iter().filter(|p| p.normal == [0.0, -1.0]).count();
        let left = set.boundary.iter().filter(|p| p.normal == [-1.0, 0.0]).count();
        assert_eq!((bottom, left), (20, 10));
        for p in &set.boundary {
            let on_edge = p.z[0] == 0.0 || p.z[0] == 2.0 || p.z[1] == 0.0 || p.z[1] == 1.0;
            assert!(on_edge);
        }
    }

    #[test]
    fn sampling_is_reproducible_per_epoch() {
        let cfg = small_config();
        let rng = RngStream::new(4, "c");
        let a = sample_collocation(&cfg, &rng, 3, Some(&samples()));
        let b = sample_collocation(&cfg, &rng, 3, Some(&samples()));
        let c = sample_collocation(&cfg, &rng, 4, Some(&samples()));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn zero_net() -> Mlp {
        Mlp::constant(&[3, 6, 6, 1], 0.0).unwrap()
    }

    #[test]
    fn zero_net_has_zero_excitation_residuals_for_zero_data() {
        let zero_g = ExcitationData {
            g: Box::new(|_, _, _, _| 0.0),
            ..Default::default()
        };
        let c = Coefficients::default();
        for kind in [ExcitationKind::Int, ExcitationKind::Sb, ExcitationKind::Tb] {
            assert_eq!(residual_excitation(&zero_net(), [0.3, 0.4, 0.5], [1.0, 0.0], kind, &c, &zero_g), 0.0);
        }
    }

    fn affine_x() -> Mlp {
        let mut net = Mlp::new(&[3, 1], Init::Zero, &RngStream::new(0, "x")).unwrap();
        net.set_params(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        net
    }

    #[test]
    fn affine_net_residuals() {
        let c = Coefficients::default();
        let zero_g = ExcitationData {
            g: Box::new(|_, _, _, _| 0.0),
            ..Default::default()
        };
        // u = x: interior residual is μ_a x, left-edge Robin residual is -1.
        let r = residual_excitation(&affine_x(), [0.4, 0.2, 0.3], [0.0, 0.0], ExcitationKind::Int, &c, &zero_g);
        assert!((r - c.mu_a * 0.4).abs() < 1e-15);
        let r = residual_excitation(&affine_x(), [0.0, 0.7, 0.3], [-1.0, 0.0], ExcitationKind::Sb, &c, &zero_g);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn emission_trivial_residuals() {
        let c = Coefficients::default();
        let kinds = [
            EmissionKind::Int,
            EmissionKind::Sb0,
            EmissionKind::Sb1,
            EmissionKind::Sb2,
            EmissionKind::Sb3,
            EmissionKind::Tb0,
            EmissionKind::Tb1,
            EmissionKind::D,
        ];
        for kind in kinds {
            let r = residual_emission(&zero_net(), &zero_net(), &zero_net(), [0.2, 0.0, 0.5], [0.0, -1.0], 0.0, kind, &c, BoundaryDerivative::Tangential);
            assert_eq!(r, 0.0);
        }
        let one = Mlp::constant(&[3, 4, 1], 1.0).unwrap();
        let r = residual_emission(&zero_net(), &one, &one, [0.2, 0.3, 0.5], [0.0, 0.0], 0.0, EmissionKind::Int, &c, BoundaryDerivative::Tangential);
        assert_eq!(r, -1.0);
    }

    #[test]
    fn boundary_derivative_functionals() {
        let c = Coefficients {
            beta: 2.0,
            ..Coefficients::default()
        };
        let j = Jet::from_array(std::array::from_fn(|i| 1.0 + i as f64));
        let right = [1.0, 0.0];
        let ev = |k, bd| Affine { coef: emission_coef(k, right, &c, bd), offset: 0.0 }.eval(&j);
        // tangent (0, 1) on x = 1: ∂y(∂x u + β u)
        assert_eq!(ev(EmissionKind::Sb1, BoundaryDerivative::Tangential), j.xy + 2.0 * j.y);
        assert_eq!(ev(EmissionKind::Sb3, BoundaryDerivative::Tangential), j.xyt + 2.0 * j.yt);
        assert_eq!(ev(EmissionKind::Sb1, BoundaryDerivative::Normal), j.xx + 2.0 * j.x);
        assert_eq!(ev(EmissionKind::Sb3, BoundaryDerivative::Normal), j.xxt + 2.0 * j.xt);
        assert_eq!(BoundaryDerivative::Tangential.direction([0.0, -1.0]), [1.0, 0.0]);
    }

    #[test]
    fn zero_inputs_give_zero_losses() {
        let cfg = small_config();
        let set = sample_collocation(&cfg, &RngStream::new(0, "c"), 0, None);
        let c = Coefficients::default();
        let zero_g = ExcitationData {
            g: Box::new(|_, _, _, _| 0.0),
            ..Default::default()
        };
        let (j1, g1) = empirical_loss_j1(&zero_net(), &set, &c, &zero_g, true);
        assert_eq!(j1.total, 0.0);
        assert!(g1.unwrap().iter().all(|&g| g == 0.0));
        let (j2, _) = empirical_loss_j2(&zero_net(), &zero_net(), &zero_net(), &set, &c, 100.0, BoundaryDerivative::Tangential, true).unwrap();
        assert_eq!(j2.total, 0.0);
    }

    #[test]
    fn single_point_loss_is_weight_times_square() {
        let c = Coefficients::default();
        let set = CollocationSet {
            initial: vec![Point {
                z: [0.3, 0.3, 0.0],
                w: 0.25,
            }],
            ..Default::default()
        };
        let net = Mlp::constant(&[3, 4, 1], 2.0).unwrap();
        let (j1, _) = empirical_loss_j1(&net, &set, &c, &ExcitationData::default(), false);
        assert_eq!(j1.tb0, 0.25 * 4.0);
        assert_eq!(j1.total, 1.0);
    }

    fn random_nets(seed: u64) -> (Mlp, Mlp, Mlp) {
        let r = |l: &str| RngStream::new(seed, l);
        (
            Mlp::new(&[3, 5, 5, 1], Init::Scaled, &r("f")).unwrap(),
            Mlp::new(&[3, 5, 5, 1], Init::Scaled, &r("m")).unwrap(),
            Mlp::new(&[3, 5, 1], Init::Scaled, &r("e")).unwrap(),
        )
    }

    #[test]
    fn j2_matches_pointwise_reference() {
        j2_reference_case(BoundaryDerivative::Tangential);
        j2_reference_case(BoundaryDerivative::Normal);
    }

    fn j2_reference_case(bd: BoundaryDerivative) {
        let cfg = small_config();
        let set = sample_collocation(&cfg, &RngStream::new(2, "c"), 0, Some(&samples()));
        let c = Coefficients {
            c: 2.0,
            kappa: 0.7,
            mu_a: 0.3,
            beta: 1.4,
        };
        let (f, m, e) = random_nets(5);
        let (j2, _) = empirical_loss_j2(&f, &m, &e, &set, &c, 3.0, bd, false).unwrap();
        let res = |z, n, phi, k| residual_emission(&m, &f, &e, z, n, phi, k, &c, bd);
        let sq = |v: f64| v * v;
        let int: f64 = set.interior.iter().map(|p| p.w * sq(res(p.z, [0.0, 0.0], 0.0, EmissionKind::Int))).sum();
        let tb0: f64 = set.initial.iter().map(|p| p.w * sq(res(p.z, [0.0, 0.0], 0.0, EmissionKind::Tb0))).sum();
        let tb1: f64 = set.initial.iter().map(|p| p.w * sq(res(p.z, [0.0, 0.0], 0.0, EmissionKind::Tb1))).sum();
        let d: f64 = set.data.iter().map(|p| p.w * sq(res(p.z, p.normal, p.value, EmissionKind::D))).sum();
        let kinds = [EmissionKind::Sb0, EmissionKind::Sb1, EmissionKind::Sb2, EmissionKind::Sb3];
        for (j, k) in kinds.iter().enumerate() {
            let sb: f64 = set.boundary.iter().map(|p| p.w * sq(res(p.z, p.normal, 0.0, *k))).sum();
            assert!((sb - j2.sb[j]).abs() <= 1e-12 * sb.max(1e-300));
        }
        for (a, b) in [(int, j2.int), (tb0, j2.tb0), (tb1, j2.tb1), (d, j2.d)] {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
        }
        let (j0, _) = empirical_loss_j2(&f, &m, &e, &set, &c, 0.0, bd, false).unwrap();
        assert!((j2.total - j0.total - 3.0 * j2.d).abs() <= 1e-12 * j2.total);
        assert!(empirical_loss_j2(&f, &m, &e, &set, &c, -1.0, bd, false).is_err());
    }

    #[test]
    fn j1_gradient_matches_finite_differences() {
        let cfg = small_config();
        let set = sample_collocation(&cfg, &RngStream::new(3, "c"), 0, None);
        let c = Coefficients::default();
        let data = ExcitationData::default();
        let net = Mlp::new(&[3, 6, 6, 1], Init::Scaled, &RngStream::new(8, "e")).unwrap();
        let (_, grad) = empirical_loss_j1(&net, &set, &c, &data, true);
        let grad = grad.unwrap();
        let mut r = RngStream::new(9, "dir").rng();
        let dir: Vec<f64> = (0..net.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let eps = 1e-6;
        let shifted = |s: f64| {
            let mut n = net.clone();
            for (p, d) in n.params_mut().iter_mut().zip(&dir) {
                *p += s * d;
            }
            empirical_loss_j1(&n, &set, &c, &data, false).0.total
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn j2_gradients_match_finite_differences() {
        j2_gradient_case(BoundaryDerivative::Tangential);
        j2_gradient_case(BoundaryDerivative::Normal);
    }

    fn j2_gradient_case(bd: BoundaryDerivative) {
        let cfg = small_config();
        let set = sample_collocation(&cfg, &RngStream::new(3, "c"), 0, Some(&samples()));
        let c = Coefficients::default();
        let (f, m, e) = random_nets(11);
        let (_, grad) = empirical_loss_j2(&f, &m, &e, &set, &c, 10.0, bd, true).unwrap();
        let grad = grad.unwrap();
        let mut r = RngStream::new(12, "dir").rng();
        let df: Vec<f64> = (0..f.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let dm: Vec<f64> = (0..m.param_count()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let eps = 1e-6;
        let shifted = |s: f64| {
            let (mut f2, mut m2) = (f.clone(), m.clone());
            f2.params_mut().iter_mut().zip(&df).for_each(|(p, d)| *p += s * d);
            m2.params_mut().iter_mut().zip(&dm).for_each(|(p, d)| *p += s * d);
            empirical_loss_j2(&f2, &m2, &e, &set, &c, 10.0, bd, false).unwrap().0.total
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let an: f64 = grad.source.iter().zip(&df).map(|(g, d)| g * d).sum::<f64>()
            + grad.emission.iter().zip(&dm).map(|(g, d)| g * d).sum::<f64>();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn training_errors_reconcile_with_total() {
        let zero = training_errors(&LossBreakdown::default());
        assert_eq!(zero, TrainingErrors::default());
        let b = LossBreakdown {
            int: 0.3,
            tb0: 0.01,
            tb1: 0.02,
            sb: [0.1, 0.2, 0.3, 0.4],
            d: 0.05,
            lambda: 100.0,
            total: 0.0,
        }
        .finish();
        let e = training_errors(&b);
        assert_eq!(e.int, 0.3f64.sqrt());
        assert!((e.reconstructed_total(100.0) - b.total).abs() <= 1e-12 * b.total);
    }

    #[test]
    fn monte_carlo_error_shrinks_like_inverse_sqrt() {
        let f = |x: f64, y: f64, t: f64| (x + 2.0 * y).sin() * (1.0 + t * t);
        let dom = ([0.0, 1.0], [0.0, 1.0], 1.0);
        let study = quadrature_study(f, dom, &[100, 1000, 10000], 40, &RngStream::new(0, "mc"));
        let slope = crate::metrics::loglog_slope(
            &study.iter().map(|(n, _)| *n as f64).collect::<Vec<_>>(),
            &study.iter().map(|(_, e)| *e).collect::<Vec<_>>(),
        );
        assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn simpson_reference_is_accurate() {
        let v = simpson_integral(|x, y, t| x * y * t, ([0.0, 1.0], [0.0, 1.0], 1.0), 8);
        assert!((v - 0.125).abs() < 1e-14);
    }

    #[test]
    fn log_row_has_header_width() {
        let row = LossBreakdown::default().log_row(3, 1e-3, 0.5, true);
        assert_eq!(row.len(), LossBreakdown::LOG_HEADER.len());
        let _ = Measurement {
            samples: samples(),
            measure: 1.0,
        };
    }
}
