//! Five-point symmetric operator and Jacobi-preconditioned conjugate gradients.

/// Symmetric five-point matrix on an `nx × ny` lattice.
///
/// Off-diagonal entries are stored as positive couplings `c` with matrix
/// entry `-c`: `east[k]` couples node `k` to `k + 1`, `north[k]` couples
/// node `k` to `k + nx`.
#[derive(Debug, Clone)]
pub(crate) struct FivePoint {
    pub nx: usize,
    pub diag: Vec<f64>,
    pub east: Vec<f64>,
    pub north: Vec<f64>,
}

impl FivePoint {
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        let nx = self.nx;
        for k in 0..n {
            let mut s = self.diag[k] * x[k];
            if k % nx + 1 < nx {
                s -= self.east[k] * x[k + 1];
            }
            if k % nx > 0 {
                s -= self.east[k - 1] * x[k - 1];
            }
            if k + nx < n {
                s -= self.north[k] * x[k + nx];
            }
            if k >= nx {
                s -= self.north[k - nx] * x[k - nx];
            }
            y[k] = s;
        }
    }
}

pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Solves `A x = b` in place starting from the guess in `x`; stops when
/// `‖b - A x‖ ≤ rel_tol · ‖b‖`.
pub(crate) fn solve(
    a: &FivePoint,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let target = rel_tol * b_norm;
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut z: Vec<f64> = r.iter().zip(&a.diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let mut it = 0;
    while res > target && it < max_iter {
        a.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = dot(&r, &r).sqrt();
        it += 1;
        if res <= target {
            break;
        }
        for k in 0..n {
            z[k] = r[k] / a.diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    CgOutcome {
        iterations: it,
        residual: res / b_norm,
        converged: res <= target,
    }
}
