//! Refinement studies against manufactured solutions.

use std::f64::consts::PI;

use super::{solve_forward, Coefficients, FieldSeries, ParabolicProblem, SpaceTimeGrid};
use crate::error::Result;
use crate::metrics::loglog_slope;

/// Smooth solution with its source and gradient, for a given `Coefficients`.
pub trait Manufactured {
    fn u(&self, x: f64, y: f64, t: f64) -> f64;
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2];
    fn source(&self, c: &Coefficients, x: f64, y: f64, t: f64) -> f64;
}

/// `u = sin(2t) cos(πx) cos(πy)`.
pub struct Oscillating;

impl Manufactured for Oscillating {
    fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        (2.0 * t).sin() * (PI * x).cos() * (PI * y).cos()
    }
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = (2.0 * t).sin();
        [
            -PI * s * (PI * x).sin() * (PI * y).cos(),
            -PI * s * (PI * x).cos() * (PI * y).sin(),
        ]
    }
    fn source(&self, c: &Coefficients, x: f64, y: f64, t: f64) -> f64 {
        let xy = (PI * x).cos() * (PI * y).cos();
        2.0 * (2.0 * t).cos() * xy / c.c + (2.0 * PI * PI * c.kappa + c.mu_a) * (2.0 * t).sin() * xy
    }
}

/// `u = t sin(πx) sin(πy)`; linear in `t`, so backward Euler adds no time
/// error.
pub struct LinearInTime;

impl Manufactured for LinearInTime {
    fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        t * (PI * x).sin() * (PI * y).sin()
    }
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        [
            PI * t * (PI * x).cos() * (PI * y).sin(),
            PI * t * (PI * x).sin() * (PI * y).cos(),
        ]
    }
    fn source(&self, c: &Coefficients, x: f64, y: f64, t: f64) -> f64 {
        let s = (PI * x).sin() * (PI * y).sin();
        s / c.c + (2.0 * PI * PI * c.kappa + c.mu_a) * t * s
    }
}

/// Max-norm error of the solver against `m` on `grid`.
pub fn manufactured_error(m: &dyn Manufactured, c: &Coefficients, grid: &SpaceTimeGrid) -> Result<f64> {
    let p = ParabolicProblem::new(c)
        .with_source_fn(grid.mesh, |x, y, t| m.source(c, x, y, t))
        .with_robin_fn(|x, y, t, n| {
            let g = m.grad(x, y, t);
            n[0] * g[0] + n[1] * g[1] + c.beta * m.u(x, y, t)
        })
        .with_initial(|x, y| m.u(x, y, 0.0));
    let u = solve_forward(&p, grid)?;
    let exact = FieldSeries::from_fn(grid.mesh, grid.times(), |x, y, t| m.u(x, y, t));
    Ok(u.zip_with(&exact, |a, b| a - b)?.max_abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    /// Step size refined at each level (`h_t` or `h_x`).
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Refines the time step at a fixed `n_space × n_space` mesh.
pub fn time_order_study(c: &Coefficients, n_space: usize, nts: &[usize]) -> Result<ConvergenceStudy> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for &nt in nts {
        let g = SpaceTimeGrid::unit(n_space, nt, 1.0)?;
        steps.push(g.ht());
        errors.push(manufactured_error(&Oscillating, c, &g)?);
    }
    let slope = loglog_slope(&steps, &errors);
    Ok(ConvergenceStudy { steps, errors, slope })
}

/// Refines the spatial mesh with the time-linear solution.
pub fn space_order_study(c: &Coefficients, ns: &[usize], nt: usize) -> Result<ConvergenceStudy> {
    let mut steps = Vec::new();
    let mut errors = Vec::new();
    for &n in ns {
        let g = SpaceTimeGrid::unit(n, nt, 1.0)?;
        steps.push(g.mesh.hx());
        errors.push(manufactured_error(&LinearInTime, c, &g)?);
    }
    let slope = loglog_slope(&steps, &errors);
    Ok(ConvergenceStudy { steps, errors, slope })
}
