//! Backward-Euler solver for `(c⁻¹∂_t + A) u = S`, `∂_n u + βu = g`,
//! `u(·,0) = u₀` with `A u = -∇·(κ∇u) + μ_a u`.
//!
//! The spatial operator is the conservative five-point stencil on the
//! vertex-centred lattice. Boundary rows come from eliminating a ghost node
//! with the Robin condition and scaling the row by the half-cell measure, so
//! each step solves a symmetric positive definite M-matrix system. Every row
//! is therefore "cell measure × equation":
//!
//! ```text
//! m_P (1/(cΔt) + μ_a) u_P + Σ_faces κ_f ℓ_f/h (u_P − u_N) + Σ_edges κ_P ℓ_e (β u_P − g)
//!     = m_P (u_P^old/(cΔt) + S_P)
//! ```

use serde::{Deserialize, Serialize};

use super::cg::{self, FivePoint};
use super::{BoundaryTrace, Edge, FieldSeries, SpaceTimeGrid, SpatialMesh};
use crate::error::{Error, Result};

const CG_TOL: f64 = 1e-10;

/// Scalar model coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    /// Speed of light in the medium.
    pub c: f64,
    /// Diffusion coefficient.
    pub kappa: f64,
    /// Background absorption.
    pub mu_a: f64,
    /// Robin coefficient.
    pub beta: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Self {
            c: 1.0,
            kappa: 1.0,
            mu_a: 0.1,
            beta: 1.0,
        }
    }
}

pub enum Source<'a> {
    Zero,
    /// Fills nodal source values for time level `n` at time `t`.
    Nodal(Box<dyn Fn(usize, f64, &mut [f64]) + 'a>),
}

pub enum RobinData<'a> {
    Zero,
    /// `g(x, y, t, outward_normal)`; corners are evaluated once per edge.
    Pointwise(Box<dyn Fn(f64, f64, f64, [f64; 2]) -> f64 + 'a>),
    /// Data on Γ at the grid time levels; zero on the rest of the boundary.
    Trace(&'a BoundaryTrace),
}

/// Coefficients and data of one parabolic initial-boundary value problem.
pub struct ParabolicProblem<'a> {
    pub c: f64,
    pub beta: f64,
    kappa: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    mu_a: Box<dyn Fn(f64, f64) -> f64 + 'a>,
    source: Source<'a>,
    robin: RobinData<'a>,
    initial: Option<Box<dyn Fn(f64, f64) -> f64 + 'a>>,
}

impl<'a> ParabolicProblem<'a> {
    /// Homogeneous problem (zero source, zero Robin data, zero initial state).
    pub fn new(coeffs: &Coefficients) -> Self {
        let (kappa, mu_a) = (coeffs.kappa, coeffs.mu_a);
        Self {
            c: coeffs.c,
            beta: coeffs.beta,
            kappa: Box::new(move |_, _| kappa),
            mu_a: Box::new(move |_, _| mu_a),
            source: Source::Zero,
            robin: RobinData::Zero,
            initial: None,
        }
    }

    pub fn with_kappa(mut self, kappa: impl Fn(f64, f64) -> f64 + 'a) -> Self {
        self.kappa = Box::new(kappa);
        self
    }

    pub fn with_mu_a(mut self, mu_a: impl Fn(f64, f64) -> f64 + 'a) -> Self {
        self.mu_a = Box::new(mu_a);
        self
    }

    pub fn with_source(mut self, source: Source<'a>) -> Self {
        self.source = source;
        self
    }

    /// Pointwise source `S(x, y, t)` evaluated on `mesh` nodes.
    pub fn with_source_fn(
        self,
        mesh: SpatialMesh,
        f: impl Fn(f64, f64, f64) -> f64 + 'a,
    ) -> Self {
        self.with_source(Source::Nodal(Box::new(move |_, t, out: &mut [f64]| {
            for (k, v) in out.iter_mut().enumerate() {
                let (x, y) = mesh.coords(k);
                *v = f(x, y, t);
            }
        })))
    }

    pub fn with_robin(mut self, robin: RobinData<'a>) -> Self {
        self.robin = robin;
        self
    }

    pub fn with_robin_fn(self, g: impl Fn(f64, f64, f64, [f64; 2]) -> f64 + 'a) -> Self {
        self.with_robin(RobinData::Pointwise(Box::new(g)))
    }

    pub fn with_initial(mut self, u0: impl Fn(f64, f64) -> f64 + 'a) -> Self {
        self.initial = Some(Box::new(u0));
        self
    }

    fn validate(&self, mesh: &SpatialMesh) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Invalid("c must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Invalid("beta must be positive".into()));
        }
        for k in 0..mesh.len() {
            let (x, y) = mesh.coords(k);
            if !((self.kappa)(x, y) > 0.0) {
                return Err(Error::Invalid(format!("kappa must be positive at ({x}, {y})")));
            }
            if !((self.mu_a)(x, y) >= 0.0) {
                return Err(Error::Invalid(format!("mu_a must be nonnegative at ({x}, {y})")));
            }
        }
        Ok(())
    }
}

/// Boundary segment of a node's control cell: which edge and its length.
fn boundary_segments(mesh: &SpatialMesh, node: usize) -> impl Iterator<Item = (Edge, f64)> {
    let (i, j) = mesh.ij(node);
    let wy = mesh.weight_y(j);
    let wx = mesh.weight_x(i);
    mesh.edges_of(node).into_iter().map(move |e| {
        let len = match e {
            Edge::Left | Edge::Right => wy,
            Edge::Bottom | Edge::Top => wx,
        };
        (e, len)
    })
}

/// Time-independent parts of the discrete operator.
struct Discretization {
    mesh: SpatialMesh,
    mass: Vec<f64>,
    kappa: Vec<f64>,
    step: FivePoint,
}

impl Discretization {
    fn new(problem: &ParabolicProblem<'_>, mesh: SpatialMesh, ht: f64) -> Self {
        let n = mesh.len();
        let nx = mesh.nx;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let mass: Vec<f64> = (0..n).map(|k| mesh.weight(k)).collect();
        let kappa: Vec<f64> = (0..n)
            .map(|k| {
                let (x, y) = mesh.coords(k);
                (problem.kappa)(x, y)
            })
            .collect();
        let harmonic = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let inv_cdt = 1.0 / (problem.c * ht);

        let mut diag = vec![0.0; n];
        let mut east = vec![0.0; n];
        let mut north = vec![0.0; n];
        for k in 0..n {
            let (i, j) = mesh.ij(k);
            let (x, y) = mesh.coords(k);
            diag[k] += mass[k] * (inv_cdt + (problem.mu_a)(x, y));
            if i + 1 < nx {
                let c = harmonic(kappa[k], kappa[k + 1]) * mesh.weight_y(j) / hx;
                east[k] = c;
                diag[k] += c;
                diag[k + 1] += c;
            }
            if j + 1 < mesh.ny {
                let c = harmonic(kappa[k], kappa[k + nx]) * mesh.weight_x(i) / hy;
                north[k] = c;
                diag[k] += c;
                diag[k + nx] += c;
            }
            for (_, len) in boundary_segments(&mesh, k) {
                diag[k] += kappa[k] * problem.beta * len;
            }
        }
        Self {
            mesh,
            mass,
            kappa,
            step: FivePoint {
                nx,
                diag,
                east,
                north,
            },
        }
    }

    /// Adds the Robin load `κ ℓ g` for time level `level` to `rhs`.
    fn add_robin_load(
        &self,
        robin: &RobinData<'_>,
        level: usize,
        t: f64,
        rhs: &mut [f64],
    ) -> Result<()> {
        match robin {
            RobinData::Zero => {}
            RobinData::Pointwise(g) => {
                for k in 0..self.mesh.len() {
                    if !self.mesh.is_boundary(k) {
                        continue;
                    }
                    let (x, y) = self.mesh.coords(k);
                    for (edge, len) in boundary_segments(&self.mesh, k) {
                        rhs[k] += self.kappa[k] * len * g(x, y, t, edge.normal());
                    }
                }
            }
            RobinData::Trace(trace) => {
                let row = trace.values.get(level).ok_or_else(|| {
                    Error::Shape(format!("boundary data has no time level {level}"))
                })?;
                for (g, gn) in trace.nodes.iter().enumerate() {
                    rhs[gn.node] += self.kappa[gn.node] * gn.weight * row[g];
                }
            }
        }
        Ok(())
    }
}

fn check_trace_fits(robin: &RobinData<'_>, grid: &SpaceTimeGrid) -> Result<()> {
    if let RobinData::Trace(trace) = robin {
        trace.check_shape()?;
        if trace.mesh != grid.mesh || trace.times.len() != grid.nt {
            return Err(Error::Shape("boundary data does not match the grid".into()));
        }
    }
    Ok(())
}

fn solve_step(
    op: &FivePoint,
    rhs: &[f64],
    guess: &mut [f64],
    level: usize,
) -> Result<()> {
    let max_iter = 20 * rhs.len() + 100;
    let out = cg::solve(op, rhs, guess, CG_TOL, max_iter);
    if !out.converged {
        return Err(Error::NoConvergence {
            level,
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    if let Some(k) = guess.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "solution at time level {level}, node {k}"
        )));
    }
    Ok(())
}

/// Backward-Euler forward solve on `grid`; one CG solve per time level.
pub fn solve_forward(problem: &ParabolicProblem<'_>, grid: &SpaceTimeGrid) -> Result<FieldSeries> {
    let mesh = grid.mesh;
    problem.validate(&mesh)?;
    check_trace_fits(&problem.robin, grid)?;
    let ht = grid.ht();
    let disc = Discretization::new(problem, mesh, ht);
    let inv_cdt = 1.0 / (problem.c * ht);
    let n = mesh.len();

    let mut out = FieldSeries::on_grid(grid);
    if let Some(u0) = &problem.initial {
        for k in 0..n {
            let (x, y) = mesh.coords(k);
            out.values[0][k] = u0(x, y);
        }
    }
    let mut src = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for level in 1..grid.nt {
        let t = grid.time(level);
        match &problem.source {
            Source::Zero => src.iter_mut().for_each(|v| *v = 0.0),
            Source::Nodal(f) => f(level, t, &mut src),
        }
        let prev = &out.values[level - 1];
        for k in 0..n {
            rhs[k] = disc.mass[k] * (inv_cdt * prev[k] + src[k]);
        }
        disc.add_robin_load(&problem.robin, level, t, &mut rhs)?;
        if let Some(k) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "right-hand side at time level {level}, node {k}"
            )));
        }
        let mut u = prev.clone();
        solve_step(&disc.step, &rhs, &mut u, level)?;
        out.values[level] = u;
    }
    Ok(out)
}

/// Solves the adjoint problem `(-c⁻¹∂_t + A)φ = 0`, `φ(·,T) = 0`,
/// `Bφ = ω` on Γ and `0` elsewhere, by running [`solve_forward`] on the
/// time-reversed data and reversing the result.
pub fn solve_adjoint(
    omega: &BoundaryTrace,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<FieldSeries> {
    let reversed = omega.reversed();
    let problem = ParabolicProblem::new(coeffs).with_robin(RobinData::Trace(&reversed));
    let mut phi = solve_forward(&problem, grid)?;
    phi.values.reverse();
    phi.times = grid.times();
    Ok(phi)
}

/// Reference path for [`solve_adjoint`]: marches the backward equation
/// directly from `t = T` down to `t = 0` without reversing any data.
pub fn solve_adjoint_direct(
    omega: &BoundaryTrace,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<FieldSeries> {
    let problem = ParabolicProblem::new(coeffs).with_robin(RobinData::Trace(omega));
    problem.validate(&grid.mesh)?;
    check_trace_fits(&problem.robin, grid)?;
    let ht = grid.ht();
    let disc = Discretization::new(&problem, grid.mesh, ht);
    let inv_cdt = 1.0 / (coeffs.c * ht);
    let n = grid.mesh.len();
    let mut out = FieldSeries::on_grid(grid);
    let mut rhs = vec![0.0; n];
    for level in (0..grid.nt - 1).rev() {
        let next = &out.values[level + 1];
        for k in 0..n {
            rhs[k] = disc.mass[k] * inv_cdt * next[k];
        }
        disc.add_robin_load(&problem.robin, level, grid.time(level), &mut rhs)?;
        let mut phi = next.clone();
        solve_step(&disc.step, &rhs, &mut phi, level)?;
        out.values[level] = phi;
    }
    Ok(out)
}
