//! Adjoint-based bilinear functional `L(p, ω) = Σ_k ∫_{t_{k-1}}^{t_k} ∫_Ω p_k φ[ω]`,
//! the weighted norm `‖p‖_L = sup_ω |L(p, ω)| / ‖ω‖` estimated over a finite
//! basis, and the Lipschitz stability check against boundary flux data.
//!
//! With `B = ∂_n + β`, the adjoint pairing satisfies
//! `L(p, ω) = ∫∫_Γ κ U ω = -(κ/β) ∫∫_Γ ω ∂_n U`, where `U` solves the
//! emission problem with source `Σ p_k χ_k`. Cauchy-Schwarz then bounds
//! `‖p‖_L` by `(κ/β) ‖∂_n U‖_{L²(Γ×(0,T))}`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{
    boundary_flux, linspace, solve_adjoint, solve_forward, trapezoid_weights, BoundaryTrace,
    Coefficients, FieldSeries, SpaceTimeGrid, SpaceTimeInner, SpatialMesh,
};
use crate::io::{export_table, Table};
use crate::rng::RngStream;
use crate::synth::SourceVector;

/// Trapezoid nodes and weights for `∫_a^b` using the grid levels inside
/// `(a, b)` plus both endpoints.
fn interval_rule(times: &[f64], a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut ts = vec![a];
    ts.extend(times.iter().copied().filter(|&t| t > a && t < b));
    ts.push(b);
    let w = trapezoid_weights(&ts);
    (ts, w)
}

/// `Φ_k = ∫_{t_{k-1}}^{t_k} φ(·, t) dt` for every interval of `time_mesh`,
/// with `Σ_n w_n ‖φ(t_n)‖` alongside (the operator-norm bound per interval).
fn interval_kernels(phi: &FieldSeries, time_mesh: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mesh = phi.mesh;
    let mut kernels = Vec::with_capacity(time_mesh.len() - 1);
    let mut bounds = Vec::with_capacity(time_mesh.len() - 1);
    for win in time_mesh.windows(2) {
        let (ts, ws) = interval_rule(&phi.times, win[0], win[1]);
        let mut acc = vec![0.0; mesh.len()];
        let mut bound = 0.0;
        for (t, w) in ts.iter().zip(&ws) {
            let level = phi.at_time(*t);
            let norm = level
                .iter()
                .enumerate()
                .map(|(k, v)| mesh.weight(k) * v * v)
                .sum::<f64>()
                .sqrt();
            bound += w * norm;
            for (a, v) in acc.iter_mut().zip(&level) {
                *a += w * v;
            }
        }
        kernels.push(acc);
        bounds.push(bound);
    }
    (kernels, bounds)
}

fn pair_with_kernels(p: &SourceVector, kernels: &[Vec<f64>]) -> f64 {
    p.components
        .iter()
        .zip(kernels)
        .map(|(pk, phi)| {
            pk.iter()
                .zip(phi)
                .enumerate()
                .map(|(n, (a, b))| p.mesh.weight(n) * a * b)
                .sum::<f64>()
        })
        .sum()
}

/// `Σ_k ∫_{t_{k-1}}^{t_k} ∫_Ω p_k φ` for a given adjoint field.
pub fn pair_with_adjoint(p: &SourceVector, phi: &FieldSeries) -> Result<f64> {
    p.check_shape()?;
    if p.mesh != phi.mesh {
        return Err(Error::Shape("source vector and adjoint field use different meshes".into()));
    }
    let (kernels, _) = interval_kernels(phi, &p.times);
    Ok(pair_with_kernels(p, &kernels))
}

/// `L(p, ω)`: one adjoint solve followed by [`pair_with_adjoint`].
pub fn bilinear_functional(
    p: &SourceVector,
    omega: &BoundaryTrace,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<f64> {
    let phi = solve_adjoint(omega, grid, coeffs)?;
    pair_with_adjoint(p, &phi)
}

/// Emission field and its flux on Γ for the semi-discrete source `p`.
pub fn emission_flux(
    p: &SourceVector,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<(FieldSeries, BoundaryTrace)> {
    p.check_shape()?;
    if p.mesh != grid.mesh {
        return Err(Error::Shape("source vector is not on the grid mesh".into()));
    }
    let u = solve_forward(&p.problem(coeffs, grid), grid)?;
    let flux = boundary_flux(&u, grid)?;
    Ok((u, flux))
}

/// Both sides of the adjoint identity for one `(p, ω)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `L(p, ω)` from the adjoint solve.
    pub functional: f64,
    /// `-(κ/β) ⟨ω, ∂_n U⟩_{Γ×(0,T)}` from the emission solve.
    pub data_side: f64,
}

impl IdentityCheck {
    pub fn relative_mismatch(&self) -> f64 {
        (self.functional - self.data_side).abs() / self.functional.abs().max(self.data_side.abs())
    }
}

pub fn identity_check(
    p: &SourceVector,
    omega: &BoundaryTrace,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<IdentityCheck> {
    let functional = bilinear_functional(p, omega, grid, coeffs)?;
    let (_, flux) = emission_flux(p, grid, coeffs)?;
    let data_side = -coeffs.kappa / coeffs.beta * omega.inner(&flux)?;
    Ok(IdentityCheck {
        functional,
        data_side,
    })
}

/// Arc-length coordinate of each Γ node, normalized to `[0, 1)` over the
/// concatenation of the Γ edges.
fn gamma_coordinate(grid: &SpaceTimeGrid) -> Vec<f64> {
    let mesh = grid.mesh;
    let total: f64 = grid.gamma_edges().iter().map(|&e| mesh.edge_length(e)).sum();
    let mut offset = 0.0;
    let mut out = Vec::with_capacity(grid.gamma().len());
    for &edge in grid.gamma_edges() {
        for gn in grid.gamma().iter().filter(|gn| gn.edge == edge) {
            let (x, y) = mesh.coords(gn.node);
            let along = match edge {
                crate::grid::Edge::Left | crate::grid::Edge::Right => y - mesh.y0,
                crate::grid::Edge::Bottom | crate::grid::Edge::Top => x - mesh.x0,
            };
            out.push((offset + along) / total);
        }
        offset += mesh.edge_length(edge);
    }
    out
}

/// Tensor cosine trace `cos(aπs) cos(bπt/T)` in the Γ arc-length `s`.
pub fn trig_trace(grid: &SpaceTimeGrid, a: usize, b: usize) -> BoundaryTrace {
    let s = gamma_coordinate(grid);
    let mut trace = BoundaryTrace::zeros(grid);
    let t_end = grid.final_time;
    for (n, t) in grid.times().into_iter().enumerate() {
        let ct = (b as f64 * PI * t / t_end).cos();
        for (g, &sg) in s.iter().enumerate() {
            trace.values[n][g] = (a as f64 * PI * sg).cos() * ct;
        }
    }
    trace
}

/// Random combination of tensor cosines with amplitudes decaying like
/// `1 / (1 + a² + b²)`.
pub fn smooth_random_trace(grid: &SpaceTimeGrid, modes: usize, rng: &mut impl Rng) -> BoundaryTrace {
    let mut trace = BoundaryTrace::zeros(grid);
    for a in 0..modes {
        for b in 0..modes {
            let xi: f64 = rng.sample(StandardNormal);
            let amp = xi / (1.0 + (a * a + b * b) as f64);
            let mode = trig_trace(grid, a, b);
            for (row, mrow) in trace.values.iter_mut().zip(&mode.values) {
                for (v, m) in row.iter_mut().zip(mrow) {
                    *v += amp * m;
                }
            }
        }
    }
    trace
}

/// Random smooth function on the unit cube: tensor cosines up to
/// `modes - 1` in each variable, amplitudes decaying like `1 / (1 + |a|²)`.
#[derive(Debug, Clone)]
pub struct RandomSmooth {
    modes: usize,
    coef: Vec<f64>,
}

impl RandomSmooth {
    pub fn new(modes: usize, rng: &mut impl Rng) -> Self {
        let coef = (0..modes * modes * modes)
            .map(|i| {
                let (a, b, d) = (i / (modes * modes), (i / modes) % modes, i % modes);
                let xi: f64 = rng.sample(StandardNormal);
                xi / (1.0 + (a * a + b * b + d * d) as f64)
            })
            .collect();
        Self { modes, coef }
    }

    /// Value at unit-scaled coordinates.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        let m = self.modes;
        let cx: Vec<f64> = (0..m).map(|a| (a as f64 * PI * x).cos()).collect();
        let cy: Vec<f64> = (0..m).map(|b| (b as f64 * PI * y).cos()).collect();
        let ct: Vec<f64> = (0..m).map(|d| (d as f64 * PI * t).cos()).collect();
        let mut s = 0.0;
        for a in 0..m {
            for b in 0..m {
                let cab = cx[a] * cy[b];
                for d in 0..m {
                    s += self.coef[(a * m + b) * m + d] * cab * ct[d];
                }
            }
        }
        s
    }
}

fn source_from(
    mesh: SpatialMesh,
    time_mesh: &[f64],
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<SourceVector> {
    let mut p = SourceVector::zeros(mesh, time_mesh.to_vec())?;
    let t_end = time_mesh[time_mesh.len() - 1];
    for (pk, &t) in p.components.iter_mut().zip(time_mesh) {
        for (n, v) in pk.iter_mut().enumerate() {
            let (x, y) = mesh.coords(n);
            *v = f((x - mesh.x0) / mesh.lx(), (y - mesh.y0) / mesh.ly(), t / t_end);
        }
    }
    Ok(p)
}

/// Semi-discrete projection (left endpoints) of a random smooth
/// space-time function; sign-indefinite.
pub fn random_source_vector(
    mesh: SpatialMesh,
    time_mesh: &[f64],
    modes: usize,
    rng: &mut impl Rng,
) -> Result<SourceVector> {
    let f = RandomSmooth::new(modes, rng);
    source_from(mesh, time_mesh, |x, y, t| f.eval(x, y, t))
}

/// Like [`random_source_vector`] but strictly positive, as every physical
/// `p_k = μ_f u_e` is nonnegative.
pub fn random_positive_source(
    mesh: SpatialMesh,
    time_mesh: &[f64],
    modes: usize,
    rng: &mut impl Rng,
) -> Result<SourceVector> {
    let f = RandomSmooth::new(modes, rng);
    source_from(mesh, time_mesh, |x, y, t| (0.7 * f.eval(x, y, t)).exp())
}

/// Strictly positive smooth random trace `exp(0.7 w)` with `w` from
/// [`smooth_random_trace`].
pub fn random_positive_trace(grid: &SpaceTimeGrid, modes: usize, rng: &mut impl Rng) -> BoundaryTrace {
    smooth_random_trace(grid, modes, rng).map(|v| (0.7 * v).exp())
}

/// Finite family of boundary test functions with their adjoint fields,
/// reduced to per-interval kernels for a fixed source time mesh.
#[derive(Debug, Clone)]
pub struct OmegaBasis {
    pub traces: Vec<BoundaryTrace>,
    pub norms: Vec<f64>,
    pub time_mesh: Vec<f64>,
    /// `kernels[j][k]`: `∫_{I_k} φ[ω_j] dt` at every mesh node.
    kernels: Vec<Vec<Vec<f64>>>,
    /// `bounds[j][k]`: `∫_{I_k} ‖φ[ω_j](t)‖_{L²(Ω)} dt` by the same rule.
    bounds: Vec<Vec<f64>>,
    pub descriptor: String,
}

impl OmegaBasis {
    /// Solves one adjoint problem per trace.
    pub fn from_traces(
        traces: Vec<BoundaryTrace>,
        grid: &SpaceTimeGrid,
        coeffs: &Coefficients,
        time_mesh: &[f64],
        descriptor: impl Into<String>,
    ) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Invalid("basis must contain at least one trace".into()));
        }
        let mut basis = Self {
            traces: Vec::new(),
            norms: Vec::new(),
            time_mesh: time_mesh.to_vec(),
            kernels: Vec::new(),
            bounds: Vec::new(),
            descriptor: descriptor.into(),
        };
        for trace in traces {
            basis.push(trace, grid, coeffs)?;
        }
        Ok(basis)
    }

    /// `m` traces: the low tensor cosines first, then smoothed random ones.
    pub fn generate(
        m: usize,
        grid: &SpaceTimeGrid,
        coeffs: &Coefficients,
        time_mesh: &[f64],
        rng: &RngStream,
    ) -> Result<Self> {
        let n_trig = m / 2;
        let side = (n_trig as f64).sqrt().ceil() as usize;
        let mut traces = Vec::with_capacity(m);
        'outer: for a in 0..side.max(1) {
            for b in 0..side.max(1) {
                if traces.len() == n_trig {
                    break 'outer;
                }
                traces.push(trig_trace(grid, a, b));
            }
        }
        let mut r = rng.rng();
        while traces.len() < m {
            traces.push(smooth_random_trace(grid, 5, &mut r));
        }
        Self::from_traces(
            traces,
            grid,
            coeffs,
            time_mesh,
            format!("{n_trig} tensor cosines + {} smoothed random traces", m - n_trig),
        )
    }

    pub fn push(&mut self, trace: BoundaryTrace, grid: &SpaceTimeGrid, coeffs: &Coefficients) -> Result<()> {
        let norm = trace.norm();
        if !(norm > 0.0) {
            return Err(Error::Invalid("basis traces must not vanish".into()));
        }
        let phi = solve_adjoint(&trace, grid, coeffs)?;
        let (kernels, bounds) = interval_kernels(&phi, &self.time_mesh);
        self.traces.push(trace);
        self.norms.push(norm);
        self.kernels.push(kernels);
        self.bounds.push(bounds);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// First `m` members.
    pub fn truncated(&self, m: usize) -> Self {
        let m = m.min(self.len());
        Self {
            traces: self.traces[..m].to_vec(),
            norms: self.norms[..m].to_vec(),
            time_mesh: self.time_mesh.clone(),
            kernels: self.kernels[..m].to_vec(),
            bounds: self.bounds[..m].to_vec(),
            descriptor: format!("first {m} of: {}", self.descriptor),
        }
    }

    /// `L(p, ω_j)` using the precomputed kernels.
    pub fn functional(&self, p: &SourceVector, j: usize) -> Result<f64> {
        self.check_source(p)?;
        Ok(pair_with_kernels(p, &self.kernels[j]))
    }

    fn check_source(&self, p: &SourceVector) -> Result<()> {
        p.check_shape()?;
        if p.times != self.time_mesh {
            return Err(Error::Shape("source time mesh differs from the basis time mesh".into()));
        }
        if self.kernels.first().and_then(|k| k.first()).map(Vec::len) != Some(p.mesh.len()) {
            return Err(Error::Shape("source mesh differs from the basis mesh".into()));
        }
        Ok(())
    }

    /// Constant `C` with `‖p‖_L ≤ C Σ_k ‖p_k‖_{L²(Ω)}` over this basis.
    pub fn upper_bound_constant(&self) -> f64 {
        self.bounds
            .iter()
            .zip(&self.norms)
            .map(|(b, n)| b.iter().fold(0.0f64, |m, v| m.max(*v)) / n)
            .fold(0.0, f64::max)
    }
}

/// Lower bound of `‖p‖_L` over a finite basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// Index of the maximizing basis member.
    pub argmax: usize,
    /// Basis size.
    pub m: usize,
}

pub fn weighted_norm_estimate(p: &SourceVector, basis: &OmegaBasis) -> Result<NormEstimate> {
    if basis.is_empty() {
        return Err(Error::Invalid("empty basis".into()));
    }
    let mut best = NormEstimate {
        value: 0.0,
        argmax: 0,
        m: basis.len(),
    };
    for j in 0..basis.len() {
        let v = basis.functional(p, j)?.abs() / basis.norms[j];
        if v > best.value {
            best.value = v;
            best.argmax = j;
        }
    }
    Ok(best)
}

/// Relative slack allowed on the stability inequality.
pub const STABILITY_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    /// `‖p - p̃‖_L` estimated over the basis.
    pub lhs: f64,
    /// `(κ/β) ‖∂_n u_m - ∂_n ũ_m‖_{L²(Γ×(0,T))}`.
    pub rhs: f64,
    pub satisfied: bool,
}

impl StabilityRecord {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

pub fn stability_check(
    p: &SourceVector,
    p_tilde: &SourceVector,
    basis: &OmegaBasis,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
) -> Result<StabilityRecord> {
    let diff = p.zip_with(p_tilde, |a, b| a - b)?;
    let lhs = weighted_norm_estimate(&diff, basis)?.value;
    let (_, fa) = emission_flux(p, grid, coeffs)?;
    let (_, fb) = emission_flux(p_tilde, grid, coeffs)?;
    let rhs = coeffs.kappa / coeffs.beta * fa.zip_with(&fb, |a, b| a - b)?.norm();
    Ok(StabilityRecord {
        lhs,
        rhs,
        satisfied: lhs <= rhs * (1.0 + STABILITY_SLACK),
    })
}

/// `trials` independent checks on random smooth pairs `(p, p̃)`.
pub fn stability_trials(
    basis: &OmegaBasis,
    grid: &SpaceTimeGrid,
    coeffs: &Coefficients,
    trials: usize,
    rng: &RngStream,
) -> Result<Vec<StabilityRecord>> {
    let mut r = rng.rng();
    (0..trials)
        .map(|_| {
            let p = random_source_vector(grid.mesh, &basis.time_mesh, 4, &mut r)?;
            let q = random_source_vector(grid.mesh, &basis.time_mesh, 4, &mut r)?;
            stability_check(&p, &q, basis, grid, coeffs)
        })
        .collect()
}

/// `trial, lhs, rhs, ratio` rows.
pub fn stability_table(records: &[StabilityRecord]) -> Table {
    let mut t = Table::new(["trial", "lhs", "rhs", "ratio"]);
    for (i, r) in records.iter().enumerate() {
        t.push(vec![i as f64, r.lhs, r.rhs, r.ratio()]);
    }
    t
}

pub fn write_stability_report(records: &[StabilityRecord], path: impl AsRef<Path>) -> Result<()> {
    export_table(&stability_table(records), path)
}

/// Empirical norm-axiom checks of [`weighted_norm_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormAxiomReport {
    pub zero_value: f64,
    /// Largest `|est(c p) - |c| est(p)| / (|c| est(p))` seen.
    pub homogeneity_error: f64,
    pub triangle_pairs: usize,
    pub triangle_violations: usize,
    pub upper_bound_constant: f64,
    pub upper_bound_violations: usize,
    pub m: usize,
}

impl NormAxiomReport {
    pub fn passed(&self, homogeneity_tol: f64) -> bool {
        self.zero_value == 0.0
            && self.homogeneity_error <= homogeneity_tol
            && self.triangle_violations == 0
            && self.upper_bound_violations == 0
    }
}

pub fn norm_axiom_suite(basis: &OmegaBasis, pairs: usize, rng: &RngStream) -> Result<NormAxiomReport> {
    let mesh = basis
        .traces
        .first()
        .map(|t| t.mesh)
        .ok_or_else(|| Error::Invalid("empty basis".into()))?;
    let mut r = rng.rng();
    let zero = SourceVector::zeros(mesh, basis.time_mesh.clone())?;
    let zero_value = weighted_norm_estimate(&zero, basis)?.value;
    let c_bound = basis.upper_bound_constant();
    let mut homogeneity_error: f64 = 0.0;
    let mut triangle_violations = 0;
    let mut upper_bound_violations = 0;
    for _ in 0..pairs {
        let p = random_source_vector(mesh, &basis.time_mesh, 4, &mut r)?;
        let q = random_source_vector(mesh, &basis.time_mesh, 4, &mut r)?;
        let ep = weighted_norm_estimate(&p, basis)?.value;
        let eq = weighted_norm_estimate(&q, basis)?.value;
        let sum = p.zip_with(&q, |a, b| a + b)?;
        let es = weighted_norm_estimate(&sum, basis)?.value;
        if es > ep + eq + 1e-10 {
            triangle_violations += 1;
        }
        for c in [-2.0, 0.5, 3.0] {
            let ec = weighted_norm_estimate(&p.scaled(c), basis)?.value;
            let rel = (ec - f64::abs(c) * ep).abs() / (f64::abs(c) * ep);
            homogeneity_error = homogeneity_error.max(rel);
        }
        for (v, src) in [(ep, &p), (eq, &q)] {
            if v > c_bound * src.l1_l2_norm() * (1.0 + 1e-12) {
                upper_bound_violations += 1;
            }
        }
    }
    Ok(NormAxiomReport {
        zero_value,
        homogeneity_error,
        triangle_pairs: pairs,
        triangle_violations,
        upper_bound_constant: c_bound,
        upper_bound_violations,
        m: basis.len(),
    })
}

/// Uniform source time mesh with `k` intervals on `[0, T]`.
pub fn uniform_time_mesh(final_time: f64, k: usize) -> Vec<f64> {
    linspace(0.0, final_time, k + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SpaceTimeGrid, Coefficients, Vec<f64>) {
        let g = SpaceTimeGrid::unit(9, 17, 1.0).unwrap();
        (g, Coefficients::default(), uniform_time_mesh(1.0, 4))
    }

    #[test]
    fn zero_inputs_give_zero_functional() {
        let (g, c, tm) = setup();
        let zero = SourceVector::zeros(g.mesh, tm.clone()).unwrap();
        let omega = trig_trace(&g, 1, 1);
        assert_eq!(bilinear_functional(&zero, &omega, &g, &c).unwrap(), 0.0);
        let p = random_source_vector(g.mesh, &tm, 3, &mut RngStream::new(0, "p").rng()).unwrap();
        assert_eq!(bilinear_functional(&p, &BoundaryTrace::zeros(&g), &g, &c).unwrap(), 0.0);
    }

    #[test]
    fn basis_kernels_agree_with_direct_functional() {
        let (g, c, tm) = setup();
        let basis = OmegaBasis::generate(6, &g, &c, &tm, &RngStream::new(1, "basis")).unwrap();
        let p = random_source_vector(g.mesh, &tm, 3, &mut RngStream::new(2, "p").rng()).unwrap();
        for j in 0..basis.len() {
            let direct = bilinear_functional(&p, &basis.traces[j], &g, &c).unwrap();
            let cached = basis.functional(&p, j).unwrap();
            assert!((direct - cached).abs() <= 1e-12 * direct.abs().max(1e-300));
        }
    }

    #[test]
    fn identity_mismatch_shrinks_under_refinement() {
        let tm = uniform_time_mesh(1.0, 4);
        let c = Coefficients::default();
        let mut last = f64::INFINITY;
        for (n, nt) in [(9, 17), (17, 33)] {
            let g = SpaceTimeGrid::unit(n, nt, 1.0).unwrap();
            let mut r = RngStream::new(12, "pairs").rng();
            let p = random_positive_source(g.mesh, &tm, 3, &mut r).unwrap();
            assert!(p.components.iter().flatten().all(|&v| v > 0.0));
            let omega = random_positive_trace(&g, 3, &mut r);
            let check = identity_check(&p, &omega, &g, &c).unwrap();
            assert!(check.functional > 0.0 && check.data_side > 0.0);
            assert!(check.relative_mismatch() < last);
            last = check.relative_mismatch();
        }
    }

    #[test]
    fn estimate_is_homogeneous_and_monotone_in_basis_size() {
        let (g, c, tm) = setup();
        let basis = OmegaBasis::generate(8, &g, &c, &tm, &RngStream::new(4, "basis")).unwrap();
        let p = random_source_vector(g.mesh, &tm, 3, &mut RngStream::new(5, "p").rng()).unwrap();
        let e = weighted_norm_estimate(&p, &basis).unwrap();
        assert_eq!(e.m, 8);
        let e2 = weighted_norm_estimate(&p.scaled(-2.0), &basis).unwrap();
        assert!((e2.value - 2.0 * e.value).abs() <= 1e-12 * e.value);
        let mut last = 0.0;
        for m in 1..=8 {
            let v = weighted_norm_estimate(&p, &basis.truncated(m)).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        assert_eq!(last, e.value);
    }

    #[test]
    fn vanishing_traces_are_rejected() {
        let (g, c, tm) = setup();
        assert!(OmegaBasis::from_traces(vec![BoundaryTrace::zeros(&g)], &g, &c, &tm, "zero").is_err());
        assert!(OmegaBasis::from_traces(vec![], &g, &c, &tm, "empty").is_err());
    }

    #[test]
    fn identical_sources_are_trivially_stable() {
        let (g, c, tm) = setup();
        let basis = OmegaBasis::generate(4, &g, &c, &tm, &RngStream::new(6, "basis")).unwrap();
        let p = random_source_vector(g.mesh, &tm, 3, &mut RngStream::new(7, "p").rng()).unwrap();
        let rec = stability_check(&p, &p, &basis, &g, &c).unwrap();
        assert_eq!(rec.lhs, 0.0);
        assert_eq!(rec.rhs, 0.0);
        assert!(rec.satisfied);
    }

    #[test]
    fn stability_flag_survives_rescaling() {
        let (g, c, tm) = setup();
        let basis = OmegaBasis::generate(6, &g, &c, &tm, &RngStream::new(8, "basis")).unwrap();
        let mut r = RngStream::new(9, "p").rng();
        let p = random_source_vector(g.mesh, &tm, 3, &mut r).unwrap();
        let q = random_source_vector(g.mesh, &tm, 3, &mut r).unwrap();
        let a = stability_check(&p, &q, &basis, &g, &c).unwrap();
        let b = stability_check(&p.scaled(3.0), &q.scaled(3.0), &basis, &g, &c).unwrap();
        assert!(a.satisfied && b.satisfied, "{a:?} {b:?}");
        assert!((b.ratio() - a.ratio()).abs() < 1e-9 * a.ratio());
    }

    #[test]
    fn axiom_suite_on_small_basis() {
        let (g, c, tm) = setup();
        let basis = OmegaBasis::generate(6, &g, &c, &tm, &RngStream::new(10, "basis")).unwrap();
        let rep = norm_axiom_suite(&basis, 10, &RngStream::new(11, "axioms")).unwrap();
        assert!(rep.passed(1e-12), "{rep:?}");
        assert!(rep.upper_bound_constant > 0.0);
    }

    #[test]
    fn report_table_columns() {
        let rec = StabilityRecord {
            lhs: 1.0,
            rhs: 2.0,
            satisfied: true,
        };
        let t = stability_table(&[rec]);
        assert_eq!(t.header, vec!["trial", "lhs", "rhs", "ratio"]);
        assert_eq!(t.rows[0], vec![0.0, 1.0, 2.0, 0.5]);
    }
}
