//! Ground-truth sources, semi-discrete source vectors and synthetic
//! boundary measurements.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{
    boundary_flux, solve_forward, BoundaryTrace, Coefficients, Edge, FieldSeries, ParabolicProblem,
    Source, SpaceTimeGrid, SpatialMesh,
};
use crate::io::{export_table, import_table, Table};
use crate::rng::RngStream;

/// Named ground-truth fluorophore absorption coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceKind {
    /// `5 + t + cos(πx) cos(πy)`: smooth in space and time.
    #[default]
    Example1,
    /// `(t + 1) f(r)` with `r` the distance to `(1/2, 1/2)`: continuous,
    /// with a kink on the circle `r = π/6`.
    Example2,
    Constant { value: f64 },
}

/// Radial profile of [`SourceKind::Example2`].
pub fn example2_profile(r: f64) -> f64 {
    if r <= PI / 6.0 {
        15.0 * (r.cos() - 3f64.sqrt() / 2.0) + 2.0
    } else {
        2.0
    }
}

impl SourceKind {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match *self {
            SourceKind::Example1 => 5.0 + t + (PI * x).cos() * (PI * y).cos(),
            SourceKind::Example2 => {
                let r = (x - 0.5).hypot(y - 0.5);
                (t + 1.0) * example2_profile(r)
            }
            SourceKind::Constant { value } => value,
        }
    }
}

/// Ground truth for `μ_f`: a named example or any callable `(x, y, t)`.
#[derive(Clone)]
pub enum ExactSourceSpec {
    Known(SourceKind),
    Custom(Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ExactSourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactSourceSpec::Known(k) => write!(f, "Known({k:?})"),
            ExactSourceSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl From<SourceKind> for ExactSourceSpec {
    fn from(kind: SourceKind) -> Self {
        ExactSourceSpec::Known(kind)
    }
}

pub fn exact_mu_f(spec: &ExactSourceSpec, x: f64, y: f64, t: f64) -> f64 {
    match spec {
        ExactSourceSpec::Known(k) => k.eval(x, y, t),
        ExactSourceSpec::Custom(f) => f(x, y, t),
    }
}

/// Boundary input of the excitation field, `B u_e = -20 t x (x - 1)`.
pub fn excitation_input(x: f64, _y: f64, t: f64) -> f64 {
    -20.0 * t * x * (x - 1.0)
}

/// Excitation field: zero source and initial state, Robin data
/// [`excitation_input`] on the whole boundary.
pub fn solve_excitation(coeffs: &Coefficients, grid: &SpaceTimeGrid) -> Result<FieldSeries> {
    let problem = ParabolicProblem::new(coeffs).with_robin_fn(|x, y, t, _| excitation_input(x, y, t));
    solve_forward(&problem, grid)
}

/// Emission field driven by `μ_f · u_e`, homogeneous Robin data.
/// `u_e` must live on `grid`.
pub fn solve_emission(
    mu_f: &ExactSourceSpec,
    u_e: &FieldSeries,
    coeffs: &Coefficients,
    grid: &SpaceTimeGrid,
) -> Result<FieldSeries> {
    if u_e.mesh != grid.mesh || u_e.times.len() != grid.nt {
        return Err(Error::Shape("excitation field is not on the emission grid".into()));
    }
    let mesh = grid.mesh;
    let source = Source::Nodal(Box::new(move |level, t, out: &mut [f64]| {
        let ue = &u_e.values[level];
        for (k, v) in out.iter_mut().enumerate() {
            let (x, y) = mesh.coords(k);
            *v = exact_mu_f(mu_f, x, y, t) * ue[k];
        }
    }));
    solve_forward(&ParabolicProblem::new(coeffs).with_source(source), grid)
}

/// Spatial parts `p_1..p_K` of `S = Σ_k p_k χ_[t_{k-1}, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceVector {
    pub mesh: SpatialMesh,
    /// `t_0 = 0 < t_1 < … < t_K = T`.
    pub times: Vec<f64>,
    /// `components[k - 1]` holds `p_k` at every mesh node.
    pub components: Vec<Vec<f64>>,
}

impl SourceVector {
    pub fn zeros(mesh: SpatialMesh, times: Vec<f64>) -> Result<Self> {
        check_time_mesh(&times, *times.last().unwrap_or(&0.0))?;
        let components = vec![vec![0.0; mesh.len()]; times.len() - 1];
        Ok(Self {
            mesh,
            times,
            components,
        })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.components.len() + 1 != self.times.len() || self.components.is_empty() {
            return Err(Error::Shape(format!(
                "{} components for a time mesh of {} points",
                self.components.len(),
                self.times.len()
            )));
        }
        if self.components.iter().any(|p| p.len() != self.mesh.len()) {
            return Err(Error::Shape("component length differs from mesh size".into()));
        }
        Ok(())
    }

    fn same_layout(&self, other: &Self) -> Result<()> {
        if self.mesh != other.mesh || self.times != other.times {
            return Err(Error::Shape("source vectors use different meshes".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|p| p.iter().map(|&v| f(v)).collect())
                .collect(),
            ..self.clone()
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_layout(other)?;
        Ok(Self {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect())
                .collect(),
            ..self.clone()
        })
    }

    /// `Σ_k ‖p_k‖_{L²(Ω)}` with trapezoid weights.
    pub fn l1_l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(k, v)| self.mesh.weight(k) * v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .sum()
    }

    /// Average of `S(·, t)` over `(t_a, t_b]`, written into `out`. This is
    /// the source a backward-Euler step from `t_a` to `t_b` sees.
    pub fn average_over(&self, t_a: f64, t_b: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let span = t_b - t_a;
        if span <= 0.0 {
            let k = self.interval_of(t_b);
            out.copy_from_slice(&self.components[k]);
            return;
        }
        for (k, p) in self.components.iter().enumerate() {
            let lo = self.times[k].max(t_a);
            let hi = self.times[k + 1].min(t_b);
            if hi > lo {
                let w = (hi - lo) / span;
                for (o, v) in out.iter_mut().zip(p) {
                    *o += w * v;
                }
            }
        }
    }

    /// Index `k - 1` of the interval `[t_{k-1}, t_k)` containing `t`; the
    /// final time belongs to the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s <= t);
        k.clamp(1, self.components.len()) - 1
    }

    /// Emission-type problem with source `Σ p_k χ_k` on `grid`.
    pub fn problem<'a>(&'a self, coeffs: &Coefficients, grid: &SpaceTimeGrid) -> ParabolicProblem<'a> {
        let times = grid.times();
        ParabolicProblem::new(coeffs).with_source(Source::Nodal(Box::new(
            move |level, t, out: &mut [f64]| {
                let prev = if level == 0 { t } else { times[level - 1] };
                self.average_over(prev, t, out);
            },
        )))
    }
}

fn check_time_mesh(times: &[f64], final_time: f64) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::Invalid("time mesh needs at least two points".into()));
    }
    if times[0] != 0.0 || (times[times.len() - 1] - final_time).abs() > 1e-12 * final_time.max(1.0) {
        return Err(Error::Invalid(format!(
            "time mesh must run from 0 to {final_time}, got [{}, {}]",
            times[0],
            times[times.len() - 1]
        )));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time mesh must be strictly increasing".into()));
    }
    Ok(())
}

/// `p_k(x) = μ_f(x, t_{k-1}) u_e(x, t_{k-1})` for `k = 1..K`.
pub fn project_semidiscrete(
    mu_f: impl Fn(f64, f64, f64) -> f64,
    u_e: &FieldSeries,
    time_mesh: &[f64],
) -> Result<SourceVector> {
    let t_end = *u_e.times.last().ok_or_else(|| Error::Shape("empty field".into()))?;
    check_time_mesh(time_mesh, t_end)?;
    let mesh = u_e.mesh;
    let components = time_mesh[..time_mesh.len() - 1]
        .iter()
        .map(|&t| {
            let ue = u_e.at_time(t);
            (0..mesh.len())
                .map(|k| {
                    let (x, y) = mesh.coords(k);
                    mu_f(x, y, t) * ue[k]
                })
                .collect()
        })
        .collect();
    Ok(SourceVector {
        mesh,
        times: time_mesh.to_vec(),
        components,
    })
}

/// [`recover_mu_from_p`] with the floor `eps_rel · max|u_e|`, the meaning
/// of `ExperimentConfig::eps_floor`.
pub fn recover_mu_relative(p: &SourceVector, u_e: &FieldSeries, eps_rel: f64) -> Result<FieldSeries> {
    if !(eps_rel > 0.0) {
        return Err(Error::Invalid("eps_floor must be positive".into()));
    }
    let scale = u_e.max_abs();
    if !(scale > 0.0) {
        return Err(Error::Invalid("u_e vanishes identically".into()));
    }
    recover_mu_from_p(p, u_e, eps_rel * scale)
}

/// `μ_f(·, t_k) = p_{k+1} / u_e(·, t_k)` for `k = 0..K-1`. Nodes where
/// `|u_e| < eps_floor` are NaN.
pub fn recover_mu_from_p(p: &SourceVector, u_e: &FieldSeries, eps_floor: f64) -> Result<FieldSeries> {
    if !(eps_floor > 0.0) {
        return Err(Error::Invalid("eps_floor must be positive".into()));
    }
    if p.mesh != u_e.mesh {
        return Err(Error::Shape("source vector and field use different meshes".into()));
    }
    p.check_shape()?;
    let times: Vec<f64> = p.times[..p.k()].to_vec();
    let values = times
        .iter()
        .zip(&p.components)
        .map(|(&t, pk)| {
            let ue = u_e.at_time(t);
            pk.iter()
                .zip(&ue)
                .map(|(&pv, &uv)| if uv.abs() >= eps_floor { pv / uv } else { f64::NAN })
                .collect()
        })
        .collect();
    Ok(FieldSeries {
        mesh: p.mesh,
        times,
        values,
    })
}

/// Noise-free synthetic experiment on the data grid.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub grid: SpaceTimeGrid,
    pub u_e: FieldSeries,
    pub u_m: FieldSeries,
    pub flux: BoundaryTrace,
}

/// Solves excitation then emission on `grid` and extracts `∂_n u_m` on Γ.
pub fn generate_measurement(
    coeffs: &Coefficients,
    grid: &SpaceTimeGrid,
    spec: &ExactSourceSpec,
) -> Result<Synthetic> {
    let u_e = solve_excitation(coeffs, grid)?;
    let u_m = solve_emission(spec, &u_e, coeffs, grid)?;
    let flux = boundary_flux(&u_m, grid)?;
    Ok(Synthetic {
        grid: grid.clone(),
        u_e,
        u_m,
        flux,
    })
}

/// [`generate_measurement`] for a config: ground truth `config.source` on
/// the refined data grid.
pub fn synthesize(config: &ExperimentConfig) -> Result<Synthetic> {
    generate_measurement(
        &config.coefficients,
        &config.data_grid()?,
        &ExactSourceSpec::Known(config.source),
    )
}

/// Synthetic measurement for a config with noise level `config.noise_delta`
/// drawn from the stream `(config.rng_seed, "noise")`.
pub fn noisy_measurement(config: &ExperimentConfig) -> Result<(Synthetic, Measurement)> {
    let syn = synthesize(config)?;
    let noisy = add_noise(&syn.flux, config.noise_delta, &RngStream::new(config.rng_seed, "noise"))?;
    let m = Measurement::from_traces(&syn.flux, &noisy)?;
    Ok((syn, m))
}

/// `φ^δ = φ + δ (2U - 1)` with `U` i.i.d. uniform on `[0, 1]`.
pub fn add_noise(trace: &BoundaryTrace, delta: f64, rng: &RngStream) -> Result<BoundaryTrace> {
    if !(delta >= 0.0) {
        return Err(Error::Invalid(format!("noise level must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(trace.clone());
    }
    let mut r = rng.rng();
    let mut out = trace.clone();
    for v in out.values.iter_mut().flatten() {
        *v += delta * (2.0 * r.gen::<f64>() - 1.0);
    }
    Ok(out)
}

/// One boundary sample of the measured flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSample {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub normal: [f64; 2],
    pub value: f64,
    pub noisy: f64,
}

/// Flat list of measured samples, as stored in the measurement CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub samples: Vec<FluxSample>,
    /// Measure of `Γ × (0, T)`.
    pub measure: f64,
}

impl Measurement {
    pub fn from_traces(clean: &BoundaryTrace, noisy: &BoundaryTrace) -> Result<Self> {
        if clean.nodes != noisy.nodes || clean.times != noisy.times {
            return Err(Error::Shape("clean and noisy traces differ in layout".into()));
        }
        let mut samples = Vec::with_capacity(clean.times.len() * clean.len());
        for (n, &t) in clean.times.iter().enumerate() {
            for (g, gn) in clean.nodes.iter().enumerate() {
                let (x, y) = clean.coords(g);
                samples.push(FluxSample {
                    x,
                    y,
                    t,
                    normal: gn.edge.normal(),
                    value: clean.values[n][g],
                    noisy: noisy.values[n][g],
                });
            }
        }
        let t_end = clean.times.last().copied().unwrap_or(0.0) - clean.times.first().copied().unwrap_or(0.0);
        let mut edges: Vec<Edge> = Vec::new();
        for gn in &clean.nodes {
            if !edges.contains(&gn.edge) {
                edges.push(gn.edge);
            }
        }
        let length: f64 = edges.iter().map(|&e| clean.mesh.edge_length(e)).sum();
        Ok(Self {
            samples,
            measure: length * t_end,
        })
    }

    /// Samples usable as data collocation points (`t > 0`).
    pub fn data_points(&self) -> Vec<FluxSample> {
        self.samples.iter().copied().filter(|s| s.t > 0.0).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut table = Table::new(["t", "x", "y", "value", "noisy_value"]);
        for s in &self.samples {
            table.push(vec![s.t, s.x, s.y, s.value, s.noisy]);
        }
        table
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        export_table(&self.to_table(), path)
    }

    /// Reads a measurement CSV. Normals are recovered from which edge of
    /// the rectangle `[x0, x1] × [y0, y1]` each sample lies on.
    pub fn read_csv(path: impl AsRef<Path>, domain: ([f64; 2], [f64; 2])) -> Result<Self> {
        let path = path.as_ref();
        let table = import_table(path)?;
        let col = |name: &str| {
            table
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Invalid(format!("{} lacks column `{name}`", path.display())))
        };
        let (it, ix, iy, iv, inz) = (col("t")?, col("x")?, col("y")?, col("value")?, col("noisy_value")?);
        let ([x0, x1], [y0, y1]) = domain;
        let tol = 1e-9 * (x1 - x0).max(y1 - y0);
        let mut samples = Vec::with_capacity(table.len());
        let mut edges_seen: Vec<Edge> = Vec::new();
        let mut t_max: f64 = 0.0;
        for row in &table.rows {
            let (x, y) = (row[ix], row[iy]);
            let on = [
                ((x - x0).abs() < tol, Edge::Left),
                ((x - x1).abs() < tol, Edge::Right),
                ((y - y0).abs() < tol, Edge::Bottom),
                ((y - y1).abs() < tol, Edge::Top),
            ];
            let mut hits = on.iter().filter(|(h, _)| *h).map(|(_, e)| *e);
            let edge = match (hits.next(), hits.next()) {
                (Some(e), None) => e,
                _ => {
                    return Err(Error::Invalid(format!(
                        "sample ({x}, {y}) is not on exactly one boundary edge"
                    )))
                }
            };
            if !edges_seen.contains(&edge) {
                edges_seen.push(edge);
            }
            t_max = t_max.max(row[it]);
            samples.push(FluxSample {
                x,
                y,
                t: row[it],
                normal: edge.normal(),
                value: row[iv],
                noisy: row[inz],
            });
        }
        let length: f64 = edges_seen
            .iter()
            .map(|e| match e {
                Edge::Left | Edge::Right => y1 - y0,
                Edge::Bottom | Edge::Top => x1 - x0,
            })
            .sum();
        Ok(Self {
            samples,
            measure: length * t_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> SpaceTimeGrid {
        SpaceTimeGrid::unit(9, 9, 1.0).unwrap()
    }

    #[test]
    fn example_values() {
        let e1 = ExactSourceSpec::Known(SourceKind::Example1);
        let e2 = ExactSourceSpec::Known(SourceKind::Example2);
        assert_eq!(exact_mu_f(&e1, 0.0, 0.0, 0.0), 6.0);
        let centre = 15.0 * (1.0 - 3f64.sqrt() / 2.0) + 2.0;
        assert!((exact_mu_f(&e2, 0.5, 0.5, 0.0) - centre).abs() < 1e-14);
        assert!((centre - 4.0096).abs() < 1e-4);
        assert_eq!(exact_mu_f(&e2, 0.0, 0.0, 1.0), 4.0);
    }

    #[test]
    fn example2_profile_is_continuous_at_the_kink() {
        let r = PI / 6.0 - 1e-6;
        assert!((example2_profile(r) - 2.0).abs() < 1e-4);
        assert!((example2_profile(PI / 6.0) - 2.0).abs() < 1e-13);
        assert_eq!(example2_profile(PI / 6.0 + 1e-9), 2.0);
    }

    #[test]
    fn custom_spec_is_called() {
        let spec = ExactSourceSpec::Custom(Arc::new(|x, y, t| x + 2.0 * y + 3.0 * t));
        assert_eq!(exact_mu_f(&spec, 1.0, 1.0, 1.0), 6.0);
    }

    #[test]
    fn source_kind_serializes_with_a_tag() {
        #[derive(Serialize, Deserialize)]
        struct W {
            source: SourceKind,
        }
        let w: W = toml::from_str("[source]\nkind = \"constant\"\nvalue = 2.0\n").unwrap();
        assert_eq!(w.source, SourceKind::Constant { value: 2.0 });
        let w: W = toml::from_str("[source]\nkind = \"example2\"\n").unwrap();
        assert_eq!(w.source, SourceKind::Example2);
    }

    #[test]
    fn projection_trivial_cases() {
        let g = small_grid();
        let mesh = [0.0, 0.5, 1.0];
        let ones = FieldSeries::from_fn(g.mesh, g.times(), |_, _, _| 1.0);
        let p = project_semidiscrete(|_, _, _| 0.0, &ones, &mesh).unwrap();
        assert!(p.components.iter().flatten().all(|&v| v == 0.0));
        let p = project_semidiscrete(|_, _, _| 1.0, &ones, &mesh).unwrap();
        assert_eq!(p.k(), 2);
        assert!(p.components.iter().flatten().all(|&v| v == 1.0));
        assert!(project_semidiscrete(|_, _, _| 1.0, &ones, &[0.0, 2.0]).is_err());
        assert!(project_semidiscrete(|_, _, _| 1.0, &ones, &[0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn first_component_vanishes_with_the_excitation() {
        let g = small_grid();
        let u_e = solve_excitation(&Coefficients::default(), &g).unwrap();
        let p = project_semidiscrete(|x, y, t| SourceKind::Example1.eval(x, y, t), &u_e, &[0.0, 0.5, 1.0])
            .unwrap();
        assert!(p.components[0].iter().all(|&v| v == 0.0));
        assert!(p.components[1].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn recovery_cases() {
        let g = small_grid();
        let mesh = [0.0, 0.25, 1.0];
        let u_e = FieldSeries::from_fn(g.mesh, g.times(), |x, _, t| 1.0 + x + t);
        let p = project_semidiscrete(|_, _, _| 1.0, &u_e, &mesh).unwrap();
        let mu = recover_mu_from_p(&p, &u_e, 1e-3).unwrap();
        assert!(mu.values.iter().flatten().all(|&v| v == 1.0));
        let zero = FieldSeries::on_grid(&g);
        let mu = recover_mu_from_p(&p, &zero, 1e-3).unwrap();
        assert!(mu.values.iter().flatten().all(|v| v.is_nan()));
        assert!(recover_mu_from_p(&p, &u_e, 0.0).is_err());
    }

    #[test]
    fn projection_then_recovery_is_exact() {
        let g = SpaceTimeGrid::unit(17, 17, 1.0).unwrap();
        let u_e = solve_excitation(&Coefficients::default(), &g).unwrap();
        let mesh = linspace8();
        let mu = |x, y, t| SourceKind::Example1.eval(x, y, t);
        let p = project_semidiscrete(mu, &u_e, &mesh).unwrap();
        let floor = 1e-3 * u_e.max_abs();
        let back = recover_mu_from_p(&p, &u_e, floor).unwrap();
        let mut checked = 0;
        for (n, &t) in back.times.iter().enumerate() {
            for (k, &v) in back.values[n].iter().enumerate() {
                if v.is_nan() {
                    continue;
                }
                let (x, y) = g.mesh.coords(k);
                assert!((v - mu(x, y, t)).abs() <= 1e-12 * mu(x, y, t).abs());
                checked += 1;
            }
        }
        assert!(checked > 0);
        assert!(back.values[0].iter().all(|v| v.is_nan()));
    }

    fn linspace8() -> Vec<f64> {
        crate::grid::linspace(0.0, 1.0, 9)
    }

    #[test]
    fn piecewise_source_averages() {
        let g = small_grid();
        let mut p = SourceVector::zeros(g.mesh, vec![0.0, 0.5, 1.0]).unwrap();
        p.components[0].iter_mut().for_each(|v| *v = 2.0);
        p.components[1].iter_mut().for_each(|v| *v = 4.0);
        let mut out = vec![0.0; g.mesh.len()];
        p.average_over(0.25, 0.5, &mut out);
        assert_eq!(out[0], 2.0);
        p.average_over(0.25, 0.75, &mut out);
        assert_eq!(out[0], 3.0);
        assert_eq!(p.interval_of(0.5), 1);
        assert_eq!(p.interval_of(1.0), 1);
        assert_eq!(p.interval_of(0.0), 0);
    }

    #[test]
    fn zero_source_gives_zero_trace() {
        let g = small_grid();
        let s = generate_measurement(&Coefficients::default(), &g, &SourceKind::Constant { value: 0.0 }.into())
            .unwrap();
        assert_eq!(s.flux.max_abs(), 0.0);
        assert!(s.u_e.max_abs() > 0.0);
    }

    #[test]
    fn doubling_the_source_doubles_the_trace() {
        let g = small_grid();
        let c = Coefficients::default();
        let a = generate_measurement(&c, &g, &SourceKind::Example1.into()).unwrap();
        let doubled = ExactSourceSpec::Custom(Arc::new(|x, y, t| 2.0 * SourceKind::Example1.eval(x, y, t)));
        let b = generate_measurement(&c, &g, &doubled).unwrap();
        let scale = a.flux.max_abs();
        assert!(scale > 0.0);
        for (ra, rb) in a.flux.values.iter().zip(&b.flux.values) {
            for (va, vb) in ra.iter().zip(rb) {
                assert!((2.0 * va - vb).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn noise_is_bounded_and_reproducible() {
        let g = small_grid();
        let trace = BoundaryTrace::from_fn(&g, |x, y, t, _| x + y * t);
        let rng = RngStream::new(7, "noise");
        assert_eq!(add_noise(&trace, 0.0, &rng).unwrap(), trace);
        let a = add_noise(&trace, 0.01, &rng).unwrap();
        let b = add_noise(&trace, 0.01, &rng).unwrap();
        assert_eq!(a, b);
        let diff = a.zip_with(&trace, |p, q| p - q).unwrap();
        assert!(diff.max_abs() <= 0.01);
        assert!(diff.max_abs() > 0.0);
        assert!(add_noise(&trace, -1.0, &rng).is_err());
    }

    #[test]
    fn measurement_csv_round_trip() {
        let g = SpaceTimeGrid::new(SpatialMesh::unit_square(5).unwrap(), 3, 1.0, &[Edge::Left, Edge::Top])
            .unwrap();
        let clean = BoundaryTrace::from_fn(&g, |x, y, t, n| x + y + t + n[0]);
        let noisy = add_noise(&clean, 0.1, &RngStream::new(1, "noise")).unwrap();
        let m = Measurement::from_traces(&clean, &noisy).unwrap();
        assert_eq!(m.measure, 2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        m.write_csv(&path).unwrap();
        let back = Measurement::read_csv(&path, ([0.0, 1.0], [0.0, 1.0])).unwrap();
        assert_eq!(back.samples, m.samples);
        assert_eq!(back.measure, 2.0);
        assert_eq!(m.data_points().len(), 2 * g.gamma().len());
    }
}
