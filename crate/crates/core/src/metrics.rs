//! Test-mesh evaluation, relative errors, seed statistics and report tables.

use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{linspace, FieldSeries, SpatialMesh};
use crate::io::{export_table, Table};
use crate::neural::Mlp;
use crate::synth::{exact_mu_f, ExactSourceSpec};

/// Times of the field snapshots written by the report.
pub const REPORT_TIMES: [f64; 4] = [0.0, 2.0 / 7.0, 4.0 / 7.0, 1.0];

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Uniform lattice over `Ω × [0, T]`, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct TestMesh {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ts: Vec<f64>,
}

impl TestMesh {
    pub fn new(x: [f64; 2], y: [f64; 2], t_end: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Invalid(format!("test mesh needs at least 2 points per axis, got {n}")));
        }
        Ok(Self {
            xs: linspace(x[0], x[1], n),
            ys: linspace(y[0], y[1], n),
            ts: linspace(0.0, t_end, n),
        })
    }

    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        Self::new(config.domain.x, config.domain.y, config.final_time, config.test_mesh)
    }

    pub fn slice_len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn len(&self) -> usize {
        self.slice_len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples `f` time-major: index `(k · nx + i) · ny + j`.
    pub fn evaluate(&self, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.ts {
            for &x in &self.xs {
                for &y in &self.ys {
                    out.push(f(x, y, t));
                }
            }
        }
        out
    }
}

fn sums(approx: &[f64], exact: &[f64]) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, e) in approx.iter().zip(exact) {
        if a.is_finite() && e.is_finite() {
            num += (a - e) * (a - e);
            den += e * e;
        }
    }
    (num, den)
}

/// `‖approx − exact‖₂ / ‖exact‖₂` over nodes where both are finite.
pub fn relative_l2(approx: &[f64], exact: &[f64]) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::Shape(format!("{} approx vs {} exact values", approx.len(), exact.len())));
    }
    let (num, den) = sums(approx, exact);
    if den == 0.0 {
        return Err(Error::Invalid("exact field vanishes on all unmasked nodes".into()));
    }
    Ok((num / den).sqrt())
}

/// Error restricted to one time slice. `num` and `den` are the squared
/// norms behind `err`; `err` is NaN where the exact slice vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceError {
    pub t: f64,
    pub err: f64,
    pub num: f64,
    pub den: f64,
}

pub fn timeseries_error(approx: &[f64], exact: &[f64], mesh: &TestMesh) -> Result<Vec<SliceError>> {
    if approx.len() != mesh.len() || exact.len() != mesh.len() {
        return Err(Error::Shape(format!(
            "test mesh has {} nodes, got {} and {}",
            mesh.len(),
            approx.len(),
            exact.len()
        )));
    }
    let s = mesh.slice_len();
    Ok(mesh
        .ts
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let (num, den) = sums(&approx[k * s..(k + 1) * s], &exact[k * s..(k + 1) * s]);
            SliceError {
                t,
                err: if den > 0.0 { (num / den).sqrt() } else { f64::NAN },
                num,
                den,
            }
        })
        .collect())
}

/// Combines slice errors with time weights `w_k`:
/// `√(Σ w_k den_k err_k² / Σ w_k den_k)`.
pub fn aggregate_slices(slices: &[SliceError], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, w) in slices.iter().zip(weights) {
        if s.den > 0.0 {
            num += w * s.den * s.err * s.err;
        }
        den += w * s.den;
    }
    (num / den).sqrt()
}

/// Space-time relative error with trapezoid weights in time.
pub fn space_time_relative_l2(approx: &[f64], exact: &[f64], mesh: &TestMesh) -> Result<f64> {
    let slices = timeseries_error(approx, exact, mesh)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, w) in slices.iter().zip(crate::grid::trapezoid_weights(&mesh.ts)) {
        num += w * s.num;
        den += w * s.den;
    }
    Ok((num / den).sqrt())
}

/// Relative error of a source network against the exact source.
pub fn source_error(net_f: &Mlp, spec: &ExactSourceSpec, mesh: &TestMesh) -> Result<(f64, Vec<SliceError>)> {
    let approx = mesh.evaluate(|x, y, t| net_f.value([x, y, t]));
    let exact = mesh.evaluate(|x, y, t| exact_mu_f(spec, x, y, t));
    Ok((relative_l2(&approx, &exact)?, timeseries_error(&approx, &exact, mesh)?))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One row of a sweep: a parameter value and the per-seed errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seeds: Vec<u64>,
    pub errors: Vec<f64>,
}

impl SweepRow {
    pub fn mean(&self) -> f64 {
        mean_std(&self.errors).0
    }

    pub fn std(&self) -> f64 {
        mean_std(&self.errors).1
    }
}

/// Summary table `(<name>, mean, std, n)` with population std.
pub fn sweep_table(name: &str, rows: &[SweepRow]) -> Table {
    let mut t = Table::new([name, "mean", "std", "n"]);
    for r in rows {
        t.push(vec![r.value, r.mean(), r.std(), r.errors.len() as f64]);
    }
    t
}

/// Per-seed table `(<name>, seed, error)`.
pub fn sweep_detail_table(name: &str, rows: &[SweepRow]) -> Table {
    let mut t = Table::new([name, "seed", "error"]);
    for r in rows {
        for (s, e) in r.seeds.iter().zip(&r.errors) {
            t.push(vec![r.value, *s as f64, *e]);
        }
    }
    t
}

/// Runs `run(value, seed)` for every cell and collects the errors.
pub fn sweep<F>(values: &[f64], seeds: &[u64], mut run: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(f64, u64) -> Result<f64>,
{
    values
        .iter()
        .map(|&v| {
            let errors = seeds.iter().map(|&s| run(v, s)).collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                value: v,
                seeds: seeds.to_vec(),
                errors,
            })
        })
        .collect()
}

/// Series table `(t, error)`.
pub fn timeseries_table(slices: &[SliceError]) -> Table {
    let mut t = Table::new(["t", "error"]);
    for s in slices {
        t.push(vec![s.t, s.err]);
    }
    t
}

/// Predicted, exact and pointwise-error snapshots of a source network at
/// [`REPORT_TIMES`] on an `n × n` spatial lattice, each as `(t, x, y, value)`.
pub fn source_snapshots(
    net_f: &Mlp,
    spec: &ExactSourceSpec,
    config: &ExperimentConfig,
    n: usize,
) -> Result<[FieldSeries; 3]> {
    let mesh = SpatialMesh::new(n, n, config.domain.x, config.domain.y)?;
    let times: Vec<f64> = REPORT_TIMES.iter().map(|t| t * config.final_time).collect();
    let pred = FieldSeries::from_fn(mesh, times.clone(), |x, y, t| net_f.value([x, y, t]));
    let exact = FieldSeries::from_fn(mesh, times, |x, y, t| exact_mu_f(spec, x, y, t));
    let err = pred.zip_with(&exact, |a, b| (a - b).abs())?;
    Ok([pred, exact, err])
}

/// Writes the snapshot triple as `<stem>_pred.csv`, `<stem>_exact.csv`,
/// `<stem>_abs_error.csv` under `dir`.
pub fn write_snapshots(snaps: &[FieldSeries; 3], dir: impl AsRef<Path>, stem: &str) -> Result<Vec<String>> {
    let names = ["pred", "exact", "abs_error"].map(|s| format!("{stem}_{s}.csv"));
    for (f, name) in snaps.iter().zip(&names) {
        f.write_csv(dir.as_ref().join(name))?;
    }
    Ok(names.to_vec())
}

/// Writes `table` to `dir/name`, returning `name`.
pub fn write_table(table: &Table, dir: impl AsRef<Path>, name: &str) -> Result<String> {
    export_table(table, dir.as_ref().join(name))?;
    Ok(name.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh() -> TestMesh {
        TestMesh::new([0.0, 1.0], [0.0, 1.0], 1.0, 5).unwrap()
    }

    #[test]
    fn default_mesh_is_fifty_cubed() {
        let m = TestMesh::from_config(&ExperimentConfig::default()).unwrap();
        assert_eq!(m.len(), 125_000);
        assert_eq!((m.xs[0], m.xs[49], m.ts[49]), (0.0, 1.0, 1.0));
    }

    #[test]
    fn relative_error_examples() {
        let e = mesh().evaluate(|x, y, t| 1.0 + x * y + t);
        assert_eq!(relative_l2(&e, &e).unwrap(), 0.0);
        let a: Vec<f64> = e.iter().map(|v| 1.1 * v).collect();
        assert!((relative_l2(&a, &e).unwrap() - 0.1).abs() < 1e-14);
        assert!(relative_l2(&a[1..], &e).is_err());
        assert!(relative_l2(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn masked_nodes_are_skipped_in_both_norms() {
        let e = vec![1.0, 2.0, 3.0];
        let a = vec![f64::NAN, 2.0, 3.3];
        let expect = (0.09f64 / 13.0).sqrt();
        assert!((relative_l2(&a, &e).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn slice_bias_only_shows_in_its_slice() {
        let m = mesh();
        let e = m.evaluate(|x, y, _| 1.0 + x + y);
        let a = m.evaluate(|x, y, t| 1.0 + x + y + if t == 0.5 { 0.2 } else { 0.0 });
        let s = timeseries_error(&a, &e, &m).unwrap();
        for r in &s {
            assert_eq!(r.err > 0.0, r.t == 0.5);
        }
    }

    #[test]
    fn slices_reconcile_with_global_errors() {
        let m = mesh();
        let e = m.evaluate(|x, y, t| (x + 2.0 * y + t).sin() + 1.5);
        let a = m.evaluate(|x, y, t| (x + 2.0 * y + t).sin() + 1.5 + 0.1 * x * t);
        let s = timeseries_error(&a, &e, &m).unwrap();
        let uniform = aggregate_slices(&s, &vec![1.0; s.len()]);
        assert!((uniform - relative_l2(&a, &e).unwrap()).abs() < 1e-12);
        let trap = aggregate_slices(&s, &crate::grid::trapezoid_weights(&m.ts));
        assert!((trap - space_time_relative_l2(&a, &e, &m).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn sweep_statistics() {
        let rows = sweep(&[100.0], &[0], |_, _| Ok(0.08)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean(), rows[0].std()), (0.08, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        let rows = sweep(&[0.1, 100.0], &[1, 2, 3], |l, s| Ok(l * s as f64)).unwrap();
        let table = sweep_table("lambda", &rows);
        assert_eq!(table.header, vec!["lambda", "mean", "std", "n"]);
        let detail = sweep_detail_table("lambda", &rows);
        assert_eq!(detail.len(), 6);
        let errs = detail.column("error").unwrap();
        let (mean, std) = mean_std(&errs[3..]);
        assert_eq!(table.rows[1][1], mean);
        assert_eq!(table.rows[1][2], std);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn snapshot_of_exact_network() {
        use crate::synth::SourceKind;
        let cfg = ExperimentConfig::default();
        let net = Mlp::constant(&[3, 2, 1], 1.0).unwrap();
        let spec = ExactSourceSpec::from(SourceKind::Constant { value: 1.0 });
        let [p, e, err] = source_snapshots(&net, &spec, &cfg, 5).unwrap();
        assert_eq!(p.times.len(), 4);
        assert_eq!(p, e);
        assert_eq!(err.max_abs(), 0.0);
        let (rel, _) = source_error(&net, &spec, &mesh()).unwrap();
        assert_eq!(rel, 0.0);
    }
}
