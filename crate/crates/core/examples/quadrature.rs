//! Monte-Carlo quadrature error against sample count, using the interior
//! collocation weights.

use fdot::losses::quadrature_study;
use fdot::metrics::loglog_slope;
use fdot::RngStream;

fn main() {
    let f = |x: f64, y: f64, t: f64| (x + 2.0 * y).sin() * (1.0 + t * t);
    let ns = [100, 1_000, 10_000, 100_000];
    let study = quadrature_study(f, ([0.0, 1.0], [0.0, 1.0], 1.0), &ns, 50, &RngStream::new(0, "mc"));
    for (n, e) in &study {
        println!("{n:>7}  {e:.3e}");
    }
    let xs: Vec<f64> = study.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = study.iter().map(|(_, e)| *e).collect();
    println!("slope {:.3}", loglog_slope(&xs, &ys));
}
