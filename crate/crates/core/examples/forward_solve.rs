//! Solves the excitation and emission problems for Example 1, writes the
//! fields as CSV, and runs the manufactured-solution refinement studies.
//!
//! Usage: `cargo run --release --example forward_solve -- [out_dir]`

use fdot::grid::convergence::{space_order_study, time_order_study};
use fdot::grid::Coefficients;
use fdot::synth::{generate_measurement, ExactSourceSpec, SourceKind};
use fdot::SpaceTimeGrid;

fn main() -> fdot::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/forward".into());
    let coeffs = Coefficients::default();
    let grid = SpaceTimeGrid::unit(33, 65, 1.0)?;
    let syn = generate_measurement(&coeffs, &grid, &ExactSourceSpec::from(SourceKind::Example1))?;
    syn.u_e.write_csv(format!("{out}/u_e.csv"))?;
    syn.u_m.write_csv(format!("{out}/u_m.csv"))?;
    syn.flux.write_csv(format!("{out}/flux.csv"))?;
    println!("max |u_e| {:.4e}, max |u_m| {:.4e}, max |flux| {:.4e}", syn.u_e.max_abs(), syn.u_m.max_abs(), syn.flux.max_abs());

    let c = Coefficients {
        c: 2.0,
        kappa: 0.7,
        mu_a: 0.3,
        beta: 1.5,
    };
    let t = time_order_study(&c, 65, &[9, 17, 33])?;
    println!("time refinement   ht {:?}", t.steps);
    println!("                  err {:?}  slope {:.3}", t.errors, t.slope);
    let s = space_order_study(&c, &[9, 17, 33], 5)?;
    println!("space refinement  h  {:?}", s.steps);
    println!("                  err {:?}  slope {:.3}", s.errors, s.slope);
    Ok(())
}
