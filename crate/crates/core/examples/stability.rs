//! Estimates the weighted norm over a 64-member test basis and checks the
//! stability inequality on random source pairs, plus the norm axioms.

use fdot::grid::Coefficients;
use fdot::stability::{norm_axiom_suite, stability_trials, uniform_time_mesh, OmegaBasis};
use fdot::{RngStream, SpaceTimeGrid};

fn main() -> fdot::Result<()> {
    let grid = SpaceTimeGrid::unit(33, 65, 1.0)?;
    let coeffs = Coefficients::default();
    let rng = RngStream::new(0, "stability");
    let basis = OmegaBasis::generate(64, &grid, &coeffs, &uniform_time_mesh(1.0, 8), &rng.substream("basis"))?;
    println!("basis: {}", basis.descriptor);
    let records = stability_trials(&basis, &grid, &coeffs, 20, &rng.substream("trials"))?;
    println!("trial  lhs (lower bound, M={})  rhs          ratio", basis.len());
    for (i, r) in records.iter().enumerate() {
        println!("{i:>5}  {:>24.6e}  {:>11.6e}  {:.4}", r.lhs, r.rhs, r.ratio());
    }
    let axioms = norm_axiom_suite(&basis, 50, &rng.substream("axioms"))?;
    println!("{axioms:#?}");
    Ok(())
}
