//! Checks the adjoint identity `L(p, ω) = -(κ/β) ⟨ω, ∂_n U⟩` for random
//! positive smooth pairs on a 33×33×65 grid and prints the relative mismatch.

use fdot::grid::{Coefficients, SpaceTimeGrid};
use fdot::stability::{identity_check, random_positive_source, random_positive_trace, uniform_time_mesh};
use fdot::RngStream;

fn main() -> fdot::Result<()> {
    let grid = SpaceTimeGrid::unit(33, 65, 1.0)?;
    let coeffs = Coefficients::default();
    let time_mesh = uniform_time_mesh(1.0, 8);
    let mut rng = RngStream::new(0, "identity").rng();
    println!("pair  functional      data_side       mismatch");
    for i in 0..10 {
        let p = random_positive_source(grid.mesh, &time_mesh, 4, &mut rng)?;
        let omega = random_positive_trace(&grid, 4, &mut rng);
        let c = identity_check(&p, &omega, &grid, &coeffs)?;
        println!(
            "{i:>4}  {:>13.6e}  {:>13.6e}  {:.3e}",
            c.functional,
            c.data_side,
            c.relative_mismatch()
        );
    }
    Ok(())
}
