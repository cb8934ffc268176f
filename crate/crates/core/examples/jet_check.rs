//! Compares network jets and parameter gradients with finite differences
//! on random networks and points.

use fdot::neural::{fd_check, FdReport, Init};
use fdot::{Jet, Mlp, RngStream};
use rand::Rng;

fn main() -> fdot::Result<()> {
    let mut r = RngStream::new(0, "jet-check").rng();
    let mut worst = FdReport::default();
    for i in 0..20 {
        let net = Mlp::new(&[3, 20, 20, 20, 1], Init::Scaled, &RngStream::new(i, "net"))?;
        let z = [r.gen(), r.gen(), r.gen()];
        let seed = Jet::from_array(std::array::from_fn(|_| r.gen_range(-1.0..1.0)));
        worst.merge(&fd_check(&net, z, &seed, 1e-4, 1e-6));
    }
    let names = ["v", "x", "y", "t", "xx", "yy", "xy", "xt", "yt", "xxt", "yyt", "xyt"];
    for (n, e) in names.iter().zip(worst.jet) {
        println!("{n:>4}  {e:.2e}");
    }
    println!("grad  {:.2e}", worst.grad);
    Ok(())
}
