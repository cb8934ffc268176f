//! Trains the excitation network and compares it with a finite-difference
//! solve on the test mesh.
//!
//! Usage: `cargo run --release --example excitation_training -- [epochs] [out_dir]`

use std::time::Instant;

use fdot::losses::ExcitationData;
use fdot::metrics::{relative_l2, TestMesh};
use fdot::synth::solve_excitation;
use fdot::train::train_excitation;
use fdot::ExperimentConfig;

fn main() -> fdot::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = ExperimentConfig::default();
    config.epochs.k1 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    config.schedule.decay_interval = (config.epochs.k1 / 2).max(1);
    config.test_mesh = 25;

    let start = Instant::now();
    let run = train_excitation(&config, &ExcitationData::default())?;
    let secs = start.elapsed().as_secs_f64();

    let oracle = solve_excitation(&config.coefficients, &config.grid()?)?;
    let mesh = TestMesh::from_config(&config)?;
    let approx = mesh.evaluate(|x, y, t| run.net.value([x, y, t]));
    let exact = mesh.evaluate(|x, y, t| oracle.sample(x, y, t));
    let err = relative_l2(&approx, &exact)?;

    println!("epochs          {}", config.epochs.k1);
    println!("seconds         {secs:.1} ({:.2} ms/epoch)", 1e3 * secs / config.epochs.k1.max(1) as f64);
    println!("final J1        {:.4e}", run.final_loss.total);
    println!("rel L2 vs grid  {err:.4}");

    if let Some(dir) = args.get(2) {
        std::fs::create_dir_all(dir).map_err(|e| fdot::Error::Invalid(e.to_string()))?;
        run.net.save(format!("{dir}/excitation.json"))?;
        fdot::io::export_table(&run.log, format!("{dir}/excitation_log.csv"))?;
    }
    Ok(())
}
