//! Recovers the Example 2 source from noisy boundary flux.
//!
//! Usage: `cargo run --release --example inversion -- [k1] [k2] [seed] [lambda] [delta] [out_dir] [rate]`
//!
//! Trains the excitation network first (or reuses `out_dir/excitation.json`
//! when present), then the source and emission networks, and prints the
//! relative error of the recovered source on the test mesh.

use std::path::Path;
use std::time::Instant;

use fdot::losses::ExcitationData;
use fdot::metrics::{source_error, TestMesh};
use fdot::synth::{noisy_measurement, ExactSourceSpec, SourceKind};
use fdot::train::{train_excitation, train_inverse};
use fdot::{ExperimentConfig, Mlp};

fn arg<T: std::str::FromStr>(args: &[String], i: usize, default: T) -> T {
    args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> fdot::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = ExperimentConfig::default();
    config.source = SourceKind::Example2;
    config.epochs.k1 = arg(&args, 1, 3000);
    config.epochs.k2 = arg(&args, 2, 2000);
    config.rng_seed = arg(&args, 3, 0);
    config.lambda_weight = arg(&args, 4, 100.0);
    config.noise_delta = arg(&args, 5, 0.01);
    config.schedule.initial_rate = arg(&args, 7, 2e-3);
    config.schedule.decay_interval = (config.epochs.k2 / 2).max(1);
    let out = args.get(6).map(String::as_str).unwrap_or("target/inversion");
    std::fs::create_dir_all(out).map_err(|e| fdot::Error::Invalid(e.to_string()))?;

    let ue_path = Path::new(out).join("excitation.json");
    let u_e = if ue_path.exists() {
        Mlp::load(&ue_path)?
    } else {
        let mut c = config.clone();
        c.schedule.initial_rate = 1e-3;
        c.schedule.decay_interval = (c.epochs.k1 / 2).max(1);
        let start = Instant::now();
        let run = train_excitation(&c, &ExcitationData::default())?;
        println!("excitation: {} epochs in {:.0}s", c.epochs.k1, start.elapsed().as_secs_f64());
        run.net.save(&ue_path)?;
        run.net
    };

    let (_, measurement) = noisy_measurement(&config)?;
    let start = Instant::now();
    let run = train_inverse(&config, &u_e, &measurement)?;
    let secs = start.elapsed().as_secs_f64();
    fdot::io::export_table(&run.log, Path::new(out).join("inversion_log.csv"))?;
    run.source.save(Path::new(out).join("source.json"))?;

    let mesh = TestMesh::from_config(&config)?;
    let (err, _) = source_error(&run.source, &ExactSourceSpec::from(config.source), &mesh)?;
    println!(
        "inversion: {} epochs in {secs:.0}s ({:.1} ms/epoch), final J2 {:.3e}",
        config.epochs.k2,
        1e3 * secs / config.epochs.k2.max(1) as f64,
        run.final_loss.total
    );
    println!("relative L2 error of mu_f: {:.4}", err);
    Ok(())
}
