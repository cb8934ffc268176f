use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdot::config::load_config;
use fdot::io::{export_table, run_id, write_manifest, Table};
use fdot::losses::ExcitationData;
use fdot::metrics::{self, source_error, source_snapshots, write_snapshots, TestMesh};
use fdot::stability::{norm_axiom_suite, stability_trials, write_stability_report, OmegaBasis};
use fdot::synth::{noisy_measurement, ExactSourceSpec, Measurement};
use fdot::train::{train_excitation, train_inverse};
use fdot::{Error, ExperimentConfig, Mlp, Result, RngStream};

#[derive(Parser)]
#[command(name = "fdot", about = "Time-domain fluorescence DOT: synthesis, training and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a noisy synthetic measurement for the configured source.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the excitation network.
    TrainExcitation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the source from a measurement CSV.
    Invert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "checkpoint-ue")]
        checkpoint_ue: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the stability inequality and the norm axioms on random pairs.
    StabilityCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        basis: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error tables and field snapshots for a trained source network.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "checkpoint-f")]
        checkpoint_f: PathBuf,
        /// Training logs to copy into the report.
        #[arg(long)]
        log: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(out: Option<PathBuf>, command: &str, config: &ExperimentConfig) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| Path::new("runs").join(format!("{command}-{}", run_id(config))));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn domain(config: &ExperimentConfig) -> ([f64; 2], [f64; 2]) {
    (config.domain.x, config.domain.y)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synthesize { config, out } => {
            let config = load_config(config)?;
            let dir = out_dir(out, "synthesize", &config)?;
            let (syn, m) = noisy_measurement(&config)?;
            let files = vec![dir.join("measurement.csv"), dir.join("u_e.csv"), dir.join("u_m.csv")];
            m.write_csv(&files[0])?;
            syn.u_e.write_csv(&files[1])?;
            syn.u_m.write_csv(&files[2])?;
            write_manifest(&dir, "synthesize", &config, &files)?;
            println!("wrote {}", dir.display());
        }
        Command::TrainExcitation { config, out } => {
            let config = load_config(config)?;
            let dir = out_dir(out, "train-excitation", &config)?;
            let run = train_excitation(&config, &ExcitationData::default())?;
            let files = vec![dir.join("excitation.json"), dir.join("excitation_log.csv")];
            run.net.save(&files[0])?;
            export_table(&run.log, &files[1])?;
            write_manifest(&dir, "train-excitation", &config, &files)?;
            println!("final J1 {:.4e}; wrote {}", run.final_loss.total, dir.display());
        }
        Command::Invert {
            config,
            data,
            checkpoint_ue,
            out,
        } => {
            let config = load_config(config)?;
            let dir = out_dir(out, "invert", &config)?;
            let measurement = Measurement::read_csv(&data, domain(&config))?;
            let u_e = Mlp::load(&checkpoint_ue)?;
            let run = train_inverse(&config, &u_e, &measurement)?;
            let files = vec![
                dir.join("source.json"),
                dir.join("emission.json"),
                dir.join("inversion_log.csv"),
            ];
            run.source.save(&files[0])?;
            run.emission.save(&files[1])?;
            export_table(&run.log, &files[2])?;
            write_manifest(&dir, "invert", &config, &files)?;
            println!("final J2 {:.4e}; wrote {}", run.final_loss.total, dir.display());
        }
        Command::StabilityCheck {
            config,
            trials,
            basis,
            out,
        } => {
            let config = load_config(config)?;
            let dir = out_dir(out, "stability-check", &config)?;
            let grid = config.grid()?;
            let c = &config.coefficients;
            let rng = RngStream::new(config.rng_seed, "stability");
            let omega = OmegaBasis::generate(basis, &grid, c, &config.time_mesh(), &rng.substream("basis"))?;
            let records = stability_trials(&omega, &grid, c, trials, &rng.substream("trials"))?;
            let axioms = norm_axiom_suite(&omega, 50, &rng.substream("axioms"))?;
            let report = dir.join("stability_report.csv");
            write_stability_report(&records, &report)?;
            let mut t = Table::new([
                "m",
                "homogeneity_error",
                "triangle_pairs",
                "triangle_violations",
                "upper_bound_constant",
                "upper_bound_violations",
            ]);
            t.push(vec![
                axioms.m as f64,
                axioms.homogeneity_error,
                axioms.triangle_pairs as f64,
                axioms.triangle_violations as f64,
                axioms.upper_bound_constant,
                axioms.upper_bound_violations as f64,
            ]);
            let axiom_path = dir.join("norm_axioms.csv");
            export_table(&t, &axiom_path)?;
            write_manifest(&dir, "stability-check", &config, &[report, axiom_path])?;
            let held = records.iter().filter(|r| r.satisfied).count();
            let worst = records.iter().map(|r| r.ratio()).fold(0.0, f64::max);
            println!("lower bound, M={}: {held}/{trials} trials hold, worst lhs/rhs {worst:.3}", omega.len());
        }
        Command::Report {
            config,
            checkpoint_f,
            log,
            out,
        } => {
            let config = load_config(config)?;
            let dir = out_dir(out, "report", &config)?;
            let net = Mlp::load(&checkpoint_f)?;
            let spec = ExactSourceSpec::from(config.source);
            let mesh = TestMesh::from_config(&config)?;
            let (err, slices) = source_error(&net, &spec, &mesh)?;
            let mut files = Vec::new();
            let mut summary = Table::new(["relative_l2", "nodes", "lambda", "noise_delta", "seed"]);
            summary.push(vec![
                err,
                mesh.len() as f64,
                config.lambda_weight,
                config.noise_delta,
                config.rng_seed as f64,
            ]);
            files.push(dir.join("error_summary.csv"));
            export_table(&summary, &files[0])?;
            files.push(dir.join("error_timeseries.csv"));
            export_table(&metrics::timeseries_table(&slices), files.last().unwrap())?;
            let snaps = source_snapshots(&net, &spec, &config, config.test_mesh)?;
            for name in write_snapshots(&snaps, &dir, "mu_f")? {
                files.push(dir.join(name));
            }
            for (i, l) in log.iter().enumerate() {
                let name = l
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("log_{i}.csv"));
                let dest = dir.join(name);
                std::fs::copy(l, &dest).map_err(|e| Error::Invalid(format!("{}: {e}", l.display())))?;
                files.push(dest);
            }
            write_manifest(&dir, "report", &config, &files)?;
            println!("relative L2 error of mu_f {err:.4}; wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
