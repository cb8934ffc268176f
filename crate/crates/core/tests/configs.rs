//! The shipped configs load, validate and carry the reference schedules.

use std::path::Path;

use fdot::config::load_config;
use fdot::synth::SourceKind;

fn load(name: &str) -> fdot::ExperimentConfig {
    load_config(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

#[test]
fn every_shipped_config_validates() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn excitation_schedule() {
    let c = load("excitation.toml");
    let n = c.collocation;
    assert_eq!((n.n_int, n.n_sb, n.n_tb), (256, 1024, 256));
    assert_eq!(c.epochs.k1, 50_000);
    assert_eq!(c.schedule.initial_rate, 1e-3);
    assert_eq!(c.schedule.decay_interval, 20_000);
}

#[test]
fn inversion_schedules() {
    let e1 = load("example1.toml");
    assert_eq!(e1.source, SourceKind::Example1);
    assert_eq!((e1.epochs.k2, e1.schedule.initial_rate, e1.schedule.decay_interval), (20_000, 1e-3, 2000));
    let e2 = load("example2.toml");
    assert_eq!(e2.source, SourceKind::Example2);
    assert_eq!((e2.epochs.k2, e2.schedule.initial_rate, e2.schedule.decay_interval), (40_000, 2e-3, 20_000));
    for c in [e1, e2] {
        assert_eq!(c.schedule.decay_factor, 0.1);
        assert_eq!(c.lambda_weight, 100.0);
        let n = c.collocation;
        assert_eq!(n.n_int + n.n_sb + n.n_tb + n.n_d, 3500);
    }
}
