use fdot::losses::ExcitationData;
use fdot::synth::{noisy_measurement, SourceKind};
use fdot::train::{train_excitation, train_inverse};
use fdot::ExperimentConfig;

fn small(epochs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.collocation.n_int = 64;
    c.collocation.n_sb = 64;
    c.collocation.n_tb = 32;
    c.collocation.n_d = 32;
    c.epochs.k1 = epochs;
    c.epochs.k2 = epochs;
    c.schedule.decay_interval = 4000;
    c
}

#[test]
fn affine_solution_is_learned() {
    // u* = 0.5 + 0.3x - 0.2y + 0.4t solves the excitation operator with
    // source c⁻¹·0.4 + μ_a u*.
    let cfg = small(5000);
    let co = cfg.coefficients;
    let u = |x: f64, y: f64, t: f64| 0.5 + 0.3 * x - 0.2 * y + 0.4 * t;
    let data = ExcitationData {
        g: Box::new(move |x, y, t, n| n[0] * 0.3 - n[1] * 0.2 + co.beta * u(x, y, t)),
        source: Box::new(move |x, y, t| 0.4 / co.c + co.mu_a * u(x, y, t)),
        initial: Box::new(move |x, y| u(x, y, 0.0)),
    };
    let run = train_excitation(&cfg, &data).unwrap();
    let total = run.log.column("total").unwrap();
    assert!(run.final_loss.total < 1e-4, "final J1 {:.3e}", run.final_loss.total);
    let tail: f64 = total[total.len() - 100..].iter().sum::<f64>() / 100.0;
    assert!(tail < 0.1 * total[0]);
    let worst = [[0.1, 0.9, 0.2], [0.7, 0.3, 0.8], [0.5, 0.5, 1.0]]
        .iter()
        .map(|z| (run.net.value(*z) - u(z[0], z[1], z[2])).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.02, "pointwise error {worst}");
}

#[test]
fn inversion_log_is_deterministic_and_starts_at_initial_loss() {
    let mut cfg = small(5);
    cfg.source = SourceKind::Example2;
    cfg.grid.nx = 9;
    cfg.grid.ny = 9;
    cfg.grid.nt = 9;
    cfg.data_refinement = 1;
    let ue = train_excitation(&cfg, &ExcitationData::default()).unwrap().net;
    let (_, m) = noisy_measurement(&cfg).unwrap();
    let a = train_inverse(&cfg, &ue, &m).unwrap();
    let b = train_inverse(&cfg, &ue, &m).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.source, b.source);

    cfg.noise_delta = 0.0;
    let (_, clean) = noisy_measurement(&cfg).unwrap();
    let trained = train_inverse(&cfg, &ue, &clean).unwrap();
    cfg.epochs.k2 = 0;
    let untrained = train_inverse(&cfg, &ue, &clean).unwrap();
    assert!(untrained.log.is_empty());
    let col = trained.log.header.iter().position(|h| h == "total").unwrap();
    assert_eq!(untrained.final_loss.total, trained.log.rows[0][col]);
}
