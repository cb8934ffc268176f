//! Adam with step decay, and the excitation and inversion training loops.

use crate::config::{ExperimentConfig, ScheduleSpec};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::losses::{empirical_loss_j1, empirical_loss_j2, sample_collocation, ExcitationData, LossBreakdown};
use crate::neural::{Init, Mlp};
use crate::rng::RngStream;
use crate::synth::Measurement;

/// Global gradient norm above which gradients are rescaled.
pub const CLIP_NORM: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub hyper: AdamParams,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            hyper: AdamParams::default(),
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, rate: f64) -> Result<()> {
    if params.len() != grad.len() || grad.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i} is {}", grad[i])));
    }
    let AdamParams { beta1, beta2, eps } = state.hyper;
    state.step += 1;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= rate * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// `initial · factor^⌊epoch / interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub initial: f64,
    pub factor: f64,
    pub interval: usize,
}

impl Schedule {
    pub fn from_spec(spec: &ScheduleSpec, initial_override: Option<f64>) -> Self {
        Self {
            initial: initial_override.unwrap_or(spec.initial_rate),
            factor: spec.decay_factor,
            interval: spec.decay_interval.max(1),
        }
    }

    pub fn rate(&self, epoch: usize) -> f64 {
        self.initial * self.factor.powi((epoch / self.interval) as i32)
    }
}

/// Rescales all blocks jointly so the global norm is at most `max_norm`.
/// Returns the norm before clipping and whether clipping happened.
pub fn clip_global(blocks: &mut [&mut Vec<f64>], max_norm: f64) -> (f64, bool) {
    let norm = blocks.iter().flat_map(|b| b.iter()).map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for b in blocks.iter_mut() {
            b.iter_mut().for_each(|g| *g *= s);
        }
        (norm, true)
    } else {
        (norm, false)
    }
}

fn init_net(config: &ExperimentConfig, which: &str) -> Result<Mlp> {
    let spec = match which {
        "excitation" => &config.networks.excitation,
        "source" => &config.networks.source,
        _ => &config.networks.emission,
    };
    let rng = RngStream::new(config.rng_seed, format!("init/{which}"));
    Mlp::new(&spec.layer_widths(), Init::Scaled, &rng)
}

/// Result of [`train_excitation`].
#[derive(Debug, Clone)]
pub struct ExcitationRun {
    pub net: Mlp,
    pub log: Table,
    pub final_loss: LossBreakdown,
}

/// Trains the excitation network for `config.epochs.k1` epochs. The log
/// records the loss at the parameters before each update.
pub fn train_excitation(config: &ExperimentConfig, data: &ExcitationData<'_>) -> Result<ExcitationRun> {
    config.validate()?;
    let mut net = init_net(config, "excitation")?;
    let schedule = Schedule::from_spec(&config.schedule, config.schedule.overrides.excitation);
    let mut adam = AdamState::new(net.param_count());
    let rng = RngStream::new(config.rng_seed, "collocation/excitation");
    let mut log = LossBreakdown::log_table();
    let mut last = None;
    for epoch in 0..config.epochs.k1 {
        let set = sample_collocation(config, &rng, epoch, None);
        let (loss, grad) = empirical_loss_j1(&net, &set, &config.coefficients, data, true);
        let mut grad = grad.expect("gradient requested");
        let (norm, clipped) = clip_global(&mut [&mut grad], CLIP_NORM);
        let rate = schedule.rate(epoch);
        adam_step(net.params_mut(), &grad, &mut adam, rate)
            .map_err(|e| Error::NonFinite(format!("excitation epoch {epoch}: {e}")))?;
        log.push(loss.log_row(epoch, rate, norm, clipped));
        last = Some(loss);
    }
    let final_loss = match last {
        Some(l) => l,
        None => {
            let set = sample_collocation(config, &rng, 0, None);
            empirical_loss_j1(&net, &set, &config.coefficients, data, false).0
        }
    };
    Ok(ExcitationRun { net, log, final_loss })
}

/// Result of [`train_inverse`].
#[derive(Debug, Clone)]
pub struct InverseRun {
    pub source: Mlp,
    pub emission: Mlp,
    pub log: Table,
    pub final_loss: LossBreakdown,
}

/// Trains the source and emission networks jointly for `config.epochs.k2`
/// epochs against the noisy flux in `measurement`.
pub fn train_inverse(config: &ExperimentConfig, u_e_star: &Mlp, measurement: &Measurement) -> Result<InverseRun> {
    config.validate()?;
    let data = measurement.data_points();
    if data.is_empty() {
        return Err(Error::Invalid("measurement has no samples with t > 0".into()));
    }
    let mut net_f = init_net(config, "source")?;
    let mut net_m = init_net(config, "emission")?;
    let sched_f = Schedule::from_spec(&config.schedule, config.schedule.overrides.source);
    let sched_m = Schedule::from_spec(&config.schedule, config.schedule.overrides.emission);
    let mut adam_f = AdamState::new(net_f.param_count());
    let mut adam_m = AdamState::new(net_m.param_count());
    let rng = RngStream::new(config.rng_seed, "collocation/inverse");
    let lambda = config.lambda_weight;
    let bd = config.boundary_derivative;
    let c = &config.coefficients;
    let mut log = LossBreakdown::log_table();
    let mut last = None;
    for epoch in 0..config.epochs.k2 {
        let set = sample_collocation(config, &rng, epoch, Some(&data));
        let (loss, grad) = empirical_loss_j2(&net_f, &net_m, u_e_star, &set, c, lambda, bd, true)?;
        let mut grad = grad.expect("gradient requested");
        let (norm, clipped) = clip_global(&mut [&mut grad.source, &mut grad.emission], CLIP_NORM);
        let (rf, rm) = (sched_f.rate(epoch), sched_m.rate(epoch));
        adam_step(net_f.params_mut(), &grad.source, &mut adam_f, rf)
            .map_err(|e| Error::NonFinite(format!("source epoch {epoch}: {e}")))?;
        adam_step(net_m.params_mut(), &grad.emission, &mut adam_m, rm)
            .map_err(|e| Error::NonFinite(format!("emission epoch {epoch}: {e}")))?;
        log.push(loss.log_row(epoch, rf, norm, clipped));
        last = Some(loss);
    }
    let final_loss = match last {
        Some(l) => l,
        None => {
            let set = sample_collocation(config, &rng, 0, Some(&data));
            empirical_loss_j2(&net_f, &net_m, u_e_star, &set, c, lambda, bd, false)?.0
        }
    };
    Ok(InverseRun {
        source: net_f,
        emission: net_m,
        log,
        final_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let g = [0.3, -4.0, 1e-3];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &g, &mut s, 0.01).unwrap();
        for i in 0..3 {
            let expect = -0.01 * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - expect).abs() < 1e-15, "{} vs {expect}", p[i]);
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        assert!(matches!(adam_step(&mut p, &[f64::NAN], &mut s, 0.1), Err(Error::NonFinite(_))));
        assert_eq!(s.step, 0);
        assert!(adam_step(&mut p, &[0.0, 1.0], &mut s, 0.1).is_err());
    }

    #[test]
    fn schedule_is_exact() {
        let s = Schedule {
            initial: 1e-3,
            factor: 0.5,
            interval: 100,
        };
        assert_eq!(s.rate(0), 1e-3);
        assert_eq!(s.rate(99), 1e-3);
        assert_eq!(s.rate(100), 1e-3 * 0.5);
        assert_eq!(s.rate(250), 1e-3 * 0.25);
        let spec = ScheduleSpec::default();
        assert_eq!(Schedule::from_spec(&spec, Some(0.2)).rate(0), 0.2);
    }

    #[test]
    fn clipping_rescales_jointly() {
        let mut a = vec![3000.0, 0.0];
        let mut b = vec![0.0, 4000.0];
        let (n, c) = clip_global(&mut [&mut a, &mut b], 1e3);
        assert_eq!(n, 5000.0);
        assert!(c);
        assert!((a[0] - 600.0).abs() < 1e-9 && (b[1] - 800.0).abs() < 1e-9);
        let mut small = vec![1.0];
        assert_eq!(clip_global(&mut [&mut small], 1e3), (1.0, false));
    }

    fn tiny_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.collocation.n_int = 16;
        c.collocation.n_sb = 16;
        c.collocation.n_tb = 8;
        c.collocation.n_d = 8;
        c.networks.excitation.widths = vec![6];
        c.networks.source.widths = vec![6];
        c.networks.emission.widths = vec![6];
        c.epochs.k1 = 5;
        c.epochs.k2 = 3;
        c
    }

    #[test]
    fn zero_epochs_return_initialization() {
        let mut cfg = tiny_config();
        cfg.epochs.k1 = 0;
        let run = train_excitation(&cfg, &ExcitationData::default()).unwrap();
        assert_eq!(run.net, init_net(&cfg, "excitation").unwrap());
        assert!(run.log.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = tiny_config();
        let a = train_excitation(&cfg, &ExcitationData::default()).unwrap();
        let b = train_excitation(&cfg, &ExcitationData::default()).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.len(), 5);
    }
}
