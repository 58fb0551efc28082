//! Full-batch Adam on the energy loss, with layer statistics captured at a
//! fixed cadence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldModel;
use crate::loss::{evaluate_loss, loss_and_gradient, LossBreakdown, LossGradient};
use crate::problems::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiply the rate by `decay_factor` every `decay_every` epochs; 0 disables.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub seed: u64,
    /// Epochs between layer-statistics captures; 0 disables.
    pub stats_every: usize,
    /// Moving-average window applied to the loss before the stopping test.
    pub smoothing: usize,
    /// Stop once the smoothed loss moved by less than `convergence_tol`
    /// (relative) over this many epochs; 0 disables.
    pub convergence_window: usize,
    pub convergence_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay_every: 0,
            decay_factor: 0.5,
            seed: 0,
            stats_every: 100,
            smoothing: 50,
            convergence_window: 200,
            convergence_tol: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) || !(self.decay_factor > 0.0) {
            return Err(Error::Config("epsilon and decay factor must be positive".into()));
        }
        if self.smoothing == 0 {
            return Err(Error::Config("smoothing window must be >= 1".into()));
        }
        Ok(())
    }

    pub fn rate_at(&self, epoch: usize) -> f64 {
        if self.decay_every == 0 {
            self.learning_rate
        } else {
            self.learning_rate * self.decay_factor.powi((epoch / self.decay_every) as i32)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update with rate `lr`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64, config: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + config.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    pub fn of<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
        for &v in values {
            n += 1;
            s += v;
            s2 += v * v;
        }
        if n == 0 {
            return Self::default();
        }
        let mean = s / n as f64;
        Self {
            mean,
            std: (s2 / n as f64 - mean * mean).max(0.0).sqrt(),
        }
    }
}

/// Statistics of one layer of one network at one epoch. The output layer has
/// no activation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub epoch: usize,
    pub network: usize,
    pub layer: usize,
    pub activation: Option<Moments>,
    pub weight: Moments,
    pub bias: Moments,
    pub gradient: Moments,
}

/// Layer statistics from an evaluation that kept its hidden activations.
pub fn capture_layer_stats(epoch: usize, field: &FieldModel, eval: &LossGradient) -> Vec<LayerStats> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (k, net) in field.nets.iter().enumerate() {
        for (l, layer) in net.params.layers.iter().enumerate() {
            let nw = layer.weight.len();
            let nb = layer.bias.len();
            let grad = &eval.gradient[offset..offset + nw];
            offset += nw + nb;
            out.push(LayerStats {
                epoch,
                network: k,
                layer: l,
                activation: eval.hidden.get(k).and_then(|h| h.get(l)).map(|a| Moments::of(a.iter())),
                weight: Moments::of(layer.weight.iter()),
                bias: Moments::of(layer.bias.iter()),
                gradient: Moments::of(grad),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace {
    /// Loss at the start of each epoch, before that epoch's update.
    pub history: Vec<LossBreakdown>,
    pub stats: Vec<LayerStats>,
    /// Loss of the returned parameters.
    pub final_loss: LossBreakdown,
    pub stop: StopReason,
}

impl TrainingTrace {
    pub fn epochs(&self) -> usize {
        self.history.len()
    }

    /// Gradient moments of one layer at one captured epoch.
    pub fn gradient_at(&self, epoch: usize, network: usize, layer: usize) -> Option<Moments> {
        self.stats
            .iter()
            .find(|s| s.epoch == epoch && s.network == network && s.layer == layer)
            .map(|s| s.gradient)
    }

    /// Trailing moving average of the total loss.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let mut out = Vec::with_capacity(self.history.len());
        let mut acc = 0.0;
        for (i, l) in self.history.iter().enumerate() {
            acc += l.total;
            if i >= w {
                acc -= self.history[i - w].total;
            }
            out.push(acc / (i + 1).min(w) as f64);
        }
        out
    }
}

/// Called once per epoch after the update with the epoch index, the updated
/// model and the loss seen before the update.
pub type Observer<'a> = dyn FnMut(usize, &FieldModel, &LossBreakdown) -> Result<()> + 'a;

pub fn train(spec: &ProblemSpec, config: &TrainConfig) -> Result<(FieldModel, TrainingTrace)> {
    train_observed(spec, config, &mut |_, _, _| Ok(()))
}

pub fn train_observed(
    spec: &ProblemSpec,
    config: &TrainConfig,
    observer: &mut Observer<'_>,
) -> Result<(FieldModel, TrainingTrace)> {
    config.validate()?;
    let mut spec = spec.clone();
    spec.train = config.clone();
    spec.validate()?;
    let nodes = spec.build_nodes()?;
    let mut field = spec.build_field()?;
    let mut params = field.flatten();
    let mut state = AdamState::new(params.len());
    let mut history = Vec::with_capacity(config.epochs);
    let mut stats = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let mut smooth_acc = 0.0;
    let mut smoothed: Vec<f64> = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let capture = config.stats_every > 0 && epoch % config.stats_every == 0;
        let eval = loss_and_gradient(spec.code, &field, &nodes, &spec.material, &spec.loads, capture)?;
        let b = eval.breakdown;
        if !b.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { epoch, value: b.total });
        }
        if capture {
            stats.extend(capture_layer_stats(epoch, &field, &eval));
        }
        history.push(b);

        adam_step(&mut params, &eval.gradient, &mut state, config.rate_at(epoch), config)?;
        field.assign_flat(&params)?;
        observer(epoch, &field, &b)?;

        smooth_acc += b.total;
        if epoch >= config.smoothing {
            smooth_acc -= history[epoch - config.smoothing].total;
        }
        let s = smooth_acc / (epoch + 1).min(config.smoothing) as f64;
        smoothed.push(s);
        let w = config.convergence_window;
        if w > 0 && epoch >= w + config.smoothing {
            let before = smoothed[epoch - w];
            if (s - before).abs() <= config.convergence_tol * s.abs().max(1e-300) {
                stop = StopReason::Converged;
                break;
            }
        }
    }

    let final_loss = evaluate_loss(spec.code, &field, &nodes, &spec.material, &spec.loads)?;
    if !final_loss.is_finite() {
        return Err(Error::NonFinite {
            epoch: history.len(),
            value: final_loss.total,
        });
    }
    Ok((
        field,
        TrainingTrace {
            history,
            stats,
            final_loss,
            stop,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemCode;

    #[test]
    fn adam_first_step_and_limits() {
        let cfg = TrainConfig::default();
        let mut p = vec![0.5, -1.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 1e-3, &cfg).unwrap();
        assert_eq!(p, vec![0.5, -1.0]);

        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[1.0], &mut s, 1e-3, &cfg).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-10);

        // constant gradient: each step is lr·g/(|g| + ε)
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let g = -3.7;
        for _ in 0..500 {
            let before = p[0];
            adam_step(&mut p, &[g], &mut s, 1e-3, &cfg).unwrap();
            let step = p[0] - before;
            assert!((step - 1e-3 * 3.7 / (3.7 + 1e-8)).abs() < 1e-12);
        }
        assert!(adam_step(&mut p, &[1.0, 2.0], &mut s, 1e-3, &cfg).is_err());
    }

    #[test]
    fn rate_schedule() {
        let mut cfg = TrainConfig::default();
        assert_eq!(cfg.rate_at(5000), 1e-3);
        cfg.decay_every = 1000;
        assert_eq!(cfg.rate_at(999), 1e-3);
        assert_eq!(cfg.rate_at(1000), 5e-4);
        assert_eq!(cfg.rate_at(2500), 2.5e-4);
    }

    #[test]
    fn config_validation() {
        let bad = [
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            TrainConfig {
                beta1: 1.0,
                ..Default::default()
            },
            TrainConfig {
                beta2: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn moments() {
        let m = Moments::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert_eq!(Moments::of(&[]), Moments::default());
    }

    #[test]
    fn zero_epochs_leave_model_untouched() {
        let spec = ProblemSpec::default_for(ProblemCode::FgmElasDirch1d);
        let cfg = TrainConfig {
            epochs: 0,
            ..spec.train.clone()
        };
        let (field, trace) = train(&spec, &cfg).unwrap();
        assert_eq!(field, spec.build_field().unwrap());
        assert!(trace.history.is_empty() && trace.stats.is_empty());
    }

    #[test]
    fn stats_shape_and_cadence() {
        let spec = ProblemSpec::default_for(ProblemCode::FgmThermoElas1d);
        let cfg = TrainConfig {
            epochs: 25,
            stats_every: 10,
            ..spec.train.clone()
        };
        let (_, trace) = train(&spec, &cfg).unwrap();
        assert_eq!(trace.history.len(), 25);
        // two networks with three layers each, at epochs 0, 10, 20
        assert_eq!(trace.stats.len(), 3 * 6);
        for s in &trace.stats {
            assert_eq!(s.activation.is_some(), s.layer < 2);
        }
        assert!(trace.history.windows(2).all(|w| w[0].total.is_finite()));
    }

    #[test]
    fn zero_network_activations_vanish() {
        let spec = ProblemSpec::default_for(ProblemCode::FgmElasDirch1d);
        let mut field = spec.build_field().unwrap();
        let zeros = vec![0.0; field.param_count()];
        field.assign_flat(&zeros).unwrap();
        let nodes = spec.build_nodes().unwrap();
        let eval = loss_and_gradient(spec.code, &field, &nodes, &spec.material, &spec.loads, true).unwrap();
        let stats = capture_layer_stats(0, &field, &eval);
        assert_eq!(stats.iter().filter(|s| s.activation.is_some()).count(), 2);
        for s in stats.iter().filter_map(|s| s.activation) {
            assert_eq!(s, Moments { mean: 0.0, std: 0.0 });
        }
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let spec = ProblemSpec::default_for(ProblemCode::ElasBf1d);
        let cfg = TrainConfig {
            epochs: 40,
            ..spec.train.clone()
        };
        let (a, ta) = train(&spec, &cfg).unwrap();
        let (b, tb) = train(&spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn divergence_is_reported() {
        let spec = ProblemSpec::default_for(ProblemCode::FgmElasNeu1d);
        let cfg = TrainConfig {
            epochs: 10,
            learning_rate: 1e300,
            ..spec.train.clone()
        };
        assert!(matches!(train(&spec, &cfg), Err(Error::NonFinite { .. })));
    }
}
