//! Reverse-mode loss gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::loss::{evaluate_loss, loss_and_gradient};
use crate::problems::{ProblemCode, ProblemSpec};

/// Passing tolerances: relative error, or absolute error for gradients near
/// zero where differencing noise dominates.
pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl ParamCheck {
    pub fn abs_error(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    pub fn rel_error(&self) -> f64 {
        self.abs_error() / self.analytic.abs().max(self.numeric.abs()).max(f64::MIN_POSITIVE)
    }

    pub fn passed(&self) -> bool {
        self.rel_error() <= REL_TOL || self.abs_error() <= ABS_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub code: ProblemCode,
    pub seed: u64,
    pub params: Vec<ParamCheck>,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.params.iter().all(ParamCheck::passed)
    }

    /// Largest relative error among parameters outside the near-zero
    /// allowance.
    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.abs_error() > ABS_TOL)
            .map(ParamCheck::rel_error)
            .fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.rel_error().total_cmp(&b.rel_error()))
    }
}

/// Checks `per_layer` weights and one bias in every layer of every network,
/// drawn with `seed`, for the networks initialised from `spec.with_seed(seed)`.
pub fn gradient_check(spec: &ProblemSpec, seed: u64, per_layer: usize) -> Result<GradientCheck> {
    let spec = spec.clone().with_seed(seed);
    let mut field = spec.build_field()?;
    let nodes = spec.build_nodes()?;
    let (code, mat, loads) = (spec.code, &spec.material, &spec.loads);
    let grad = loss_and_gradient(code, &field, &nodes, mat, loads, false)?.gradient;
    let base = field.flatten();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut picks = Vec::new();
    let mut offset = 0;
    for net in &field.nets {
        for layer in &net.params.layers {
            let (nw, nb) = (layer.weight.len(), layer.bias.len());
            for _ in 0..per_layer {
                picks.push(offset + rng.random_range(0..nw));
            }
            picks.push(offset + nw + rng.random_range(0..nb));
            offset += nw + nb;
        }
    }

    let mut params = Vec::with_capacity(picks.len());
    for index in picks {
        let h = 1e-5 * (1.0 + base[index].abs());
        let mut at = |delta: f64| -> Result<f64> {
            let mut p = base.clone();
            p[index] += delta;
            field.assign_flat(&p)?;
            Ok(evaluate_loss(code, &field, &nodes, mat, loads)?.total)
        };
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        params.push(ParamCheck {
            index,
            analytic: grad[index],
            numeric,
        });
    }
    field.assign_flat(&base)?;
    Ok(GradientCheck { code, seed, params })
}
