//! Fully connected networks: `h = ψ(W h + b)` through the hidden layers, then
//! an affine output layer with no activation.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Activation, Graph, Node, SpatialDual, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: &[usize], output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden: hidden.to_vec(),
            activation,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network input/output width must be >= 1".into()));
        }
        if self.hidden.is_empty() {
            return Err(Error::Config("network needs at least one hidden layer".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config(format!("hidden widths must be >= 1, got {:?}", self.hidden)));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(config: &MlpConfig) -> Result<MlpParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = config
        .widths()
        .windows(2)
        .map(|p| {
            let (fan_in, fan_out) = (p[0], p[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
            Layer {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpParams { layers })
}

/// Parameters registered on a [`Graph`]; weights first then bias, per layer.
#[derive(Debug, Clone)]
pub struct GraphParams {
    pub layers: Vec<(Node, Node)>,
}

/// Parameters registered on a scalar [`Tape`].
#[derive(Debug, Clone)]
pub struct TapeParams {
    pub weights: Vec<Vec<Vec<Var>>>,
    pub biases: Vec<Vec<Var>>,
}

impl TapeParams {
    /// Leaves in the same order as [`MlpParams::flatten`].
    pub fn flat_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for row in w {
                out.extend_from_slice(row);
            }
            out.extend_from_slice(b);
        }
        out
    }
}

impl MlpParams {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weight.nrows()).unwrap_or(0)
    }

    /// Layer by layer: weight (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weight.iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[k];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn check_shapes(&self, config: &MlpConfig) -> Result<()> {
        let widths = config.widths();
        if self.layers.len() + 1 != widths.len() {
            return Err(Error::Shape(format!(
                "{} layers for widths {:?}",
                self.layers.len(),
                widths
            )));
        }
        for (l, p) in self.layers.iter().zip(widths.windows(2)) {
            if l.weight.dim() != (p[1], p[0]) || l.bias.len() != p[1] {
                return Err(Error::Shape(format!(
                    "layer {:?}/{} does not match {:?}",
                    l.weight.dim(),
                    l.bias.len(),
                    p
                )));
            }
        }
        Ok(())
    }

    /// Plain evaluation at one point.
    pub fn forward_value(&self, act: Activation, x: &[f64]) -> Vec<f64> {
        let mut h = Array1::from_vec(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let z = l.weight.dot(&h) + &l.bias;
            h = if i == last { z } else { z.mapv(|v| act.value(v)) };
        }
        h.to_vec()
    }

    pub fn on_tape(&self, tape: &mut Tape) -> TapeParams {
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            weights.push(
                l.weight
                    .rows()
                    .into_iter()
                    .map(|r| r.iter().map(|&w| tape.scalar(w)).collect())
                    .collect(),
            );
            biases.push(l.bias.iter().map(|&b| tape.scalar(b)).collect());
        }
        TapeParams { weights, biases }
    }

    pub fn on_graph(&self, graph: &mut Graph) -> GraphParams {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = graph.param(l.weight.clone());
                let b = graph.param(l.bias.clone().insert_axis(ndarray::Axis(1)));
                (w, b)
            })
            .collect();
        GraphParams { layers }
    }
}

/// Forward pass on spatial duals recorded on a scalar tape.
pub fn forward(
    tape: &mut Tape,
    params: &TapeParams,
    act: Activation,
    x: &[SpatialDual],
) -> Result<Vec<SpatialDual>> {
    let in_dim = params.weights[0].first().map(|r| r.len()).unwrap_or(0);
    if x.len() != in_dim {
        return Err(Error::Shape(format!("input has {} components, network expects {in_dim}", x.len())));
    }
    let last = params.weights.len() - 1;
    let mut h: Vec<SpatialDual> = x.to_vec();
    for (i, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut next = Vec::with_capacity(w.len());
        for (row, &bias) in w.iter().zip(b) {
            let mut acc = SpatialDual::mul_var(tape, &h[0], row[0]);
            for (hj, &wj) in h.iter().zip(row).skip(1) {
                let term = SpatialDual::mul_var(tape, hj, wj);
                acc = SpatialDual::add(tape, &acc, &term);
            }
            let z = SpatialDual::add_var(tape, &acc, bias);
            next.push(if i == last { z } else { SpatialDual::activate(tape, act, &z) });
        }
        h = next;
    }
    Ok(h)
}

/// Forward pass over a dual batch (see [`crate::autodiff::graph`]).
///
/// `x` is `input_dim × (1 + d) n`; the result is `output_dim × (1 + d) n`.
pub fn forward_batch(graph: &mut Graph, params: &GraphParams, act: Activation, x: Node, n: usize) -> Node {
    let last = params.layers.len() - 1;
    let mut h = x;
    for (i, &(w, b)) in params.layers.iter().enumerate() {
        let z = graph.matmul(w, h);
        let z = graph.add_bias(z, b, n);
        h = if i == last { z } else { graph.dual_activate(z, act, n) };
    }
    h
}

/// Same as [`forward_batch`] but also returns every hidden activation node.
pub fn forward_batch_traced(
    graph: &mut Graph,
    params: &GraphParams,
    act: Activation,
    x: Node,
    n: usize,
) -> (Node, Vec<Node>) {
    let last = params.layers.len() - 1;
    let mut hidden = Vec::with_capacity(last);
    let mut h = x;
    for (i, &(w, b)) in params.layers.iter().enumerate() {
        let z = graph.matmul(w, h);
        let z = graph.add_bias(z, b, n);
        h = if i == last {
            z
        } else {
            let a = graph.dual_activate(z, act, n);
            hidden.push(a);
            a
        };
    }
    (h, hidden)
}

/// Dual batch for a set of points: primal block holds the coordinates, tangent
/// block `k` is the unit seed along coordinate `k`.
pub fn lift_batch(points: &[[f64; 2]], dim: usize) -> Array2<f64> {
    let n = points.len();
    let mut x = Array2::zeros((dim, (1 + dim) * n));
    for (i, p) in points.iter().enumerate() {
        for j in 0..dim {
            x[[j, i]] = p[j];
            x[[j, (1 + j) * n + i]] = 1.0;
        }
    }
    x
}

/// On-disk checkpoint. JSON object with the network configuration and one
/// entry per layer, input side first:
///
/// ```json
/// { "config": { "input_dim": 1, "output_dim": 1, "hidden": [5, 5],
///               "activation": "tanh", "seed": 0 },
///   "layers": [ { "weight": [[...], ...], "bias": [...] }, ... ] }
/// ```
///
/// `weight` is row-major with shape `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: MlpConfig,
    pub layers: Vec<CheckpointLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLayer {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn new(config: &MlpConfig, params: &MlpParams) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| CheckpointLayer {
                weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: l.bias.to_vec(),
            })
            .collect();
        Self {
            config: config.clone(),
            layers,
        }
    }

    pub fn into_parts(self) -> Result<(MlpConfig, MlpParams)> {
        self.config.validate()?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in self.layers {
            let rows = l.weight.len();
            let cols = l.weight.first().map(|r| r.len()).unwrap_or(0);
            if l.weight.iter().any(|r| r.len() != cols) {
                return Err(Error::Shape("ragged weight matrix in checkpoint".into()));
            }
            let flat: Vec<f64> = l.weight.into_iter().flatten().collect();
            let weight = Array2::from_shape_vec((rows, cols), flat).map_err(|e| Error::Shape(e.to_string()))?;
            layers.push(Layer {
                weight,
                bias: Array1::from_vec(l.bias),
            });
        }
        let params = MlpParams { layers };
        params.check_shapes(&self.config)?;
        Ok((self.config, params))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::dual_lift;

    fn small() -> MlpConfig {
        MlpConfig::new(1, &[5, 5], 1, Activation::Tanh).with_seed(7)
    }

    #[test]
    fn parameter_count() {
        let p = init_params(&small()).unwrap();
        assert_eq!(p.param_count(), 46);
        assert_eq!(small().param_count(), 46);
    }

    #[test]
    fn deterministic_init_with_zero_bias() {
        let a = init_params(&small()).unwrap();
        let b = init_params(&small()).unwrap();
        assert_eq!(a, b);
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
        let c = init_params(&small().with_seed(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn glorot_bounds() {
        let p = init_params(&MlpConfig::new(2, &[100, 100], 3, Activation::Tanh2)).unwrap();
        let limit = (6.0f64 / 200.0).sqrt();
        assert!(p.layers[1].weight.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn invalid_widths() {
        assert!(init_params(&MlpConfig::new(1, &[5, 0], 1, Activation::Tanh)).is_err());
        assert!(init_params(&MlpConfig::new(0, &[5], 1, Activation::Tanh)).is_err());
    }

    #[test]
    fn null_network() {
        let mut p = init_params(&small()).unwrap();
        p.assign_flat(&vec![0.0; 46]).unwrap();
        let mut tape = Tape::new();
        let tp = p.on_tape(&mut tape);
        let x = dual_lift(&mut tape, &[0.37]);
        let y = forward(&mut tape, &tp, Activation::Tanh, &x).unwrap();
        assert_eq!(y[0].value(&tape), 0.0);
        assert_eq!(y[0].gradient(&tape), vec![0.0]);
    }

    #[test]
    fn identity_like_net() {
        let cfg = MlpConfig::new(1, &[1], 1, Activation::Tanh);
        let mut p = init_params(&cfg).unwrap();
        p.assign_flat(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        let y = p.forward_value(Activation::Tanh, &[0.5]);
        assert!((y[0] - 0.462_117_157).abs() < 1e-9);
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let cfg = MlpConfig::new(2, &[6, 4], 2, Activation::Tanh2).with_seed(3);
        let p = init_params(&cfg).unwrap();
        let x0 = [0.3, -0.4];
        let mut tape = Tape::new();
        let tp = p.on_tape(&mut tape);
        let x = dual_lift(&mut tape, &x0);
        let y = forward(&mut tape, &tp, cfg.activation, &x).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let fp = p.forward_value(cfg.activation, &xp);
            let fm = p.forward_value(cfg.activation, &xm);
            for (k, yk) in y.iter().enumerate() {
                let fd = (fp[k] - fm[k]) / (2.0 * h);
                let ad = yk.gradient(&tape)[j];
                assert!((ad - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{ad} vs {fd}");
            }
        }
    }

    #[test]
    fn final_layer_is_linear() {
        let cfg = MlpConfig::new(1, &[5, 5], 1, Activation::Tanh).with_seed(1);
        let mut p = init_params(&cfg).unwrap();
        let y1 = p.forward_value(cfg.activation, &[0.4])[0];
        let last = p.layers.len() - 1;
        p.layers[last].weight *= 2.0;
        let y2 = p.forward_value(cfg.activation, &[0.4])[0];
        assert_eq!(y2, 2.0 * y1);
    }

    #[test]
    fn batch_matches_scalar_tape() {
        let cfg = MlpConfig::new(2, &[4, 3], 2, Activation::Elu2).with_seed(11);
        let p = init_params(&cfg).unwrap();
        let pts = [[0.1, 0.2], [-0.5, 0.9], [0.7, -0.3]];
        let n = pts.len();

        let mut g = Graph::new();
        let gp = p.on_graph(&mut g);
        let x = g.constant(lift_batch(&pts, 2));
        let y = forward_batch(&mut g, &gp, cfg.activation, x, n);
        // scalar objective: sum of all outputs and tangents
        let s = g.sum(y);
        let adj = g.backward(s);
        let yv = g.value(y).clone();

        let mut tape = Tape::new();
        let tp = p.on_tape(&mut tape);
        let mut terms = Vec::new();
        for (i, pt) in pts.iter().enumerate() {
            let xd = dual_lift(&mut tape, pt);
            let out = forward(&mut tape, &tp, cfg.activation, &xd).unwrap();
            for (k, o) in out.iter().enumerate() {
                assert!((yv[[k, i]] - o.value(&tape)).abs() < 1e-14);
                for j in 0..2 {
                    assert!((yv[[k, (1 + j) * n + i]] - o.gradient(&tape)[j]).abs() < 1e-14);
                }
                terms.push(o.primal);
                terms.extend_from_slice(&o.tangents);
            }
        }
        let root = tape.sum(&terms);
        tape.reverse_sweep(root);
        let flat_tape: Vec<f64> = tp.flat_vars().iter().map(|&v| tape.adjoint(v)).collect();
        let mut flat_graph = Vec::new();
        for &(w, b) in &gp.layers {
            flat_graph.extend(adj.get(w).unwrap().iter().copied());
            flat_graph.extend(adj.get(b).unwrap().iter().copied());
        }
        for (a, b) in flat_tape.iter().zip(&flat_graph) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small();
        let p = init_params(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        Checkpoint::new(&cfg, &p).save(&path).unwrap();
        let (c2, p2) = Checkpoint::load(&path).unwrap().into_parts().unwrap();
        assert_eq!(c2, cfg);
        assert_eq!(p2, p);
    }
}
