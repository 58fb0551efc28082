//! Admissible fields built from raw network outputs.
//!
//! Every transform used here has the form `ũ_i(x) = a_i(x) + b_i(x) ṽ_i(x)`
//! where `a_i` carries the prescribed boundary values and `b_i` vanishes on
//! the Dirichlet boundary. Both functions are known in closed form together
//! with their gradients, which is all the product rule needs.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Node, SpatialDual, Tape};
use crate::error::{Error, Result};
use crate::network::{self, init_params, GraphParams, MlpConfig, MlpParams};

/// `a + b ṽ` with the gradients of `a` and `b` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub offset: f64,
    pub offset_grad: [f64; 2],
    pub scale: f64,
    pub scale_grad: [f64; 2],
}

impl Envelope {
    fn scaled(scale: f64, scale_grad: [f64; 2]) -> Self {
        Self {
            offset: 0.0,
            offset_grad: [0.0; 2],
            scale,
            scale_grad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `u = x + x(1 − x) ṽ`, pins u(0) = 0 and u(1) = 1.
    Dirichlet1d,
    /// `u = x ṽ`, pins u(0) = 0 only.
    Neumann1d,
    /// `u, T = x + x(1 − x) ṽ₁,₂`.
    Thermo1d,
    /// `u = x ⊙ ṽ`, symmetry planes of the quarter plate.
    Kirsch,
    /// `u = x₂ ⊙ ṽ`, clamped bottom edge.
    Neumann2d,
    /// `u₁ = x₂ ṽ₁`, `u₂ = x₂/3L + x₂(3L − x₂) ṽ₂`.
    Dirichlet2d { length: f64 },
    /// As [`Transform::Dirichlet2d`] plus `T = x₂/3L + x₂(3L − x₂) ṽ₃`.
    Thermo2d { length: f64 },
}

impl Transform {
    pub fn dim(&self) -> usize {
        match self {
            Transform::Dirichlet1d | Transform::Neumann1d | Transform::Thermo1d => 1,
            _ => 2,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            Transform::Dirichlet1d | Transform::Neumann1d => 1,
            Transform::Thermo1d | Transform::Kirsch | Transform::Neumann2d | Transform::Dirichlet2d { .. } => 2,
            Transform::Thermo2d { .. } => 3,
        }
    }

    /// Boundary groups on which some component is pinned by the transform.
    pub fn pinned_groups(&self) -> &'static [&'static str] {
        match self {
            Transform::Dirichlet1d | Transform::Thermo1d => &["left", "right"],
            Transform::Neumann1d => &["left"],
            Transform::Kirsch => &["left", "bottom"],
            Transform::Neumann2d => &["bottom"],
            Transform::Dirichlet2d { .. } | Transform::Thermo2d { .. } => &["bottom", "top"],
        }
    }

    pub fn envelope(&self, component: usize, x: [f64; 2]) -> Envelope {
        let [x1, x2] = x;
        let pinned_both_ends = Envelope {
            offset: x1,
            offset_grad: [1.0, 0.0],
            scale: x1 * (1.0 - x1),
            scale_grad: [1.0 - 2.0 * x1, 0.0],
        };
        let top_ramp = |length: f64| {
            let h = 3.0 * length;
            Envelope {
                offset: x2 / h,
                offset_grad: [0.0, 1.0 / h],
                scale: x2 * (h - x2),
                scale_grad: [0.0, h - 2.0 * x2],
            }
        };
        match (self, component) {
            (Transform::Dirichlet1d, 0) | (Transform::Thermo1d, 0 | 1) => pinned_both_ends,
            (Transform::Neumann1d, 0) => Envelope::scaled(x1, [1.0, 0.0]),
            (Transform::Kirsch, 0) => Envelope::scaled(x1, [1.0, 0.0]),
            (Transform::Kirsch, 1) => Envelope::scaled(x2, [0.0, 1.0]),
            (Transform::Neumann2d, 0 | 1)
            | (Transform::Dirichlet2d { .. }, 0)
            | (Transform::Thermo2d { .. }, 0) => Envelope::scaled(x2, [0.0, 1.0]),
            (Transform::Dirichlet2d { length }, 1) | (Transform::Thermo2d { length }, 1 | 2) => top_ramp(*length),
            _ => panic!("component {component} out of range for {self:?}"),
        }
    }

    /// ũ from raw network outputs at one point.
    pub fn apply(&self, x: [f64; 2], v: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|c| {
                let e = self.envelope(c, x);
                e.offset + e.scale * v[c]
            })
            .collect()
    }

    /// ũ and its spatial gradient on a scalar tape.
    pub fn apply_dual(&self, tape: &mut Tape, x: [f64; 2], v: &[SpatialDual]) -> Vec<SpatialDual> {
        let d = self.dim();
        (0..self.components())
            .map(|c| {
                let e = self.envelope(c, x);
                let vc = &v[c];
                let scale = tape.scalar(e.scale);
                let offset = tape.scalar(e.offset);
                let sv = tape.mul(scale, vc.primal);
                let primal = tape.add(sv, offset);
                let tangents = (0..d)
                    .map(|j| {
                        let db = tape.scalar(e.scale_grad[j]);
                        let l = tape.mul(db, vc.primal);
                        let r = tape.mul(scale, vc.tangents[j]);
                        let s = tape.add(l, r);
                        tape.add_const(s, e.offset_grad[j])
                    })
                    .collect();
                SpatialDual { primal, tangents }
            })
            .collect()
    }
}

/// One network feeding a contiguous run of field components.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldNet {
    pub config: MlpConfig,
    pub params: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel {
    pub nets: Vec<FieldNet>,
    pub transform: Transform,
}

/// Field components and their gradients as graph nodes, each `1 × n`.
#[derive(Debug, Clone)]
pub struct FieldNodes {
    pub values: Vec<Node>,
    /// `grads[c][j]` = ∂ũ_c/∂x_j
    pub grads: Vec<Vec<Node>>,
    /// Hidden activations of every network, in network order.
    pub hidden: Vec<Vec<Node>>,
    pub n: usize,
}

/// Plain field values and gradients at a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValues {
    /// `components × n`
    pub values: Array2<f64>,
    /// `grads[j]` is `components × n`, derivative along x_j.
    pub grads: Vec<Array2<f64>>,
}

impl FieldModel {
    pub fn new(configs: Vec<MlpConfig>, transform: Transform) -> Result<Self> {
        let nets = configs
            .into_iter()
            .map(|config| {
                let params = init_params(&config)?;
                Ok(FieldNet { config, params })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = Self { nets, transform };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let outputs: usize = self.nets.iter().map(|n| n.config.output_dim).sum();
        if outputs != self.transform.components() {
            return Err(Error::Config(format!(
                "networks produce {outputs} outputs, transform needs {}",
                self.transform.components()
            )));
        }
        for net in &self.nets {
            if net.config.input_dim != self.transform.dim() {
                return Err(Error::Config(format!(
                    "network input {} does not match domain dimension {}",
                    net.config.input_dim,
                    self.transform.dim()
                )));
            }
            net.params.check_shapes(&net.config)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.transform.dim()
    }

    pub fn components(&self) -> usize {
        self.transform.components()
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(|n| n.params.param_count()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.params.flatten()).collect()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut start = 0;
        for net in &mut self.nets {
            let k = net.params.param_count();
            net.params.assign_flat(&flat[start..start + k])?;
            start += k;
        }
        Ok(())
    }

    /// Raw network outputs ṽ at one point.
    pub fn raw_value(&self, x: [f64; 2]) -> Vec<f64> {
        let input = &x[..self.dim()];
        self.nets
            .iter()
            .flat_map(|n| n.params.forward_value(n.config.activation, input))
            .collect()
    }

    /// ũ at one point without derivatives.
    pub fn value_at(&self, x: [f64; 2]) -> Vec<f64> {
        self.transform.apply(x, &self.raw_value(x))
    }

    /// ũ with spatial gradients on a scalar tape, parameters as leaves.
    pub fn dual_at(&self, tape: &mut Tape, x: [f64; 2]) -> Result<Vec<SpatialDual>> {
        let xd = crate::autodiff::dual_lift(tape, &x[..self.dim()]);
        let mut raw = Vec::with_capacity(self.components());
        for net in &self.nets {
            let tp = net.params.on_tape(tape);
            raw.extend(network::forward(tape, &tp, net.config.activation, &xd)?);
        }
        Ok(self.transform.apply_dual(tape, x, &raw))
    }

    /// Registers every network's parameters on the graph.
    pub fn register(&self, graph: &mut Graph) -> Vec<GraphParams> {
        self.nets.iter().map(|n| n.params.on_graph(graph)).collect()
    }

    /// Records ũ and ∇ũ at `points` on the graph.
    pub fn build(&self, graph: &mut Graph, params: &[GraphParams], points: &[[f64; 2]]) -> FieldNodes {
        let d = self.dim();
        let n = points.len();
        let x = graph.constant(network::lift_batch(points, d));
        let mut values = Vec::with_capacity(self.components());
        let mut grads = Vec::with_capacity(self.components());
        let mut hidden = Vec::with_capacity(self.nets.len());
        let mut comp = 0;
        for (net, gp) in self.nets.iter().zip(params) {
            let (out, h) = network::forward_batch_traced(graph, gp, net.config.activation, x, n);
            hidden.push(h);
            for row in 0..net.config.output_dim {
                let env: Vec<Envelope> = points.iter().map(|&p| self.transform.envelope(comp, p)).collect();
                let row_of = |f: &dyn Fn(&Envelope) -> f64| Array2::from_shape_fn((1, n), |(_, i)| f(&env[i]));
                let vp = graph.slice(out, row, 0, n);
                let bv = graph.mul_const(vp, row_of(&|e| e.scale));
                let value = graph.add_const(bv, &row_of(&|e| e.offset));
                let mut g = Vec::with_capacity(d);
                for j in 0..d {
                    let vt = graph.slice(out, row, (1 + j) * n, n);
                    let l = graph.mul_const(vp, row_of(&|e| e.scale_grad[j]));
                    let r = graph.mul_const(vt, row_of(&|e| e.scale));
                    let s = graph.add(l, r);
                    g.push(graph.add_const(s, &row_of(&|e| e.offset_grad[j])));
                }
                values.push(value);
                grads.push(g);
                comp += 1;
            }
        }
        FieldNodes {
            values,
            grads,
            hidden,
            n,
        }
    }

    /// Evaluates ũ and ∇ũ at many points in one batched pass.
    pub fn evaluate(&self, points: &[[f64; 2]]) -> FieldValues {
        let mut graph = Graph::new();
        let params: Vec<GraphParams> = self
            .nets
            .iter()
            .map(|n| {
                let layers = n
                    .params
                    .layers
                    .iter()
                    .map(|l| {
                        let w = graph.constant(l.weight.clone());
                        let b = graph.constant(l.bias.clone().insert_axis(ndarray::Axis(1)));
                        (w, b)
                    })
                    .collect();
                GraphParams { layers }
            })
            .collect();
        let nodes = self.build(&mut graph, &params, points);
        let n = points.len();
        let stack = |rows: Vec<&Array2<f64>>| {
            let mut out = Array2::zeros((rows.len(), n));
            for (c, r) in rows.into_iter().enumerate() {
                out.row_mut(c).assign(&r.row(0));
            }
            out
        };
        let values = stack(nodes.values.iter().map(|&v| graph.value(v)).collect());
        let grads = (0..self.dim())
            .map(|j| stack(nodes.grads.iter().map(|g| graph.value(g[j])).collect()))
            .collect();
        FieldValues { values, grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn one_dimensional_pins() {
        let t = Transform::Dirichlet1d;
        assert_eq!(t.apply([0.0, 0.0], &[3.7]), vec![0.0]);
        assert_eq!(t.apply([1.0, 0.0], &[-9.1]), vec![1.0]);
        assert_eq!(t.apply([0.5, 0.0], &[2.0]), vec![1.0]);

        let t = Transform::Neumann1d;
        assert_eq!(t.apply([0.0, 0.0], &[5.0]), vec![0.0]);
        assert_eq!(t.apply([1.0, 0.0], &[1.5]), vec![1.5]);

        let t = Transform::Thermo1d;
        assert_eq!(t.apply([0.0, 0.0], &[2.0, -3.0]), vec![0.0, 0.0]);
        assert_eq!(t.apply([1.0, 0.0], &[2.0, -3.0]), vec![1.0, 1.0]);
        assert_eq!(t.apply([0.5, 0.0], &[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn two_dimensional_pins() {
        let t = Transform::Kirsch;
        assert_eq!(t.apply([0.0, 0.3], &[4.0, 1.0])[0], 0.0);
        assert_eq!(t.apply([0.3, 0.0], &[4.0, 1.0])[1], 0.0);
        let u = t.apply([0.2, 0.4], &[1.0, 2.0]);
        assert!(close(u[0], 0.2) && close(u[1], 0.8));

        let t = Transform::Neumann2d;
        assert_eq!(t.apply([0.4, 0.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(t.apply([0.1, 1.0], &[0.5, -0.2]), vec![0.5, -0.2]);
        assert_eq!(t.apply([0.1, 3.0], &[0.5, -0.2])[1], 3.0 * -0.2);

        let t = Transform::Dirichlet2d { length: 1.0 };
        assert_eq!(t.apply([0.7, 0.0], &[1.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(t.apply([0.7, 3.0], &[1.0, 2.0])[1], 1.0);
        assert_eq!(t.apply([0.5, 1.5], &[0.0, 0.0]), vec![0.0, 0.5]);

        let t = Transform::Thermo2d { length: 1.0 };
        assert_eq!(t.apply([0.2, 0.0], &[1.0, 2.0, 3.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(t.apply([0.2, 3.0], &[1.0, 2.0, 3.0]), vec![3.0, 1.0, 1.0]);
        assert_eq!(t.apply([0.2, 1.5], &[0.0, 0.0, 0.0]), vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn neumann_slope_at_pinned_end_is_raw_output() {
        // ∂(x ṽ)/∂x at 0 equals ṽ(0)
        let cfg = MlpConfig::new(1, &[5, 5], 1, Activation::Tanh).with_seed(4);
        let model = FieldModel::new(vec![cfg], Transform::Neumann1d).unwrap();
        let mut tape = Tape::new();
        let u = model.dual_at(&mut tape, [0.0, 0.0]).unwrap();
        let v0 = model.raw_value([0.0, 0.0])[0];
        assert!((u[0].gradient(&tape)[0] - v0).abs() < 1e-15);
    }

    #[test]
    fn pinned_boundaries_leave_slope_free() {
        // a transform like x² + x²(1 − x²)ṽ would force ũ′(0) = 0; ours must not
        let cfg = MlpConfig::new(1, &[5, 5], 1, Activation::Tanh).with_seed(9);
        let model = FieldModel::new(vec![cfg], Transform::Dirichlet1d).unwrap();
        let g = model.evaluate(&[[0.0, 0.0], [1.0, 0.0]]).grads[0].clone();
        assert!(g[[0, 0]].abs() > 1e-3 && g[[0, 1]].abs() > 1e-3);

        let forbidden = |x: f64, v: f64| x * x + x * x * (1.0 - x * x) * v;
        let h = 1e-7;
        assert!(((forbidden(h, 0.8) - forbidden(0.0, 0.8)) / h).abs() < 1e-6);
    }

    #[test]
    fn batched_and_scalar_evaluation_agree() {
        let cfgs = vec![
            MlpConfig::new(2, &[6, 5], 2, Activation::Tanh2).with_seed(2),
            MlpConfig::new(2, &[4], 1, Activation::Tanh2).with_seed(3),
        ];
        let model = FieldModel::new(cfgs, Transform::Thermo2d { length: 1.0 }).unwrap();
        let pts = [[0.2, 0.5], [0.9, 2.4], [0.5, 3.0]];
        let batch = model.evaluate(&pts);
        for (i, &p) in pts.iter().enumerate() {
            let mut tape = Tape::new();
            let u = model.dual_at(&mut tape, p).unwrap();
            for c in 0..3 {
                assert!((batch.values[[c, i]] - u[c].value(&tape)).abs() < 1e-13);
                for j in 0..2 {
                    assert!((batch.grads[j][[c, i]] - u[c].gradient(&tape)[j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn mismatched_outputs_rejected() {
        let cfg = MlpConfig::new(2, &[4], 1, Activation::Tanh2);
        assert!(FieldModel::new(vec![cfg], Transform::Kirsch).is_err());
    }
}
