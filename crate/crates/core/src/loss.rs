//! Discrete energy functionals: weighted nodal sums of the internal energy
//! density minus the work of body forces and boundary tractions.
//!
//! Dirichlet data is carried by the field transform, so pinned boundaries
//! never contribute a work term here.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Node};
use crate::error::{Error, Result};
use crate::fields::{FieldModel, FieldNodes, FieldValues};
use crate::network::GraphParams;
use crate::physics::{
    elastic_strain, elastic_strain_1d, plane_stress_c, small_strain, strain_energy_density,
    strain_energy_density_1d, thermal_energy_density, MaterialModel,
};
use crate::problems::ProblemCode;
use crate::reference::analytic::Kirsch;
use crate::sampling::{BoundaryNode, NodeSet};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub elastic: f64,
    pub thermal: f64,
    pub external: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(elastic: f64, thermal: f64, external: f64) -> Self {
        Self {
            elastic,
            thermal,
            external,
            total: elastic + thermal - external,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.elastic.is_finite() && self.thermal.is_finite() && self.external.is_finite() && self.total.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Traction {
    Constant { value: [f64; 2] },
    /// `σ·n` of the infinite-plate hole solution.
    Kirsch { far_stress: f64, radius: f64 },
}

impl Traction {
    pub fn at(&self, node: &BoundaryNode, material: &MaterialModel) -> Result<[f64; 2]> {
        match *self {
            Traction::Constant { value } => Ok(value),
            Traction::Kirsch { far_stress, radius } => Kirsch {
                far_stress,
                radius,
                modulus: material.e(node.x),
                poisson: material.poisson,
            }
            .traction(node.x, node.normal),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractionLoad {
    pub group: String,
    pub traction: Traction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<[f64; 2]>,
    #[serde(default)]
    pub tractions: Vec<TractionLoad>,
}

impl LoadSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn traction(group: &str, value: [f64; 2]) -> TractionLoad {
        TractionLoad {
            group: group.into(),
            traction: Traction::Constant { value },
        }
    }

    /// Every traction group must exist and must not be pinned by `field`.
    pub fn validate(&self, nodes: &NodeSet, field: &FieldModel) -> Result<()> {
        let pinned = field.transform.pinned_groups();
        for t in &self.tractions {
            nodes.boundary(&t.group)?;
            if pinned.contains(&t.group.as_str()) {
                return Err(Error::Config(format!(
                    "traction on `{}` conflicts with the Dirichlet data embedded there",
                    t.group
                )));
            }
        }
        Ok(())
    }
}

/// Graph nodes for one loss evaluation.
#[derive(Debug, Clone)]
pub struct LossNodes {
    pub elastic: Node,
    pub thermal: Node,
    pub external: Node,
    pub total: Node,
    pub fields: FieldNodes,
}

impl LossNodes {
    pub fn breakdown(&self, graph: &Graph) -> LossBreakdown {
        LossBreakdown {
            elastic: graph.scalar(self.elastic),
            thermal: graph.scalar(self.thermal),
            external: graph.scalar(self.external),
            total: graph.scalar(self.total),
        }
    }
}

fn check(code: ProblemCode, field: &FieldModel, nodes: &NodeSet, loads: &LoadSpec) -> Result<()> {
    if field.dim() != code.dim() || nodes.dim != code.dim() {
        return Err(Error::Config(format!(
            "{code} is {}D but field is {}D and nodes are {}D",
            code.dim(),
            field.dim(),
            nodes.dim
        )));
    }
    let want = code.dim() + usize::from(code.is_thermal());
    if field.components() != want {
        return Err(Error::Config(format!(
            "{code} needs {want} field components, field has {}",
            field.components()
        )));
    }
    loads.validate(nodes, field)
}

/// Interior points followed by every traction group's points, with the
/// start of each group.
fn gather(nodes: &NodeSet, loads: &LoadSpec) -> Result<(Vec<[f64; 2]>, Vec<usize>)> {
    let mut points = nodes.points.clone();
    let mut starts = Vec::with_capacity(loads.tractions.len());
    for t in &loads.tractions {
        starts.push(points.len());
        points.extend(nodes.boundary(&t.group)?.points());
    }
    Ok((points, starts))
}

fn row(values: impl Iterator<Item = f64>) -> Array2<f64> {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    Array2::from_shape_vec((1, n), v).expect("row shape")
}

/// Records the loss of `field` on the graph with `params` as leaves.
pub fn assemble_loss(
    graph: &mut Graph,
    code: ProblemCode,
    field: &FieldModel,
    params: &[GraphParams],
    nodes: &NodeSet,
    material: &MaterialModel,
    loads: &LoadSpec,
) -> Result<LossNodes> {
    check(code, field, nodes, loads)?;
    let (points, starts) = gather(nodes, loads)?;
    let fields = field.build(graph, params, &points);
    let n = nodes.len();
    let d = code.dim();
    let inner = |graph: &mut Graph, node: Node| graph.slice(node, 0, 0, n);
    let u: Vec<Node> = (0..d).map(|c| inner(graph, fields.values[c])).collect();
    let grad_u: Vec<Vec<Node>> = (0..d)
        .map(|c| (0..d).map(|j| inner(graph, fields.grads[c][j])).collect())
        .collect();
    let w = &nodes.weights;
    let xs = &nodes.points;

    // thermal strain α(T − T₀), subtracted from the normal strains
    let thermal_strain = if code.is_thermal() {
        let t = inner(graph, fields.values[d]);
        let at = graph.scale(t, material.expansion);
        let shift = Array2::from_elem((1, n), -material.expansion * material.reference_temperature);
        Some(graph.add_const(at, &shift))
    } else {
        None
    };
    let minus_thermal = |graph: &mut Graph, e: Node| match thermal_strain {
        Some(th) => graph.sub(e, th),
        None => e,
    };

    let elastic = if d == 1 {
        let e = minus_thermal(graph, grad_u[0][0]);
        let e2 = graph.mul(e, e);
        let we = graph.mul_const(e2, row((0..n).map(|i| 0.5 * w[i] * material.e(xs[i]))));
        graph.sum(we)
    } else {
        let nu = material.poisson;
        let e11 = minus_thermal(graph, grad_u[0][0]);
        let e22 = minus_thermal(graph, grad_u[1][1]);
        let shear = graph.add(grad_u[0][1], grad_u[1][0]);
        let e12 = graph.scale(shear, 0.5);
        let dn = |i: usize| material.e(xs[i]) / (1.0 - nu * nu);
        let a = row((0..n).map(|i| 0.5 * w[i] * dn(i)));
        let b = row((0..n).map(|i| w[i] * nu * dn(i)));
        let c = row((0..n).map(|i| w[i] * material.e(xs[i]) / (1.0 + nu)));
        let s11 = graph.mul(e11, e11);
        let s22 = graph.mul(e22, e22);
        let s1122 = graph.mul(e11, e22);
        let s12 = graph.mul(e12, e12);
        let t1 = graph.mul_const(s11, a.clone());
        let t2 = graph.mul_const(s22, a);
        let t3 = graph.mul_const(s1122, b);
        let t4 = graph.mul_const(s12, c);
        let s = graph.add(t1, t2);
        let s = graph.add(s, t3);
        let s = graph.add(s, t4);
        graph.sum(s)
    };

    let thermal = if code.is_thermal() {
        let coef = row((0..n).map(|i| 0.5 * w[i] * material.k(xs[i])));
        let mut acc: Option<Node> = None;
        for j in 0..d {
            let g = inner(graph, fields.grads[d][j]);
            let g2 = graph.mul(g, g);
            acc = Some(match acc {
                Some(a) => graph.add(a, g2),
                None => g2,
            });
        }
        let weighted = graph.mul_const(acc.expect("d >= 1"), coef);
        graph.sum(weighted)
    } else {
        graph.constant(Array2::zeros((1, 1)))
    };

    let mut work = Vec::new();
    if let Some(f) = loads.body_force {
        for c in 0..d {
            if f[c] != 0.0 {
                let wf = graph.mul_const(u[c], row((0..n).map(|i| w[i] * f[c])));
                work.push(graph.sum(wf));
            }
        }
    }
    for (load, &start) in loads.tractions.iter().zip(&starts) {
        let group = nodes.boundary(&load.group)?;
        let t: Vec<[f64; 2]> = group
            .nodes
            .iter()
            .map(|b| load.traction.at(b, material))
            .collect::<Result<_>>()?;
        let len = group.nodes.len();
        for c in 0..d {
            let uc = graph.slice(fields.values[c], 0, start, len);
            let wt = graph.mul_const(uc, row(group.nodes.iter().zip(&t).map(|(b, t)| b.weight * t[c])));
            work.push(graph.sum(wt));
        }
    }
    let external = if work.is_empty() {
        graph.constant(Array2::zeros((1, 1)))
    } else {
        graph.sum_scalars(&work)
    };

    let internal = graph.add(elastic, thermal);
    let total = graph.sub(internal, external);
    Ok(LossNodes {
        elastic,
        thermal,
        external,
        total,
        fields,
    })
}

/// Loss value and its gradient in [`FieldModel::flatten`] order.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub breakdown: LossBreakdown,
    pub gradient: Vec<f64>,
    /// Primal hidden activations per network and layer, `width × nodes`,
    /// when requested.
    pub hidden: Vec<Vec<Array2<f64>>>,
}

pub fn loss_and_gradient(
    code: ProblemCode,
    field: &FieldModel,
    nodes: &NodeSet,
    material: &MaterialModel,
    loads: &LoadSpec,
    keep_hidden: bool,
) -> Result<LossGradient> {
    let mut graph = Graph::new();
    let params = field.register(&mut graph);
    let loss = assemble_loss(&mut graph, code, field, &params, nodes, material, loads)?;
    let breakdown = loss.breakdown(&graph);
    let mut adj = graph.backward(loss.total);
    let mut gradient = Vec::with_capacity(field.param_count());
    for gp in &params {
        for &(wn, bn) in &gp.layers {
            for node in [wn, bn] {
                match adj.take(node) {
                    Some(g) => gradient.extend(g.iter().copied()),
                    None => gradient.extend(std::iter::repeat_n(0.0, graph.value(node).len())),
                }
            }
        }
    }
    let hidden = if keep_hidden {
        let n = loss.fields.n;
        loss.fields
            .hidden
            .iter()
            .map(|layers| {
                layers
                    .iter()
                    .map(|&h| graph.value(h).slice(ndarray::s![.., 0..nodes.len().min(n)]).to_owned())
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(LossGradient {
        breakdown,
        gradient,
        hidden,
    })
}

pub fn evaluate_loss(
    code: ProblemCode,
    field: &FieldModel,
    nodes: &NodeSet,
    material: &MaterialModel,
    loads: &LoadSpec,
) -> Result<LossBreakdown> {
    let mut graph = Graph::new();
    let params = field.register(&mut graph);
    let loss = assemble_loss(&mut graph, code, field, &params, nodes, material, loads)?;
    Ok(loss.breakdown(&graph))
}

/// The same functional for arbitrary fields, evaluated pointwise with the
/// constitutive routines. `sample` returns values and gradients at a batch
/// of points in the layout of [`FieldModel::evaluate`].
pub fn energy<F>(
    code: ProblemCode,
    nodes: &NodeSet,
    material: &MaterialModel,
    loads: &LoadSpec,
    sample: F,
) -> Result<LossBreakdown>
where
    F: Fn(&[[f64; 2]]) -> Result<FieldValues>,
{
    let d = code.dim();
    let thermo = code.is_thermal();
    let f = sample(&nodes.points)?;
    let want = d + usize::from(thermo);
    if f.values.nrows() != want || f.values.ncols() != nodes.len() {
        return Err(Error::Shape(format!(
            "sample returned {:?}, expected {want} x {}",
            f.values.dim(),
            nodes.len()
        )));
    }
    let (mut elastic, mut thermal, mut external) = (0.0, 0.0, 0.0);
    for (i, (&x, &w)) in nodes.points.iter().zip(&nodes.weights).enumerate() {
        let temp = if thermo { f.values[[d, i]] } else { material.reference_temperature };
        if d == 1 {
            let el = elastic_strain_1d(f.grads[0][[0, i]], temp, material);
            elastic += w * strain_energy_density_1d(el, material.e(x));
        } else {
            let g = [[f.grads[0][[0, i]], f.grads[1][[0, i]]], [f.grads[0][[1, i]], f.grads[1][[1, i]]]];
            let el = elastic_strain(small_strain(g), temp, material);
            elastic += w * strain_energy_density(el, &plane_stress_c(material.e(x), material.poisson)?);
        }
        if thermo {
            let gt: Vec<f64> = (0..d).map(|j| f.grads[j][[d, i]]).collect();
            thermal += w * thermal_energy_density(&gt, material.k(x));
        }
        if let Some(b) = loads.body_force {
            external += w * (0..d).map(|c| b[c] * f.values[[c, i]]).sum::<f64>();
        }
    }
    for load in &loads.tractions {
        let group = nodes.boundary(&load.group)?;
        let fb = sample(&group.points())?;
        for (k, b) in group.nodes.iter().enumerate() {
            let t = load.traction.at(b, material)?;
            external += b.weight * (0..d).map(|c| t[c] * fb.values[[c, k]]).sum::<f64>();
        }
    }
    Ok(LossBreakdown::new(elastic, thermal, external))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::fields::Transform;
    use crate::network::MlpConfig;
    use crate::physics::Grading;
    use crate::reference::analytic::analytic_1d;
    use crate::sampling::{uniform_1d, uniform_grid_2d};

    fn graded() -> MaterialModel {
        MaterialModel::elastic(Grading::InverseLinear { base: 1.0, axis: 0 }, 0.3)
    }

    fn thermo_bar() -> MaterialModel {
        MaterialModel {
            conductivity: Grading::InverseLinear { base: 10.0, axis: 0 },
            expansion: 1.0,
            ..graded()
        }
    }

    /// Closed-form bar fields in the layout returned by `FieldModel::evaluate`.
    fn exact_bar(code: ProblemCode) -> impl Fn(&[[f64; 2]]) -> Result<FieldValues> {
        move |pts| {
            let comps = 1 + usize::from(code.is_thermal());
            let mut values = Array2::zeros((comps, pts.len()));
            let mut grads = Array2::zeros((comps, pts.len()));
            for (i, p) in pts.iter().enumerate() {
                let b = analytic_1d(code, p[0])?;
                values[[0, i]] = b.u;
                grads[[0, i]] = b.du;
                if let (Some(t), Some(dt)) = (b.temperature, b.dt) {
                    values[[1, i]] = t;
                    grads[[1, i]] = dt;
                }
            }
            Ok(FieldValues {
                values,
                grads: vec![grads],
            })
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exact_bar_energies() {
        let nodes = uniform_1d(200).unwrap();
        let l = energy(ProblemCode::FgmElasDirch1d, &nodes, &graded(), &LoadSpec::none(), exact_bar(ProblemCode::FgmElasDirch1d)).unwrap();
        assert!(rel(l.total, 1.0 / 3.0) < 5e-3, "{l:?}");

        let neu = LoadSpec {
            body_force: None,
            tractions: vec![LoadSpec::traction("right", [1.0, 0.0])],
        };
        let l = energy(ProblemCode::FgmElasNeu1d, &nodes, &graded(), &neu, exact_bar(ProblemCode::FgmElasNeu1d)).unwrap();
        assert!(rel(l.elastic, 0.75) < 1e-3 && rel(l.external, 1.5) < 1e-12);
        assert!(rel(l.total, -0.75) < 5e-3);

        let bf = LoadSpec {
            body_force: Some([1.0, 0.0]),
            tractions: vec![LoadSpec::traction("right", [1.0, 0.0])],
        };
        let unit = MaterialModel::elastic(Grading::Uniform { value: 1.0 }, 0.3);
        let l = energy(ProblemCode::ElasBf1d, &nodes, &unit, &bf, exact_bar(ProblemCode::ElasBf1d)).unwrap();
        assert!(rel(l.elastic, 7.0 / 6.0) < 1e-3);
        assert!(rel(l.external, 5.0 / 6.0 + 1.5) < 1e-3);
        assert!(rel(l.total, -7.0 / 6.0) < 5e-3);

        let l = energy(ProblemCode::FgmThermoElas1d, &nodes, &thermo_bar(), &LoadSpec::none(), exact_bar(ProblemCode::FgmThermoElas1d)).unwrap();
        assert!(rel(l.thermal, 10.0 / 3.0) < 1e-3, "{l:?}");
        assert!(rel(l.elastic, 75.0 / 729.0) < 1e-3, "{l:?}");
    }

    #[test]
    fn uniform_temperature_decouples() {
        let nodes = uniform_1d(40).unwrap();
        let u = |p: &[[f64; 2]]| -> Result<FieldValues> {
            let n = p.len();
            let mut values = Array2::zeros((2, n));
            let mut grads = Array2::zeros((2, n));
            for (i, x) in p.iter().enumerate() {
                values[[0, i]] = x[0] * x[0];
                grads[[0, i]] = 2.0 * x[0];
                values[[1, i]] = 0.0;
            }
            Ok(FieldValues {
                values,
                grads: vec![grads],
            })
        };
        let coupled = energy(ProblemCode::FgmThermoElas1d, &nodes, &thermo_bar(), &LoadSpec::none(), u).unwrap();
        let plain = energy(ProblemCode::FgmElasDirch1d, &nodes, &graded(), &LoadSpec::none(), |p: &[[f64; 2]]| {
            let f = u(p)?;
            Ok(FieldValues {
                values: f.values.slice(ndarray::s![0..1, ..]).to_owned(),
                grads: vec![f.grads[0].slice(ndarray::s![0..1, ..]).to_owned()],
            })
        })
        .unwrap();
        assert_eq!(coupled.elastic, plain.elastic);
        assert_eq!(coupled.thermal, 0.0);
    }

    #[test]
    fn thermal_strain_stores_energy_without_displacement() {
        let nodes = uniform_1d(100).unwrap();
        let f = |p: &[[f64; 2]]| -> Result<FieldValues> {
            let n = p.len();
            let mut values = Array2::zeros((2, n));
            let mut grads = Array2::zeros((2, n));
            for (i, x) in p.iter().enumerate() {
                values[[1, i]] = x[0];
                grads[[1, i]] = 1.0;
            }
            Ok(FieldValues {
                values,
                grads: vec![grads],
            })
        };
        let l = energy(ProblemCode::FgmThermoElas1d, &nodes, &thermo_bar(), &LoadSpec::none(), f).unwrap();
        // ∫ ½ x² / (1 + x) dx
        let exact = 0.5 * (std::f64::consts::LN_2 - 0.5);
        assert!(l.elastic > 0.0 && rel(l.elastic, exact) < 1e-3);
    }

    fn kirsch_like() -> (FieldModel, NodeSet, MaterialModel, LoadSpec) {
        let field = FieldModel::new(
            vec![MlpConfig::new(2, &[6, 6], 2, Activation::Tanh2).with_seed(3)],
            Transform::Neumann2d,
        )
        .unwrap();
        let nodes = uniform_grid_2d(4, 9, 1.0).unwrap();
        let mat = MaterialModel::elastic(Grading::InverseLinear { base: 1.0, axis: 1 }, 0.3);
        let loads = LoadSpec {
            body_force: Some([0.2, -0.1]),
            tractions: vec![LoadSpec::traction("top", [0.3, 1.0]), LoadSpec::traction("right", [0.5, 0.0])],
        };
        (field, nodes, mat, loads)
    }

    #[test]
    fn graph_loss_matches_pointwise_functional() {
        let (field, nodes, mat, loads) = kirsch_like();
        let g = evaluate_loss(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &loads).unwrap();
        let p = energy(ProblemCode::FgmElasNeu2d, &nodes, &mat, &loads, |pts| Ok(field.evaluate(pts))).unwrap();
        for (a, b) in [(g.elastic, p.elastic), (g.external, p.external), (g.total, p.total)] {
            assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{g:?} vs {p:?}");
        }
        assert_eq!(g.total, g.elastic + g.thermal - g.external);

        let thermo = FieldModel::new(
            vec![MlpConfig::new(2, &[5], 3, Activation::Elu2).with_seed(1)],
            Transform::Thermo2d { length: 1.0 },
        )
        .unwrap();
        let tm = MaterialModel {
            conductivity: Grading::InverseLinear { base: 10.0, axis: 1 },
            expansion: 1.0,
            reference_temperature: 0.1,
            ..mat
        };
        let g = evaluate_loss(ProblemCode::FgmThermoElas2d, &thermo, &nodes, &tm, &LoadSpec::none()).unwrap();
        let p = energy(ProblemCode::FgmThermoElas2d, &nodes, &tm, &LoadSpec::none(), |pts| Ok(thermo.evaluate(pts))).unwrap();
        assert!((g.elastic - p.elastic).abs() < 1e-12 * p.elastic);
        assert!((g.thermal - p.thermal).abs() < 1e-12 * p.thermal);
    }

    #[test]
    fn gradient_matches_differences() {
        let (mut field, nodes, mat, loads) = kirsch_like();
        let lg = loss_and_gradient(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &loads, false).unwrap();
        let base = field.flatten();
        assert_eq!(lg.gradient.len(), base.len());
        let h = 1e-6;
        for k in (0..base.len()).step_by(7) {
            let mut p = base.clone();
            p[k] += h;
            field.assign_flat(&p).unwrap();
            let up = evaluate_loss(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &loads).unwrap().total;
            p[k] -= 2.0 * h;
            field.assign_flat(&p).unwrap();
            let dn = evaluate_loss(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &loads).unwrap().total;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - lg.gradient[k]).abs() < 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", lg.gradient[k]);
        }
    }

    #[test]
    fn pinned_traction_and_missing_group_rejected() {
        let (field, nodes, mat, _) = kirsch_like();
        let bad = LoadSpec {
            body_force: None,
            tractions: vec![LoadSpec::traction("bottom", [0.0, 1.0])],
        };
        assert!(matches!(
            evaluate_loss(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &bad),
            Err(Error::Config(_))
        ));
        let missing = LoadSpec {
            body_force: None,
            tractions: vec![LoadSpec::traction("hole", [0.0, 1.0])],
        };
        assert!(matches!(
            evaluate_loss(ProblemCode::FgmElasNeu2d, &field, &nodes, &mat, &missing),
            Err(Error::MissingBoundary(_))
        ));
        assert!(evaluate_loss(ProblemCode::FgmThermoElas2d, &field, &nodes, &mat, &LoadSpec::none()).is_err());
    }
}
