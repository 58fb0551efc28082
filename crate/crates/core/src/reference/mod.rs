//! Ground truth: closed-form solutions and a plane-stress finite element
//! solver for the rectangular plates.

pub mod analytic;
pub mod fem;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Transform;
use crate::loss::Traction;
use crate::physics::{elastic_strain_1d, stress_1d, MaterialModel, Voigt};
use crate::problems::{Oracle, ProblemSpec};
use crate::sampling::NodeSet;

use analytic::{analytic_1d, Kirsch};
use fem::{solve_elastic, solve_thermal, EdgeTractions, FemSolution, RectMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytical,
    FemOracle,
}

/// Primary and secondary fields at one node. Bars fill only the 11 slots and
/// leave `displacement[1]` at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalState {
    pub displacement: [f64; 2],
    pub temperature: Option<f64>,
    pub elastic_strain: Voigt,
    pub stress: Voigt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceField {
    pub points: Vec<[f64; 2]>,
    pub values: Vec<NodalState>,
    pub provenance: Provenance,
}

/// Reference fields at the interior nodes of `nodes` from the oracle
/// configured in `spec`.
pub fn reference_field(spec: &ProblemSpec, nodes: &NodeSet) -> Result<ReferenceField> {
    let points = nodes.points.clone();
    let (values, provenance) = match spec.oracle {
        Oracle::Analytic => (
            points
                .iter()
                .map(|&x| bar_state(spec, x))
                .collect::<Result<_>>()?,
            Provenance::Analytical,
        ),
        Oracle::Kirsch { far_stress, radius, .. } => {
            let plate = Kirsch {
                far_stress,
                radius,
                modulus: spec.material.e([radius, 0.0]),
                poisson: spec.material.poisson,
            };
            (
                points
                    .iter()
                    .map(|&x| kirsch_state(&plate, &spec.material, x))
                    .collect::<Result<_>>()?,
                Provenance::Analytical,
            )
        }
        Oracle::Fem { nx, ny } => {
            let sol = fem_solve(spec, nx, ny)?;
            (
                points
                    .iter()
                    .map(|&x| {
                        let s = sol.sample(x);
                        NodalState {
                            displacement: s.displacement,
                            temperature: s.temperature,
                            elastic_strain: s.elastic_strain,
                            stress: s.stress,
                        }
                    })
                    .collect(),
                Provenance::FemOracle,
            )
        }
    };
    Ok(ReferenceField {
        points,
        values,
        provenance,
    })
}

fn bar_state(spec: &ProblemSpec, x: [f64; 2]) -> Result<NodalState> {
    let b = analytic_1d(spec.code, x[0])?;
    let el = elastic_strain_1d(b.du, b.temperature.unwrap_or(spec.material.reference_temperature), &spec.material);
    Ok(NodalState {
        displacement: [b.u, 0.0],
        temperature: b.temperature,
        elastic_strain: Voigt([el, 0.0, 0.0]),
        stress: Voigt([stress_1d(el, spec.material.e(x)), 0.0, 0.0]),
    })
}

fn kirsch_state(plate: &Kirsch, material: &MaterialModel, x: [f64; 2]) -> Result<NodalState> {
    let s = plate.stress(x)?;
    let (e, nu) = (material.e(x), material.poisson);
    Ok(NodalState {
        displacement: plate.displacement(x)?,
        temperature: None,
        elastic_strain: Voigt([
            (s.xx() - nu * s.yy()) / e,
            (s.yy() - nu * s.xx()) / e,
            (1.0 + nu) * s.xy() / e,
        ]),
        stress: s,
    })
}

/// Finite element solution of a rectangular-plate problem on an `nx × ny`
/// mesh. Boundary data come from the transform: a component is prescribed
/// wherever its envelope scale vanishes.
pub fn fem_solve(spec: &ProblemSpec, nx: usize, ny: usize) -> Result<FemSolution> {
    let length = match spec.transform {
        Transform::Neumann2d => crate::problems::PLATE_WIDTH,
        Transform::Dirichlet2d { length } | Transform::Thermo2d { length } => length,
        other => return Err(Error::Config(format!("no finite element model for {other:?}"))),
    };
    let mesh = RectMesh::new(nx, ny, length, 3.0 * length)?;
    let transform = spec.transform;
    let pinned = move |c: usize, x: [f64; 2]| {
        let e = transform.envelope(c, x);
        (e.scale.abs() <= 1e-12 * length * length).then_some(e.offset)
    };
    let temperature = match transform {
        Transform::Thermo2d { .. } => Some(solve_thermal(&mesh, &spec.material.conductivity, &|x| pinned(2, x))?),
        _ => None,
    };
    let mut tractions = EdgeTractions::default();
    for load in &spec.loads.tractions {
        let Traction::Constant { value } = load.traction else {
            return Err(Error::Config(format!("non-constant traction on `{}`", load.group)));
        };
        let slot = match load.group.as_str() {
            "bottom" => &mut tractions.bottom,
            "top" => &mut tractions.top,
            "left" => &mut tractions.left,
            "right" => &mut tractions.right,
            other => return Err(Error::MissingBoundary(other.to_string())),
        };
        *slot = Some(value);
    }
    let elastic = solve_elastic(
        &mesh,
        &spec.material,
        &|x| [pinned(0, x), pinned(1, x)],
        tractions,
        spec.loads.body_force,
        temperature.as_deref(),
    )
    .map_err(|e| match e {
        Error::Singular(m) => Error::Config(format!("insufficient constraints: {m}")),
        e => e,
    })?;
    Ok(FemSolution::new(mesh, elastic, temperature))
}
