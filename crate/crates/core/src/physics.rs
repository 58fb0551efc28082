//! Small-strain thermo-elasticity: strains, plane-stress stiffness and the
//! pointwise energy densities whose integrals make up the loss.
//!
//! 2D tensors use Voigt order `(11, 22, 12)` with *tensor* shear strain, so
//! `σ₁₂ = E/(1+ν) ε₁₂ = 2G ε₁₂` and `ε:σ = ε₁₁σ₁₁ + ε₂₂σ₂₂ + 2ε₁₂σ₁₂`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A material property that is either uniform or graded as `base / (1 + x_axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform { value: f64 },
    InverseLinear { base: f64, axis: usize },
}

impl Grading {
    pub fn at(&self, x: [f64; 2]) -> f64 {
        match *self {
            Grading::Uniform { value } => value,
            Grading::InverseLinear { base, axis } => base / (1.0 + x[axis]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub modulus: Grading,
    pub conductivity: Grading,
    pub poisson: f64,
    pub expansion: f64,
    pub reference_temperature: f64,
}

impl MaterialModel {
    pub fn elastic(modulus: Grading, poisson: f64) -> Self {
        Self {
            modulus,
            conductivity: Grading::Uniform { value: 1.0 },
            poisson,
            expansion: 0.0,
            reference_temperature: 0.0,
        }
    }

    pub fn validate(&self, probes: &[[f64; 2]]) -> Result<()> {
        if !(self.poisson > -1.0 && self.poisson < 0.5) {
            return Err(Error::Config(format!("Poisson ratio {} outside (-1, 0.5)", self.poisson)));
        }
        for &p in probes {
            if self.modulus.at(p) <= 0.0 || self.conductivity.at(p) <= 0.0 {
                return Err(Error::Config(format!("non-positive modulus or conductivity at {p:?}")));
            }
        }
        Ok(())
    }

    pub fn e(&self, x: [f64; 2]) -> f64 {
        self.modulus.at(x)
    }

    pub fn k(&self, x: [f64; 2]) -> f64 {
        self.conductivity.at(x)
    }

    pub fn thermal_strain(&self, temperature: f64) -> f64 {
        self.expansion * (temperature - self.reference_temperature)
    }
}

/// Symmetric 2D tensor in Voigt order `(11, 22, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Voigt(pub [f64; 3]);

impl Voigt {
    pub fn xx(&self) -> f64 {
        self.0[0]
    }
    pub fn yy(&self) -> f64 {
        self.0[1]
    }
    pub fn xy(&self) -> f64 {
        self.0[2]
    }

    pub fn scaled(&self, c: f64) -> Voigt {
        Voigt(self.0.map(|v| v * c))
    }
}

pub type Stiffness = [[f64; 3]; 3];

/// `grad_u[i][j] = ∂u_i/∂x_j`.
pub fn small_strain(grad_u: [[f64; 2]; 2]) -> Voigt {
    Voigt([grad_u[0][0], grad_u[1][1], 0.5 * (grad_u[0][1] + grad_u[1][0])])
}

/// Removes the isotropic thermal strain from the normal components.
pub fn elastic_strain(total: Voigt, temperature: f64, material: &MaterialModel) -> Voigt {
    let th = material.thermal_strain(temperature);
    Voigt([total.0[0] - th, total.0[1] - th, total.0[2]])
}

pub fn elastic_strain_1d(total: f64, temperature: f64, material: &MaterialModel) -> f64 {
    total - material.thermal_strain(temperature)
}

pub fn plane_stress_c(e: f64, nu: f64) -> Result<Stiffness> {
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::Config(format!("Poisson ratio {nu} outside (-1, 0.5)")));
    }
    let d = e / (1.0 - nu * nu);
    Ok([[d, nu * d, 0.0], [nu * d, d, 0.0], [0.0, 0.0, e / (1.0 + nu)]])
}

pub fn stress(elastic: Voigt, c: &Stiffness) -> Voigt {
    let e = elastic.0;
    Voigt(std::array::from_fn(|i| c[i][0] * e[0] + c[i][1] * e[1] + c[i][2] * e[2]))
}

pub fn stress_1d(elastic: f64, e: f64) -> f64 {
    e * elastic
}

/// `½ ε:C:ε`.
pub fn strain_energy_density(elastic: Voigt, c: &Stiffness) -> f64 {
    let s = stress(elastic, c);
    0.5 * (elastic.0[0] * s.0[0] + elastic.0[1] * s.0[1] + 2.0 * elastic.0[2] * s.0[2])
}

pub fn strain_energy_density_1d(elastic: f64, e: f64) -> f64 {
    0.5 * e * elastic * elastic
}

/// `½ k ∇T·∇T`.
pub fn thermal_energy_density(grad_t: &[f64], k: f64) -> f64 {
    0.5 * k * grad_t.iter().map(|g| g * g).sum::<f64>()
}

/// Full kinematic and constitutive state at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub grad_u: [[f64; 2]; 2],
    pub temperature: f64,
    pub grad_t: [f64; 2],
    pub strain: Voigt,
    pub elastic_strain: Voigt,
    pub stress: Voigt,
}

impl PointState {
    /// 2D plane stress state.
    pub fn plane(
        x: [f64; 2],
        grad_u: [[f64; 2]; 2],
        temperature: f64,
        grad_t: [f64; 2],
        material: &MaterialModel,
    ) -> Result<Self> {
        let strain = small_strain(grad_u);
        let elastic = elastic_strain(strain, temperature, material);
        let c = plane_stress_c(material.e(x), material.poisson)?;
        Ok(Self {
            grad_u,
            temperature,
            grad_t,
            strain,
            elastic_strain: elastic,
            stress: stress(elastic, &c),
        })
    }

    /// Uniaxial bar; only the 11 components are populated.
    pub fn bar(x: f64, du: f64, temperature: f64, dt: f64, material: &MaterialModel) -> Self {
        let el = elastic_strain_1d(du, temperature, material);
        Self {
            grad_u: [[du, 0.0], [0.0, 0.0]],
            temperature,
            grad_t: [dt, 0.0],
            strain: Voigt([du, 0.0, 0.0]),
            elastic_strain: Voigt([el, 0.0, 0.0]),
            stress: Voigt([stress_1d(el, material.e([x, 0.0])), 0.0, 0.0]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thermo() -> MaterialModel {
        MaterialModel {
            modulus: Grading::Uniform { value: 1.0 },
            conductivity: Grading::Uniform { value: 1.0 },
            poisson: 0.3,
            expansion: 1.0,
            reference_temperature: 0.0,
        }
    }

    #[test]
    fn strain_examples() {
        assert_eq!(small_strain([[0.1, 0.0], [0.0, 0.2]]), Voigt([0.1, 0.2, 0.0]));
        assert_eq!(small_strain([[0.0, 0.4], [0.0, 0.0]]).xy(), 0.2);
        assert_eq!(small_strain([[0.0, 0.3], [-0.3, 0.0]]), Voigt([0.0, 0.0, 0.0]));
    }

    #[test]
    fn thermal_strain_examples() {
        let mut m = thermo();
        let eps = Voigt([0.1, -0.2, 0.05]);
        m.expansion = 0.0;
        assert_eq!(elastic_strain(eps, 3.0, &m), eps);
        m.expansion = 1.0;
        assert_eq!(elastic_strain(Voigt::default(), 0.5, &m), Voigt([-0.5, -0.5, 0.0]));

        // exact 1D coupled fields: u' − T = 10(1 + x)/27
        for &x in &[0.0, 0.3, 0.8, 1.0] {
            let du = x * x / 3.0 + 28.0 * x / 27.0 + 10.0 / 27.0;
            let t = (2.0 * x + x * x) / 3.0;
            let el = elastic_strain_1d(du, t, &m);
            assert!((el - 10.0 * (1.0 + x) / 27.0).abs() < 1e-15);
        }
    }

    #[test]
    fn stiffness_examples() {
        assert_eq!(plane_stress_c(1.0, 0.0).unwrap(), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let c = plane_stress_c(1.0, 0.3).unwrap();
        assert!((c[0][0] - 1.098_901_1).abs() < 1e-6);
        assert!((c[0][1] - 0.329_670_3).abs() < 1e-6);
        assert!((c[2][2] - 0.769_230_8).abs() < 1e-6);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(c[i][j], c[j][i]);
            }
        }
        assert!(plane_stress_c(1.0, 0.5).is_err());
        assert!(plane_stress_c(1.0, -1.0).is_err());
    }

    #[test]
    fn energy_examples() {
        let c = plane_stress_c(1.0, 0.3).unwrap();
        assert_eq!(strain_energy_density(Voigt::default(), &c), 0.0);
        assert_eq!(strain_energy_density_1d(2.0, 1.0), 2.0);
        assert!((thermal_energy_density(&[0.1, 0.0], 10.0) - 0.05).abs() < 1e-15);
        // pure shear: ½ · 2 ε₁₂ σ₁₂ = E/(1+ν) ε₁₂²
        let w = strain_energy_density(Voigt([0.0, 0.0, 0.1]), &c);
        assert!((w - 0.01 / 1.3).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_exact_stresses() {
        let m = MaterialModel::elastic(Grading::InverseLinear { base: 1.0, axis: 0 }, 0.3);
        let unit = MaterialModel::elastic(Grading::Uniform { value: 1.0 }, 0.3);
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            // u = (x² + 2x)/3
            let s = PointState::bar(x, (2.0 * x + 2.0) / 3.0, 0.0, 0.0, &m).stress.xx();
            assert!((s - 2.0 / 3.0).abs() < 1e-14);
            // u = (2x + x²)/2
            let s = PointState::bar(x, 1.0 + x, 0.0, 0.0, &m).stress.xx();
            assert!((s - 1.0).abs() < 1e-14);
            // u = (4x − x²)/2
            let s = PointState::bar(x, 2.0 - x, 0.0, 0.0, &unit).stress.xx();
            assert!((s - (2.0 - x)).abs() < 1e-14);
        }
    }

    #[test]
    fn material_validation() {
        let mut m = thermo();
        assert!(m.validate(&[[0.0, 0.0]]).is_ok());
        m.poisson = 0.6;
        assert!(m.validate(&[[0.0, 0.0]]).is_err());
        let bad = MaterialModel::elastic(Grading::InverseLinear { base: 1.0, axis: 0 }, 0.3);
        assert!(bad.validate(&[[-1.5, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn rigid_motion_stores_no_energy(theta in -1.0f64..1.0, e in 0.1f64..10.0, nu in -0.9f64..0.49) {
            let c = plane_stress_c(e, nu).unwrap();
            let eps = small_strain([[0.0, theta], [-theta, 0.0]]);
            prop_assert_eq!(strain_energy_density(eps, &c), 0.0);
        }

        #[test]
        fn stress_is_linear_in_displacement_gradient(
            g in proptest::array::uniform4(-1.0f64..1.0),
            scale in -3.0f64..3.0,
        ) {
            let c = plane_stress_c(2.0, 0.25).unwrap();
            let grad = [[g[0], g[1]], [g[2], g[3]]];
            let s1 = stress(small_strain(grad), &c);
            let scaled = [[scale * g[0], scale * g[1]], [scale * g[2], scale * g[3]]];
            let s2 = stress(small_strain(scaled), &c);
            for i in 0..3 {
                prop_assert!((s2.0[i] - scale * s1.0[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn strain_energy_is_non_negative(e3 in proptest::array::uniform3(-1.0f64..1.0), nu in -0.9f64..0.49) {
            let c = plane_stress_c(1.0, nu).unwrap();
            prop_assert!(strain_energy_density(Voigt(e3), &c) >= -1e-15);
        }
    }
}
