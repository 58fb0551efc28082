//! Closed-form solutions: the four bar problems and the infinite plate with a
//! circular hole under uniaxial tension.

use crate::error::{Error, Result};
use crate::physics::Voigt;
use crate::problems::ProblemCode;

/// Bar solution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub u: f64,
    pub du: f64,
    pub temperature: Option<f64>,
    pub dt: Option<f64>,
}

pub fn analytic_1d(code: ProblemCode, x: f64) -> Result<Bar> {
    let mech = |u, du| Bar {
        u,
        du,
        temperature: None,
        dt: None,
    };
    Ok(match code {
        ProblemCode::FgmElasDirch1d => mech((x * x + 2.0 * x) / 3.0, (2.0 * x + 2.0) / 3.0),
        ProblemCode::FgmElasNeu1d => mech((2.0 * x + x * x) / 2.0, 1.0 + x),
        ProblemCode::ElasBf1d => mech((4.0 * x - x * x) / 2.0, 2.0 - x),
        ProblemCode::FgmThermoElas1d => Bar {
            u: x * x * x / 9.0 + 14.0 * x * x / 27.0 + 10.0 * x / 27.0,
            du: x * x / 3.0 + 28.0 * x / 27.0 + 10.0 / 27.0,
            temperature: Some((2.0 * x + x * x) / 3.0),
            dt: Some((2.0 + 2.0 * x) / 3.0),
        },
        other => return Err(Error::Config(format!("{other} has no 1D closed form"))),
    })
}

/// Infinite plate, hole of `radius` at the origin, far-field tension
/// `far_stress` along x₁, plane stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kirsch {
    pub far_stress: f64,
    pub radius: f64,
    pub modulus: f64,
    pub poisson: f64,
}

impl Kirsch {
    fn check(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let r = x[0].hypot(x[1]);
        if r < self.radius * (1.0 - 1e-12) {
            return Err(Error::InsideHole(x[0], x[1]));
        }
        Ok((r, x[1].atan2(x[0])))
    }

    /// `(σ_rr, σ_θθ, σ_rθ)`.
    pub fn polar_stress(&self, x: [f64; 2]) -> Result<[f64; 3]> {
        let (r, t) = self.check(x)?;
        let s = self.far_stress;
        let q = (self.radius / r).powi(2);
        let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
        Ok([
            0.5 * s * (1.0 - q) + 0.5 * s * (1.0 - 4.0 * q + 3.0 * q * q) * c2,
            0.5 * s * (1.0 + q) - 0.5 * s * (1.0 + 3.0 * q * q) * c2,
            -0.5 * s * (1.0 + 2.0 * q - 3.0 * q * q) * s2,
        ])
    }

    /// Cartesian stress, rotated from the polar components.
    pub fn stress(&self, x: [f64; 2]) -> Result<Voigt> {
        let [srr, stt, srt] = self.polar_stress(x)?;
        let t = x[1].atan2(x[0]);
        let (c, s) = (t.cos(), t.sin());
        Ok(Voigt([
            srr * c * c + stt * s * s - 2.0 * srt * s * c,
            srr * s * s + stt * c * c + 2.0 * srt * s * c,
            (srr - stt) * s * c + srt * (c * c - s * s),
        ]))
    }

    pub fn displacement(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (r, t) = self.check(x)?;
        let a = self.radius;
        let mu = self.modulus / (2.0 * (1.0 + self.poisson));
        let kappa = (3.0 - self.poisson) / (1.0 + self.poisson);
        let f = self.far_stress * a / (8.0 * mu);
        let (ar, ar3) = (a / r, (a / r).powi(3));
        Ok([
            f * ((r / a) * (kappa + 1.0) * t.cos() + 2.0 * ar * ((1.0 + kappa) * t.cos() + (3.0 * t).cos())
                - 2.0 * ar3 * (3.0 * t).cos()),
            f * ((r / a) * (kappa - 3.0) * t.sin() + 2.0 * ar * ((1.0 - kappa) * t.sin() + (3.0 * t).sin())
                - 2.0 * ar3 * (3.0 * t).sin()),
        ])
    }

    /// Traction `σ·n` on a surface with outward normal `n`.
    pub fn traction(&self, x: [f64; 2], n: [f64; 2]) -> Result<[f64; 2]> {
        let s = self.stress(x)?;
        Ok([s.xx() * n[0] + s.xy() * n[1], s.xy() * n[0] + s.yy() * n[1]])
    }
}
