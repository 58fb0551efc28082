use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearity.
///
/// Every variant exposes its value and first two derivatives, since spatial
/// derivatives carried as tangents need ψ′ on the tape and the reverse sweep
/// through those tangents needs ψ″.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// tanh(z)²
    Tanh2,
    /// elu(z)², with elu′(0) taken as 1.
    Elu2,
}

/// One `exp` instead of the libm `tanh`, which goes through `expm1` and is
/// several times slower; absolute error stays at rounding level.
#[inline]
fn tanh(z: f64) -> f64 {
    1.0 - 2.0 / ((2.0 * z).exp() + 1.0)
}

impl Activation {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(z),
            Activation::Tanh2 => {
                let t = tanh(z);
                t * t
            }
            Activation::Elu2 => {
                let e = elu(z);
                e * e
            }
        }
    }

    pub fn first(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = tanh(z);
                1.0 - t * t
            }
            Activation::Tanh2 => {
                let t = tanh(z);
                2.0 * t * (1.0 - t * t)
            }
            Activation::Elu2 => 2.0 * elu(z) * elu_prime(z),
        }
    }

    pub fn second(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = tanh(z);
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Tanh2 => {
                let t = tanh(z);
                let s = 1.0 - t * t;
                2.0 * s * (1.0 - 3.0 * t * t)
            }
            Activation::Elu2 => {
                let d = elu_prime(z);
                let dd = if z >= 0.0 { 0.0 } else { z.exp() };
                2.0 * (d * d + elu(z) * dd)
            }
        }
    }

    /// (ψ, ψ′, ψ″) at `z`, sharing the transcendental evaluation.
    pub fn eval_all(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = tanh(z);
                let s = 1.0 - t * t;
                (t, s, -2.0 * t * s)
            }
            Activation::Tanh2 => {
                let t = tanh(z);
                let s = 1.0 - t * t;
                (t * t, 2.0 * t * s, 2.0 * s * (1.0 - 3.0 * t * t))
            }
            Activation::Elu2 => {
                if z >= 0.0 {
                    (z * z, 2.0 * z, 2.0)
                } else {
                    let e = z.exp_m1();
                    let ez = e + 1.0;
                    (e * e, 2.0 * e * ez, 2.0 * (ez * ez + e * ez))
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Tanh2 => "tanh2",
            Activation::Elu2 => "elu2",
        }
    }
}

fn elu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_prime(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        z.exp()
    }
}
