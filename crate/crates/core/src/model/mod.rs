//! Material and loading laws.
//!
//! Every law is a closed-form family selected by a tag in the configuration
//! document. Kinematics are scalar (antiplane), so a deformation gradient is a
//! vector with one entry per space dimension and the stress `∂ξW` has the
//! same shape.

mod validate;

pub use validate::{validate_problem, CheckOutcome, ValidationReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Position in the reference configuration. One-dimensional problems keep the
/// second coordinate at zero.
pub type Point = [f64; 2];

/// Unit vector in the plane of the lattice.
pub type Direction = [f64; 2];

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Spatial factor applied to a base coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Modulation {
    #[default]
    Uniform,
    /// `1 + slope * x[axis]`
    Linear { axis: usize, slope: f64 },
    /// `below` for `x[axis] < split`, `above` otherwise.
    Step {
        axis: usize,
        split: f64,
        below: f64,
        above: f64,
    },
}


impl Modulation {
    pub fn factor(&self, x: &Point) -> f64 {
        match *self {
            Modulation::Uniform => 1.0,
            Modulation::Linear { axis, slope } => 1.0 + slope * x[axis.min(1)],
            Modulation::Step {
                axis,
                split,
                below,
                above,
            } => {
                if x[axis.min(1)] < split {
                    below
                } else {
                    above
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BulkFamily {
    /// `W = μ/2 |ξ|²`
    Quadratic,
    /// `W = μ/p |ξ|^p`
    PPower,
    /// `W = μ (|ξ| − 1)₊²`, convex but flat on the unit ball.
    FlatWell,
}

/// Stored-energy density `W(x, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkLaw {
    pub family: BulkFamily,
    pub stiffness: f64,
    /// Growth exponent; only meaningful (and required) for `p-power`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default)]
    pub modulation: Modulation,
}

/// Constants of the two-sided growth bound `c₁|ξ|^p − c₂ ≤ W ≤ c₃(|ξ|^p + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl BulkLaw {
    pub fn quadratic(stiffness: f64) -> Self {
        BulkLaw {
            family: BulkFamily::Quadratic,
            stiffness,
            exponent: None,
            modulation: Modulation::Uniform,
        }
    }

    pub fn p_power(stiffness: f64, exponent: f64) -> Self {
        BulkLaw {
            family: BulkFamily::PPower,
            stiffness,
            exponent: Some(exponent),
            modulation: Modulation::Uniform,
        }
    }

    pub fn flat_well(stiffness: f64) -> Self {
        BulkLaw {
            family: BulkFamily::FlatWell,
            stiffness,
            exponent: None,
            modulation: Modulation::Uniform,
        }
    }

    /// Effective growth exponent `p`.
    pub fn p(&self) -> f64 {
        match self.family {
            BulkFamily::PPower => self.exponent.unwrap_or(f64::NAN),
            BulkFamily::Quadratic | BulkFamily::FlatWell => 2.0,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        self.family == BulkFamily::Quadratic
    }

    pub fn stiffness_at(&self, x: &Point) -> f64 {
        self.stiffness * self.modulation.factor(x)
    }

    pub fn density(&self, x: &Point, xi: &[f64]) -> f64 {
        let mu = self.stiffness_at(x);
        let s = norm(xi);
        match self.family {
            BulkFamily::Quadratic => 0.5 * mu * s * s,
            BulkFamily::PPower => {
                let p = self.p();
                mu / p * s.powf(p)
            }
            BulkFamily::FlatWell => {
                let excess = (s - 1.0).max(0.0);
                mu * excess * excess
            }
        }
    }

    /// `∂ξW(x, ξ)`, written into `out` (same length as `xi`).
    pub fn stress_into(&self, x: &Point, xi: &[f64], out: &mut [f64]) {
        let mu = self.stiffness_at(x);
        let s = norm(xi);
        let factor = match self.family {
            BulkFamily::Quadratic => mu,
            BulkFamily::PPower => {
                if s == 0.0 {
                    0.0
                } else {
                    mu * s.powf(self.p() - 2.0)
                }
            }
            BulkFamily::FlatWell => {
                if s <= 1.0 {
                    0.0
                } else {
                    2.0 * mu * (s - 1.0) / s
                }
            }
        };
        for (o, c) in out.iter_mut().zip(xi) {
            *o = factor * c;
        }
    }

    pub fn stress(&self, x: &Point, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xi.len()];
        self.stress_into(x, xi, &mut out);
        out
    }

    /// Stress for a scalar strain (bond-axial or 1D gradient).
    pub fn scalar_stress(&self, x: &Point, strain: f64) -> f64 {
        let mut out = [0.0];
        self.stress_into(x, &[strain], &mut out);
        out[0]
    }

    /// `∂²W/∂ξ²` for a scalar strain; infinite curvature at the origin of
    /// sub-quadratic powers is capped.
    pub fn scalar_curvature(&self, x: &Point, strain: f64) -> f64 {
        let mu = self.stiffness_at(x);
        let s = strain.abs();
        match self.family {
            BulkFamily::Quadratic => mu,
            BulkFamily::PPower => {
                let p = self.p();
                let c = mu * (p - 1.0) * s.powf(p - 2.0);
                if c.is_finite() { c.min(1e12 * mu) } else { 1e12 * mu }
            }
            BulkFamily::FlatWell => {
                if s > 1.0 {
                    2.0 * mu
                } else {
                    0.0
                }
            }
        }
    }

    /// Growth constants for stiffness factors observed in `[mu_lo, mu_hi]`.
    pub fn growth_constants(&self, mu_lo: f64, mu_hi: f64) -> GrowthConstants {
        match self.family {
            BulkFamily::Quadratic => GrowthConstants {
                c1: mu_lo / 2.0,
                c2: 0.0,
                c3: mu_hi / 2.0,
            },
            BulkFamily::PPower => {
                let p = self.p();
                GrowthConstants {
                    c1: mu_lo / p,
                    c2: 0.0,
                    c3: mu_hi / p,
                }
            }
            // (s−1)₊² ≥ s²/2 − 1 and (s−1)₊² ≤ s² + 1
            BulkFamily::FlatWell => GrowthConstants {
                c1: mu_lo / 2.0,
                c2: mu_hi,
                c3: mu_hi,
            },
        }
    }
}

/// Spatial part of the toughness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum ToughnessField {
    #[default]
    Uniform,
    Step {
        axis: usize,
        split: f64,
        below: f64,
        above: f64,
    },
    /// Piecewise constant on square cells of side `cell`, each factor drawn
    /// uniformly from `[low, high)` by a generator seeded from `seed` and the
    /// cell index.
    Random {
        seed: u64,
        low: f64,
        high: f64,
        cell: f64,
    },
}


impl ToughnessField {
    pub fn factor(&self, x: &Point) -> f64 {
        match *self {
            ToughnessField::Uniform => 1.0,
            ToughnessField::Step {
                axis,
                split,
                below,
                above,
            } => {
                if x[axis.min(1)] < split {
                    below
                } else {
                    above
                }
            }
            ToughnessField::Random {
                seed,
                low,
                high,
                cell,
            } => {
                let ix = (x[0] / cell).floor() as i64;
                let iy = (x[1] / cell).floor() as i64;
                let stream = (ix as u64)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add((iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream);
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
        }
    }
}

/// Orientation dependence of the toughness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Anisotropy {
    #[default]
    Isotropic,
    /// `1 + strength (ν·e₁)²`
    Quadratic { strength: f64 },
    /// `1 + strength ν·e₁`. Odd in `ν`; kept so validation has something to reject.
    Linear { strength: f64 },
}


impl Anisotropy {
    pub fn factor(&self, nu: &Direction) -> f64 {
        match *self {
            Anisotropy::Isotropic => 1.0,
            Anisotropy::Quadratic { strength } => 1.0 + strength * nu[0] * nu[0],
            Anisotropy::Linear { strength } => 1.0 + strength * nu[0],
        }
    }
}

/// Toughness `κ(x, ν) = base · field(x) · anisotropy(ν)` with declared bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToughnessLaw {
    pub base: f64,
    #[serde(default)]
    pub field: ToughnessField,
    #[serde(default)]
    pub anisotropy: Anisotropy,
    pub min: f64,
    pub max: f64,
}

impl ToughnessLaw {
    pub fn uniform(kappa: f64) -> Self {
        ToughnessLaw {
            base: kappa,
            field: ToughnessField::Uniform,
            anisotropy: Anisotropy::Isotropic,
            min: kappa,
            max: kappa,
        }
    }

    pub fn kappa(&self, x: &Point, nu: &Direction) -> f64 {
        self.base * self.field.factor(x) * self.anisotropy.factor(nu)
    }
}

/// Body-force potential density `F(t, x, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LoadDensity {
    Zero,
    /// `−c/2 (u − rate·t)²`: a spring pulling every point towards `rate·t`.
    Attractive { stiffness: f64, rate: f64 },
    /// `g·u`: a dead load, never coercive.
    Dead { density: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadLaw {
    pub density: LoadDensity,
    /// Declared constants of `−F ≥ α|u|^q − β`.
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
}

impl LoadLaw {
    pub fn zero() -> Self {
        LoadLaw {
            density: LoadDensity::Zero,
            alpha: 0.0,
            beta: 0.0,
            q: 2.0,
        }
    }

    pub fn value(&self, t: f64, _x: &Point, u: f64) -> f64 {
        match self.density {
            LoadDensity::Zero => 0.0,
            LoadDensity::Attractive { stiffness, rate } => {
                let d = u - rate * t;
                -0.5 * stiffness * d * d
            }
            LoadDensity::Dead { density } => density * u,
        }
    }

    pub fn d_du(&self, t: f64, _x: &Point, u: f64) -> f64 {
        match self.density {
            LoadDensity::Zero => 0.0,
            LoadDensity::Attractive { stiffness, rate } => -stiffness * (u - rate * t),
            LoadDensity::Dead { density } => density,
        }
    }

    pub fn d_dt(&self, t: f64, _x: &Point, u: f64) -> f64 {
        match self.density {
            LoadDensity::Zero | LoadDensity::Dead { .. } => 0.0,
            LoadDensity::Attractive { stiffness, rate } => stiffness * rate * (u - rate * t),
        }
    }

    /// `∂²F/∂u²`; every family is at most quadratic in `u`.
    pub fn d2_du2(&self) -> f64 {
        match self.density {
            LoadDensity::Attractive { stiffness, .. } => -stiffness,
            LoadDensity::Zero | LoadDensity::Dead { .. } => 0.0,
        }
    }

    /// True when `u ↦ −F(t, x, u)` has a proper minimum, so a fragment
    /// detached from every grip still has a well-defined equilibrium.
    pub fn confines(&self) -> bool {
        matches!(self.density, LoadDensity::Attractive { stiffness, .. } if stiffness > 0.0)
    }

    pub fn is_zero(&self) -> bool {
        match self.density {
            LoadDensity::Zero => true,
            LoadDensity::Attractive { stiffness, .. } => stiffness == 0.0,
            LoadDensity::Dead { density } => density == 0.0,
        }
    }
}

/// Prescribed boundary deformation `w(t, x) = t · (gradient·x + offset)`.
///
/// The same closed form is evaluated at interior nodes, which is the
/// linear-blend extension of the boundary datum into the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryProgram {
    pub gradient: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    /// Declared Lipschitz constant of `t ↦ w(t, x)`.
    pub lipschitz: f64,
}

impl BoundaryProgram {
    pub fn shape(&self, x: &Point) -> f64 {
        self.gradient
            .iter()
            .zip(x.iter())
            .map(|(g, c)| g * c)
            .sum::<f64>()
            + self.offset
    }

    pub fn value(&self, t: f64, x: &Point) -> f64 {
        t * self.shape(x)
    }

    /// `ẇ(t, x)`
    pub fn rate(&self, _t: f64, x: &Point) -> f64 {
        self.shape(x)
    }
}
