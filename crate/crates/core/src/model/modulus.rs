use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A concave gauge replacing a Lipschitz constant in the pair conditions.
///
/// * `Linear { c }`: `c·x`.
/// * `XLog { r }`: `x·log(1/x)` on `[0, r]`, continued by its tangent line at `r`;
///   requires `0 < r < e⁻²`.
/// * `LinearGamma { c }`: `c·x` used as the non-confluence gauge, for which
///   `x(γ′(x) + 1)/γ(x) = (c + 1)/c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModulusSpec {
    Linear { c: f64 },
    #[serde(rename = "XLOG")]
    XLog { r: f64 },
    LinearGamma { c: f64 },
}

impl ModulusSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModulusSpec::Linear { c } if !(c.is_finite() && c >= 0.0) => {
                Err(Error::Parameter(format!("LINEAR slope must be finite and ≥ 0, got {c}")))
            }
            ModulusSpec::LinearGamma { c } if !(c.is_finite() && c > 0.0) => {
                Err(Error::Parameter(format!("LINEAR_GAMMA slope must be positive, got {c}")))
            }
            ModulusSpec::XLog { r } if !(r > 0.0 && r < (-2.0f64).exp()) => Err(Error::Parameter(format!(
                "XLOG splice point must satisfy 0 < r < e^-2, got {r}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.validate()?;
        if !(x >= 0.0) {
            return Err(Error::Parameter(format!("modulus argument must be ≥ 0, got {x}")));
        }
        Ok(self.value(x))
    }

    /// Evaluation without validation; callers must have validated `self` and `x ≥ 0`.
    pub(crate) fn value(&self, x: f64) -> f64 {
        match *self {
            ModulusSpec::Linear { c } | ModulusSpec::LinearGamma { c } => c * x,
            ModulusSpec::XLog { r } => {
                if x == 0.0 {
                    0.0
                } else if x <= r {
                    -x * x.ln()
                } else {
                    let l = -r.ln();
                    r * l + (l - 1.0) * (x - r)
                }
            }
        }
    }

    /// `x(γ′(x) + 1)/γ(x)` with `γ′` from a central difference.
    pub fn k_ratio(&self, x: f64) -> f64 {
        let h = 1e-6 * x.max(1e-12);
        let lo = (x - h).max(0.0);
        let deriv = (self.value(x + h) - self.value(lo)) / (x + h - lo);
        x * (deriv + 1.0) / self.value(x)
    }

    /// Supremum over `x > 0` of [`Self::k_ratio`], the smallest admissible `K`.
    pub fn k_ratio_sup(&self) -> f64 {
        match *self {
            ModulusSpec::Linear { c } | ModulusSpec::LinearGamma { c } => (c + 1.0) / c,
            ModulusSpec::XLog { r } => {
                // 1 on the x·log(1/x) branch, increasing to L/(L−1) on the tangent line
                let l = -r.ln();
                (l / (l - 1.0)).max(1.0)
            }
        }
    }

    /// Checks `K ≥ sup k_ratio` and `K > 1/2`.
    pub fn check_k(&self, k: f64) -> Result<()> {
        self.validate()?;
        let need = self.k_ratio_sup();
        if !(k > 0.5) || k < need {
            return Err(Error::Parameter(format!(
                "K = {k} is inconsistent with {self}: need K ≥ {need} and K > 1/2"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusSpec::Linear { c } => write!(f, "LINEAR({c})"),
            ModulusSpec::XLog { r } => write!(f, "XLOG({r})"),
            ModulusSpec::LinearGamma { c } => write!(f, "LINEAR_GAMMA({c})"),
        }
    }
}

impl FromStr for ModulusSpec {
    type Err = Error;

    /// Parses `LINEAR(c)`, `XLOG(r)` or `LINEAR_GAMMA(c)` (case-insensitive).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parameter(format!("cannot parse modulus {s:?}; expected e.g. LINEAR(3)"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let kind = s[..open].trim().to_ascii_uppercase();
        let arg: f64 = s[open + 1..s.len() - 1].trim().parse().map_err(|_| bad())?;
        let spec = match kind.as_str() {
            "LINEAR" => ModulusSpec::Linear { c: arg },
            "XLOG" => ModulusSpec::XLog { r: arg },
            "LINEAR_GAMMA" => ModulusSpec::LinearGamma { c: arg },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}
