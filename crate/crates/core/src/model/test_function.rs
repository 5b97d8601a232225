use serde::{Deserialize, Serialize};

use super::ModulusSpec;
use crate::error::{Error, Result};
use crate::quad;

const QUAD_TOL: f64 = 1e-12;

/// The two test functions used to control the squared distance of coupled solutions.
///
/// * `Continuity`: `φ(x) = ∫₀ˣ ds / (η(s) + δ)`, concave and nondecreasing.
/// * `Confluence`: `φ(x) = exp ∫ₓ^{c₀} ds / (γ(s) + δ)`, positive, nonincreasing,
///   and equal to 1 at `c₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestFunction {
    Continuity { delta: f64, modulus: ModulusSpec },
    Confluence { delta: f64, c0: f64, modulus: ModulusSpec },
}

impl TestFunction {
    pub fn continuity(delta: f64, modulus: ModulusSpec) -> Result<Self> {
        let tf = TestFunction::Continuity { delta, modulus };
        tf.validate()?;
        Ok(tf)
    }

    pub fn confluence(delta: f64, c0: f64, modulus: ModulusSpec) -> Result<Self> {
        let tf = TestFunction::Confluence { delta, c0, modulus };
        tf.validate()?;
        Ok(tf)
    }

    pub fn validate(&self) -> Result<()> {
        let (delta, modulus) = self.parts();
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Parameter(format!("δ must be positive, got {delta}")));
        }
        if let TestFunction::Confluence { c0, .. } = self {
            if !(c0.is_finite() && *c0 > 0.0) {
                return Err(Error::Parameter(format!("c₀ must be positive, got {c0}")));
            }
        }
        modulus.validate()
    }

    fn parts(&self) -> (f64, ModulusSpec) {
        match *self {
            TestFunction::Continuity { delta, modulus } | TestFunction::Confluence { delta, modulus, .. } => {
                (delta, modulus)
            }
        }
    }

    /// Evaluates in closed form for linear moduli, by quadrature otherwise.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.validate()?;
        check_arg(x)?;
        let slope = match self.parts().1 {
            ModulusSpec::Linear { c } | ModulusSpec::LinearGamma { c } => Some(c),
            ModulusSpec::XLog { .. } => None,
        };
        Ok(match (self, slope) {
            (TestFunction::Continuity { delta, .. }, Some(c)) => {
                if c == 0.0 {
                    x / delta
                } else {
                    (c * x / delta).ln_1p() / c
                }
            }
            (TestFunction::Confluence { delta, c0, .. }, Some(c)) => {
                if c == 0.0 {
                    ((c0 - x) / delta).exp()
                } else {
                    ((c * c0 + delta) / (c * x + delta)).powf(1.0 / c)
                }
            }
            _ => self.quadrature_value(x),
        })
    }

    /// Evaluates through adaptive quadrature regardless of the modulus.
    pub fn eval_quadrature(&self, x: f64) -> Result<f64> {
        self.validate()?;
        check_arg(x)?;
        Ok(self.quadrature_value(x))
    }

    fn quadrature_value(&self, x: f64) -> f64 {
        let (delta, modulus) = self.parts();
        let integrand = |s: f64| 1.0 / (modulus.value(s.max(0.0)) + delta);
        match *self {
            TestFunction::Continuity { .. } => quad::integrate(integrand, 0.0, x, QUAD_TOL),
            TestFunction::Confluence { c0, .. } => quad::integrate(integrand, x, c0, QUAD_TOL).exp(),
        }
    }

    /// Functional inverse of the continuity test function.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let TestFunction::Continuity { delta, modulus } = *self else {
            return Err(Error::Usage("inverse is only defined for the continuity test function".into()));
        };
        self.validate()?;
        if !(y >= 0.0) {
            return Err(Error::Parameter(format!("inverse argument must be ≥ 0, got {y}")));
        }
        if let ModulusSpec::Linear { c } | ModulusSpec::LinearGamma { c } = modulus {
            return Ok(if c == 0.0 { y * delta } else { delta * (c * y).exp_m1() / c });
        }
        // φ is increasing with φ′ ≥ 1/(η(x)+δ); bracket then bisect
        let mut hi = 1.0;
        while self.eval(hi)? < y {
            hi *= 2.0;
            if !hi.is_finite() {
                return Ok(f64::INFINITY);
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid)? < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("test function argument must be finite and ≥ 0, got {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIN: ModulusSpec = ModulusSpec::Linear { c: 1.0 };

    #[test]
    fn continuity_vanishes_at_zero() {
        let tf = TestFunction::continuity(0.1, LIN).unwrap();
        assert_eq!(tf.eval(0.0).unwrap(), 0.0);
        assert!((tf.eval(0.3).unwrap() - 4.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn confluence_is_one_at_c0() {
        let tf = TestFunction::confluence(0.01, 1.0, LIN).unwrap();
        assert!((tf.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn confluence_quadrature_matches_closed_form() {
        let tf = TestFunction::confluence(0.01, 1.0, LIN).unwrap();
        let closed = tf.eval(0.25).unwrap();
        assert!((closed - 1.01 / 0.26).abs() < 1e-12);
        assert!((closed - 3.8846).abs() < 1e-4);
        let q = tf.eval_quadrature(0.25).unwrap();
        assert!((q - closed).abs() < 1e-8);
    }

    #[test]
    fn continuity_quadrature_matches_closed_form() {
        let tf = TestFunction::continuity(0.05, ModulusSpec::Linear { c: 2.5 }).unwrap();
        for x in [0.0, 0.01, 0.7, 12.0] {
            let a = tf.eval(x).unwrap();
            let b = tf.eval_quadrature(x).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300) + 1e-15, "x = {x}");
        }
    }

    #[test]
    fn invalid_delta() {
        assert!(TestFunction::continuity(0.0, LIN).is_err());
        assert!(TestFunction::confluence(-1.0, 1.0, LIN).is_err());
        assert!(TestFunction::confluence(0.1, 0.0, LIN).is_err());
        let tf = TestFunction::Continuity { delta: -0.5, modulus: LIN };
        assert!(tf.eval(1.0).is_err());
    }

    #[test]
    fn inverse_roundtrip() {
        for modulus in [LIN, ModulusSpec::XLog { r: 0.1 }] {
            let tf = TestFunction::continuity(0.01, modulus).unwrap();
            for x in [0.0, 1e-3, 0.25, 3.0] {
                let y = tf.eval(x).unwrap();
                let back = tf.inverse(y).unwrap();
                assert!((back - x).abs() <= 1e-9 * x.max(1e-6), "{modulus} x = {x}: {back}");
            }
        }
    }
}
