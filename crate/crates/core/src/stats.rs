//! Small statistics helpers shared by the experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

/// A Monte Carlo estimate with its standard error (sample SD / √n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(with = "crate::stats::float_repr")]
    pub value: f64,
    #[serde(with = "crate::stats::float_repr")]
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    /// Mean and standard error of `samples`, reduced in slice order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { value: f64::NAN, se: f64::NAN };
        }
        if samples.iter().all(|x| x.to_bits() == samples[0].to_bits()) {
            return Self { value: samples[0], se: 0.0 };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { value: mean, se: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self { value: mean, se: (var / n as f64).sqrt() }
    }

    /// Proportion estimate from a hit count.
    pub fn proportion(hits: usize, n: usize) -> Self {
        if n == 0 {
            return Self { value: f64::NAN, se: f64::NAN };
        }
        let p = hits as f64 / n as f64;
        Self { value: p, se: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// `|self − target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Clopper–Pearson interval for `hits` successes out of `n` at confidence `1 − alpha`.
pub fn clopper_pearson(hits: usize, n: usize, alpha: f64) -> (f64, f64) {
    assert!(hits <= n && n > 0);
    let lower = if hits == 0 {
        0.0
    } else {
        Beta::new(hits as f64, (n - hits + 1) as f64)
            .expect("positive shape")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if hits == n {
        1.0
    } else {
        Beta::new((hits + 1) as f64, (n - hits) as f64)
            .expect("positive shape")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"` and `"nan"`, which
/// plain JSON numbers cannot carry.
pub mod float_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[2.0; 10]).se, 0.0);
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 100, 0.05).0, 0.0);
        let (lo, hi) = clopper_pearson(1, 100_000, 0.05);
        assert!(lo > 0.0 && lo < 1e-5 && hi > 1e-5);
        // one hit out of one: lower bound α/2
        assert!((clopper_pearson(1, 1, 0.05).0 - 0.025).abs() < 1e-9);
    }

    #[test]
    fn non_finite_roundtrip() {
        let e = Estimate { value: f64::INFINITY, se: 0.5 };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"value":"inf","se":0.5}"#);
        let back: Estimate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
