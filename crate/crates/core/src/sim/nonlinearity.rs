use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling window and density of the Lipschitz audit.
pub const AUDIT_RANGE: f64 = 10.0;
pub const AUDIT_SAMPLES: usize = 20_001;
/// Relative slack on the declared constant.
pub const AUDIT_SLACK: f64 = 1e-6;

/// Builtin reaction terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `a sin(z) + b z`
    SinLinear {
        a: f64,
        b: f64,
    },
    /// `a z`
    Linear {
        a: f64,
    },
    /// `a tanh(z)`
    Tanh {
        a: f64,
    },
    Zero,
}

impl Nonlinearity {
    /// Builds a builtin from its name and parameters `a`, `b`.
    pub fn builtin(name: &str, a: f64, b: f64) -> Result<Self> {
        let compact: String = name.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.as_str() {
            "a*sin(z)+b*z" => Ok(Self::SinLinear { a, b }),
            "a*z" => Ok(Self::Linear { a }),
            "a*tanh(z)" => Ok(Self::Tanh { a }),
            "zero" | "0" => Ok(Self::Zero),
            _ => Err(Error::Config(format!(
                "unknown nonlinearity `{name}`; expected one of a*sin(z)+b*z, a*z, a*tanh(z), zero"
            ))),
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Self::SinLinear { a, b } => a * z.sin() + b * z,
            Self::Linear { a } => a * z,
            Self::Tanh { a } => a * z.tanh(),
            Self::Zero => 0.0,
        }
    }

    /// Smallest global Lipschitz constant of the builtin.
    pub fn lipschitz_bound(&self) -> f64 {
        match *self {
            Self::SinLinear { a, b } => a.abs() + b.abs(),
            Self::Linear { a } | Self::Tanh { a } => a.abs(),
            Self::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
            || matches!(*self, Self::Linear { a } | Self::Tanh { a } if a == 0.0)
            || matches!(*self, Self::SinLinear { a, b } if a == 0.0 && b == 0.0)
    }

    /// Checks `f(0) = 0` and that sampled difference quotients on
    /// `[-10, 10]` stay below the declared constant. Returns the largest
    /// sampled quotient.
    pub fn audit(&self, declared: f64) -> Result<f64> {
        if !(declared >= 0.0 && declared.is_finite()) {
            return Err(Error::Lipschitz(format!(
                "declared constant {declared} is not a finite nonnegative number"
            )));
        }
        let f0 = self.eval(0.0);
        if f0 != 0.0 {
            return Err(Error::Lipschitz(format!("f(0) = {f0}, expected 0")));
        }
        let h = 2.0 * AUDIT_RANGE / (AUDIT_SAMPLES - 1) as f64;
        let mut worst: f64 = 0.0;
        let mut prev = self.eval(-AUDIT_RANGE);
        for i in 1..AUDIT_SAMPLES {
            let z = -AUDIT_RANGE + i as f64 * h;
            let cur = self.eval(z);
            worst = worst.max((cur - prev).abs() / h);
            prev = cur;
        }
        if worst > declared * (1.0 + AUDIT_SLACK) {
            return Err(Error::Lipschitz(format!(
                "sampled difference quotient {worst} exceeds declared L = {declared}"
            )));
        }
        Ok(worst)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SinLinear { a, b } => write!(f, "{a}*sin(z)+{b}*z"),
            Self::Linear { a } => write!(f, "{a}*z"),
            Self::Tanh { a } => write!(f, "{a}*tanh(z)"),
            Self::Zero => write!(f, "zero"),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = Error;

    /// Parses the `Display` form, e.g. `50*sin(z)+50*z`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad coefficient `{v}` in nonlinearity `{s}`")))
        };
        if t == "zero" || t == "0" {
            return Ok(Self::Zero);
        }
        if let Some(rest) = t.strip_suffix("*z") {
            if let Some((a, b)) = rest.split_once("*sin(z)+") {
                return Ok(Self::SinLinear { a: num(a)?, b: num(b)? });
            }
            return Ok(Self::Linear { a: num(rest)? });
        }
        if let Some(a) = t.strip_suffix("*tanh(z)") {
            return Ok(Self::Tanh { a: num(a)? });
        }
        Err(Error::Config(format!("cannot parse nonlinearity `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_accepts_exact_constant() {
        let f = Nonlinearity::SinLinear { a: 50.0, b: 50.0 };
        let worst = f.audit(100.0).unwrap();
        assert!(worst <= 100.0 && worst > 99.99);
        assert!(Nonlinearity::Tanh { a: 3.0 }.audit(3.0).is_ok());
        assert!(Nonlinearity::Zero.audit(0.0).is_ok());
    }

    #[test]
    fn audit_rejects_understated_constant() {
        let f = Nonlinearity::SinLinear { a: 50.0, b: 50.0 };
        assert!(matches!(f.audit(99.0), Err(Error::Lipschitz(_))));
        assert!(Nonlinearity::Linear { a: -2.0 }.audit(1.5).is_err());
        assert!(f.audit(f64::NAN).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for f in [
            Nonlinearity::SinLinear { a: 50.0, b: 50.0 },
            Nonlinearity::Linear { a: -1.25 },
            Nonlinearity::Tanh { a: 3.0 },
            Nonlinearity::Zero,
        ] {
            assert_eq!(f.to_string().parse::<Nonlinearity>().unwrap(), f);
        }
        assert!("z^2".parse::<Nonlinearity>().is_err());
        assert_eq!(
            Nonlinearity::builtin("a*sin(z) + b*z", 1.0, 2.0).unwrap(),
            Nonlinearity::SinLinear { a: 1.0, b: 2.0 }
        );
        assert!(Nonlinearity::builtin("exp(z)", 1.0, 0.0).is_err());
    }

    #[test]
    fn bounds() {
        assert_eq!(Nonlinearity::SinLinear { a: 50.0, b: -50.0 }.lipschitz_bound(), 100.0);
        assert!(Nonlinearity::Linear { a: 0.0 }.is_zero());
        assert!(!Nonlinearity::Tanh { a: 1.0 }.is_zero());
    }
}
