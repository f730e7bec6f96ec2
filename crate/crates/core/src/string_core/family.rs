//! Coefficient families `F(z) = sum c_n z^n` with nonnegative coefficients.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A user-supplied coefficient sequence with a certified tail bound.
pub trait CoefficientRule: Send + Sync {
    fn name(&self) -> &str;
    fn coefficient(&self, n: u32) -> f64;
    fn radius(&self) -> f64;
    /// Upper bound on `sum_{k > n} c_k^sigma x^k`, or `None` if none can be certified.
    fn tail_bound(&self, n: u32, sigma: f64, x: f64) -> Option<f64>;
    /// Upper bound on `sup_{k >= n} c_k x^k`, nonincreasing in `n`.
    fn envelope(&self, n: u32, x: f64) -> f64;
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `c_n = 1/n!`
    Exp,
    /// `c_n = 1/n!` for `n >= 1`, `c_0 = 0`
    ExpMinusOne,
    /// `c_n = 1`, radius 1
    Geometric,
    /// `c_n = 1/n` for `n >= 1`, radius 1
    Log,
    Cosh,
    Sinh,
    #[serde(skip)]
    Custom(Arc<dyn CoefficientRule>),
}

impl fmt::Debug for CoefficientFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientFamily::Custom(rule) => write!(f, "Custom({})", rule.name()),
            other => f.write_str(other.name()),
        }
    }
}

impl PartialEq for CoefficientFamily {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (CoefficientFamily::Custom(a), CoefficientFamily::Custom(b)) => Arc::ptr_eq(a, b),
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        }
    }
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `sum_{k > n} (x^k / k!)^sigma`-style bound: `sum_{k > n} x^k / (k!)^sigma`.
pub(crate) fn factorial_tail(n: u32, sigma: f64, x: f64) -> Option<f64> {
    if x == 0.0 {
        return Some(0.0);
    }
    let k = n as f64 + 1.0;
    let rho = x / (k + 1.0).powf(sigma);
    if !(rho < 1.0) {
        return None;
    }
    let ln_first = k * x.ln() - sigma * ln_factorial(n + 1);
    Some(ln_first.exp() / (1.0 - rho))
}

impl CoefficientFamily {
    pub fn name(&self) -> &str {
        match self {
            CoefficientFamily::Exp => "exp",
            CoefficientFamily::ExpMinusOne => "expm1",
            CoefficientFamily::Geometric => "geometric",
            CoefficientFamily::Log => "log",
            CoefficientFamily::Cosh => "cosh",
            CoefficientFamily::Sinh => "sinh",
            CoefficientFamily::Custom(rule) => rule.name(),
        }
    }

    pub fn coefficient(&self, n: u32) -> f64 {
        let inv_fact = || (-ln_factorial(n)).exp();
        match self {
            CoefficientFamily::Exp => inv_fact(),
            CoefficientFamily::ExpMinusOne => {
                if n == 0 {
                    0.0
                } else {
                    inv_fact()
                }
            }
            CoefficientFamily::Geometric => 1.0,
            CoefficientFamily::Log => {
                if n == 0 {
                    0.0
                } else {
                    1.0 / n as f64
                }
            }
            CoefficientFamily::Cosh => {
                if n % 2 == 0 {
                    inv_fact()
                } else {
                    0.0
                }
            }
            CoefficientFamily::Sinh => {
                if n % 2 == 1 {
                    inv_fact()
                } else {
                    0.0
                }
            }
            CoefficientFamily::Custom(rule) => rule.coefficient(n),
        }
    }

    /// `ln c_n`, `-inf` for vanishing coefficients. Stays finite where `c_n` underflows.
    pub fn ln_coefficient(&self, n: u32) -> f64 {
        let vanishes = match self {
            CoefficientFamily::Exp => false,
            CoefficientFamily::ExpMinusOne => n == 0,
            CoefficientFamily::Cosh => n % 2 == 1,
            CoefficientFamily::Sinh => n % 2 == 0,
            _ => return self.coefficient(n).ln(),
        };
        if vanishes {
            f64::NEG_INFINITY
        } else {
            -ln_factorial(n)
        }
    }

    pub fn radius(&self) -> f64 {
        match self {
            CoefficientFamily::Geometric | CoefficientFamily::Log => 1.0,
            CoefficientFamily::Custom(rule) => rule.radius(),
            _ => f64::INFINITY,
        }
    }

    /// `F(x)` for `0 <= x < radius`.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            CoefficientFamily::Exp => x.exp(),
            CoefficientFamily::ExpMinusOne => x.exp_m1(),
            CoefficientFamily::Geometric => 1.0 / (1.0 - x),
            CoefficientFamily::Log => -(-x).ln_1p(),
            CoefficientFamily::Cosh => x.cosh(),
            CoefficientFamily::Sinh => x.sinh(),
            CoefficientFamily::Custom(rule) => {
                let mut sum = 0.0;
                for n in 0..10_000 {
                    sum += rule.coefficient(n) * x.powi(n as i32);
                    if rule.tail_bound(n, 1.0, x).is_some_and(|t| t <= sum * 1e-17) {
                        break;
                    }
                }
                sum
            }
        }
    }

    /// Upper bound on `sum_{k > n} c_k^sigma x^k` for `sigma > 0`.
    pub fn tail_bound(&self, n: u32, sigma: f64, x: f64) -> Option<f64> {
        if !(sigma > 0.0 && x >= 0.0) {
            return None;
        }
        match self {
            // all coefficients are at most 1/k!
            CoefficientFamily::Exp
            | CoefficientFamily::ExpMinusOne
            | CoefficientFamily::Cosh
            | CoefficientFamily::Sinh => factorial_tail(n, sigma, x),
            // c_k^sigma <= 1
            CoefficientFamily::Geometric | CoefficientFamily::Log => {
                if x < 1.0 {
                    Some(x.powf(n as f64 + 1.0) / (1.0 - x))
                } else {
                    None
                }
            }
            CoefficientFamily::Custom(rule) => rule.tail_bound(n, sigma, x),
        }
    }

    /// Upper bound on `sup_{k >= n} c_k x^k`, nonincreasing in `n`.
    pub fn envelope(&self, n: u32, x: f64) -> f64 {
        match self {
            CoefficientFamily::Exp
            | CoefficientFamily::ExpMinusOne
            | CoefficientFamily::Cosh
            | CoefficientFamily::Sinh => {
                if x <= 0.0 {
                    return if n == 0 { 1.0 } else { 0.0 };
                }
                // x^k/k! decreases once k + 1 > x
                let start = n.max(x.floor() as u32);
                let mut best = (start as f64 * x.ln() - ln_factorial(start)).exp();
                for k in n..start {
                    best = best.max((k as f64 * x.ln() - ln_factorial(k)).exp());
                }
                best
            }
            CoefficientFamily::Geometric | CoefficientFamily::Log => x.max(0.0).powi(n as i32),
            CoefficientFamily::Custom(rule) => rule.envelope(n, x),
        }
    }

    /// Checks nonnegativity and that some coefficient is positive.
    pub(crate) fn check(&self) -> Result<(), String> {
        let radius = self.radius();
        if !(radius > 0.0) {
            return Err(format!("coefficient family {} has radius {radius}", self.name()));
        }
        let mut any_positive = false;
        for n in 0..64 {
            let c = self.coefficient(n);
            if !(c >= 0.0 && c.is_finite()) {
                return Err(format!("coefficient c_{n} = {c} of {} is not a nonnegative real", self.name()));
            }
            any_positive |= c > 0.0;
        }
        if !any_positive {
            return Err(format!("coefficient family {} has no positive coefficient", self.name()));
        }
        Ok(())
    }
}
