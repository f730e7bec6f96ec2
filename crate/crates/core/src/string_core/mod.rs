//! Symbolic algebra of bounded fractal strings.
//!
//! A [`StringExpr`] is a tree of atoms (explicit lists, self-similar strings,
//! generalized Cantor strings of finite and infinite order) combined by scaling,
//! disjoint union, tensor product, weighted unions and power series. Every
//! expression built through the constructors below has finite total length.

mod enumerate;
mod family;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cantor_atoms::{check_ratios, infinite_order_length, CantorParams, CantorSchedule};
use crate::error::{rejected, Error, Result};

pub use enumerate::{enumerate_lengths, EnumerationCutoff, LengthStream};
pub use family::{CoefficientFamily, CoefficientRule};

/// One length with its multiplicity.
///
/// Multiplicities are arbitrary-precision: the `j`-th level of a Cantor-type
/// string carries `m^j` copies, which exceeds 64 bits long before the lengths
/// stop mattering in double precision.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthTerm {
    pub length: f64,
    pub multiplicity: BigUint,
}

impl LengthTerm {
    pub fn new(length: f64, multiplicity: u64) -> Result<Self> {
        let term = Self { length, multiplicity: BigUint::from(multiplicity) };
        term.check()?;
        Ok(term)
    }

    fn check(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(rejected(format!("length {} must be positive and finite", self.length)));
        }
        if self.multiplicity.is_zero() {
            return Err(rejected("multiplicity must be >= 1"));
        }
        Ok(())
    }

    /// Multiplicity as a float (may be `inf` for astronomically large counts).
    pub fn multiplicity_f64(&self) -> f64 {
        self.multiplicity.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `length * multiplicity`, computed in the log domain to avoid overflow.
    pub fn mass(&self) -> f64 {
        (self.length.ln() + ln_biguint(&self.multiplicity)).exp()
    }
}

/// Natural logarithm of a positive big integer.
pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().map_or(f64::INFINITY, f64::ln);
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MultiplicityRepr {
    Small(u64),
    Big(String),
}

#[derive(Serialize, Deserialize)]
struct LengthTermRepr {
    length: f64,
    multiplicity: MultiplicityRepr,
}

impl Serialize for LengthTerm {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let multiplicity = match self.multiplicity.to_u64() {
            Some(v) => MultiplicityRepr::Small(v),
            None => MultiplicityRepr::Big(self.multiplicity.to_string()),
        };
        LengthTermRepr { length: self.length, multiplicity }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LengthTerm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = LengthTermRepr::deserialize(deserializer)?;
        let multiplicity = match repr.multiplicity {
            MultiplicityRepr::Small(v) => BigUint::from(v),
            MultiplicityRepr::Big(s) => s.parse().map_err(D::Error::custom)?,
        };
        let term = LengthTerm { length: repr.length, multiplicity };
        term.check().map_err(D::Error::custom)?;
        Ok(term)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPart {
    pub weight: f64,
    pub part: StringExpr,
}

/// The parts of a weighted union: an explicit finite list, or the countable
/// schedule of infinite-order atoms used by the barrier construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightedParts {
    Finite(Vec<WeightedPart>),
    Cantor(CantorSchedule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StringExpr {
    Explicit { terms: Vec<LengthTerm> },
    SelfSimilar { ratios: Vec<f64> },
    GenCantor(CantorParams),
    /// `n`-fold tensor power.
    Power { base: Box<StringExpr>, n: u32 },
    Tensor { factors: Vec<StringExpr> },
    InfiniteOrder(CantorParams),
    Scale { gamma: f64, inner: Box<StringExpr> },
    Union { parts: Vec<StringExpr> },
    WeightedUnion { parts: WeightedParts },
    SeriesLift { family: CoefficientFamily, inner: Box<StringExpr> },
}

/// `gamma * e`.
pub fn scale(gamma: f64, e: StringExpr) -> Result<StringExpr> {
    StringExpr::checked(StringExpr::Scale { gamma, inner: Box::new(e) })
}

/// `F(e) = union of c_n e^n`.
pub fn lift(family: CoefficientFamily, e: StringExpr) -> Result<StringExpr> {
    StringExpr::checked(StringExpr::SeriesLift { family, inner: Box::new(e) })
}

pub fn total_length(e: &StringExpr) -> Result<f64> {
    e.total_length()
}

impl StringExpr {
    fn checked(e: StringExpr) -> Result<StringExpr> {
        e.validate()?;
        Ok(e)
    }

    pub fn explicit(terms: &[(f64, u64)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|&(l, m)| LengthTerm::new(l, m))
            .collect::<Result<Vec<_>>>()?;
        Self::checked(StringExpr::Explicit { terms })
    }

    /// The unit string `(1)`.
    pub fn unit() -> Self {
        StringExpr::Explicit { terms: vec![LengthTerm { length: 1.0, multiplicity: BigUint::one() }] }
    }

    pub fn self_similar(ratios: Vec<f64>) -> Result<Self> {
        Self::checked(StringExpr::SelfSimilar { ratios })
    }

    pub fn gen_cantor(m: u32, a: f64) -> Result<Self> {
        Ok(StringExpr::GenCantor(CantorParams::new(m, a)?))
    }

    pub fn infinite_order(m: u32, a: f64) -> Result<Self> {
        Self::checked(StringExpr::InfiniteOrder(CantorParams::new(m, a)?))
    }

    /// The ternary Cantor string: `3^{-j}` with multiplicity `2^{j-1}`, `j >= 1`.
    pub fn cantor_string() -> Self {
        let params = CantorParams::new(2, 1.0 / 3.0).expect("valid parameters");
        StringExpr::Scale { gamma: 1.0 / 3.0, inner: Box::new(StringExpr::GenCantor(params)) }
    }

    pub fn power(base: StringExpr, n: u32) -> Result<Self> {
        Self::checked(StringExpr::Power { base: Box::new(base), n })
    }

    pub fn tensor(factors: Vec<StringExpr>) -> Result<Self> {
        Self::checked(StringExpr::Tensor { factors })
    }

    pub fn union(parts: Vec<StringExpr>) -> Result<Self> {
        Self::checked(StringExpr::Union { parts })
    }

    pub fn weighted_union(parts: Vec<(f64, StringExpr)>) -> Result<Self> {
        let parts = parts.into_iter().map(|(weight, part)| WeightedPart { weight, part }).collect();
        Self::checked(StringExpr::WeightedUnion { parts: WeightedParts::Finite(parts) })
    }

    pub fn cantor_schedule(schedule: CantorSchedule) -> Result<Self> {
        Self::checked(StringExpr::WeightedUnion { parts: WeightedParts::Cantor(schedule) })
    }

    /// Parses the JSON expression form and validates the result.
    pub fn from_json(json: &str) -> Result<Self> {
        let e: StringExpr = serde_json::from_str(json)
            .map_err(|err| Error::InvalidArgument(format!("malformed expression JSON: {err}")))?;
        Self::checked(e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("expressions serialize")
    }

    /// Checks every structural invariant, including finiteness of the total length.
    pub fn validate(&self) -> Result<()> {
        match self {
            StringExpr::Explicit { terms } => {
                if terms.is_empty() {
                    return Err(rejected("explicit string needs at least one length"));
                }
                terms.iter().try_for_each(LengthTerm::check)?;
            }
            StringExpr::SelfSimilar { ratios } => check_ratios(ratios)?,
            StringExpr::GenCantor(_) | StringExpr::InfiniteOrder(_) => {}
            StringExpr::Power { base, n } => {
                if *n == 0 {
                    return Err(rejected("tensor power n must be >= 1"));
                }
                base.validate()?;
            }
            StringExpr::Tensor { factors } => {
                if factors.is_empty() {
                    return Err(rejected("tensor product needs at least one factor"));
                }
                factors.iter().try_for_each(StringExpr::validate)?;
            }
            StringExpr::Scale { gamma, inner } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(rejected(format!("scale factor {gamma} must be positive")));
                }
                inner.validate()?;
            }
            StringExpr::Union { parts } => {
                if parts.is_empty() {
                    return Err(rejected("union needs at least one part"));
                }
                parts.iter().try_for_each(StringExpr::validate)?;
            }
            StringExpr::WeightedUnion { parts } => match parts {
                WeightedParts::Finite(parts) => {
                    if parts.is_empty() {
                        return Err(rejected("weighted union needs at least one part"));
                    }
                    for p in parts {
                        if !(p.weight.is_finite() && p.weight > 0.0) {
                            return Err(rejected(format!("weight {} must be positive", p.weight)));
                        }
                        p.part.validate()?;
                    }
                }
                WeightedParts::Cantor(schedule) => schedule.validate()?,
            },
            StringExpr::SeriesLift { family, inner } => {
                family.check().map_err(rejected)?;
                inner.validate()?;
                let inner_length = inner.total_length()?;
                if !(inner_length < family.radius()) {
                    return Err(rejected(format!(
                        "|inner| = {inner_length} is not below the radius {} of {}",
                        family.radius(),
                        family.name()
                    )));
                }
            }
        }
        let total = self.total_length()?;
        if !(total.is_finite() && total > 0.0) {
            return Err(rejected(format!("total length {total} is not a positive finite number")));
        }
        Ok(())
    }

    /// `|e|_1`, by structural recursion over closed forms.
    pub fn total_length(&self) -> Result<f64> {
        let total = match self {
            StringExpr::Explicit { terms } => terms.iter().map(LengthTerm::mass).sum(),
            StringExpr::SelfSimilar { ratios } => 1.0 / (1.0 - ratios.iter().sum::<f64>()),
            StringExpr::GenCantor(p) => 1.0 / (1.0 - p.ma()),
            StringExpr::Power { base, n } => base.total_length()?.powi(*n as i32),
            StringExpr::Tensor { factors } => {
                let mut product = 1.0;
                for f in factors {
                    product *= f.total_length()?;
                }
                product
            }
            StringExpr::InfiniteOrder(p) => infinite_order_length(p),
            StringExpr::Scale { gamma, inner } => gamma * inner.total_length()?,
            StringExpr::Union { parts } => {
                let mut sum = 0.0;
                for p in parts {
                    sum += p.total_length()?;
                }
                sum
            }
            StringExpr::WeightedUnion { parts } => match parts {
                WeightedParts::Finite(parts) => {
                    let mut sum = 0.0;
                    for p in parts {
                        sum += p.weight * p.part.total_length()?;
                    }
                    sum
                }
                // each part has length 2^{-k}
                WeightedParts::Cantor(_) => 1.0,
            },
            StringExpr::SeriesLift { family, inner } => {
                let x = inner.total_length()?;
                if !(x < family.radius()) {
                    return Err(rejected(format!(
                        "|inner| = {x} is not below the radius {} of {}",
                        family.radius(),
                        family.name()
                    )));
                }
                family.value(x)
            }
        };
        if !total.is_finite() {
            return Err(rejected("total length diverges or overflows"));
        }
        Ok(total)
    }

    /// True when the string has finitely many lengths.
    pub fn is_finite(&self) -> bool {
        match self {
            StringExpr::Explicit { .. } => true,
            StringExpr::Power { base, .. } => base.is_finite(),
            StringExpr::Tensor { factors } => factors.iter().all(StringExpr::is_finite),
            StringExpr::Scale { inner, .. } => inner.is_finite(),
            StringExpr::Union { parts } => parts.iter().all(StringExpr::is_finite),
            StringExpr::WeightedUnion { parts: WeightedParts::Finite(parts) } => {
                parts.iter().all(|p| p.part.is_finite())
            }
            _ => false,
        }
    }

    /// The largest length `l_1`.
    pub fn largest_length(&self) -> f64 {
        match self {
            StringExpr::Explicit { terms } => terms.iter().map(|t| t.length).fold(0.0, f64::max),
            StringExpr::SelfSimilar { .. } | StringExpr::GenCantor(_) | StringExpr::InfiniteOrder(_) => 1.0,
            StringExpr::Power { base, n } => base.largest_length().powi(*n as i32),
            StringExpr::Tensor { factors } => factors.iter().map(StringExpr::largest_length).product(),
            StringExpr::Scale { gamma, inner } => gamma * inner.largest_length(),
            StringExpr::Union { parts } => parts.iter().map(StringExpr::largest_length).fold(0.0, f64::max),
            StringExpr::WeightedUnion { parts } => match parts {
                WeightedParts::Finite(parts) => parts
                    .iter()
                    .map(|p| p.weight * p.part.largest_length())
                    .fold(0.0, f64::max),
                WeightedParts::Cantor(schedule) => schedule.weight(1),
            },
            StringExpr::SeriesLift { family, inner } => {
                let x = inner.largest_length();
                let mut best: f64 = 0.0;
                let mut n = 0;
                while family.envelope(n, x) > best && n < 100_000 {
                    best = best.max((family.ln_coefficient(n) + n as f64 * x.ln()).exp());
                    n += 1;
                }
                best
            }
        }
    }
}
