//! Abscissa of absolute convergence, equivalently the Minkowski dimension.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::string_core::{enumerate_lengths, ln_biguint, EnumerationCutoff, StringExpr, WeightedParts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionMethod {
    ExactSymbolic,
    PrefixRegression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub method: DimensionMethod,
    pub confidence_width: f64,
}

impl DimensionEstimate {
    fn exact(value: f64) -> Self {
        Self { value, method: DimensionMethod::ExactSymbolic, confidence_width: 0.0 }
    }

    pub fn brackets(&self, target: f64) -> bool {
        (self.value - target).abs() <= self.confidence_width
    }
}

/// Real root of `sum r_j^s = 1` by bisection.
pub fn moran_root(ratios: &[f64]) -> f64 {
    let f = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    // f(0) = count - 1 >= 0 and f(1) < 0
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(lo) <= 0.0 {
        return 0.0;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn abscissa(e: &StringExpr) -> f64 {
    match e {
        StringExpr::Explicit { .. } => 0.0,
        StringExpr::SelfSimilar { ratios } => moran_root(ratios),
        StringExpr::GenCantor(p) | StringExpr::InfiniteOrder(p) => p.dimension(),
        StringExpr::Power { base, .. } => abscissa(base),
        // a product of Dirichlet series with positive terms converges iff every factor does
        StringExpr::Tensor { factors } => factors.iter().map(abscissa).fold(0.0, f64::max),
        StringExpr::Scale { inner, .. } => abscissa(inner),
        StringExpr::Union { parts } => parts.iter().map(abscissa).fold(0.0, f64::max),
        StringExpr::WeightedUnion { parts } => match parts {
            WeightedParts::Finite(parts) => parts.iter().map(|p| abscissa(&p.part)).fold(0.0, f64::max),
            // D_k decreases from D_1, and at sigma > D_1 the parts sum to at most
            // sum 2^{-k sigma} (e-1)^{-sigma} E(eps, sigma) < inf
            WeightedParts::Cantor(schedule) => schedule.d1,
        },
        StringExpr::SeriesLift { inner, .. } => abscissa(inner),
    }
}

/// Exact abscissa of convergence by structural recursion.
pub fn exact_abscissa(e: &StringExpr) -> Result<DimensionEstimate> {
    e.validate()?;
    Ok(DimensionEstimate::exact(abscissa(e)))
}

struct Fit {
    coefficients: DVector<f64>,
    slope_se: f64,
}

fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<Fit> {
    let n = y.len();
    let p = columns.len();
    if n <= p {
        return None;
    }
    let a = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let b = DVector::from_column_slice(y);
    let coefficients = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let residual = &b - &a * &coefficients;
    let variance = residual.norm_squared() / (n - p) as f64;
    let inverse = (a.transpose() * &a).try_inverse()?;
    Some(Fit { coefficients, slope_se: (variance * inverse[(0, 0)]).max(0.0).sqrt() })
}

/// Estimates the abscissa from the first `n_terms` coalesced lengths.
///
/// Regresses `ln N(l)` on `x = ln(1/l)`, where `N(l)` counts lengths `>= l`
/// with multiplicity, over the upper half of the sampled range. Infinite-order
/// parts make `N` grow like `exp(D x + c x^{1/(1+D)})`, so the model carries a
/// `x^{1/(1+D)}` column, iterated to a fixed point in `D`. The reported width
/// is twice the standard error plus the distance to the plain linear slope.
pub fn estimate_abscissa(e: &StringExpr, n_terms: usize) -> Result<DimensionEstimate> {
    if n_terms < 100 {
        return Err(Error::InvalidArgument(format!("estimation needs at least 100 terms, got {n_terms}")));
    }
    e.validate()?;
    if e.is_finite() {
        return Ok(DimensionEstimate { value: 0.0, method: DimensionMethod::PrefixRegression, confidence_width: 0.0 });
    }
    let mut count = BigUint::default();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for term in enumerate_lengths(e, EnumerationCutoff::MaxTerms(n_terms))? {
        count += &term.multiplicity;
        let x = -term.length.ln();
        if x > 1.0 {
            xs.push(x);
            ys.push(ln_biguint(&count));
        }
    }
    let start = xs.len() / 2;
    let (xs, ys) = (&xs[start..], &ys[start..]);
    if xs.len() < 8 {
        return Err(Error::EstimateUnavailable(format!(
            "only {} usable lengths in the upper half of the prefix",
            xs.len()
        )));
    }
    let ones = vec![1.0; xs.len()];
    let linear = least_squares(&[xs.to_vec(), ones.clone()], ys)
        .ok_or_else(|| Error::EstimateUnavailable("degenerate regression".into()))?;
    let d_linear = linear.coefficients[0];
    let mut d = d_linear;
    let mut fit = linear;
    for _ in 0..100 {
        let g = 1.0 / (1.0 + d.max(0.0));
        let bend: Vec<f64> = xs.iter().map(|x| x.powf(g)).collect();
        let Some(next) = least_squares(&[xs.to_vec(), bend, ones.clone()], ys) else {
            break;
        };
        let moved = (next.coefficients[0] - d).abs();
        d = next.coefficients[0];
        fit = next;
        if moved < 1e-12 {
            break;
        }
    }
    let width = 2.0 * fit.slope_se + (d - d_linear).abs();
    Ok(DimensionEstimate {
        value: d.clamp(0.0, 1.0),
        method: DimensionMethod::PrefixRegression,
        confidence_width: width,
    })
}
