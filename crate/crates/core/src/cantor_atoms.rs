//! Generalized Cantor strings of finite and infinite order.
//!
//! `L(m,a)` is the self-similar string with `m` equal ratios `a` (lengths `a^j`
//! with multiplicity `m^j`, `j >= 0`). Its `n`-fold tensor power has zeta
//! `(1 - m a^s)^{-n}`, and the infinite-order string is the disjoint union of the
//! powers scaled by `1/n!`. All closed forms below are computed from `ln(1/a)`,
//! which stays representable even when `a` itself underflows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{rejected, Error, Result};

/// Denominators smaller than this are treated as lying on the pole lattice.
pub const LATTICE_DENOMINATOR_GUARD: f64 = 1e-12;

/// Parameters `(m, a)` of a generalized Cantor string, `m >= 2`, `0 < a < 1/m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorParams {
    m: u32,
    ln_inv_a: f64,
}

impl CantorParams {
    pub fn new(m: u32, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(rejected(format!("Cantor ratio a = {a} must be positive")));
        }
        Self::from_ln_inv_a(m, -a.ln())
    }

    /// Builds the parameters from `m` and `ln(1/a)`.
    pub fn from_ln_inv_a(m: u32, ln_inv_a: f64) -> Result<Self> {
        if m < 2 {
            return Err(rejected(format!("Cantor multiplicity m = {m} must be >= 2")));
        }
        if !(ln_inv_a.is_finite() && ln_inv_a > (m as f64).ln()) {
            return Err(rejected(format!(
                "Cantor parameters violate m*a < 1 (m = {m}, ln(1/a) = {ln_inv_a})"
            )));
        }
        Ok(Self { m, ln_inv_a })
    }

    /// Parameters with similarity dimension `d`, i.e. `a = m^{-1/d}`.
    pub fn from_dimension(m: u32, d: f64) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(rejected(format!("Cantor dimension {d} must lie in (0, 1)")));
        }
        Self::from_ln_inv_a(m, (m as f64).ln() / d)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// The ratio `a`; may underflow to zero for extreme parameters.
    pub fn a(&self) -> f64 {
        (-self.ln_inv_a).exp()
    }

    pub fn ln_inv_a(&self) -> f64 {
        self.ln_inv_a
    }

    /// `m * a`, always in `(0, 1)`.
    pub fn ma(&self) -> f64 {
        ((self.m as f64).ln() - self.ln_inv_a).exp()
    }

    /// Similarity dimension `log_{1/a} m`.
    pub fn dimension(&self) -> f64 {
        (self.m as f64).ln() / self.ln_inv_a
    }

    /// Oscillatory period `2 pi / ln(1/a)`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.ln_inv_a
    }

    /// `1 - m a^s`, computed without cancellation near the lattice.
    pub fn denominator(&self, s: Complex64) -> Complex64 {
        let x = (self.m as f64).ln() - s.re * self.ln_inv_a;
        if x < -750.0 {
            // |m a^s| underflows; also covers ln(1/a) = inf once D_k underflows to 0
            return Complex64::new(1.0, 0.0);
        }
        let y = -s.im * self.ln_inv_a;
        // 1 - e^{x+iy} = -(expm1(x) cos y - 2 sin^2(y/2)) - i e^x sin y
        let half = (0.5 * y).sin();
        let re = -(x.exp_m1() * y.cos() - 2.0 * half * half);
        let im = -x.exp() * y.sin();
        Complex64::new(re, im)
    }

    pub fn lattice(&self, kind: SingularityKind) -> SingularityLattice {
        SingularityLattice {
            real_part: self.dimension(),
            period: self.period(),
            kind,
        }
    }

    pub fn nearest_lattice_point(&self, s: Complex64) -> Complex64 {
        self.lattice(SingularityKind::Essential).nearest(s)
    }
}

#[derive(Serialize, Deserialize)]
struct CantorParamsRepr {
    m: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ln_inv_a: Option<f64>,
}

impl Serialize for CantorParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        // `ln_inv_a` is authoritative; `a` is informational and omitted once it underflows
        let a = self.a();
        CantorParamsRepr {
            m: self.m,
            a: (a > f64::MIN_POSITIVE).then_some(a),
            ln_inv_a: Some(self.ln_inv_a),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CantorParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = CantorParamsRepr::deserialize(deserializer)?;
        let params = match (repr.ln_inv_a, repr.a) {
            (Some(l), _) => CantorParams::from_ln_inv_a(repr.m, l),
            (None, Some(a)) => CantorParams::new(repr.m, a),
            (None, None) => return Err(D::Error::custom("Cantor parameters need `a` or `ln_inv_a`")),
        };
        params.map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SingularityKind {
    Pole { order: u32 },
    Essential,
}

/// The vertical arithmetic set `real_part + period * i * Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityLattice {
    pub real_part: f64,
    pub period: f64,
    pub kind: SingularityKind,
}

impl SingularityLattice {
    pub fn point(&self, j: i64) -> Complex64 {
        Complex64::new(self.real_part, self.period * j as f64)
    }

    pub fn nearest_index(&self, s: Complex64) -> i64 {
        (s.im / self.period).round() as i64
    }

    pub fn nearest(&self, s: Complex64) -> Complex64 {
        self.point(self.nearest_index(s))
    }

    pub fn distance(&self, s: Complex64) -> f64 {
        (s - self.nearest(s)).norm()
    }

    /// Lattice points with imaginary part in `[im_min, im_max]`.
    pub fn points_between(&self, im_min: f64, im_max: f64) -> impl Iterator<Item = Complex64> + '_ {
        let lo = (im_min / self.period).ceil() as i64;
        let hi = (im_max / self.period).floor() as i64;
        (lo..=hi).map(move |j| self.point(j))
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self { real_part: self.real_part + by, ..*self }
    }
}

fn singular(params: &CantorParams, s: Complex64, den: Complex64, kind: SingularityKind) -> Error {
    let lattice = params.lattice(kind);
    let nearest = lattice.nearest(s);
    Error::SingularityProximity {
        s,
        nearest,
        distance: (s - nearest).norm(),
        context: format!(
            "|1 - m a^s| = {:.3e} on the lattice {:.10} + {:.10} i Z",
            den.norm(),
            lattice.real_part,
            lattice.period
        ),
    }
}

/// `zeta` of the `n`-th order string: `(1 - m a^s)^{-n}`.
pub fn closed_form_zeta(params: &CantorParams, n: u32, s: Complex64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidArgument("order n must be >= 1".into()));
    }
    let den = params.denominator(s);
    if den.norm() < LATTICE_DENOMINATOR_GUARD {
        return Err(singular(params, s, den, SingularityKind::Pole { order: n }));
    }
    Ok(den.inv().powu(n))
}

/// `1 / (3^s - 2)`, the zeta function of the ternary Cantor string.
pub fn cantor_string_zeta(s: Complex64) -> Result<Complex64> {
    let params = CantorParams::new(2, 1.0 / 3.0)?;
    let den = params.denominator(s);
    if den.norm() < LATTICE_DENOMINATOR_GUARD {
        return Err(singular(&params, s, den, SingularityKind::Pole { order: 1 }));
    }
    // 3^{-s} / (1 - 2 * 3^{-s})
    let three_neg_s = (-s * 3f64.ln()).exp();
    Ok(three_neg_s / den)
}

/// `1 / (1 - sum r_j^s)` for a self-similar string with ratios `r_j`.
pub fn self_similar_zeta(ratios: &[f64], s: Complex64) -> Result<Complex64> {
    check_ratios(ratios)?;
    let sum: Complex64 = ratios.iter().map(|r| (s * r.ln()).exp()).sum();
    let den = Complex64::new(1.0, 0.0) - sum;
    if den.norm() < LATTICE_DENOMINATOR_GUARD {
        return Err(Error::SingularityProximity {
            s,
            nearest: s,
            distance: 0.0,
            context: format!("|1 - sum r_j^s| = {:.3e}", den.norm()),
        });
    }
    Ok(den.inv())
}

pub(crate) fn check_ratios(ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(rejected("self-similar string needs at least one ratio"));
    }
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(rejected("self-similar ratios must be positive"));
    }
    let total: f64 = ratios.iter().sum();
    if total >= 1.0 {
        return Err(rejected(format!("self-similar ratios sum to {total} >= 1")));
    }
    Ok(())
}

/// Leading Laurent coefficient `c_{-n}` of `(1 - m a^s)^{-n}` at any lattice point.
///
/// Since `m a^{s_j} = 1`, the derivative of the denominator at `s_j` is `ln(1/a)`,
/// so `c_{-n} = ln(1/a)^{-n}` for every `j`.
pub fn laurent_principal(params: &CantorParams, n: u32, _j: i64) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidArgument("order n must be >= 1".into()));
    }
    Ok(Complex64::new(params.ln_inv_a.recip().powi(n as i32), 0.0))
}

/// Richardson extrapolation of `f(h)` to `h -> 0`, assuming an expansion in integer powers of `h`.
///
/// Evaluates at `h0, h0 r, h0 r^2, ...` for `levels` levels.
pub fn richardson_limit<F>(f: F, h0: f64, ratio: f64, levels: usize) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let mut table: Vec<Vec<Complex64>> = Vec::with_capacity(levels);
    let mut h = h0;
    for i in 0..levels {
        let mut row = Vec::with_capacity(i + 1);
        row.push(f(h));
        for k in 1..=i {
            // eliminate the h^k term
            let factor = ratio.powi(-(k as i32));
            let improved = (row[k - 1] * factor - table[i - 1][k - 1]) / (factor - 1.0);
            row.push(improved);
        }
        table.push(row);
        h *= ratio;
    }
    table[levels - 1][levels - 1]
}

/// Numeric limit of `(s - s_j)^n (1 - m a^s)^{-n}` approaching `s_j` along `direction`.
pub fn numeric_laurent_limit(
    params: &CantorParams,
    n: u32,
    j: i64,
    direction: Complex64,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidArgument("order n must be >= 1".into()));
    }
    let dir = direction / direction.norm();
    let sj = params.lattice(SingularityKind::Pole { order: n }).point(j);
    let g = |h: f64| {
        let ds = dir * h;
        // the closed form refuses points this close to the lattice, so use the raw denominator
        (ds / params.denominator(sj + ds)).powu(n)
    };
    Ok(richardson_limit(g, 1e-2, 0.5, 6))
}

pub fn singularity_lattice(params: &CantorParams, order: Option<u32>) -> SingularityLattice {
    match order {
        Some(n) => params.lattice(SingularityKind::Pole { order: n.max(1) }),
        None => params.lattice(SingularityKind::Essential),
    }
}

/// `exp(1/(1 - m a)) - 1`, the total length of the infinite-order string.
pub fn infinite_order_length(params: &CantorParams) -> f64 {
    (1.0 / (1.0 - params.ma())).exp_m1()
}

/// `ln` of [`infinite_order_length`], finite even when the length itself overflows.
pub fn ln_infinite_order_length(params: &CantorParams) -> f64 {
    let x = 1.0 / (1.0 - params.ma());
    // ln(e^x - 1) = x + ln(1 - e^{-x})
    x + (-(-x).exp_m1()).ln()
}

/// Default schedule of infinite-order atoms realizing a prescribed barrier.
///
/// `D_k = D_inf + (D_1 - D_inf) ratio^{k-1}`, `m_k = k + m_offset`,
/// `a_k = m_k^{-1/D_k}`, and the `k`-th part carries the weight `2^{-k} / L_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantorSchedule {
    pub d_infinity: f64,
    pub d1: f64,
    pub ratio: f64,
    pub m_offset: u32,
}

impl CantorSchedule {
    pub fn new(d_infinity: f64, d1: f64, ratio: f64, m_offset: u32) -> Result<Self> {
        let schedule = Self { d_infinity, d1, ratio, m_offset };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_infinity >= 0.0) {
            return Err(rejected(format!("D_inf = {} must be >= 0", self.d_infinity)));
        }
        if !(self.d_infinity < self.d1) {
            return Err(rejected(format!(
                "D_inf < D_1 violated ({} >= {})",
                self.d_infinity, self.d1
            )));
        }
        if !(self.d1 < 1.0) {
            return Err(rejected(format!("D_1 = {} must be < 1", self.d1)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(rejected(format!("schedule ratio {} must lie in (0, 1)", self.ratio)));
        }
        if self.m_offset < 1 {
            return Err(rejected("m_offset must be >= 1 so that m_1 >= 2"));
        }
        if !self.ln_length(1).is_finite() {
            return Err(rejected(format!("D_1 = {} is too close to 1 for double precision", self.d1)));
        }
        Ok(())
    }

    /// `D_k` for `k >= 1`.
    pub fn dimension(&self, k: u32) -> f64 {
        self.d_infinity + (self.d1 - self.d_infinity) * self.ratio.powi(k as i32 - 1)
    }

    pub fn m(&self, k: u32) -> u32 {
        k + self.m_offset
    }

    pub fn params(&self, k: u32) -> CantorParams {
        let m = self.m(k);
        CantorParams {
            m,
            ln_inv_a: (m as f64).ln() / self.dimension(k),
        }
    }

    /// `ln L_k`.
    pub fn ln_length(&self, k: u32) -> f64 {
        ln_infinite_order_length(&self.params(k))
    }

    /// `ln w_k = -k ln 2 - ln L_k`.
    pub fn ln_weight(&self, k: u32) -> f64 {
        -(k as f64) * std::f64::consts::LN_2 - self.ln_length(k)
    }

    pub fn weight(&self, k: u32) -> f64 {
        self.ln_weight(k).exp()
    }

    /// Upper bound on the largest length of every part with index `>= k`.
    pub fn envelope(&self, k: u32) -> f64 {
        // L_k > e - 1 and the largest length of each infinite-order atom is 1
        (-(k as f64) * std::f64::consts::LN_2).exp() / (std::f64::consts::E - 1.0)
    }

    /// Total length of the parts with index `> k`: exactly `2^{-k}`.
    pub fn tail_length(&self, k: u32) -> f64 {
        (-(k as f64) * std::f64::consts::LN_2).exp()
    }

    /// Oscillatory period `p_k = 2 pi / ln(1/a_k)`.
    pub fn period(&self, k: u32) -> f64 {
        self.params(k).period()
    }

    /// Largest `k` whose line `Re s = D_k` is `>= re` (`0` if none).
    pub fn last_index_at_or_right_of(&self, re: f64) -> u32 {
        if re <= self.d_infinity {
            return u32::MAX;
        }
        let mut k = 0;
        while self.dimension(k + 1) >= re {
            k += 1;
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn params_reject_invalid() {
        assert!(CantorParams::new(1, 0.2).is_err());
        assert!(CantorParams::new(2, 0.5).is_err());
        assert!(CantorParams::new(3, 0.0).is_err());
        assert!(CantorParams::new(2, 0.49).is_ok());
    }

    #[test]
    fn derived_quantities() {
        let p = CantorParams::new(2, 1.0 / 3.0).unwrap();
        assert!((p.dimension() - 0.630_929_753_571_457_4).abs() < 1e-12);
        assert!((p.period() - 5.719_201_734_760_253).abs() < 1e-9);
    }

    #[test]
    fn closed_form_values() {
        let p = CantorParams::new(2, 1.0 / 3.0).unwrap();
        let z1 = closed_form_zeta(&p, 1, c(1.0, 0.0)).unwrap();
        assert!((z1 - c(3.0, 0.0)).norm() < 1e-13);
        let z2 = closed_form_zeta(&p, 2, c(1.0, 0.0)).unwrap();
        assert!((z2 - c(9.0, 0.0)).norm() < 1e-12);
        let d = c(p.dimension(), 0.0);
        assert!(matches!(
            closed_form_zeta(&p, 1, d),
            Err(Error::SingularityProximity { .. })
        ));
    }

    #[test]
    fn cantor_string_values() {
        assert!((cantor_string_zeta(c(1.0, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        assert!((cantor_string_zeta(c(2.0, 0.0)).unwrap() - c(1.0 / 7.0, 0.0)).norm() < 1e-15);
        let d = 2f64.ln() / 3f64.ln();
        assert!(cantor_string_zeta(c(d, 0.0)).is_err());
        // relation to the self-similar closed form
        let p = CantorParams::new(2, 1.0 / 3.0).unwrap();
        let s = c(0.9, 2.3);
        let lhs = cantor_string_zeta(s).unwrap();
        let rhs = (-s * 3f64.ln()).exp() * closed_form_zeta(&p, 1, s).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn self_similar_values() {
        let z = self_similar_zeta(&[1.0 / 3.0, 1.0 / 3.0], c(1.0, 0.0)).unwrap();
        assert!((z - c(3.0, 0.0)).norm() < 1e-13);
        let z = self_similar_zeta(&[0.5], c(2.0, 0.0)).unwrap();
        assert!((z - c(4.0 / 3.0, 0.0)).norm() < 1e-14);
        let d = 2f64.ln() / 3f64.ln();
        assert!(self_similar_zeta(&[1.0 / 3.0, 1.0 / 3.0], c(d, 0.0)).is_err());
        assert!(self_similar_zeta(&[0.5, 0.5], c(2.0, 0.0)).is_err());
    }

    #[test]
    fn lattice_kinds() {
        let p = CantorParams::new(2, 1.0 / 3.0).unwrap();
        let l = singularity_lattice(&p, Some(3));
        assert_eq!(l.kind, SingularityKind::Pole { order: 3 });
        assert!((l.real_part - 0.630_929_8).abs() < 1e-7);
        assert!((l.period - 5.719_201_7).abs() < 1e-7);
        assert_eq!(singularity_lattice(&p, None).kind, SingularityKind::Essential);
    }

    #[test]
    fn infinite_order_lengths() {
        let p = CantorParams::new(2, 0.25).unwrap();
        // oracle: sum (1 - 1/2)^{-n} / n! to n = 30
        let mut oracle = 0.0;
        let mut term = 1.0;
        for n in 1..=30 {
            term *= 2.0 / n as f64;
            oracle += term;
        }
        assert!((infinite_order_length(&p) - oracle).abs() < 1e-12);
        assert!((infinite_order_length(&p) - 6.389_056_1).abs() < 1e-7);
        let tiny = CantorParams::new(2, 1e-9).unwrap();
        let e1 = std::f64::consts::E - 1.0;
        assert!(infinite_order_length(&tiny) > e1);
        assert!((infinite_order_length(&tiny) - e1).abs() < 1e-7);
    }

    #[test]
    fn laurent_coefficient_matches_numeric_limit() {
        for (m, a) in [(2u32, 1.0 / 3.0), (3, 0.2)] {
            let p = CantorParams::new(m, a).unwrap();
            for n in 1..=3 {
                let exact = laurent_principal(&p, n, 0).unwrap();
                for j in [0, 5] {
                    let limit = numeric_laurent_limit(&p, n, j, c(1.0, 0.0)).unwrap();
                    assert!((limit - exact).norm() / exact.norm() < 1e-8, "{m} {a} {n} {j}");
                }
            }
        }
        let p = CantorParams::new(2, 1.0 / 3.0).unwrap();
        assert!((laurent_principal(&p, 1, 0).unwrap().re - 1.0 / 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn periodicity() {
        let p = CantorParams::new(3, 0.2).unwrap();
        let s = c(0.9, 0.4);
        let shifted = s + c(0.0, p.period());
        let a = closed_form_zeta(&p, 2, s).unwrap();
        let b = closed_form_zeta(&p, 2, shifted).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn schedule_defaults() {
        let s = CantorSchedule::new(0.2, 0.5, 0.5, 1).unwrap();
        assert_eq!(s.dimension(1), 0.5);
        assert_eq!(s.dimension(2), 0.35);
        assert_eq!(s.m(1), 2);
        assert!((s.params(1).a() - 0.25).abs() < 1e-15);
        for k in 1..40 {
            assert!(s.period(k + 1) < s.period(k));
            assert!(s.weight(k) <= s.envelope(k));
        }
        assert!(CantorSchedule::new(0.5, 0.5, 0.5, 1).is_err());
        assert!(CantorSchedule::new(-0.1, 0.5, 0.5, 1).is_err());
    }
}
