//! Certified evaluation of geometric zeta functions.
//!
//! Atoms use closed forms; infinite-order atoms and the barrier construction
//! are truncated series whose remainders are bounded rigorously (up to
//! floating-point rounding, which is tracked to first order). All bounds are
//! absolute.

use std::f64::consts::{E, LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cantor_atoms::{CantorParams, CantorSchedule, SingularityKind};
use crate::error::{Error, Result};
use crate::prescriber::PrescribedString;
use crate::string_core::{ln_biguint, CoefficientFamily, StringExpr, WeightedParts};

/// Evaluations closer than this to a known singularity are refused.
pub const SINGULARITY_GUARD: f64 = 1e-6;

/// Hard cap on the number of terms of any truncated series.
pub const MAX_SERIES_TERMS: u64 = 200_000;

/// Most parts of a barrier construction summed explicitly.
pub const MAX_SCHEDULE_PARTS: u32 = 1 << 16;

const EPS: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: Complex64,
    /// Absolute bound on `|true value - value|`.
    pub error_bound: f64,
    pub terms_used: u64,
    /// False when some part of the bound is heuristic.
    pub certified: bool,
}

impl EvalResult {
    fn exact(value: Complex64, error_bound: f64) -> Self {
        Self { value, error_bound, terms_used: 1, certified: true }
    }
}

fn check_point(s: Complex64, tol: f64) -> Result<()> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("s = {s} is not finite")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if s.re <= 0.0 {
        return Err(Error::OutsideHalfPlane {
            s,
            abscissa: 0.0,
            context: "geometric zeta functions are evaluated only for Re s > 0".into(),
        });
    }
    Ok(())
}

fn guard_lattice(params: &CantorParams, s: Complex64, kind: SingularityKind) -> Result<()> {
    let lattice = params.lattice(kind);
    let nearest = lattice.nearest(s);
    let distance = (s - nearest).norm();
    if distance < SINGULARITY_GUARD {
        return Err(Error::SingularityProximity {
            s,
            nearest,
            distance,
            context: format!(
                "singularity lattice {:.12} + {:.12} i Z of the atom (m = {}, a = {:e})",
                lattice.real_part,
                lattice.period,
                params.m(),
                params.a()
            ),
        });
    }
    Ok(())
}

/// First-order bound on the rounding error of `params.denominator(s)`.
fn denominator_error(params: &CantorParams, s: Complex64) -> f64 {
    let ma_sigma = ((params.m() as f64).ln() - s.re * params.ln_inv_a()).exp();
    if ma_sigma == 0.0 {
        return 2.0 * EPS;
    }
    EPS * (2.0 + ma_sigma * (4.0 + s.norm() * params.ln_inv_a()))
}

/// Evaluates `zeta_e(s)` to absolute accuracy about `tol`.
pub fn eval_zeta(e: &StringExpr, s: Complex64, tol: f64) -> Result<EvalResult> {
    check_point(s, tol)?;
    eval_inner(e, s, tol)
}

fn product_error(values: &[EvalResult]) -> f64 {
    let hi: f64 = values.iter().map(|v| v.value.norm() + v.error_bound).product();
    let lo: f64 = values.iter().map(|v| v.value.norm()).product();
    (hi - lo) + 2.0 * values.len() as f64 * EPS * lo
}

fn scaled(gamma: f64, inner: EvalResult, s: Complex64) -> EvalResult {
    let ln_gamma = gamma.ln();
    let factor = (s * ln_gamma).exp();
    let value = factor * inner.value;
    let rounding = value.norm() * EPS * (4.0 + (s * ln_gamma).norm());
    EvalResult {
        value,
        error_bound: factor.norm() * inner.error_bound + rounding,
        terms_used: inner.terms_used,
        certified: inner.certified,
    }
}

fn summed(parts: impl IntoIterator<Item = EvalResult>) -> EvalResult {
    let mut out = EvalResult { value: Complex64::new(0.0, 0.0), error_bound: 0.0, terms_used: 0, certified: true };
    let mut magnitude = 0.0;
    let mut count = 0.0;
    for p in parts {
        out.value += p.value;
        out.error_bound += p.error_bound;
        out.terms_used += p.terms_used;
        out.certified &= p.certified;
        magnitude += p.value.norm();
        count += 1.0;
    }
    out.error_bound += count * EPS * magnitude;
    out
}

fn eval_inner(e: &StringExpr, s: Complex64, tol: f64) -> Result<EvalResult> {
    match e {
        StringExpr::Explicit { terms } => {
            let mut value = Complex64::new(0.0, 0.0);
            let mut rounding = 0.0;
            for t in terms {
                let ln_l = t.length.ln();
                let term = (s * ln_l + ln_biguint(&t.multiplicity)).exp();
                value += term;
                rounding += term.norm() * EPS * (4.0 + (s * ln_l).norm() + terms.len() as f64);
            }
            Ok(EvalResult { value, error_bound: rounding, terms_used: terms.len() as u64, certified: true })
        }
        StringExpr::SelfSimilar { ratios } => {
            let mut sum = Complex64::new(0.0, 0.0);
            let mut den_error = EPS;
            for r in ratios {
                let t = (s * r.ln()).exp();
                sum += t;
                den_error += t.norm() * EPS * (3.0 + (s * r.ln()).norm());
            }
            let den = Complex64::new(1.0, 0.0) - sum;
            if den.norm() < 1e-12 {
                return Err(Error::SingularityProximity {
                    s,
                    nearest: s,
                    distance: 0.0,
                    context: format!("|1 - sum r_j^s| = {:.3e}", den.norm()),
                });
            }
            let value = den.inv();
            let v = value.norm();
            Ok(EvalResult::exact(value, v * v * den_error + 2.0 * EPS * v))
        }
        StringExpr::GenCantor(p) => eval_cantor_power(p, 1, s),
        StringExpr::Power { base, n } => {
            if let StringExpr::GenCantor(p) = base.as_ref() {
                return eval_cantor_power(p, *n, s);
            }
            let b = eval_inner(base, s, tol / (*n as f64 * 4.0))?;
            let value = b.value.powu(*n);
            let copies = vec![b; *n as usize];
            Ok(EvalResult { value, error_bound: product_error(&copies), terms_used: b.terms_used, certified: b.certified })
        }
        StringExpr::Tensor { factors } => {
            let k = factors.len() as f64;
            let values = factors
                .iter()
                .map(|f| eval_inner(f, s, tol / (4.0 * k)))
                .collect::<Result<Vec<_>>>()?;
            let value = values.iter().map(|v| v.value).product();
            Ok(EvalResult {
                value,
                error_bound: product_error(&values),
                terms_used: values.iter().map(|v| v.terms_used).sum(),
                certified: values.iter().all(|v| v.certified),
            })
        }
        StringExpr::InfiniteOrder(p) => eval_infinite_order(p, s, tol),
        StringExpr::Scale { gamma, inner } => {
            let factor = (s.re * gamma.ln()).exp();
            let inner = eval_inner(inner, s, tol / factor.max(1e-300))?;
            Ok(scaled(*gamma, inner, s))
        }
        StringExpr::Union { parts } => {
            let k = parts.len() as f64;
            let values = parts.iter().map(|p| eval_inner(p, s, tol / k)).collect::<Result<Vec<_>>>()?;
            Ok(summed(values))
        }
        StringExpr::WeightedUnion { parts } => match parts {
            WeightedParts::Finite(parts) => {
                let k = parts.len() as f64;
                let mut values = Vec::with_capacity(parts.len());
                for p in parts {
                    let factor = (s.re * p.weight.ln()).exp();
                    let inner = eval_inner(&p.part, s, tol / (k * factor.max(1e-300)))?;
                    values.push(scaled(p.weight, inner, s));
                }
                Ok(summed(values))
            }
            WeightedParts::Cantor(schedule) => eval_schedule(schedule, s, tol),
        },
        StringExpr::SeriesLift { family, inner } => eval_series_lift(family, inner, s, tol),
    }
}

fn eval_cantor_power(p: &CantorParams, n: u32, s: Complex64) -> Result<EvalResult> {
    guard_lattice(p, s, SingularityKind::Pole { order: n })?;
    let den = p.denominator(s);
    if den.norm() < crate::cantor_atoms::LATTICE_DENOMINATOR_GUARD {
        return Err(Error::SingularityProximity {
            s,
            nearest: p.nearest_lattice_point(s),
            distance: (s - p.nearest_lattice_point(s)).norm(),
            context: format!("|1 - m a^s| = {:.3e}", den.norm()),
        });
    }
    let value = den.inv().powu(n);
    // relative error of 1/den is about den_error/|den|; raising to n multiplies it by n
    let rel = denominator_error(p, s) / den.norm();
    let error = value.norm() * (((1.0 + rel).powi(n as i32) - 1.0) + 2.0 * n as f64 * EPS);
    Ok(EvalResult::exact(value, error))
}

/// `sum_{n >= 1} (1 - m a^s)^{-n} / (n!)^s`, the zeta function of the infinite-order string.
///
/// The remainder after `N` terms is bounded by `b_{N+1} / (1 - rho)` where
/// `b_n = eps^{-n} / (n!)^{Re s}`, `eps` is a certified lower bound on
/// `|1 - m a^s|` and `rho = eps^{-1} / (N+2)^{Re s}`.
pub fn eval_infinite_order(params: &CantorParams, s: Complex64, tol: f64) -> Result<EvalResult> {
    check_point(s, tol)?;
    guard_lattice(params, s, SingularityKind::Essential)?;
    let den = params.denominator(s);
    let eps_lower = den.norm() - 4.0 * denominator_error(params, s);
    if !(den.norm() >= crate::cantor_atoms::LATTICE_DENOMINATOR_GUARD && eps_lower > 0.0) {
        let nearest = params.nearest_lattice_point(s);
        return Err(Error::SingularityProximity {
            s,
            nearest,
            distance: (s - nearest).norm(),
            context: format!("|1 - m a^s| = {:.3e} cannot be bounded away from 0", den.norm()),
        });
    }
    let sigma = s.re;
    let x = 1.0 / eps_lower;
    let ln_x = x.ln();
    let q = den.inv();
    let rel_q = 4.0 * denominator_error(params, s) / den.norm();

    let mut value = Complex64::new(0.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut rel = 0.0;
    let mut rounding = 0.0;
    let mut ln_b = 0.0;
    let mut n: u64 = 0;
    loop {
        n += 1;
        let ln_n = (n as f64).ln();
        term = term * q / (s * ln_n).exp();
        ln_b += ln_x - sigma * ln_n;
        if ln_b > 700.0 {
            return Err(Error::Overflow(format!(
                "terms of the infinite-order series at s = {s} exceed double range (|1 - m a^s| = {:.3e})",
                den.norm()
            )));
        }
        value += term;
        rel += rel_q + EPS * (4.0 + s.norm() * ln_n);
        rounding += term.norm() * rel;
        // b_{n+1} and the ratio bound for all later terms
        let ln_next = ln_b + ln_x - sigma * ((n + 1) as f64).ln();
        let rho = (ln_x - sigma * ((n + 2) as f64).ln()).exp();
        if rho < 1.0 {
            let tail = ln_next.exp() / (1.0 - rho);
            if tail <= tol {
                let rounding = 1.01 * rounding + EPS * n as f64 * value.norm();
                return Ok(EvalResult { value, error_bound: tail + rounding, terms_used: n, certified: true });
            }
        }
        if n >= MAX_SERIES_TERMS {
            return Err(Error::Uncertified(format!(
                "infinite-order series at s = {s} needs more than {MAX_SERIES_TERMS} terms"
            )));
        }
    }
}

/// Upper bound on `sum_{n >= 1} eps^{-n} / (n!)^sigma`, or `None` if it cannot be summed.
pub(crate) fn inner_series_bound(eps: f64, sigma: f64) -> Option<f64> {
    if !(eps > 0.0 && sigma > 0.0) {
        return None;
    }
    let ln_x = -eps.ln();
    let mut sum = 0.0;
    let mut ln_b = 0.0;
    for n in 1..=MAX_SERIES_TERMS {
        ln_b += ln_x - sigma * (n as f64).ln();
        if ln_b > 700.0 {
            return None;
        }
        sum += ln_b.exp();
        let rho = (ln_x - sigma * ((n + 2) as f64).ln()).exp();
        if rho < 1.0 {
            let next = (ln_b + ln_x - sigma * ((n + 1) as f64).ln()).exp();
            let tail = next / (1.0 - rho);
            if tail <= 1e-3 * sum {
                return Some((sum + tail) * (1.0 + 1e-12));
            }
        }
    }
    None
}

/// Bound on the contribution of the schedule parts with index `> k`.
fn schedule_tail(schedule: &CantorSchedule, k: u32, sigma: f64) -> Option<f64> {
    let next = k + 1;
    let d = schedule.dimension(next);
    if !(d < sigma) {
        return None;
    }
    // 1 - m^{1 - sigma/D}, which only grows with the index once D_k < sigma
    let eps = -((schedule.m(next) as f64).ln() * (1.0 - sigma / d)).exp_m1();
    let inner = inner_series_bound(eps, sigma)?;
    let geometric = (-(next as f64) * sigma * LN_2).exp() / (-(-sigma * LN_2).exp_m1());
    Some(inner * (E - 1.0).powf(-sigma) * geometric)
}

fn eval_schedule(schedule: &CantorSchedule, s: Complex64, tol: f64) -> Result<EvalResult> {
    let sigma = s.re;
    if sigma <= schedule.d_infinity {
        return Err(Error::OutsideHalfPlane {
            s,
            abscissa: schedule.d_infinity,
            context: "the construction has a paramorphic barrier at Re s = D_inf".into(),
        });
    }
    let mut k = schedule.last_index_at_or_right_of(sigma).max(1);
    let tail = loop {
        match schedule_tail(schedule, k, sigma) {
            Some(t) if t <= tol / 2.0 => break t,
            // the inner bound only shrinks with the index, so the geometric factor
            // 2^{-k sigma} alone says how far to jump; at most doubling, since the
            // inner bound often drops much faster
            Some(t) => {
                let jump = ((t / (tol / 2.0)).ln() / (sigma * LN_2)).ceil().clamp(1.0, k as f64);
                k += jump as u32;
            }
            None => k = k.saturating_mul(2),
        }
        if k > MAX_SCHEDULE_PARTS {
            return Err(Error::Uncertified(format!(
                "the tail of the construction at s = {s} cannot be bounded below {tol:e} \
                 with {MAX_SCHEDULE_PARTS} parts"
            )));
        }
    };
    let mut parts = Vec::with_capacity(k as usize);
    for j in 1..=k {
        let ln_w = schedule.ln_weight(j);
        let magnitude = (sigma * ln_w).exp();
        let tol_j = (tol / (2.0 * k as f64 * magnitude.max(1e-300))).min(1e300);
        let inner = eval_infinite_order(&schedule.params(j), s, tol_j)?;
        let factor = (s * ln_w).exp();
        let value = factor * inner.value;
        parts.push(EvalResult {
            value,
            error_bound: magnitude * inner.error_bound + value.norm() * EPS * (4.0 + (s * ln_w).norm()),
            terms_used: inner.terms_used,
            certified: inner.certified,
        });
    }
    let mut out = summed(parts);
    out.error_bound += tail;
    out.terms_used += k as u64;
    Ok(out)
}

fn eval_series_lift(family: &CoefficientFamily, inner: &StringExpr, s: Complex64, tol: f64) -> Result<EvalResult> {
    let sigma = s.re;
    let z = eval_inner(inner, s, tol * 1e-3)?;
    let abs_z = z.value.norm();
    let x_hi = abs_z + z.error_bound;
    let mut value = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    let (mut hi, mut lo, mut magnitude) = (0.0, 0.0, 0.0);
    let mut n: u32 = 0;
    loop {
        let ln_c = family.ln_coefficient(n);
        if ln_c > f64::NEG_INFINITY {
            let term = (s * ln_c).exp() * power;
            value += term;
            magnitude += term.norm() * (1.0 + n as f64);
            hi += (sigma * ln_c + n as f64 * x_hi.ln()).exp();
            lo += (sigma * ln_c + n as f64 * abs_z.ln()).exp();
        }
        if let Some(tail) = family.tail_bound(n, sigma, x_hi) {
            if tail <= tol / 2.0 {
                let propagated = (hi - lo).max(0.0);
                let rounding = 4.0 * EPS * magnitude;
                return Ok(EvalResult {
                    value,
                    error_bound: propagated + tail + rounding,
                    terms_used: z.terms_used + n as u64 + 1,
                    certified: z.certified,
                });
            }
        }
        n += 1;
        power *= z.value;
        if n as u64 > MAX_SERIES_TERMS {
            return Err(Error::Uncertified(format!(
                "the {} series of zeta values at s = {s} (|zeta| = {abs_z:.3e}) has no certified tail",
                family.name()
            )));
        }
    }
}

/// Evaluates the zeta function of a barrier construction.
pub fn eval_constructed(p: &PrescribedString, s: Complex64, tol: f64) -> Result<EvalResult> {
    check_point(s, tol)?;
    if s.re <= p.d_infinity {
        return Err(Error::OutsideHalfPlane {
            s,
            abscissa: p.d_infinity,
            context: "left of the paramorphic barrier".into(),
        });
    }
    eval_zeta(&p.expr, s, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, s: Complex64) -> bool {
        (s - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonCase {
    /// The binding constraint comes from lines to the right of the disk.
    A1,
    /// The binding constraint comes from lines to the left of the disk.
    A2,
    /// The disk straddles one line.
    B,
    /// The disk lies right of every line.
    C,
}

/// A lower bound `epsilon <= |1 - m_k a_k^s|` valid for every `k` and every `s` in a disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub disk: Disk,
    pub epsilon: f64,
    pub case_tag: EpsilonCase,
    pub covered: String,
    /// Index of the line crossing the disk, if any.
    pub crossing: Option<u32>,
}

fn disk_rejected(msg: String) -> Error {
    Error::DiskRejected(msg)
}

/// Lower bound on `min |1 - m a^s|` over a closed disk avoiding the zeros.
///
/// The function is entire and zero-free on the disk, so its minimum modulus is
/// attained on the boundary circle. The circle is sampled and the sampling gap
/// is covered by a Lipschitz bound.
fn disk_minimum(params: &CantorParams, disk: Disk) -> Option<f64> {
    let re_min = disk.center.re - disk.radius;
    let lip = params.ln_inv_a() * ((params.m() as f64).ln() - re_min * params.ln_inv_a()).exp();
    let at = |theta: f64| params.denominator(disk.center + Complex64::from_polar(disk.radius, theta)).norm();
    let mut samples = 1024usize;
    while samples <= 1 << 20 {
        let h = 2.0 * PI / samples as f64;
        let (best_i, best) = (0..samples)
            .map(|i| (i, at(i as f64 * h)))
            .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        let lower = best - lip * disk.radius * h / 2.0;
        if lower > 0.0 {
            // golden-section refinement of the best sample
            let (mut a, mut b) = ((best_i as f64 - 1.0) * h, (best_i as f64 + 1.0) * h);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if at(c) < at(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let refined = at(0.5 * (a + b)).min(best);
            return Some((0.9 * refined).min(lower));
        }
        samples *= 4;
    }
    None
}

/// Certifies `|1 - m_k a_k^s| >= epsilon` on `disk` for every index of `schedule`.
pub fn epsilon_bound(schedule: &CantorSchedule, disk: Disk) -> Result<EpsilonCertificate> {
    if !(disk.radius > 0.0 && disk.radius.is_finite() && disk.center.re.is_finite() && disk.center.im.is_finite()) {
        return Err(disk_rejected(format!("disk radius {} must be positive and finite", disk.radius)));
    }
    let re_min = disk.center.re - disk.radius;
    let re_max = disk.center.re + disk.radius;
    if re_min <= schedule.d_infinity {
        return Err(disk_rejected(format!(
            "disk reaches Re s = {re_min}, not right of the barrier {}",
            schedule.d_infinity
        )));
    }
    let mut right = Vec::new();
    let mut crossing = Vec::new();
    let mut k = 1;
    while schedule.dimension(k) >= re_min {
        if schedule.dimension(k) > re_max {
            right.push(k);
        } else {
            crossing.push(k);
        }
        k += 1;
    }
    let left = k;
    if crossing.len() > 1 {
        return Err(disk_rejected(format!("disk meets {} lines Re s = D_k", crossing.len())));
    }
    let power = |k: u32, re: f64| (schedule.m(k) as f64).ln() * (1.0 - re / schedule.dimension(k));
    let eps1 = right.iter().map(|&k| power(k, re_max).exp_m1()).fold(f64::INFINITY, f64::min);
    let eps2 = -power(left, re_min).exp_m1();
    let mut epsilon = eps1.min(eps2);
    let tag;
    if let Some(&kc) = crossing.first() {
        let params = schedule.params(kc);
        let lattice = params.lattice(SingularityKind::Essential);
        let nearest = lattice.nearest(disk.center);
        if (nearest - disk.center).norm() <= disk.radius {
            return Err(disk_rejected(format!("disk contains the singularity {nearest}")));
        }
        let eps_b = disk_minimum(&params, disk)
            .ok_or_else(|| disk_rejected(format!("disk passes too close to the lattice of k = {kc}")))?;
        epsilon = epsilon.min(eps_b);
        tag = EpsilonCase::B;
    } else if right.is_empty() {
        tag = EpsilonCase::C;
    } else if eps1 <= eps2 {
        tag = EpsilonCase::A1;
    } else {
        tag = EpsilonCase::A2;
    }
    if !(epsilon > 0.0) {
        return Err(disk_rejected(format!("no positive lower bound (epsilon = {epsilon:e})")));
    }
    Ok(EpsilonCertificate {
        disk,
        epsilon,
        case_tag: tag,
        covered: "all k >= 1".into(),
        crossing: crossing.first().copied(),
    })
}
