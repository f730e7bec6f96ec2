//! Strings with prescribed abscissae of paramorphic continuation, meromorphic
//! continuation and absolute convergence.
//!
//! Given `0 <= D_inf < D_1 <= D < 1`, the core string is the countable union of
//! infinite-order Cantor strings `2^{-k} / L_k * L^{(m_k, a_k)}_inf` whose
//! dimensions `D_k` decrease from `D_1` to `D_inf`. Its zeta function has an
//! essential singularity lattice on every line `Re s = D_k`, and these lattices
//! accumulate on the barrier `Re s = D_inf`. When `D_1 < D`, one generalized
//! Cantor string of dimension `D` is added, contributing simple poles on
//! `Re s = D`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cantor_atoms::{CantorParams, CantorSchedule, SingularityKind};
use crate::error::{rejected, Error, Result};
use crate::string_core::StringExpr;

/// Number of schedule entries listed in serialized output.
pub const LISTED_INDICES: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionOptions {
    /// Ratio of the geometric `D_k` schedule.
    pub ratio: f64,
    /// `m_k = k + m_offset`.
    pub m_offset: u32,
    /// Multiplicity of the extra atom in case (ii).
    pub extra_m: u32,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        Self { ratio: 0.5, m_offset: 1, extra_m: 2 }
    }
}

/// Schedule values for one index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub k: u32,
    pub d: f64,
    pub m: u32,
    pub a: f64,
    pub ln_inv_a: f64,
    pub length: f64,
    pub weight: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrescribedString {
    pub d_infinity: f64,
    pub d1: f64,
    pub d: f64,
    pub options: ConstructionOptions,
    pub schedule: CantorSchedule,
    /// The first [`LISTED_INDICES`] entries of the schedule, for inspection.
    pub sequences: Vec<ScheduleEntry>,
    pub extra_atom: Option<CantorParams>,
    pub core: StringExpr,
    pub expr: StringExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    ExactByConstruction,
    NumericEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbscissaExactness {
    pub d_par: Exactness,
    pub d_mer: Exactness,
    pub d_abs: Exactness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbscissaReport {
    pub d_par: f64,
    pub d_mer: f64,
    pub d_abs: f64,
    pub exactness: AbscissaExactness,
    pub barrier: f64,
}

/// Singularity found inside a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub point: Complex64,
    pub kind: SingularityKind,
    /// Schedule index, or `None` for the extra atom.
    pub k: Option<u32>,
}

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl ComplexWindow {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let w = Self { re_min, re_max, im_min, im_max };
        if ![re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("window must be bounded".into()));
        }
        if !(re_min < re_max && im_min < im_max) {
            return Err(Error::InvalidArgument(format!(
                "window needs re_min < re_max and im_min < im_max, got {re_min}:{re_max}:{im_min}:{im_max}"
            )));
        }
        Ok(w)
    }

    pub fn contains(&self, s: Complex64) -> bool {
        s.re >= self.re_min && s.re <= self.re_max && s.im >= self.im_min && s.im <= self.im_max
    }
}

/// Builds the string realizing `D_par = D_inf`, `D_mer = D_1`, `D = d`.
pub fn construct(d_infinity: f64, d1: f64, d: f64, options: ConstructionOptions) -> Result<PrescribedString> {
    if ![d_infinity, d1, d].iter().all(|v| v.is_finite()) {
        return Err(rejected("D_inf, D_1 and D must be finite"));
    }
    if !(d_infinity >= 0.0) {
        return Err(rejected(format!("0 <= D_inf violated (D_inf = {d_infinity})")));
    }
    if !(d_infinity < d1) {
        return Err(rejected(format!("D_inf < D_1 violated (D_inf = {d_infinity}, D_1 = {d1})")));
    }
    if !(d1 <= d) {
        return Err(rejected(format!("D_1 <= D violated (D_1 = {d1}, D = {d})")));
    }
    if !(d < 1.0) {
        return Err(rejected(format!(
            "D < 1 violated (D = {d}); dimension 1 needs m a = 1, outside the Cantor atoms"
        )));
    }
    if options.extra_m < 2 {
        return Err(rejected("extra atom multiplicity must be >= 2"));
    }
    let schedule = CantorSchedule::new(d_infinity, d1, options.ratio, options.m_offset)?;
    let core = StringExpr::cantor_schedule(schedule)?;
    let (extra_atom, expr) = if d1 < d {
        let atom = CantorParams::from_dimension(options.extra_m, d)?;
        let expr = StringExpr::union(vec![core.clone(), StringExpr::GenCantor(atom)])?;
        (Some(atom), expr)
    } else {
        (None, core.clone())
    };
    let sequences = (1..=LISTED_INDICES)
        .map(|k| {
            let params = schedule.params(k);
            ScheduleEntry {
                k,
                d: schedule.dimension(k),
                m: schedule.m(k),
                a: params.a(),
                ln_inv_a: params.ln_inv_a(),
                length: schedule.ln_length(k).exp(),
                weight: schedule.weight(k),
                period: params.period(),
            }
        })
        .collect();
    Ok(PrescribedString { d_infinity, d1, d, options, schedule, sequences, extra_atom, core, expr })
}

/// Every singularity of the construction inside `window`.
pub fn singularities_in_window(p: &PrescribedString, window: ComplexWindow) -> Result<Vec<Singularity>> {
    let window = ComplexWindow::new(window.re_min, window.re_max, window.im_min, window.im_max)?;
    if window.re_min <= p.d_infinity {
        return Err(Error::InvalidArgument(format!(
            "window starts at Re s = {} which crosses the barrier Re s = {}",
            window.re_min, p.d_infinity
        )));
    }
    let mut out = Vec::new();
    let mut k = 1;
    while p.schedule.dimension(k) >= window.re_min {
        let dk = p.schedule.dimension(k);
        if dk <= window.re_max {
            let lattice = p.schedule.params(k).lattice(SingularityKind::Essential);
            for point in lattice.points_between(window.im_min, window.im_max) {
                out.push(Singularity { point, kind: SingularityKind::Essential, k: Some(k) });
            }
        }
        k += 1;
    }
    if let Some(atom) = &p.extra_atom {
        let lattice = atom.lattice(SingularityKind::Pole { order: 1 });
        if lattice.real_part >= window.re_min && lattice.real_part <= window.re_max {
            for point in lattice.points_between(window.im_min, window.im_max) {
                out.push(Singularity { point, kind: lattice.kind, k: None });
            }
        }
    }
    Ok(out)
}

pub fn report(p: &PrescribedString) -> AbscissaReport {
    AbscissaReport {
        d_par: p.d_infinity,
        d_mer: p.d1,
        d_abs: p.d,
        exactness: AbscissaExactness {
            d_par: Exactness::ExactByConstruction,
            d_mer: Exactness::ExactByConstruction,
            d_abs: Exactness::ExactByConstruction,
        },
        barrier: p.d_infinity,
    }
}

impl PrescribedString {
    /// Distance from `s` to the nearest singularity of the construction, for `Re s > D_inf`.
    pub fn distance_to_singularities(&self, s: Complex64) -> f64 {
        let mut best = f64::INFINITY;
        let mut k = 1;
        loop {
            let dk = self.schedule.dimension(k);
            // lines further left are at least this far away
            if s.re - dk > best || k > 1_000_000 {
                break;
            }
            if (dk - s.re).abs() < best {
                best = best.min(self.schedule.params(k).lattice(SingularityKind::Essential).distance(s));
            }
            k += 1;
        }
        if let Some(atom) = &self.extra_atom {
            best = best.min(atom.lattice(SingularityKind::Pole { order: 1 }).distance(s));
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one() {
        let p = construct(0.2, 0.5, 0.5, ConstructionOptions::default()).unwrap();
        assert!(p.extra_atom.is_none());
        assert_eq!(p.expr.total_length().unwrap(), 1.0);
        assert_eq!(p.sequences[0].d, 0.5);
        assert_eq!(p.sequences[1].d, 0.35);
        assert_eq!(p.sequences[0].m, 2);
        assert!((p.sequences[0].a - 0.25).abs() < 1e-15);
        let r = report(&p);
        assert_eq!((r.d_par, r.d_mer, r.d_abs, r.barrier), (0.2, 0.5, 0.5, 0.2));
    }

    #[test]
    fn case_two() {
        let p = construct(0.2, 0.5, 0.8, ConstructionOptions::default()).unwrap();
        let atom = p.extra_atom.unwrap();
        assert_eq!(atom.m(), 2);
        assert!((atom.a() - 0.420_448_207_626_856_9).abs() < 1e-12);
        let expected = 1.0 + 1.0 / (1.0 - 2.0 * atom.a());
        assert!((p.expr.total_length().unwrap() - expected).abs() < 1e-12);
        assert!((expected - 7.285_213_5).abs() < 1e-6);
    }

    #[test]
    fn rejections_name_the_inequality() {
        let err = construct(0.5, 0.5, 0.6, ConstructionOptions::default()).unwrap_err();
        assert!(err.to_string().contains("D_inf < D_1"));
        assert!(construct(0.2, 0.5, 1.0, ConstructionOptions::default()).is_err());
        assert!(construct(-0.1, 0.5, 0.6, ConstructionOptions::default()).is_err());
        assert!(construct(0.2, 0.6, 0.5, ConstructionOptions::default()).is_err());
    }

    #[test]
    fn window_examples() {
        let p = construct(0.2, 0.5, 0.5, ConstructionOptions::default()).unwrap();
        let w = ComplexWindow::new(0.45, 0.55, -1.0, 1.0).unwrap();
        let found = singularities_in_window(&p, w).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].point, Complex64::new(0.5, 0.0));
        assert!((p.schedule.period(1) - 2.0 * std::f64::consts::PI / 4f64.ln()).abs() < 1e-14);
        let w = ComplexWindow::new(0.9, 1.0, -1.0, 1.0).unwrap();
        assert!(singularities_in_window(&p, w).unwrap().is_empty());
        let w = ComplexWindow::new(0.1, 1.0, -1.0, 1.0).unwrap();
        assert!(singularities_in_window(&p, w).is_err());
    }

    #[test]
    fn accumulation_at_barrier() {
        let p = construct(0.2, 0.5, 0.5, ConstructionOptions::default()).unwrap();
        let counts: Vec<usize> = [0.1, 0.05, 0.02]
            .iter()
            .map(|delta| {
                let w = ComplexWindow::new(0.2 + delta, 0.5, 0.0, 1.0).unwrap();
                singularities_in_window(&p, w).unwrap().len()
            })
            .collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }

    #[test]
    fn nearest_singularity_distance() {
        let p = construct(0.2, 0.5, 0.8, ConstructionOptions::default()).unwrap();
        assert!(p.distance_to_singularities(Complex64::new(0.5, 0.0)) < 1e-15);
        let atom_point = Complex64::new(0.8, p.extra_atom.unwrap().period());
        assert!(p.distance_to_singularities(atom_point) < 1e-12);
        let d = p.distance_to_singularities(Complex64::new(0.6, 0.0));
        assert!((d - 0.1).abs() < 1e-12);
    }
}
