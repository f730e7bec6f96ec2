//! Distance zeta functions `zeta_A(s) = int_{A_delta} d(x, A)^{s - N} dx` of
//! bounded sets in `R^N`.
//!
//! Sets are built from canonical realizations of fractal strings, generalized
//! Cantor sets, grills `A x [0,1]^e`, flat embeddings `A x {0}^q`, translations
//! and unions. The one-dimensional realization has a closed form in terms of
//! the geometric zeta function; grills reduce to it plus a flat term that is
//! estimated by stratified Monte Carlo.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cantor_atoms::{CantorParams, SingularityKind};
use crate::dimension::exact_abscissa;
use crate::error::{rejected, Error, Result};
use crate::prescriber::{construct, singularities_in_window, ComplexWindow, ConstructionOptions, PrescribedString, Singularity};
use crate::string_core::{enumerate_lengths, EnumerationCutoff, StringExpr};
use crate::zeta_eval::eval_zeta;

/// Smallest accepted Monte Carlo budget.
pub const MIN_SAMPLES: u64 = 1_000;

/// Cap on the number of coalesced gap blocks materialized for a realization.
pub const MAX_BLOCKS: usize = 1 << 16;

/// Gap along the first axis between translated parts of a constructed union.
const PART_SEPARATION: f64 = 4.0;

const ZETA_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeometricSet {
    /// Points `a_k = sum_{j >= k} l_j` together with their limit 0.
    Realization { of: StringExpr },
    /// `C^(m,a)` in `[0,1]`: `m` copies scaled by `a` with equal gaps.
    GenCantorSet(CantorParams),
    /// `base x [0,1]^extra_dims` for a base in `R`.
    Grill { base: Box<GeometricSet>, extra_dims: u32 },
    /// `base x {0}^zero_dims`.
    EmbeddedFlat { base: Box<GeometricSet>, zero_dims: u32 },
    UnionSet { parts: Vec<GeometricSet> },
    Translated { base: Box<GeometricSet>, offset: Vec<f64> },
}

impl GeometricSet {
    pub fn realization(of: StringExpr) -> Self {
        GeometricSet::Realization { of }
    }

    pub fn grill(base: GeometricSet, extra_dims: u32) -> Result<Self> {
        let g = GeometricSet::Grill { base: Box::new(base), extra_dims };
        g.validate()?;
        Ok(g)
    }

    pub fn flat(base: GeometricSet, zero_dims: u32) -> Result<Self> {
        let g = GeometricSet::EmbeddedFlat { base: Box::new(base), zero_dims };
        g.validate()?;
        Ok(g)
    }

    pub fn union(parts: Vec<GeometricSet>) -> Result<Self> {
        let g = GeometricSet::UnionSet { parts };
        g.validate()?;
        Ok(g)
    }

    pub fn translated(base: GeometricSet, offset: Vec<f64>) -> Result<Self> {
        let g = GeometricSet::Translated { base: Box::new(base), offset };
        g.validate()?;
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GeometricSet =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad set JSON: {e}")))?;
        g.validate()?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sets serialize")
    }

    /// Dimension of the ambient space.
    pub fn ambient(&self) -> u32 {
        match self {
            GeometricSet::Realization { .. } | GeometricSet::GenCantorSet(_) => 1,
            GeometricSet::Grill { base, extra_dims } => base.ambient() + extra_dims,
            GeometricSet::EmbeddedFlat { base, zero_dims } => base.ambient() + zero_dims,
            GeometricSet::UnionSet { parts } => parts.first().map_or(0, GeometricSet::ambient),
            GeometricSet::Translated { base, .. } => base.ambient(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GeometricSet::Realization { of } => of.validate(),
            GeometricSet::GenCantorSet(p) => {
                if p.m() < 2 {
                    return Err(rejected("Cantor set needs m >= 2"));
                }
                Ok(())
            }
            GeometricSet::Grill { base, extra_dims } => {
                base.validate()?;
                if *extra_dims == 0 {
                    return Err(rejected("grill needs extra_dims >= 1"));
                }
                if base.ambient() != 1 {
                    return Err(rejected(format!("grill base must lie in R, got R^{}", base.ambient())));
                }
                Ok(())
            }
            GeometricSet::EmbeddedFlat { base, zero_dims } => {
                base.validate()?;
                if *zero_dims == 0 {
                    return Err(rejected("flat embedding needs zero_dims >= 1"));
                }
                Ok(())
            }
            GeometricSet::UnionSet { parts } => {
                let Some(first) = parts.first() else {
                    return Err(rejected("union needs at least one part"));
                };
                for p in parts {
                    p.validate()?;
                    if p.ambient() != first.ambient() {
                        return Err(rejected(format!(
                            "union parts live in R^{} and R^{}",
                            first.ambient(),
                            p.ambient()
                        )));
                    }
                }
                Ok(())
            }
            GeometricSet::Translated { base, offset } => {
                base.validate()?;
                if offset.len() != base.ambient() as usize {
                    return Err(rejected(format!(
                        "offset has {} coordinates for a set in R^{}",
                        offset.len(),
                        base.ambient()
                    )));
                }
                if offset.iter().any(|v| !v.is_finite()) {
                    return Err(rejected("offset must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Minkowski dimension, which is also the abscissa of convergence of `zeta_A`.
    pub fn dimension(&self) -> Result<f64> {
        Ok(match self {
            GeometricSet::Realization { of } => exact_abscissa(of)?.value,
            GeometricSet::GenCantorSet(p) => p.dimension(),
            GeometricSet::Grill { base, extra_dims } => base.dimension()? + *extra_dims as f64,
            GeometricSet::EmbeddedFlat { base, .. } | GeometricSet::Translated { base, .. } => base.dimension()?,
            GeometricSet::UnionSet { parts } => {
                let mut d = 0.0f64;
                for p in parts {
                    d = d.max(p.dimension()?);
                }
                d
            }
        })
    }

    /// Materializes the geometry needed for distance queries.
    pub fn prepare(&self) -> Result<PreparedSet> {
        self.validate()?;
        Ok(match self {
            GeometricSet::Realization { of } => PreparedSet::Realization(Arc::new(RealizationGeometry::new(of)?)),
            GeometricSet::GenCantorSet(p) => PreparedSet::Cantor(CantorGeometry::new(p)),
            GeometricSet::Grill { base, extra_dims } => PreparedSet::Grill(Box::new(base.prepare()?), *extra_dims),
            GeometricSet::EmbeddedFlat { base, zero_dims } => {
                PreparedSet::Flat(Box::new(base.prepare()?), *zero_dims)
            }
            GeometricSet::UnionSet { parts } => {
                PreparedSet::Union(parts.iter().map(GeometricSet::prepare).collect::<Result<_>>()?)
            }
            GeometricSet::Translated { base, offset } => {
                PreparedSet::Translated(Box::new(base.prepare()?), offset.clone())
            }
        })
    }
}

/// Neighborhood radius of a distance zeta function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DZetaParams {
    pub delta: f64,
}

impl DZetaParams {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { delta })
    }

    /// `delta = l_1`, which satisfies the shift formula's `delta > l_1 / 2`.
    pub fn default_for(e: &StringExpr) -> Self {
        Self { delta: e.largest_length() }
    }

    pub fn shift_ready(&self, e: &StringExpr) -> bool {
        self.delta > 0.5 * e.largest_length()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be positive")));
    }
    Ok(())
}

fn check_shift_delta(e: &StringExpr, delta: f64) -> Result<()> {
    check_delta(delta)?;
    let l1 = e.largest_length();
    if delta <= 0.5 * l1 {
        return Err(Error::InvalidArgument(format!("delta = {delta} must exceed l_1 / 2 = {}", 0.5 * l1)));
    }
    Ok(())
}

/// One run of equal gaps in the realization, listed from the right end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBlock {
    pub length: f64,
    pub count: f64,
    /// Total width `count * length`.
    pub width: f64,
    /// Right end of the run; the left end is `right - width`.
    pub right: f64,
}

/// The realization `{a_k}` as runs of equal gaps plus an unresolved tail `[0, tail]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationGeometry {
    pub blocks: Vec<GapBlock>,
    pub tail: f64,
    /// `a_1`, the right end of the set.
    pub total: f64,
}

impl RealizationGeometry {
    pub fn new(e: &StringExpr) -> Result<Self> {
        let mut raw = Vec::new();
        let mut prefix = 0.0;
        let mut exhausted = true;
        for term in enumerate_lengths(e, EnumerationCutoff::MaxTerms(MAX_BLOCKS + 1))? {
            if raw.len() == MAX_BLOCKS {
                exhausted = false;
                break;
            }
            let count = term.multiplicity_f64();
            let width = if count < 9.0e15 { count * term.length } else { term.mass() };
            prefix += width;
            raw.push((term.length, count, width));
        }
        // below the cut the remaining mass is only known as a difference
        let tail = if exhausted { 0.0 } else { (e.total_length()? - prefix).max(0.0) };
        // right ends as suffix sums, so deep runs keep full relative accuracy
        let mut blocks = vec![GapBlock { length: 0.0, count: 0.0, width: 0.0, right: 0.0 }; raw.len()];
        let mut right = tail;
        for (i, &(length, count, width)) in raw.iter().enumerate().rev() {
            right += width;
            blocks[i] = GapBlock { length, count, width, right };
        }
        Ok(Self { total: right, blocks, tail })
    }

    /// Length of the smallest materialized gap.
    pub fn smallest_gap(&self) -> f64 {
        self.blocks.last().map_or(0.0, |b| b.length)
    }

    /// Distance from `x` to the set.
    pub fn distance(&self, x: f64) -> f64 {
        if x >= self.total {
            return x - self.total;
        }
        if x <= 0.0 {
            return -x;
        }
        if x <= self.tail {
            return tail_distance(x, self.tail, self.smallest_gap());
        }
        let i = self.blocks.partition_point(|b| b.right - b.width > x).min(self.blocks.len() - 1);
        let b = &self.blocks[i];
        gap_distance((b.right - x).max(0.0), b.length)
    }
}

/// Distance to the nearest gap endpoint at offset `y` from the right end of a run.
fn gap_distance(y: f64, length: f64) -> f64 {
    let t = y - (y / length).floor() * length;
    t.min(length - t).max(0.0)
}

/// Conservative distance inside the unresolved tail: endpoints 0 and `tail`
/// are in the set and every remaining gap is shorter than `smallest`.
fn tail_distance(x: f64, tail: f64, smallest: f64) -> f64 {
    x.min(tail - x).min(0.5 * smallest).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CantorGeometry {
    m: u32,
    a: f64,
    step: f64,
}

impl CantorGeometry {
    fn new(p: &CantorParams) -> Self {
        let a = p.a();
        let gap = (1.0 - p.ma()) / (p.m() as f64 - 1.0);
        Self { m: p.m(), a, step: a + gap }
    }

    /// Distance by descending through the copy containing `x`.
    pub fn distance(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return -x;
        }
        if x >= 1.0 {
            return x - 1.0;
        }
        let (mut left, mut width) = (0.0f64, 1.0f64);
        for _ in 0..4096 {
            let i = (((x - left) / (self.step * width)).floor().max(0.0) as u64).min(self.m as u64 - 1);
            let start = left + i as f64 * self.step * width;
            let end = start + self.a * width;
            if x > end {
                let next = start + self.step * width;
                return (x - end).min(next - x).max(0.0);
            }
            if x < start {
                return (start - x).max(0.0);
            }
            left = start;
            width *= self.a;
            if width <= f64::EPSILON * left.max(f64::MIN_POSITIVE) || width < f64::MIN_POSITIVE {
                break;
            }
        }
        (x - left).min(left + width - x).max(0.0)
    }
}

/// A set with its geometry materialized.
#[derive(Debug, Clone)]
pub enum PreparedSet {
    Realization(Arc<RealizationGeometry>),
    Cantor(CantorGeometry),
    Grill(Box<PreparedSet>, u32),
    Flat(Box<PreparedSet>, u32),
    Union(Vec<PreparedSet>),
    Translated(Box<PreparedSet>, Vec<f64>),
}

impl PreparedSet {
    pub fn ambient(&self) -> usize {
        match self {
            PreparedSet::Realization(_) | PreparedSet::Cantor(_) => 1,
            PreparedSet::Grill(b, e) | PreparedSet::Flat(b, e) => b.ambient() + *e as usize,
            PreparedSet::Union(parts) => parts[0].ambient(),
            PreparedSet::Translated(b, _) => b.ambient(),
        }
    }

    /// Euclidean distance from `x` (of length `ambient()`) to the set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.distance_sq(x).sqrt()
    }

    fn distance_sq(&self, x: &[f64]) -> f64 {
        match self {
            PreparedSet::Realization(g) => g.distance(x[0]).powi(2),
            PreparedSet::Cantor(c) => c.distance(x[0]).powi(2),
            PreparedSet::Grill(b, _) => {
                let n = b.ambient();
                b.distance_sq(&x[..n]) + x[n..].iter().map(|&y| interval_gap(y).powi(2)).sum::<f64>()
            }
            PreparedSet::Flat(b, _) => {
                let n = b.ambient();
                b.distance_sq(&x[..n]) + x[n..].iter().map(|y| y * y).sum::<f64>()
            }
            PreparedSet::Union(parts) => parts.iter().map(|p| p.distance_sq(x)).fold(f64::INFINITY, f64::min),
            PreparedSet::Translated(b, offset) => {
                let shifted: Vec<f64> = x.iter().zip(offset).map(|(v, o)| v - o).collect();
                b.distance_sq(&shifted)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` of the set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            PreparedSet::Realization(g) => (vec![0.0], vec![g.total]),
            PreparedSet::Cantor(_) => (vec![0.0], vec![1.0]),
            PreparedSet::Grill(b, e) | PreparedSet::Flat(b, e) => {
                let (mut lo, mut hi) = b.bounding_box();
                let top = if matches!(self, PreparedSet::Grill(..)) { 1.0 } else { 0.0 };
                lo.extend(std::iter::repeat_n(0.0, *e as usize));
                hi.extend(std::iter::repeat_n(top, *e as usize));
                (lo, hi)
            }
            PreparedSet::Union(parts) => {
                let (mut lo, mut hi) = parts[0].bounding_box();
                for p in &parts[1..] {
                    let (l, h) = p.bounding_box();
                    for i in 0..lo.len() {
                        lo[i] = lo[i].min(l[i]);
                        hi[i] = hi[i].max(h[i]);
                    }
                }
                (lo, hi)
            }
            PreparedSet::Translated(b, offset) => {
                let (lo, hi) = b.bounding_box();
                (
                    lo.iter().zip(offset).map(|(v, o)| v + o).collect(),
                    hi.iter().zip(offset).map(|(v, o)| v + o).collect(),
                )
            }
        }
    }

    /// `(realization, cube dims, flat dims)` when the set is `A_L x [0,1]^e x {0}^q`.
    fn layered(&self) -> Option<(Arc<RealizationGeometry>, u32, u32)> {
        match self {
            PreparedSet::Realization(g) => Some((g.clone(), 0, 0)),
            PreparedSet::Grill(b, e) => match b.as_ref() {
                PreparedSet::Realization(g) => Some((g.clone(), *e, 0)),
                _ => None,
            },
            PreparedSet::Flat(b, q) => match b.as_ref() {
                PreparedSet::Realization(g) => Some((g.clone(), 0, *q)),
                PreparedSet::Grill(inner, e) => match inner.as_ref() {
                    PreparedSet::Realization(g) => Some((g.clone(), *e, *q)),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }
}

/// Distance from `y` to `[0, 1]`.
fn interval_gap(y: f64) -> f64 {
    if y < 0.0 {
        -y
    } else if y > 1.0 {
        y - 1.0
    } else {
        0.0
    }
}

/// `zeta_{A_L}(s)` for the realization of `e` in `R`, in closed form.
pub fn dzeta_line(e: &StringExpr, s: Complex64, delta: f64) -> Result<Complex64> {
    e.validate()?;
    check_shift_delta(e, delta)?;
    if s.norm() == 0.0 {
        return Err(Error::SingularityProximity {
            s,
            nearest: s,
            distance: 0.0,
            context: "s = 0 is a pole of the gap integrals".into(),
        });
    }
    let d = exact_abscissa(e)?.value;
    if s.re <= d {
        return Err(Error::OutsideHalfPlane { s, abscissa: d, context: "the distance zeta integral diverges".into() });
    }
    let zeta = eval_zeta(e, s, ZETA_TOL)?.value;
    let gaps = ((Complex64::new(1.0, 0.0) - s) * LN_2).exp() / s * zeta;
    let ends = 2.0 * (s * delta.ln()).exp() / s;
    Ok(gaps + ends)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: Complex64,
    /// `sqrt(Var Re + Var Im)` of the estimator.
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Which part of the neighborhood to integrate over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    All,
    /// Only points whose cube coordinates leave `[0,1]^e`.
    OutsideCube,
}

#[derive(Debug, Clone)]
enum FirstAxis {
    /// `d_1 = u`, `u` uniform on `[0, width)`.
    Outer { width: f64 },
    /// Several gap runs laid side by side.
    Runs { lengths: Vec<f64>, starts: Vec<f64>, width: f64 },
    Tail { width: f64, smallest: f64 },
}

impl FirstAxis {
    fn width(&self) -> f64 {
        match self {
            FirstAxis::Outer { width } | FirstAxis::Runs { width, .. } | FirstAxis::Tail { width, .. } => *width,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u = rng.random::<f64>() * self.width();
        match self {
            FirstAxis::Outer { .. } => u,
            FirstAxis::Runs { lengths, starts, .. } => {
                // gaps within a run are congruent, so only the position inside one gap
                // matters; drawing it afresh avoids reducing huge offsets modulo the gap
                let i = starts.partition_point(|&st| st <= u).saturating_sub(1);
                let t = lengths[i] * rng.random::<f64>();
                t.min(lengths[i] - t)
            }
            FirstAxis::Tail { width, smallest } => tail_distance(u, *width, *smallest),
        }
    }
}

#[derive(Debug, Clone)]
enum StratumKind {
    /// Uniform box, distance from the prepared set.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// First-axis strip of a layered set; `inside` keeps the cube coordinates in `[0,1]`.
    Layer { axis: FirstAxis, cube: u32, flat: u32, inside: bool },
}

#[derive(Debug, Clone)]
struct Stratum {
    volume: f64,
    kind: StratumKind,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: Complex64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: Complex64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += (delta.conj() * (v - self.mean)).re;
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }
}

struct Integrand<'a> {
    set: &'a PreparedSet,
    s_minus_n: Complex64,
    delta: f64,
}

impl Integrand<'_> {
    fn at_distance(&self, d: f64) -> Complex64 {
        if d <= 0.0 || d >= self.delta {
            return Complex64::new(0.0, 0.0);
        }
        (self.s_minus_n * d.ln()).exp()
    }

    fn draw(&self, stratum: &Stratum, rng: &mut ChaCha8Rng, x: &mut Vec<f64>) -> Complex64 {
        match &stratum.kind {
            StratumKind::Box { lo, hi } => {
                x.clear();
                x.extend(lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()));
                self.at_distance(self.set.distance(x))
            }
            StratumKind::Layer { axis, cube, flat, inside } => {
                let d1 = axis.sample(rng);
                let mut sq = d1 * d1;
                if !inside {
                    let mut outside = false;
                    for _ in 0..*cube {
                        let y = -self.delta + (1.0 + 2.0 * self.delta) * rng.random::<f64>();
                        let g = interval_gap(y);
                        outside |= g > 0.0;
                        sq += g * g;
                    }
                    if !outside && *cube > 0 {
                        // covered by the inside stratum
                        return Complex64::new(0.0, 0.0);
                    }
                }
                for _ in 0..*flat {
                    let z = self.delta * (2.0 * rng.random::<f64>() - 1.0);
                    sq += z * z;
                }
                self.at_distance(sq.sqrt())
            }
        }
    }

    fn run(&self, stratum: &Stratum, seed: u64, stream: u64, n: u64) -> Moments {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut x = Vec::with_capacity(self.set.ambient());
        let mut m = Moments::default();
        for _ in 0..n {
            m.push(self.draw(stratum, &mut rng, &mut x));
        }
        m
    }
}

fn layered_strata(
    g: &RealizationGeometry,
    cube: u32,
    flat: u32,
    delta: f64,
    region: Region,
    max_strata: usize,
) -> Vec<Stratum> {
    let parts = match (cube, region) {
        (0, _) => vec![true],
        (_, Region::All) => vec![true, false],
        (_, Region::OutsideCube) => vec![false],
    };
    let transverse = |inside: bool| {
        let c = if inside { 1.0 } else { (1.0 + 2.0 * delta).powi(cube as i32) };
        c * (2.0 * delta).powi(flat as i32)
    };
    let mut ratio = 2.0f64;
    loop {
        let mut axes = vec![FirstAxis::Outer { width: delta }, FirstAxis::Outer { width: delta }];
        if g.tail > 0.0 {
            axes.push(FirstAxis::Tail { width: g.tail, smallest: g.smallest_gap() });
        }
        let mut i = 0;
        while i < g.blocks.len() {
            let top = g.blocks[i].length;
            let (mut lengths, mut starts, mut width) = (Vec::new(), Vec::new(), 0.0);
            while i < g.blocks.len() && g.blocks[i].length * ratio >= top {
                lengths.push(g.blocks[i].length);
                starts.push(width);
                width += g.blocks[i].width;
                i += 1;
            }
            axes.push(FirstAxis::Runs { lengths, starts, width });
        }
        if axes.len() * parts.len() <= max_strata || !ratio.is_finite() {
            return axes
                .into_iter()
                .flat_map(|axis| {
                    parts.iter().map(move |&inside| Stratum {
                        volume: axis.width() * transverse(inside),
                        kind: StratumKind::Layer { axis: axis.clone(), cube, flat, inside },
                    })
                })
                .collect();
        }
        ratio *= ratio;
    }
}

fn box_strata(set: &PreparedSet, delta: f64, count: usize) -> Vec<Stratum> {
    let (mut lo, mut hi) = set.bounding_box();
    for v in &mut lo {
        *v -= delta;
    }
    for v in &mut hi {
        *v += delta;
    }
    let rest: f64 = lo[1..].iter().zip(&hi[1..]).map(|(l, h)| h - l).product();
    let step = (hi[0] - lo[0]) / count as f64;
    (0..count)
        .map(|i| {
            let (mut l, mut h) = (lo.clone(), hi.clone());
            l[0] = lo[0] + step * i as f64;
            h[0] = if i + 1 == count { hi[0] } else { lo[0] + step * (i + 1) as f64 };
            Stratum { volume: (h[0] - l[0]) * rest, kind: StratumKind::Box { lo: l, hi: h } }
        })
        .collect()
}

fn stratified_estimate(
    strata: &[Stratum],
    integrand: &Integrand,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let h = strata.len() as u64;
    let pilot_each = (n_samples / 10 / h).max(4);
    let pilot: Vec<Moments> = strata
        .par_iter()
        .enumerate()
        .map(|(i, st)| integrand.run(st, seed, 2 * i as u64, pilot_each))
        .collect();
    let scores: Vec<f64> = strata.iter().zip(&pilot).map(|(st, m)| st.volume * m.variance().sqrt()).collect();
    let total_score: f64 = scores.iter().sum();
    let total_volume: f64 = strata.iter().map(|s| s.volume).sum();
    let budget = n_samples.saturating_sub(pilot_each * h).saturating_sub(2 * h) as f64;
    let counts: Vec<u64> = strata
        .iter()
        .zip(&scores)
        .map(|(st, &score)| {
            let share = if total_score > 0.0 {
                0.9 * score / total_score + 0.1 * st.volume / total_volume
            } else {
                st.volume / total_volume
            };
            2 + (budget * share).floor() as u64
        })
        .collect();
    let main: Vec<Moments> = strata
        .par_iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (st, &n))| integrand.run(st, seed, 2 * i as u64 + 1, n))
        .collect();
    let mut value = Complex64::new(0.0, 0.0);
    let mut variance = 0.0;
    for (st, m) in strata.iter().zip(&main) {
        value += st.volume * m.mean;
        variance += st.volume * st.volume * m.variance() / m.n as f64;
    }
    if !(value.re.is_finite() && value.im.is_finite() && variance.is_finite()) {
        return Err(Error::Uncertified(format!(
            "Monte Carlo variance is not finite at s - N = {}; the integrand is too singular near the set",
            integrand.s_minus_n
        )));
    }
    Ok(McEstimate {
        value,
        stderr: variance.sqrt(),
        n_samples: pilot_each * h + counts.iter().sum::<u64>(),
        seed,
    })
}

fn check_budget(n_samples: u64) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("Monte Carlo needs at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

fn monte_carlo(set: &GeometricSet, s: Complex64, delta: f64, n_samples: u64, seed: u64, region: Region) -> Result<McEstimate> {
    check_delta(delta)?;
    check_budget(n_samples)?;
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("s = {s} is not finite")));
    }
    let dim = set.dimension()?;
    if s.re <= dim {
        return Err(Error::OutsideHalfPlane {
            s,
            abscissa: dim,
            context: "the distance zeta integral diverges left of the Minkowski dimension".into(),
        });
    }
    let prepared = set.prepare()?;
    let n = prepared.ambient();
    let max_strata = (n_samples / 40).max(1) as usize;
    let strata = match prepared.layered() {
        Some((g, cube, flat)) => layered_strata(&g, cube, flat, delta, region, max_strata),
        None => box_strata(&prepared, delta, max_strata.min(64)),
    };
    let integrand = Integrand { set: &prepared, s_minus_n: s - n as f64, delta };
    stratified_estimate(&strata, &integrand, n_samples, seed)
}

/// Stratified Monte Carlo estimate of `zeta_A(s)`.
///
/// Realization-based sets are stratified along the first axis by runs of
/// comparable gaps; other sets by slabs of the bounding box. A pilot pass sets
/// a Neyman allocation and the estimate uses only the second pass. Every
/// stratum draws from its own ChaCha8 stream, so results do not depend on the
/// thread count.
pub fn dzeta_monte_carlo(set: &GeometricSet, s: Complex64, delta: f64, n_samples: u64, seed: u64) -> Result<McEstimate> {
    monte_carlo(set, s, delta, n_samples, seed, Region::All)
}

/// Grill zeta split into its closed-form and statistical parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrillEstimate {
    pub value: Complex64,
    pub stderr: f64,
    /// Gap integrals over the strip plus its two end slabs.
    pub exact: Complex64,
    pub statistical: McEstimate,
}

/// `zeta_{A_L x [0,1]^{N-1}}(s)` from the shift formula.
///
/// The strip `[0, a_1] x [0,1]^{N-1}` contributes
/// `2^{N-s} / (s-N+1) zeta_L(s-N+1)` and the two end slabs contribute
/// `2 delta^{s-N+1} / (s-N+1)`. The rest of the neighborhood is estimated by
/// Monte Carlo: for `N = 2` it is the neighborhood of `A_L x {0}`, for larger
/// `N` it is integrated directly.
pub fn dzeta_grill(base: &StringExpr, n: u32, s: Complex64, delta: f64, n_samples: u64, seed: u64) -> Result<GrillEstimate> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grills need N >= 2, got {n}")));
    }
    base.validate()?;
    check_shift_delta(base, delta)?;
    check_budget(n_samples)?;
    let shift = (n - 1) as f64;
    let w = s - shift;
    if w.norm() == 0.0 {
        return Err(Error::SingularityProximity {
            s,
            nearest: Complex64::new(shift, 0.0),
            distance: 0.0,
            context: "s = N - 1 is a pole of the shift formula prefactor".into(),
        });
    }
    let d = exact_abscissa(base)?.value;
    if s.re <= d + shift {
        return Err(Error::OutsideHalfPlane {
            s,
            abscissa: d + shift,
            context: "the grill zeta integral diverges".into(),
        });
    }
    let zeta = eval_zeta(base, w, ZETA_TOL)?.value;
    let strip = ((n as f64 - s) * LN_2).exp() / w * zeta;
    let ends = 2.0 * (w * delta.ln()).exp() / w;
    let exact = strip + ends;
    let realization = GeometricSet::realization(base.clone());
    let statistical = if n == 2 {
        monte_carlo(&GeometricSet::flat(realization, 1)?, s, delta, n_samples, seed, Region::All)?
    } else {
        monte_carlo(&GeometricSet::grill(realization, n - 1)?, s, delta, n_samples, seed, Region::OutsideCube)?
    };
    Ok(GrillEstimate { value: exact + statistical.value, stderr: statistical.stderr, exact, statistical })
}

/// Lebesgue measure of `A_delta` for the sets where it has a closed form:
/// realizations and Cantor sets in `R`, and `A_L x [0,1]`, `A_L x {0}` in `R^2`.
pub fn neighborhood_volume(set: &GeometricSet, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let unsupported = || Error::InvalidArgument("no closed-form neighborhood volume for this set".into());
    let line = |g: &RealizationGeometry| {
        let mut v = g.total + 2.0 * delta;
        for b in &g.blocks {
            if b.length > 2.0 * delta {
                v -= b.count * (b.length - 2.0 * delta);
            }
        }
        v
    };
    // area of the union of radius-delta disks centred on the points
    let disks = |g: &RealizationGeometry| {
        let half_disk = |h: f64| {
            let h = h.min(delta);
            0.5 * (h * (delta * delta - h * h).max(0.0).sqrt() + delta * delta * (h / delta).asin())
        };
        let mut v = PI * delta * delta + 2.0 * delta * g.tail;
        for b in &g.blocks {
            v += b.count * 4.0 * half_disk(0.5 * b.length);
        }
        v
    };
    set.validate()?;
    match set {
        GeometricSet::Realization { of } => Ok(line(&RealizationGeometry::new(of)?)),
        GeometricSet::GenCantorSet(p) => {
            let c = CantorGeometry::new(p);
            let gap = c.step - c.a;
            let mut v = 1.0 + 2.0 * delta;
            let mut level = 0;
            let (mut count, mut width) = (p.m() as f64 - 1.0, gap);
            while width > 2.0 * delta && level < 4096 {
                v -= count * (width - 2.0 * delta);
                count *= p.m() as f64;
                width *= c.a;
                level += 1;
            }
            Ok(v)
        }
        GeometricSet::Grill { base, extra_dims: 1 } => match base.as_ref() {
            GeometricSet::Realization { of } => {
                let g = RealizationGeometry::new(of)?;
                Ok(line(&g) + disks(&g))
            }
            _ => Err(unsupported()),
        },
        GeometricSet::EmbeddedFlat { base, zero_dims: 1 } => match base.as_ref() {
            GeometricSet::Realization { of } => Ok(disks(&RealizationGeometry::new(of)?)),
            _ => Err(unsupported()),
        },
        _ => Err(unsupported()),
    }
}

/// Singularities of the grill zeta in `R^n` given those of the base string.
///
/// The base set moves right by `n - 1`; the point `n - 1` is added when 0 is a
/// base singularity.
pub fn shift_singularities(base: &[Singularity], n: u32) -> Vec<Singularity> {
    let shift = (n.max(1) - 1) as f64;
    let mut out: Vec<Singularity> = base
        .iter()
        .map(|sg| Singularity { point: sg.point + shift, kind: sg.kind, k: sg.k })
        .collect();
    if base.iter().any(|sg| sg.point.norm() == 0.0) {
        out.push(Singularity { point: Complex64::new(shift, 0.0), kind: SingularityKind::Pole { order: 1 }, k: None });
    }
    out
}

/// Singularities of `zeta_{A_L x [0,1]^{n-1}}` in `window` for a constructed string.
pub fn grill_singularities(p: &PrescribedString, n: u32, window: ComplexWindow) -> Result<Vec<Singularity>> {
    if n == 0 {
        return Err(Error::InvalidArgument("ambient dimension must be >= 1".into()));
    }
    let shift = (n - 1) as f64;
    let base_window = ComplexWindow::new(window.re_min - shift, window.re_max - shift, window.im_min, window.im_max)?;
    let base = singularities_in_window(p, base_window)?;
    Ok(shift_singularities(&base, n).into_iter().filter(|sg| window.contains(sg.point)).collect())
}

/// Options of [`construct_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetOptions {
    pub construction: ConstructionOptions,
    /// Multiplicity of the infinite-order atom carrying `D_1`; raised when
    /// `D_1` is so close to an integer that its total length would overflow.
    pub m1: u32,
    /// Multiplicity of the Cantor set carrying `D`.
    pub m: u32,
    /// When set, an integer `D_1` or `D` is realized as `D_1 - eps` or `D - eps`.
    pub integer_offset: Option<f64>,
}

impl Default for SetOptions {
    fn default() -> Self {
        Self { construction: ConstructionOptions::default(), m1: 2, m: 2, integer_offset: None }
    }
}

/// Which recipe [`construct_set`] used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetCase {
    Line,
    Grill,
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructedSet {
    pub case: SetCase,
    pub ambient: u32,
    /// The realized values `(D_inf, D_1, D)`, after any integer offset.
    pub targets: (f64, f64, f64),
    pub set: GeometricSet,
}

/// Integer part and fractional target, applying the optional offset to integers.
fn split_target(name: &str, value: f64, offset: Option<f64>) -> Result<(u32, f64)> {
    let whole = value.floor();
    let frac = value - whole;
    if frac > 0.0 {
        return Ok((whole as u32, frac));
    }
    match offset {
        Some(eps) if eps > 0.0 && eps < 1.0 && value >= 1.0 => Ok((whole as u32 - 1, 1.0 - eps)),
        Some(eps) => Err(Error::InvalidArgument(format!(
            "integer {name} = {value} needs an offset in (0, 1) and {name} >= 1, got {eps}"
        ))),
        None => Err(rejected(format!(
            "integer {name} = {value} cannot be realized (log_(1/a) m = 0 needs m = 1); pass an integer offset to opt in"
        ))),
    }
}

fn lifted(base: GeometricSet, extra: u32) -> Result<GeometricSet> {
    if extra == 0 {
        Ok(base)
    } else {
        GeometricSet::grill(base, extra)
    }
}

fn embedded(base: GeometricSet, n: u32) -> Result<GeometricSet> {
    let have = base.ambient();
    if have == n {
        Ok(base)
    } else {
        GeometricSet::flat(base, n - have)
    }
}

/// Builds a bounded set in `R^n` whose distance zeta has abscissae of
/// paramorphic continuation `d_infinity`, meromorphic continuation `d1` and
/// convergence `d`.
///
/// With `n = 1` this is the realization of the constructed string. When all
/// three values lie in `[n-1, n)` it is the grill over the string built for the
/// values shifted by `n - 1`. Otherwise it is a union of a flat-embedded grill
/// carrying `D_inf`, a grill over an infinite-order realization carrying `D_1`
/// and a Cantor grill carrying `D`, spaced along the first axis.
pub fn construct_set(d_infinity: f64, d1: f64, d: f64, n: u32, options: SetOptions) -> Result<ConstructedSet> {
    if n == 0 {
        return Err(rejected("ambient dimension N must be >= 1"));
    }
    if ![d_infinity, d1, d].iter().all(|v| v.is_finite()) {
        return Err(rejected("targets must be finite"));
    }
    if d_infinity < 0.0 {
        return Err(rejected("0 <= D_inf violated"));
    }
    if d_infinity >= d1 {
        return Err(rejected("D_inf < D_1 violated"));
    }
    if d1 > d {
        return Err(rejected("D_1 <= D violated"));
    }
    if d >= n as f64 {
        return Err(rejected("D < N violated"));
    }
    let nf = n as f64;
    if n == 1 {
        let p = construct(d_infinity, d1, d, options.construction)?;
        return Ok(ConstructedSet {
            case: SetCase::Line,
            ambient: 1,
            targets: (d_infinity, d1, d),
            set: GeometricSet::realization(p.expr),
        });
    }
    if d_infinity >= nf - 1.0 {
        let shift = nf - 1.0;
        let p = construct(d_infinity - shift, d1 - shift, d - shift, options.construction)?;
        return Ok(ConstructedSet {
            case: SetCase::Grill,
            ambient: n,
            targets: (d_infinity, d1, d),
            set: GeometricSet::grill(GeometricSet::realization(p.expr), n - 1)?,
        });
    }
    // the part carrying D_inf lives in R^{n1} with all its values in [n1 - 1, n1)
    let n1 = d_infinity.floor() as u32 + 1;
    let shift = (n1 - 1) as f64;
    let d1_prime = d1.min(0.5 * (d_infinity + n1 as f64));
    let core = construct(d_infinity - shift, d1_prime - shift, d1_prime - shift, options.construction)?;
    let a2 = embedded(lifted(GeometricSet::realization(core.expr), n1 - 1)?, n)?;

    let (whole1, frac1) = split_target("D_1", d1, options.integer_offset)?;
    // the infinite-order length exp(1/(1 - m a)) - 1 must stay finite as frac1 -> 1
    let mut m1 = options.m1.max(2);
    while (m1 as f64).powf(1.0 - 1.0 / frac1) > 1.0 - 1.0 / 600.0 && m1 < 1 << 20 {
        m1 += 1;
    }
    let atom1 = CantorParams::from_dimension(m1, frac1)?;
    let b = embedded(lifted(GeometricSet::realization(StringExpr::InfiniteOrder(atom1)), whole1)?, n)?;

    let (whole, frac) = split_target("D", d, options.integer_offset)?;
    let atom = CantorParams::from_dimension(options.m, frac)?;
    let c = embedded(lifted(GeometricSet::GenCantorSet(atom), whole)?, n)?;

    let mut parts = Vec::new();
    let mut cursor = 0.0;
    for part in [a2, b, c] {
        let (lo, hi) = part.prepare()?.bounding_box();
        let mut offset = vec![0.0; n as usize];
        offset[0] = cursor - lo[0];
        cursor += hi[0] - lo[0] + PART_SEPARATION;
        parts.push(GeometricSet::translated(part, offset)?);
    }
    Ok(ConstructedSet {
        case: SetCase::Union,
        ambient: n,
        targets: (d_infinity, whole1 as f64 + frac1, whole as f64 + frac),
        set: GeometricSet::union(parts)?,
    })
}

/// Result of [`dimension_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionProbe {
    pub estimate: f64,
    /// Last real point at which `zeta_A` was sampled.
    pub sigma: f64,
    pub steps: u32,
}

/// Locates the abscissa of `zeta_{A_L}` from its blow-up along the real axis.
///
/// Near a singularity at `D` of pole or exponential type, `-f'/f''` with
/// `f = ln zeta_A(sigma)` is a fixed fraction of `sigma - D`. Starting from
/// `sigma = 1`, the probe moves halfway towards `sigma + f'/f''` until the
/// step is below `resolution`; the estimate never lies left of `D`.
pub fn dimension_probe(e: &StringExpr, resolution: f64) -> Result<DimensionProbe> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution {resolution} must be positive")));
    }
    let delta = e.largest_length();
    let f = |sigma: f64| -> Result<f64> { Ok(dzeta_line(e, Complex64::new(sigma, 0.0), delta)?.re.ln()) };
    let mut sigma = 1.0;
    let mut best: Option<DimensionProbe> = None;
    for steps in 1..200 {
        let h = 1e-3 * (sigma - best.map_or(0.0, |b| b.estimate)).max(1e-3);
        let values = (f(sigma - h), f(sigma), f(sigma + h));
        let (lo, mid, hi) = match values {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => break,
        };
        let d1 = (hi - lo) / (2.0 * h);
        let d2 = (hi - 2.0 * mid + lo) / (h * h);
        if !(d2 > 0.0 && d1 < 0.0) {
            break;
        }
        let gap = -d1 / d2;
        let estimate = sigma - gap;
        best = Some(DimensionProbe { estimate, sigma, steps });
        if gap < resolution {
            break;
        }
        sigma = estimate + 0.5 * gap;
    }
    best.ok_or_else(|| Error::EstimateUnavailable("zeta_A shows no blow-up along the real axis".into()))
}
