//! Lazy enumeration of length multisets in nonincreasing order.
//!
//! Every expression is compiled into a tree of [`Source`]s, each yielding
//! `(length, multiplicity)` pairs in nonincreasing length order. Unions are
//! merged through a max-heap; countable unions activate their parts lazily
//! using an envelope that bounds every length of the parts not yet opened.
//! Products walk their index lattice best-first with a visited set.
//! Lengths below `f64::MIN_POSITIVE` are dropped.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use num_bigint::BigUint;
use num_traits::One;

use super::{CoefficientFamily, LengthTerm, StringExpr, WeightedParts};
use crate::cantor_atoms::{CantorParams, CantorSchedule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnumerationCutoff {
    /// Stop after this many (coalesced) terms.
    MaxTerms(usize),
    /// Stop before the first length below this bound.
    MinLength(f64),
}

type Term = (f64, BigUint);

trait Source: Send {
    /// Length of the next term, `None` once exhausted.
    fn peek(&mut self) -> Option<f64>;
    fn pop(&mut self) -> Option<Term>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn usable(length: f64) -> bool {
    length >= f64::MIN_POSITIVE
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

struct VecSource {
    terms: Vec<Term>,
    next: usize,
}

impl VecSource {
    fn new(mut terms: Vec<Term>) -> Self {
        terms.retain(|t| usable(t.0));
        terms.sort_by(|a, b| b.0.total_cmp(&a.0));
        Self { terms, next: 0 }
    }
}

impl Source for VecSource {
    fn peek(&mut self) -> Option<f64> {
        self.terms.get(self.next).map(|t| t.0)
    }

    fn pop(&mut self) -> Option<Term> {
        let t = self.terms.get(self.next).cloned();
        self.next += 1;
        t
    }
}

/// Lengths `a^j` with multiplicity `m^j C(j+n-1, n-1)`: the `n`-th tensor power of `L(m,a)`.
struct GeometricSource {
    ln_inv_a: f64,
    m: u32,
    order: u32,
    j: u64,
    multiplicity: BigUint,
}

impl GeometricSource {
    fn new(params: &CantorParams, order: u32) -> Self {
        Self {
            ln_inv_a: params.ln_inv_a(),
            m: params.m(),
            order,
            j: 0,
            multiplicity: BigUint::one(),
        }
    }

    fn length(&self) -> f64 {
        (-(self.j as f64) * self.ln_inv_a).exp()
    }
}

impl Source for GeometricSource {
    fn peek(&mut self) -> Option<f64> {
        let l = self.length();
        usable(l).then_some(l)
    }

    fn pop(&mut self) -> Option<Term> {
        let l = self.peek()?;
        let term = (l, self.multiplicity.clone());
        // m^{j+1} C(j+n, n-1) = m^j C(j+n-1, n-1) * m (j+n) / (j+1)
        let j = self.j;
        self.multiplicity = &self.multiplicity * self.m * (j + self.order as u64) / (j + 1);
        self.j += 1;
        Some(term)
    }
}

/// Words over the ratio alphabet of a self-similar string, grouped by letter counts.
struct SelfSimilarSource {
    ln_ratios: Vec<f64>,
    counts: Vec<u32>,
    heap: BinaryHeap<(Key, Reverse<Vec<u32>>, BigUint)>,
    visited: HashSet<Vec<u32>>,
}

impl SelfSimilarSource {
    fn new(ratios: &[f64]) -> Self {
        let mut distinct: Vec<(f64, u32)> = Vec::new();
        for &r in ratios {
            match distinct.iter_mut().find(|(d, _)| *d == r) {
                Some(entry) => entry.1 += 1,
                None => distinct.push((r, 1)),
            }
        }
        let origin = vec![0u32; distinct.len()];
        let mut source = Self {
            ln_ratios: distinct.iter().map(|(r, _)| r.ln()).collect(),
            counts: distinct.iter().map(|(_, c)| *c).collect(),
            heap: BinaryHeap::new(),
            visited: HashSet::new(),
        };
        source.visited.insert(origin.clone());
        source.heap.push((Key(1.0), Reverse(origin), BigUint::one()));
        source
    }

    fn length(&self, alpha: &[u32]) -> f64 {
        let ln: f64 = alpha.iter().zip(&self.ln_ratios).map(|(&k, lr)| k as f64 * lr).sum();
        ln.exp()
    }
}

impl Source for SelfSimilarSource {
    fn peek(&mut self) -> Option<f64> {
        self.heap.peek().map(|(k, _, _)| k.0)
    }

    fn pop(&mut self) -> Option<Term> {
        let (Key(length), Reverse(alpha), multiplicity) = self.heap.pop()?;
        let total: u64 = alpha.iter().map(|&k| k as u64).sum();
        for i in 0..alpha.len() {
            let mut next = alpha.clone();
            next[i] += 1;
            if self.visited.contains(&next) {
                continue;
            }
            let l = self.length(&next);
            if !usable(l) {
                continue;
            }
            // multinomial(|a|+1; a+e_i) prod c^a = multinomial(|a|; a) prod c^a * (|a|+1) c_i / (a_i+1)
            let mult = &multiplicity * (total + 1) * self.counts[i] / (alpha[i] as u64 + 1);
            self.visited.insert(next.clone());
            self.heap.push((Key(l), Reverse(next), mult));
        }
        Some((length, multiplicity))
    }
}

struct ScaleSource {
    gamma: f64,
    inner: Box<dyn Source>,
}

impl Source for ScaleSource {
    fn peek(&mut self) -> Option<f64> {
        // once a scaled length underflows, every later one does too
        let l = self.inner.peek()? * self.gamma;
        usable(l).then_some(l)
    }

    fn pop(&mut self) -> Option<Term> {
        self.peek()?;
        self.inner.pop().map(|(l, m)| (l * self.gamma, m))
    }
}

/// Produces the parts of a countable union one at a time.
trait PartGenerator: Send {
    /// Upper bound on every length of every part not yet produced.
    fn envelope(&self) -> f64;
    fn next_part(&mut self) -> Option<Box<dyn Source>>;
}

struct MergeSource {
    parts: Vec<Box<dyn Source>>,
    heap: BinaryHeap<(Key, Reverse<usize>)>,
    pending: Option<Box<dyn PartGenerator>>,
}

impl MergeSource {
    fn new(parts: Vec<Box<dyn Source>>, pending: Option<Box<dyn PartGenerator>>) -> Self {
        let mut merge = Self { parts: Vec::new(), heap: BinaryHeap::new(), pending };
        for p in parts {
            merge.add(p);
        }
        merge
    }

    fn add(&mut self, mut part: Box<dyn Source>) {
        if let Some(l) = part.peek() {
            let idx = self.parts.len();
            self.parts.push(part);
            self.heap.push((Key(l), Reverse(idx)));
        }
    }

    /// Opens pending parts until none of them can beat the current heap top.
    fn settle(&mut self) {
        while let Some(generator) = self.pending.as_mut() {
            let envelope = generator.envelope();
            if !usable(envelope) {
                self.pending = None;
                break;
            }
            let top = self.heap.peek().map_or(0.0, |(k, _)| k.0);
            if envelope < top {
                break;
            }
            match generator.next_part() {
                Some(part) => self.add(part),
                None => self.pending = None,
            }
        }
    }
}

impl Source for MergeSource {
    fn peek(&mut self) -> Option<f64> {
        self.settle();
        self.heap.peek().map(|(k, _)| k.0)
    }

    fn pop(&mut self) -> Option<Term> {
        self.settle();
        let (_, Reverse(idx)) = self.heap.pop()?;
        let part = &mut self.parts[idx];
        let term = part.pop();
        if let Some(l) = part.peek() {
            self.heap.push((Key(l), Reverse(idx)));
        }
        term
    }
}

struct FactorCache {
    source: Box<dyn Source>,
    terms: Vec<Term>,
}

impl FactorCache {
    fn ensure(&mut self, i: usize) -> bool {
        while self.terms.len() <= i {
            let Some((l, mut m)) = self.source.pop() else {
                return false;
            };
            while self.source.peek() == Some(l) {
                m += self.source.pop().expect("peeked").1;
            }
            self.terms.push((l, m));
        }
        true
    }
}

/// Best-first walk over the index lattice of a tensor product.
struct ProductSource {
    caches: Vec<FactorCache>,
    slots: Vec<usize>,
    heap: BinaryHeap<(Key, Reverse<Vec<u32>>)>,
    visited: HashSet<Vec<u32>>,
}

impl ProductSource {
    fn new(caches: Vec<FactorCache>, slots: Vec<usize>) -> Self {
        let mut source = Self { caches, slots, heap: BinaryHeap::new(), visited: HashSet::new() };
        let origin = vec![0u32; source.slots.len()];
        if let Some(l) = source.length(&origin) {
            source.visited.insert(origin.clone());
            source.heap.push((Key(l), Reverse(origin)));
        }
        source
    }

    fn length(&mut self, idx: &[u32]) -> Option<f64> {
        let mut l = 1.0;
        for (slot, &i) in idx.iter().enumerate() {
            let cache = &mut self.caches[self.slots[slot]];
            if !cache.ensure(i as usize) {
                return None;
            }
            l *= cache.terms[i as usize].0;
        }
        usable(l).then_some(l)
    }
}

impl Source for ProductSource {
    fn peek(&mut self) -> Option<f64> {
        self.heap.peek().map(|(k, _)| k.0)
    }

    fn pop(&mut self) -> Option<Term> {
        let (Key(length), Reverse(idx)) = self.heap.pop()?;
        let mut multiplicity = BigUint::one();
        for (slot, &i) in idx.iter().enumerate() {
            multiplicity *= &self.caches[self.slots[slot]].terms[i as usize].1;
        }
        for slot in 0..idx.len() {
            let mut next = idx.clone();
            next[slot] += 1;
            if self.visited.contains(&next) {
                continue;
            }
            if let Some(l) = self.length(&next) {
                self.visited.insert(next.clone());
                self.heap.push((Key(l), Reverse(next)));
            }
        }
        Some((length, multiplicity))
    }
}

/// Parts `(1/n!) L(m,a)^n`, `n = 1, 2, ...`.
struct InfiniteOrderParts {
    params: CantorParams,
    n: u32,
}

impl PartGenerator for InfiniteOrderParts {
    fn envelope(&self) -> f64 {
        (-ln_factorial(self.n)).exp()
    }

    fn next_part(&mut self) -> Option<Box<dyn Source>> {
        let gamma = self.envelope();
        let part = ScaleSource { gamma, inner: Box::new(GeometricSource::new(&self.params, self.n)) };
        self.n += 1;
        Some(Box::new(part))
    }
}

/// Parts `c_n e^n`, `n = 0, 1, ...`.
struct SeriesParts {
    family: CoefficientFamily,
    inner: StringExpr,
    x: f64,
    n: u32,
}

impl PartGenerator for SeriesParts {
    fn envelope(&self) -> f64 {
        self.family.envelope(self.n, self.x)
    }

    fn next_part(&mut self) -> Option<Box<dyn Source>> {
        loop {
            let n = self.n;
            if !usable(self.envelope()) {
                return None;
            }
            self.n += 1;
            let ln_c = self.family.ln_coefficient(n);
            if ln_c == f64::NEG_INFINITY {
                continue;
            }
            let c = ln_c.exp();
            let part: Box<dyn Source> = if n == 0 {
                Box::new(VecSource::new(vec![(c, BigUint::one())]))
            } else {
                Box::new(ScaleSource { gamma: c, inner: power_source(&self.inner, n) })
            };
            return Some(part);
        }
    }
}

/// Parts `w_k L^{(m_k, a_k)}_inf`, `k = 1, 2, ...`.
struct ScheduleParts {
    schedule: CantorSchedule,
    k: u32,
}

impl PartGenerator for ScheduleParts {
    fn envelope(&self) -> f64 {
        self.schedule.envelope(self.k)
    }

    fn next_part(&mut self) -> Option<Box<dyn Source>> {
        let k = self.k;
        self.k += 1;
        let inner = infinite_order_source(&self.schedule.params(k));
        Some(Box::new(ScaleSource { gamma: self.schedule.weight(k), inner }))
    }
}

fn infinite_order_source(params: &CantorParams) -> Box<dyn Source> {
    Box::new(MergeSource::new(
        Vec::new(),
        Some(Box::new(InfiniteOrderParts { params: *params, n: 1 })),
    ))
}

fn power_source(base: &StringExpr, n: u32) -> Box<dyn Source> {
    if let StringExpr::GenCantor(p) = base {
        return Box::new(GeometricSource::new(p, n));
    }
    if n == 1 {
        return source_for(base);
    }
    let cache = FactorCache { source: source_for(base), terms: Vec::new() };
    Box::new(ProductSource::new(vec![cache], vec![0; n as usize]))
}

fn source_for(e: &StringExpr) -> Box<dyn Source> {
    match e {
        StringExpr::Explicit { terms } => Box::new(VecSource::new(
            terms.iter().map(|t| (t.length, t.multiplicity.clone())).collect(),
        )),
        StringExpr::SelfSimilar { ratios } => Box::new(SelfSimilarSource::new(ratios)),
        StringExpr::GenCantor(p) => Box::new(GeometricSource::new(p, 1)),
        StringExpr::Power { base, n } => power_source(base, *n),
        StringExpr::Tensor { factors } => {
            let caches: Vec<FactorCache> = factors
                .iter()
                .map(|f| FactorCache { source: source_for(f), terms: Vec::new() })
                .collect();
            let slots = (0..caches.len()).collect();
            Box::new(ProductSource::new(caches, slots))
        }
        StringExpr::InfiniteOrder(p) => infinite_order_source(p),
        StringExpr::Scale { gamma, inner } => Box::new(ScaleSource { gamma: *gamma, inner: source_for(inner) }),
        StringExpr::Union { parts } => Box::new(MergeSource::new(parts.iter().map(source_for).collect(), None)),
        StringExpr::WeightedUnion { parts } => match parts {
            WeightedParts::Finite(parts) => Box::new(MergeSource::new(
                parts
                    .iter()
                    .map(|p| Box::new(ScaleSource { gamma: p.weight, inner: source_for(&p.part) }) as Box<dyn Source>)
                    .collect(),
                None,
            )),
            WeightedParts::Cantor(schedule) => Box::new(MergeSource::new(
                Vec::new(),
                Some(Box::new(ScheduleParts { schedule: *schedule, k: 1 })),
            )),
        },
        StringExpr::SeriesLift { family, inner } => Box::new(MergeSource::new(
            Vec::new(),
            Some(Box::new(SeriesParts {
                family: family.clone(),
                inner: (**inner).clone(),
                x: inner.largest_length(),
                n: 0,
            })),
        )),
    }
}

/// A single-consumer cursor over the lengths of a string, coalescing equal lengths.
pub struct LengthStream {
    source: Box<dyn Source>,
    cutoff: EnumerationCutoff,
    emitted: usize,
}

impl Iterator for LengthStream {
    type Item = LengthTerm;

    fn next(&mut self) -> Option<LengthTerm> {
        let length = self.source.peek()?;
        match self.cutoff {
            EnumerationCutoff::MaxTerms(n) if self.emitted >= n => return None,
            EnumerationCutoff::MinLength(lambda) if length < lambda => return None,
            _ => {}
        }
        let (length, mut multiplicity) = self.source.pop()?;
        while self.source.peek() == Some(length) {
            multiplicity += self.source.pop().expect("peeked").1;
        }
        self.emitted += 1;
        Some(LengthTerm { length, multiplicity })
    }
}

/// Enumerates the lengths of `e` in nonincreasing order up to `cutoff`.
pub fn enumerate_lengths(e: &StringExpr, cutoff: EnumerationCutoff) -> Result<LengthStream> {
    if let EnumerationCutoff::MinLength(lambda) = cutoff {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidCutoff(format!("MinLength({lambda}) needs a positive bound")));
        }
    }
    Ok(LengthStream { source: source_for(e), cutoff, emitted: 0 })
}
