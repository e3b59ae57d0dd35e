//! Highest-probability truncation of the event space.
//!
//! An event assigns each of the variables (six sources, then the loss sites
//! in index order) triggered or not. Variables are grouped into categories
//! of equal probability, so an event's probability depends only on its
//! count vector. Count vectors are visited best-first; vectors with exactly
//! equal probability form one class, and the class that crosses the
//! coverage target is cut by event key.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{EmissionEvent, EventKey, LossSet, SourceError};
use crate::circuit::{LossCategory, SiteInfo, MAX_LOSS_SITES};
use crate::math::{binomial_u128, powi};

const COVERAGE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Categories {
    probs: Vec<f64>,
    sizes: Vec<u32>,
    var_category: Vec<u8>,
    // suffix[pos * ncat + c]: variables of category c at index >= pos
    suffix: Vec<u32>,
}

impl Categories {
    /// `var_category` lists the six sources first, then the sites by index.
    pub fn new(probs: Vec<f64>, var_category: Vec<u8>) -> Result<Self, SourceError> {
        for &p in &probs {
            if !(0.0..1.0).contains(&p) {
                return Err(SourceError::ProbabilityOutOfRange(p));
            }
        }
        let sites = var_category.len().saturating_sub(EmissionEvent::SOURCES);
        if sites > MAX_LOSS_SITES {
            return Err(SourceError::TooManySites(sites));
        }
        let nc = probs.len();
        let mut sizes = alloc::vec![0u32; nc];
        for &c in &var_category {
            sizes[usize::from(c)] += 1;
        }
        let nv = var_category.len();
        let mut suffix = alloc::vec![0u32; (nv + 1) * nc];
        for pos in (0..nv).rev() {
            for c in 0..nc {
                suffix[pos * nc + c] = suffix[(pos + 1) * nc + c];
            }
            suffix[pos * nc + usize::from(var_category[pos])] += 1;
        }
        Ok(Categories { probs, sizes, var_category, suffix })
    }

    /// One category per distinct probability value.
    pub fn by_probability(g2: f64, site_probs: &[f64]) -> Result<Self, SourceError> {
        let mut probs: Vec<f64> = Vec::new();
        let mut var_category = Vec::with_capacity(EmissionEvent::SOURCES + site_probs.len());
        let all = core::iter::repeat(g2).take(EmissionEvent::SOURCES).chain(site_probs.iter().copied());
        for p in all {
            let c = match probs.iter().position(|q| q.to_bits() == p.to_bits()) {
                Some(c) => c,
                None => {
                    probs.push(p);
                    probs.len() - 1
                }
            };
            var_category.push(c as u8);
        }
        Categories::new(probs, var_category)
    }

    /// Sources, then one category per loss type: `[g2, prep, ops, det]`.
    pub fn for_sites(sites: &[SiteInfo], g2: f64, loss: [f64; 3]) -> Result<Self, SourceError> {
        let mut var_category = alloc::vec![0u8; EmissionEvent::SOURCES];
        var_category.extend(sites.iter().map(|s| 1 + s.category.index() as u8));
        let mut probs = alloc::vec![g2];
        probs.extend_from_slice(&loss);
        Categories::new(probs, var_category)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    pub fn var_count(&self) -> usize {
        self.var_category.len()
    }

    pub fn site_count(&self) -> usize {
        self.var_category.len() - EmissionEvent::SOURCES
    }

    pub fn counts_of(&self, key: &EventKey) -> Vec<u32> {
        let mut counts = alloc::vec![0u32; self.len()];
        for i in 0..EmissionEvent::SOURCES {
            if key.emission.count(i) == 2 {
                counts[usize::from(self.var_category[i])] += 1;
            }
        }
        for j in key.losses.iter() {
            counts[usize::from(self.var_category[EmissionEvent::SOURCES + j])] += 1;
        }
        counts
    }

    pub fn probability(&self, counts: &[u32]) -> f64 {
        group_probability(&self.probs, &self.sizes, counts)
    }

    fn group_size(&self, counts: &[u32]) -> u128 {
        let mut s: u128 = 1;
        for c in 0..self.len() {
            s = s.saturating_mul(binomial_u128(self.sizes[c], counts[c]));
        }
        s
    }

    fn completions(&self, pos: usize, counts: &[u32], targets: &[Vec<u32>]) -> u128 {
        let nc = self.len();
        let rem = &self.suffix[pos * nc..(pos + 1) * nc];
        let mut total: u128 = 0;
        'v: for v in targets {
            let mut ways: u128 = 1;
            for c in 0..nc {
                if v[c] < counts[c] {
                    continue 'v;
                }
                ways = ways.saturating_mul(binomial_u128(rem[c], v[c] - counts[c]));
                if ways == 0 {
                    continue 'v;
                }
            }
            total = total.saturating_add(ways);
        }
        total
    }

    /// The `r`-th event (0-based, key order) among those whose count vector
    /// is one of `targets`.
    fn unrank(&self, targets: &[Vec<u32>], mut r: u128) -> EventKey {
        let nv = self.var_count();
        let mut counts = alloc::vec![0u32; self.len()];
        let mut mask = 0u8;
        for pos in 0..EmissionEvent::SOURCES {
            let untriggered = self.completions(pos + 1, &counts, targets);
            if r >= untriggered {
                r -= untriggered;
                counts[usize::from(self.var_category[pos])] += 1;
                mask |= 1 << pos;
            }
        }
        let mut losses = LossSet::empty();
        let mut stop_allowed = true;
        let mut pos = EmissionEvent::SOURCES;
        loop {
            if stop_allowed && targets.iter().any(|v| v == &counts) {
                if r == 0 {
                    break;
                }
                r -= 1;
            }
            debug_assert!(pos < nv, "rank out of range");
            if pos >= nv {
                break;
            }
            let c = usize::from(self.var_category[pos]);
            counts[c] += 1;
            let take = self.completions(pos + 1, &counts, targets);
            if r < take {
                losses.insert(pos - EmissionEvent::SOURCES);
                stop_allowed = true;
            } else {
                counts[c] -= 1;
                r -= take;
                stop_allowed = false;
            }
            pos += 1;
        }
        EventKey { emission: EmissionEvent::from_mask(mask), losses }
    }
}

/// `prod_c p_c^k_c (1 - p_c)^(n_c - k_c)`; every caller goes through this
/// function so equal classes compare bitwise equal.
pub(crate) fn group_probability(probs: &[f64], sizes: &[u32], counts: &[u32]) -> f64 {
    let mut p = 1.0;
    for c in 0..probs.len() {
        p *= powi(probs[c], counts[c]) * powi(1.0 - probs[c], sizes[c] - counts[c]);
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
struct Class {
    prob: f64,
    vectors: Vec<Vec<u32>>,
    size: u128,
    take: u128,
}

/// Inclusion of the events of one count vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupStatus {
    Full,
    /// Only events with key at most the given cutoff.
    Partial(EventKey),
    Excluded,
}

impl GroupStatus {
    /// Smallest status including the events of both.
    pub fn union(self, other: GroupStatus) -> GroupStatus {
        use GroupStatus::*;
        match (self, other) {
            (Full, _) | (_, Full) => Full,
            (Partial(a), Partial(b)) => Partial(a.max(b)),
            (Partial(a), Excluded) | (Excluded, Partial(a)) => Partial(a),
            (Excluded, Excluded) => Excluded,
        }
    }

    /// Whether every event included by `other` is included by `self`.
    pub fn covers(self, other: GroupStatus) -> bool {
        use GroupStatus::*;
        match (self, other) {
            (_, Excluded) | (Full, _) => true,
            (Partial(a), Partial(b)) => b <= a,
            _ => false,
        }
    }

    pub fn includes(self, key: &EventKey) -> bool {
        match self {
            GroupStatus::Full => true,
            GroupStatus::Partial(cutoff) => *key <= cutoff,
            GroupStatus::Excluded => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    cats: Categories,
    classes: Vec<Class>,
    boundary: Option<(f64, EventKey)>,
    covered_mass: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    prob: f64,
    counts: Vec<u32>,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.prob.total_cmp(&other.prob).then_with(|| other.counts.cmp(&self.counts))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Selection {
    /// Smallest highest-probability prefix of the key-ordered event list
    /// whose mass reaches `coverage` (with a `1e-12` slack for rounding).
    /// `coverage = 1` keeps every event of nonzero probability.
    pub fn compute(cats: Categories, coverage: f64) -> Result<Self, SourceError> {
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(SourceError::CoverageOutOfRange(coverage));
        }
        let nc = cats.len();
        let flip: Vec<bool> = cats.probs.iter().map(|&p| p > 0.5).collect();
        let to_counts = |j: &[u32]| -> Vec<u32> {
            (0..nc).map(|c| if flip[c] { cats.sizes[c] - j[c] } else { j[c] }).collect()
        };
        let mut heap = BinaryHeap::new();
        let start = alloc::vec![0u32; nc];
        let p0 = cats.probability(&to_counts(&start));
        if p0 > 0.0 {
            heap.push(HeapEntry { prob: p0, counts: start });
        }
        let push_children = |heap: &mut BinaryHeap<HeapEntry>, j: &[u32]| {
            let h = j.iter().rposition(|&x| x > 0).unwrap_or(0);
            for c in h..nc {
                if j[c] < cats.sizes[c] {
                    let mut child = j.to_vec();
                    child[c] += 1;
                    let p = cats.probability(&to_counts(&child));
                    if p > 0.0 {
                        heap.push(HeapEntry { prob: p, counts: child });
                    }
                }
            }
        };

        let mut classes = Vec::new();
        let mut boundary = None;
        let mut cum = 0.0;
        while let Some(top) = heap.pop() {
            let prob = top.prob;
            let mut oriented = alloc::vec![top.counts];
            push_children(&mut heap, &oriented[0]);
            while heap.peek().is_some_and(|e| e.prob == prob) {
                let e = heap.pop().unwrap();
                push_children(&mut heap, &e.counts);
                oriented.push(e.counts);
            }
            let mut vectors: Vec<Vec<u32>> = oriented.iter().map(|j| to_counts(j)).collect();
            vectors.sort();
            let size = vectors.iter().fold(0u128, |s, v| s.saturating_add(cats.group_size(v)));
            let mass = vectors.iter().map(|v| cats.group_size(v) as f64).sum::<f64>() * prob;
            if coverage < 1.0 && cum + mass >= coverage - COVERAGE_SLACK {
                let need = libm::ceil((coverage - COVERAGE_SLACK - cum) / prob).max(1.0);
                let take = if need >= size as f64 { size } else { need as u128 };
                let cutoff = cats.unrank(&vectors, take - 1);
                cum += take as f64 * prob;
                classes.push(Class { prob, vectors, size, take });
                boundary = Some((prob, cutoff));
                break;
            }
            cum += mass;
            classes.push(Class { prob, vectors, size, take: size });
        }
        Ok(Selection { cats, classes, boundary, covered_mass: cum })
    }

    pub fn categories(&self) -> &Categories {
        &self.cats
    }

    pub fn covered_mass(&self) -> f64 {
        self.covered_mass
    }

    /// Probability of the class cut by the coverage target, if any.
    pub fn threshold(&self) -> Option<f64> {
        self.boundary.map(|(p, _)| p)
    }

    /// Number of selected events (saturating).
    pub fn event_count(&self) -> u128 {
        self.classes.iter().fold(0u128, |s, c| s.saturating_add(c.take))
    }

    pub fn status(&self, counts: &[u32]) -> GroupStatus {
        let p = self.cats.probability(counts);
        if p == 0.0 {
            return GroupStatus::Excluded;
        }
        match self.boundary {
            None => GroupStatus::Full,
            Some((t, _)) if p > t => GroupStatus::Full,
            Some((t, cutoff)) if p == t => GroupStatus::Partial(cutoff),
            Some(_) => GroupStatus::Excluded,
        }
    }

    /// Every selected count vector with its status, in selection order.
    pub fn groups(&self) -> impl Iterator<Item = (&[u32], GroupStatus)> + '_ {
        let last = self.classes.len().wrapping_sub(1);
        self.classes.iter().enumerate().flat_map(move |(i, class)| {
            let status = match self.boundary {
                Some((_, cutoff)) if i == last => GroupStatus::Partial(cutoff),
                _ => GroupStatus::Full,
            };
            class.vectors.iter().map(move |v| (v.as_slice(), status))
        })
    }

    pub fn includes(&self, key: &EventKey) -> bool {
        self.status(&self.cats.counts_of(key)).includes(key)
    }

    /// Selected events in order: probability descending, then key.
    pub fn events(&self) -> impl Iterator<Item = (EventKey, f64)> + '_ {
        self.classes.iter().flat_map(move |class| {
            (0..class.take).map(move |r| (self.cats.unrank(&class.vectors, r), class.prob))
        })
    }
}

impl LossCategory {
    /// Category slot of this loss type in [`Categories::for_sites`].
    pub fn selection_slot(self) -> usize {
        1 + self.index()
    }
}
