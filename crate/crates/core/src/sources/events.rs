use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use super::{Categories, EmissionEvent, Selection, SourceError};

/// Set of triggered loss sites, by site index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LossSet(u128);

impl LossSet {
    pub fn empty() -> Self {
        LossSet(0)
    }

    pub fn from_bits(bits: u128) -> Self {
        LossSet(bits)
    }

    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, site: usize) -> bool {
        self.0 >> site & 1 == 1
    }

    pub fn insert(&mut self, site: usize) {
        self.0 |= 1 << site;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Site indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        core::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(j)
        })
    }
}

/// Lexicographic order of the sorted index sequences.
impl Ord for LossSet {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        let j = diff.trailing_zeros();
        let above = |x: u128| if j >= 127 { 0 } else { x >> (j + 1) };
        let (mine, theirs) = if self.0 >> j & 1 == 1 { (true, other.0) } else { (false, self.0) };
        // the side holding j is smaller unless the other sequence ends first
        let holder_first = above(theirs) != 0;
        match (mine, holder_first) {
            (true, true) | (false, false) => Ordering::Less,
            _ => Ordering::Greater,
        }
    }
}

impl PartialOrd for LossSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for LossSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Event encoding used for tie-breaking: emission vector, then loss set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EventKey {
    pub emission: EmissionEvent,
    pub losses: LossSet,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub emission: EmissionEvent,
    pub losses: LossSet,
    pub probability: f64,
}

impl Event {
    pub fn key(&self) -> EventKey {
        EventKey { emission: self.emission, losses: self.losses }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventList {
    pub events: Vec<Event>,
    pub covered_mass: f64,
}

/// Bernoulli product over sources (`g2` for a double emission) and sites
/// (`site_probs[j]` for a triggered site `j`).
pub fn event_probability(e: &Event, g2: f64, site_probs: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..EmissionEvent::SOURCES {
        p *= if e.emission.count(i) == 2 { g2 } else { 1.0 - g2 };
    }
    for (j, &q) in site_probs.iter().enumerate() {
        p *= if e.losses.contains(j) { q } else { 1.0 - q };
    }
    p
}

/// Events in order of decreasing probability (ties by key), truncated at
/// the first prefix whose mass reaches `coverage`.
pub fn enumerate_events(g2: f64, site_probs: &[f64], coverage: f64) -> Result<EventList, SourceError> {
    let cats = Categories::by_probability(g2, site_probs)?;
    let sel = Selection::compute(cats, coverage)?;
    let events = sel
        .events()
        .map(|(k, probability)| Event { emission: k.emission, losses: k.losses, probability })
        .collect();
    Ok(EventList { events, covered_mass: sel.covered_mass() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> LossSet {
        let mut s = LossSet::empty();
        for &x in xs {
            s.insert(x);
        }
        s
    }

    #[test]
    fn loss_set_order_is_sequence_order() {
        let sets: Vec<Vec<usize>> = alloc::vec![
            alloc::vec![],
            alloc::vec![0],
            alloc::vec![0, 1],
            alloc::vec![0, 1, 5],
            alloc::vec![0, 3],
            alloc::vec![1],
            alloc::vec![1, 2],
            alloc::vec![2],
            alloc::vec![127],
        ];
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                assert_eq!(set(&sets[i]).cmp(&set(&sets[j])), sets[i].cmp(&sets[j]), "{:?} {:?}", sets[i], sets[j]);
            }
        }
    }

    #[test]
    fn probability_formula() {
        let e = Event { emission: EmissionEvent::singles(), losses: LossSet::empty(), probability: 0.0 };
        let p = event_probability(&e, 0.25, &[0.1]);
        assert!((p - libm::pow(0.75, 6.0) * 0.9).abs() < 1e-15);
        let d = Event { emission: EmissionEvent::from_mask(1), ..e };
        let pd = event_probability(&d, 0.25, &[0.1]);
        assert!((pd - p / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rates_give_single_event() {
        let list = enumerate_events(0.0, &[0.0; 37], 0.98).unwrap();
        assert_eq!(list.events.len(), 1);
        assert_eq!(list.events[0].probability, 1.0);
        assert_eq!(list.covered_mass, 1.0);
    }

    #[test]
    fn uniform_emissions() {
        let list = enumerate_events(0.5, &[], 0.98).unwrap();
        assert_eq!(list.events.len(), 63);
        assert!(list.events.iter().all(|e| e.probability == 1.0 / 64.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(enumerate_events(0.1, &[0.1], 1.5).is_err());
        assert!(enumerate_events(0.1, &[0.1], 0.0).is_err());
        assert!(enumerate_events(1.0, &[0.1], 0.5).is_err());
        assert!(enumerate_events(0.1, &[-0.1], 0.5).is_err());
    }
}
