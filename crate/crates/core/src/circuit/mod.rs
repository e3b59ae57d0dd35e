//! Netlists of waveplates, polarizing beamsplitters, loss sites and
//! detectors, and the element-by-element stepper that runs them.

mod canonical;
mod permanent;
mod unitary;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::fock::{self, Channel, FockError, PureState, MAX_CHANNELS};

pub use canonical::canonical_ghz_netlist;
pub use permanent::permanent;
pub use unitary::{lossless_mode_unitary, oracle_amplitude, ModeUnitary};

/// Loss sites are tracked in a 128-bit set.
pub const MAX_LOSS_SITES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectorId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LossCategory {
    Prep,
    Ops,
    Det,
}

impl LossCategory {
    pub const ALL: [LossCategory; 3] = [LossCategory::Prep, LossCategory::Ops, LossCategory::Det];

    pub fn index(self) -> usize {
        match self {
            LossCategory::Prep => 0,
            LossCategory::Ops => 1,
            LossCategory::Det => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossCategory::Prep => "prep",
            LossCategory::Ops => "ops",
            LossCategory::Det => "det",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element {
    /// Polarization rotation by `angle` radians.
    Waveplate { channel: Channel, angle: f64 },
    Pbs { in1: Channel, in2: Channel, out1: Channel, out2: Channel },
    LossSite { site: SiteId, channel: Channel, category: LossCategory },
    Detector { id: DetectorId, channel: Channel },
}

impl Element {
    pub fn channels(&self) -> impl Iterator<Item = Channel> {
        let (buf, n) = match *self {
            Element::Waveplate { channel, .. } => ([channel; 4], 1),
            Element::Pbs { in1, in2, out1, out2 } => ([in1, in2, out1, out2], 4),
            Element::LossSite { channel, .. } => ([channel; 4], 1),
            Element::Detector { channel, .. } => ([channel; 4], 1),
        };
        buf.into_iter().take(n)
    }
}

/// A loss site resolved against its netlist. Sites are ordered by id; the
/// position in that order is the site's index, used for loss-set bits and
/// for the dedicated loss channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteInfo {
    pub id: SiteId,
    pub channel: Channel,
    pub category: LossCategory,
    pub element: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    pub channels: Vec<String>,
    pub elements: Vec<Element>,
    pub sources: Vec<Channel>,
    pub outputs: Vec<Channel>,
}

impl Netlist {
    pub fn new(channels: Vec<String>, sources: Vec<Channel>, outputs: Vec<Channel>) -> Self {
        Netlist { channels, elements: Vec::new(), sources, outputs }
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, name: &str) -> Option<Channel> {
        self.channels.iter().position(|c| c == name).map(|i| Channel(i as u16))
    }

    pub fn channel_name(&self, channel: Channel) -> Option<&str> {
        self.channels.get(usize::from(channel.0)).map(|s| s.as_str())
    }

    pub fn push(&mut self, element: Element) -> &mut Self {
        self.elements.push(element);
        self
    }

    /// Loss sites sorted by id.
    pub fn sites(&self) -> Vec<SiteInfo> {
        let mut sites: Vec<SiteInfo> = self
            .elements
            .iter()
            .enumerate()
            .filter_map(|(element, e)| match *e {
                Element::LossSite { site, channel, category } => {
                    Some(SiteInfo { id: site, channel, category, element })
                }
                _ => None,
            })
            .collect();
        sites.sort_by_key(|s| s.id);
        sites
    }

    pub fn site_index(&self, id: SiteId) -> Option<usize> {
        self.sites().iter().position(|s| s.id == id)
    }

    /// Dedicated loss channel of the site with the given index.
    pub fn loss_channel(&self, site_index: usize) -> Channel {
        Channel((self.channels.len() + site_index) as u16)
    }

    /// Detectors sorted by id.
    pub fn detectors(&self) -> Vec<(DetectorId, Channel)> {
        let mut d: Vec<_> = self
            .elements
            .iter()
            .filter_map(|e| match *e {
                Element::Detector { id, channel } => Some((id, channel)),
                _ => None,
            })
            .collect();
        d.sort();
        d
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    UnknownChannel(Channel),
    DuplicateSite(SiteId),
    DuplicateDetector(DetectorId),
    /// An element uses a channel after its detector.
    DetectorNotTerminal(DetectorId),
    /// A beamsplitter with coinciding input or output arms.
    DegeneratePbs,
    /// A beamsplitter output would merge into a channel that still carries photons.
    OutputOverwritesLiveChannel(Channel),
    /// An element acts on a channel that carries no photons at that point.
    InactiveChannel(Channel),
    SourceCount(usize),
    OutputCount(usize),
    DetectorCount(usize),
    DuplicateSource(Channel),
    DuplicateOutput(Channel),
    OutputIsDetected(Channel),
    TooManyLossSites(usize),
    TooManyChannels(usize),
    NonFiniteAngle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Index of the offending element; `None` for netlist-level problems.
    pub element: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.element {
            Some(i) => write!(f, "element {}: {:?}", i, self.kind),
            None => write!(f, "netlist: {:?}", self.kind),
        }
    }
}

pub const GHZ_SOURCES: usize = 6;
pub const GHZ_OUTPUTS: usize = 3;
pub const GHZ_DETECTORS: usize = 3;

/// Checks the netlist invariants and returns every violation found.
pub fn validate_netlist(n: &Netlist) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |element: Option<usize>, kind: ViolationKind| out.push(Violation { element, kind });
    let nch = n.channels.len();
    let declared = |c: Channel| usize::from(c.0) < nch;

    if n.sources.len() != GHZ_SOURCES {
        bad(None, ViolationKind::SourceCount(n.sources.len()));
    }
    if n.outputs.len() != GHZ_OUTPUTS {
        bad(None, ViolationKind::OutputCount(n.outputs.len()));
    }
    for (i, &c) in n.sources.iter().enumerate() {
        if !declared(c) {
            bad(None, ViolationKind::UnknownChannel(c));
        }
        if n.sources[..i].contains(&c) {
            bad(None, ViolationKind::DuplicateSource(c));
        }
    }
    for (i, &c) in n.outputs.iter().enumerate() {
        if !declared(c) {
            bad(None, ViolationKind::UnknownChannel(c));
        }
        if n.outputs[..i].contains(&c) {
            bad(None, ViolationKind::DuplicateOutput(c));
        }
    }

    let mut live = alloc::vec![false; nch];
    for &c in &n.sources {
        if declared(c) {
            live[usize::from(c.0)] = true;
        }
    }
    let mut terminated: Vec<(Channel, DetectorId)> = Vec::new();
    let mut sites: Vec<SiteId> = Vec::new();
    let mut detectors: Vec<DetectorId> = Vec::new();

    for (i, e) in n.elements.iter().enumerate() {
        let mut all_declared = true;
        for c in e.channels() {
            if !declared(c) {
                bad(Some(i), ViolationKind::UnknownChannel(c));
                all_declared = false;
            }
            if let Some(&(_, id)) = terminated.iter().find(|(t, _)| *t == c) {
                bad(Some(i), ViolationKind::DetectorNotTerminal(id));
            }
        }
        if !all_declared {
            continue;
        }
        match *e {
            Element::Waveplate { channel, angle } => {
                if !angle.is_finite() {
                    bad(Some(i), ViolationKind::NonFiniteAngle);
                }
                if !live[usize::from(channel.0)] {
                    bad(Some(i), ViolationKind::InactiveChannel(channel));
                }
            }
            Element::Pbs { in1, in2, out1, out2 } => {
                if in1 == in2 || out1 == out2 {
                    bad(Some(i), ViolationKind::DegeneratePbs);
                    continue;
                }
                for c in [in1, in2] {
                    if !live[usize::from(c.0)] {
                        bad(Some(i), ViolationKind::InactiveChannel(c));
                    }
                }
                for c in [out1, out2] {
                    if c != in1 && c != in2 && live[usize::from(c.0)] {
                        bad(Some(i), ViolationKind::OutputOverwritesLiveChannel(c));
                    }
                }
                live[usize::from(in1.0)] = false;
                live[usize::from(in2.0)] = false;
                live[usize::from(out1.0)] = true;
                live[usize::from(out2.0)] = true;
            }
            Element::LossSite { site, channel, .. } => {
                if sites.contains(&site) {
                    bad(Some(i), ViolationKind::DuplicateSite(site));
                }
                sites.push(site);
                if !live[usize::from(channel.0)] {
                    bad(Some(i), ViolationKind::InactiveChannel(channel));
                }
            }
            Element::Detector { id, channel } => {
                if detectors.contains(&id) {
                    bad(Some(i), ViolationKind::DuplicateDetector(id));
                }
                detectors.push(id);
                if !live[usize::from(channel.0)] {
                    bad(Some(i), ViolationKind::InactiveChannel(channel));
                }
                if n.outputs.contains(&channel) {
                    bad(Some(i), ViolationKind::OutputIsDetected(channel));
                }
                terminated.push((channel, id));
            }
        }
    }
    for &c in &n.outputs {
        if declared(c) && !live[usize::from(c.0)] {
            bad(None, ViolationKind::InactiveChannel(c));
        }
    }
    if detectors.len() != GHZ_DETECTORS {
        bad(None, ViolationKind::DetectorCount(detectors.len()));
    }
    if sites.len() > MAX_LOSS_SITES {
        bad(None, ViolationKind::TooManyLossSites(sites.len()));
    }
    if nch + sites.len() > MAX_CHANNELS {
        bad(None, ViolationKind::TooManyChannels(nch + sites.len()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("unknown loss site {0:?}")]
    UnknownSite(SiteId),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Applies the elements in order. Triggered loss sites move one photon into
/// their dedicated loss channel; untriggered sites and detectors leave the
/// state unchanged.
pub fn run(n: &Netlist, input: &PureState, triggered: &[SiteId]) -> Result<PureState, CircuitError> {
    let sites = n.sites();
    let mut loss_channels = Vec::with_capacity(triggered.len());
    for &id in triggered {
        let idx = sites.iter().position(|s| s.id == id).ok_or(CircuitError::UnknownSite(id))?;
        loss_channels.push((id, n.loss_channel(idx)));
    }
    let mut state = input.clone();
    for e in &n.elements {
        state = match *e {
            Element::Waveplate { channel, angle } => {
                fock::apply_polarization_rotation(&state, channel, angle)
            }
            Element::Pbs { in1, in2, out1, out2 } => fock::apply_pbs(&state, in1, in2, out1, out2),
            Element::LossSite { site, channel, .. } => {
                match loss_channels.iter().find(|(id, _)| *id == site) {
                    Some(&(_, lc)) => fock::apply_loss(&state, channel, lc)?,
                    None => continue,
                }
            }
            Element::Detector { .. } => continue,
        };
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_basis_state, ModeKey};
    use alloc::string::ToString;
    use core::f64::consts::FRAC_PI_4;

    fn tiny() -> Netlist {
        let names = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        Netlist::new(names, alloc::vec![Channel(0), Channel(1)], alloc::vec![Channel(2)])
    }

    #[test]
    fn empty_netlist_is_identity() {
        let n = tiny();
        let psi = make_basis_state(&[ModeKey::h(0, 0), ModeKey::v(1, 2)]).unwrap();
        assert_eq!(run(&n, &psi, &[]).unwrap(), psi);
    }

    #[test]
    fn single_waveplate_matches_rotation() {
        let mut n = tiny();
        n.push(Element::Waveplate { channel: Channel(0), angle: 0.37 });
        let psi = make_basis_state(&[ModeKey::h(0, 0), ModeKey::h(0, 0)]).unwrap();
        assert_eq!(
            run(&n, &psi, &[]).unwrap(),
            fock::apply_polarization_rotation(&psi, Channel(0), 0.37)
        );
    }

    #[test]
    fn triggered_site_uses_its_loss_channel() {
        let mut n = tiny();
        n.push(Element::LossSite { site: SiteId(7), channel: Channel(0), category: LossCategory::Ops });
        n.push(Element::LossSite { site: SiteId(3), channel: Channel(1), category: LossCategory::Ops });
        let psi = make_basis_state(&[ModeKey::h(0, 0), ModeKey::h(1, 0)]).unwrap();
        // site 3 sorts first, so it owns the first loss channel
        let out = run(&n, &psi, &[SiteId(7)]).unwrap();
        assert_eq!(out, make_basis_state(&[ModeKey::h(1, 0), ModeKey::h(5, 0)]).unwrap());
        let out = run(&n, &psi, &[SiteId(3)]).unwrap();
        assert_eq!(out, make_basis_state(&[ModeKey::h(0, 0), ModeKey::h(4, 0)]).unwrap());
        assert_eq!(run(&n, &psi, &[SiteId(9)]), Err(CircuitError::UnknownSite(SiteId(9))));
    }

    #[test]
    fn canonical_netlist_validates() {
        assert!(validate_netlist(&canonical_ghz_netlist()).is_empty());
    }

    #[test]
    fn element_after_detector_is_flagged() {
        let mut n = canonical_ghz_netlist();
        let d1 = n.channel("d1").unwrap();
        n.push(Element::Waveplate { channel: d1, angle: FRAC_PI_4 });
        let v = validate_netlist(&n);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].element, Some(n.elements.len() - 1));
        assert!(matches!(v[0].kind, ViolationKind::DetectorNotTerminal(_)));
    }

    #[test]
    fn duplicate_detector_is_flagged() {
        let mut n = canonical_ghz_netlist();
        let x0 = n.channel("x0").unwrap();
        n.outputs.retain(|&c| c != x0);
        n.outputs.push(n.channel("x3").unwrap());
        n.push(Element::Detector { id: DetectorId(1), channel: x0 });
        let v = validate_netlist(&n);
        assert!(v.iter().any(|v| matches!(v.kind, ViolationKind::DuplicateDetector(DetectorId(1)))));
    }

    #[test]
    fn unknown_channel_is_flagged() {
        let mut n = tiny();
        n.push(Element::Waveplate { channel: Channel(9), angle: 0.0 });
        let v = validate_netlist(&n);
        assert!(v.iter().any(|v| v.element == Some(0)
            && v.kind == ViolationKind::UnknownChannel(Channel(9))));
    }
}
