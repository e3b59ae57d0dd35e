use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;

use super::{DetectorId, Element, LossCategory, Netlist, SiteId};
use crate::fock::Channel;

const CHANNELS: [&str; 16] = [
    "c0", "c1", "c2", "c3", "c4", "c5", "a1", "x0", "x3", "b1", "x5", "cl", "a2", "d1", "d3", "d2",
];

struct Builder {
    net: Netlist,
    next_site: u16,
}

impl Builder {
    fn ch(&self, name: &str) -> Channel {
        self.net.channel(name).expect("canonical channel")
    }

    fn wp(&mut self, name: &str) {
        let channel = self.ch(name);
        self.net.push(Element::Waveplate { channel, angle: FRAC_PI_4 });
    }

    fn loss(&mut self, name: &str, category: LossCategory) {
        let channel = self.ch(name);
        let site = SiteId(self.next_site);
        self.next_site += 1;
        self.net.push(Element::LossSite { site, channel, category });
    }

    fn wp_ops(&mut self, name: &str) {
        self.wp(name);
        self.loss(name, LossCategory::Ops);
    }

    fn pbs(&mut self, in1: &str, in2: &str, out1: &str, out2: &str) {
        let e = Element::Pbs { in1: self.ch(in1), in2: self.ch(in2), out1: self.ch(out1), out2: self.ch(out2) };
        self.net.push(e);
        self.loss(out1, LossCategory::Ops);
        self.loss(out2, LossCategory::Ops);
    }

    fn detect(&mut self, name: &str, id: u16) {
        self.loss(name, LossCategory::Det);
        let channel = self.ch(name);
        self.net.push(Element::Detector { id: DetectorId(id), channel });
    }

    /// Source pair feeding one beamsplitter; the GHZ arm is finished (and
    /// closed by its own detection-loss site) before the next block starts.
    fn pair(&mut self, s1: &str, s2: &str, o1: &str, o2: &str, ghz: &str, onward: &str) {
        self.loss(s1, LossCategory::Prep);
        self.loss(s2, LossCategory::Prep);
        self.wp_ops(s1);
        self.wp_ops(s2);
        self.pbs(s1, s2, o1, o2);
        self.wp_ops(ghz);
        self.loss(ghz, LossCategory::Det);
        self.wp_ops(onward);
    }
}

/// The three-pair heralded GHZ circuit: six sources, three detectors, GHZ
/// state on `x0`, `x3`, `x5`.
///
/// Loss sites: one preparation site per source, an operation site behind
/// every waveplate and on every beamsplitter output, and a detection site in
/// front of each detector and at the end of each GHZ arm. Site ids follow
/// element order.
pub fn canonical_ghz_netlist() -> Netlist {
    let channels = CHANNELS.iter().map(|s| s.to_string()).collect();
    let net = Netlist::new(channels, Vec::new(), Vec::new());
    let mut b = Builder { net, next_site: 0 };
    b.net.sources = ["c0", "c1", "c2", "c3", "c4", "c5"].iter().map(|s| b.ch(s)).collect();
    b.net.outputs = ["x0", "x3", "x5"].iter().map(|s| b.ch(s)).collect();

    b.pair("c0", "c1", "a1", "x0", "x0", "a1");
    b.pair("c2", "c3", "x3", "b1", "x3", "b1");
    b.pbs("a1", "b1", "a2", "d1");
    b.wp_ops("d1");
    b.detect("d1", 1);
    b.pair("c4", "c5", "x5", "cl", "x5", "cl");
    b.pbs("a2", "cl", "d3", "d2");
    b.wp_ops("d2");
    b.wp_ops("d3");
    b.detect("d2", 2);
    b.detect("d3", 3);
    b.net
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_census() {
        let n = canonical_ghz_netlist();
        let sites = n.sites();
        let count = |c| sites.iter().filter(|s| s.category == c).count();
        assert_eq!(sites.len(), 37);
        assert_eq!(count(LossCategory::Prep), 6);
        assert_eq!(count(LossCategory::Ops), 25);
        assert_eq!(count(LossCategory::Det), 6);
        let wps = n.elements.iter().filter(|e| matches!(e, Element::Waveplate { .. })).count();
        let pbs = n.elements.iter().filter(|e| matches!(e, Element::Pbs { .. })).count();
        assert_eq!((wps, pbs), (15, 5));
        assert_eq!(n.detectors().len(), 3);
    }
}
