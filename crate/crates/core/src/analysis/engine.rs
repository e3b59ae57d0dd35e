//! Branch tables.
//!
//! For every selected event the circuit is run once on the shared/private
//! input, and the accepted mass and GHZ overlap are stored per number `a` of
//! photons in the shared internal mode. A measure at overlap `v` is then
//! `sum_a v^a (1 - v)^(N - a) c_a`, and a change of `g2` or of the loss rates
//! only changes the event weights, so one table serves a whole grid.
//!
//! Events are explored depth-first along the element list, forking at each
//! loss site. Basis states that can no longer end with exactly one photon in
//! every required channel are dropped as soon as that is certain.
//!
//! Two exact rewrites keep the states small. A loss site behind the last
//! beamsplitter of its channel commutes with everything after it, up to a
//! unitary on the loss channel, which is traced out; such sites are applied
//! once at the end, and all events differing only in which of them fired on
//! a channel share one result. Waveplates at the end of detector and output
//! arms are folded into the GHZ projection instead of being simulated.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::AnalysisError;
use crate::circuit::{validate_netlist, Element, Netlist, SiteInfo};
use crate::fock::{self, code_channel, code_is_v, Channel, FockBasisState, PureState};
use crate::herald::{self, Acceptance, Layout, MixtureMeasures, Pattern, SignTable};
use crate::math::powi;
use crate::sources::{
    shared_private_input, Categories, EmissionEvent, EventKey, GroupStatus, LossSet, Selection,
};

/// Count vector of an event: doubles, then triggered preparation, operation
/// and detection sites.
pub type GroupKey = [u8; 4];

const FREE: u8 = 0x80;
const MAX_COEFS: usize = 13;

/// Runs independent tasks; implementations may run them in parallel but
/// must return results in task order.
pub trait TaskRunner: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs tasks one after another.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl TaskRunner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

/// Union of the selections a table has to serve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Demand {
    groups: BTreeMap<GroupKey, GroupStatus>,
}

impl Demand {
    pub fn new() -> Self {
        Demand::default()
    }

    pub fn add(&mut self, sel: &Selection) {
        for (counts, status) in sel.groups() {
            let g = group_key(counts);
            let s = self.groups.entry(g).or_insert(GroupStatus::Excluded);
            *s = s.union(status);
        }
    }

    /// Widens the status of one group.
    pub fn insert(&mut self, group: GroupKey, status: GroupStatus) {
        let s = self.groups.entry(group).or_insert(GroupStatus::Excluded);
        *s = s.union(status);
    }

    pub fn merge(&mut self, other: &Demand) {
        for (&g, &status) in &other.groups {
            let s = self.groups.entry(g).or_insert(GroupStatus::Excluded);
            *s = s.union(status);
        }
    }

    pub fn status(&self, g: &GroupKey) -> GroupStatus {
        self.groups.get(g).copied().unwrap_or(GroupStatus::Excluded)
    }

    pub fn covers(&self, sel: &Selection) -> Result<(), AnalysisError> {
        for (counts, status) in sel.groups() {
            let g = group_key(counts);
            if !self.status(&g).covers(status) {
                return Err(AnalysisError::NotCovered(g));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupKey, &GroupStatus)> {
        self.groups.iter()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

fn group_key(counts: &[u32]) -> GroupKey {
    core::array::from_fn(|c| counts[c] as u8)
}

/// One accepted event with its shared-mode resolved coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LiveEvent {
    pub key: EventKey,
    pub group: GroupKey,
    /// `success[a]`, `numerator[a]` for `a = 0..=N`.
    pub success: Vec<f64>,
    pub numerator: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
struct GroupBlock {
    group: GroupKey,
    start: usize,
    end: usize,
    success: Vec<f64>,
    numerator: Vec<f64>,
}

/// Live events of a demand, grouped by count vector and sorted by key
/// inside each group.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchTable {
    demand: Demand,
    events: Vec<LiveEvent>,
    blocks: Vec<GroupBlock>,
}

impl BranchTable {
    pub fn from_events(demand: Demand, mut events: Vec<LiveEvent>) -> Self {
        events.sort_by(|a, b| a.group.cmp(&b.group).then(a.key.cmp(&b.key)));
        let mut blocks: Vec<GroupBlock> = Vec::new();
        for (i, e) in events.iter().enumerate() {
            match blocks.last_mut() {
                Some(b) if b.group == e.group => {
                    b.end = i + 1;
                    add_into(&mut b.success, &e.success);
                    add_into(&mut b.numerator, &e.numerator);
                }
                _ => blocks.push(GroupBlock {
                    group: e.group,
                    start: i,
                    end: i + 1,
                    success: e.success.clone(),
                    numerator: e.numerator.clone(),
                }),
            }
        }
        BranchTable { demand, events, blocks }
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn events(&self) -> &[LiveEvent] {
        &self.events
    }

    /// Weighted coefficient sums `[D][a]` for one selection: success, then
    /// numerator, each `sum_events Pr[e] c_a(e)`.
    pub fn weighted(&self, sel: &Selection) -> Result<WeightedSums, AnalysisError> {
        self.demand.covers(sel)?;
        let mut out = WeightedSums::zero(sel.covered_mass());
        let cats = sel.categories();
        for block in &self.blocks {
            let counts: [u32; 4] = block.group.map(u32::from);
            let status = sel.status(&counts);
            let prob = cats.probability(&counts);
            let d = usize::from(block.group[0]);
            match status {
                GroupStatus::Excluded => continue,
                GroupStatus::Full => {
                    out.add(d, prob, &block.success, &block.numerator);
                }
                GroupStatus::Partial(cutoff) => {
                    let events = &self.events[block.start..block.end];
                    let n = events.partition_point(|e| e.key <= cutoff);
                    for e in &events[..n] {
                        out.add(d, prob, &e.success, &e.numerator);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn measures(&self, sel: &Selection, overlap: f64) -> Result<MixtureMeasures, AnalysisError> {
        Ok(self.weighted(sel)?.at_overlap(overlap))
    }
}

fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

/// Probability-weighted coefficients of one selection, still resolved by
/// double count and shared-mode photon number.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSums {
    success: [[f64; MAX_COEFS]; 7],
    numerator: [[f64; MAX_COEFS]; 7],
    covered_mass: f64,
}

impl WeightedSums {
    fn zero(covered_mass: f64) -> Self {
        WeightedSums { success: [[0.0; MAX_COEFS]; 7], numerator: [[0.0; MAX_COEFS]; 7], covered_mass }
    }

    fn add(&mut self, d: usize, prob: f64, success: &[f64], numerator: &[f64]) {
        for (a, (s, n)) in success.iter().zip(numerator).enumerate() {
            self.success[d][a] += prob * s;
            self.numerator[d][a] += prob * n;
        }
    }

    pub fn at_overlap(&self, v: f64) -> MixtureMeasures {
        let (mut s, mut num) = (0.0, 0.0);
        for d in 0..7 {
            let n = 6 + d as u32;
            for a in 0..=n {
                let w = powi(v, a) * powi(1.0 - v, n - a);
                s += w * self.success[d][a as usize];
                num += w * self.numerator[d][a as usize];
            }
        }
        MixtureMeasures::from_sums(s, num, self.covered_mass)
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Wp { ch: u16, angle: f64 },
    Pbs { in1: u16, in2: u16, out1: u16, out2: u16 },
    Loss { idx: usize, cat: usize, ch: u16 },
}

impl Op {
    fn moves(&self, channel: u16) -> bool {
        matches!(*self, Op::Pbs { in1, in2, out1, out2 } if [in1, in2, out1, out2].contains(&channel))
    }
}

/// Loss sites behind the last beamsplitter of one channel.
#[derive(Clone, Debug)]
struct Tail {
    ch: u16,
    // slot in `Layout::required`, if the channel is required
    required: Option<usize>,
    // (site index, category) in element order
    sites: Vec<(usize, usize)>,
}

/// Precomputed circuit data for the depth-first event exploration.
#[derive(Clone, Debug)]
pub struct Engine<'n> {
    netlist: &'n Netlist,
    layout: Layout,
    signs: SignTable,
    sites: Vec<SiteInfo>,
    nch: usize,
    ops: Vec<Op>,
    tails: Vec<Tail>,
    // detector channels, then output channels
    absorbed: [u16; 6],
    // per channel: slot in `absorbed`, or 0xff
    slot: Vec<u8>,
    // terminal polarization rotation per absorbed channel, row-major 2x2
    rotation: [[f64; 4]; 6],
    nreq: usize,
    full_mask: u8,
    // reach[t * 2 nch + (code >> 3)]: required channels a photon in that
    // channel and polarization before op `t` can end in; FREE if it can also
    // end elsewhere
    reach: Vec<u8>,
    // fut[t * 64 + F]: loss sites at or after op `t` (deferred ones
    // included) that can hold a photon heading for the channel set F
    fut: Vec<u8>,
    // rem[t][c]: loss sites of category c at or after op `t`, deferred
    // ones included
    rem: Vec<[u8; 3]>,
}

const ROT_EPS: f64 = 1e-15;

impl<'n> Engine<'n> {
    pub fn new(netlist: &'n Netlist, acceptance: Acceptance) -> Result<Self, AnalysisError> {
        let violations = validate_netlist(netlist);
        if let Some(v) = violations.into_iter().next() {
            return Err(AnalysisError::InvalidNetlist(v));
        }
        let layout = Layout::new(netlist, acceptance)?;
        let signs = herald::derive_sign_table(netlist)?;
        let sites = netlist.sites();
        let nch = netlist.channel_count();
        let required = layout.required();
        let nreq = required.len();
        let full_mask = ((1u16 << nreq) - 1) as u8;

        let mut site_of = alloc::vec![(0usize, 0usize); netlist.elements.len()];
        for (idx, s) in sites.iter().enumerate() {
            site_of[s.element] = (idx, s.category.index());
        }
        let mut ops = Vec::new();
        for (t, e) in netlist.elements.iter().enumerate() {
            match *e {
                Element::Waveplate { channel, angle } => ops.push(Op::Wp { ch: channel.0, angle }),
                Element::Pbs { in1, in2, out1, out2 } => {
                    ops.push(Op::Pbs { in1: in1.0, in2: in2.0, out1: out1.0, out2: out2.0 })
                }
                Element::LossSite { channel, .. } => {
                    let (idx, cat) = site_of[t];
                    ops.push(Op::Loss { idx, cat, ch: channel.0 });
                }
                Element::Detector { .. } => {}
            }
        }

        // Loss sites with no later beamsplitter on their channel are
        // deferred to the end.
        let mut tails: Vec<Tail> = Vec::new();
        let mut kept = Vec::with_capacity(ops.len());
        for (t, op) in ops.iter().enumerate() {
            if let Op::Loss { idx, cat, ch } = *op {
                if !ops[t + 1..].iter().any(|o| o.moves(ch)) {
                    match tails.iter_mut().find(|tl| tl.ch == ch) {
                        Some(tl) => tl.sites.push((idx, cat)),
                        None => {
                            let required = required.iter().position(|&r| r == ch);
                            tails.push(Tail { ch, required, sites: alloc::vec![(idx, cat)] });
                        }
                    }
                    continue;
                }
            }
            kept.push(*op);
        }
        let mut ops = kept;

        // Waveplates commute with losses and with elements on other
        // channels; sink each one to its channel's next beamsplitter.
        for i in (0..ops.len()).rev() {
            if let Op::Wp { ch, .. } = ops[i] {
                let mut j = i;
                while j + 1 < ops.len() && !ops[j + 1].moves(ch) {
                    ops.swap(j, j + 1);
                    j += 1;
                }
            }
        }
        // Trailing waveplates: folded into the projection on detector and
        // output arms, dropped elsewhere (a unitary on traced-out modes).
        let absorbed: [u16; 6] = core::array::from_fn(|k| if k < 3 { layout.detectors[k] } else { layout.outputs[k - 3] });
        let mut slot = alloc::vec![0xffu8; nch];
        for (k, &ch) in absorbed.iter().enumerate() {
            slot[usize::from(ch)] = k as u8;
        }
        let mut rotation = [[1.0, 0.0, 0.0, 1.0]; 6];
        let mut kept = Vec::with_capacity(ops.len());
        for (t, op) in ops.iter().enumerate() {
            if let Op::Wp { ch, angle } = *op {
                if !ops[t + 1..].iter().any(|o| o.moves(ch)) {
                    let k = slot[usize::from(ch)];
                    if k != 0xff {
                        let (s, c) = (libm::sin(angle), libm::cos(angle));
                        let m = rotation[usize::from(k)];
                        rotation[usize::from(k)] =
                            [c * m[0] - s * m[2], c * m[1] - s * m[3], s * m[0] + c * m[2], s * m[1] + c * m[3]];
                    }
                    continue;
                }
            }
            kept.push(*op);
        }
        let ops = kept;

        let n = ops.len();
        let w = 2 * nch;
        let mut reach = alloc::vec![0u8; (n + 1) * w];
        for ch in 0..nch {
            let r = match required.iter().position(|&r| usize::from(r) == ch) {
                Some(k) => 1 << k,
                None => FREE,
            };
            reach[n * w + 2 * ch] = r;
            reach[n * w + 2 * ch + 1] = r;
        }
        for t in (0..n).rev() {
            let (before, after) = reach.split_at_mut((t + 1) * w);
            let before = &mut before[t * w..];
            let after = &after[..w];
            before.copy_from_slice(after);
            match ops[t] {
                Op::Wp { ch, angle } => {
                    let (h, v) = (2 * usize::from(ch), 2 * usize::from(ch) + 1);
                    let c = libm::cos(angle).abs() > ROT_EPS;
                    let s = libm::sin(angle).abs() > ROT_EPS;
                    let pick = |keep: bool, r: u8| if keep { r } else { 0 };
                    before[h] = pick(c, after[h]) | pick(s, after[v]);
                    before[v] = pick(s, after[h]) | pick(c, after[v]);
                }
                Op::Pbs { in1, in2, out1, out2 } => {
                    let m = |ch: u16, v: usize| 2 * usize::from(ch) + v;
                    for o in [out1, out2] {
                        before[m(o, 0)] = 0;
                        before[m(o, 1)] = 0;
                    }
                    before[m(in1, 0)] = after[m(out1, 0)];
                    before[m(in1, 1)] = after[m(out2, 1)];
                    before[m(in2, 0)] = after[m(out2, 0)];
                    before[m(in2, 1)] = after[m(out1, 1)];
                }
                Op::Loss { .. } => {}
            }
        }

        let mut fut = alloc::vec![0u8; (n + 1) * 64];
        let mut rem = alloc::vec![[0u8; 3]; n + 1];
        let bump = |fut: &mut [u8], m: u8| {
            for (f, x) in fut.iter_mut().enumerate() {
                if m & f as u8 != 0 {
                    *x += 1;
                }
            }
        };
        for tl in &tails {
            let m = reach[n * w + 2 * usize::from(tl.ch)] & full_mask;
            for &(_, cat) in &tl.sites {
                bump(&mut fut[n * 64..], m);
                rem[n][cat] += 1;
            }
        }
        for t in (0..n).rev() {
            let (head, rest) = fut.split_at_mut((t + 1) * 64);
            let head = &mut head[t * 64..];
            head.copy_from_slice(&rest[..64]);
            rem[t] = rem[t + 1];
            if let Op::Loss { cat, ch, .. } = ops[t] {
                let c = 2 * usize::from(ch);
                let m = (reach[t * w + c] | reach[t * w + c + 1]) & full_mask;
                bump(head, m);
                rem[t][cat] += 1;
            }
        }

        Ok(Engine {
            netlist,
            layout,
            signs,
            sites,
            nch,
            ops,
            tails,
            absorbed,
            slot,
            rotation,
            nreq,
            full_mask,
            reach,
            fut,
            rem,
        })
    }

    pub fn netlist(&self) -> &Netlist {
        self.netlist
    }

    pub fn sites(&self) -> &[SiteInfo] {
        &self.sites
    }

    pub fn signs(&self) -> &SignTable {
        &self.signs
    }

    pub fn acceptance(&self) -> Acceptance {
        self.layout.acceptance
    }

    /// Event categories for the given source and loss rates.
    pub fn categories(&self, g2: f64, loss: [f64; 3]) -> Result<Categories, AnalysisError> {
        Ok(Categories::for_sites(&self.sites, g2, loss)?)
    }

    pub fn select(&self, g2: f64, loss: [f64; 3], coverage: f64) -> Result<Selection, AnalysisError> {
        Ok(Selection::compute(self.categories(g2, loss)?, coverage)?)
    }

    /// Simulates every live event the demand can include.
    pub fn build<R: TaskRunner>(&self, demand: Demand, runner: &R) -> Result<BranchTable, AnalysisError> {
        let emissions: Vec<EmissionEvent> = EmissionEvent::all().collect();
        let results = runner.map(emissions.len(), |i| self.explore(emissions[i], &demand));
        let mut events = Vec::new();
        for r in results {
            events.extend(r?);
        }
        Ok(BranchTable::from_events(demand, events))
    }

    /// Live events of one emission vector.
    pub fn explore(&self, e: EmissionEvent, demand: &Demand) -> Result<Vec<LiveEvent>, AnalysisError> {
        let d = e.double_count() as u8;
        let allowed: Vec<([u8; 3], GroupStatus)> = demand
            .iter()
            .filter(|(g, s)| g[0] == d && **s != GroupStatus::Excluded)
            .filter(|(_, s)| match s {
                GroupStatus::Partial(cutoff) => cutoff.emission >= e,
                _ => true,
            })
            .map(|(g, s)| ([g[1], g[2], g[3]], *s))
            .collect();
        let mut out = Vec::new();
        if allowed.is_empty() {
            return Ok(out);
        }
        let mut ctx = Dfs { engine: self, emission: e, allowed, records: Vec::new(), out: &mut out };
        let mut state = shared_private_input(e, self.netlist)?;
        match ctx.allowance(0, [0; 3]) {
            Some(a) => self.prune(&mut state, 0, a),
            None => return Ok(out),
        }
        if !state.is_empty() {
            ctx.visit(0, state, [0; 3], LossSet::empty())?;
        }
        Ok(out)
    }

    fn prune(&self, state: &mut PureState, t: usize, allowance: u32) {
        state.retain(|b| self.viable(b, t, allowance));
    }

    /// Necessary conditions for a basis state to end with exactly one photon
    /// in every required channel, given at most `allowance` more losses.
    fn viable(&self, basis: &FockBasisState, t: usize, allowance: u32) -> bool {
        let w = 2 * self.nch;
        let reach = &self.reach[t * w..(t + 1) * w];
        let mut groups = [(0u8, 0u32); fock::MAX_PHOTONS];
        let mut ng = 0;
        for &code in basis.codes() {
            let i = usize::from(code >> 3);
            if i >= w {
                continue;
            }
            let m = reach[i];
            match groups[..ng].iter_mut().find(|g| g.0 == m) {
                Some(g) => g.1 += 1,
                None => {
                    groups[ng] = (m, 1);
                    ng += 1;
                }
            }
        }
        let groups = &groups[..ng];
        let any = groups.iter().fold(0u8, |acc, g| acc | g.0) & self.full_mask;
        if any != self.full_mask {
            return false;
        }
        let fut = &self.fut[t * 64..(t + 1) * 64];
        let check = |f: u8| -> bool {
            let need = f.count_ones();
            let mut reaching = 0;
            let mut confined = 0;
            for &(m, n) in groups {
                let r = m & self.full_mask;
                if r & f != 0 {
                    reaching += n;
                }
                if m & FREE == 0 && r & !f == 0 {
                    confined += n;
                }
            }
            let slack = allowance.min(u32::from(fut[usize::from(f)]));
            reaching >= need && confined <= need + slack
        };
        if !check(self.full_mask) {
            return false;
        }
        groups.iter().all(|&(m, _)| {
            let f = m & self.full_mask;
            f == 0 || check(f)
        })
    }

    /// Adds accepted mass and GHZ overlap per shared-mode photon number.
    fn accumulate(
        &self,
        terms: &[(FockBasisState, Complex64)],
        records: &mut Vec<(FockBasisState, u8, usize, Complex64)>,
        success: &mut [f64],
        numerator: &mut [f64],
    ) {
        records.clear();
        let mut codes = [0u16; fock::MAX_PHOTONS];
        for (basis, amp) in terms {
            let mut cnt = [0u8; 6];
            let mut pols = 0u8;
            let mut a = 0;
            let n = basis.photon_count();
            for (i, &code) in basis.codes().iter().enumerate() {
                if code & 0b111 == 0 {
                    a += 1;
                }
                codes[i] = code;
                let ch = usize::from(code_channel(code));
                if ch < self.nch && self.slot[ch] != 0xff {
                    let k = usize::from(self.slot[ch]);
                    cnt[k] += 1;
                    if code_is_v(code) {
                        pols |= 1 << k;
                    }
                    codes[i] = code & !0b1000;
                }
            }
            if cnt[..self.nreq].iter().any(|&c| c != 1) {
                continue;
            }
            success[a] += amp.norm_sqr();
            if cnt == [1; 6] {
                // one photon per absorbed channel: clearing the bit keeps the order
                records.push((FockBasisState::from_codes_unsorted(&codes[..n]), pols, a, *amp));
            }
        }
        records.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        let zero = Complex64::new(0.0, 0.0);
        let mut i = 0;
        while i < records.len() {
            let (key, _, a, _) = records[i];
            let mut tensor = [zero; 64];
            let mut j = i;
            while j < records.len() && records[j].0 == key {
                tensor[usize::from(records[j].1)] += records[j].3;
                j += 1;
            }
            for (k, m) in self.rotation.iter().enumerate() {
                let bit = 1 << k;
                for idx in (0..64).filter(|x| x & bit == 0) {
                    let (x0, x1) = (tensor[idx], tensor[idx | bit]);
                    tensor[idx] = x0 * m[0] + x1 * m[1];
                    tensor[idx | bit] = x0 * m[2] + x1 * m[3];
                }
            }
            for p in 0..8u8 {
                let eps = self.signs.sign(Pattern(p));
                let z = tensor[usize::from(p)] + tensor[usize::from(p) | 0b111000] * eps;
                numerator[a] += z.norm_sqr() / 2.0;
            }
            i = j;
        }
    }
}

struct Dfs<'a, 'n> {
    engine: &'a Engine<'n>,
    emission: EmissionEvent,
    allowed: Vec<([u8; 3], GroupStatus)>,
    records: Vec<(FockBasisState, u8, usize, Complex64)>,
    out: &'a mut Vec<LiveEvent>,
}

impl Dfs<'_, '_> {
    /// Most further triggers any allowed group still permits, or `None`
    /// when no allowed group is reachable from `counts`.
    fn allowance(&self, t: usize, counts: [u8; 3]) -> Option<u32> {
        let rem = self.engine.rem[t];
        let mut best = None;
        for (g, _) in &self.allowed {
            let ok = (0..3).all(|c| g[c] >= counts[c] && g[c] - counts[c] <= rem[c]);
            if ok {
                let extra: u32 = (0..3).map(|c| u32::from(g[c] - counts[c])).sum();
                best = Some(best.map_or(extra, |b: u32| b.max(extra)));
            }
        }
        best
    }

    fn visit(&mut self, mut t: usize, mut state: PureState, counts: [u8; 3], losses: LossSet) -> Result<(), AnalysisError> {
        let engine = self.engine;
        let n = engine.netlist;
        while t < engine.ops.len() {
            match engine.ops[t] {
                Op::Wp { ch, angle } => {
                    state = fock::apply_polarization_rotation(&state, Channel(ch), angle);
                }
                Op::Pbs { in1, in2, out1, out2 } => {
                    state = fock::apply_pbs(&state, Channel(in1), Channel(in2), Channel(out1), Channel(out2));
                }
                Op::Loss { idx, cat, ch } => {
                    let mut hit = counts;
                    hit[cat] += 1;
                    if let Some(a) = self.allowance(t + 1, hit) {
                        let mut lost = fock::apply_loss(&state, Channel(ch), n.loss_channel(idx))?;
                        engine.prune(&mut lost, t + 1, a);
                        if !lost.is_empty() {
                            let mut l = losses;
                            l.insert(idx);
                            self.visit(t + 1, lost, hit, l)?;
                        }
                    }
                    match self.allowance(t + 1, counts) {
                        Some(a) => engine.prune(&mut state, t + 1, a),
                        None => return Ok(()),
                    }
                    if state.is_empty() {
                        return Ok(());
                    }
                }
            }
            t += 1;
        }
        self.finish(&state, counts, losses)
    }

    /// Applies the deferred losses and records one event per choice of
    /// deferred sites.
    fn finish(&mut self, state: &PureState, counts: [u8; 3], losses: LossSet) -> Result<(), AnalysisError> {
        let engine = self.engine;
        let tails = &engine.tails;
        // A required channel holding n photons needs exactly n - 1 of its
        // deferred sites to fire; partition the terms by that vector.
        let mut tagged: Vec<([u8; 6], usize)> = Vec::with_capacity(state.len());
        'terms: for (i, (basis, _)) in state.terms().iter().enumerate() {
            let mut cnt = [0u8; 6];
            for &code in basis.codes() {
                let ch = usize::from(code_channel(code));
                if ch < engine.nch && engine.slot[ch] != 0xff {
                    cnt[usize::from(engine.slot[ch])] += 1;
                }
            }
            let mut k = [0u8; 6];
            for r in 0..engine.nreq {
                let ch = engine.absorbed[r];
                let room = tails.iter().find(|tl| tl.ch == ch).map_or(0, |tl| tl.sites.len());
                if cnt[r] == 0 || usize::from(cnt[r] - 1) > room {
                    continue 'terms;
                }
                k[r] = cnt[r] - 1;
            }
            tagged.push((k, i));
        }
        tagged.sort_unstable();
        let free: Vec<usize> = (0..tails.len()).filter(|&i| tails[i].required.is_none()).collect();
        let photons = self.emission.photon_count();
        let mut i = 0;
        while i < tagged.len() {
            let kreq = tagged[i].0;
            let mut j = i;
            while j < tagged.len() && tagged[j].0 == kreq {
                j += 1;
            }
            let part: Vec<(FockBasisState, Complex64)> =
                tagged[i..j].iter().map(|&(_, t)| state.terms()[t]).collect();
            i = j;
            let mut k: Vec<usize> =
                tails.iter().map(|tl| tl.required.map_or(0, |r| usize::from(kreq[r]))).collect();
            loop {
                let events = self.expand(&k, counts, losses);
                if !events.is_empty() {
                    let mut s = PureState::from_terms(part.iter().copied());
                    for (tl, &kt) in tails.iter().zip(&k) {
                        for &(idx, _) in &tl.sites[..kt] {
                            s = fock::apply_loss(&s, Channel(tl.ch), engine.netlist.loss_channel(idx))?;
                        }
                    }
                    let mut success = alloc::vec![0.0; photons + 1];
                    let mut numerator = alloc::vec![0.0; photons + 1];
                    engine.accumulate(s.terms(), &mut self.records, &mut success, &mut numerator);
                    if success.iter().any(|&x| x != 0.0) {
                        for (key, group) in events {
                            self.out.push(LiveEvent {
                                key,
                                group,
                                success: success.clone(),
                                numerator: numerator.clone(),
                            });
                        }
                    }
                }
                // next assignment of the free tails
                let mut advanced = false;
                for &f in &free {
                    if k[f] < tails[f].sites.len() {
                        k[f] += 1;
                        advanced = true;
                        break;
                    }
                    k[f] = 0;
                }
                if !advanced {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Included events firing `k[i]` deferred sites of tail `i`.
    fn expand(&self, k: &[usize], counts: [u8; 3], losses: LossSet) -> Vec<(EventKey, GroupKey)> {
        let mut out = Vec::new();
        self.expand_from(0, k, counts, losses, &mut out);
        out
    }

    fn expand_from(&self, i: usize, k: &[usize], counts: [u8; 3], losses: LossSet, out: &mut Vec<(EventKey, GroupKey)>) {
        let tails = &self.engine.tails;
        if i == tails.len() {
            let key = EventKey { emission: self.emission, losses };
            if self.allowed.iter().any(|(g, s)| *g == counts && s.includes(&key)) {
                let d = self.emission.double_count() as u8;
                out.push((key, [d, counts[0], counts[1], counts[2]]));
            }
            return;
        }
        // no allowed group can absorb these counts
        if !self.allowed.iter().any(|(g, _)| (0..3).all(|c| g[c] >= counts[c])) {
            return;
        }
        let sites = &tails[i].sites;
        let mut pick: Vec<usize> = (0..k[i]).collect();
        loop {
            let mut c = counts;
            let mut l = losses;
            for &p in &pick {
                let (idx, cat) = sites[p];
                c[cat] += 1;
                l.insert(idx);
            }
            self.expand_from(i + 1, k, c, l, out);
            // next k-subset in lexicographic order
            let n = sites.len();
            let r = pick.len();
            let Some(pos) = (0..r).rev().find(|&q| pick[q] < n - r + q) else { break };
            pick[pos] += 1;
            for q in pos + 1..r {
                pick[q] = pick[q - 1] + 1;
            }
        }
    }
}
