//! Heralding on three single-photon detections, outcome-dependent GHZ
//! targets and the mixture formulas for fidelity and success probability.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{self, CircuitError, Netlist};
use crate::fock::{code_channel, code_is_v, FockBasisState, PureState};
use crate::sources::{self, EmissionEvent, Event, SourceError};

/// Ideal acceptance probability of the circuit.
pub const IDEAL_SUCCESS: f64 = 1.0 / 32.0;

/// Which detection patterns count as success.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Acceptance {
    /// One photon in every detector and in every output channel.
    #[default]
    SixFold,
    /// One photon in every detector; output channels unconstrained.
    Herald,
}

impl Acceptance {
    pub fn name(self) -> &'static str {
        match self {
            Acceptance::SixFold => "six-fold",
            Acceptance::Herald => "herald",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeraldError {
    #[error("netlist needs 3 detectors and 3 outputs, found {detectors} and {outputs}")]
    Layout { detectors: usize, outputs: usize },
    #[error("no sign reaches unit ideal fidelity: {0}")]
    SignCalibration(SignDiagnostics),
    #[error("total success probability is zero; fidelity undefined")]
    ZeroSuccess,
    #[error("covered mass must be positive, got {0}")]
    CoveredMass(f64),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Per-pattern ideal success and best fidelity from a failed calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct SignDiagnostics(pub Vec<(Pattern, f64, f64)>);

impl fmt::Display for SignDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (p, s, fid)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}: success {s:.6} fidelity {fid:.6}")?;
        }
        Ok(())
    }
}

/// Detector and output channels of a netlist, detectors in id order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub detectors: [u16; 3],
    pub outputs: [u16; 3],
    pub acceptance: Acceptance,
}

impl Layout {
    pub fn new(n: &Netlist, acceptance: Acceptance) -> Result<Self, HeraldError> {
        let dets = n.detectors();
        if dets.len() != 3 || n.outputs.len() != 3 {
            return Err(HeraldError::Layout { detectors: dets.len(), outputs: n.outputs.len() });
        }
        Ok(Layout {
            detectors: core::array::from_fn(|k| dets[k].1 .0),
            outputs: core::array::from_fn(|k| n.outputs[k].0),
            acceptance,
        })
    }

    /// Channels that must end with exactly one photon.
    pub fn required(&self) -> Vec<u16> {
        let mut r = self.detectors.to_vec();
        if self.acceptance == Acceptance::SixFold {
            r.extend_from_slice(&self.outputs);
        }
        r
    }

    fn inspect(&self, basis: &FockBasisState) -> Inspection {
        let mut det = [0u8; 3];
        let mut out = [0u8; 3];
        let mut pattern = 0u8;
        let mut out_v = 0u8;
        for &code in basis.codes() {
            let ch = code_channel(code);
            for k in 0..3 {
                if ch == self.detectors[k] {
                    det[k] += 1;
                    if code_is_v(code) {
                        pattern |= 1 << k;
                    }
                }
                if ch == self.outputs[k] {
                    out[k] += 1;
                    if code_is_v(code) {
                        out_v |= 1 << k;
                    }
                }
            }
        }
        let heralded = det == [1, 1, 1];
        let one_each = out == [1, 1, 1];
        let accepted = heralded && (one_each || self.acceptance == Acceptance::Herald);
        Inspection { accepted, one_each, pattern: Pattern(pattern), out_v }
    }

    fn strip_output_polarization(&self, basis: &FockBasisState) -> FockBasisState {
        let mut codes = [0u16; crate::fock::MAX_PHOTONS];
        let n = basis.photon_count();
        for (i, &code) in basis.codes().iter().enumerate() {
            codes[i] = if self.outputs.contains(&code_channel(code)) { code & !0b1000 } else { code };
        }
        // one photon per output channel, so clearing the bit keeps the order
        FockBasisState::from_codes_unsorted(&codes[..n])
    }
}

struct Inspection {
    accepted: bool,
    one_each: bool,
    pattern: Pattern,
    out_v: u8,
}

/// Polarizations seen by the three detectors: bit `k` set when detector `k`
/// (in id order) registers V.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern(pub u8);

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 0..3 {
            f.write_str(if self.0 >> k & 1 == 1 { "V" } else { "H" })?;
        }
        Ok(())
    }
}

/// Photon counts `(n_H, n_V)` per detector, summed over internal modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DetectionOutcome {
    pub counts: [(u8, u8); 3],
}

impl DetectionOutcome {
    pub fn pattern(&self) -> Option<Pattern> {
        let mut p = 0;
        for (k, &(h, v)) in self.counts.iter().enumerate() {
            match (h, v) {
                (1, 0) => {}
                (0, 1) => p |= 1 << k,
                _ => return None,
            }
        }
        Some(Pattern(p))
    }
}

/// Accepted components of `state`, split by detection outcome.
pub fn classify(
    state: &PureState,
    netlist: &Netlist,
    acceptance: Acceptance,
) -> Result<Vec<(DetectionOutcome, PureState)>, HeraldError> {
    let layout = Layout::new(netlist, acceptance)?;
    let mut parts: Vec<(DetectionOutcome, FockBasisState, Complex64)> = Vec::new();
    for &(basis, amp) in state.iter() {
        let ins = layout.inspect(&basis);
        if !ins.accepted {
            continue;
        }
        let counts = core::array::from_fn(|k| {
            if ins.pattern.0 >> k & 1 == 1 {
                (0, 1)
            } else {
                (1, 0)
            }
        });
        parts.push((DetectionOutcome { counts }, basis, amp));
    }
    parts.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(DetectionOutcome, PureState)> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        let outcome = parts[i].0;
        let mut j = i;
        while j < parts.len() && parts[j].0 == outcome {
            j += 1;
        }
        out.push((outcome, PureState::from_terms(parts[i..j].iter().map(|p| (p.1, p.2)))));
        i = j;
    }
    Ok(out)
}

/// GHZ sign per detection pattern: the heralded target is
/// `(|HHH> + sign |VVV>) / sqrt(2)` on the output channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignTable {
    signs: [i8; 8],
}

impl SignTable {
    pub fn from_signs(signs: [i8; 8]) -> Self {
        SignTable { signs }
    }

    pub fn sign(&self, p: Pattern) -> f64 {
        f64::from(self.signs[usize::from(p.0)])
    }

    pub fn signs(&self) -> [i8; 8] {
        self.signs
    }

    /// The same table with the sign of one pattern flipped.
    pub fn flipped(&self, p: Pattern) -> Self {
        let mut signs = self.signs;
        signs[usize::from(p.0)] = -signs[usize::from(p.0)];
        SignTable { signs }
    }
}

/// Accumulates success and GHZ-overlap mass of a branch state into buckets
/// chosen per basis state.
pub(crate) struct MeasureAccumulator<'a> {
    layout: &'a Layout,
    signs: &'a SignTable,
    records: Vec<(FockBasisState, bool, Pattern, usize, Complex64)>,
}

impl<'a> MeasureAccumulator<'a> {
    pub(crate) fn new(layout: &'a Layout, signs: &'a SignTable) -> Self {
        MeasureAccumulator { layout, signs, records: Vec::new() }
    }

    pub(crate) fn add(
        &mut self,
        terms: &[(FockBasisState, Complex64)],
        bucket: impl Fn(&FockBasisState) -> usize,
        success: &mut [f64],
        numerator: &mut [f64],
    ) {
        self.records.clear();
        for (basis, amp) in terms {
            let ins = self.layout.inspect(basis);
            if !ins.accepted {
                continue;
            }
            let b = bucket(basis);
            success[b] += amp.norm_sqr();
            if ins.one_each && (ins.out_v == 0 || ins.out_v == 0b111) {
                let key = self.layout.strip_output_polarization(basis);
                self.records.push((key, ins.out_v != 0, ins.pattern, b, *amp));
            }
        }
        self.records.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut i = 0;
        while i < self.records.len() {
            let (key, _, pattern, b, _) = self.records[i];
            let mut a_h = Complex64::new(0.0, 0.0);
            let mut a_v = Complex64::new(0.0, 0.0);
            let mut j = i;
            while j < self.records.len() && self.records[j].0 == key {
                if self.records[j].1 {
                    a_v += self.records[j].4;
                } else {
                    a_h += self.records[j].4;
                }
                j += 1;
            }
            numerator[b] += (a_h + a_v * self.signs.sign(pattern)).norm_sqr() / 2.0;
            i = j;
        }
    }
}

/// Accepted mass and outcome-corrected GHZ overlap of one branch.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BranchMeasures {
    pub success: f64,
    pub fidelity_numerator: f64,
}

/// Success is the accepted squared norm. The fidelity numerator sums
/// `|a_H(E) + sign a_V(E)|^2 / 2` over environments `E` (detector and loss
/// contents and the internal modes of the output photons), where `a_H`,
/// `a_V` are the amplitudes with all three outputs H, resp. V.
pub fn branch_measures(
    state: &PureState,
    netlist: &Netlist,
    signs: &SignTable,
    acceptance: Acceptance,
) -> Result<BranchMeasures, HeraldError> {
    let layout = Layout::new(netlist, acceptance)?;
    let mut s = [0.0];
    let mut num = [0.0];
    MeasureAccumulator::new(&layout, signs).add(state.terms(), |_| 0, &mut s, &mut num);
    Ok(BranchMeasures { success: s[0], fidelity_numerator: num[0] })
}

/// Runs the ideal circuit (indistinguishable single photons, no loss) and
/// picks, per detection pattern, the GHZ sign with unit fidelity.
pub fn derive_sign_table(netlist: &Netlist) -> Result<SignTable, HeraldError> {
    let layout = Layout::new(netlist, Acceptance::Herald)?;
    let g = sources::gram_coefficients(1.0, netlist.sources.len())?;
    let input = sources::build_input_state(EmissionEvent::singles(), &g, netlist)?;
    let out = circuit::run(netlist, &input, &[])?;
    let plus = SignTable::from_signs([1; 8]);
    let minus = SignTable::from_signs([-1; 8]);
    let mut success = [0.0; 8];
    let mut num_plus = [0.0; 8];
    let mut num_minus = [0.0; 8];
    let by_pattern = |b: &FockBasisState| usize::from(layout.inspect(b).pattern.0);
    MeasureAccumulator::new(&layout, &plus).add(out.terms(), by_pattern, &mut success, &mut num_plus);
    let mut scratch = [0.0; 8];
    MeasureAccumulator::new(&layout, &minus).add(out.terms(), by_pattern, &mut scratch, &mut num_minus);

    let mut signs = [1i8; 8];
    let mut diag = Vec::new();
    let mut ok = true;
    for p in 0..8 {
        let (sign, best) = if num_minus[p] > num_plus[p] { (-1, num_minus[p]) } else { (1, num_plus[p]) };
        signs[p] = sign;
        let fid = if success[p] > 0.0 { best / success[p] } else { 0.0 };
        if success[p] <= 0.0 || (fid - 1.0).abs() > 1e-9 {
            ok = false;
        }
        diag.push((Pattern(p as u8), success[p], fid));
    }
    if ok {
        Ok(SignTable { signs })
    } else {
        Err(HeraldError::SignCalibration(SignDiagnostics(diag)))
    }
}

/// Mixture-level measures; `success` is conditional on the covered mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureMeasures {
    /// `None` when no branch has accepted mass.
    pub fidelity: Option<f64>,
    pub success: f64,
    pub success_normalized: f64,
    pub covered_mass: f64,
}

impl MixtureMeasures {
    pub fn from_sums(weighted_success: f64, weighted_numerator: f64, covered_mass: f64) -> Self {
        let success = weighted_success / covered_mass;
        let fidelity = if weighted_success > 0.0 { Some(weighted_numerator / weighted_success) } else { None };
        MixtureMeasures { fidelity, success, success_normalized: success / IDEAL_SUCCESS, covered_mass }
    }
}

/// Folds branches in the given order.
pub fn mixture_measures(
    branches: &[(Event, BranchMeasures)],
    covered_mass: f64,
) -> Result<MixtureMeasures, HeraldError> {
    if !(covered_mass > 0.0) {
        return Err(HeraldError::CoveredMass(covered_mass));
    }
    let mut s = 0.0;
    let mut num = 0.0;
    for (e, m) in branches {
        s += e.probability * m.success;
        num += e.probability * m.fidelity_numerator;
    }
    Ok(MixtureMeasures::from_sums(s, num, covered_mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::canonical_ghz_netlist;
    use crate::sources::LossSet;

    fn ideal_output() -> (Netlist, PureState) {
        let n = canonical_ghz_netlist();
        let g = sources::gram_coefficients(1.0, 6).unwrap();
        let input = sources::build_input_state(EmissionEvent::singles(), &g, &n).unwrap();
        let out = circuit::run(&n, &input, &[]).unwrap();
        (n, out)
    }

    #[test]
    fn ideal_outcomes() {
        let (n, out) = ideal_output();
        let parts = classify(&out, &n, Acceptance::Herald).unwrap();
        assert_eq!(parts.len(), 8);
        let total: f64 = parts.iter().map(|(_, s)| s.norm_sqr()).sum();
        assert!((total - IDEAL_SUCCESS).abs() < 1e-12);
        let six: f64 = classify(&out, &n, Acceptance::SixFold).unwrap().iter().map(|(_, s)| s.norm_sqr()).sum();
        assert!((six - IDEAL_SUCCESS).abs() < 1e-12);
    }

    #[test]
    fn vacuum_has_no_accepted_outcome() {
        let n = canonical_ghz_netlist();
        let out = circuit::run(&n, &PureState::vacuum(), &[]).unwrap();
        assert!(classify(&out, &n, Acceptance::Herald).unwrap().is_empty());
    }

    #[test]
    fn sign_table_is_deterministic_and_sharp() {
        let (n, out) = ideal_output();
        let t = derive_sign_table(&n).unwrap();
        assert_eq!(t, derive_sign_table(&n).unwrap());
        let m = branch_measures(&out, &n, &t, Acceptance::SixFold).unwrap();
        assert!((m.success - IDEAL_SUCCESS).abs() < 1e-12);
        assert!((m.fidelity_numerator - IDEAL_SUCCESS).abs() < 1e-12);
        for p in 0..8 {
            let bad = t.flipped(Pattern(p));
            let m = branch_measures(&out, &n, &bad, Acceptance::SixFold).unwrap();
            // the flipped pattern contributes nothing, the other seven keep unit fidelity
            assert!((m.fidelity_numerator - 7.0 * IDEAL_SUCCESS / 8.0).abs() < 1e-12, "pattern {p}");
        }
    }

    #[test]
    fn lost_photon_carries_no_overlap() {
        let n = canonical_ghz_netlist();
        let t = derive_sign_table(&n).unwrap();
        let g = sources::gram_coefficients(1.0, 6).unwrap();
        let input = sources::build_input_state(EmissionEvent::from_mask(1), &g, &n).unwrap();
        // lose a photon on a GHZ arm: the heralded part has a photon short
        let x0_site = n.sites().iter().find(|s| s.channel == n.channel("x0").unwrap()).unwrap().id;
        let out = circuit::run(&n, &input, &[x0_site]).unwrap();
        let m = branch_measures(&out, &n, &t, Acceptance::Herald).unwrap();
        assert!(m.fidelity_numerator <= m.success);
    }

    #[test]
    fn mixture_of_ideal_branch() {
        let e = Event { emission: EmissionEvent::singles(), losses: LossSet::empty(), probability: 1.0 };
        let m = BranchMeasures { success: IDEAL_SUCCESS, fidelity_numerator: IDEAL_SUCCESS };
        let r = mixture_measures(&[(e, m)], 1.0).unwrap();
        assert_eq!(r.fidelity, Some(1.0));
        assert!((r.success_normalized - 1.0).abs() < 1e-15);
        let half = Event { probability: 0.5, ..e };
        let split = mixture_measures(&[(half, m), (half, m)], 1.0).unwrap();
        assert!((split.success - r.success).abs() < 1e-15);
        assert_eq!(split.fidelity, r.fidelity);
        let empty = mixture_measures(&[(e, BranchMeasures::default())], 1.0).unwrap();
        assert_eq!(empty.fidelity, None);
    }
}
