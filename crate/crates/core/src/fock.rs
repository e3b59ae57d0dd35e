//! Sparse second-quantized states.
//!
//! A mode is a (spatial channel, polarization, distinguishability index)
//! triple. Basis states store one packed mode code per photon in sorted order,
//! so a basis state is its own canonical lookup key. A [`PureState`] is a
//! sorted list of basis states with nonzero complex amplitudes.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::math::{binomial_f64, factorial, sqrt};

/// Upper bound on photons in one basis state (six sources, two photons each).
pub const MAX_PHOTONS: usize = 12;
/// Largest distinguishability index: one shared internal mode plus one
/// private mode per source.
pub const MAX_DIST_INDEX: u8 = 6;
/// Channel identifiers must fit in the 12 bits left over in a mode code.
pub const MAX_CHANNELS: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FockError {
    #[error("basis state would hold {0} photons; at most {MAX_PHOTONS} are supported")]
    TooManyPhotons(usize),
    #[error("distinguishability index {0} exceeds {MAX_DIST_INDEX}")]
    DistIndexOutOfRange(u8),
    #[error("channel {0} exceeds the channel limit")]
    ChannelOutOfRange(u16),
    #[error("loss channel {0} already holds photons")]
    LossChannelOccupied(u16),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Channel(pub u16);

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ch{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn flip(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// A single bosonic mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeKey {
    pub channel: Channel,
    pub polarization: Polarization,
    pub dist_index: u8,
}

impl ModeKey {
    pub fn new(channel: Channel, polarization: Polarization, dist_index: u8) -> Self {
        ModeKey { channel, polarization, dist_index }
    }

    pub fn h(channel: u16, dist_index: u8) -> Self {
        ModeKey::new(Channel(channel), Polarization::H, dist_index)
    }

    pub fn v(channel: u16, dist_index: u8) -> Self {
        ModeKey::new(Channel(channel), Polarization::V, dist_index)
    }

    fn validate(self) -> Result<(), FockError> {
        if self.dist_index > MAX_DIST_INDEX {
            return Err(FockError::DistIndexOutOfRange(self.dist_index));
        }
        if usize::from(self.channel.0) >= MAX_CHANNELS {
            return Err(FockError::ChannelOutOfRange(self.channel.0));
        }
        Ok(())
    }

    // channel:12 | polarization:1 | dist_index:3; the derived order on
    // ModeKey and the integer order on codes agree.
    pub(crate) fn code(self) -> u16 {
        let pol = match self.polarization {
            Polarization::H => 0,
            Polarization::V => 1,
        };
        (self.channel.0 << 4) | (pol << 3) | u16::from(self.dist_index)
    }

    pub(crate) fn from_code(code: u16) -> Self {
        let polarization = if code & 0b1000 == 0 { Polarization::H } else { Polarization::V };
        ModeKey {
            channel: Channel(code >> 4),
            polarization,
            dist_index: (code & 0b111) as u8,
        }
    }
}

#[inline]
pub(crate) fn code_channel(code: u16) -> u16 {
    code >> 4
}

#[inline]
pub(crate) fn code_with_channel(code: u16, channel: u16) -> u16 {
    (channel << 4) | (code & 0xf)
}

#[inline]
pub(crate) fn code_is_v(code: u16) -> bool {
    code & 0b1000 != 0
}

/// Occupation-number basis state, stored as the sorted multiset of photon modes.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FockBasisState {
    codes: [u16; MAX_PHOTONS],
    len: u8,
}

impl FockBasisState {
    pub fn vacuum() -> Self {
        FockBasisState { codes: [0; MAX_PHOTONS], len: 0 }
    }

    /// Builds a basis state from one mode per photon (repeats raise occupation).
    pub fn from_modes(modes: &[ModeKey]) -> Result<Self, FockError> {
        if modes.len() > MAX_PHOTONS {
            return Err(FockError::TooManyPhotons(modes.len()));
        }
        let mut state = FockBasisState::vacuum();
        for &m in modes {
            m.validate()?;
            state.codes[usize::from(state.len)] = m.code();
            state.len += 1;
        }
        state.sort();
        Ok(state)
    }

    /// Builds a basis state from explicit occupation counts.
    pub fn from_occupations(occupations: &[(ModeKey, usize)]) -> Result<Self, FockError> {
        let total: usize = occupations.iter().map(|&(_, n)| n).sum();
        if total > MAX_PHOTONS {
            return Err(FockError::TooManyPhotons(total));
        }
        let mut modes = Vec::with_capacity(total);
        for &(m, n) in occupations {
            modes.extend(core::iter::repeat(m).take(n));
        }
        FockBasisState::from_modes(&modes)
    }

    pub(crate) fn from_codes_unsorted(codes: &[u16]) -> Self {
        debug_assert!(codes.len() <= MAX_PHOTONS);
        let mut state = FockBasisState::vacuum();
        state.codes[..codes.len()].copy_from_slice(codes);
        state.len = codes.len() as u8;
        state.sort();
        state
    }

    fn sort(&mut self) {
        let n = usize::from(self.len);
        // insertion sort: n <= 12
        for i in 1..n {
            let mut j = i;
            while j > 0 && self.codes[j - 1] > self.codes[j] {
                self.codes.swap(j - 1, j);
                j -= 1;
            }
        }
    }

    #[inline]
    pub(crate) fn codes(&self) -> &[u16] {
        &self.codes[..usize::from(self.len)]
    }

    pub fn photon_count(&self) -> usize {
        usize::from(self.len)
    }

    pub fn is_vacuum(&self) -> bool {
        self.len == 0
    }

    /// Canonically ordered (mode, count) pairs, counts strictly positive.
    pub fn occupations(&self) -> Occupations<'_> {
        Occupations { codes: self.codes(), pos: 0 }
    }

    pub fn occupation(&self, mode: ModeKey) -> usize {
        let code = mode.code();
        self.codes().iter().filter(|&&c| c == code).count()
    }

    pub fn channel_count(&self, channel: Channel) -> usize {
        self.codes().iter().filter(|&&c| code_channel(c) == channel.0).count()
    }

    /// Photons in `channel` as (H count, V count).
    pub fn polarization_counts(&self, channel: Channel) -> (usize, usize) {
        let mut h = 0;
        let mut v = 0;
        for &c in self.codes() {
            if code_channel(c) == channel.0 {
                if code_is_v(c) {
                    v += 1;
                } else {
                    h += 1;
                }
            }
        }
        (h, v)
    }

    /// Product of occupation factorials, the bosonic normalization of the
    /// monomial that creates this state.
    pub fn factorial_product(&self) -> f64 {
        let mut product = 1.0;
        for (_, n) in self.occupations() {
            product *= factorial(n);
        }
        product
    }

    /// Multiset of distinguishability indices, as counts per index.
    pub fn dist_index_counts(&self) -> [u8; MAX_DIST_INDEX as usize + 1] {
        let mut counts = [0u8; MAX_DIST_INDEX as usize + 1];
        for &c in self.codes() {
            counts[usize::from(c & 0b111)] += 1;
        }
        counts
    }
}

impl fmt::Debug for FockBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        let mut first = true;
        for (m, n) in self.occupations() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            let pol = match m.polarization {
                Polarization::H => 'H',
                Polarization::V => 'V',
            };
            write!(f, "{}_{}{}{}", n, m.channel.0, pol, m.dist_index)?;
        }
        f.write_str(">")
    }
}

pub struct Occupations<'a> {
    codes: &'a [u16],
    pos: usize,
}

impl Iterator for Occupations<'_> {
    type Item = (ModeKey, usize);

    fn next(&mut self) -> Option<Self::Item> {
        let code = *self.codes.get(self.pos)?;
        let mut end = self.pos + 1;
        while end < self.codes.len() && self.codes[end] == code {
            end += 1;
        }
        let count = end - self.pos;
        self.pos = end;
        Some((ModeKey::from_code(code), count))
    }
}

/// Sparse pure state: sorted basis states with nonzero amplitudes.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PureState {
    terms: Vec<(FockBasisState, Complex64)>,
}

impl PureState {
    pub fn vacuum() -> Self {
        PureState { terms: alloc::vec![(FockBasisState::vacuum(), Complex64::new(1.0, 0.0))] }
    }

    pub fn zero() -> Self {
        PureState { terms: Vec::new() }
    }

    pub fn basis(state: FockBasisState) -> Self {
        PureState { terms: alloc::vec![(state, Complex64::new(1.0, 0.0))] }
    }

    /// Collects terms, merging duplicates and dropping exact zeros.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (FockBasisState, Complex64)>,
    {
        let mut terms: Vec<_> = terms.into_iter().collect();
        canonicalize(&mut terms);
        PureState { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(FockBasisState, Complex64)> + '_ {
        self.terms.iter()
    }

    pub fn terms(&self) -> &[(FockBasisState, Complex64)] {
        &self.terms
    }

    pub fn amplitude(&self, basis: &FockBasisState) -> Complex64 {
        match self.terms.binary_search_by(|(b, _)| b.cmp(basis)) {
            Ok(i) => self.terms[i].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn scale(&self, factor: Complex64) -> PureState {
        PureState::from_terms(self.terms.iter().map(|&(b, a)| (b, a * factor)))
    }

    /// `self + other`, used for superpositions and linearity checks.
    pub fn add(&self, other: &PureState) -> PureState {
        PureState::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    /// Drops terms with `|amp| < epsilon`. `epsilon = 0` keeps everything.
    pub fn prune(&mut self, epsilon: f64) {
        if epsilon > 0.0 {
            self.terms.retain(|(_, a)| a.norm() >= epsilon);
        }
    }

    /// Keeps only the terms satisfying `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&FockBasisState) -> bool) {
        self.terms.retain(|(b, _)| keep(b));
    }

    pub fn max_photon_count(&self) -> usize {
        self.terms.iter().map(|(b, _)| b.photon_count()).max().unwrap_or(0)
    }
}

pub(crate) fn canonicalize(terms: &mut Vec<(FockBasisState, Complex64)>) {
    // stable sort: equal keys are summed in production order
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = 0;
    let mut i = 0;
    while i < terms.len() {
        let key = terms[i].0;
        let mut amp = terms[i].1;
        let mut j = i + 1;
        while j < terms.len() && terms[j].0 == key {
            amp += terms[j].1;
            j += 1;
        }
        if amp.re != 0.0 || amp.im != 0.0 {
            terms[out] = (key, amp);
            out += 1;
        }
        i = j;
    }
    terms.truncate(out);
}

/// Normalized single-basis state for the given photons; repeated modes yield
/// occupation counts, i.e. `(a†)^n / sqrt(n!) |vac>` has amplitude 1.
pub fn make_basis_state(photons: &[ModeKey]) -> Result<PureState, FockError> {
    Ok(PureState::basis(FockBasisState::from_modes(photons)?))
}

/// Rotates polarization on `channel` by `angle` radians:
/// `a†_H -> cos a†_H + sin a†_V`, `a†_V -> -sin a†_H + cos a†_V`, per index.
pub fn apply_polarization_rotation(state: &PureState, channel: Channel, angle: f64) -> PureState {
    let (s, c) = (libm::sin(angle), libm::cos(angle));
    let mut table = RotationTable::new(c, s);
    let mut out = Vec::with_capacity(state.len() * 2);
    for &(basis, amp) in state.iter() {
        let mut rest = [0u16; MAX_PHOTONS];
        let mut n_rest = 0;
        // (H code, V code, n_H, n_V) per distinguishability index present
        let mut groups = [(0u16, 0u16, 0usize, 0usize); MAX_PHOTONS];
        let mut n_groups = 0;
        for &code in basis.codes() {
            if code_channel(code) != channel.0 {
                rest[n_rest] = code;
                n_rest += 1;
                continue;
            }
            let h_code = code & !0b1000;
            let slot = match groups[..n_groups].iter().position(|g| g.0 == h_code) {
                Some(i) => i,
                None => {
                    groups[n_groups] = (h_code, h_code | 0b1000, 0, 0);
                    n_groups += 1;
                    n_groups - 1
                }
            };
            if code_is_v(code) {
                groups[slot].3 += 1;
            } else {
                groups[slot].2 += 1;
            }
        }
        if n_groups == 0 {
            out.push((basis, amp));
            continue;
        }
        let mut expansions: [&[(usize, f64)]; MAX_PHOTONS] = [&[]; MAX_PHOTONS];
        for g in 0..n_groups {
            table.ensure(groups[g].2, groups[g].3);
        }
        for g in 0..n_groups {
            expansions[g] = table.get(groups[g].2, groups[g].3);
        }
        let mut idx = [0usize; MAX_PHOTONS];
        'odometer: loop {
            let mut codes = rest;
            let mut len = n_rest;
            let mut w = 1.0;
            for g in 0..n_groups {
                let (h_code, v_code, nh, nv) = groups[g];
                let (h, coef) = expansions[g][idx[g]];
                w *= coef;
                for _ in 0..h {
                    codes[len] = h_code;
                    len += 1;
                }
                for _ in h..nh + nv {
                    codes[len] = v_code;
                    len += 1;
                }
            }
            out.push((FockBasisState::from_codes_unsorted(&codes[..len]), amp * w));
            let mut g = 0;
            loop {
                if g == n_groups {
                    break 'odometer;
                }
                idx[g] += 1;
                if idx[g] < expansions[g].len() {
                    break;
                }
                idx[g] = 0;
                g += 1;
            }
        }
    }
    canonicalize(&mut out);
    PureState { terms: out }
}

struct RotationTable {
    c: f64,
    s: f64,
    entries: Vec<Option<Vec<(usize, f64)>>>,
}

impl RotationTable {
    fn new(c: f64, s: f64) -> Self {
        let side = MAX_PHOTONS + 1;
        RotationTable { c, s, entries: alloc::vec![None; side * side] }
    }

    fn ensure(&mut self, nh: usize, nv: usize) {
        let i = nh * (MAX_PHOTONS + 1) + nv;
        if self.entries[i].is_none() {
            let mut e = rotate_occupation(nh, nv, self.c, self.s);
            e.retain(|&(_, coef)| coef != 0.0);
            self.entries[i] = Some(e);
        }
    }

    fn get(&self, nh: usize, nv: usize) -> &[(usize, f64)] {
        self.entries[nh * (MAX_PHOTONS + 1) + nv].as_deref().unwrap_or(&[])
    }
}

/// Expansion of `(a†_H)^nh (a†_V)^nv / sqrt(nh! nv!)` after rotation, as
/// (number of H photons out, amplitude on the normalized output state).
fn rotate_occupation(nh: usize, nv: usize, c: f64, s: f64) -> Vec<(usize, f64)> {
    let n = nh + nv;
    let mut coef = alloc::vec![0.0; n + 1];
    for j in 0..=nh {
        let a = binomial_f64(nh, j) * powu(c, j) * powu(s, nh - j);
        for k in 0..=nv {
            let b = binomial_f64(nv, k) * powu(-s, k) * powu(c, nv - k);
            coef[j + k] += a * b;
        }
    }
    let norm_in = sqrt(factorial(nh) * factorial(nv));
    (0..=n).map(|h| (h, coef[h] * sqrt(factorial(h) * factorial(n - h)) / norm_in)).collect()
}

fn powu(x: f64, k: usize) -> f64 {
    let mut r = 1.0;
    for _ in 0..k {
        r *= x;
    }
    r
}

/// Polarizing beamsplitter as a mode relabeling, per index:
/// H transmits (`in1 -> out1`, `in2 -> out2`), V swaps arms.
pub fn apply_pbs(
    state: &PureState,
    in1: Channel,
    in2: Channel,
    out1: Channel,
    out2: Channel,
) -> PureState {
    let mut out = Vec::with_capacity(state.len());
    let mut codes: Vec<u16> = Vec::with_capacity(MAX_PHOTONS);
    for &(basis, amp) in state.iter() {
        codes.clear();
        let mut touched = false;
        for &code in basis.codes() {
            let ch = code_channel(code);
            let target = if ch == in1.0 {
                Some(if code_is_v(code) { out2 } else { out1 })
            } else if ch == in2.0 {
                Some(if code_is_v(code) { out1 } else { out2 })
            } else {
                None
            };
            match target {
                Some(t) => {
                    touched = true;
                    codes.push(code_with_channel(code, t.0));
                }
                None => codes.push(code),
            }
        }
        if touched {
            out.push((FockBasisState::from_codes_unsorted(&codes), amp));
        } else {
            out.push((basis, amp));
        }
    }
    // relabeling is a bijection on basis states; only the order can change
    out.sort_by(|a, b| a.0.cmp(&b.0));
    PureState { terms: out }
}

/// Coherently moves one photon from `channel` into the empty `loss_channel`,
/// with amplitude `sqrt(n_{s,d} / N)` for each occupied (polarization, index).
/// Basis states with no photon in `channel` pass unchanged.
pub fn apply_loss(
    state: &PureState,
    channel: Channel,
    loss_channel: Channel,
) -> Result<PureState, FockError> {
    if usize::from(loss_channel.0) >= MAX_CHANNELS {
        return Err(FockError::ChannelOutOfRange(loss_channel.0));
    }
    let mut out = Vec::with_capacity(state.len() * 2);
    let mut codes: Vec<u16> = Vec::with_capacity(MAX_PHOTONS);
    for &(basis, amp) in state.iter() {
        let all = basis.codes();
        if all.iter().any(|&c| code_channel(c) == loss_channel.0) {
            return Err(FockError::LossChannelOccupied(loss_channel.0));
        }
        let total = all.iter().filter(|&&c| code_channel(c) == channel.0).count();
        if total == 0 {
            out.push((basis, amp));
            continue;
        }
        let mut i = 0;
        while i < all.len() {
            let code = all[i];
            let mut end = i + 1;
            while end < all.len() && all[end] == code {
                end += 1;
            }
            if code_channel(code) == channel.0 {
                let n = end - i;
                codes.clear();
                codes.extend_from_slice(&all[..i]);
                codes.extend_from_slice(&all[i + 1..]);
                codes.push(code_with_channel(code, loss_channel.0));
                let factor = sqrt(n as f64 / total as f64);
                out.push((FockBasisState::from_codes_unsorted(&codes), amp * factor));
            }
            i = end;
        }
    }
    canonicalize(&mut out);
    Ok(PureState { terms: out })
}

/// Applies `sum_j coef_j a†_{mode_j}` to every term.
pub fn apply_creation(
    state: &PureState,
    operator: &[(ModeKey, f64)],
) -> Result<PureState, FockError> {
    let mut out = Vec::with_capacity(state.len() * operator.len());
    let mut codes: Vec<u16> = Vec::with_capacity(MAX_PHOTONS);
    for &(mode, _) in operator {
        mode.validate()?;
    }
    for &(basis, amp) in state.iter() {
        if basis.photon_count() >= MAX_PHOTONS {
            return Err(FockError::TooManyPhotons(basis.photon_count() + 1));
        }
        for &(mode, coef) in operator {
            if coef == 0.0 {
                continue;
            }
            let n = basis.occupation(mode);
            codes.clear();
            codes.extend_from_slice(basis.codes());
            codes.push(mode.code());
            let factor = coef * sqrt((n + 1) as f64);
            out.push((FockBasisState::from_codes_unsorted(&codes), amp * factor));
        }
    }
    canonicalize(&mut out);
    Ok(PureState { terms: out })
}

/// Hermitian inner product `<a|b>`.
pub fn inner_product(a: &PureState, b: &PureState) -> Complex64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = Complex64::new(0.0, 0.0);
    let (ta, tb) = (a.terms(), b.terms());
    while i < ta.len() && j < tb.len() {
        match ta[i].0.cmp(&tb[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                acc += ta[i].1.conj() * tb[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, SQRT_2};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn basis(modes: &[ModeKey]) -> FockBasisState {
        FockBasisState::from_modes(modes).unwrap()
    }

    fn assert_state_eq(a: &PureState, b: &PureState, tol: f64) {
        let diff = a.add(&b.scale(c(-1.0)));
        assert!(diff.norm_sqr() < tol * tol, "states differ:\n{:?}\n{:?}", a, b);
    }

    #[test]
    fn vacuum_and_single_photon() {
        let vac = make_basis_state(&[]).unwrap();
        assert_eq!(vac.len(), 1);
        assert!(vac.terms()[0].0.is_vacuum());
        assert_eq!(vac.terms()[0].1, c(1.0));

        let one = make_basis_state(&[ModeKey::h(0, 0)]).unwrap();
        assert_eq!(one.terms()[0].0.occupation(ModeKey::h(0, 0)), 1);
        assert_eq!(one.terms()[0].1, c(1.0));
    }

    #[test]
    fn repeated_mode_gives_occupation_two() {
        let two = make_basis_state(&[ModeKey::h(0, 0), ModeKey::h(0, 0)]).unwrap();
        assert_eq!(two.len(), 1);
        let occ: Vec<_> = two.terms()[0].0.occupations().collect();
        assert_eq!(occ, [(ModeKey::h(0, 0), 2)]);
        assert_eq!(two.terms()[0].1, c(1.0));
    }

    #[test]
    fn limits_are_enforced() {
        let too_many = [ModeKey::h(0, 0); 13];
        assert_eq!(make_basis_state(&too_many), Err(FockError::TooManyPhotons(13)));
        assert_eq!(
            make_basis_state(&[ModeKey::h(0, 7)]),
            Err(FockError::DistIndexOutOfRange(7))
        );
    }

    #[test]
    fn rotation_of_single_photon() {
        let psi = make_basis_state(&[ModeKey::h(3, 0)]).unwrap();
        let out = apply_polarization_rotation(&psi, Channel(3), FRAC_PI_4);
        let expected = PureState::from_terms([
            (basis(&[ModeKey::h(3, 0)]), c(FRAC_1_SQRT_2)),
            (basis(&[ModeKey::v(3, 0)]), c(FRAC_1_SQRT_2)),
        ]);
        assert_state_eq(&out, &expected, 1e-15);
    }

    #[test]
    fn rotation_composes_to_quarter_turn() {
        let psi = make_basis_state(&[ModeKey::h(3, 0)]).unwrap();
        let once = apply_polarization_rotation(&psi, Channel(3), FRAC_PI_4);
        let twice = apply_polarization_rotation(&once, Channel(3), FRAC_PI_4);
        let expected = make_basis_state(&[ModeKey::v(3, 0)]).unwrap();
        assert_state_eq(&twice, &expected, 1e-15);
    }

    #[test]
    fn rotation_of_two_photons() {
        // (a_H + a_V)^2 / (sqrt2 sqrt2 sqrt2!) |0> expanded by hand
        let psi = make_basis_state(&[ModeKey::h(1, 0), ModeKey::h(1, 0)]).unwrap();
        let out = apply_polarization_rotation(&psi, Channel(1), FRAC_PI_4);
        let expected = PureState::from_terms([
            (basis(&[ModeKey::h(1, 0), ModeKey::h(1, 0)]), c(0.5)),
            (basis(&[ModeKey::h(1, 0), ModeKey::v(1, 0)]), c(SQRT_2 / 2.0)),
            (basis(&[ModeKey::v(1, 0), ModeKey::v(1, 0)]), c(0.5)),
        ]);
        assert_state_eq(&out, &expected, 1e-15);
    }

    #[test]
    fn rotation_leaves_other_channels() {
        let psi = make_basis_state(&[ModeKey::h(0, 0), ModeKey::v(2, 1)]).unwrap();
        let out = apply_polarization_rotation(&psi, Channel(5), 0.3);
        assert_eq!(out, psi);
    }

    #[test]
    fn pbs_routes_by_polarization() {
        let (i1, i2, o1, o2) = (Channel(0), Channel(1), Channel(2), Channel(3));
        let h = make_basis_state(&[ModeKey::h(0, 0)]).unwrap();
        assert_eq!(apply_pbs(&h, i1, i2, o1, o2), make_basis_state(&[ModeKey::h(2, 0)]).unwrap());
        let v = make_basis_state(&[ModeKey::v(0, 0)]).unwrap();
        assert_eq!(apply_pbs(&v, i1, i2, o1, o2), make_basis_state(&[ModeKey::v(3, 0)]).unwrap());
        let both = make_basis_state(&[ModeKey::h(0, 0), ModeKey::v(1, 1)]).unwrap();
        assert_eq!(
            apply_pbs(&both, i1, i2, o1, o2),
            make_basis_state(&[ModeKey::h(2, 0), ModeKey::v(2, 1)]).unwrap()
        );
    }

    #[test]
    fn pbs_in_place_is_involution() {
        let psi = PureState::from_terms([
            (basis(&[ModeKey::h(0, 0), ModeKey::v(1, 2)]), c(0.6)),
            (basis(&[ModeKey::v(0, 1), ModeKey::v(0, 1)]), c(0.8)),
        ]);
        let once = apply_pbs(&psi, Channel(0), Channel(1), Channel(0), Channel(1));
        let back = apply_pbs(&once, Channel(0), Channel(1), Channel(0), Channel(1));
        assert_eq!(back, psi);
    }

    #[test]
    fn single_photon_loss() {
        let psi = make_basis_state(&[ModeKey::h(4, 0)]).unwrap();
        let out = apply_loss(&psi, Channel(4), Channel(9)).unwrap();
        assert_eq!(out, make_basis_state(&[ModeKey::h(9, 0)]).unwrap());
    }

    #[test]
    fn loss_splits_over_occupied_modes() {
        let psi = make_basis_state(&[ModeKey::h(4, 0), ModeKey::v(4, 0)]).unwrap();
        let out = apply_loss(&psi, Channel(4), Channel(9)).unwrap();
        let expected = PureState::from_terms([
            (basis(&[ModeKey::v(4, 0), ModeKey::h(9, 0)]), c(FRAC_1_SQRT_2)),
            (basis(&[ModeKey::h(4, 0), ModeKey::v(9, 0)]), c(FRAC_1_SQRT_2)),
        ]);
        assert_state_eq(&out, &expected, 1e-15);
    }

    #[test]
    fn loss_weights_by_occupation() {
        // |2_H 1_V> loses H with probability 2/3
        let psi = make_basis_state(&[ModeKey::h(4, 0), ModeKey::h(4, 0), ModeKey::v(4, 1)]).unwrap();
        let out = apply_loss(&psi, Channel(4), Channel(9)).unwrap();
        let lost_h = basis(&[ModeKey::h(4, 0), ModeKey::v(4, 1), ModeKey::h(9, 0)]);
        let lost_v = basis(&[ModeKey::h(4, 0), ModeKey::h(4, 0), ModeKey::v(9, 1)]);
        assert!((out.amplitude(&lost_h).norm_sqr() - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.amplitude(&lost_v).norm_sqr() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn loss_on_empty_mode_is_identity() {
        let psi = make_basis_state(&[ModeKey::h(1, 0)]).unwrap();
        assert_eq!(apply_loss(&psi, Channel(4), Channel(9)).unwrap(), psi);
        let vac = PureState::vacuum();
        assert_eq!(apply_loss(&vac, Channel(4), Channel(9)).unwrap(), vac);
    }

    #[test]
    fn loss_into_occupied_channel_is_rejected() {
        let psi = make_basis_state(&[ModeKey::h(4, 0), ModeKey::h(9, 0)]).unwrap();
        assert_eq!(
            apply_loss(&psi, Channel(4), Channel(9)),
            Err(FockError::LossChannelOccupied(9))
        );
    }

    #[test]
    fn creation_operator_normalization() {
        let one = apply_creation(&PureState::vacuum(), &[(ModeKey::h(0, 0), 1.0)]).unwrap();
        let two = apply_creation(&one, &[(ModeKey::h(0, 0), 1.0)]).unwrap();
        // a†a†|0> = sqrt2 |2>
        assert!((two.terms()[0].1.re - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn inner_products() {
        let vac = PureState::vacuum();
        assert_eq!(inner_product(&vac, &vac), c(1.0));
        let h = make_basis_state(&[ModeKey::h(0, 0)]).unwrap();
        let v = make_basis_state(&[ModeKey::v(0, 0)]).unwrap();
        assert_eq!(inner_product(&h, &v), c(0.0));
        let plus = h.add(&v).scale(c(FRAC_1_SQRT_2));
        assert!((inner_product(&plus, &plus).re - 1.0).abs() < 1e-15);
        let phased = PureState::from_terms([(h.terms()[0].0, Complex64::new(0.0, 1.0))]);
        assert_eq!(inner_product(&phased, &h), Complex64::new(0.0, -1.0));
        assert_eq!(inner_product(&h, &phased), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn mode_code_order_matches_key_order() {
        let a = ModeKey::v(2, 5);
        let b = ModeKey::h(3, 0);
        assert!(a < b);
        assert!(a.code() < b.code());
        assert_eq!(ModeKey::from_code(a.code()), a);
    }
}
