use core::fmt;

use num_complex::Complex64;

use super::{GramCoefficients, SourceError};
use crate::circuit::Netlist;
use crate::fock::{apply_creation, ModeKey, Polarization, PureState};
use crate::math::{factorial, sqrt};

/// Photons emitted per source: bit `i` set means source `i` emitted two
/// photons, otherwise one.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EmissionEvent {
    doubles: u8,
}

/// Lexicographic on the count vector: at the first source where two events
/// differ, the double emission sorts last.
impl Ord for EmissionEvent {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        let diff = self.doubles ^ other.doubles;
        if diff == 0 {
            return core::cmp::Ordering::Equal;
        }
        let j = diff.trailing_zeros();
        if self.doubles & (1 << j) != 0 {
            core::cmp::Ordering::Greater
        } else {
            core::cmp::Ordering::Less
        }
    }
}

impl PartialOrd for EmissionEvent {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl EmissionEvent {
    pub const SOURCES: usize = 6;

    pub fn singles() -> Self {
        EmissionEvent { doubles: 0 }
    }

    pub fn from_mask(doubles: u8) -> Self {
        EmissionEvent { doubles: doubles & 0b11_1111 }
    }

    pub fn from_counts(m: &[u8; 6]) -> Result<Self, SourceError> {
        let mut doubles = 0;
        for (i, &k) in m.iter().enumerate() {
            match k {
                1 => {}
                2 => doubles |= 1 << i,
                _ => return Err(SourceError::InvalidEmission(k)),
            }
        }
        Ok(EmissionEvent { doubles })
    }

    pub fn mask(self) -> u8 {
        self.doubles
    }

    /// Photons emitted by source `i`.
    pub fn count(self, i: usize) -> u8 {
        1 + ((self.doubles >> i) & 1)
    }

    pub fn counts(self) -> [u8; 6] {
        core::array::from_fn(|i| self.count(i))
    }

    pub fn double_count(self) -> u32 {
        self.doubles.count_ones()
    }

    pub fn photon_count(self) -> usize {
        Self::SOURCES + self.doubles.count_ones() as usize
    }

    /// All 64 emission vectors in ascending key order.
    pub fn all() -> impl Iterator<Item = EmissionEvent> {
        (0u8..64).map(|m| EmissionEvent { doubles: m.reverse_bits() >> 2 })
    }
}

impl fmt::Debug for EmissionEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.counts();
        write!(f, "m{}{}{}{}{}{}", c[0], c[1], c[2], c[3], c[4], c[5])
    }
}

/// Input state `prod_i (A_i^dag)^{m_i} / sqrt(m_i!) |vac>` with
/// `A_i^dag = sum_j c[i][j] a^dag_{source_i, H, j}`; both photons of a double
/// emission share their source's row.
pub fn build_input_state(
    e: EmissionEvent,
    g: &GramCoefficients,
    netlist: &Netlist,
) -> Result<PureState, SourceError> {
    if g.n != netlist.sources.len() || g.n != EmissionEvent::SOURCES {
        return Err(SourceError::SourceMismatch { expected: netlist.sources.len(), got: g.n });
    }
    let mut state = PureState::vacuum();
    let mut op = alloc::vec::Vec::with_capacity(g.n);
    for (i, &src) in netlist.sources.iter().enumerate() {
        op.clear();
        for (j, &c) in g.row(i).iter().enumerate() {
            op.push((ModeKey::new(src, Polarization::H, j as u8), c));
        }
        let m = usize::from(e.count(i));
        for _ in 0..m {
            state = apply_creation(&state, &op)?;
        }
        state = state.scale(Complex64::new(1.0 / sqrt(factorial(m)), 0.0));
    }
    Ok(state)
}

/// Distinguishability index of the internal mode shared by all photons.
pub const SHARED_INDEX: u8 = 0;

/// Unnormalized input in the shared/private decomposition of the internal
/// states, `psi_i = sqrt(v) e_shared + sqrt(1 - v) f_i` with `f_i` (index
/// `i + 1`) private to source `i`.
///
/// Every term carries a fixed, overlap-independent amplitude; a term with
/// `a` photons in the shared mode contributes with weight
/// `v^a (1 - v)^(N - a)` to any quadratic measure, where `N` is the photon
/// number. Terms differ in their internal-mode content and never interfere.
pub fn shared_private_input(e: EmissionEvent, netlist: &Netlist) -> Result<PureState, SourceError> {
    if netlist.sources.len() != EmissionEvent::SOURCES {
        return Err(SourceError::SourceMismatch {
            expected: netlist.sources.len(),
            got: EmissionEvent::SOURCES,
        });
    }
    let mut state = PureState::vacuum();
    for (i, &src) in netlist.sources.iter().enumerate() {
        let op = [
            (ModeKey::new(src, Polarization::H, SHARED_INDEX), 1.0),
            (ModeKey::new(src, Polarization::H, i as u8 + 1), 1.0),
        ];
        let m = usize::from(e.count(i));
        for _ in 0..m {
            state = apply_creation(&state, &op)?;
        }
        state = state.scale(Complex64::new(1.0 / sqrt(factorial(m)), 0.0));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::canonical_ghz_netlist;
    use crate::fock::FockBasisState;
    use crate::sources::gram_coefficients;

    #[test]
    fn emission_order_and_counts() {
        let all: alloc::vec::Vec<_> = EmissionEvent::all().collect();
        assert_eq!(all.len(), 64);
        assert_eq!(all[0], EmissionEvent::singles());
        // the last source varies fastest
        assert_eq!(all[1].counts(), [1, 1, 1, 1, 1, 2]);
        assert_eq!(all[63].counts(), [2; 6]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        let e = EmissionEvent::from_counts(&[2, 1, 1, 2, 1, 1]).unwrap();
        assert_eq!(e.photon_count(), 8);
        assert!(EmissionEvent::from_counts(&[3, 1, 1, 1, 1, 1]).is_err());
    }

    #[test]
    fn indistinguishable_singles() {
        let n = canonical_ghz_netlist();
        let g = gram_coefficients(1.0, 6).unwrap();
        let psi = build_input_state(EmissionEvent::singles(), &g, &n).unwrap();
        assert_eq!(psi.len(), 1);
        let modes: alloc::vec::Vec<_> = n.sources.iter().map(|&c| ModeKey::new(c, Polarization::H, 0)).collect();
        assert_eq!(psi.terms()[0].0, FockBasisState::from_modes(&modes).unwrap());
        assert!((psi.terms()[0].1.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distinguishable_singles() {
        let n = canonical_ghz_netlist();
        let g = gram_coefficients(0.0, 6).unwrap();
        let psi = build_input_state(EmissionEvent::singles(), &g, &n).unwrap();
        assert_eq!(psi.len(), 1);
        let modes: alloc::vec::Vec<_> = n
            .sources
            .iter()
            .enumerate()
            .map(|(i, &c)| ModeKey::new(c, Polarization::H, i as u8))
            .collect();
        assert_eq!(psi.terms()[0].0, FockBasisState::from_modes(&modes).unwrap());
    }

    #[test]
    fn doubles_are_normalized() {
        let n = canonical_ghz_netlist();
        for &v in &[0.0, 0.5, 0.88, 0.94, 0.99, 1.0] {
            let g = gram_coefficients(v, 6).unwrap();
            for e in [EmissionEvent::from_mask(0b1), EmissionEvent::from_mask(0b10_0110)] {
                let psi = build_input_state(e, &g, &n).unwrap();
                assert!((psi.norm_sqr() - 1.0).abs() < 1e-12, "v={v} e={e:?}");
                assert_eq!(psi.max_photon_count(), e.photon_count());
            }
        }
    }

    #[test]
    fn shared_private_weights_sum_to_one() {
        let n = canonical_ghz_netlist();
        let e = EmissionEvent::from_mask(0b100_1);
        let psi = shared_private_input(e, &n).unwrap();
        for &v in &[0.0, 0.3, 0.97, 1.0] {
            let total: f64 = psi
                .iter()
                .map(|(b, a)| {
                    let shared = b.dist_index_counts()[0] as i32;
                    let nn = b.photon_count() as i32;
                    a.norm_sqr() * libm::pow(v, shared as f64) * libm::pow(1.0 - v, (nn - shared) as f64)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
