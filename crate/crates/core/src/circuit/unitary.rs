use alloc::vec::Vec;

use num_complex::Complex64;

use super::{permanent, Element, Netlist};
use crate::fock::{FockBasisState, ModeKey, Polarization, MAX_DIST_INDEX};
use crate::math::sqrt;

/// Transfer matrix on (channel, polarization) modes, indexed
/// `2 * channel + pol` with H = 0 and V = 1. Column `j` holds the image of
/// the creation operator of mode `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl ModeUnitary {
    pub fn identity(dim: usize) -> Self {
        let mut data = alloc::vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        ModeUnitary { dim, data }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    pub fn mode_index(mode: ModeKey) -> usize {
        let pol = match mode.polarization {
            Polarization::H => 0,
            Polarization::V => 1,
        };
        2 * usize::from(mode.channel.0) + pol
    }

    /// Left-multiplies by a matrix that only mixes the listed rows.
    fn apply_rows(&mut self, rows: &[usize], block: &[Complex64]) {
        let k = rows.len();
        let mut tmp = alloc::vec![Complex64::new(0.0, 0.0); k];
        for col in 0..self.dim {
            for (r, t) in tmp.iter_mut().enumerate() {
                *t = (0..k).map(|j| block[r * k + j] * self.data[rows[j] * self.dim + col]).sum();
            }
            for (r, &row) in rows.iter().enumerate() {
                self.data[row * self.dim + col] = tmp[r];
            }
        }
    }

    /// Maximum entry-wise deviation of `U^† U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let s: Complex64 = (0..self.dim).map(|k| self.get(k, i).conj() * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Lossless transfer matrix of the waveplates and beamsplitters; loss sites
/// and detectors are skipped. The same matrix acts on every
/// distinguishability index.
pub fn lossless_mode_unitary(n: &Netlist) -> ModeUnitary {
    let mut u = ModeUnitary::identity(2 * n.channel_count());
    for e in &n.elements {
        match *e {
            Element::Waveplate { channel, angle } => {
                let (s, c) = (libm::sin(angle), libm::cos(angle));
                let h = 2 * usize::from(channel.0);
                let block = [c, -s, s, c].map(|x| Complex64::new(x, 0.0));
                u.apply_rows(&[h, h + 1], &block);
            }
            Element::Pbs { in1, in2, out1, out2 } => {
                let m = |c: crate::fock::Channel, pol: usize| 2 * usize::from(c.0) + pol;
                // (in1,H)->(out1,H) (in2,H)->(out2,H) (in1,V)->(out2,V) (in2,V)->(out1,V)
                let moves = [
                    (m(in1, 0), m(out1, 0)),
                    (m(in2, 0), m(out2, 0)),
                    (m(in1, 1), m(out2, 1)),
                    (m(in2, 1), m(out1, 1)),
                ];
                // outputs are vacuum before the splitter; their rows go to the
                // freed input modes so the matrix stays a permutation
                let freed = moves.iter().map(|m| m.0).filter(|f| !moves.iter().any(|m| m.1 == *f));
                let claimed = moves.iter().map(|m| m.1).filter(|t| !moves.iter().any(|m| m.0 == *t));
                let back: Vec<(usize, usize)> = claimed.zip(freed).collect();
                let old = u.data.clone();
                for &(from, to) in moves.iter().chain(back.iter()) {
                    for col in 0..u.dim {
                        u.data[to * u.dim + col] = old[from * u.dim + col];
                    }
                }
            }
            Element::LossSite { .. } | Element::Detector { .. } => {}
        }
    }
    u
}

/// `<output| U |input>` via permanents, one distinguishability sector at a
/// time. Configurations with different photon content per index, or modes
/// outside the matrix, give zero.
pub fn oracle_amplitude(
    u: &ModeUnitary,
    input: &FockBasisState,
    output: &FockBasisState,
) -> Complex64 {
    if input.dist_index_counts() != output.dist_index_counts() {
        return Complex64::new(0.0, 0.0);
    }
    let mut amp = Complex64::new(1.0, 0.0);
    for d in 0..=MAX_DIST_INDEX {
        let cols = sector_modes(input, d);
        let rows = sector_modes(output, d);
        if cols.is_empty() {
            continue;
        }
        if cols.iter().chain(rows.iter()).any(|&(m, _)| m >= u.dim) {
            return Complex64::new(0.0, 0.0);
        }
        let rep = |modes: &[(usize, usize)]| -> Vec<usize> {
            modes.iter().flat_map(|&(m, k)| core::iter::repeat(m).take(k)).collect()
        };
        let (r, c) = (rep(&rows), rep(&cols));
        let k = r.len();
        let mut sub = Vec::with_capacity(k * k);
        for &ri in &r {
            for &cj in &c {
                sub.push(u.get(ri, cj));
            }
        }
        let norm: f64 = rows.iter().chain(cols.iter()).map(|&(_, n)| crate::math::factorial(n)).product();
        amp *= permanent(&sub, k) / sqrt(norm);
    }
    amp
}

fn sector_modes(state: &FockBasisState, d: u8) -> Vec<(usize, usize)> {
    state
        .occupations()
        .filter(|(m, _)| m.dist_index == d)
        .map(|(m, n)| (ModeUnitary::mode_index(m), n))
        .collect()
}
