use alloc::vec::Vec;

use super::SourceError;
use crate::math::sqrt;

/// Lower-triangular expansion of each photon's internal wavefunction over
/// orthonormal internal modes `e_0..e_{n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramCoefficients {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl GramCoefficients {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().zip(self.rows[j].iter()).map(|(a, b)| a * b).sum()
    }
}

/// Cholesky rows of the `n x n` Gram matrix with unit diagonal and uniform
/// off-diagonal overlap `v`.
pub fn gram_coefficients(v: f64, n: usize) -> Result<GramCoefficients, SourceError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(SourceError::OverlapOutOfRange(v));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    if v == 1.0 {
        for _ in 0..n {
            rows.push(alloc::vec![1.0]);
        }
        return Ok(GramCoefficients { n, rows });
    }
    for i in 0..n {
        let mut row = alloc::vec![0.0; i + 1];
        for j in 0..i {
            let dot: f64 = (0..j).map(|k| row[k] * rows[j][k]).sum();
            row[j] = (v - dot) / rows[j][j];
        }
        let used: f64 = row[..i].iter().map(|x| x * x).sum();
        row[i] = sqrt((1.0 - used).max(0.0));
        rows.push(row);
    }
    Ok(GramCoefficients { n, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_photons() {
        let g = gram_coefficients(0.0, 6).unwrap();
        for i in 0..6 {
            for j in 0..=i {
                assert_eq!(g.rows[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn identical_photons() {
        let g = gram_coefficients(1.0, 4).unwrap();
        assert!(g.rows.iter().all(|r| r == &[1.0]));
    }

    #[test]
    fn two_photon_rows() {
        for &v in &[0.1, 0.5, 0.94, 0.999] {
            let g = gram_coefficients(v, 2).unwrap();
            assert_eq!(g.rows[0], [1.0]);
            assert!((g.rows[1][0] - v).abs() < 1e-15);
            assert!((g.rows[1][1] - sqrt(1.0 - v * v)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_overlap() {
        assert!(gram_coefficients(1.2, 3).is_err());
        assert!(gram_coefficients(-0.1, 3).is_err());
    }
}
