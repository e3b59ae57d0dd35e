use num_complex::Complex64;

/// Permanent of a row-major `n x n` matrix by Ryser's formula, visiting
/// column subsets in Gray-code order so each step updates one column.
pub fn permanent(a: &[Complex64], n: usize) -> Complex64 {
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    assert!(n < 64, "permanent limited to n < 64");
    let mut row_sums = alloc::vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << col) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += a[i * n + col];
            } else {
                *s -= a[i * n + col];
            }
        }
        gray = next;
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |p, s| p * s);
        if gray.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}
