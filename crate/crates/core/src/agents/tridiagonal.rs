//! Thomas algorithm for tridiagonal systems.

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower[1..]`,
/// diagonal `diag`, and super-diagonal `upper[..n-1]`. `scratch` must hold
/// `n` values. No pivoting: `A` must be diagonally dominant or SPD.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && scratch.len() >= n);
    if n == 0 {
        return;
    }
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 2, 3, 10, 57] {
            let lower: Vec<f64> = (0..n)
                .map(|i| if i == 0 { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            let upper: Vec<f64> = (0..n)
                .map(|i| if i + 1 == n { 0.0 } else { rng.random_range(-1.0..1.0) })
                .collect();
            let diag: Vec<f64> = (0..n).map(|_| rng.random_range(2.5..4.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut b: Vec<f64> = (0..n)
                .map(|i| {
                    let mut v = diag[i] * x[i];
                    if i > 0 {
                        v += lower[i] * x[i - 1];
                    }
                    if i + 1 < n {
                        v += upper[i] * x[i + 1];
                    }
                    v
                })
                .collect();
            let mut scratch = vec![0.0; n];
            solve_tridiagonal(&lower, &diag, &upper, &mut b, &mut scratch);
            for i in 0..n {
                assert!((b[i] - x[i]).abs() < 1e-12, "n={n} i={i}");
            }
        }
    }
}
