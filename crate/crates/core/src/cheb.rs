//! Chebyshev–Lobatto nodes, differentiation matrices and barycentric interpolation
//! for the spectral elements in the horizontal direction.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Chebyshev–Lobatto points mapped to [a, b], in increasing order.
pub fn lobatto_nodes(n: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(n >= 2, "at least two Lobatto points");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                mid - half * (PI * i as f64 / (n - 1) as f64).cos()
            }
        })
        .collect()
}

/// Barycentric weights of the Lobatto points (up to a common factor).
pub fn barycentric_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            if i == 0 || i == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// First-derivative matrix on the given Lobatto points, row-major n×n.
/// Diagonal entries use the negative-sum rule so constants differentiate to zero.
pub fn diff_matrix(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let w = barycentric_weights(n);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = w[j] / w[i] / (x[i] - x[j]);
                d[i * n + j] = v;
                diag -= v;
            }
        }
        d[i * n + i] = diag;
    }
    d
}

/// Product of two row-major n×n matrices.
pub fn square(d: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let a = d[i * n + k];
            if a != 0.0 {
                for j in 0..n {
                    out[i * n + j] += a * d[k * n + j];
                }
            }
        }
    }
    out
}

/// Barycentric interpolation weights for evaluating at `t`; exact at the nodes.
pub fn interpolation_row(x: &[f64], t: f64) -> Vec<f64> {
    let n = x.len();
    let w = barycentric_weights(n);
    if let Some(i) = x.iter().position(|&xi| xi == t) {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        return row;
    }
    let terms: Vec<f64> = (0..n).map(|i| w[i] / (t - x[i])).collect();
    let total: f64 = terms.iter().sum();
    terms.into_iter().map(|v| v / total).collect()
}

/// Interpolates complex nodal values at `t`.
pub fn interpolate(x: &[f64], values: &[Complex64], t: f64) -> Complex64 {
    interpolation_row(x, t).iter().zip(values).map(|(w, v)| v * *w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiates_polynomials_exactly() {
        let x = lobatto_nodes(9, -0.5, 2.0);
        let d = diff_matrix(&x);
        let d2 = square(&d, 9);
        for i in 0..9 {
            let du: f64 = (0..9).map(|j| d[i * 9 + j] * x[j].powi(5)).sum();
            let ddu: f64 = (0..9).map(|j| d2[i * 9 + j] * x[j].powi(5)).sum();
            assert!((du - 5.0 * x[i].powi(4)).abs() < 1e-11);
            assert!((ddu - 20.0 * x[i].powi(3)).abs() < 1e-9);
        }
    }

    #[test]
    fn spectral_accuracy_for_smooth_functions() {
        let x = lobatto_nodes(24, 0.0, 1.5);
        let d = diff_matrix(&x);
        for i in 0..24 {
            let du: f64 = (0..24).map(|j| d[i * 24 + j] * (3.0 * x[j]).sin()).sum();
            assert!((du - 3.0 * (3.0 * x[i]).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_polynomials() {
        let x = lobatto_nodes(7, 1.0, 3.0);
        let v: Vec<Complex64> = x.iter().map(|&t| Complex64::new(t * t, -t.powi(3))).collect();
        assert_eq!(interpolate(&x, &v, x[3]), v[3]);
        let t = 2.37;
        let p = interpolate(&x, &v, t);
        assert!((p - Complex64::new(t * t, -t.powi(3))).norm() < 1e-13);
    }
}
