//! Small dense linear algebra on row-major `f64` buffers.

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-12;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is `n × n` row-major. Returns `None` when a pivot falls below
/// `PIVOT_TOL` times the largest entry of `A`.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return if n == 0 { Some(Vec::new()) } else { None };
    }
    let tol = PIVOT_TOL * scale;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &k| a[i * n + col].abs().total_cmp(&a[k * n + col].abs()))
            .unwrap();
        if a[piv * n + col].abs() <= tol {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[i * n + k] -= f * a[col * n + k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in i + 1..n {
            acc -= a[i * n + k] * x[k];
        }
        x[i] = acc / a[i * n + i];
    }
    Some(x)
}

/// Inverse of an `n × n` row-major matrix by Gauss–Jordan elimination.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if n > 0 && scale == 0.0 {
        return None;
    }
    let tol = PIVOT_TOL * scale;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &k| m[i * n + col].abs().total_cmp(&m[k * n + col].abs()))
            .unwrap();
        if m[piv * n + col].abs() <= tol {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[i * n + col];
            if f != 0.0 {
                for k in 0..n {
                    m[i * n + k] -= f * m[col * n + k];
                    inv[i * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    Some(inv)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solves_small_system() {
        let x = solve(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_is_none() {
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0], 2).is_none());
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    proptest! {
        #[test]
        fn inverse_times_matrix_is_identity(
            v in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let mut a = v.clone();
            // diagonal dominance keeps the draw well conditioned
            for i in 0..3 { a[i * 3 + i] += 20.0; }
            let inv = invert(&a, 3).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let e: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((e - want).abs() < 1e-12);
                }
            }
            let b = vec![1.0, -2.0, 0.5];
            let x = solve(a.clone(), b.clone(), 3).unwrap();
            for i in 0..3 {
                prop_assert!((dot(&a[i * 3..i * 3 + 3], &x) - b[i]).abs() < 1e-12);
            }
        }
    }
}
