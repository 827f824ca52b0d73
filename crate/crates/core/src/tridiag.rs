//! Tridiagonal solve with partial pivoting (the `gtsv` elimination order).

/// Solves `A x = b` in place for tridiagonal `A` given by its sub-diagonal
/// `dl` (length n−1), diagonal `d` (n) and super-diagonal `du` (n−1).
/// The matrix arrays are overwritten. Returns `false` on a zero pivot.
pub fn solve_in_place(dl: &mut [f64], d: &mut [f64], du: &mut [f64], b: &mut [f64]) -> bool {
    let n = d.len();
    debug_assert!(dl.len() + 1 == n && du.len() + 1 == n && b.len() == n);
    if n == 0 {
        return true;
    }
    // second super-diagonal created by row swaps
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return false;
            }
            let m = dl[i] / d[i];
            d[i + 1] -= m * du[i];
            b[i + 1] -= m * b[i];
            dl[i] = 0.0;
        } else {
            // swap rows i and i+1
            let m = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - m * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -m;
            }
            b.swap(i, i + 1);
            b[i + 1] -= m * b[i];
        }
    }
    if d[n - 1] == 0.0 {
        return false;
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    b.iter().all(|v| v.is_finite())
}

/// Tridiagonal matrix–vector product, used by tests and residual checks.
pub fn matvec(dl: &[f64], d: &[f64], du: &[f64], x: &[f64]) -> Vec<f64> {
    let n = d.len();
    (0..n)
        .map(|i| {
            let mut s = d[i] * x[i];
            if i > 0 {
                s += dl[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += du[i] * x[i + 1];
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn needs_pivoting() {
        // leading zero pivot: plain Thomas would divide by zero
        let (dl, d, du) = (vec![1.0, 1.0], vec![0.0, 1.0, 2.0], vec![1.0, 3.0]);
        let x = vec![1.0, -2.0, 0.5];
        let mut b = matvec(&dl, &d, &du, &x);
        assert!(solve_in_place(&mut dl.clone(), &mut d.clone(), &mut du.clone(), &mut b));
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        assert!(!solve_in_place(&mut [0.0], &mut [0.0, 1.0], &mut [1.0], &mut [1.0, 1.0]));
        assert!(!solve_in_place(&mut [1.0], &mut [1.0, 1.0], &mut [1.0], &mut [1.0, 1.0]));
    }

    proptest! {
        #[test]
        fn recovers_solution(
            n in 1usize..40,
            seed in proptest::collection::vec(-1.0f64..1.0, 200),
        ) {
            let dl: Vec<f64> = (0..n.saturating_sub(1)).map(|i| seed[i]).collect();
            let du: Vec<f64> = (0..n.saturating_sub(1)).map(|i| seed[50 + i]).collect();
            // shift keeps the matrix well conditioned without making it diagonally dominant
            let d: Vec<f64> = (0..n).map(|i| seed[100 + i] + 1.5f64.copysign(seed[100 + i])).collect();
            let x: Vec<f64> = (0..n).map(|i| seed[150 + i]).collect();
            let mut b = matvec(&dl, &d, &du, &x);
            prop_assert!(solve_in_place(&mut dl.clone(), &mut d.clone(), &mut du.clone(), &mut b));
            for (a, e) in b.iter().zip(&x) {
                prop_assert!((a - e).abs() < 1e-9);
            }
        }
    }
}
