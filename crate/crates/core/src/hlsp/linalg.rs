//! Small dense helpers: rank-revealing least squares, nullspace bases and a
//! sign-constrained least-squares solve for multiplier recovery.

use nalgebra::{DMatrix, DVector, SVD};

use crate::scalar::Real;

/// Minimum-norm least-squares solution of `m y ≈ r` together with an
/// orthonormal basis of `null(m)`. Singular values below `rel · σ_max` are
/// treated as zero.
pub(crate) fn lstsq_with_null<T: Real>(
    m: &DMatrix<T>,
    r: &DVector<T>,
    rel: T,
) -> (DVector<T>, DMatrix<T>) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    if rows == 0 {
        return (DVector::zeros(cols), DMatrix::identity(cols, cols));
    }
    // pad to at least square so that V is complete
    let padded_rows = rows.max(cols);
    let mut a = DMatrix::zeros(padded_rows, cols);
    a.view_mut((0, 0), (rows, cols)).copy_from(m);
    let mut rhs = DVector::zeros(padded_rows);
    rhs.rows_mut(0, rows).copy_from(r);

    let svd = SVD::new(a, true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;
    let smax = sigma.iter().fold(T::zero(), |acc, &s| acc.max(s));
    let tol = rel * smax;

    let mut y = DVector::zeros(cols);
    let mut null_cols = Vec::new();
    for i in 0..sigma.len() {
        if smax > T::zero() && sigma[i] > tol {
            let coeff = u.column(i).dot(&rhs) / sigma[i];
            y += v_t.row(i).transpose() * coeff;
        } else {
            null_cols.push(v_t.row(i).transpose());
        }
    }
    let null = if null_cols.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    (y, null)
}

pub(crate) fn lstsq<T: Real>(m: &DMatrix<T>, r: &DVector<T>, rel: T) -> DVector<T> {
    lstsq_with_null(m, r, rel).0
}

pub(crate) fn nullspace<T: Real>(m: &DMatrix<T>, rel: T) -> DMatrix<T> {
    let r = DVector::zeros(m.nrows());
    lstsq_with_null(m, &r, rel).1
}

/// Least squares `min ‖e z − f‖` with `z_j ≥ 0` wherever `nonneg[j]`, other
/// components free. Lawson–Hanson active set; free components stay passive.
pub(crate) fn mixed_nnls<T: Real>(
    e: &DMatrix<T>,
    f: &DVector<T>,
    nonneg: &[bool],
    rel: T,
) -> DVector<T> {
    let n = e.ncols();
    debug_assert_eq!(nonneg.len(), n);
    let mut passive: Vec<bool> = nonneg.iter().map(|&c| !c).collect();
    let solve_passive = |passive: &[bool]| -> DVector<T> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut out = DVector::zeros(n);
        if idx.is_empty() {
            return out;
        }
        let sub = e.select_columns(&idx);
        let y = lstsq(&sub, f, rel);
        for (k, &j) in idx.iter().enumerate() {
            out[j] = y[k];
        }
        out
    };

    let scale = f.amax().max(T::one());
    let tol = scale * T::default_epsilon() * crate::scalar::lit(1e3);
    let mut z = solve_passive(&passive);
    let drop_tol = scale * T::default_epsilon() * crate::scalar::lit(16.0);
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let grad = e.transpose() * (f - e * &z);
        let candidate = (0..n)
            .filter(|&j| nonneg[j] && !passive[j] && grad[j] > tol)
            .max_by(|&a, &b| grad[a].partial_cmp(&grad[b]).unwrap().then(b.cmp(&a)));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _ in 0..(2 * n + 5) {
            let trial = solve_passive(&passive);
            let bad: Vec<usize> =
                (0..n).filter(|&k| nonneg[k] && passive[k] && trial[k] <= T::zero()).collect();
            if bad.is_empty() {
                z = trial;
                break;
            }
            let mut alpha = T::one();
            for &k in &bad {
                let denom = z[k] - trial[k];
                if denom > T::zero() {
                    alpha = alpha.min(z[k] / denom);
                }
            }
            z = &z + (trial - &z) * alpha;
            for k in 0..n {
                if nonneg[k] && passive[k] && z[k] <= drop_tol {
                    passive[k] = false;
                    z[k] = T::zero();
                }
            }
        }
    }
    for k in 0..n {
        if nonneg[k] && z[k] < T::zero() {
            z[k] = T::zero();
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        let m = DMatrix::<f64>::from_row_slice(1, 2, &[1.0, 1.0]);
        let (y, null) = lstsq_with_null(&m, &DVector::from_column_slice(&[2.0]), 1e-10);
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
        assert_eq!(null.ncols(), 1);
        assert!((m * null).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_rows_are_tolerated() {
        let m = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let (y, null) = lstsq_with_null(&m, &DVector::from_column_slice(&[1.0, 2.0]), 1e-10);
        assert!(((&m * &y)[0] - 1.0).abs() < 1e-12);
        assert_eq!(null.ncols(), 1);
    }

    #[test]
    fn empty_shapes() {
        let (y, null) = lstsq_with_null(&DMatrix::<f64>::zeros(0, 3), &DVector::zeros(0), 1e-10);
        assert_eq!(y.len(), 3);
        assert_eq!(null.ncols(), 3);
        let (y, null) = lstsq_with_null(&DMatrix::<f64>::zeros(2, 0), &DVector::zeros(2), 1e-10);
        assert_eq!((y.len(), null.ncols()), (0, 0));
    }

    #[test]
    fn nnls_respects_signs() {
        // unconstrained optimum is (−1, 2); first component forced ≥ 0
        let e = DMatrix::<f64>::identity(2, 2);
        let f = DVector::from_column_slice(&[-1.0, 2.0]);
        let z = mixed_nnls(&e, &f, &[true, false], 1e-12);
        assert!(z[0].abs() < 1e-12 && (z[1] - 2.0).abs() < 1e-12);
        let z = mixed_nnls(&e, &f, &[false, false], 1e-12);
        assert!((z[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_picks_sign_feasible_combination_of_dependent_columns() {
        // columns 0 and 1 are parallel; f reachable with z0 ≥ 0 only via column 1
        let e = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        let f = DVector::from_column_slice(&[-3.0, 0.0]);
        let z = mixed_nnls(&e, &f, &[true, true], 1e-12);
        assert!(((&e * &z) - &f).amax() < 1e-10);
        assert!(z.iter().all(|&v| v >= 0.0));
    }
}
