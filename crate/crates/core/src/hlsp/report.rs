//! Multiplier recovery shared by the active-set solver and the oracle.

use nalgebra::{DMatrix, DVector};

use super::linalg::mixed_nnls;
use super::{Hierarchy, Relation, SolverOptions};
use crate::scalar::{lit, Real};

/// Whether row `r` of `level` holds at its recorded slack `w` for the point
/// with row value `v`.
pub(crate) fn binding<T: Real>(rel: Relation, v: T, w: T, tol: T) -> bool {
    match rel {
        Relation::Equal => true,
        _ => {
            let s = rel.sign::<T>();
            s * v >= s * w - tol * (T::one() + v.abs())
        }
    }
}

/// Per-level multipliers `λ_{i,l}` and per-row activity flags at `x` given
/// the optimal slacks.
pub(crate) fn multipliers<T: Real>(
    h: &Hierarchy<T>,
    x: &DVector<T>,
    slacks: &[DVector<T>],
    opts: &SolverOptions<T>,
) -> (Vec<Vec<DVector<T>>>, Vec<Vec<bool>>) {
    let values: Vec<DVector<T>> = h.levels().iter().map(|lv| lv.values(x)).collect();
    let bind_tol = opts.tolerance * lit(10.0);
    let active: Vec<Vec<bool>> = h
        .levels()
        .iter()
        .enumerate()
        .map(|(l, lv)| {
            (0..lv.rows())
                .map(|r| binding(lv.relations[r], values[l][r], slacks[l][r], bind_tol))
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(h.len());
    for (l, level) in h.levels().iter().enumerate() {
        let own = -&slacks[l];
        let f = level.a.transpose() * &slacks[l];
        // candidate columns: equality rows (free) and binding inequality rows
        let mut cols: Vec<DVector<T>> = Vec::new();
        let mut nonneg = Vec::new();
        let mut which = Vec::new();
        for i in 0..l {
            let lv = &h.levels()[i];
            for r in 0..lv.rows() {
                let rel = lv.relations[r];
                if !active[i][r] {
                    continue;
                }
                let a = lv.a.row(r).transpose();
                match rel {
                    Relation::Equal => {
                        cols.push(a);
                        nonneg.push(false);
                    }
                    _ => {
                        cols.push(a * (-rel.sign::<T>()));
                        nonneg.push(true);
                    }
                }
                which.push((i, r));
            }
        }
        let mut per_level: Vec<DVector<T>> =
            (0..l).map(|i| DVector::zeros(h.levels()[i].rows())).collect();
        if !cols.is_empty() && f.amax() > T::zero() {
            let e = DMatrix::from_columns(&cols);
            let z = mixed_nnls(&e, &f, &nonneg, opts.rank_threshold);
            for (k, &(i, r)) in which.iter().enumerate() {
                let rel = h.levels()[i].relations[r];
                per_level[i][r] = match rel {
                    Relation::Equal => z[k],
                    _ => -rel.sign::<T>() * z[k],
                };
            }
        }
        per_level.push(own);
        out.push(per_level);
    }
    (out, active)
}
