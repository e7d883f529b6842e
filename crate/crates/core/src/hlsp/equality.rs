//! Lexicographic equality solve for a fixed active set.

use nalgebra::{DMatrix, DVector};

use super::linalg::{lstsq_with_null, lstsq};
use super::{Hierarchy, HlspError, Relation, SolverOptions};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct EqualitySolution<T: Real> {
    pub x: DVector<T>,
    /// `A x + b` on included rows, zero on excluded rows.
    pub slacks: Vec<DVector<T>>,
    /// `multipliers[l][i]`, least-squares multipliers of the included rows.
    pub multipliers: Vec<Vec<DVector<T>>>,
    pub free_dims: usize,
}

/// Solves the hierarchy with every equality row and the inequality rows
/// flagged in `active` treated as equalities; other rows are ignored.
///
/// Level `l` is minimized over the nullspace of the included rows of all
/// higher levels. Rank-deficient levels get the minimum-norm step.
pub fn solve_equality<T: Real>(
    h: &Hierarchy<T>,
    active: &[Vec<bool>],
    opts: &SolverOptions<T>,
) -> Result<EqualitySolution<T>, HlspError<T>> {
    if active.len() != h.len() || active.iter().zip(h.levels()).any(|(a, l)| a.len() != l.rows()) {
        return Err(HlspError::DimensionMismatch("active set shape does not match hierarchy".into()));
    }
    let n = h.n();
    let rel = opts.rank_threshold;
    let mut x = DVector::zeros(n);
    let mut basis = DMatrix::identity(n, n);
    let mut included: Vec<Vec<usize>> = Vec::with_capacity(h.len());

    for (l, level) in h.levels().iter().enumerate() {
        let rows: Vec<usize> = (0..level.rows())
            .filter(|&r| level.relations[r] == Relation::Equal || active[l][r])
            .collect();
        if !rows.is_empty() && basis.ncols() > 0 {
            let o = level.a.select_rows(&rows);
            let ob = DVector::from_iterator(rows.len(), rows.iter().map(|&r| level.b[r]));
            let r = &o * &x + ob;
            let (y, null) = lstsq_with_null(&(&o * &basis), &(-r), rel);
            x += &basis * y;
            basis = &basis * null;
        }
        included.push(rows);
    }

    let slacks: Vec<DVector<T>> = h
        .levels()
        .iter()
        .zip(&included)
        .map(|(level, rows)| {
            let v = level.values(&x);
            let mut w = DVector::zeros(level.rows());
            for &r in rows {
                w[r] = v[r];
            }
            w
        })
        .collect();

    let mut multipliers = Vec::with_capacity(h.len());
    for (l, level) in h.levels().iter().enumerate() {
        let f = level.a.transpose() * &slacks[l];
        let mut cols = Vec::new();
        let mut which = Vec::new();
        for i in 0..l {
            for &r in &included[i] {
                cols.push(h.levels()[i].a.row(r).transpose());
                which.push((i, r));
            }
        }
        let mut per: Vec<DVector<T>> = (0..l).map(|i| DVector::zeros(h.levels()[i].rows())).collect();
        if !cols.is_empty() {
            let z = lstsq(&DMatrix::from_columns(&cols), &f, rel);
            for (k, &(i, r)) in which.iter().enumerate() {
                per[i][r] = z[k];
            }
        }
        per.push(-&slacks[l]);
        multipliers.push(per);
    }
    Ok(EqualitySolution { x, slacks, multipliers, free_dims: basis.ncols() })
}
