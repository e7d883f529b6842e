//! Exhaustive active-set enumeration, used to cross-check the solver.

use nalgebra::DVector;

use super::equality::solve_equality;
use super::{report, Hierarchy, HlspError, HlspSolution, SolverOptions};
use crate::scalar::{lit, Real};

pub const MAX_ORACLE_INEQUALITIES: usize = 12;

/// Tries every active/inactive assignment of the inequality rows, scores each
/// equality solution on the violations it really produces and returns the
/// lexicographically smallest. Among ties, assignments whose flags agree with
/// the signs at their own solution win, then the lowest assignment index.
pub fn brute_force_oracle<T: Real>(
    h: &Hierarchy<T>,
    opts: &SolverOptions<T>,
) -> Result<HlspSolution<T>, HlspError<T>> {
    let slots: Vec<(usize, usize)> = h
        .levels()
        .iter()
        .enumerate()
        .flat_map(|(l, lv)| (0..lv.rows()).filter(move |&r| lv.relations[r].is_inequality()).map(move |r| (l, r)))
        .collect();
    if slots.len() > MAX_ORACLE_INEQUALITIES {
        return Err(HlspError::TooLarge { rows: slots.len(), max: MAX_ORACLE_INEQUALITIES });
    }
    let tol = lit::<T>(1e-9);
    // candidates describing the same optimum differ by rounding only
    let tie = lit::<T>(1e-11).max(T::default_epsilon() * lit(64.0));
    let mut best: Option<(Vec<T>, bool, DVector<T>, usize)> = None;
    let count = 1usize << slots.len();
    for mask in 0..count {
        let mut active: Vec<Vec<bool>> = h.levels().iter().map(|l| vec![false; l.rows()]).collect();
        for (k, &(l, r)) in slots.iter().enumerate() {
            active[l][r] = mask & (1 << k) != 0;
        }
        let eq = solve_equality(h, &active, opts)?;
        let norms: Vec<T> = h.levels().iter().map(|lv| lv.violations(&eq.x).norm()).collect();
        let consistent = slots.iter().all(|&(l, r)| {
            let lv = &h.levels()[l];
            let s = lv.relations[r].sign::<T>();
            let v = s * (lv.a.row(r).dot(&eq.x.transpose()) + lv.b[r]);
            if active[l][r] {
                v >= -tol
            } else {
                v <= tol
            }
        });
        let better = match &best {
            None => true,
            Some((bn, bc, _, _)) => match lex_cmp(&norms, bn, tie) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => consistent && !bc,
            },
        };
        if better {
            best = Some((norms, consistent, eq.x.clone(), eq.free_dims));
        }
    }
    let (_, _, x, free_dims) = best.expect("at least one assignment");
    let slacks: Vec<DVector<T>> = h
        .levels()
        .iter()
        .map(|lv| {
            let w = lv.violations(&x);
            DVector::from_iterator(
                w.len(),
                w.iter().zip(&lv.relations).map(|(&wi, r)| if r.is_inequality() && wi.abs() <= tol { T::zero() } else { wi }),
            )
        })
        .collect();
    let (multipliers, active) = report::multipliers(h, &x, &slacks, opts);
    Ok(HlspSolution { x, slacks, multipliers, active, iterations: count, free_dims })
}

fn lex_cmp<T: Real>(a: &[T], b: &[T], tol: T) -> std::cmp::Ordering {
    for (&x, &y) in a.iter().zip(b) {
        let scale = T::one() + x.abs().max(y.abs());
        if x < y - tol * scale {
            return std::cmp::Ordering::Less;
        }
        if x > y + tol * scale {
            return std::cmp::Ordering::Greater;
        }
    }
    std::cmp::Ordering::Equal
}
