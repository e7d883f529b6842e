//! Primal active-set method over a nullspace cascade.
//!
//! Levels are processed in priority order. Inside a level, equality rows and
//! the currently violated ("active") inequality rows form the least-squares
//! objective; the remaining inequality rows of the level are kept satisfied.
//! Rows of higher levels that ended with zero slack become hard inequality
//! constraints, rows that ended with non-zero slack (and equality rows) are
//! folded into the nullspace basis.

use nalgebra::{DMatrix, DVector};

use super::linalg::{lstsq, nullspace};
use super::report;
use super::{Hierarchy, HlspError, HlspSolution, Relation, SolverOptions};
use crate::scalar::{lit, Real};

/// Cold-start solve.
pub fn solve<T: Real>(h: &Hierarchy<T>, opts: &SolverOptions<T>) -> Result<HlspSolution<T>, HlspError<T>> {
    HlspSolver::new(*opts).solve(h)
}

/// Solver instance carrying the warm-start active set between calls.
#[derive(Clone, Debug)]
pub struct HlspSolver<T: Real> {
    opts: SolverOptions<T>,
    warm: Option<Vec<Vec<bool>>>,
}

/// An inequality row rewritten as `a·x + b ≤ 0`.
#[derive(Clone, Debug)]
struct Ineq<T: Real> {
    level: usize,
    row: usize,
    global: usize,
    a: DVector<T>,
    b: T,
    active: bool,
}

impl<T: Real> Ineq<T> {
    fn value(&self, x: &DVector<T>) -> T {
        self.a.dot(x) + self.b
    }
}

enum Drop {
    Hard(usize),
    Soft(usize),
}

impl<T: Real> HlspSolver<T> {
    pub fn new(opts: SolverOptions<T>) -> Self {
        Self { opts, warm: None }
    }

    pub fn options(&self) -> &SolverOptions<T> {
        &self.opts
    }

    /// Forgets the stored active set.
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, h: &Hierarchy<T>) -> Result<HlspSolution<T>, HlspError<T>> {
        let shape: Vec<usize> = h.levels().iter().map(|l| l.rows()).collect();
        let hints = match &self.warm {
            Some(w) if w.iter().map(Vec::len).eq(shape.iter().copied()) => Some(w.clone()),
            _ => None,
        };
        let (result, soft_state) = run(h, &self.opts, hints.as_deref());
        self.warm = Some(soft_state);
        result
    }
}

fn restricted<T: Real>(basis: &DMatrix<T>, hard: &[Ineq<T>], rel: T) -> DMatrix<T> {
    let rows: Vec<_> = hard.iter().filter(|c| c.active).map(|c| c.a.transpose()).collect();
    if rows.is_empty() || basis.ncols() == 0 {
        return basis.clone();
    }
    let ah = DMatrix::from_rows(&rows);
    basis * nullspace(&(ah * basis), rel)
}

fn stack<T: Real>(rows: &[(DVector<T>, T)], n: usize) -> (DMatrix<T>, DVector<T>) {
    let mut m = DMatrix::zeros(rows.len(), n);
    let mut b = DVector::zeros(rows.len());
    for (i, (a, bi)) in rows.iter().enumerate() {
        m.row_mut(i).copy_from(&a.transpose());
        b[i] = *bi;
    }
    (m, b)
}

/// Runs the active-set loop. Also returns the end-of-level activity of every
/// inequality row, used to seed the next call.
#[allow(clippy::type_complexity)]
fn run<T: Real>(
    h: &Hierarchy<T>,
    opts: &SolverOptions<T>,
    hints: Option<&[Vec<bool>]>,
) -> (Result<HlspSolution<T>, HlspError<T>>, Vec<Vec<bool>>) {
    let n = h.n();
    let tol = opts.tolerance;
    let rel = opts.rank_threshold;
    let total_rows = h.row_count();
    let bland_after = 3 * total_rows.max(1);

    let mut x = DVector::<T>::zeros(n);
    let mut basis = DMatrix::<T>::identity(n, n);
    let mut hard: Vec<Ineq<T>> = Vec::new();
    let mut slacks: Vec<DVector<T>> = Vec::with_capacity(h.len());
    let mut soft_state: Vec<Vec<bool>> = h.levels().iter().map(|l| vec![false; l.rows()]).collect();
    let mut iterations = 0usize;
    let mut offset = 0usize;

    for (l, level) in h.levels().iter().enumerate() {
        let eq_rows: Vec<(DVector<T>, T)> = (0..level.rows())
            .filter(|&r| level.relations[r] == Relation::Equal)
            .map(|r| (level.a.row(r).transpose(), level.b[r]))
            .collect();
        let mut soft: Vec<Ineq<T>> = (0..level.rows())
            .filter(|&r| level.relations[r].is_inequality())
            .map(|r| {
                let s = level.relations[r].sign::<T>();
                let mut c = Ineq {
                    level: l,
                    row: r,
                    global: offset + r,
                    a: level.a.row(r).transpose() * s,
                    b: level.b[r] * s,
                    active: false,
                };
                let hinted = hints.map(|hs| hs[l][r]).unwrap_or(false);
                c.active = hinted || c.value(&x) > tol;
                c
            })
            .collect();

        let mut level_iter = 0usize;
        loop {
            iterations += 1;
            level_iter += 1;
            if iterations > opts.max_iterations {
                let partial = partial_solution(h, &x, iterations - 1, opts);
                return (Err(HlspError::IterationLimit { iterations: iterations - 1, best: Box::new(partial) }), soft_state);
            }
            let bland = level_iter > bland_after;

            // equality subproblem on the current working set
            let zh = restricted(&basis, &hard, rel);
            let mut obj = eq_rows.clone();
            obj.extend(soft.iter().filter(|c| c.active).map(|c| (c.a.clone(), c.b)));
            let (o, ob) = stack(&obj, n);
            let d = if o.nrows() == 0 || zh.ncols() == 0 {
                DVector::zeros(n)
            } else {
                let r = &o * &x + &ob;
                let y = lstsq(&(&o * &zh), &(-r), rel);
                &zh * y
            };

            let step_floor = T::default_epsilon() * lit(16.0) * (T::one() + x.amax());
            if d.amax() > step_floor {
                // ratio test over inactive rows, lowest global index on ties
                let mut alpha = T::one();
                let mut block: Option<(bool, usize)> = None;
                let dn = d.norm();
                let candidates = hard
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (true, i, c))
                    .chain(soft.iter().enumerate().map(|(i, c)| (false, i, c)));
                for (is_hard, i, c) in candidates {
                    if c.active {
                        continue;
                    }
                    let ad = c.a.dot(&d);
                    if ad <= T::default_epsilon() * lit(64.0) * c.a.norm() * dn {
                        continue;
                    }
                    let room = (-c.value(&x)).max(T::zero());
                    let ai = room / ad;
                    if ai < alpha {
                        alpha = ai;
                        block = Some((is_hard, i));
                    }
                }
                x += &d * alpha;
                if let Some((is_hard, i)) = block {
                    if is_hard {
                        hard[i].active = true;
                    } else {
                        soft[i].active = true;
                    }
                    continue;
                }
            }

            // stationary on the working set: check multipliers and slacks
            let mut drop: Option<(Drop, T, usize, usize)> = None; // (which, score, level, global)
            let active_hard: Vec<usize> = (0..hard.len()).filter(|&i| hard[i].active).collect();
            if !active_hard.is_empty() && o.nrows() > 0 && basis.ncols() > 0 {
                let g = o.transpose() * (&o * &x + &ob);
                let ah = DMatrix::from_rows(&active_hard.iter().map(|&i| hard[i].a.transpose()).collect::<Vec<_>>());
                let lhs = (&ah * &basis).transpose();
                let rhs = -(basis.transpose() * g);
                let mu = lstsq(&lhs, &rhs, rel);
                let mu_tol = tol * (T::one() + mu.amax());
                for (k, &i) in active_hard.iter().enumerate() {
                    if mu[k] < -mu_tol {
                        let c = &hard[i];
                        let better = match &drop {
                            None => true,
                            Some((_, s, lv, gl)) => {
                                if bland {
                                    c.global < *gl
                                } else {
                                    c.level < *lv || (c.level == *lv && (mu[k] < *s || (mu[k] == *s && c.global < *gl)))
                                }
                            }
                        };
                        if better {
                            drop = Some((Drop::Hard(i), mu[k], c.level, c.global));
                        }
                    }
                }
            }
            if drop.is_none() || bland {
                for (i, c) in soft.iter().enumerate() {
                    if !c.active {
                        continue;
                    }
                    let v = c.value(&x);
                    if v < -tol {
                        let better = match &drop {
                            None => true,
                            Some((Drop::Hard(_), _, _, gl)) => bland && c.global < *gl,
                            Some((Drop::Soft(_), s, _, gl)) => {
                                if bland {
                                    c.global < *gl
                                } else {
                                    v < *s
                                }
                            }
                        };
                        if better {
                            drop = Some((Drop::Soft(i), v, l, c.global));
                        }
                    }
                }
            }
            match drop {
                None => break,
                Some((Drop::Hard(i), ..)) => hard[i].active = false,
                Some((Drop::Soft(i), ..)) => soft[i].active = false,
            }
        }

        // record slacks and fold the level into the cascade
        let values = level.values(&x);
        let w = DVector::from_iterator(
            level.rows(),
            (0..level.rows()).map(|r| {
                let rel_r = level.relations[r];
                let s = rel_r.slack(values[r]);
                if rel_r.is_inequality() && s.abs() <= tol {
                    T::zero()
                } else {
                    s
                }
            }),
        );
        let mut fold = eq_rows.clone();
        for c in soft {
            soft_state[l][c.row] = c.active;
            if w[c.row] != T::zero() {
                fold.push((c.a.clone(), c.b));
            } else {
                let v = c.value(&x);
                hard.push(Ineq { active: c.active && v > -tol, ..c });
            }
        }
        if !fold.is_empty() && basis.ncols() > 0 {
            let (f, _) = stack(&fold, n);
            basis = &basis * nullspace(&(f * &basis), rel);
        }
        slacks.push(w);
        offset += level.rows();
    }

    let free_dims = restricted(&basis, &hard, rel).ncols();
    let (multipliers, active) = report::multipliers(h, &x, &slacks, opts);
    (Ok(HlspSolution { x, slacks, multipliers, active, iterations, free_dims }), soft_state)
}

fn partial_solution<T: Real>(
    h: &Hierarchy<T>,
    x: &DVector<T>,
    iterations: usize,
    opts: &SolverOptions<T>,
) -> HlspSolution<T> {
    let slacks: Vec<DVector<T>> = h.levels().iter().map(|l| l.violations(x)).collect();
    let (multipliers, active) = report::multipliers(h, x, &slacks, opts);
    HlspSolution { x: x.clone(), slacks, multipliers, active, iterations, free_dims: 0 }
}
