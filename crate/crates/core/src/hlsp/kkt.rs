//! Residuals of the per-level optimality conditions.

use super::report::binding;
use super::{Hierarchy, HlspSolution, Relation};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport<T> {
    /// `max_l ‖A_lᵀλ_{l,l} + Σ_{i<l} A_iᵀλ_{i,l}‖∞` and `‖w_l(x) + λ_{l,l}‖∞`.
    pub stationarity: T,
    /// Largest gap between the slacks realised by `x` and the reported ones.
    pub primal: T,
    /// Largest `|λ|·gap` over inequality rows that do not hold at their slack.
    pub complementarity: T,
    /// Largest multiplier of the wrong sign (0 when all signs are right).
    pub sign: T,
}

impl<T: Real> KktReport<T> {
    pub fn max(&self) -> T {
        self.stationarity.max(self.primal).max(self.complementarity).max(self.sign)
    }

    pub fn passes(&self, tol: T) -> bool {
        self.max() < tol
    }
}

pub fn check_kkt<T: Real>(h: &Hierarchy<T>, sol: &HlspSolution<T>) -> KktReport<T> {
    let mut rep = KktReport { stationarity: T::zero(), primal: T::zero(), complementarity: T::zero(), sign: T::zero() };
    let x = &sol.x;
    let tol = lit::<T>(1e-9);
    for (l, level) in h.levels().iter().enumerate() {
        let real = level.violations(x);
        rep.primal = rep.primal.max((&real - &sol.slacks[l]).amax());

        let lam = &sol.multipliers[l];
        let mut g = level.a.transpose() * &lam[l];
        for i in 0..l {
            g += h.levels()[i].a.transpose() * &lam[i];
        }
        rep.stationarity = rep.stationarity.max(g.amax());
        rep.stationarity = rep.stationarity.max((&real + &lam[l]).amax());

        for i in 0..=l {
            let lv = &h.levels()[i];
            let v = lv.values(x);
            for r in 0..lv.rows() {
                let rel = lv.relations[r];
                let m = lam[i][r];
                let wrong = match rel {
                    Relation::Equal => T::zero(),
                    Relation::Upper => m.max(T::zero()),
                    Relation::Lower => (-m).max(T::zero()),
                };
                rep.sign = rep.sign.max(wrong);
                if rel.is_inequality() && !binding(rel, v[r], sol.slacks[i][r], tol) {
                    let gap = (v[r] - sol.slacks[i][r]).abs();
                    rep.complementarity = rep.complementarity.max(m.abs() * gap);
                }
            }
        }
    }
    rep
}
