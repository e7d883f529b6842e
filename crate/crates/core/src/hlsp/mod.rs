//! Lexicographic least-squares programs with slack relaxation.
//!
//! A [`Hierarchy`] stacks priority levels of linear rows `a x + b ⋚ w`. Level
//! `l` minimizes `½‖w_l‖²` while every row of the levels above it keeps the
//! optimal slack it was granted. Inequality slacks are one-sided: a satisfied
//! row contributes nothing, a violated row contributes its violation.
//!
//! Multipliers follow the convention `λ_{l,l} = −w_l` on a level's own rows,
//! and the level stationarity condition reads
//! `A_lᵀ λ_{l,l} + Σ_{i<l} A_iᵀ λ_{i,l} = 0`. An `Upper` row therefore carries
//! a non-positive multiplier, a `Lower` row a non-negative one.

mod equality;
mod kkt;
pub(crate) mod linalg;
mod oracle;
pub mod random;
mod report;
mod solver;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Real};

pub use equality::{solve_equality, EqualitySolution};
pub use kkt::{check_kkt, KktReport};
pub use oracle::{brute_force_oracle, MAX_ORACLE_INEQUALITIES};
pub use solver::{solve, HlspSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `a x + b = w`
    Equal,
    /// `a x + b ≤ w`
    Upper,
    /// `a x + b ≥ w`
    Lower,
}

impl Relation {
    pub fn is_inequality(self) -> bool {
        !matches!(self, Relation::Equal)
    }

    /// Factor that rewrites the row as an upper bound.
    pub(crate) fn sign<T: Real>(self) -> T {
        match self {
            Relation::Lower => -T::one(),
            _ => T::one(),
        }
    }

    /// One-sided slack of a row value under this relation.
    pub fn slack<T: Real>(self, value: T) -> T {
        match self {
            Relation::Equal => value,
            Relation::Upper => value.max(T::zero()),
            Relation::Lower => value.min(T::zero()),
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum HlspError<T: Real> {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in level {level}")]
    NonFinite { level: usize },
    #[error("active-set iteration limit reached after {iterations} iterations")]
    IterationLimit { iterations: usize, best: Box<HlspSolution<T>> },
    #[error("{rows} inequality rows exceed the enumeration limit of {max}")]
    TooLarge { rows: usize, max: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorityLevel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub relations: Vec<Relation>,
}

impl<T: Real> PriorityLevel<T> {
    pub fn new(a: DMatrix<T>, b: DVector<T>, relations: Vec<Relation>) -> Result<Self, HlspError<T>> {
        if a.nrows() != b.len() || relations.len() != b.len() {
            return Err(HlspError::DimensionMismatch(format!(
                "A has {} rows, b has {}, {} relations",
                a.nrows(),
                b.len(),
                relations.len()
            )));
        }
        Ok(Self { a, b, relations })
    }

    pub fn equality(a: DMatrix<T>, b: DVector<T>) -> Result<Self, HlspError<T>> {
        let m = b.len();
        Self::new(a, b, vec![Relation::Equal; m])
    }

    pub fn empty(n: usize) -> Self {
        Self { a: DMatrix::zeros(0, n), b: DVector::zeros(0), relations: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Appends the rows of `other` below the rows of `self`.
    pub fn extend(&mut self, other: &PriorityLevel<T>) -> Result<(), HlspError<T>> {
        if other.cols() != self.cols() {
            return Err(HlspError::DimensionMismatch(format!(
                "cannot stack {} columns onto {}",
                other.cols(),
                self.cols()
            )));
        }
        let m = self.rows();
        let k = other.rows();
        let mut a = DMatrix::zeros(m + k, self.cols());
        a.rows_mut(0, m).copy_from(&self.a);
        a.rows_mut(m, k).copy_from(&other.a);
        let mut b = DVector::zeros(m + k);
        b.rows_mut(0, m).copy_from(&self.b);
        b.rows_mut(m, k).copy_from(&other.b);
        self.a = a;
        self.b = b;
        self.relations.extend_from_slice(&other.relations);
        Ok(())
    }

    /// `A x + b`.
    pub fn values(&self, x: &DVector<T>) -> DVector<T> {
        &self.a * x + &self.b
    }

    /// One-sided slacks realised by `x`.
    pub fn violations(&self, x: &DVector<T>) -> DVector<T> {
        let v = self.values(x);
        DVector::from_iterator(v.len(), v.iter().zip(&self.relations).map(|(&vi, r)| r.slack(vi)))
    }

    pub fn inequality_count(&self) -> usize {
        self.relations.iter().filter(|r| r.is_inequality()).count()
    }

    /// Multiplies the level by `c`, rows and right-hand side alike.
    pub fn scaled(&self, c: T) -> Self {
        Self { a: &self.a * c, b: &self.b * c, relations: self.relations.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy<T: Real> {
    n: usize,
    levels: Vec<PriorityLevel<T>>,
}

impl<T: Real> Hierarchy<T> {
    pub fn new(n: usize) -> Self {
        Self { n, levels: Vec::new() }
    }

    pub fn from_levels(n: usize, levels: Vec<PriorityLevel<T>>) -> Result<Self, HlspError<T>> {
        let mut h = Self::new(n);
        for l in levels {
            h.push(l)?;
        }
        Ok(h)
    }

    /// Appends a new lowest-priority level.
    pub fn push(&mut self, level: PriorityLevel<T>) -> Result<(), HlspError<T>> {
        if level.cols() != self.n {
            return Err(HlspError::DimensionMismatch(format!(
                "level {} has {} columns, hierarchy has {}",
                self.levels.len(),
                level.cols(),
                self.n
            )));
        }
        if !(level.a.iter().all(|v| v.is_finite()) && level.b.iter().all(|v| v.is_finite())) {
            return Err(HlspError::NonFinite { level: self.levels.len() });
        }
        self.levels.push(level);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> &[PriorityLevel<T>] {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut [PriorityLevel<T>] {
        &mut self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn inequality_count(&self) -> usize {
        self.levels.iter().map(PriorityLevel::inequality_count).sum()
    }

    pub fn row_count(&self) -> usize {
        self.levels.iter().map(PriorityLevel::rows).sum()
    }

    /// Writes the hierarchy as plain text, one block per level:
    ///
    /// ```text
    /// %%hierarchy n=<cols> levels=<p>
    /// level <l> rows=<m>
    /// <relation> <b> <a_0> … <a_{n-1}>
    /// ```
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "%%hierarchy n={} levels={}", self.n, self.levels.len())?;
        for (l, level) in self.levels.iter().enumerate() {
            writeln!(out, "level {} rows={}", l, level.rows())?;
            for r in 0..level.rows() {
                let rel = match level.relations[r] {
                    Relation::Equal => "E",
                    Relation::Upper => "U",
                    Relation::Lower => "L",
                };
                write!(out, "{} {:.17e}", rel, to_f64(level.b[r]))?;
                for c in 0..self.n {
                    write!(out, " {:.17e}", to_f64(level.a[(r, c)]))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Feasibility, sign and step tolerance.
    pub tolerance: T,
    /// Active-set iteration budget for one solve.
    pub max_iterations: usize,
    /// Relative singular value threshold of the rank-revealing factorizations.
    pub rank_threshold: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self { tolerance: lit(1e-9), max_iterations: 500, rank_threshold: lit(1e-10) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HlspSolution<T: Real> {
    pub x: DVector<T>,
    /// Optimal slack of every row, per level.
    pub slacks: Vec<DVector<T>>,
    /// `multipliers[l][i]` holds the multipliers of the rows of level `i ≤ l`
    /// in the optimality conditions of level `l`.
    pub multipliers: Vec<Vec<DVector<T>>>,
    /// Rows holding with equality at the solution (equality rows always do).
    pub active: Vec<Vec<bool>>,
    pub iterations: usize,
    /// Dimension of the set of minimizers left after the last level.
    pub free_dims: usize,
}

impl<T: Real> HlspSolution<T> {
    pub fn slack_norms(&self) -> Vec<T> {
        self.slacks.iter().map(|w| w.norm()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_shape_checked() {
        let r = PriorityLevel::<f64>::new(DMatrix::zeros(2, 3), DVector::zeros(1), vec![Relation::Equal]);
        assert!(matches!(r, Err(HlspError::DimensionMismatch(_))));
        let mut h = Hierarchy::<f64>::new(3);
        assert!(h.push(PriorityLevel::empty(2)).is_err());
        let nan = PriorityLevel::equality(DMatrix::from_element(1, 3, f64::NAN), DVector::zeros(1)).unwrap();
        assert!(matches!(h.push(nan), Err(HlspError::NonFinite { level: 0 })));
    }

    #[test]
    fn one_sided_slacks() {
        assert_eq!(Relation::Upper.slack(-2.0), 0.0);
        assert_eq!(Relation::Upper.slack(3.0), 3.0);
        assert_eq!(Relation::Lower.slack(-1.5), -1.5);
        assert_eq!(Relation::Lower.slack(0.5), 0.0);
        assert_eq!(Relation::Equal.slack(-0.5), -0.5);
    }

    #[test]
    fn dump_format() {
        let level = PriorityLevel::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_column_slice(&[-1.0]),
            vec![Relation::Upper],
        )
        .unwrap();
        let h = Hierarchy::from_levels(2, vec![level]).unwrap();
        let mut buf = Vec::new();
        h.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%hierarchy n=2 levels=1");
        assert_eq!(lines[1], "level 0 rows=1");
        assert!(lines[2].starts_with("U -1.00000000000000000e0 1.00000000000000000e0"));
    }
}
