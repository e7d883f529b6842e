//! Task compilation: turns declarative tasks into priority levels every
//! control cycle.
//!
//! The decision vector of a cycle is `x = (v, s)` with `2n` entries:
//!
//! * velocity formulation: `v = q̇_{k+1}`, `s = Δt τ_k`;
//! * acceleration formulation: `v = q̈_k`, `s = τ_k`.
//!
//! Under `q̈_k = (q̇_{k+1} − q̇_k)/Δt` every velocity-form level is the
//! acceleration-form level multiplied by `Δt` (or identical), so both
//! formulations share one lexicographic optimum.
//!
//! Kinematic task rows read `J v + b` with the error `e = f_d − f`.

mod assemble;
mod model;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::robot_model::ModelError;
use crate::scalar::{lit, Real};

pub use assemble::{
    assemble_eom_level, assemble_task_level, compile, damped_acc_assemble, CompiledHierarchy, LevelInfo,
};
pub use model::{Model, TaskKinematics};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("level {level} row {row} has a multiplier but no Hessian slice")]
    MissingHessian { level: usize, row: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    Acc,
    Vel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method<T> {
    /// Gauss-Newton: no curvature rows.
    Gn,
    /// Newton with the analytic hierarchical Hessian, switched per level.
    NewtonAh,
    /// Levenberg-Marquardt: constant `μ I` augmentation.
    Lm(T),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Gn,
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    /// `ė^ctrl = −k_p e` (velocity formulation only).
    P,
    /// PD: `ë^ctrl = −k_p e − k_v ė`, emulated in the velocity domain.
    Pd,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskKind<T> {
    /// Equation of motion, `n` equality rows.
    Eom,
    /// `τ_j = 0` for the listed joints (all joints when empty).
    TorqueReg { joints: Vec<usize> },
    /// `|τ_j| ≤ limit` for every joint.
    TorqueLimit { limit: T },
    /// `q̇_{k+1} = 0`.
    VelocityReg,
    /// `‖q̇_{k+1}‖_∞ ≤ ρ`.
    TrustRegion { rho: T },
    TipPosition { target: Vec<T>, kp: T, kv: T, controller: ControllerKind },
    JointTarget { joint: usize, target: T, kp: T, kv: T, controller: ControllerKind },
    /// `lower ≤ com_x ≤ upper`, approached with `gain` (default `1/Δt`).
    ComBox { lower: T, upper: T, gain: Option<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec<T> {
    /// Priority, smaller is more important. Gaps are allowed.
    pub level: usize,
    pub kind: TaskKind<T>,
    /// Relation of kinematic task rows; ignored by the other kinds.
    pub relation: crate::hlsp::Relation,
    /// Takes part in the hierarchical Hessian.
    pub augmentable: bool,
}

impl<T: Real> TaskSpec<T> {
    pub fn new(level: usize, kind: TaskKind<T>) -> Self {
        Self { level, kind, relation: crate::hlsp::Relation::Equal, augmentable: false }
    }

    pub fn augmentable(mut self) -> Self {
        self.augmentable = true;
        self
    }

    pub fn with_relation(mut self, relation: crate::hlsp::Relation) -> Self {
        self.relation = relation;
        self
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let pos = |v: T, what: &str| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(ControlError::InvalidTask(format!("{what} must be positive")))
            }
        };
        match &self.kind {
            TaskKind::TorqueLimit { limit } => pos(*limit, "torque limit"),
            TaskKind::TrustRegion { rho } => pos(*rho, "trust region radius"),
            TaskKind::TipPosition { kp, kv, controller, .. } | TaskKind::JointTarget { kp, kv, controller, .. } => {
                pos(*kp, "k_p")?;
                if *controller == ControllerKind::Pd {
                    pos(*kv, "k_v")?;
                }
                Ok(())
            }
            TaskKind::ComBox { lower, upper, gain } => {
                if lower > upper {
                    return Err(ControlError::InvalidTask("com box lower bound above upper bound".into()));
                }
                if let Some(g) = gain {
                    pos(*g, "com box gain")?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Tuning of the second-order augmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOptions<T> {
    /// Eigenvalue floor of [`psd_factor`].
    pub epsilon: T,
    /// `ν = nu_factor · Δt²`.
    pub nu_factor: T,
    /// Cycles forced to Gauss-Newton at start-up.
    pub forced_gn_cycles: usize,
}

impl<T: Real> Default for ControlOptions<T> {
    fn default() -> Self {
        Self { epsilon: lit(1e-8), nu_factor: lit(1e-12), forced_gn_cycles: 2 }
    }
}

/// Per-loop state carried from one cycle to the next.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlState<T: Real> {
    pub t: T,
    pub dt: T,
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub cycle: usize,
    /// Previous cycle's `λ^ctrl[l][i]`, restricted to task rows.
    pub multipliers: Option<Vec<Vec<DVector<T>>>>,
    /// Previous cycle's `½‖J q̇ + ė^ctrl‖²` per level.
    pub residuals: Vec<T>,
    pub modes: Vec<Mode>,
}

impl<T: Real> ControlState<T> {
    pub fn new(q: DVector<T>, qd: DVector<T>, dt: T) -> Self {
        Self { t: T::zero(), dt, q, qd, cycle: 0, multipliers: None, residuals: Vec::new(), modes: Vec::new() }
    }

    pub fn nu(&self, opts: &ControlOptions<T>) -> T {
        opts.nu_factor * self.dt * self.dt
    }
}

/// `ë^ctrl = −k_p e − k_v ė`.
pub fn pd_acc_reference<T: Real>(e: &DVector<T>, edot: &DVector<T>, kp: T, kv: T) -> DVector<T> {
    -(e * kp) - edot * kv
}

/// `ė^ctrl = −k_p e`.
pub fn p_vel_reference<T: Real>(e: &DVector<T>, kp: T) -> DVector<T> {
    -(e * kp)
}

/// `ė^ctrl_PD = ė + Δt (ë^ctrl + J̇ q̇)`: with the row `J q̇_{k+1} + ė^ctrl_PD`
/// the least-squares velocity is one explicit Euler step of the PD
/// acceleration `J q̈ = −J̇ q̇ − ë^ctrl`.
pub fn pd_vel_reference<T: Real>(
    e: &DVector<T>,
    edot: &DVector<T>,
    jdot: &DMatrix<T>,
    qdot: &DVector<T>,
    dt: T,
    kp: T,
    kv: T,
) -> DVector<T> {
    edot + (pd_acc_reference(e, edot, kp, kv) + jdot * qdot) * dt
}

/// Curvature of one task row with respect to `q`.
#[derive(Clone, Debug, PartialEq)]
pub enum Curvature<T: Real> {
    /// Not part of the Hessian (equation of motion, augmentation rows).
    Excluded,
    /// Linear in `q`: contributes zero.
    Linear,
    /// `∇²` of the row's constraint function, already signed for `Ĥ = Σ λ C`.
    Hessian(DMatrix<T>),
    /// Augmentable row whose curvature is unknown.
    Missing,
}

/// `Ĥ_l = Σ_{i ≤ l} Σ_r λ_{i,l,r} C_{i,r}` on the `n × n` joint block.
///
/// `multipliers[i]` and `curvatures[i]` describe level `i`; rows past the end
/// of `curvatures[i]` are ignored.
pub fn hierarchical_hessian<T: Real>(
    n: usize,
    multipliers: &[DVector<T>],
    curvatures: &[Vec<Curvature<T>>],
) -> Result<DMatrix<T>, ControlError> {
    if multipliers.len() != curvatures.len() {
        return Err(ControlError::DimensionMismatch(format!(
            "{} multiplier blocks for {} curvature blocks",
            multipliers.len(),
            curvatures.len()
        )));
    }
    let mut h = DMatrix::zeros(n, n);
    for (level, (lam, curv)) in multipliers.iter().zip(curvatures).enumerate() {
        for (row, c) in curv.iter().enumerate() {
            let l = if row < lam.len() { lam[row] } else { T::zero() };
            match c {
                Curvature::Hessian(m) => {
                    if m.shape() != (n, n) {
                        return Err(ControlError::DimensionMismatch(format!("curvature of row {row} is not {n}x{n}")));
                    }
                    if l != T::zero() {
                        h += m * l;
                    }
                }
                Curvature::Missing if l != T::zero() => return Err(ControlError::MissingHessian { level, row }),
                _ => {}
            }
        }
    }
    // exact symmetry
    Ok((&h + h.transpose()) * lit::<T>(0.5))
}

/// `R = √max(U, ε) Qᵀ` from `Ĥ = Q U Qᵀ`.
pub fn psd_factor<T: Real>(h: &DMatrix<T>, eps: T) -> DMatrix<T> {
    let n = h.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (h + h.transpose()) * lit::<T>(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut r = eig.eigenvectors.transpose();
    for i in 0..n {
        let s = eig.eigenvalues[i].max(eps).sqrt();
        for j in 0..n {
            r[(i, j)] *= s;
        }
    }
    r
}

/// NEWTON iff the previous Gauss-Newton residual is at least `ν`.
pub fn newton_switch<T: Real>(residual: T, nu: T) -> Mode {
    if residual >= nu {
        Mode::Newton
    } else {
        Mode::Gn
    }
}

/// `(w^optim, λ^optim) = Δt (w^ctrl, λ^ctrl)`.
pub fn rescale_to_optim<T: Real>(w: &DVector<T>, lambda: &DVector<T>, dt: T) -> (DVector<T>, DVector<T>) {
    (w * dt, lambda * dt)
}
