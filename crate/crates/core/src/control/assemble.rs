use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::model::Model;
use super::{
    hierarchical_hessian, newton_switch, p_vel_reference, pd_acc_reference, pd_vel_reference, psd_factor,
    ControlError, ControlOptions, ControlState, ControllerKind, Curvature, Formulation, Method, Mode, TaskKind,
    TaskSpec,
};
use crate::hlsp::{Hierarchy, HlspSolution, PriorityLevel, Relation};
use crate::scalar::Real;

struct Row<T: Real> {
    a: DVector<T>,
    b: T,
    rel: Relation,
    curv: Curvature<T>,
    objective: bool,
}

fn unit<T: Real>(len: usize, i: usize, v: T) -> DVector<T> {
    let mut a = DVector::zeros(len);
    a[i] = v;
    a
}

fn to_level<T: Real>(rows: &[Row<T>], width: usize) -> PriorityLevel<T> {
    let mut a = DMatrix::zeros(rows.len(), width);
    for (i, r) in rows.iter().enumerate() {
        a.row_mut(i).copy_from(&r.a.transpose());
    }
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.b));
    PriorityLevel { a, b, relations: rows.iter().map(|r| r.rel).collect() }
}

fn check_state<T: Real>(model: &Model<T>, state: &ControlState<T>) -> Result<usize, ControlError> {
    let n = model.dof();
    if state.q.len() != n || state.qd.len() != n {
        return Err(ControlError::DimensionMismatch(format!(
            "model has {n} joints, state has {} / {}",
            state.q.len(),
            state.qd.len()
        )));
    }
    Ok(n)
}

fn eom_rows<T: Real>(model: &Model<T>, state: &ControlState<T>, formulation: Formulation) -> Result<Vec<Row<T>>, ControlError> {
    let n = check_state(model, state)?;
    let m = model.mass_matrix(&state.q)?;
    let nb = model.bias_forces(&state.q, &state.qd)?;
    let rhs = match formulation {
        Formulation::Vel => -(&m * &state.qd - &nb * state.dt),
        Formulation::Acc => nb,
    };
    Ok((0..n)
        .map(|i| {
            let mut a = DVector::zeros(2 * n);
            a.rows_mut(0, n).copy_from(&m.row(i).transpose());
            a[n + i] = -T::one();
            Row { a, b: rhs[i], rel: Relation::Equal, curv: Curvature::Excluded, objective: false }
        })
        .collect())
}

/// Equation of motion rows `[M −I] x + b = 0`.
pub fn assemble_eom_level<T: Real>(
    model: &Model<T>,
    state: &ControlState<T>,
    formulation: Formulation,
) -> Result<PriorityLevel<T>, ControlError> {
    let n = model.dof();
    Ok(to_level(&eom_rows(model, state, formulation)?, 2 * n))
}

fn task_rows<T: Real>(
    task: &TaskSpec<T>,
    model: &Model<T>,
    state: &ControlState<T>,
    formulation: Formulation,
) -> Result<Vec<Row<T>>, ControlError> {
    task.validate()?;
    let n = check_state(model, state)?;
    let w = 2 * n;
    let dt = state.dt;
    let vel = formulation == Formulation::Vel;
    // coefficient of v and the constant that turn "q̇_{k+1}" into row terms
    let (vscale, qd_term) = if vel { (T::one(), T::zero()) } else { (dt, T::one()) };
    let sscale = if vel { dt } else { T::one() };
    let lin = |a: DVector<T>, b: T, rel: Relation| Row { a, b, rel, curv: Curvature::Linear, objective: false };

    let rows = match &task.kind {
        TaskKind::Eom => eom_rows(model, state, formulation)?,
        TaskKind::TorqueReg { joints } => {
            let js: Vec<usize> = if joints.is_empty() { (0..n).collect() } else { joints.clone() };
            if let Some(&bad) = js.iter().find(|&&j| j >= n) {
                return Err(ControlError::InvalidTask(format!("torque joint {bad} out of range")));
            }
            js.iter().map(|&j| lin(unit(w, n + j, T::one()), T::zero(), Relation::Equal)).collect()
        }
        TaskKind::TorqueLimit { limit } => {
            let l = *limit * sscale;
            let mut rows: Vec<Row<T>> = (0..n).map(|j| lin(unit(w, n + j, T::one()), -l, Relation::Upper)).collect();
            rows.extend((0..n).map(|j| lin(unit(w, n + j, T::one()), l, Relation::Lower)));
            rows
        }
        TaskKind::VelocityReg => {
            (0..n).map(|j| lin(unit(w, j, vscale), qd_term * state.qd[j], Relation::Equal)).collect()
        }
        TaskKind::TrustRegion { rho } => {
            let mut rows: Vec<Row<T>> =
                (0..n).map(|j| lin(unit(w, j, vscale), qd_term * state.qd[j] - *rho, Relation::Upper)).collect();
            rows.extend((0..n).map(|j| lin(unit(w, j, vscale), qd_term * state.qd[j] + *rho, Relation::Lower)));
            rows
        }
        TaskKind::TipPosition { target, kp, kv, controller } => {
            let kin = model.tip(&state.q, &state.qd)?;
            if target.len() != kin.f.len() {
                return Err(ControlError::InvalidTask(format!(
                    "tip target has {} components, task has {}",
                    target.len(),
                    kin.f.len()
                )));
            }
            let curv: Vec<Curvature<T>> = kin.hessian.iter().map(|h| Curvature::Hessian(-h)).collect();
            tracking_rows(&kin.f, &kin.j, &kin.jdot, curv, target, *kp, *kv, *controller, task, state, formulation)?
        }
        TaskKind::JointTarget { joint, target, kp, kv, controller } => {
            if *joint >= n {
                return Err(ControlError::InvalidTask(format!("joint {joint} out of range")));
            }
            let f = DVector::from_element(1, state.q[*joint]);
            let mut j = DMatrix::zeros(1, n);
            j[(0, *joint)] = T::one();
            let jdot = DMatrix::zeros(1, n);
            tracking_rows(&f, &j, &jdot, vec![Curvature::Linear], &[*target], *kp, *kv, *controller, task, state, formulation)?
        }
        TaskKind::ComBox { lower, upper, gain } => {
            let kin = model.com(&state.q, &state.qd)?;
            let g = gain.unwrap_or(T::one() / dt);
            let c = kin.f[0];
            let jc = kin.j.row(0).transpose();
            let mut a = DVector::zeros(w);
            a.rows_mut(0, n).copy_from(&(&jc * vscale));
            let base = qd_term * jc.dot(&state.qd);
            let curv = || Curvature::Hessian(-&kin.hessian[0]);
            vec![
                Row { a: a.clone(), b: base + g * (c - *upper), rel: Relation::Upper, curv: curv(), objective: false },
                Row { a, b: base + g * (c - *lower), rel: Relation::Lower, curv: curv(), objective: false },
            ]
        }
    };
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn tracking_rows<T: Real>(
    f: &DVector<T>,
    j: &DMatrix<T>,
    jdot: &DMatrix<T>,
    curv: Vec<Curvature<T>>,
    target: &[T],
    kp: T,
    kv: T,
    controller: ControllerKind,
    task: &TaskSpec<T>,
    state: &ControlState<T>,
    formulation: Formulation,
) -> Result<Vec<Row<T>>, ControlError> {
    let n = j.ncols();
    let e = DVector::from_column_slice(target) - f;
    let edot = -(j * &state.qd);
    let b = match (formulation, controller) {
        (Formulation::Vel, ControllerKind::P) => p_vel_reference(&e, kp),
        (Formulation::Vel, ControllerKind::Pd) => pd_vel_reference(&e, &edot, jdot, &state.qd, state.dt, kp, kv),
        (Formulation::Acc, ControllerKind::Pd) => jdot * &state.qd + pd_acc_reference(&e, &edot, kp, kv),
        (Formulation::Acc, ControllerKind::P) => {
            return Err(ControlError::InvalidTask("a P controller needs the velocity formulation".into()))
        }
    };
    Ok(curv
        .into_iter()
        .enumerate()
        .map(|(d, c)| {
            let mut a = DVector::zeros(2 * n);
            a.rows_mut(0, n).copy_from(&j.row(d).transpose());
            Row { a, b: b[d], rel: task.relation, curv: c, objective: true }
        })
        .collect())
}

fn augmentation_rows<T: Real>(r: &DMatrix<T>) -> Vec<Row<T>> {
    let n = r.ncols();
    (0..r.nrows())
        .map(|i| {
            let mut a = DVector::zeros(2 * n);
            a.rows_mut(0, n).copy_from(&r.row(i).transpose());
            Row { a, b: T::zero(), rel: Relation::Equal, curv: Curvature::Excluded, objective: false }
        })
        .collect()
}

/// Rows of one task, followed by the augmentation `(R, 0)` when `mode` is
/// [`Mode::Newton`] and `r` is given.
pub fn assemble_task_level<T: Real>(
    task: &TaskSpec<T>,
    model: &Model<T>,
    state: &ControlState<T>,
    formulation: Formulation,
    mode: Mode,
    r: Option<&DMatrix<T>>,
) -> Result<PriorityLevel<T>, ControlError> {
    let n = model.dof();
    let mut rows = task_rows(task, model, state, formulation)?;
    if let (Mode::Newton, Some(r)) = (mode, r) {
        if r.ncols() != n {
            return Err(ControlError::DimensionMismatch(format!("R has {} columns, model has {n} joints", r.ncols())));
        }
        rows.extend(augmentation_rows(r));
    }
    Ok(to_level(&rows, 2 * n))
}

/// Acceleration-domain task rows damped by `μ I`.
pub fn damped_acc_assemble<T: Real>(
    task: &TaskSpec<T>,
    model: &Model<T>,
    state: &ControlState<T>,
    mu: T,
) -> Result<PriorityLevel<T>, ControlError> {
    let n = model.dof();
    let r = DMatrix::identity(n, n) * mu;
    assemble_task_level(task, model, state, Formulation::Acc, Mode::Newton, Some(&r))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelInfo<T: Real> {
    /// Priority value shared by the tasks of this level.
    pub priority: usize,
    /// Rows before the augmentation block.
    pub task_rows: usize,
    /// Kinematic objective rows entering the switching residual.
    pub objective_rows: Vec<usize>,
    pub curvature: Vec<Curvature<T>>,
    pub augmentable: bool,
    pub mode: Mode,
    pub hessian: Option<DMatrix<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompiledHierarchy<T: Real> {
    pub hierarchy: Hierarchy<T>,
    pub levels: Vec<LevelInfo<T>>,
}

impl<T: Real> CompiledHierarchy<T> {
    /// Stores what the next cycle needs from this cycle's solution.
    pub fn record(&self, sol: &HlspSolution<T>, state: &mut ControlState<T>) {
        let mult = sol
            .multipliers
            .iter()
            .map(|per| per.iter().zip(&self.levels).map(|(m, info)| m.rows(0, info.task_rows).into_owned()).collect())
            .collect();
        state.multipliers = Some(mult);
        state.residuals = self
            .levels
            .iter()
            .zip(&sol.slacks)
            .map(|(info, w)| {
                info.objective_rows.iter().fold(T::zero(), |acc, &r| acc + w[r] * w[r]) * crate::scalar::lit(0.5)
            })
            .collect();
        state.modes = self.levels.iter().map(|l| l.mode).collect();
    }
}

/// Builds this cycle's hierarchy from the task list.
pub fn compile<T: Real>(
    model: &Model<T>,
    tasks: &[TaskSpec<T>],
    formulation: Formulation,
    method: Method<T>,
    state: &ControlState<T>,
    opts: &ControlOptions<T>,
) -> Result<CompiledHierarchy<T>, ControlError> {
    let n = check_state(model, state)?;
    let mut groups: BTreeMap<usize, Vec<&TaskSpec<T>>> = BTreeMap::new();
    for t in tasks {
        groups.entry(t.level).or_default().push(t);
    }
    let nu = state.nu(opts);
    let mut hierarchy = Hierarchy::new(2 * n);
    let mut infos: Vec<LevelInfo<T>> = Vec::with_capacity(groups.len());
    let mut curvatures: Vec<Vec<Curvature<T>>> = Vec::with_capacity(groups.len());

    for (l, (priority, group)) in groups.into_iter().enumerate() {
        let mut rows = Vec::new();
        let mut augmentable = false;
        for task in group {
            let mut tr = task_rows(task, model, state, formulation)?;
            if task.augmentable {
                augmentable = true;
            } else {
                for r in tr.iter_mut() {
                    if matches!(r.curv, Curvature::Hessian(_) | Curvature::Missing) {
                        r.curv = Curvature::Excluded;
                    }
                }
            }
            rows.extend(tr);
        }
        let task_count = rows.len();
        let objective_rows: Vec<usize> = (0..task_count).filter(|&r| rows[r].objective).collect();
        curvatures.push(rows.iter().map(|r| r.curv.clone()).collect());

        let mut mode = Mode::Gn;
        let mut hessian = None;
        if augmentable {
            match method {
                Method::Gn => {}
                Method::Lm(mu) => {
                    mode = Mode::Newton;
                    rows.extend(augmentation_rows(&(DMatrix::identity(n, n) * mu)));
                }
                Method::NewtonAh => {
                    if let (true, Some(prev)) = (state.cycle >= opts.forced_gn_cycles, &state.multipliers) {
                        let residual = state.residuals.get(l).copied().unwrap_or(T::zero());
                        if newton_switch(residual, nu) == Mode::Newton {
                            let lam = prev.get(l).ok_or_else(|| {
                                ControlError::DimensionMismatch("previous multipliers miss a level".into())
                            })?;
                            let scaled: Vec<DVector<T>> = lam.iter().map(|m| m * state.dt).collect();
                            let h = hierarchical_hessian(n, &scaled, &curvatures[..=l])?;
                            rows.extend(augmentation_rows(&psd_factor(&h, opts.epsilon)));
                            hessian = Some(h);
                            mode = Mode::Newton;
                        }
                    }
                }
            }
        }
        hierarchy
            .push(to_level(&rows, 2 * n))
            .map_err(|e| ControlError::DimensionMismatch(e.to_string()))?;
        infos.push(LevelInfo {
            priority,
            task_rows: task_count,
            objective_rows,
            curvature: curvatures[l].clone(),
            augmentable,
            mode,
            hessian,
        });
    }
    Ok(CompiledHierarchy { hierarchy, levels: infos })
}
