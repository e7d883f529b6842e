//! Closed-loop simulation: compile the hierarchy, solve it, integrate, log.

mod examples;
mod metrics;
mod pointmass;

use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::control::{compile, ControlError, ControlOptions, ControlState, Formulation, Method, Mode, Model, TaskSpec};
use crate::hlsp::{Hierarchy, HlspError, HlspSolver, SolverOptions};
use crate::scalar::{lit, Real};

pub use examples::{example1, example2, example3, ExampleTarget, EXAMPLE_TARGET};
pub use metrics::{chatter_count, energy_drift, max_rebound, tip_error_norms};
pub use pointmass::{
    closed_form_point_mass, point_mass_recurrence, point_mass_scenario, point_mass_study, time_to_settle, GainRule,
    PointMassController, PointMassParams, PointMassRun,
};

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T: Real> {
    pub model: Model<T>,
    pub tasks: Vec<TaskSpec<T>>,
    pub dt: T,
    pub duration: T,
    pub formulation: Formulation,
    pub method: Method<T>,
    pub q0: DVector<T>,
    pub qd0: DVector<T>,
    pub solver: SolverOptions<T>,
    pub control: ControlOptions<T>,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<(), SimError<T>> {
        let n = self.model.dof();
        // negated comparisons so NaN is rejected too
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let bad_times = !(self.duration > T::zero()) || !(self.dt > T::zero()) || self.dt >= self.duration;
        if bad_times {
            return Err(SimError::InvalidScenario("need 0 < dt < duration".into()));
        }
        if self.q0.len() != n || self.qd0.len() != n {
            return Err(SimError::InvalidScenario(format!("initial state must have {n} entries")));
        }
        if !(self.q0.iter().chain(self.qd0.iter()).all(|v| v.is_finite())) {
            return Err(SimError::InvalidScenario("non-finite initial state".into()));
        }
        for t in &self.tasks {
            t.validate().map_err(SimError::Control)?;
        }
        Ok(())
    }

    /// `⌈duration / Δt⌉`, robust to the rounding of the quotient.
    pub fn steps(&self) -> usize {
        let r = crate::scalar::to_f64(self.duration / self.dt);
        (r - 1e-9).ceil().max(1.0) as usize
    }

    pub fn initial_state(&self) -> ControlState<T> {
        ControlState::new(self.q0.clone(), self.qd0.clone(), self.dt)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow<T: Real> {
    pub t: T,
    pub q: DVector<T>,
    pub qd: DVector<T>,
    pub qdd: DVector<T>,
    pub tau: DVector<T>,
    /// Slack norm per level.
    pub wnorm: Vec<T>,
    pub mode: Vec<Mode>,
    pub asiter: usize,
    pub solve_us: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog<T: Real> {
    pub rows: Vec<LogRow<T>>,
}

impl<T: Real> TrajectoryLog<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.rows.first().map_or(0, |r| r.q.len())
    }

    pub fn levels(&self) -> usize {
        self.rows.first().map_or(0, |r| r.wnorm.len())
    }

    /// Joint `j` position over time.
    pub fn joint(&self, j: usize) -> Vec<T> {
        self.rows.iter().map(|r| r.q[j]).collect()
    }

    pub fn joint_velocity(&self, j: usize) -> Vec<T> {
        self.rows.iter().map(|r| r.qd[j]).collect()
    }

    /// Largest per-joint position gap between two logs of equal length.
    pub fn max_position_gap(&self, other: &TrajectoryLog<T>) -> T {
        self.rows
            .iter()
            .zip(&other.rows)
            .fold(T::zero(), |acc, (a, b)| acc.max((&a.q - &b.q).amax()))
    }
}

#[derive(Debug, Error)]
pub enum SimError<T: Real> {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Control(ControlError),
    #[error("solver failed at step {step}: {error}")]
    Solver { step: usize, error: HlspError<T>, log: Box<TrajectoryLog<T>> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Record solve wall time; when off the column is 0 and logs are
    /// bit-reproducible.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { timing: true }
    }
}

/// Advances `state` by one control cycle and returns the log row of the
/// cycle's starting point.
pub fn step<T: Real>(
    scenario: &Scenario<T>,
    state: &mut ControlState<T>,
    solver: &mut HlspSolver<T>,
    timing: bool,
    hook: &mut dyn FnMut(usize, &Hierarchy<T>),
) -> Result<LogRow<T>, StepError<T>> {
    let n = scenario.model.dof();
    let compiled = compile(&scenario.model, &scenario.tasks, scenario.formulation, scenario.method, state, &scenario.control)
        .map_err(StepError::Control)?;
    hook(state.cycle, &compiled.hierarchy);
    let start = Instant::now();
    let sol = solver.solve(&compiled.hierarchy).map_err(StepError::Solver)?;
    let solve_us = if timing { start.elapsed().as_micros() as u64 } else { 0 };
    compiled.record(&sol, state);

    let dt = state.dt;
    let v = sol.x.rows(0, n).into_owned();
    let s = sol.x.rows(n, n).into_owned();
    let (qdd, tau, qd_next) = match scenario.formulation {
        Formulation::Vel => ((&v - &state.qd) / dt, s / dt, v),
        Formulation::Acc => (v.clone(), s, &state.qd + &v * dt),
    };
    let row = LogRow {
        t: state.t,
        q: state.q.clone(),
        qd: state.qd.clone(),
        qdd,
        tau,
        wnorm: sol.slack_norms(),
        mode: state.modes.clone(),
        asiter: sol.iterations,
        solve_us,
    };
    state.q = &state.q + &state.qd * dt;
    state.qd = qd_next;
    state.cycle += 1;
    state.t = dt * lit::<T>(state.cycle as f64);
    Ok(row)
}

/// Failure of a single cycle.
#[derive(Debug)]
pub enum StepError<T: Real> {
    Control(ControlError),
    Solver(HlspError<T>),
}

pub fn run_scenario<T: Real>(scenario: &Scenario<T>) -> Result<TrajectoryLog<T>, SimError<T>> {
    run_scenario_with(scenario, RunOptions::default(), |_, _| {})
}

/// Runs the scenario; `hook` sees every hierarchy before it is solved.
pub fn run_scenario_with<T: Real>(
    scenario: &Scenario<T>,
    opts: RunOptions,
    mut hook: impl FnMut(usize, &Hierarchy<T>),
) -> Result<TrajectoryLog<T>, SimError<T>> {
    scenario.validate()?;
    let mut state = scenario.initial_state();
    let mut solver = HlspSolver::new(scenario.solver);
    let steps = scenario.steps();
    let mut log = TrajectoryLog { rows: Vec::with_capacity(steps) };
    for k in 0..steps {
        match step(scenario, &mut state, &mut solver, opts.timing, &mut hook) {
            Ok(row) => log.rows.push(row),
            Err(StepError::Control(e)) => return Err(SimError::Control(e)),
            Err(StepError::Solver(error)) => return Err(SimError::Solver { step: k, error, log: Box::new(log) }),
        }
    }
    Ok(log)
}
