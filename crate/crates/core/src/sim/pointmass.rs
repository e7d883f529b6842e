//! 1-D point mass regulated to the origin: closed-form solution, the scalar
//! closed-loop recurrences and the damping studies built on them.

use nalgebra::DVector;

use super::Scenario;
use crate::control::{ControlOptions, ControllerKind, Formulation, Method, Model, TaskKind, TaskSpec};
use crate::hlsp::SolverOptions;
use crate::scalar::{lit, to_f64, Real};

/// Solution of `m q̈ + k_v q̇ + k_p q = 0` at time `t`.
pub fn closed_form_point_mass<T: Real>(m: T, kp: T, kv: T, q0: T, qd0: T, t: T) -> T {
    let delta = kv / (m + m);
    let w0sq = kp / m;
    let disc = delta * delta - w0sq;
    let scale = (delta * delta).max(w0sq).max(T::default_epsilon());
    let decay = (-delta * t).exp();
    if disc.abs() <= scale * lit(1e-12) {
        decay * (q0 + (qd0 + delta * q0) * t)
    } else if disc < T::zero() {
        let wd = (-disc).sqrt();
        decay * (q0 * (wd * t).cos() + (qd0 + delta * q0) / wd * (wd * t).sin())
    } else {
        let root = disc.sqrt();
        let (r1, r2) = (-delta + root, -delta - root);
        let a = (qd0 - r2 * q0) / (r1 - r2);
        a * (r1 * t).exp() + (q0 - a) * (r2 * t).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointMassController {
    /// Acceleration-domain PD with `μ I` damping on `q̈`.
    AccDamped,
    /// Velocity-domain PD with `μ I` damping on `q̇_{k+1}`.
    VelPd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GainRule {
    /// `k_v = 2√(m k_p)`
    Critical,
    /// `k_v = 2√(m (1 + μ²) k_p)`
    CriticalDamped,
}

impl GainRule {
    pub fn kv<T: Real>(self, m: T, kp: T, mu: T) -> T {
        let two = lit::<T>(2.0);
        match self {
            GainRule::Critical => two * (m * kp).sqrt(),
            GainRule::CriticalDamped => two * (m * (T::one() + mu * mu) * kp).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMassParams<T> {
    pub mass: T,
    pub kp: T,
    pub dt: T,
    pub duration: T,
    pub q0: T,
    pub qd0: T,
}

impl<T: Real> Default for PointMassParams<T> {
    fn default() -> Self {
        Self { mass: T::one(), kp: T::one(), dt: lit(0.005), duration: lit(10.0), q0: T::one(), qd0: T::zero() }
    }
}

impl<T: Real> PointMassParams<T> {
    pub fn steps(&self) -> usize {
        (to_f64(self.duration / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointMassRun<T> {
    pub mu: T,
    pub kv: T,
    pub t: Vec<T>,
    pub q: Vec<T>,
    pub qd: Vec<T>,
}

impl<T: Real> PointMassRun<T> {
    pub fn min_q(&self) -> T {
        self.q.iter().fold(self.q[0], |a, &b| a.min(b))
    }
}

/// Iterates the least-squares closed loop of the controller. For the unit
/// Jacobian the task level reduces to one scalar per cycle:
///
/// * `AccDamped`: `q̈ = −(k_p q + k_v q̇)/(1 + μ²)`, `q̇ ← q̇ + Δt q̈`;
/// * `VelPd`: `q̇_{k+1} = ((1 − Δt k_v) q̇ − Δt k_p q)/(1 + μ²)`;
///
/// and in both cases `q ← q + Δt q̇_k`.
pub fn point_mass_recurrence<T: Real>(
    controller: PointMassController,
    params: &PointMassParams<T>,
    kv: T,
    mu: T,
) -> PointMassRun<T> {
    let steps = params.steps();
    let dt = params.dt;
    let damp = T::one() + mu * mu;
    let (mut q, mut qd) = (params.q0, params.qd0);
    let mut run = PointMassRun {
        mu,
        kv,
        t: Vec::with_capacity(steps),
        q: Vec::with_capacity(steps),
        qd: Vec::with_capacity(steps),
    };
    for k in 0..steps {
        run.t.push(dt * lit::<T>(k as f64));
        run.q.push(q);
        run.qd.push(qd);
        let next = match controller {
            PointMassController::AccDamped => qd - dt * (params.kp * q + kv * qd) / damp,
            PointMassController::VelPd => ((T::one() - dt * kv) * qd - dt * params.kp * q) / damp,
        };
        q += dt * qd;
        qd = next;
    }
    run
}

/// One run per `μ`, gains from `rule`.
pub fn point_mass_study<T: Real>(
    mus: &[T],
    rule: GainRule,
    controller: PointMassController,
    params: &PointMassParams<T>,
) -> Vec<PointMassRun<T>> {
    mus.iter()
        .map(|&mu| point_mass_recurrence(controller, params, rule.kv(params.mass, params.kp, mu), mu))
        .collect()
}

/// First time `|q| < threshold`.
pub fn time_to_settle<T: Real>(run: &PointMassRun<T>, threshold: T) -> Option<T> {
    run.q.iter().position(|v| v.abs() < threshold).map(|k| run.t[k])
}

/// The same closed loop posed as a full hierarchy: equation of motion,
/// damped joint target, torque regularization.
pub fn point_mass_scenario<T: Real>(
    controller: PointMassController,
    params: &PointMassParams<T>,
    kv: T,
    mu: T,
) -> Scenario<T> {
    let formulation = match controller {
        PointMassController::AccDamped => Formulation::Acc,
        PointMassController::VelPd => Formulation::Vel,
    };
    Scenario {
        model: Model::PointMass { mass: params.mass },
        tasks: vec![
            TaskSpec::new(0, TaskKind::Eom),
            TaskSpec::new(
                1,
                TaskKind::JointTarget { joint: 0, target: T::zero(), kp: params.kp, kv, controller: ControllerKind::Pd },
            )
            .augmentable(),
            TaskSpec::new(2, TaskKind::TorqueReg { joints: vec![] }),
        ],
        dt: params.dt,
        duration: params.duration,
        formulation,
        method: Method::Lm(mu),
        q0: DVector::from_element(1, params.q0),
        qd0: DVector::from_element(1, params.qd0),
        solver: SolverOptions::default(),
        control: ControlOptions::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_closed_form() {
        for &t in &[0.0f64, 0.5, 1.0, 3.0, 10.0] {
            let q = closed_form_point_mass(1.0, 1.0, 2.0, 1.0, 0.0, t);
            assert!((q - (1.0 + t) * (-t).exp()).abs() < 1e-12);
        }
        assert_eq!(closed_form_point_mass(1.0, 1.0, 1.0, 0.7, 0.2, 0.0), 0.7);
    }

    #[test]
    fn underdamped_matches_fine_integration() {
        // RK4 at 1e-5 is far more accurate than the 1e-4 check needs
        let (m, kp, kv) = (1.0f64, 1.0, 1.0);
        let f = |q: f64, v: f64| (v, -(kv * v + kp * q) / m);
        let h = 1e-5;
        let (mut q, mut v) = (1.0, 0.0);
        let mut worst: f64 = 0.0;
        for k in 0..1_000_000usize {
            if k % 1000 == 0 {
                let t = k as f64 * h;
                worst = worst.max((q - closed_form_point_mass(m, kp, kv, 1.0, 0.0, t)).abs());
            }
            let (a1, b1) = f(q, v);
            let (a2, b2) = f(q + 0.5 * h * a1, v + 0.5 * h * b1);
            let (a3, b3) = f(q + 0.5 * h * a2, v + 0.5 * h * b2);
            let (a4, b4) = f(q + h * a3, v + h * b3);
            q += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            v += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        }
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn overdamped_initial_conditions() {
        let (q0, qd0) = (0.3, -0.4);
        let q = |t: f64| closed_form_point_mass(1.0, 1.0, 5.0, q0, qd0, t);
        assert!((q(0.0) - q0).abs() < 1e-12);
        let h = 1e-6;
        assert!(((q(h) - q(-h)) / (2.0 * h) - qd0).abs() < 1e-6);
    }

    #[test]
    fn damping_slows_velocity_pd() {
        let p = PointMassParams::<f64>::default();
        let base = point_mass_recurrence(PointMassController::VelPd, &p, 2.0, 0.0);
        let damped = point_mass_recurrence(PointMassController::VelPd, &p, 2.0, 0.5);
        // one step: q̇_1(μ) = q̇_1(0)/(1 + μ²)
        assert!((damped.qd[1] - base.qd[1] / 1.25).abs() < 1e-15);
    }
}
