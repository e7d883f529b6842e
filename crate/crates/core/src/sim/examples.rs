//! The three planar-chain scenarios.

use nalgebra::DVector;

use super::Scenario;
use crate::control::{ControlOptions, ControllerKind, Formulation, Method, Model, TaskKind, TaskSpec};
use crate::hlsp::SolverOptions;
use crate::robot_model::PlanarChain;
use crate::scalar::{lit, Real};

pub type ExampleTarget = [f64; 2];

/// End-effector target of examples 2 and 3.
pub const EXAMPLE_TARGET: ExampleTarget = [1.0, 1.0];

fn base<T: Real>(n: usize, q0: &[f64], tasks: Vec<TaskSpec<T>>, formulation: Formulation, method: Method<T>) -> Scenario<T> {
    Scenario {
        model: Model::Chain(PlanarChain::uniform(n).expect("unit chain")),
        tasks,
        dt: lit(0.005),
        duration: lit(10.0),
        formulation,
        method,
        q0: DVector::from_iterator(n, q0.iter().map(|&v| lit(v))),
        qd0: DVector::zeros(n),
        solver: SolverOptions::default(),
        control: ControlOptions::default(),
    }
}

fn tip_task<T: Real>(level: usize, kp: f64, kv: f64) -> TaskSpec<T> {
    TaskSpec::new(
        level,
        TaskKind::TipPosition {
            target: EXAMPLE_TARGET.iter().map(|&v| lit(v)).collect(),
            kp: lit(kp),
            kv: lit(kv),
            controller: ControllerKind::Pd,
        },
    )
}

/// Two unit links swinging freely from the horizontal.
pub fn example1<T: Real>(formulation: Formulation) -> Scenario<T> {
    let tasks = vec![
        TaskSpec::new(0, TaskKind::Eom),
        TaskSpec::new(0, TaskKind::TorqueReg { joints: vec![] }),
        TaskSpec::new(1, TaskKind::VelocityReg),
    ];
    base(2, &[-std::f64::consts::FRAC_PI_2, 0.0], tasks, formulation, Method::Gn)
}

/// Two links reaching for [`EXAMPLE_TARGET`] under a 0.1 rad/s trust region.
pub fn example2<T: Real>(formulation: Formulation) -> Scenario<T> {
    let tasks = vec![
        TaskSpec::new(0, TaskKind::Eom),
        TaskSpec::new(1, TaskKind::TrustRegion { rho: lit(0.1) }),
        tip_task(2, 1.0, 2.0),
        TaskSpec::new(3, TaskKind::VelocityReg),
        TaskSpec::new(4, TaskKind::TorqueReg { joints: vec![] }),
    ];
    base(2, &[-std::f64::consts::PI, 1.0], tasks, formulation, Method::Gn)
}

/// Three links with a passive first joint reaching for [`EXAMPLE_TARGET`].
pub fn example3<T: Real>(method: Method<T>, formulation: Formulation) -> Scenario<T> {
    let tasks = vec![
        TaskSpec::new(0, TaskKind::Eom),
        TaskSpec::new(0, TaskKind::TorqueReg { joints: vec![0] }),
        TaskSpec::new(1, TaskKind::TrustRegion { rho: lit(0.1) }),
        tip_task(2, 1.0, 2.0).augmentable(),
        TaskSpec::new(3, TaskKind::VelocityReg),
        TaskSpec::new(4, TaskKind::TorqueReg { joints: vec![] }),
    ];
    base(3, &[-std::f64::consts::PI, 1.0, 0.0], tasks, formulation, method)
}
