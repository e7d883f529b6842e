use lexdyn::control::{Formulation, Method};
use lexdyn::sim::*;
use nalgebra::DVector;

fn quiet(sc: &Scenario<f64>) -> TrajectoryLog<f64> {
    run_scenario_with(sc, RunOptions { timing: false }, |_, _| {}).unwrap()
}

#[test]
fn first_step_is_free_fall_in_both_formulations() {
    for form in [Formulation::Acc, Formulation::Vel] {
        let sc = example1::<f64>(form);
        let mut short = sc.clone();
        short.duration = 0.02;
        let log = quiet(&short);
        let m = sc.model.mass_matrix(&sc.q0).unwrap();
        let n = sc.model.bias_forces(&sc.q0, &sc.qd0).unwrap();
        let expect = m.cholesky().unwrap().solve(&(-n));
        assert!((&log.rows[0].qdd - expect).amax() < 1e-9, "{form:?}");
        assert!(log.rows[0].tau.amax() < 1e-9);
    }
}

#[test]
fn example2_first_steps_reduce_tip_error() {
    let mut sc = example2::<f64>(Formulation::Vel);
    sc.duration = 0.5;
    let log = quiet(&sc);
    let e = tip_error_norms(&log, &sc.model, &EXAMPLE_TARGET).unwrap();
    assert!(e.last().unwrap() < &e[0]);
}

#[test]
fn runs_are_bitwise_deterministic() {
    let mut sc = example3::<f64>(Method::NewtonAh, Formulation::Vel);
    sc.duration = 1.0;
    assert_eq!(quiet(&sc), quiet(&sc));
}

#[test]
fn ten_seconds_is_two_thousand_rows() {
    let sc = example1::<f64>(Formulation::Vel);
    assert_eq!(sc.steps(), 2000);
    assert_eq!(quiet(&sc).len(), 2000);
    let p = PointMassParams::<f64>::default();
    assert_eq!(p.steps(), 2000);
}

#[test]
fn positions_follow_explicit_euler() {
    let sc = example1::<f64>(Formulation::Vel);
    let log = quiet(&sc);
    for w in log.rows.windows(2) {
        let next = &w[0].q + &w[0].qd * sc.dt;
        assert!((next - &w[1].q).amax() < 1e-14);
    }
}

#[test]
fn hierarchy_reproduces_point_mass_recurrence() {
    let p = PointMassParams::<f64>::default();
    for ctrl in [PointMassController::AccDamped, PointMassController::VelPd] {
        for mu in [0.0, 0.5, 1.0] {
            let rec = point_mass_recurrence(ctrl, &p, 2.0, mu);
            let log = quiet(&point_mass_scenario(ctrl, &p, 2.0, mu));
            let gap = log.rows.iter().zip(&rec.q).fold(0.0f64, |m, (r, q)| m.max((r.q[0] - q).abs()));
            assert!(gap < 1e-10, "{ctrl:?} μ={mu}: {gap}");
        }
    }
}

#[test]
fn undamped_point_mass_tracks_closed_form() {
    let p = PointMassParams::<f64>::default();
    let run = point_mass_recurrence(PointMassController::AccDamped, &p, 2.0, 0.0);
    let err = run
        .t
        .iter()
        .zip(&run.q)
        .fold(0.0f64, |m, (&t, &q)| m.max((q - closed_form_point_mass(1.0, 1.0, 2.0, 1.0, 0.0, t)).abs()));
    assert!(err < 5e-3, "{err}");
}

#[test]
fn damping_overshoot_and_its_compensation() {
    let p = PointMassParams::<f64>::default();
    let plain = point_mass_study(&[1.0], GainRule::Critical, PointMassController::AccDamped, &p);
    let fixed = point_mass_study(&[1.0], GainRule::CriticalDamped, PointMassController::AccDamped, &p);
    assert!(plain[0].min_q() < -0.01);
    assert!(fixed[0].min_q() > -1e-3);
    assert!((fixed[0].kv - 2.0 * 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn velocity_pd_damping_only_slows() {
    let p = PointMassParams { duration: 2000.0, ..PointMassParams::<f64>::default() };
    let runs = point_mass_study(&[0.0, 0.5, 1.0], GainRule::Critical, PointMassController::VelPd, &p);
    let t: Vec<f64> = runs.iter().map(|r| time_to_settle(r, 0.01).unwrap()).collect();
    assert!(t[0] < t[1] && t[1] < t[2], "{t:?}");
    assert!(runs.iter().all(|r| r.min_q() > -1e-3));
}

#[test]
fn passive_joint_torque_stays_zero() {
    let mut sc = example3::<f64>(Method::Gn, Formulation::Vel);
    sc.duration = 2.0;
    let log = quiet(&sc);
    assert!(log.rows.iter().all(|r| r.tau[0].abs() < 1e-9));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = example1::<f64>(Formulation::Vel);
    sc.q0 = DVector::zeros(3);
    assert!(matches!(run_scenario(&sc), Err(SimError::InvalidScenario(_))));
    let mut sc = example1::<f64>(Formulation::Vel);
    sc.dt = 20.0;
    assert!(matches!(run_scenario(&sc), Err(SimError::InvalidScenario(_))));
}

#[test]
fn single_precision_runs() {
    let mut sc = example1::<f32>(Formulation::Vel);
    sc.duration = 0.5;
    let log = run_scenario(&sc).unwrap();
    assert_eq!(log.len(), 100);
    assert!(log.rows.iter().all(|r| r.q.iter().all(|v| v.is_finite())));
}
