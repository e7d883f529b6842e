use lexdyn::control::{
    assemble_eom_level, assemble_task_level, compile, damped_acc_assemble, hierarchical_hessian, pd_vel_reference,
    psd_factor, rescale_to_optim, ControlError, ControlOptions, ControlState, ControllerKind, Curvature, Formulation,
    Method, Mode, Model, TaskKind, TaskSpec,
};
use lexdyn::hlsp::{solve, Hierarchy, Relation, SolverOptions};
use lexdyn::robot_model::PlanarChain;
use lexdyn::sim::{example2, example3, run_scenario, run_scenario_with, RunOptions, Scenario};
use lexdyn::validation::hessian_snapshot_error;
use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;

fn chain(n: usize) -> Model<f64> {
    Model::Chain(PlanarChain::uniform(n).unwrap())
}

fn tip(level: usize, target: [f64; 2], controller: ControllerKind) -> TaskSpec<f64> {
    TaskSpec::new(level, TaskKind::TipPosition { target: target.to_vec(), kp: 1.0, kv: 2.0, controller })
}

fn state(q: &[f64], qd: &[f64]) -> ControlState<f64> {
    ControlState::new(DVector::from_column_slice(q), DVector::from_column_slice(qd), 0.005)
}

fn sorted(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn psd_factor_clamps_spectrum(n in 1usize..6, entries in prop::collection::vec(-3.0f64..3.0, 36)) {
        let a = DMatrix::from_fn(n, n, |i, j| entries[i * 6 + j]);
        let h = (&a + a.transpose()) * 0.5;
        let r = psd_factor(&h, 1e-8);
        prop_assert_eq!(r.shape(), (n, n));
        let got = sorted((r.transpose() * &r).symmetric_eigenvalues().iter().copied());
        let want = sorted(h.symmetric_eigenvalues().iter().map(|&e| e.max(1e-8)));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn psd_factor_reproduces_psd_input(n in 1usize..6, entries in prop::collection::vec(-2.0f64..2.0, 36)) {
        let a = DMatrix::from_fn(n, n, |i, j| entries[i * 6 + j]);
        let h = &a * a.transpose() + DMatrix::identity(n, n) * 1e-3;
        let r = psd_factor(&h, 1e-8);
        prop_assert!((r.transpose() * &r - &h).amax() < 1e-10);
    }
}

#[test]
fn gn_level_has_task_rows_only() {
    let s = state(&[-3.0, 1.0], &[0.1, -0.2]);
    let t = tip(1, [1.0, 1.0], ControllerKind::Pd);
    let gn = assemble_task_level(&t, &chain(2), &s, Formulation::Vel, Mode::Gn, None).unwrap();
    assert_eq!(gn.rows(), 2);
    let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
    let nt = assemble_task_level(&t, &chain(2), &s, Formulation::Vel, Mode::Newton, Some(&r)).unwrap();
    assert_eq!(nt.rows(), 4);
    assert_eq!(nt.a.view((2, 0), (2, 2)), r);
    assert_eq!(nt.a.view((2, 2), (2, 2)), DMatrix::zeros(2, 2));
    assert_eq!(nt.b.rows(2, 2), DVector::zeros(2));
}

#[test]
fn trust_region_boxes_next_velocity() {
    let s = state(&[0.3, -0.2, 1.0], &[0.0; 3]);
    let t = TaskSpec::new(1, TaskKind::TrustRegion { rho: 0.1 });
    let l = assemble_task_level(&t, &chain(3), &s, Formulation::Vel, Mode::Gn, None).unwrap();
    assert_eq!(l.rows(), 6);
    assert_eq!(l.relations.iter().filter(|&&r| r == Relation::Upper).count(), 3);
    assert_eq!(l.relations.iter().filter(|&&r| r == Relation::Lower).count(), 3);
    // q̇ = 0.05 sits inside, 0.15 violates
    let inside = DVector::from_column_slice(&[0.05, -0.05, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(l.violations(&inside).amax(), 0.0);
    let outside = DVector::from_column_slice(&[0.15, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!((l.violations(&outside).amax() - 0.05).abs() < 1e-15);
}

#[test]
fn eom_rows_at_rest_without_gravity() {
    let c = PlanarChain::new(PlanarChain::<f64>::uniform(2).unwrap().links().to_vec(), Vector2::zeros()).unwrap();
    let model = Model::Chain(c.clone());
    let s = state(&[0.4, -1.1], &[0.0, 0.0]);
    let l = assemble_eom_level(&model, &s, Formulation::Vel).unwrap();
    let m = c.mass_matrix(&s.q).unwrap();
    assert_eq!(l.a.view((0, 0), (2, 2)), m);
    assert_eq!(l.a.view((0, 2), (2, 2)), -DMatrix::identity(2, 2));
    assert_eq!(l.b, DVector::zeros(2));
}

#[test]
fn eom_rows_give_inverse_dynamics() {
    let model = chain(3);
    let s = state(&[-3.0, 1.0, 0.2], &[0.3, -0.1, 0.5]);
    let l = assemble_eom_level(&model, &s, Formulation::Vel).unwrap();
    let v = DVector::from_column_slice(&[0.1, 0.2, -0.3]);
    // fix q̇_{k+1} = v with a top level, leave Δtτ to the equation of motion
    let mut fix = DMatrix::zeros(3, 6);
    fix.view_mut((0, 0), (3, 3)).fill_with_identity();
    let h = Hierarchy::from_levels(
        6,
        vec![lexdyn::hlsp::PriorityLevel::equality(fix, -&v).unwrap(), l],
    )
    .unwrap();
    let sol = solve(&h, &SolverOptions::default()).unwrap();
    let m = model.mass_matrix(&s.q).unwrap();
    let nb = model.bias_forces(&s.q, &s.qd).unwrap();
    let want = &m * (&v - &s.qd) + nb * s.dt;
    assert!((sol.x.rows(3, 3) - want).amax() < 1e-12);
}

#[test]
fn acc_with_p_controller_is_rejected() {
    let s = state(&[0.0, 0.0], &[0.0, 0.0]);
    let t = tip(1, [1.0, 1.0], ControllerKind::P);
    let r = assemble_task_level(&t, &chain(2), &s, Formulation::Acc, Mode::Gn, None);
    assert!(matches!(r, Err(ControlError::InvalidTask(_))));
}

#[test]
fn damped_acc_rows_reduce_to_plain_rows() {
    let s = state(&[-3.0, 1.0], &[0.2, 0.1]);
    let t = tip(1, [1.0, 1.0], ControllerKind::Pd);
    let plain = assemble_task_level(&t, &chain(2), &s, Formulation::Acc, Mode::Gn, None).unwrap();
    let d0 = damped_acc_assemble(&t, &chain(2), &s, 0.0).unwrap();
    assert_eq!(d0.a.rows(0, 2), plain.a);
    assert_eq!(d0.b.rows(0, 2), plain.b);
    assert_eq!(d0.a.rows(2, 2).amax(), 0.0);
    let d1 = damped_acc_assemble(&t, &chain(2), &s, 0.1).unwrap();
    assert_eq!(d1.a.view((2, 0), (2, 2)), DMatrix::identity(2, 2) * 0.1);
}

#[test]
fn pd_vel_reference_vanishes_at_rest() {
    let z = DVector::zeros(2);
    let j0 = DMatrix::zeros(2, 2);
    assert_eq!(pd_vel_reference(&z, &z, &j0, &z, 0.005, 1.0, 2.0), z);
}

fn solve_cycle(model: &Model<f64>, tasks: &[TaskSpec<f64>], f: Formulation, m: Method<f64>, s: &ControlState<f64>) -> DVector<f64> {
    let c = compile(model, tasks, f, m, s, &ControlOptions::default()).unwrap();
    solve(&c.hierarchy, &SolverOptions::default()).unwrap().x
}

#[test]
fn velocity_cycle_is_euler_of_acceleration_cycle() {
    let model = chain(2);
    let tasks = vec![
        TaskSpec::new(0, TaskKind::Eom),
        tip(1, [1.0, 1.0], ControllerKind::Pd),
        TaskSpec::new(2, TaskKind::TorqueReg { joints: vec![] }),
    ];
    for (q, qd) in [([-3.0, 1.0], [0.0, 0.0]), ([0.7, -1.3], [0.4, -0.9]), ([2.0, 0.5], [-1.0, 0.3])] {
        let s = state(&q, &qd);
        let xv = solve_cycle(&model, &tasks, Formulation::Vel, Method::Gn, &s);
        let xa = solve_cycle(&model, &tasks, Formulation::Acc, Method::Gn, &s);
        let euler = &s.qd + xa.rows(0, 2) * s.dt;
        assert!((xv.rows(0, 2) - euler).amax() < 1e-10);
        // Δtτ against τ
        assert!((xv.rows(2, 2) - xa.rows(2, 2) * s.dt).amax() < 1e-10);
    }
}

#[test]
fn zero_multipliers_leave_gauss_newton_solution() {
    // square, full-rank tip Jacobian: the level leaves no free direction the
    // ε floor could claim
    let model = chain(2);
    let s = state(&[-3.0, 1.0], &[0.1, -0.1]);
    let t = tip(1, [1.0, 1.0], ControllerKind::Pd).augmentable();
    let eom = assemble_eom_level(&model, &s, Formulation::Vel).unwrap();
    let curv = vec![vec![Curvature::Hessian(DMatrix::identity(2, 2)); 2]];
    let hh = hierarchical_hessian(2, &[DVector::zeros(2)], &curv).unwrap();
    let r = psd_factor(&hh, 1e-8);
    let reg = TaskSpec::new(2, TaskKind::TorqueReg { joints: vec![] });
    let build = |mode, r: Option<&DMatrix<f64>>| {
        let lvl = assemble_task_level(&t, &model, &s, Formulation::Vel, mode, r).unwrap();
        let reg = assemble_task_level(&reg, &model, &s, Formulation::Vel, Mode::Gn, None).unwrap();
        Hierarchy::from_levels(4, vec![eom.clone(), lvl, reg]).unwrap()
    };
    let gn = solve(&build(Mode::Gn, None), &SolverOptions::default()).unwrap();
    let nt = solve(&build(Mode::Newton, Some(&r)), &SolverOptions::default()).unwrap();
    assert!((gn.x - nt.x).amax() < 1e-6);
}

#[test]
fn rescaled_multipliers_scale_the_hessian() {
    let c = PlanarChain::<f64>::uniform(2).unwrap();
    let q = DVector::from_column_slice(&[0.3, 1.2]);
    let curv = vec![c.task_hessian(&q).unwrap().slices.into_iter().map(|h| Curvature::Hessian(-h)).collect::<Vec<_>>()];
    let lam = DVector::from_column_slice(&[2.0, -0.7]);
    let w = -&lam;
    let (_, scaled) = rescale_to_optim(&w, &lam, 0.005);
    let raw = hierarchical_hessian(2, &[lam], &curv).unwrap();
    let opt = hierarchical_hessian(2, &[scaled], &curv).unwrap();
    assert!((raw * 0.005 - opt).amax() < 1e-15);
}

#[test]
fn example3_hierarchical_hessian_matches_fd() {
    let sc = example3::<f64>(Method::NewtonAh, Formulation::Vel);
    for cycles in [3, 150, 600] {
        let rel = hessian_snapshot_error(&sc, cycles).unwrap();
        assert!(rel < 1e-4, "cycle {cycles}: {rel}");
    }
}

#[test]
fn newton_mode_engages_only_where_requested() {
    let l3 = run_scenario_with(&example3::<f64>(Method::NewtonAh, Formulation::Vel), RunOptions { timing: false }, |_, _| {}).unwrap();
    assert!(l3.rows.iter().take(2).all(|r| r.mode.iter().all(|&m| m == Mode::Gn)));
    assert!(l3.rows.iter().any(|r| r.mode[2] == Mode::Newton));
    let l2 = run_scenario(&example2::<f64>(Formulation::Vel)).unwrap();
    assert!(l2.rows.iter().all(|r| r.mode.iter().all(|&m| m == Mode::Gn)));
}

#[test]
fn p_controller_converges_exponentially() {
    // one link, target a small rotation ahead on its circle
    let model = chain(1);
    let q0 = -1.0f64;
    let target = [-(q0 + 0.01).sin(), (q0 + 0.01).cos()];
    let kp = 1.0;
    let sc = Scenario {
        model,
        tasks: vec![
            TaskSpec::new(0, TaskKind::Eom),
            TaskSpec::new(1, TaskKind::TipPosition { target: target.to_vec(), kp, kv: 0.0, controller: ControllerKind::P }),
            TaskSpec::new(2, TaskKind::TorqueReg { joints: vec![] }),
        ],
        dt: 0.005,
        duration: 3.0,
        formulation: Formulation::Vel,
        method: Method::Gn,
        q0: DVector::from_element(1, q0),
        qd0: DVector::zeros(1),
        solver: SolverOptions::default(),
        control: ControlOptions::default(),
    };
    let log = run_scenario(&sc).unwrap();
    let err = |q: f64| ((-q.sin() - target[0]).powi(2) + (q.cos() - target[1]).powi(2)).sqrt();
    let e0 = err(q0);
    for r in log.rows.iter().skip(1) {
        let ratio = err(r.q[0]) / (e0 * (-kp * r.t).exp());
        assert!((ratio - 1.0).abs() < 0.05, "t {} ratio {ratio}", r.t);
    }
}
