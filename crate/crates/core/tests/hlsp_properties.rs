use lexdyn::hlsp::random::{random_hierarchy, seeded, RandomShape};
use lexdyn::hlsp::{
    brute_force_oracle, check_kkt, solve, solve_equality, Hierarchy, HlspError, HlspSolver, PriorityLevel, Relation,
    SolverOptions,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts() -> SolverOptions<f64> {
    SolverOptions::default()
}

fn norms_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn identity_level() {
    let h = Hierarchy::from_levels(
        2,
        vec![PriorityLevel::equality(DMatrix::identity(2, 2), DVector::from_column_slice(&[-1.0, -2.0])).unwrap()],
    )
    .unwrap();
    let s = solve(&h, &opts()).unwrap();
    assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 2.0).abs() < 1e-12);
    assert!(s.slacks[0].amax() < 1e-12 && s.multipliers[0][0].amax() < 1e-12);
}

#[test]
fn higher_level_wins_conflict() {
    let l1 = PriorityLevel::equality(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::from_element(1, -1.0)).unwrap();
    let l2 = PriorityLevel::equality(DMatrix::identity(2, 2), DVector::from_column_slice(&[0.0, -2.0])).unwrap();
    let h = Hierarchy::from_levels(2, vec![l1, l2]).unwrap();
    let s = solve(&h, &opts()).unwrap();
    assert!((&s.x - DVector::from_column_slice(&[1.0, 2.0])).amax() < 1e-12);
    assert!(s.slacks[0].amax() < 1e-12);
    assert!((&s.slacks[1] - DVector::from_column_slice(&[1.0, 0.0])).amax() < 1e-12);
    assert!(check_kkt(&h, &s).passes(1e-9));
}

#[test]
fn upper_row_over_objective_is_active() {
    // x ≤ −1 above x = 0
    let l1 = PriorityLevel::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0), vec![Relation::Upper]).unwrap();
    let l2 = PriorityLevel::equality(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1)).unwrap();
    let h = Hierarchy::from_levels(1, vec![l1, l2]).unwrap();
    for s in [solve(&h, &opts()).unwrap(), brute_force_oracle(&h, &opts()).unwrap()] {
        assert!((s.x[0] + 1.0).abs() < 1e-12);
        assert!(s.active[0][0]);
        assert!((s.slacks[1][0] + 1.0).abs() < 1e-12);
    }
}

#[test]
fn level_fixing_everything_leaves_residual_to_multiplier() {
    let l1 = PriorityLevel::equality(DMatrix::identity(2, 2), DVector::from_column_slice(&[-1.0, 1.0])).unwrap();
    let l2 = PriorityLevel::equality(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 3.0)).unwrap();
    let h = Hierarchy::from_levels(2, vec![l1, l2]).unwrap();
    let e = solve_equality(&h, &[vec![false; 2], vec![false; 1]], &opts()).unwrap();
    // w₂ = A₂x + b₂ = 1 − 1 + 3
    assert!((e.slacks[1][0] - 3.0).abs() < 1e-12);
    assert!((e.multipliers[1][1][0] + 3.0).abs() < 1e-12);
}

#[test]
fn oracle_refuses_large_enumerations() {
    let a = DMatrix::from_element(13, 1, 1.0);
    let lvl = PriorityLevel::new(a, DVector::zeros(13), vec![Relation::Upper; 13]).unwrap();
    let h = Hierarchy::from_levels(1, vec![lvl]).unwrap();
    assert!(matches!(brute_force_oracle(&h, &opts()), Err(HlspError::TooLarge { .. })));
}

#[test]
fn rejects_mismatched_levels() {
    let mut h = Hierarchy::<f64>::new(3);
    let lvl = PriorityLevel::equality(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
    assert!(matches!(h.push(lvl), Err(HlspError::DimensionMismatch(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_oracle(seed in 0u64..1_000_000) {
        let h = seeded::<f64>(seed);
        let s = solve(&h, &opts()).unwrap();
        let o = brute_force_oracle(&h, &opts()).unwrap();
        prop_assert!(norms_gap(&s.slack_norms(), &o.slack_norms()) < 1e-6);
        let k = check_kkt(&h, &s);
        prop_assert!(k.passes(1e-9), "{:?}", k);
    }

    #[test]
    fn multiplier_is_negated_slack(seed in 0u64..1_000_000) {
        let h = seeded::<f64>(seed);
        let s = solve(&h, &opts()).unwrap();
        for l in 0..h.len() {
            prop_assert!((&s.multipliers[l][l] + &s.slacks[l]).amax() < 1e-9);
        }
    }

    #[test]
    fn appending_a_level_keeps_upper_optima(seed in 0u64..1_000_000, extra in 0u64..1_000_000) {
        let h = seeded::<f64>(seed);
        let before = solve(&h, &opts()).unwrap().slack_norms();
        let mut rng = ChaCha8Rng::seed_from_u64(extra);
        let shape = RandomShape { max_n: h.n(), max_levels: 1, max_rows: 3, max_inequalities: 0 };
        // draw until the column count fits
        let tail = loop {
            let t = random_hierarchy::<f64, _>(&mut rng, &shape);
            if t.n() == h.n() { break t; }
        };
        let mut longer = h.clone();
        longer.push(tail.levels()[0].clone()).unwrap();
        let after = solve(&longer, &opts()).unwrap().slack_norms();
        prop_assert!(norms_gap(&before, &after[..before.len()]) < 1e-9);
    }

    #[test]
    fn scaling_a_level_scales_its_slack(seed in 0u64..1_000_000, c in 0.25f64..4.0, pick in 0usize..4) {
        let h = seeded::<f64>(seed);
        let k = pick % h.len();
        let s = solve(&h, &opts()).unwrap();
        let mut scaled = h.clone();
        scaled.levels_mut()[k] = h.levels()[k].scaled(c);
        let t = solve(&scaled, &opts()).unwrap();
        prop_assert!((&s.slacks[k] * c - &t.slacks[k]).amax() < 1e-8);
        if s.active == t.active && s.free_dims == 0 {
            prop_assert!((&s.x - &t.x).amax() < 1e-8);
        }
    }

    #[test]
    fn deterministic(seed in 0u64..1_000_000) {
        let h = seeded::<f64>(seed);
        prop_assert_eq!(solve(&h, &opts()).unwrap(), solve(&h, &opts()).unwrap());
    }

    #[test]
    fn warm_start_is_as_good_as_cold(seed in 0u64..1_000_000) {
        let h = seeded::<f64>(seed);
        let mut solver = HlspSolver::new(opts());
        let first = solver.solve(&h).unwrap();
        let again = solver.solve(&h).unwrap();
        prop_assert!(norms_gap(&first.slack_norms(), &again.slack_norms()) < 1e-9);
        prop_assert!(check_kkt(&h, &again).passes(1e-9));
    }
}
