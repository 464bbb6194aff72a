mod common;

use narrow_gauge::lp::{
    apply_branch, apply_reversal_update, branch_model, fractional_parts, probe_single_pivot, solve,
    Direction, LpModel, LpStatus, PivotBudget,
};
use rand::Rng;

#[test]
fn optimal_solves_match_vertex_enumeration() {
    let mut rng = common::rng(11);
    let mut optimal = 0;
    let mut infeasible = 0;
    for _ in 0..300 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let model = common::random_boxed_lp(&mut rng, n, m);
        let sol = solve(&model, None, &PivotBudget::default()).unwrap();
        let oracle = common::vertex_oracle(&model);
        match sol.status {
            LpStatus::Optimal => {
                optimal += 1;
                let want = oracle.expect("solver optimal but oracle infeasible");
                assert!(
                    (sol.objective - want).abs() < 1e-6,
                    "{} vs {}",
                    sol.objective,
                    want
                );
                for i in 0..model.num_rows() {
                    assert!(model.activity(i, &sol.x) >= model.rhs()[i] - 1e-7);
                }
                for k in 0..n {
                    assert!(sol.x[k] >= model.lower()[k] - 1e-7);
                    assert!(sol.x[k] <= model.upper()[k] + 1e-7);
                    assert!(sol.reduced_costs[k] >= -1e-9);
                }
            }
            LpStatus::Infeasible => {
                infeasible += 1;
                assert!(oracle.is_none(), "solver infeasible, oracle {:?}", oracle);
            }
            other => panic!("unexpected status {other:?}"),
        }
    }
    assert!(
        optimal > 50 && infeasible > 5,
        "{optimal} optimal, {infeasible} infeasible"
    );
}

#[test]
fn eight_by_eight_matches_vertex_enumeration() {
    let mut rng = common::rng(12);
    let mut checked = 0;
    while checked < 3 {
        let model = common::random_boxed_lp(&mut rng, 8, 8);
        let sol = solve(&model, None, &PivotBudget::default()).unwrap();
        if sol.status == LpStatus::Optimal {
            let want = common::vertex_oracle(&model).unwrap();
            assert!((sol.objective - want).abs() < 1e-6);
            checked += 1;
        }
    }
}

fn fractional_basics(sol: &narrow_gauge::lp::LpSolution) -> Vec<usize> {
    (0..sol.x.len())
        .filter(|&j| sol.is_basic(j) && fractional_parts(sol.x[j]).is_some())
        .collect()
}

#[test]
fn probe_equals_one_executed_pivot() {
    let mut rng = common::rng(13);
    let mut cases = 0;
    while cases < 100 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let model = common::random_boxed_lp(&mut rng, n, m);
        let sol = solve(&model, None, &PivotBudget::default()).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        for j in fractional_basics(&sol) {
            for dir in [Direction::Up, Direction::Down] {
                let probe = probe_single_pivot(&sol, j, dir).unwrap();
                let child = apply_branch(&sol, j, dir)
                    .unwrap()
                    .solve(&PivotBudget::default().with_max_pivots(1))
                    .unwrap();
                if probe.is_infinite() {
                    assert_eq!(child.status, LpStatus::Infeasible);
                    assert_eq!(child.pivots, 0);
                } else {
                    assert!(child.pivots >= 1);
                    let delta = child.dual_bound() - sol.objective;
                    assert!(
                        (delta - probe).abs() < 1e-9,
                        "probe {probe} vs pivot {delta}"
                    );
                }
                cases += 1;
            }
        }
    }
}

#[test]
fn warm_child_matches_cold_child() {
    let mut rng = common::rng(14);
    let mut cases = 0;
    while cases < 150 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let model = common::random_boxed_lp(&mut rng, n, m);
        let sol = solve(&model, None, &PivotBudget::default()).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        for j in 0..n {
            if fractional_parts(sol.x[j]).is_none() {
                continue;
            }
            for dir in [Direction::Up, Direction::Down] {
                let warm = apply_branch(&sol, j, dir)
                    .unwrap()
                    .solve(&PivotBudget::default())
                    .unwrap();
                let cold = solve(
                    &branch_model(&sol, j, dir).unwrap(),
                    None,
                    &PivotBudget::default(),
                )
                .unwrap();
                assert_eq!(warm.status, cold.status);
                if warm.is_optimal() {
                    assert!((warm.objective - cold.objective).abs() < 1e-6);
                    assert!(warm.objective >= sol.objective - 1e-9);
                }
                cases += 1;
            }
        }
    }
}

#[test]
fn reversal_matches_cold_solve_and_bounds_improvement() {
    let mut rng = common::rng(15);
    let mut cases = 0;
    while cases < 60 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let model = common::random_boxed_lp(&mut rng, n, m);
        let root = solve(&model, None, &PivotBudget::default()).unwrap();
        if !root.is_optimal() {
            continue;
        }
        for j in 0..n {
            if fractional_parts(root.x[j]).is_none() {
                continue;
            }
            for dir in [Direction::Up, Direction::Down] {
                let child = apply_branch(&root, j, dir)
                    .unwrap()
                    .solve(&PivotBudget::default())
                    .unwrap();
                if !child.is_optimal() || child.is_basic(j) {
                    continue;
                }
                let antecedent = match dir {
                    Direction::Up => model.lower()[j],
                    Direction::Down => model.upper()[j],
                };
                let reversed = apply_reversal_update(&child, j, antecedent).unwrap();
                let rm = reversed.model().clone();
                match dir {
                    Direction::Up => assert_eq!(rm.upper()[j], root.x[j].ceil() - 1.0),
                    Direction::Down => assert_eq!(rm.lower()[j], root.x[j].floor() + 1.0),
                }
                let warm = reversed.solve(&PivotBudget::default()).unwrap();
                let cold = solve(&rm, None, &PivotBudget::default()).unwrap();
                let opposite = solve(
                    &branch_model(&root, j, dir.opposite()).unwrap(),
                    None,
                    &PivotBudget::default(),
                )
                .unwrap();
                assert_eq!(warm.status, cold.status);
                assert_eq!(rm, branch_model(&root, j, dir.opposite()).unwrap());
                if warm.is_optimal() {
                    assert!((warm.objective - cold.objective).abs() < 1e-6);
                    assert!((warm.objective - opposite.objective).abs() < 1e-6);
                    let improvement = child.objective - warm.objective;
                    assert!(improvement <= child.reduced_costs[j] + 1e-7);
                }
                cases += 1;
            }
        }
    }
}

#[test]
fn raising_cutoff_keeps_optimal() {
    let mut rng = common::rng(16);
    for _ in 0..100 {
        let model = common::random_boxed_lp(&mut rng, 4, 4);
        let free = solve(&model, None, &PivotBudget::default()).unwrap();
        if !free.is_optimal() {
            continue;
        }
        let c1 = free.objective + rng.gen_range(0.01..3.0);
        let a = solve(&model, None, &PivotBudget::default().with_cutoff(Some(c1))).unwrap();
        assert_eq!(a.status, LpStatus::Optimal);
        let b = solve(
            &model,
            None,
            &PivotBudget::default().with_cutoff(Some(c1 + 5.0)),
        )
        .unwrap();
        assert_eq!(b.status, LpStatus::Optimal);
        let low = solve(
            &model,
            None,
            &PivotBudget::default().with_cutoff(Some(free.objective - 0.5)),
        )
        .unwrap();
        assert_eq!(low.status, LpStatus::CutoffInfeasible);
    }
}

#[test]
fn warm_basis_from_parent_is_reused() {
    let model = LpModel::new(
        vec![2.0, 3.0, 1.0],
        vec![vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 0.0]],
        vec![2.5, 1.5],
        vec![0.0; 3],
        vec![4.0; 3],
    )
    .unwrap();
    let sol = solve(&model, None, &PivotBudget::default()).unwrap();
    let again = solve(&model, Some(&sol.basis), &PivotBudget::default()).unwrap();
    assert_eq!(again.pivots, 0);
    assert!((again.objective - sol.objective).abs() < 1e-12);
}
