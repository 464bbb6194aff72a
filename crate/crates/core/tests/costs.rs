use narrow_gauge::costs::{
    calibrate, fixed_wo_w1, single_weight, solve_2x2, Analytical, AnalyticalThresholds,
    DvalApproach, DvalTables, DvalWeights, ExtendedTree, PathStep, PseudoCostTable, ReferenceSet,
    LARGE,
};
use narrow_gauge::lp::Direction::{Down, Up};
use narrow_gauge::model::{BoundChange, Fractional};
use narrow_gauge::CostError;
use proptest::prelude::*;

#[test]
fn pseudo_costs_average_feasible_solves() {
    let mut t = PseudoCostTable::new();
    t.update(3, Up, 2.0, true);
    t.update(3, Up, 4.0, true);
    t.update(3, Up, 100.0, false);
    assert_eq!(t.cost(3, Up), 3.0);
    assert_eq!(t.eval(3, Up, 0.5), 1.5);
    assert_eq!(t.count(3, Up), 2);
    assert_eq!(t.eval(3, Down, 0.5), 0.0);
    assert_eq!(t.eval(9, Up, 0.5), 0.0);
    let f = Fractional {
        var: 3,
        value: 1.5,
        f_plus: 0.5,
        f_minus: 0.5,
    };
    assert_eq!(t.estimate(&f, 1), None);
    t.update(3, Down, 1.0, true);
    assert_eq!(t.estimate(&f, 1), Some((1.5, 0.5)));
    assert_eq!(t.estimate(&f, 2), None);
}

fn br(j: usize) -> (usize, narrow_gauge::Direction, f64) {
    (j, Up, 1.0)
}

#[test]
fn sibling_tentative_branch_is_three_edges_away() {
    let mut t = ExtendedTree::new(1);
    let p = t.add_basic(t.root(), br(0), None).unwrap();
    let u = t.add_tentative(p, br(5), Some(2.0)).unwrap();
    let k = t.add_basic(p, br(7), None).unwrap();
    let m = t.symdif_metrics(u, k).unwrap();
    assert_eq!((m.intersect, m.symdif), (1, 3));
    // a child of the node itself shares its whole path
    let w = t.add_tentative(k, br(5), Some(1.0)).unwrap();
    let m = t.symdif_metrics(w, k).unwrap();
    assert_eq!((m.intersect, m.symdif), (2, 2));
}

#[test]
fn disjoint_subtrees_share_nothing() {
    let mut t = ExtendedTree::new(1);
    let a = t.add_basic(t.root(), (0, Up, 1.0), None).unwrap();
    let b = t.add_basic(t.root(), (0, Down, 0.0), None).unwrap();
    let u = t.add_tentative(a, br(2), Some(1.0)).unwrap();
    let m = t.symdif_metrics(u, b).unwrap();
    assert_eq!((m.intersect, m.symdif), (0, 4));
}

#[test]
fn compulsory_branches_count_as_edges() {
    let mut t = ExtendedTree::new(1);
    let p = t.add_basic(t.root(), br(0), None).unwrap();
    t.add_compulsory(p, 4, Down).unwrap();
    t.add_compulsory(t.root(), 6, Up).unwrap();
    let u = t.add_tentative(p, br(5), Some(2.0)).unwrap();
    let k = t.add_basic(p, br(7), None).unwrap();
    t.add_compulsory(k, 8, Up).unwrap();
    let m = t.symdif_metrics(u, k).unwrap();
    assert_eq!((m.intersect, m.symdif), (3, 4));
}

#[test]
fn handles_from_another_session_are_rejected() {
    let t = ExtendedTree::new(1);
    let other = ExtendedTree::new(2);
    assert!(matches!(
        t.symdif_metrics(other.root(), t.root()),
        Err(CostError::ForeignNode { .. })
    ));
    assert!(matches!(
        t.symdif_metrics(t.handle(9), t.root()),
        Err(CostError::UnknownNode(9))
    ));
}

/// A dive of `depth` basic branches with a tentative evaluation of var 50
/// at every level.
fn dive(
    depth: usize,
) -> (
    ExtendedTree,
    Vec<narrow_gauge::costs::ExtNodeId>,
    Vec<narrow_gauge::costs::ExtNodeId>,
) {
    let mut t = ExtendedTree::new(7);
    let mut basics = vec![t.root()];
    let mut tent = Vec::new();
    for d in 0..depth {
        let at = *basics.last().unwrap();
        tent.push(t.add_tentative(at, br(50), Some(1.0 + d as f64)).unwrap());
        basics.push(t.add_basic(at, br(d), None).unwrap());
    }
    (t, basics, tent)
}

#[test]
fn analytical_lookup_rules() {
    let loose = AnalyticalThresholds {
        min_intersect: 0,
        late_fraction: 10.0,
        ..Default::default()
    };
    let (mut t, basics, tent) = dive(6);
    // the freshest evaluation dominates the older ones
    match t.analytical_uc(basics[6], 50, Up, &loose).unwrap() {
        Analytical::Estimate { from, metrics, uc } => {
            assert_eq!(from, tent[5].index);
            assert_eq!((metrics.intersect, metrics.symdif), (5, 3));
            assert_eq!(uc, 6.0);
        }
        other => panic!("{other:?}"),
    }
    // no record for this direction
    assert_eq!(
        t.analytical_uc(basics[6], 50, Down, &loose).unwrap(),
        Analytical::SolveInstead
    );
    // SymDif above the cap
    let tight = AnalyticalThresholds {
        max_symdif: 2,
        ..loose
    };
    assert_eq!(
        t.analytical_uc(basics[6], 50, Up, &tight).unwrap(),
        Analytical::SolveInstead
    );
    // near the bottom of the tree
    let late = AnalyticalThresholds {
        late_fraction: 0.5,
        ..loose
    };
    assert_eq!(
        t.analytical_uc(basics[5], 50, Up, &late).unwrap(),
        Analytical::SolveInstead
    );
    let fast = AnalyticalThresholds {
        fast_path: true,
        ..loose
    };
    assert!(matches!(
        t.analytical_uc(basics[6], 50, Up, &fast).unwrap(),
        Analytical::Estimate { from, .. } if from == tent[5].index
    ));
    assert_eq!(t.min_symdif(), Some(3));
    let replay = t.replay().unwrap();
    for (q, r) in t.queries.iter().zip(&replay) {
        assert_eq!(&q.candidates, r);
    }
}

#[test]
fn dominated_candidates_are_never_chosen() {
    let loose = AnalyticalThresholds {
        min_intersect: 0,
        min_ratio: 0.0,
        late_fraction: 10.0,
        ..Default::default()
    };
    let mut t = ExtendedTree::new(3);
    let a = t.add_basic(t.root(), br(0), None).unwrap();
    let b = t.add_basic(a, br(1), None).unwrap();
    let far = t.add_tentative(t.root(), br(9), Some(10.0)).unwrap();
    let near = t.add_tentative(a, br(9), Some(20.0)).unwrap();
    let m_far = t.symdif_metrics(far, b).unwrap();
    let m_near = t.symdif_metrics(near, b).unwrap();
    assert!(m_near.intersect > m_far.intersect && m_near.symdif < m_far.symdif);
    assert!(matches!(
        t.analytical_uc(b, 9, Up, &loose).unwrap(),
        Analytical::Estimate { uc, .. } if uc == 20.0
    ));
}

#[test]
fn fresher_records_improve_the_metrics_along_a_dive() {
    let (t, basics, tent) = dive(8);
    let v = basics[8];
    let metrics: Vec<_> = tent
        .iter()
        .map(|&u| t.symdif_metrics(u, v).unwrap())
        .collect();
    for w in metrics.windows(2) {
        assert!(w[1].intersect >= w[0].intersect);
        assert!(w[1].symdif <= w[0].symdif);
    }
    assert_eq!(metrics.last().unwrap().symdif, 3);
}

#[test]
fn dval_worked_values() {
    assert_eq!(single_weight(10.0, 6.0, 2.0), 2.0);
    assert_eq!(fixed_wo_w1(10.0, 8.0, 4.0), 0.5);
    assert_eq!(fixed_wo_w1(10.0, 10.0, 4.0), 0.0);
    assert_eq!(solve_2x2(2.0, 4.0, 6.0, 3.0, 0.0, 3.0), Some((1.0, 1.0)));
    assert_eq!(solve_2x2(1.0, 2.0, 3.0, 2.0, 4.0, 6.0), None);
    let t = DvalTables::new(DvalApproach::FixedWo);
    assert_eq!(t.weights(4), DvalWeights::DEFAULT);
    assert_eq!(t.dval(4, 3.0, 2.0), 5.0);
}

#[test]
fn shallow_incumbents_fall_back_to_unit_weights() {
    let path = [
        PathStep {
            depth: 0,
            node_obj: 0.0,
            child_obj: 2.0,
            min_cost: 1.0,
        },
        PathStep {
            depth: 1,
            node_obj: 2.0,
            child_obj: 5.0,
            min_cost: 0.0,
        },
    ];
    assert!(calibrate(&path, 5.0, DvalApproach::FixedWo).is_empty());
    let mut t = DvalTables::new(DvalApproach::Paired);
    t.record(&path, 5.0);
    assert_eq!(t.weights(1), DvalWeights::DEFAULT);
}

#[test]
fn tables_extend_and_average() {
    let path = [
        PathStep {
            depth: 0,
            node_obj: 0.0,
            child_obj: 1.0,
            min_cost: 3.0,
        },
        PathStep {
            depth: 1,
            node_obj: 1.0,
            child_obj: 2.0,
            min_cost: 4.0,
        },
        PathStep {
            depth: 2,
            node_obj: 2.0,
            child_obj: 4.0,
            min_cost: 2.0,
        },
        PathStep {
            depth: 3,
            node_obj: 4.0,
            child_obj: 6.0,
            min_cost: 0.0,
        },
    ];
    let mut t = DvalTables::new(DvalApproach::FixedWo);
    let w = t.record(&path, 6.0);
    assert_eq!(w.keys().copied().collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(w[&1].w1, 1.0);
    assert_eq!(w[&2].w1, 1.0);
    assert_eq!(t.weights(9), w[&2]);
    assert_eq!(t.weights(0), w[&1]);
    t.record(&path[..2], 2.0);
    assert_eq!(t.weights(2), DvalWeights { wo: 1.0, w1: 1.0 });
    let shifted: Vec<PathStep> = path
        .iter()
        .map(|s| PathStep {
            min_cost: s.min_cost * 2.0,
            ..*s
        })
        .collect();
    t.record(&shifted, 6.0);
    assert!((t.weights(1).w1 - (1.0 + 1.0 + 0.5) / 3.0).abs() < 1e-12);
}

fn path_strategy() -> impl Strategy<Value = (Vec<PathStep>, f64)> {
    (3usize..9)
        .prop_flat_map(|len| {
            (
                prop::collection::vec(0.0f64..5.0, len),
                prop::collection::vec(0.01f64..6.0, len - 1),
            )
        })
        .prop_map(|(incs, costs)| {
            let mut obj = 0.0;
            let mut steps = Vec::new();
            for (d, inc) in incs.iter().enumerate() {
                let min_cost = costs.get(d).copied().unwrap_or(0.0);
                steps.push(PathStep {
                    depth: d,
                    node_obj: obj,
                    child_obj: obj + inc,
                    min_cost,
                });
                obj += inc;
            }
            (steps, obj)
        })
}

proptest! {
    #[test]
    fn calibration_reproduces_the_gap((path, x_star) in path_strategy()) {
        for approach in [DvalApproach::FixedWo, DvalApproach::Paired] {
            let w = calibrate(&path, x_star, approach);
            prop_assert_eq!(w.len(), path.len() - 2);
            for (&d, wt) in &w {
                let s = path[d];
                let got = wt.apply(s.delta(), s.min_cost);
                prop_assert!((got - (x_star - s.node_obj)).abs() <= 1e-9 * (1.0 + x_star.abs()));
                if approach == DvalApproach::Paired {
                    let t = path[d + 1];
                    let next = wt.apply(t.delta(), t.min_cost);
                    let tol = 1e-9 * (1.0 + x_star.abs()) * (1.0 + wt.wo.abs() + wt.w1.abs());
                    let singular = solve_2x2(s.delta(), s.min_cost, 0.0, t.delta(), t.min_cost, 0.0).is_none();
                    prop_assert!(singular || (next - (x_star - t.node_obj)).abs() <= tol);
                }
            }
        }
        let a = calibrate(&path, x_star, DvalApproach::FixedWo);
        let b = calibrate(&path, x_star, DvalApproach::Paired);
        let last = path.len() - 2;
        prop_assert!((a[&last].w1 - b[&last].w1).abs() <= 1e-9 * (1.0 + a[&last].w1.abs()));
        prop_assert!((b[&last].wo - 1.0).abs() <= 1e-9);
    }
}

fn step(var: usize, dir: narrow_gauge::Direction, compulsory: bool) -> BoundChange {
    let mut b = BoundChange::branch(var, dir, 0.5);
    b.compulsory = compulsory;
    b
}

#[test]
fn reference_set_worked_example() {
    let mut r = ReferenceSet::new(vec![0.0, 1.0, 3.0, 2.0], 0.0);
    let x = [0.0, 3.0, 2.0, 5.0];
    let path = [
        step(1, Up, false),
        step(2, Down, false),
        step(3, Up, true),
        step(0, Up, false),
    ];
    assert!(r.add(&x, 4.0, &path));
    assert!(!r.add(&x, 4.0, &path));
    let s = &r.solutions[0];
    assert_eq!(s.necessary.iter().copied().collect::<Vec<_>>(), vec![1, 2]);
    assert_eq!(s.avg_cng, 2.0);
    assert_eq!(r.guc(1, Up), 1.0);
    assert_eq!(r.guc(2, Down), 2.0);
    assert_eq!(r.guc(1, Down), LARGE);
    assert_eq!(r.guc(2, Up), LARGE);
    assert_eq!(r.guc(3, Up), LARGE);
    assert_eq!(s.delta_of(3), 0.0);
    assert_eq!(r.gc(1, Up), 1.0);
    assert_eq!(r.gc(2, Up), LARGE);
}

#[test]
fn global_cost_shrinks_with_support() {
    let mut r = ReferenceSet::new(vec![0.0; 2], 0.0);
    r.p = 0.5;
    for k in 0..4 {
        let x = [2.0, k as f64];
        r.add(&x, 8.0 + k as f64, &[step(0, Up, false)]);
    }
    assert_eq!(r.count(0, Up), 4);
    // AvgCng is the whole change over one necessary variable: 8 / 2 = 4 at best
    assert_eq!(r.guc(0, Up), 4.0);
    assert_eq!(r.gc(0, Up), 2.0);
}

#[test]
fn branching_distance_gate() {
    let mut r = ReferenceSet::new(vec![0.0; 2], 0.0);
    r.add(&[1.0, 0.0], 1.0, &[step(0, Up, false)]);
    r.add(&[3.0, 0.0], 2.0, &[step(0, Up, false)]);
    let st = r.bd_stats(0, Up).unwrap();
    assert_eq!((st.min, st.max, st.mean), (1.0, 3.0, 2.0));
    r.theta = 0.5;
    assert!(r.gate(0, Up, 2.0, false));
    assert!(!r.gate(0, Up, 4.0, false));
    assert!(r.gate(0, Up, 4.0, true));
    assert!(r.gate(0, Down, -7.0, false));
    assert!(r.gate(1, Up, 9.0, false));
}

#[test]
fn alternate_normalization_drops_the_count() {
    let mut r = ReferenceSet::new(vec![0.0; 3], 0.0);
    r.alt_normalization = true;
    r.add(
        &[1.0, 2.0, 0.0],
        6.0,
        &[step(0, Up, false), step(1, Up, false)],
    );
    assert_eq!(r.solutions[0].avg_cng, 6.0);
    assert_eq!(r.guc(1, Up), 3.0);
    assert_eq!(r.solutions[0].total_bd(), 3.0);
}

proptest! {
    #[test]
    fn global_costs_stay_ordered(
        sols in prop::collection::vec((prop::collection::vec(-3i32..4, 4), 0.5f64..20.0), 1..8),
        p in 0.0f64..2.0,
    ) {
        let mut r = ReferenceSet::new(vec![0.5, 0.0, 1.0, -1.0], 0.0);
        r.p = p;
        let path: Vec<BoundChange> = (0..4).map(|j| step(j, Up, false)).collect();
        for (x, obj) in &sols {
            let x: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            r.add(&x, *obj, &path);
        }
        for j in 0..4 {
            for dir in [Up, Down] {
                let (guc, gc) = (r.guc(j, dir), r.gc(j, dir));
                if r.count(j, dir) >= 1 {
                    prop_assert!(gc <= guc + 1e-12);
                    prop_assert!(guc < LARGE);
                } else {
                    prop_assert_eq!(guc, LARGE);
                }
            }
        }
    }
}
