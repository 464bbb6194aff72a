#![allow(dead_code)]

use narrow_gauge::lp::LpModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = a[i][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[i][k] -= f * a[c][k];
                    }
                    b[i] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(total: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        start: usize,
        total: usize,
        k: usize,
        cur: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..total {
            if total - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, total, k, cur, f);
            cur.pop();
        }
    }
    rec(0, total, k, &mut Vec::new(), f);
}

/// Minimum of the objective over all vertices of a bounded polytope, or
/// `None` when no vertex is feasible. All bounds must be finite.
pub fn vertex_oracle(model: &LpModel) -> Option<f64> {
    let n = model.num_cols();
    let mut cons: Vec<(Vec<f64>, f64)> = model
        .rows()
        .iter()
        .cloned()
        .zip(model.rhs().iter().copied())
        .collect();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        cons.push((e.clone(), model.lower()[k]));
        e[k] = -1.0;
        cons.push((e, -model.upper()[k]));
    }
    let mut best: Option<f64> = None;
    combinations(cons.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| cons[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| cons[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let ok = cons.iter().all(|(row, rhs)| {
                let act: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
                act >= rhs - 1e-7 * (1.0 + rhs.abs())
            });
            if ok {
                let v = model.evaluate(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    });
    best
}

/// Brute-force MIP optimum over the integer lattice of the first `int_cols`
/// columns (all integer in practice for the corpus). Continuous columns are
/// not supported here.
pub fn integer_oracle(model: &LpModel) -> Option<(f64, Vec<f64>)> {
    let n = model.num_cols();
    let lo: Vec<i64> = model.lower().iter().map(|v| v.ceil() as i64).collect();
    let hi: Vec<i64> = model.upper().iter().map(|v| v.floor() as i64).collect();
    let mut x: Vec<i64> = lo.clone();
    let mut best: Option<(f64, Vec<f64>)> = None;
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return None;
    }
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let feasible =
            (0..model.num_rows()).all(|i| model.activity(i, &xf) >= model.rhs()[i] - 1e-9);
        if feasible {
            let v = model.evaluate(&xf);
            if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12) {
                best = Some((v, xf));
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            if x[k] < hi[k] {
                x[k] += 1;
                break;
            }
            x[k] = lo[k];
            k += 1;
        }
    }
}

/// Random boxed LP with integer-valued data.
pub fn random_boxed_lp(rng: &mut impl Rng, n: usize, m: usize) -> LpModel {
    let objective = (0..n).map(|_| rng.gen_range(-5..=9) as f64).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-4..=6) as f64).collect();
        let pos: f64 = row.iter().filter(|v| **v > 0.0).sum();
        rhs.push(rng.gen_range(0.0..(pos * 2.5 + 1.0)).round() - 1.0 + rng.gen_range(0.0..1.0));
        rows.push(row);
    }
    let lower = (0..n).map(|_| rng.gen_range(-2..=0) as f64).collect();
    let upper = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
    LpModel::new(objective, rows, rhs, lower, upper).unwrap()
}

/// The bundled instances with their enumerated optima (`None` when
/// infeasible), sorted by name.
pub fn corpus() -> Vec<(String, narrow_gauge::MipProblem, Option<f64>)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let text = std::fs::read_to_string(dir.join("optima.json")).expect("optima.json");
    let optima: serde_json::Value = serde_json::from_str(&text).expect("valid json");
    let mut out = Vec::new();
    for (name, v) in optima.as_object().expect("object") {
        let mps = std::fs::read_to_string(dir.join(format!("{name}.mps"))).expect("instance file");
        let p = narrow_gauge::parse_mps(&mps).expect("corpus parses");
        out.push((name.clone(), p, v["objective"].as_f64()));
    }
    out
}

/// Bounds of the region a traced node covers: the problem's box with every
/// branch and implied restriction on the way down applied.
pub fn region(
    problem: &narrow_gauge::MipProblem,
    nodes: &[narrow_gauge::trace::NodeRecord],
    id: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = problem.lp.lower().to_vec();
    let mut hi = problem.lp.upper().to_vec();
    let mut cur = Some(id);
    while let Some(c) = cur {
        let n = &nodes[c];
        for b in n.branch.iter().chain(&n.implied) {
            assert!(!b.straddle, "region of a straddle branch is not a box");
            match b.dir {
                narrow_gauge::Direction::Up => lo[b.var] = lo[b.var].max(b.bound),
                narrow_gauge::Direction::Down => hi[b.var] = hi[b.var].min(b.bound),
            }
        }
        cur = n.parent;
    }
    (lo, hi)
}
