//! Strategy comparison over a directory of MPS files.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::costs::DvalApproach;
use crate::criteria::{CriterionId, CriterionSpec};
use crate::driver::{solve_mip, NodeSelect, PseudoMode, SolveConfig};
use crate::error::SolveError;
use crate::lookahead::{AcceptMode, AttractMode, LookaheadConfig, PostWinnow};
use crate::mps::parse_mps;
use crate::trace::FinalStatus;

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn named(name: &str, cfg: SolveConfig) -> SolveConfig {
    SolveConfig {
        name: name.into(),
        ..cfg
    }
}

fn tree(f: impl FnOnce(&mut LookaheadConfig)) -> SolveConfig {
    let mut la = LookaheadConfig::default();
    f(&mut la);
    SolveConfig {
        lookahead: Some(la),
        ..SolveConfig::default()
    }
}

/// The strategies compared when no configuration file is given: every
/// criterion without trees, then the look-ahead and cost-memory variants.
pub fn default_matrix() -> Vec<SolveConfig> {
    use CriterionId::*;
    let mut out = Vec::new();
    for id in [C1, C2a, C2b, C3, C4, C5, C6, C7, Vote] {
        out.push(SolveConfig {
            name: format!("plain-{}", format!("{id:?}").to_lowercase()),
            criterion: CriterionSpec::new(id),
            ..SolveConfig::plain()
        });
    }
    out.push(SolveConfig::default());
    out.push(named(
        "tree-d2-off",
        tree(|l| {
            l.depth = 2;
            l.post_winnow = PostWinnow::Off;
        }),
    ));
    out.push(named(
        "tree-2b",
        tree(|l| l.post_winnow = PostWinnow::BestSibling),
    ));
    out.push(named(
        "tree-2c",
        tree(|l| l.post_winnow = PostWinnow::SingleStream),
    ));
    out.push(named(
        "tree-d2-mode",
        tree(|l| {
            l.depth = 2;
            l.post_winnow = PostWinnow::Off;
            l.d2_ratio = Some(1.0);
        }),
    ));
    out.push(named("tree-multi", tree(|l| l.trees = 2)));
    out.push(named(
        "tree-full-path",
        tree(|l| l.accept = AcceptMode::FullPath),
    ));
    out.push(named(
        "tree-attract",
        tree(|l| l.attract = AttractMode::HalfTree),
    ));
    let mut straddle = SolveConfig::default();
    straddle.winnow.straddle = true;
    out.push(named("straddle", straddle));
    out.push(SolveConfig {
        name: "pseudo-classic".into(),
        pseudo: PseudoMode::Classic,
        ..SolveConfig::default()
    });
    out.push(SolveConfig {
        name: "pseudo-analytical".into(),
        pseudo: PseudoMode::Analytical,
        ..SolveConfig::default()
    });
    out.push(SolveConfig {
        name: "refset".into(),
        refset: true,
        ..SolveConfig::default()
    });
    out.push(SolveConfig {
        name: "reversals".into(),
        reversals: true,
        ..SolveConfig::default()
    });
    for (name, approach) in [
        ("dval-1", DvalApproach::FixedWo),
        ("dval-2", DvalApproach::Paired),
    ] {
        out.push(SolveConfig {
            name: name.into(),
            node_select: NodeSelect::Dval,
            dval_approach: approach,
            ..SolveConfig::default()
        });
    }
    out.push(SolveConfig {
        name: "clist-3".into(),
        clist: Some(3),
        ..SolveConfig::default()
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub strategy: String,
    pub status: FinalStatus,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    /// Nodes created when the final incumbent was first found.
    pub nodes_to_first_optimal: Option<u64>,
    pub nodes: u64,
    pub lp_solves: u64,
    pub pivots: u64,
    /// `(nodes so far, objective)` per improvement.
    pub incumbents: Vec<(u64, f64)>,
    /// Left out of the JSON so reports stay reproducible.
    #[serde(skip)]
    pub wall: Duration,
}

/// Totals of one strategy over every instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: String,
    pub instances: usize,
    pub optimal: usize,
    pub nodes: u64,
    pub lp_solves: u64,
    pub pivots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub rows: Vec<BenchRow>,
    pub aggregate: Vec<AggregateRow>,
    pub skipped: Vec<Skipped>,
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Fixed-width text table, wall time included.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<16} {:<20} {:<10} {:>12} {:>7} {:>7} {:>7} {:>8} {:>9}\n",
            "instance", "strategy", "status", "objective", "first", "nodes", "lps", "pivots", "ms"
        );
        for r in &self.rows {
            let obj = r.objective.map_or("-".into(), |v| format!("{v}"));
            let first = r
                .nodes_to_first_optimal
                .map_or("-".into(), |v| v.to_string());
            s += &format!(
                "{:<16} {:<20} {:<10} {:>12} {:>7} {:>7} {:>7} {:>8} {:>9.1}\n",
                r.instance,
                r.strategy,
                format!("{:?}", r.status),
                obj,
                first,
                r.nodes,
                r.lp_solves,
                r.pivots,
                r.wall.as_secs_f64() * 1e3
            );
        }
        s += &format!(
            "\n{:<20} {:>9} {:>7} {:>8} {:>8} {:>9}\n",
            "strategy", "instances", "optimal", "nodes", "lps", "pivots"
        );
        for a in &self.aggregate {
            s += &format!(
                "{:<20} {:>9} {:>7} {:>8} {:>8} {:>9}\n",
                a.strategy, a.instances, a.optimal, a.nodes, a.lp_solves, a.pivots
            );
        }
        s
    }
}

fn mps_files(dir: &Path) -> Result<Vec<PathBuf>, SolveError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("mps")))
        .collect();
    files.sort();
    Ok(files)
}

/// Solve every MPS file in `dir` (sorted by name) with every configuration.
/// Files that cannot be read or parsed are listed in `skipped`.
pub fn run_benchmark(dir: &Path, configs: &[SolveConfig]) -> Result<BenchReport, SolveError> {
    for (i, c) in configs.iter().enumerate() {
        c.validate()?;
        if configs[..i].iter().any(|o| o.name == c.name) {
            return Err(SolveError::Config(format!(
                "strategy name `{}` is used twice",
                c.name
            )));
        }
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for file in mps_files(dir)? {
        let problem = std::fs::read_to_string(&file)
            .map_err(SolveError::from)
            .and_then(|t| parse_mps(&t).map_err(SolveError::from));
        let mut problem = match problem {
            Ok(p) => p,
            Err(e) => {
                skipped.push(Skipped {
                    file: file
                        .file_name()
                        .map_or_else(String::new, |f| f.to_string_lossy().into_owned()),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if problem.name.is_empty() {
            problem.name = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        for cfg in configs {
            let res = solve_mip(&problem, cfg)?;
            let t = &res.trace;
            let nodes_to_first_optimal = match (res.status, res.objective) {
                (FinalStatus::Optimal, Some(best)) => t
                    .incumbents
                    .iter()
                    .find(|e| e.objective <= best + cfg.epsilon)
                    .map(|e| e.nodes_so_far),
                _ => None,
            };
            rows.push(BenchRow {
                instance: t.instance.clone(),
                strategy: t.strategy.clone(),
                status: res.status,
                objective: res.objective,
                bound: res.bound,
                nodes_to_first_optimal,
                nodes: t.counters.nodes,
                lp_solves: t.counters.lp_solves,
                pivots: t.counters.pivots,
                incumbents: t
                    .incumbents
                    .iter()
                    .map(|e| (e.nodes_so_far, e.objective))
                    .collect(),
                wall: res.elapsed,
            });
        }
    }
    let aggregate = configs
        .iter()
        .map(|c| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.strategy == c.name).collect();
            AggregateRow {
                strategy: c.name.clone(),
                instances: mine.len(),
                optimal: mine
                    .iter()
                    .filter(|r| r.status == FinalStatus::Optimal)
                    .count(),
                nodes: mine.iter().map(|r| r.nodes).sum(),
                lp_solves: mine.iter().map(|r| r.lp_solves).sum(),
                pivots: mine.iter().map(|r| r.pivots).sum(),
            }
        })
        .collect();
    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        rows,
        aggregate,
        skipped,
    })
}

/// Read a configuration matrix: a JSON array of (possibly partial) configs.
pub fn load_configs(text: &str) -> Result<Vec<SolveConfig>, SolveError> {
    let configs: Vec<SolveConfig> = serde_json::from_str(text)?;
    if configs.is_empty() {
        return Err(SolveError::Config("the configuration list is empty".into()));
    }
    Ok(configs)
}
