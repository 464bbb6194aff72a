use serde::{Deserialize, Serialize};

use crate::error::CostError;
use crate::lp::Direction;

/// Handle of a node in one [`ExtendedTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExtNodeId {
    pub session: u64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtRecord {
    pub id: usize,
    pub parent: Option<usize>,
    /// The branch on the edge from the parent.
    pub branch: Option<(usize, Direction, f64)>,
    /// Evaluated but not taken.
    pub tentative: bool,
    /// Compulsory branches absorbed on this edge; each counts as an edge.
    pub compulsory: Vec<(usize, Direction)>,
    pub uc: Option<f64>,
    pub depth: usize,
}

impl ExtRecord {
    fn weight(&self) -> usize {
        usize::from(self.branch.is_some()) + self.compulsory.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalThresholds {
    pub max_symdif: usize,
    pub min_intersect: usize,
    pub min_ratio: f64,
    /// Estimates are refused below this fraction of the deepest basic node.
    pub late_fraction: f64,
    /// Consult only the most recent record on the current path.
    pub fast_path: bool,
}

impl Default for AnalyticalThresholds {
    fn default() -> Self {
        AnalyticalThresholds {
            max_symdif: 8,
            min_intersect: 3,
            min_ratio: 1.0,
            late_fraction: 0.8,
            fast_path: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymDifMetrics {
    pub intersect: usize,
    pub symdif: usize,
}

impl SymDifMetrics {
    pub fn ratio(&self) -> f64 {
        self.intersect as f64 / self.symdif.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Analytical {
    Estimate {
        uc: f64,
        from: usize,
        metrics: SymDifMetrics,
    },
    SolveInstead,
}

/// One analytical lookup, kept for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLog {
    /// Basic node the prospective child hangs from.
    pub parent: usize,
    pub var: usize,
    pub dir: Direction,
    pub candidates: Vec<(usize, SymDifMetrics)>,
    pub chosen: Option<usize>,
}

/// The basic branch-and-bound tree plus every evaluated branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedTree {
    pub session: u64,
    pub records: Vec<ExtRecord>,
    pub queries: Vec<QueryLog>,
    /// Depth of the deepest basic node.
    pub max_depth: usize,
}

impl ExtendedTree {
    pub fn new(session: u64) -> Self {
        ExtendedTree {
            session,
            records: vec![ExtRecord {
                id: 0,
                parent: None,
                branch: None,
                tentative: false,
                compulsory: Vec::new(),
                uc: None,
                depth: 0,
            }],
            queries: Vec::new(),
            max_depth: 0,
        }
    }

    pub fn root(&self) -> ExtNodeId {
        self.handle(0)
    }

    pub fn handle(&self, index: usize) -> ExtNodeId {
        ExtNodeId {
            session: self.session,
            index,
        }
    }

    fn check(&self, id: ExtNodeId) -> Result<usize, CostError> {
        if id.session != self.session {
            return Err(CostError::ForeignNode {
                expected: self.session,
                got: id.session,
            });
        }
        if id.index >= self.records.len() {
            return Err(CostError::UnknownNode(id.index));
        }
        Ok(id.index)
    }

    pub fn record(&self, id: ExtNodeId) -> Result<&ExtRecord, CostError> {
        Ok(&self.records[self.check(id)?])
    }

    fn push(
        &mut self,
        parent: ExtNodeId,
        branch: (usize, Direction, f64),
        tentative: bool,
        uc: Option<f64>,
    ) -> Result<ExtNodeId, CostError> {
        let p = self.check(parent)?;
        let id = self.records.len();
        let depth = self.records[p].depth + 1;
        self.records.push(ExtRecord {
            id,
            parent: Some(p),
            branch: Some(branch),
            tentative,
            compulsory: Vec::new(),
            uc,
            depth,
        });
        if !tentative {
            self.max_depth = self.max_depth.max(depth);
        }
        Ok(self.handle(id))
    }

    /// A branch actually taken in the basic tree.
    pub fn add_basic(
        &mut self,
        parent: ExtNodeId,
        branch: (usize, Direction, f64),
        uc: Option<f64>,
    ) -> Result<ExtNodeId, CostError> {
        self.push(parent, branch, false, uc)
    }

    /// A branch evaluated at `parent` by an LP solve but not taken.
    pub fn add_tentative(
        &mut self,
        parent: ExtNodeId,
        branch: (usize, Direction, f64),
        uc: Option<f64>,
    ) -> Result<ExtNodeId, CostError> {
        self.push(parent, branch, true, uc)
    }

    /// A compulsory branch absorbed at `node`.
    pub fn add_compulsory(
        &mut self,
        node: ExtNodeId,
        var: usize,
        dir: Direction,
    ) -> Result<(), CostError> {
        let i = self.check(node)?;
        self.records[i].compulsory.push((var, dir));
        Ok(())
    }

    fn ancestors(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![i];
        while let Some(p) = self.records[i].parent {
            out.push(p);
            i = p;
        }
        out.reverse();
        out
    }

    /// Number of edges on the path from the root to `i`.
    fn path_len(&self, i: usize) -> usize {
        self.ancestors(i)
            .iter()
            .map(|&a| self.records[a].weight())
            .sum()
    }

    fn lca(&self, a: usize, b: usize) -> usize {
        let (pa, pb) = (self.ancestors(a), self.ancestors(b));
        pa.iter()
            .zip(&pb)
            .take_while(|(x, y)| x == y)
            .last()
            .map_or(0, |(x, _)| *x)
    }

    /// Path metrics between `u` and a node `v` not yet created, reached by
    /// one more branch from `v_parent`.
    pub fn symdif_metrics(
        &self,
        u: ExtNodeId,
        v_parent: ExtNodeId,
    ) -> Result<SymDifMetrics, CostError> {
        let (u, vp) = (self.check(u)?, self.check(v_parent)?);
        let shared = self.lca(u, vp);
        let common = self.path_len(shared);
        Ok(SymDifMetrics {
            intersect: common,
            symdif: (self.path_len(u) - common) + (self.path_len(vp) - common) + 1,
        })
    }

    fn on_path(&self, i: usize, leaf: usize) -> bool {
        self.ancestors(leaf).contains(&i)
    }

    /// Unit cost for branching `var` in `dir` at a child of `v_parent`,
    /// borrowed from the best recorded evaluation elsewhere in the tree.
    pub fn analytical_uc(
        &mut self,
        v_parent: ExtNodeId,
        var: usize,
        dir: Direction,
        th: &AnalyticalThresholds,
    ) -> Result<Analytical, CostError> {
        let vp = self.check(v_parent)?;
        let matches = |r: &ExtRecord| {
            r.tentative
                && r.uc.is_some()
                && r.parent != Some(vp)
                && r.branch.is_some_and(|(j, d, _)| j == var && d == dir)
        };
        let mut pool: Vec<usize> = self
            .records
            .iter()
            .filter(|r| matches(r))
            .map(|r| r.id)
            .collect();
        if th.fast_path {
            pool.retain(|&u| self.records[u].parent.is_some_and(|p| self.on_path(p, vp)));
            pool = pool.into_iter().max().into_iter().collect();
        }
        let mut candidates = Vec::with_capacity(pool.len());
        for &u in &pool {
            candidates.push((u, self.symdif_metrics(self.handle(u), v_parent)?));
        }
        let late = self.records[vp].depth + 1 > self.late_limit(th);
        let chosen = if late { None } else { pick(&candidates, th) };
        self.queries.push(QueryLog {
            parent: vp,
            var,
            dir,
            candidates: candidates.clone(),
            chosen,
        });
        Ok(
            match chosen.and_then(|u| candidates.iter().find(|c| c.0 == u)) {
                Some(&(u, metrics)) => Analytical::Estimate {
                    uc: self.records[u].uc.unwrap_or_default(),
                    from: u,
                    metrics,
                },
                None => Analytical::SolveInstead,
            },
        )
    }

    fn late_limit(&self, th: &AnalyticalThresholds) -> usize {
        (th.late_fraction * self.max_depth as f64).floor() as usize
    }

    /// Recompute the metrics of every logged query from the records.
    pub fn replay(&self) -> Result<Vec<Vec<(usize, SymDifMetrics)>>, CostError> {
        self.queries
            .iter()
            .map(|q| {
                q.candidates
                    .iter()
                    .map(|&(u, _)| {
                        Ok((
                            u,
                            self.symdif_metrics(self.handle(u), self.handle(q.parent))?,
                        ))
                    })
                    .collect()
            })
            .collect()
    }

    /// Smallest SymDif seen by any query.
    pub fn min_symdif(&self) -> Option<usize> {
        self.queries
            .iter()
            .flat_map(|q| q.candidates.iter().map(|c| c.1.symdif))
            .min()
    }
}

/// Dominance filter, then the thresholds, then the best ratio.
fn pick(candidates: &[(usize, SymDifMetrics)], th: &AnalyticalThresholds) -> Option<usize> {
    let dominated = |m: &SymDifMetrics| {
        candidates.iter().any(|(_, s)| {
            s.intersect >= m.intersect
                && s.symdif <= m.symdif
                && (s.intersect > m.intersect || s.symdif < m.symdif)
        })
    };
    candidates
        .iter()
        .filter(|(_, m)| !dominated(m))
        .filter(|(_, m)| {
            m.symdif <= th.max_symdif
                && m.intersect >= th.min_intersect
                && m.ratio() >= th.min_ratio
        })
        .max_by(|a, b| a.1.ratio().total_cmp(&b.1.ratio()).then(a.0.cmp(&b.0)))
        .map(|c| c.0)
}
