use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use narrow_gauge::bench::{default_matrix, load_configs, run_benchmark};
use narrow_gauge::costs::DvalApproach;
use narrow_gauge::criteria::{CriterionId, CriterionSpec};
use narrow_gauge::driver::{solve_mip, NodeSelect, PseudoMode, SolveConfig};
use narrow_gauge::lookahead::{LookaheadConfig, PostWinnow};
use narrow_gauge::parse_mps;

#[derive(Parser)]
#[command(
    name = "ngb",
    version,
    about = "Branch and bound with narrow-gauge look-ahead branching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one MPS instance.
    Solve(SolveArgs),
    /// Run a strategy matrix over every MPS file in a directory.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SolveArgs {
    file: PathBuf,
    /// Start from a JSON configuration; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// C1, C2a, C2b, C3, C4, C5, C6, C7 or vote.
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    /// Look-ahead depth; 0 branches on the winnowed candidates directly.
    #[arg(long)]
    lookahead: Option<usize>,
    /// off, 2a, 2b or 2c.
    #[arg(long)]
    postwin: Option<String>,
    #[arg(long)]
    lim: Option<usize>,
    #[arg(long)]
    d0: Option<usize>,
    /// Simplified depth-2 trees.
    #[arg(long)]
    d2_mode: bool,
    /// Ratio for --d2-mode.
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long)]
    multi_tree: Option<usize>,
    #[arg(long)]
    straddle: bool,
    /// off, classic or analytical.
    #[arg(long)]
    pseudo: Option<String>,
    #[arg(long)]
    refset: bool,
    #[arg(long)]
    reversals: bool,
    #[arg(long)]
    beta: Option<f64>,
    /// dfs or dval.
    #[arg(long)]
    node_select: Option<String>,
    /// 1 or 2.
    #[arg(long)]
    dval_approach: Option<u8>,
    #[arg(long)]
    clist: Option<usize>,
    #[arg(long)]
    vlim: Option<f64>,
    #[arg(long)]
    max_nodes: Option<u64>,
    /// Seconds.
    #[arg(long)]
    max_time: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON run trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    /// JSON array of configurations; the built-in matrix when absent.
    #[arg(long)]
    configs: Option<PathBuf>,
    /// Write the JSON report here ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Override every configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn build_config(a: &SolveArgs) -> Result<SolveConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SolveConfig::default(),
    };
    if let Some(c) = &a.criterion {
        let id: CriterionId = c.parse()?;
        cfg.criterion = CriterionSpec::new(id);
        // the leaf criterion follows when it is one a tree accepts
        if let (Some(la), CriterionId::C2a | CriterionId::C2b | CriterionId::C3) =
            (&mut cfg.lookahead, id)
        {
            la.leaf = CriterionSpec::new(id);
        }
    }
    for spec in
        std::iter::once(&mut cfg.criterion).chain(cfg.lookahead.as_mut().map(|l| &mut l.leaf))
    {
        if let Some(p) = a.p {
            spec.p = p;
        }
        if let Some(l) = a.lambda {
            spec.lambda = l;
        }
        if let Some(w) = a.w1 {
            spec.weights.w1 = w;
        }
        if let Some(w) = a.w2 {
            spec.weights.w2 = w;
        }
    }
    match a.lookahead {
        Some(0) => cfg.lookahead = None,
        Some(d) => {
            cfg.lookahead
                .get_or_insert_with(LookaheadConfig::default)
                .depth = d
        }
        None => {}
    }
    let tree_flag = a.postwin.is_some()
        || a.lim.is_some()
        || a.d0.is_some()
        || a.d2_mode
        || a.multi_tree.is_some();
    if tree_flag {
        let Some(la) = cfg.lookahead.as_mut() else {
            bail!("tree options need a look-ahead depth of at least 1");
        };
        if let Some(pw) = &a.postwin {
            la.post_winnow = pw.parse::<PostWinnow>()?;
        }
        if let Some(k) = a.lim {
            la.lim = vec![k];
        }
        if let Some(k) = a.d0 {
            la.d0 = k;
        }
        if a.d2_mode {
            la.depth = 2;
            la.d2_ratio = Some(a.v);
        }
        if let Some(n) = a.multi_tree {
            la.trees = n;
        }
    }
    cfg.winnow.straddle |= a.straddle;
    if let Some(p) = &a.pseudo {
        cfg.pseudo = p.parse::<PseudoMode>()?;
    }
    cfg.refset |= a.refset;
    cfg.reversals |= a.reversals;
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(n) = &a.node_select {
        cfg.node_select = n.parse::<NodeSelect>()?;
    }
    match a.dval_approach {
        Some(1) => cfg.dval_approach = DvalApproach::FixedWo,
        Some(2) => cfg.dval_approach = DvalApproach::Paired,
        Some(k) => bail!("--dval-approach takes 1 or 2, not {k}"),
        None => {}
    }
    if a.clist.is_some() {
        cfg.clist = a.clist;
    }
    if a.vlim.is_some() {
        cfg.winnow.vlim_m = a.vlim;
    }
    if a.max_nodes.is_some() {
        cfg.max_nodes = a.max_nodes;
    }
    if a.max_time.is_some() {
        cfg.max_time = a.max_time;
    }
    if let Some(e) = a.eps {
        cfg.epsilon = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.file)
        .with_context(|| format!("reading {}", a.file.display()))?;
    let mut problem = parse_mps(&text).with_context(|| format!("parsing {}", a.file.display()))?;
    if problem.name.is_empty() {
        problem.name = a
            .file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    let cfg = build_config(&a)?;
    let res = solve_mip(&problem, &cfg)?;
    let c = &res.trace.counters;
    println!("status     {:?}", res.status);
    println!(
        "objective  {}",
        res.objective.map_or("-".into(), |v| v.to_string())
    );
    println!(
        "bound      {}",
        res.bound.map_or("-".into(), |v| v.to_string())
    );
    println!("nodes      {}", c.nodes);
    println!("lp solves  {}", c.lp_solves);
    println!("pivots     {}", c.pivots);
    println!("time       {:.3}s", res.elapsed.as_secs_f64());
    if let Some(x) = &res.x {
        for (name, v) in problem.col_names.iter().zip(x) {
            if *v != 0.0 {
                println!("  {name} = {v}");
            }
        }
    }
    if let Some(path) = &a.trace {
        std::fs::write(path, res.trace.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("trace written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let mut configs = match &a.configs {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            load_configs(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => default_matrix(),
    };
    if let Some(s) = a.seed {
        for c in &mut configs {
            c.seed = s;
        }
    }
    let report = run_benchmark(&a.dir, &configs)?;
    for s in &report.skipped {
        log::warn!("skipped {}: {}", s.file, s.reason);
    }
    match a.json.as_deref() {
        Some(p) if p.as_os_str() == "-" => println!("{}", report.to_json()),
        Some(p) => {
            std::fs::write(p, report.to_json())
                .with_context(|| format!("writing {}", p.display()))?;
            print!("{}", report.table());
        }
        None => print!("{}", report.table()),
    }
    if report.is_empty() {
        log::error!("no instances solved in {}", a.dir.display());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench(a),
    };
    out.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
