mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use stochalloc::diagnostics::{multi_round_bound, single_round_bound, tightness_instance, worst_case_regret};
use stochalloc::oracle::{AllocationRule, ExactBellman};
use stochalloc::population::{
    build_population, fit_partition, load_graph, load_network, NodeEstimates, Partition, Split, TreeNode,
};
use stochalloc::rng::rng_from_seed;
use stochalloc::sim::{
    default_round_cap, run_batch, summarize, write_episode_csv, write_summary_csv, BatchConfig, DistEnv,
    Environment, EpisodeRow, NetworkEnv, Summary,
};
use stochalloc::single_round::{brute_force_allocate, expected_reward};
use stochalloc::surrogate::{compute_table_parallel, population_digest};
use stochalloc::{greedy_allocate, Pmf, Policy, PopulationModel, ValueTable};

use config::{EnvKind, ExperimentConfig, ExperimentFile};

#[derive(Parser)]
#[command(
    name = "stochalloc",
    version,
    about = "Budgeted multi-round allocation with endogenous arrivals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a population model from an edge list and node covariates.
    BuildPopulation(BuildPopulationArgs),
    /// Compute and save the population-level value table.
    Precompute(PrecomputeArgs),
    /// Run batches of episodes over a policy × discount × frontier-size grid.
    Simulate(SimulateArgs),
    /// Evaluate the single-round tightness instance or the multi-round bound.
    Bounds(BoundsArgs),
    /// Compare greedy, the value table and the bounds against exhaustive oracles.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct BuildPopulationArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    covariates: PathBuf,
    /// Population JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Node→leaf estimate map to write (default: next to --out as *.nodes.json).
    #[arg(long)]
    node_estimates: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, default_value_t = 10)]
    min_leaf: usize,
    /// Degrees at or above this are folded into one tail bucket.
    #[arg(long)]
    tail: Option<usize>,
    /// Tail threshold when --tail is absent.
    #[arg(long)]
    budget: Option<u32>,
}

#[derive(Args)]
struct PrecomputeArgs {
    #[arg(long)]
    population: PathBuf,
    #[arg(long)]
    budget: u32,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment manifest; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    env: Option<EnvKind>,
    #[arg(long)]
    population: Option<PathBuf>,
    /// Value tables, one per discount factor.
    #[arg(long, value_delimiter = ',')]
    table: Option<Vec<PathBuf>>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    node_estimates: Option<PathBuf>,
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n0: Option<Vec<usize>>,
    /// Comma-separated, e.g. const:3,greedy:0.2,greedyrem:0.5,surrogate.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Episode CSV; summaries go to the matching *.summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// identity or survival:SCALE.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    round_cap: Option<u32>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct BoundsArgs {
    /// True population.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Estimated population (default: the true one).
    #[arg(long)]
    estimate_population: Option<PathBuf>,
    /// JSON list of true frontier distributions.
    #[arg(long)]
    frontier: Option<PathBuf>,
    /// JSON list of estimated frontier distributions.
    #[arg(long)]
    frontier_estimates: Option<PathBuf>,
    /// Remaining budget r.
    #[arg(long)]
    budget: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Run the tightness construction instead: S,X,BETA.
    #[arg(long, value_delimiter = ',')]
    tightness: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random instances per check.
    #[arg(long, default_value_t = 200)]
    runs: usize,
    /// Largest budget for the exact Bellman comparison.
    #[arg(long, default_value_t = 4)]
    budget: u32,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.9])]
    gamma: Vec<f64>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildPopulation(a) => cmd_build_population(a),
        Command::Precompute(a) => cmd_precompute(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    Ok(b.build()?)
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

/// `results.csv` → `results.summary.csv`.
fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn describe(split: &Split, left: bool) -> String {
    match (split, left) {
        (Split::Numeric { covariate, threshold }, true) => format!("{covariate} <= {threshold}"),
        (Split::Numeric { covariate, threshold }, false) => format!("{covariate} > {threshold}"),
        (Split::Categorical { covariate, category }, true) => format!("{covariate} = {category}"),
        (Split::Categorical { covariate, category }, false) => format!("{covariate} != {category}"),
    }
}

fn leaf_rules(partition: &Partition) -> Vec<String> {
    fn walk(t: &TreeNode, path: &mut Vec<String>, out: &mut Vec<String>) {
        match t {
            TreeNode::Leaf(j) => {
                out[*j] = if path.is_empty() {
                    "all".into()
                } else {
                    path.join(" & ")
                };
            }
            TreeNode::Split { rule, left, right } => {
                path.push(describe(rule, true));
                walk(left, path, out);
                path.pop();
                path.push(describe(rule, false));
                walk(right, path, out);
                path.pop();
            }
        }
    }
    let mut out = vec![String::new(); partition.leaves.len()];
    if let Some(root) = &partition.root {
        walk(root, &mut Vec::new(), &mut out);
    }
    if let Some(j) = partition.catch_all {
        out[j] = "no covariates".into();
    }
    out
}

fn cmd_build_population(a: BuildPopulationArgs) -> Result<()> {
    let data = load_network(&a.edges, &a.covariates)?;
    let tail = match (a.tail, a.budget) {
        (Some(t), _) => t,
        (None, Some(b)) => b as usize,
        (None, None) => data.records.iter().map(|r| r.degree).max().unwrap_or(0),
    };
    let partition = fit_partition(&data.records, a.max_depth, a.min_leaf)?;
    let (population, estimates) = build_population(&partition, &data.records, tail)?;
    population.save(&a.out)?;
    let nodes_path = a.node_estimates.unwrap_or_else(|| {
        let stem = a
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        a.out.with_file_name(format!("{stem}.nodes.json"))
    });
    estimates.save(&nodes_path)?;

    println!(
        "{} nodes, {} edges, {} leaves, tail bucket at {tail}",
        data.graph.num_nodes(),
        data.graph.num_edges(),
        partition.leaves.len()
    );
    println!(
        "{:>4}  {:>6}  {:>8}  {:>8}  rule",
        "leaf", "size", "weight", "mean"
    );
    for (j, (leaf, rule)) in partition.leaves.iter().zip(leaf_rules(&partition)).enumerate() {
        let c = &population.components()[j];
        println!(
            "{j:>4}  {:>6}  {:>8.4}  {:>8.3}  {rule}",
            leaf.len(),
            c.weight,
            c.pmf.mean()
        );
    }
    log::info!("wrote {} and {}", a.out.display(), nodes_path.display());
    Ok(())
}

fn cmd_precompute(a: PrecomputeArgs) -> Result<()> {
    let population = PopulationModel::load(&a.population)?;
    let pool = thread_pool(a.workers)?;
    let start = Instant::now();
    let table = pool.install(|| compute_table_parallel(&population, a.budget, a.gamma))?;
    let elapsed = start.elapsed();
    table.save(&a.out)?;
    let checksum = table.checksum();
    log::info!("computed b = {} γ = {} in {elapsed:.2?}", a.budget, a.gamma);
    println!("{checksum}  {}", a.out.display());
    Ok(())
}

fn find_table(tables: &[Arc<ValueTable>], gamma: f64, budget: u32) -> Result<&Arc<ValueTable>> {
    tables
        .iter()
        .find(|t| (t.discount() - gamma).abs() < 1e-12 && t.budget_cap() >= budget)
        .with_context(|| {
            format!("surrogate policy needs a value table with γ = {gamma} and budget ≥ {budget}; precompute one and pass it with --table")
        })
}

fn run_grid<E: Environment>(
    env: &E,
    cfg: &ExperimentConfig,
    tables: &[Arc<ValueTable>],
) -> Result<(Vec<EpisodeRow>, Vec<Summary>)> {
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &gamma in &cfg.gammas {
        for &n0 in &cfg.initial_frontier_sizes {
            for &spec in &cfg.policies {
                let table = if spec.is_surrogate() {
                    Some(find_table(tables, gamma, cfg.budget)?.clone())
                } else {
                    None
                };
                let batch = BatchConfig {
                    policy: Policy::new(spec, cfg.budget, table)?,
                    gamma,
                    n0,
                    budget: cfg.budget,
                    round_cap: cfg.round_cap.unwrap_or_else(|| default_round_cap(cfg.budget)),
                    base_seed: cfg.base_seed,
                    runs: cfg.runs,
                };
                let batch_rows = run_batch(env, &batch, true)?;
                let s = summarize(&batch_rows)?;
                log::info!(
                    "γ={gamma} n0={n0} {spec}: {:.3} ± {:.3}",
                    s.mean_reward,
                    s.se_reward
                );
                summaries.push(s);
                rows.extend(batch_rows);
            }
        }
    }
    Ok((rows, summaries))
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let base = match &a.config {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::default(),
    };
    let flags = ExperimentFile {
        env: a.env,
        budget: a.budget,
        gammas: a.gamma,
        initial_frontier_sizes: a.n0,
        policies: a.policies,
        runs: a.runs,
        base_seed: a.seed,
        population: a.population,
        tables: a.table,
        edges: a.edges,
        node_estimates: a.node_estimates,
        out: a.out,
        noise: a.noise,
        round_cap: a.round_cap,
        workers: a.workers,
    };
    let cfg = ExperimentConfig::try_from(base.merge(flags))?;

    let tables = cfg
        .tables
        .iter()
        .map(|p| {
            ValueTable::load(p)
                .map(Arc::new)
                .with_context(|| format!("loading table {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.policies.iter().any(|p| p.is_surrogate()) {
        for &g in &cfg.gammas {
            find_table(&tables, g, cfg.budget)?;
        }
    }

    let pool = thread_pool(cfg.workers)?;
    let (rows, summaries) = match cfg.env {
        EnvKind::Dist => {
            let path = cfg.population.as_ref().context("--env dist needs --population")?;
            let population = PopulationModel::load(path)?;
            let digest = population_digest(&population);
            for t in &tables {
                if t.population_digest() != digest {
                    log::warn!(
                        "table for γ = {} was computed from a different population",
                        t.discount()
                    );
                }
            }
            let env = DistEnv::new(population).with_noise(cfg.noise);
            pool.install(|| run_grid(&env, &cfg, &tables))?
        }
        EnvKind::Network => {
            let edges = cfg.edges.as_ref().context("--env network needs --edges")?;
            let est_path = cfg
                .node_estimates
                .as_ref()
                .context("--env network needs --node-estimates")?;
            let graph = load_graph(edges)?;
            let estimates = NodeEstimates::load(est_path)?;
            let env = NetworkEnv::from_estimate_map(graph, &estimates)?.with_noise(cfg.noise);
            pool.install(|| run_grid(&env, &cfg, &tables))?
        }
    };

    let mut episodes = Vec::new();
    write_episode_csv(&mut episodes, &rows)?;
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &summaries)?;
    match &cfg.out {
        Some(out) => {
            write_output(Some(out), &episodes)?;
            let sp = summary_path(out);
            write_output(Some(&sp), &summary)?;
            log::info!(
                "wrote {} episode rows to {} and summaries to {}",
                rows.len(),
                out.display(),
                sp.display()
            );
        }
        None => {
            write_output(None, &episodes)?;
            std::io::stderr().write_all(&summary)?;
        }
    }
    Ok(())
}

fn load_frontier(path: &Path) -> Result<Vec<Pmf>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    if let Some(t) = &a.tightness {
        if t.len() != 3 {
            bail!("--tightness takes S,X,BETA");
        }
        let (s, x, beta) = (t[0], t[1], t[2]);
        if s.fract() != 0.0 || s < 1.0 {
            bail!("tightness budget {s} must be a positive integer");
        }
        let s = s as u32;
        let inst = tightness_instance(s, x, beta)?;
        let bound = single_round_bound(&inst.truth, &inst.estimates, s)?;
        let regret = worst_case_regret(&inst.truth, &inst.estimates, s)?;
        let text = match a.format {
            Format::Json => format!(
                "{}\n",
                serde_json::json!({"s": s, "x": x, "beta": beta, "regret": regret, "bound": bound})
            ),
            Format::Csv => format!("s,x,beta,regret,bound\n{s},{x},{beta},{regret},{bound}\n"),
        };
        return write_output(a.out.as_deref(), text.as_bytes());
    }

    let gamma = a.gamma.context("--gamma is required")?;
    let r = a.budget.context("--budget is required")?;
    let truth = PopulationModel::load(a.population.as_deref().context("--population is required")?)?;
    let estimate = match &a.estimate_population {
        Some(p) => PopulationModel::load(p)?,
        None => truth.clone(),
    };
    let frontier = match &a.frontier {
        Some(p) => load_frontier(p)?,
        None => Vec::new(),
    };
    let frontier_est = match &a.frontier_estimates {
        Some(p) => load_frontier(p)?,
        None => frontier.clone(),
    };
    let report = multi_round_bound(&frontier, &frontier_est, &truth, &estimate, r, gamma)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
        Format::Csv => format!(
            "frontier_term,population_term,heterogeneity_term,total,c_r_gamma\n{},{},{},{},{}\n",
            report.frontier_term,
            report.population_term,
            report.heterogeneity_term,
            report.total,
            report.c_r_gamma
        ),
    };
    write_output(a.out.as_deref(), text.as_bytes())
}

fn random_pmf(rng: &mut impl Rng, max_k: usize) -> Pmf {
    let k = rng.gen_range(0..=max_k);
    let w: Vec<f64> = (0..=k).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    Pmf::new(w.iter().map(|x| x / total).collect()).expect("normalized weights")
}

fn report(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn cmd_oracle_check(a: OracleCheckArgs) -> Result<()> {
    let mut rng = rng_from_seed(a.seed);
    let mut all = true;

    let mut worst = 0.0f64;
    for _ in 0..a.runs {
        let n = rng.gen_range(1..=4);
        let s = rng.gen_range(0..=6);
        let frontier: Vec<Pmf> = (0..n).map(|_| random_pmf(&mut rng, 5)).collect();
        let greedy = expected_reward(&greedy_allocate(&frontier, s), &frontier)?;
        let (_, best) = brute_force_allocate(&frontier, s)?;
        worst = worst.max((greedy - best).abs());
    }
    all &= report(
        "greedy vs brute-force allocation",
        worst <= 1e-12,
        format!("{} instances, max diff {worst:.2e}", a.runs),
    );

    let mut worst = 0.0f64;
    let mut entries = 0;
    for &gamma in &a.gamma {
        for _ in 0..a.runs.div_ceil(20) {
            let p = PopulationModel::homogeneous(random_pmf(&mut rng, 2));
            let table = compute_table_parallel(&p, a.budget, gamma)?;
            let mut exact = ExactBellman::new(&p, gamma, AllocationRule::Exhaustive)?;
            for r in 0..=a.budget {
                for n in 0..=r as usize {
                    worst = worst.max((exact.continuation(r, n) - table.get(r, n as u32)).abs());
                    entries += 1;
                }
            }
        }
    }
    all &= report(
        "value table vs exact Bellman",
        worst <= 1e-9,
        format!("{entries} entries, max diff {worst:.2e}"),
    );

    let mut worst = 0.0f64;
    for _ in 0..a.runs {
        let s = rng.gen_range(1..=5);
        let x = rng.gen_range(0.01..=1.0);
        let beta = rng.gen_range(0.0..=x);
        let inst = tightness_instance(s, x, beta)?;
        let bound = single_round_bound(&inst.truth, &inst.estimates, s)?;
        let regret = worst_case_regret(&inst.truth, &inst.estimates, s)?;
        worst = worst.max((bound - regret).abs());
    }
    all &= report(
        "single-round bound tightness",
        worst <= 1e-12,
        format!("{} instances, max |regret − bound| {worst:.2e}", a.runs),
    );

    if !all {
        bail!("oracle check failed");
    }
    Ok(())
}
