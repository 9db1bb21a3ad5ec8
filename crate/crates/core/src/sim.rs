//! Episode simulation in two environments.
//!
//! In the distributional environment each frontier member's referral count is
//! drawn from its true Pmf and new members draw their Pmf from the population.
//! In the network environment recruits are actual unrecruited graph neighbors.
//! Both share the episode loop, batch runner and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, PopulationModel};
use crate::error::{Error, Result};
use crate::policy::{Action, Policy};
use crate::population::{Graph, NodeEstimates};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

/// Header of per-episode result rows.
pub const CSV_HEADER: &str =
    "env,policy,param,gamma,n0,b,seed,rounds,spend,recruits,discounted_reward,termination";

/// Header of per-configuration summary rows.
pub const SUMMARY_HEADER: &str =
    "env,policy,param,gamma,n0,b,runs,mean_discounted_reward,se_discounted_reward,mean_recruits,mean_spend,mean_rounds";

/// How the estimates a policy sees are derived from the base distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum NoiseChannel {
    #[default]
    Identity,
    /// Each survival probability `p(ℓ)`, `ℓ ≥ 1`, is shifted by uniform noise in
    /// `[-scale, scale]`, clamped to `[0, 1]` and made non-increasing.
    Survival { scale: f64 },
}

impl NoiseChannel {
    pub fn apply<R: Rng + ?Sized>(&self, base: &Pmf, rng: &mut R) -> Pmf {
        match *self {
            NoiseChannel::Identity => base.clone(),
            NoiseChannel::Survival { scale } => {
                let mut surv = Vec::with_capacity(base.max_value());
                let mut prev = 1.0f64;
                for l in 1..=base.max_value() {
                    let noisy = (base.survival(l) + rng.gen_range(-scale..=scale)).clamp(0.0, 1.0);
                    prev = prev.min(noisy);
                    surv.push(prev);
                }
                Pmf::from_survival(&surv).expect("clamped survival is a valid tail")
            }
        }
    }
}

impl FromStr for NoiseChannel {
    type Err = Error;

    /// `identity` or `survival:SCALE` with `SCALE ∈ [0, 1]`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().split_once(':') {
            None if s.trim() == "identity" => Ok(NoiseChannel::Identity),
            Some(("survival", x)) => match x.trim().parse::<f64>() {
                Ok(scale) if (0.0..=1.0).contains(&scale) => Ok(NoiseChannel::Survival { scale }),
                _ => Err(Error::InvalidParameter(format!(
                    "noise scale {x:?} must be in [0, 1]"
                ))),
            },
            _ => Err(Error::InvalidParameter(format!(
                "noise {s:?}: expected identity or survival:SCALE"
            ))),
        }
    }
}

impl fmt::Display for NoiseChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseChannel::Identity => f.write_str("identity"),
            NoiseChannel::Survival { scale } => write!(f, "survival:{scale}"),
        }
    }
}

/// Why an episode stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    FrontierEmpty,
    RoundCap,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::FrontierEmpty => "frontier_empty",
            Termination::RoundCap => "round_cap",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub per_round_recruits: Vec<u32>,
    pub per_round_spend: Vec<u32>,
    pub discounted_reward: f64,
    pub termination: Termination,
}

impl EpisodeResult {
    pub fn rounds(&self) -> usize {
        self.per_round_recruits.len()
    }

    pub fn total_spend(&self) -> u32 {
        self.per_round_spend.iter().sum()
    }

    pub fn total_recruits(&self) -> u32 {
        self.per_round_recruits.iter().sum()
    }

    /// `Σ_t γ^{t−1} N_t` from the recorded trace.
    pub fn recompute_reward(&self, gamma: f64) -> f64 {
        discounted_sum(&self.per_round_recruits, gamma)
    }
}

fn discounted_sum(recruits: &[u32], gamma: f64) -> f64 {
    recruits
        .iter()
        .enumerate()
        .map(|(t, &n)| gamma.powi(t as i32) * n as f64)
        .sum()
}

/// Per-episode random streams: `dynamics` drives referrals and arrivals,
/// `noise` drives the estimate channel, so changing the noise leaves the
/// realized dynamics of a seed untouched.
pub struct EpisodeRng {
    pub dynamics: SimRng,
    pub noise: SimRng,
}

impl EpisodeRng {
    pub fn from_seed(seed: u64) -> Self {
        EpisodeRng {
            dynamics: rng_from_seed(derive_seed(seed, 0)),
            noise: rng_from_seed(derive_seed(seed, 1)),
        }
    }
}

/// An environment the episode loop can drive.
pub trait Environment: Sync {
    type State;

    /// Short label for the `env` CSV column.
    fn label(&self) -> &'static str;

    /// Initial state with `n0` frontier members and budget `budget`.
    fn initial(&self, n0: usize, budget: u32, rng: &mut EpisodeRng) -> Self::State;

    fn remaining(&self, state: &Self::State) -> u32;

    fn estimates<'s>(&self, state: &'s Self::State) -> &'s [Pmf];

    /// Applies `action`; returns the number of recruits.
    fn step(&self, state: &mut Self::State, action: &Action, rng: &mut EpisodeRng) -> Result<u32>;
}

#[derive(Clone, Debug)]
pub struct DistEnvState {
    pub remaining: u32,
    pub frontier: Vec<Pmf>,
    pub frontier_estimates: Vec<Pmf>,
}

/// Referrals sampled from each member's true Pmf; arrivals draw their Pmf from
/// the true population.
#[derive(Clone, Debug)]
pub struct DistEnv {
    pub population_truth: PopulationModel,
    pub noise: NoiseChannel,
}

impl DistEnv {
    pub fn new(population_truth: PopulationModel) -> Self {
        DistEnv {
            population_truth,
            noise: NoiseChannel::Identity,
        }
    }

    pub fn with_noise(mut self, noise: NoiseChannel) -> Self {
        self.noise = noise;
        self
    }

    fn arrivals(&self, m: usize, rng: &mut EpisodeRng) -> (Vec<Pmf>, Vec<Pmf>) {
        let frontier: Vec<Pmf> = (0..m)
            .map(|_| self.population_truth.sample(&mut rng.dynamics).clone())
            .collect();
        let estimates = frontier
            .iter()
            .map(|d| self.noise.apply(d, &mut rng.noise))
            .collect();
        (frontier, estimates)
    }
}

impl Environment for DistEnv {
    type State = DistEnvState;

    fn label(&self) -> &'static str {
        "dist"
    }

    fn initial(&self, n0: usize, budget: u32, rng: &mut EpisodeRng) -> DistEnvState {
        let (frontier, frontier_estimates) = self.arrivals(n0, rng);
        DistEnvState {
            remaining: budget,
            frontier,
            frontier_estimates,
        }
    }

    fn remaining(&self, state: &DistEnvState) -> u32 {
        state.remaining
    }

    fn estimates<'s>(&self, state: &'s DistEnvState) -> &'s [Pmf] {
        &state.frontier_estimates
    }

    fn step(&self, state: &mut DistEnvState, action: &Action, rng: &mut EpisodeRng) -> Result<u32> {
        action.check_feasible(state.remaining, state.frontier.len())?;
        let recruits: u32 = state
            .frontier
            .iter()
            .zip(action.allocation.units())
            .filter(|(_, &k)| k > 0)
            .map(|(d, &k)| k.min(d.sample(&mut rng.dynamics) as u32))
            .sum();
        let (frontier, estimates) = self.arrivals(recruits as usize, rng);
        state.frontier = frontier;
        state.frontier_estimates = estimates;
        state.remaining -= action.round_budget;
        Ok(recruits)
    }
}

#[derive(Clone, Debug)]
pub struct NetEnvState {
    pub remaining: u32,
    pub recruited: Vec<bool>,
    pub recruited_count: usize,
    pub frontier_nodes: Vec<usize>,
    pub frontier_estimates: Vec<Pmf>,
}

/// Recruits are unrecruited graph neighbors, chosen uniformly without
/// replacement and resolved in frontier order.
#[derive(Clone, Debug)]
pub struct NetworkEnv {
    graph: Graph,
    node_estimates: Vec<Pmf>,
    pub noise: NoiseChannel,
}

impl NetworkEnv {
    /// `node_estimates[i]` is the estimate for graph node `i`.
    pub fn new(graph: Graph, node_estimates: Vec<Pmf>) -> Result<Self> {
        if node_estimates.len() != graph.num_nodes() {
            return Err(Error::LengthMismatch {
                expected: graph.num_nodes(),
                found: node_estimates.len(),
            });
        }
        Ok(NetworkEnv {
            graph,
            node_estimates,
            noise: NoiseChannel::Identity,
        })
    }

    /// Looks each graph node up in an id-keyed estimate map.
    pub fn from_estimate_map(graph: Graph, estimates: &NodeEstimates) -> Result<Self> {
        let per_node = (0..graph.num_nodes())
            .map(|i| {
                estimates
                    .get(graph.id(i))
                    .cloned()
                    .ok_or_else(|| Error::InvalidParameter(format!("no estimate for node {:?}", graph.id(i))))
            })
            .collect::<Result<Vec<_>>>()?;
        NetworkEnv::new(graph, per_node)
    }

    pub fn with_noise(mut self, noise: NoiseChannel) -> Self {
        self.noise = noise;
        self
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    fn estimates_for(&self, nodes: &[usize], rng: &mut EpisodeRng) -> Vec<Pmf> {
        nodes
            .iter()
            .map(|&v| self.noise.apply(&self.node_estimates[v], &mut rng.noise))
            .collect()
    }
}

impl Environment for NetworkEnv {
    type State = NetEnvState;

    fn label(&self) -> &'static str {
        "network"
    }

    /// Seeds are `min(n0, |V|)` distinct nodes chosen uniformly.
    fn initial(&self, n0: usize, budget: u32, rng: &mut EpisodeRng) -> NetEnvState {
        let n = self.graph.num_nodes();
        let seeds: Vec<usize> = sample_indices(&mut rng.dynamics, n, n0.min(n)).into_vec();
        let mut recruited = vec![false; n];
        for &v in &seeds {
            recruited[v] = true;
        }
        let frontier_estimates = self.estimates_for(&seeds, rng);
        NetEnvState {
            remaining: budget,
            recruited,
            recruited_count: seeds.len(),
            frontier_nodes: seeds,
            frontier_estimates,
        }
    }

    fn remaining(&self, state: &NetEnvState) -> u32 {
        state.remaining
    }

    fn estimates<'s>(&self, state: &'s NetEnvState) -> &'s [Pmf] {
        &state.frontier_estimates
    }

    fn step(&self, state: &mut NetEnvState, action: &Action, rng: &mut EpisodeRng) -> Result<u32> {
        action.check_feasible(state.remaining, state.frontier_nodes.len())?;
        let mut next = Vec::new();
        for (&u, &k) in state.frontier_nodes.iter().zip(action.allocation.units()) {
            if k == 0 {
                continue;
            }
            let open: Vec<usize> = self
                .graph
                .neighbors(u)
                .iter()
                .copied()
                .filter(|&v| !state.recruited[v])
                .collect();
            let take = (k as usize).min(open.len());
            for j in sample_indices(&mut rng.dynamics, open.len(), take) {
                let v = open[j];
                state.recruited[v] = true;
                next.push(v);
            }
        }
        state.recruited_count += next.len();
        state.frontier_estimates = self.estimates_for(&next, rng);
        state.frontier_nodes = next;
        state.remaining -= action.round_budget;
        Ok(state.frontier_nodes.len() as u32)
    }
}

/// Default round cap: `10·b`, at least one.
pub fn default_round_cap(budget: u32) -> u32 {
    budget.saturating_mul(10).max(1)
}

/// Runs one episode: decide, step, repeat until the budget is spent, the
/// frontier empties, or `round_cap` rounds have been played.
pub fn run_episode<E: Environment>(
    env: &E,
    policy: &Policy,
    gamma: f64,
    n0: usize,
    budget: u32,
    round_cap: u32,
    seed: u64,
) -> Result<EpisodeResult> {
    let (result, _) = run_episode_with_state(env, policy, gamma, n0, budget, round_cap, seed)?;
    Ok(result)
}

/// Like [`run_episode`], also returning the final state.
pub fn run_episode_with_state<E: Environment>(
    env: &E,
    policy: &Policy,
    gamma: f64,
    n0: usize,
    budget: u32,
    round_cap: u32,
    seed: u64,
) -> Result<(EpisodeResult, E::State)> {
    if round_cap == 0 {
        return Err(Error::InvalidParameter("round cap must be at least 1".into()));
    }
    let mut rng = EpisodeRng::from_seed(seed);
    let mut state = env.initial(n0, budget, &mut rng);
    let mut recruits = Vec::new();
    let mut spend = Vec::new();
    let mut reward = 0.0;
    let mut weight = 1.0;
    let termination = loop {
        if env.remaining(&state) == 0 {
            break Termination::BudgetExhausted;
        }
        if env.estimates(&state).is_empty() {
            break Termination::FrontierEmpty;
        }
        if recruits.len() as u32 >= round_cap {
            break Termination::RoundCap;
        }
        let action = policy.decide(env.remaining(&state), env.estimates(&state))?;
        let n = env.step(&mut state, &action, &mut rng)?;
        reward += weight * n as f64;
        weight *= gamma;
        recruits.push(n);
        spend.push(action.round_budget);
    };
    Ok((
        EpisodeResult {
            per_round_recruits: recruits,
            per_round_spend: spend,
            discounted_reward: reward,
            termination,
        },
        state,
    ))
}

/// One batch configuration: a policy evaluated over `runs` seeded episodes.
#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub policy: Policy,
    pub gamma: f64,
    pub n0: usize,
    pub budget: u32,
    pub round_cap: u32,
    pub base_seed: u64,
    pub runs: usize,
}

impl BatchConfig {
    /// Seed of run `i`; shared across policies so they face the same draws
    /// for as long as their trajectories agree.
    pub fn seed(&self, i: usize) -> u64 {
        derive_seed(self.base_seed, i as u64)
    }
}

/// An episode with the configuration that produced it.
#[derive(Clone, Debug)]
pub struct EpisodeRow {
    pub env: &'static str,
    pub policy: String,
    pub param: String,
    pub gamma: f64,
    pub n0: usize,
    pub budget: u32,
    pub seed: u64,
    pub result: EpisodeResult,
}

/// Mean and standard error of the discounted reward over a set of episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub env: &'static str,
    pub policy: String,
    pub param: String,
    pub gamma: f64,
    pub n0: usize,
    pub budget: u32,
    pub runs: usize,
    pub mean_reward: f64,
    pub se_reward: f64,
    pub mean_recruits: f64,
    pub mean_spend: f64,
    pub mean_rounds: f64,
}

/// Sample mean and `sd/√count` (sample sd with `count − 1`; zero for one value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `config.runs` episodes; rows come back in run order whether or not
/// they were computed in parallel.
pub fn run_batch<E: Environment>(env: &E, config: &BatchConfig, parallel: bool) -> Result<Vec<EpisodeRow>> {
    let one = |i: usize| -> Result<EpisodeRow> {
        let seed = config.seed(i);
        let result = run_episode(
            env,
            &config.policy,
            config.gamma,
            config.n0,
            config.budget,
            config.round_cap,
            seed,
        )?;
        Ok(EpisodeRow {
            env: env.label(),
            policy: config.policy.spec().name().to_string(),
            param: config.policy.spec().param(),
            gamma: config.gamma,
            n0: config.n0,
            budget: config.budget,
            seed,
            result,
        })
    };
    if parallel {
        (0..config.runs).into_par_iter().map(one).collect()
    } else {
        (0..config.runs).map(one).collect()
    }
}

/// Summary of rows sharing one configuration (taken from the first row).
pub fn summarize(rows: &[EpisodeRow]) -> Result<Summary> {
    let first = rows.first().ok_or(Error::EmptyRecords)?;
    let col = |f: &dyn Fn(&EpisodeResult) -> f64| rows.iter().map(|r| f(&r.result)).collect::<Vec<f64>>();
    let (mean_reward, se_reward) = mean_and_se(&col(&|r| r.discounted_reward));
    let n = rows.len() as f64;
    Ok(Summary {
        env: first.env,
        policy: first.policy.clone(),
        param: first.param.clone(),
        gamma: first.gamma,
        n0: first.n0,
        budget: first.budget,
        runs: rows.len(),
        mean_reward,
        se_reward,
        mean_recruits: col(&|r| r.total_recruits() as f64).iter().sum::<f64>() / n,
        mean_spend: col(&|r| r.total_spend() as f64).iter().sum::<f64>() / n,
        mean_rounds: col(&|r| r.rounds() as f64).iter().sum::<f64>() / n,
    })
}

/// Writes episode rows under [`CSV_HEADER`].
pub fn write_episode_csv<W: Write>(out: W, rows: &[EpisodeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.env.to_string(),
            r.policy.clone(),
            r.param.clone(),
            r.gamma.to_string(),
            r.n0.to_string(),
            r.budget.to_string(),
            r.seed.to_string(),
            r.result.rounds().to_string(),
            r.result.total_spend().to_string(),
            r.result.total_recruits().to_string(),
            r.result.discounted_reward.to_string(),
            r.result.termination.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Writes summary rows under [`SUMMARY_HEADER`].
pub fn write_summary_csv<W: Write>(out: W, rows: &[Summary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER.split(',')).map_err(csv_err)?;
    for s in rows {
        w.write_record([
            s.env.to_string(),
            s.policy.clone(),
            s.param.clone(),
            s.gamma.to_string(),
            s.n0.to_string(),
            s.budget.to_string(),
            s.runs.to_string(),
            s.mean_reward.to_string(),
            s.se_reward.to_string(),
            s.mean_recruits.to_string(),
            s.mean_spend.to_string(),
            s.mean_rounds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv output: {e}"))
}
