use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stochalloc::sim::NoiseChannel;
use stochalloc::PolicySpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    #[default]
    Dist,
    Network,
}

/// Experiment manifest as stored on disk. Every field is optional so that
/// flags can fill or override it.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub env: Option<EnvKind>,
    pub budget: Option<u32>,
    pub gammas: Option<Vec<f64>>,
    pub initial_frontier_sizes: Option<Vec<usize>>,
    pub policies: Option<Vec<String>>,
    pub runs: Option<usize>,
    pub base_seed: Option<u64>,
    pub population: Option<PathBuf>,
    pub tables: Option<Vec<PathBuf>>,
    pub edges: Option<PathBuf>,
    pub node_estimates: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub noise: Option<String>,
    pub round_cap: Option<u32>,
    pub workers: Option<usize>,
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: ExperimentFile) -> Self {
        ExperimentFile {
            env: over.env.or(self.env),
            budget: over.budget.or(self.budget),
            gammas: over.gammas.or(self.gammas),
            initial_frontier_sizes: over.initial_frontier_sizes.or(self.initial_frontier_sizes),
            policies: over.policies.or(self.policies),
            runs: over.runs.or(self.runs),
            base_seed: over.base_seed.or(self.base_seed),
            population: over.population.or(self.population),
            tables: over.tables.or(self.tables),
            edges: over.edges.or(self.edges),
            node_estimates: over.node_estimates.or(self.node_estimates),
            out: over.out.or(self.out),
            noise: over.noise.or(self.noise),
            round_cap: over.round_cap.or(self.round_cap),
            workers: over.workers.or(self.workers),
        }
    }
}

/// Validated experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub budget: u32,
    pub gammas: Vec<f64>,
    pub initial_frontier_sizes: Vec<usize>,
    pub policies: Vec<PolicySpec>,
    pub runs: usize,
    pub base_seed: u64,
    pub population: Option<PathBuf>,
    pub tables: Vec<PathBuf>,
    pub edges: Option<PathBuf>,
    pub node_estimates: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub noise: NoiseChannel,
    pub round_cap: Option<u32>,
    pub workers: Option<usize>,
}

impl TryFrom<ExperimentFile> for ExperimentConfig {
    type Error = anyhow::Error;

    fn try_from(f: ExperimentFile) -> Result<Self> {
        let budget = f.budget.context("a budget is required (--budget)")?;
        if budget == 0 {
            bail!("budget must be at least 1");
        }
        let gammas = f.gammas.unwrap_or_else(|| vec![0.5, 0.7, 0.9]);
        if gammas.is_empty() {
            bail!("no discount factors given");
        }
        if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            bail!("discount factor {g} is outside (0, 1)");
        }
        let initial_frontier_sizes = f.initial_frontier_sizes.unwrap_or_else(|| vec![5, 10, 15]);
        if initial_frontier_sizes.is_empty() || initial_frontier_sizes.contains(&0) {
            bail!("initial frontier sizes must be non-empty and positive");
        }
        let policies = match f.policies {
            None => stochalloc::policy::policy_grid(),
            Some(list) => list
                .iter()
                .map(|s| s.parse::<PolicySpec>())
                .collect::<Result<Vec<_>, _>>()?,
        };
        if policies.is_empty() {
            bail!("no policies given");
        }
        let runs = f.runs.unwrap_or(30);
        if runs == 0 {
            bail!("runs must be at least 1");
        }
        if f.round_cap == Some(0) {
            bail!("round cap must be at least 1");
        }
        if f.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        let noise = match f.noise {
            None => NoiseChannel::Identity,
            Some(s) => s.parse()?,
        };
        Ok(ExperimentConfig {
            env: f.env.unwrap_or_default(),
            budget,
            gammas,
            initial_frontier_sizes,
            policies,
            runs,
            base_seed: f.base_seed.unwrap_or(0),
            population: f.population,
            tables: f.tables.unwrap_or_default(),
            edges: f.edges,
            node_estimates: f.node_estimates,
            out: f.out,
            noise,
            round_cap: f.round_cap,
            workers: f.workers,
        })
    }
}
