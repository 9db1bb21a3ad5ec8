//! Finite discrete distributions over referral counts and the weighted-mixture
//! population model built from them.
//!
//! A [`Pmf`] is stored densely over `0..=K` together with its survival table
//! `p(ℓ) = Pr(X ≥ ℓ)`, which is what every allocation routine consumes: the
//! marginal value of the ℓ-th unit given to a member is exactly `p(ℓ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on total mass accepted at construction.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// A finite distribution over `{0, 1, ..., K}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct Pmf {
    probs: Vec<f64>,
    /// `tail[ℓ] = Pr(X ≥ ℓ)` for `ℓ = 0..=K+1`.
    tail: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    probs: Vec<f64>,
}

impl TryFrom<PmfRepr> for Pmf {
    type Error = Error;

    fn try_from(repr: PmfRepr) -> Result<Self> {
        Pmf::new(repr.probs)
    }
}

impl From<Pmf> for PmfRepr {
    fn from(pmf: Pmf) -> Self {
        PmfRepr { probs: pmf.probs }
    }
}

impl Pmf {
    /// Builds a distribution from dense probabilities indexed by count.
    ///
    /// Rejects entries outside `[0, 1]` and totals further than
    /// [`MASS_TOLERANCE`] from one, then renormalizes. Trailing zeros are
    /// dropped so that `max_value` is the true support maximum.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no probabilities given".into()));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "probability at {j} is {p}, outside [0, 1]"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        while probs.len() > 1 && probs[probs.len() - 1] == 0.0 {
            probs.pop();
        }
        let tail = survival_table(&probs);
        Ok(Pmf { probs, tail })
    }

    /// Builds a distribution from `(value, probability)` pairs. Repeated
    /// values accumulate.
    pub fn from_sparse(entries: &[(usize, f64)]) -> Result<Self> {
        let max = entries
            .iter()
            .map(|&(v, _)| v)
            .max()
            .ok_or_else(|| Error::InvalidDistribution("no entries given".into()))?;
        let mut probs = vec![0.0; max + 1];
        for &(v, p) in entries {
            probs[v] += p;
        }
        Pmf::new(probs)
    }

    /// Point mass at `value`.
    pub fn point(value: usize) -> Self {
        let mut probs = vec![0.0; value + 1];
        probs[value] = 1.0;
        Pmf::new(probs).expect("point mass is a valid distribution")
    }

    /// Builds a distribution from survival probabilities `p(1), p(2), ...`.
    ///
    /// The sequence must lie in `[0, 1]` and be non-increasing.
    pub fn from_survival(survival: &[f64]) -> Result<Self> {
        let mut prev = 1.0;
        for (i, &p) in survival.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) || p > prev + 1e-15 {
                return Err(Error::InvalidDistribution(format!(
                    "survival value at level {} is {p}, not a valid non-increasing tail",
                    i + 1
                )));
            }
            prev = p;
        }
        let mut probs = Vec::with_capacity(survival.len() + 1);
        let mut above = 1.0;
        for &p in survival {
            probs.push((above - p).max(0.0));
            above = p;
        }
        probs.push(above);
        Pmf::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Largest value in the support, `K`.
    pub fn max_value(&self) -> usize {
        self.probs.len() - 1
    }

    /// `Pr(X = value)`.
    pub fn prob(&self, value: usize) -> f64 {
        self.probs.get(value).copied().unwrap_or(0.0)
    }

    /// `Pr(X ≥ level)`.
    pub fn survival(&self, level: usize) -> f64 {
        self.tail.get(level).copied().unwrap_or(0.0)
    }

    /// Survival table `p(0..=K+1)`; `p(0) = 1`, `p(K+1) = 0`.
    pub fn survival_table(&self) -> &[f64] {
        &self.tail
    }

    pub fn mean(&self) -> f64 {
        self.tail[1..].iter().sum()
    }

    /// Draws one value by inverting the survival table.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        // X ≥ ℓ exactly when u < p(ℓ), and p(0) = 1 > u.
        self.tail.partition_point(|&t| t > u) - 1
    }
}

fn survival_table(probs: &[f64]) -> Vec<f64> {
    let mut tail = vec![0.0; probs.len() + 1];
    let mut acc = 0.0;
    for j in (0..probs.len()).rev() {
        acc += probs[j];
        tail[j] = acc.min(1.0);
    }
    tail[0] = 1.0;
    tail
}

/// Half the L1 distance between two distributions over the union of supports.
pub fn tv_distance(d1: &Pmf, d2: &Pmf) -> f64 {
    let len = d1.probs.len().max(d2.probs.len());
    let l1: f64 = (0..len).map(|j| (d1.prob(j) - d2.prob(j)).abs()).sum();
    (0.5 * l1).min(1.0)
}

/// One mixture component.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub pmf: Pmf,
}

/// A finite weighted mixture of distributions; new frontier members draw their
/// distribution from it independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopulationRepr", into = "PopulationRepr")]
pub struct PopulationModel {
    components: Vec<Component>,
    mean: Pmf,
}

#[derive(Serialize, Deserialize)]
struct ComponentRepr {
    weight: f64,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PopulationRepr {
    components: Vec<ComponentRepr>,
}

impl TryFrom<PopulationRepr> for PopulationModel {
    type Error = Error;

    fn try_from(repr: PopulationRepr) -> Result<Self> {
        let parts = repr
            .components
            .into_iter()
            .map(|c| Ok((c.weight, Pmf::new(c.probs)?)))
            .collect::<Result<Vec<_>>>()?;
        PopulationModel::new(parts)
    }
}

impl From<PopulationModel> for PopulationRepr {
    fn from(pop: PopulationModel) -> Self {
        PopulationRepr {
            components: pop
                .components
                .into_iter()
                .map(|c| ComponentRepr {
                    weight: c.weight,
                    probs: c.pmf.probs,
                })
                .collect(),
        }
    }
}

impl PopulationModel {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Weights must be positive and sum to one within [`MASS_TOLERANCE`];
    /// they are renormalized exactly afterwards.
    pub fn new(parts: Vec<(f64, Pmf)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidPopulation("no components".into()));
        }
        if let Some((w, _)) = parts.iter().find(|(w, _)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidPopulation(format!(
                "component weight {w} is not positive"
            )));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPopulation(format!("weights sum to {total}")));
        }
        let components: Vec<Component> = parts
            .into_iter()
            .map(|(weight, pmf)| Component {
                weight: weight / total,
                pmf,
            })
            .collect();
        let mean = mixture_mean(&components)?;
        Ok(PopulationModel { components, mean })
    }

    /// Population whose members all share `pmf`.
    pub fn homogeneous(pmf: Pmf) -> Self {
        PopulationModel::new(vec![(1.0, pmf)]).expect("single component is valid")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// The mean distribution `D̄[j] = Σ_c w_c · pmf_c[j]`.
    pub fn mean_distribution(&self) -> &Pmf {
        &self.mean
    }

    /// `p̄(level)`, the survival function of a member drawn from the population.
    pub fn survival(&self, level: usize) -> f64 {
        self.mean.survival(level)
    }

    /// `g(k) = Σ_{ℓ=1}^{k} p̄(ℓ)`, the expected recruits from `k` units given
    /// to one member drawn from the population.
    pub fn prefix(&self, k: usize) -> f64 {
        (1..=k).map(|l| self.survival(l)).sum()
    }

    /// `g(0..=max)` in one pass.
    pub fn prefix_table(&self, max: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(max + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for l in 1..=max {
            acc += self.survival(l);
            out.push(acc);
        }
        out
    }

    /// Largest count any component can produce.
    pub fn max_value(&self) -> usize {
        self.mean.max_value()
    }

    /// Index of a component drawn by weight.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return i;
            }
        }
        self.components.len() - 1
    }

    /// Distribution of a fresh member drawn from the population.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Pmf {
        &self.components[self.sample_component(rng)].pmf
    }

    /// `E_{D~P} TV(D, D̄)`.
    pub fn heterogeneity(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * tv_distance(&c.pmf, &self.mean))
            .sum()
    }
}

fn mixture_mean(components: &[Component]) -> Result<Pmf> {
    let len = components.iter().map(|c| c.pmf.probs.len()).max().unwrap_or(1);
    let mut probs = vec![0.0; len];
    for c in components {
        for (j, &p) in c.pmf.probs.iter().enumerate() {
            probs[j] += c.weight * p;
        }
    }
    Pmf::new(probs)
}

/// Free-function form of [`Pmf::survival`].
pub fn survival(d: &Pmf, level: usize) -> f64 {
    d.survival(level)
}

/// Free-function form of [`PopulationModel::mean_distribution`].
pub fn mean_distribution(p: &PopulationModel) -> Pmf {
    p.mean_distribution().clone()
}

/// Free-function form of [`PopulationModel::survival`].
pub fn population_survival(p: &PopulationModel, level: usize) -> f64 {
    p.survival(level)
}

/// Free-function form of [`PopulationModel::prefix`].
pub fn population_prefix(p: &PopulationModel, k: usize) -> f64 {
    p.prefix(k)
}
