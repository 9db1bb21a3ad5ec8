//! Round-by-round policies: constant per-member allocation, greedy with a
//! fixed or remainder-proportional round budget, and the surrogate planner.
//!
//! Policies only ever see the frontier *estimates*; realized referral counts
//! are drawn after the action is fixed.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dist::Pmf;
use crate::error::{Error, Result};
use crate::single_round::{greedy_allocate, Allocation};
use crate::surrogate::{select_round_budget, ValueTable};

/// A policy family and its parameter. Parses from `const:3`, `greedy:0.2`,
/// `greedyrem:0.5`, `surrogate`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicySpec {
    /// `k` units to each member in frontier order while budget lasts.
    Const { k: u32 },
    /// Greedy allocation of `⌊α·b⌋` units per round (at least one).
    Greedy { alpha: f64 },
    /// Greedy allocation of `⌊α·r⌋` units per round (at least one).
    GreedyRemainder { alpha: f64 },
    /// Round budget from the surrogate table, greedy allocation within it.
    Surrogate,
}

impl PolicySpec {
    pub fn constant(k: u32) -> Result<Self> {
        PolicySpec::Const { k }.validated()
    }

    pub fn greedy(alpha: f64) -> Result<Self> {
        PolicySpec::Greedy { alpha }.validated()
    }

    pub fn greedy_remainder(alpha: f64) -> Result<Self> {
        PolicySpec::GreedyRemainder { alpha }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            PolicySpec::Const { k: 0 } => Err(Error::InvalidPolicy("const needs k ≥ 1".into())),
            PolicySpec::Greedy { alpha } | PolicySpec::GreedyRemainder { alpha }
                if !(alpha > 0.0 && alpha <= 1.0) =>
            {
                Err(Error::InvalidPolicy(format!("alpha {alpha} is outside (0, 1]")))
            }
            spec => Ok(spec),
        }
    }

    /// Family name as used in CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Const { .. } => "const",
            PolicySpec::Greedy { .. } => "greedy",
            PolicySpec::GreedyRemainder { .. } => "greedyrem",
            PolicySpec::Surrogate => "surrogate",
        }
    }

    /// Parameter as a string; empty for the surrogate.
    pub fn param(&self) -> String {
        match self {
            PolicySpec::Const { k } => k.to_string(),
            PolicySpec::Greedy { alpha } | PolicySpec::GreedyRemainder { alpha } => alpha.to_string(),
            PolicySpec::Surrogate => String::new(),
        }
    }

    pub fn is_surrogate(&self) -> bool {
        matches!(self, PolicySpec::Surrogate)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Surrogate => f.write_str("surrogate"),
            other => write!(f, "{}:{}", other.name(), other.param()),
        }
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), Some(p.trim())),
            None => (s, None),
        };
        let bad = |what: &str| Error::InvalidPolicy(format!("{s:?}: {what}"));
        match (name.to_ascii_lowercase().as_str(), param) {
            ("surrogate", None) => Ok(PolicySpec::Surrogate),
            ("const", Some(p)) => {
                PolicySpec::constant(p.parse().map_err(|_| bad("k must be a positive integer"))?)
            }
            ("greedy", Some(p)) => PolicySpec::greedy(p.parse().map_err(|_| bad("alpha must be a number"))?),
            ("greedyrem", Some(p)) => {
                PolicySpec::greedy_remainder(p.parse().map_err(|_| bad("alpha must be a number"))?)
            }
            _ => Err(bad("expected const:K, greedy:A, greedyrem:A or surrogate")),
        }
    }
}

/// The baseline grid plus the surrogate: `Const(k)` for `k ∈ {2,3,5,10}`, then
/// `Greedy(α)` and `GreedyRemainder(α)` for `α ∈ {0.1,0.2,0.5,1.0}`.
pub fn policy_grid() -> Vec<PolicySpec> {
    const KS: [u32; 4] = [2, 3, 5, 10];
    const ALPHAS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];
    let mut grid: Vec<PolicySpec> = KS.iter().map(|&k| PolicySpec::Const { k }).collect();
    grid.extend(ALPHAS.iter().map(|&alpha| PolicySpec::Greedy { alpha }));
    grid.extend(ALPHAS.iter().map(|&alpha| PolicySpec::GreedyRemainder { alpha }));
    grid.push(PolicySpec::Surrogate);
    grid
}

/// Round budget and per-member units for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub round_budget: u32,
    pub allocation: Allocation,
}

impl Action {
    pub fn check_feasible(&self, remaining: u32, frontier_len: usize) -> Result<()> {
        if self.allocation.len() != frontier_len {
            return Err(Error::InfeasibleAction(format!(
                "allocation covers {} members, frontier has {frontier_len}",
                self.allocation.len()
            )));
        }
        if self.allocation.total() > self.round_budget || self.round_budget > remaining {
            return Err(Error::InfeasibleAction(format!(
                "allocated {} of round budget {} with {remaining} remaining",
                self.allocation.total(),
                self.round_budget
            )));
        }
        Ok(())
    }
}

/// `⌊α·x⌋`, at least one. The small offset keeps products such as `0.7·10`
/// from flooring to 6.
fn fraction_of(alpha: f64, x: u32) -> u32 {
    ((alpha * x as f64 + 1e-9).floor() as u32).max(1)
}

/// A policy ready to act: its spec, the episode's total budget, and for the
/// surrogate a value table.
#[derive(Clone, Debug)]
pub struct Policy {
    spec: PolicySpec,
    total_budget: u32,
    table: Option<Arc<ValueTable>>,
}

impl Policy {
    pub fn new(spec: PolicySpec, total_budget: u32, table: Option<Arc<ValueTable>>) -> Result<Self> {
        let spec = spec.validated()?;
        if spec.is_surrogate() {
            let t = table
                .as_ref()
                .ok_or_else(|| Error::InvalidPolicy("surrogate policy needs a value table".into()))?;
            if t.budget_cap() < total_budget {
                return Err(Error::BudgetOutOfRange {
                    requested: total_budget,
                    cap: t.budget_cap(),
                });
            }
        }
        Ok(Policy {
            spec,
            total_budget,
            table,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn total_budget(&self) -> u32 {
        self.total_budget
    }

    pub fn table(&self) -> Option<&ValueTable> {
        self.table.as_deref()
    }

    /// Chooses the action for remaining budget `remaining` given frontier
    /// estimates.
    pub fn decide(&self, remaining: u32, frontier_estimates: &[Pmf]) -> Result<Action> {
        if frontier_estimates.is_empty() {
            return Err(Error::EmptyFrontier);
        }
        let n = frontier_estimates.len();
        match self.spec {
            PolicySpec::Const { k } => {
                let mut left = remaining;
                let units = (0..n)
                    .map(|_| {
                        let give = k.min(left);
                        left -= give;
                        give
                    })
                    .collect::<Vec<_>>();
                let allocation = Allocation(units);
                Ok(Action {
                    round_budget: allocation.total(),
                    allocation,
                })
            }
            PolicySpec::Greedy { alpha } => Ok(greedy_action(
                frontier_estimates,
                fraction_of(alpha, self.total_budget).min(remaining),
            )),
            PolicySpec::GreedyRemainder { alpha } => Ok(greedy_action(
                frontier_estimates,
                fraction_of(alpha, remaining).min(remaining),
            )),
            PolicySpec::Surrogate => {
                let table = self.table.as_ref().expect("checked in Policy::new");
                let choice = select_round_budget(table, frontier_estimates, remaining)?;
                Ok(Action {
                    round_budget: choice.round_budget,
                    allocation: choice.allocation,
                })
            }
        }
    }
}

fn greedy_action(frontier: &[Pmf], s: u32) -> Action {
    Action {
        round_budget: s,
        allocation: greedy_allocate(frontier, s),
    }
}

/// Free-function form of [`Policy::decide`].
pub fn decide(policy: &Policy, remaining: u32, frontier_estimates: &[Pmf]) -> Result<Action> {
    policy.decide(remaining, frontier_estimates)
}
