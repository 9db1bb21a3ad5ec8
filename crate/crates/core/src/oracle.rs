//! Exhaustive Bellman evaluation for tiny instances.
//!
//! Computes the optimal value `V(r, D_{1:n})` of the full problem, where the
//! state is the realized list of frontier distributions, by enumerating every
//! round budget, every allocation (or only the greedy one), every joint
//! referral outcome, and every composition of the next frontier drawn from the
//! population. Nothing here touches generating functions or the surrogate table,
//! so it serves as an independent reference for both.
//!
//! Cost grows exponentially; keep budgets at 5 or below and supports small.

use std::collections::HashMap;

use crate::dist::{Pmf, PopulationModel};
use crate::error::Result;
use crate::single_round::{for_each_allocation, greedy_allocate, Allocation};
use crate::surrogate::{check_discount, select_round_budget, ValueTable};

/// Which allocations the inner maximization ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AllocationRule {
    /// Every allocation with `Σk ≤ s`.
    Exhaustive,
    /// Only the greedy allocation for each `s`.
    Greedy,
}

pub struct ExactBellman<'a> {
    population: &'a PopulationModel,
    gamma: f64,
    rule: AllocationRule,
    states: HashMap<(u32, Vec<usize>), f64>,
    continuations: HashMap<(u32, usize), f64>,
}

impl<'a> ExactBellman<'a> {
    pub fn new(population: &'a PopulationModel, gamma: f64, rule: AllocationRule) -> Result<Self> {
        check_discount(gamma)?;
        Ok(ExactBellman {
            population,
            gamma,
            rule,
            states: HashMap::new(),
            continuations: HashMap::new(),
        })
    }

    /// Optimal value from remaining budget `r` and an observed frontier.
    pub fn value(&mut self, r: u32, frontier: &[Pmf]) -> f64 {
        self.best_action(r, frontier).1
    }

    /// `(s*, V)`: the smallest optimal round budget and the optimal value.
    pub fn best_action(&mut self, r: u32, frontier: &[Pmf]) -> (u32, f64) {
        if r == 0 || frontier.is_empty() {
            return (0, 0.0);
        }
        let mut best = (0, 0.0);
        for s in 1..=r {
            let v = self.round_budget_value(r, frontier, s);
            if v > best.1 + 1e-15 {
                best = (s, v);
            }
        }
        best
    }

    /// `J(s; r, D)`: value of spending round budget `s` now (best allocation
    /// under the configured rule) and acting optimally afterwards.
    pub fn round_budget_value(&mut self, r: u32, frontier: &[Pmf], s: u32) -> f64 {
        match self.rule {
            AllocationRule::Greedy => {
                let alloc = greedy_allocate(frontier, s);
                self.allocation_value(r, frontier, s, &alloc)
            }
            AllocationRule::Exhaustive => {
                let mut allocs = Vec::new();
                for_each_allocation(frontier.len(), s, |k| allocs.push(Allocation(k.to_vec())));
                allocs
                    .iter()
                    .map(|k| self.allocation_value(r, frontier, s, k))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Value of committing round budget `s` with allocation `alloc` (evaluated
    /// under the true `frontier`) followed by optimal play.
    pub fn allocation_value(&mut self, r: u32, frontier: &[Pmf], s: u32, alloc: &Allocation) -> f64 {
        let law = recruit_law(frontier, alloc.units());
        law.iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| p * (m as f64 + self.gamma * self.continuation(r - s, m)))
            .sum()
    }

    /// `E_{D'~P^m}[V(r, D'_{1:m})]`.
    pub fn continuation(&mut self, r: u32, m: usize) -> f64 {
        if r == 0 || m == 0 {
            return 0.0;
        }
        if let Some(&v) = self.continuations.get(&(r, m)) {
            return v;
        }
        let weights: Vec<f64> = self.population.components().iter().map(|c| c.weight).collect();
        let mut total = 0.0;
        for (counts, prob) in multisets(&weights, m) {
            total += prob * self.component_value(r, counts);
        }
        self.continuations.insert((r, m), total);
        total
    }

    fn component_value(&mut self, r: u32, counts: Vec<usize>) -> f64 {
        let key = (r, counts);
        if let Some(&v) = self.states.get(&key) {
            return v;
        }
        let frontier: Vec<Pmf> = key
            .1
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(self.population.components()[c].pmf.clone(), k))
            .collect();
        let v = self.value(r, &frontier);
        self.states.insert(key, v);
        v
    }
}

/// Law of `Σ_i min{k_i, X_i}` by walking every joint outcome.
pub fn recruit_law(frontier: &[Pmf], units: &[u32]) -> Vec<f64> {
    let cap: u32 = units.iter().sum();
    let mut law = vec![0.0; cap as usize + 1];
    fn walk(i: usize, prob: f64, acc: u32, frontier: &[Pmf], units: &[u32], law: &mut [f64]) {
        if i == frontier.len() {
            law[acc as usize] += prob;
            return;
        }
        if units[i] == 0 {
            walk(i + 1, prob, acc, frontier, units, law);
            return;
        }
        for x in 0..=frontier[i].max_value() {
            let p = frontier[i].prob(x);
            if p > 0.0 {
                walk(
                    i + 1,
                    prob * p,
                    acc + units[i].min(x as u32),
                    frontier,
                    units,
                    law,
                );
            }
        }
    }
    walk(0, 1.0, 0, frontier, units, &mut law);
    law
}

/// Exact value of running the surrogate policy (round budget from `table`,
/// greedy allocation) against the true dynamics. The first round acts on
/// `estimates`; later arrivals are seen exactly. Arrival orders are enumerated
/// in full, so keep `r` at 4 or below.
pub fn surrogate_policy_value(
    table: &ValueTable,
    truth: &PopulationModel,
    gamma: f64,
    r: u32,
    frontier: &[Pmf],
    estimates: &[Pmf],
) -> Result<f64> {
    check_discount(gamma)?;
    if r == 0 || frontier.is_empty() {
        return Ok(0.0);
    }
    let choice = select_round_budget(table, estimates, r)?;
    if choice.round_budget == 0 {
        return Ok(0.0);
    }
    let rest = r - choice.round_budget;
    let comps = truth.components();
    let mut value = 0.0;
    for (m, &p) in recruit_law(frontier, choice.allocation.units())
        .iter()
        .enumerate()
    {
        if p == 0.0 {
            continue;
        }
        let mut cont = 0.0;
        if m > 0 && rest > 0 {
            for code in 0..comps.len().pow(m as u32) {
                let (mut c, mut prob, mut next) = (code, 1.0, Vec::with_capacity(m));
                for _ in 0..m {
                    let j = c % comps.len();
                    c /= comps.len();
                    prob *= comps[j].weight;
                    next.push(comps[j].pmf.clone());
                }
                cont += prob * surrogate_policy_value(table, truth, gamma, rest, &next, &next)?;
            }
        }
        value += p * (m as f64 + gamma * cont);
    }
    Ok(value)
}

/// All count vectors over `weights.len()` categories summing to `m`, with
/// their multinomial probabilities.
fn multisets(weights: &[f64], m: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut counts = vec![0; weights.len()];
    fn rec(
        i: usize,
        left: usize,
        counts: &mut Vec<usize>,
        weights: &[f64],
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        if i + 1 == weights.len() {
            counts[i] = left;
            let total: usize = counts.iter().sum();
            let mut coef = ln_factorial(total);
            let mut lp = 0.0;
            for (c, &k) in counts.iter().enumerate() {
                coef -= ln_factorial(k);
                if k > 0 {
                    lp += k as f64 * weights[c].ln();
                }
            }
            out.push((counts.clone(), (coef + lp).exp()));
            return;
        }
        for k in 0..=left {
            counts[i] = k;
            rec(i + 1, left - k, counts, weights, out);
        }
    }
    rec(0, m, &mut counts, weights, &mut out);
    out
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_probabilities_sum_to_one() {
        let w = [0.2, 0.5, 0.3];
        for m in 0..6 {
            let total: f64 = multisets(&w, m).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_values() {
        let p = PopulationModel::homogeneous(Pmf::point(1));
        let mut o = ExactBellman::new(&p, 0.5, AllocationRule::Exhaustive).unwrap();
        let f = [Pmf::point(1)];
        assert_eq!(o.value(1, &f), 1.0);
        assert_eq!(o.value(2, &f), 1.5);
        assert_eq!(o.value(3, &f), 1.75);
        assert_eq!(o.best_action(2, &f).0, 1);
    }

    #[test]
    fn exhaustive_and_greedy_rules_agree_with_table() {
        use crate::surrogate::compute_table;
        let coin = Pmf::new(vec![0.3, 0.3, 0.4]).unwrap();
        let p = PopulationModel::homogeneous(coin);
        for gamma in [0.3, 0.5, 0.9] {
            let table = compute_table(&p, 4, gamma).unwrap();
            let mut ex = ExactBellman::new(&p, gamma, AllocationRule::Exhaustive).unwrap();
            let mut gr = ExactBellman::new(&p, gamma, AllocationRule::Greedy).unwrap();
            for r in 0..=4 {
                for n in 0..=r as usize {
                    let want = table.get(r, n as u32);
                    assert!((ex.continuation(r, n) - want).abs() < 1e-12);
                    assert!((gr.continuation(r, n) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn surrogate_policy_on_point_mass() {
        use crate::surrogate::compute_table;
        let p = PopulationModel::homogeneous(Pmf::point(1));
        let table = compute_table(&p, 3, 0.5).unwrap();
        let f = [Pmf::point(1)];
        let v = surrogate_policy_value(&table, &p, 0.5, 3, &f, &f).unwrap();
        assert_eq!(v, 1.75);
    }

    #[test]
    fn recruit_law_coin_pair() {
        let coin = Pmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(recruit_law(&[coin.clone(), coin], &[1, 1]), vec![0.25, 0.5, 0.25]);
    }
}
