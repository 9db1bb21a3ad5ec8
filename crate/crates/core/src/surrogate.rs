//! Population-level surrogate value table and the round-budget selector built
//! on it.
//!
//! `U(r, n)` is the best discounted recruit count reachable with remaining
//! budget `r` and a frontier of `n` members whose distributions are unobserved
//! draws from the population. Each state scans every round budget `s ≤ r`,
//! scores the even allocation's immediate value plus the discounted
//! continuation over the exact next-frontier-size distribution, and keeps the
//! first maximizer.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::{Pmf, PopulationModel};
use crate::error::{Error, Result};
use crate::pgf::{greedy_frontier_dist, poly_mul_trunc, population_pgf, TruncatedPoly};
use crate::single_round::{even_params, Allocation, EvenParams, GreedyUnits};

/// Triangular table `U(r, n)` for `0 ≤ n ≤ r ≤ budget_cap`, stored r-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    budget_cap: u32,
    discount: f64,
    population_digest: String,
    values: Vec<f64>,
    /// First maximizing round budget for each entry (0 on the boundary).
    round_budgets: Vec<u32>,
}

#[inline]
fn tri_index(r: u32, n: u32) -> usize {
    let r = r as usize;
    r * (r + 1) / 2 + n as usize
}

impl ValueTable {
    pub fn budget_cap(&self) -> u32 {
        self.budget_cap
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn population_digest(&self) -> &str {
        &self.population_digest
    }

    /// Raw entry `U(r, n)`; requires `n ≤ r ≤ budget_cap`.
    pub fn get(&self, r: u32, n: u32) -> f64 {
        debug_assert!(n <= r && r <= self.budget_cap);
        self.values[tri_index(r, n)]
    }

    /// Round budget chosen for state `(r, n)` when the table was built.
    pub fn round_budget(&self, r: u32, n: u32) -> u32 {
        self.round_budgets[tri_index(r, n)]
    }

    /// `U(r, min(n, r))`. At most `r` members can receive a unit and members
    /// are exchangeable, so larger frontiers share the value of size `r`.
    pub fn lookup(&self, r: u32, n: usize) -> Result<f64> {
        if r > self.budget_cap {
            return Err(Error::BudgetOutOfRange {
                requested: r,
                cap: self.budget_cap,
            });
        }
        let n = n.min(r as usize) as u32;
        Ok(self.values[tri_index(r, n)])
    }

    /// SHA-256 over the header and every value's bit pattern.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.budget_cap.to_le_bytes());
        h.update(self.discount.to_le_bytes());
        h.update(self.population_digest.as_bytes());
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        for s in &self.round_budgets {
            h.update(s.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: ValueTable = serde_json::from_str(&text)?;
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        let entries = tri_index(self.budget_cap, self.budget_cap) + 1;
        if self.values.len() != entries || self.round_budgets.len() != entries {
            return Err(Error::InvalidParameter(format!(
                "table with budget cap {} needs {entries} entries, found {}",
                self.budget_cap,
                self.values.len()
            )));
        }
        check_discount(self.discount)
    }
}

/// SHA-256 of a population's canonical JSON form.
pub fn population_digest(p: &PopulationModel) -> String {
    let json = serde_json::to_string(p).expect("population serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub(crate) fn check_discount(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "discount {gamma} is outside (0, 1)"
        )));
    }
    Ok(())
}

/// Memoized powers `Ḡ_k(z)^e`, all truncated at one shared cap.
///
/// Coefficients below the cap are exact, so the transition vector for any
/// smaller round budget is recovered by merging the tail; one cache entry per
/// `(k, e)` serves every cap up to the shared one.
pub struct PowerCache {
    cap: usize,
    base: Vec<TruncatedPoly>,
    powers: HashMap<(usize, usize), TruncatedPoly>,
}

impl PowerCache {
    pub fn new(p: &PopulationModel, cap: usize) -> Self {
        let base = (0..=cap + 1)
            .map(|k| population_pgf(p, k).recap(cap.min(k)))
            .collect();
        PowerCache {
            cap,
            base,
            powers: HashMap::new(),
        }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// `Ḡ_k^e` at the shared cap, computing and storing the chain of lower
    /// powers as needed.
    pub fn power(&mut self, k: usize, e: usize) -> &TruncatedPoly {
        if !self.powers.contains_key(&(k, e)) {
            let value = if e == 0 || k == 0 {
                TruncatedPoly::one()
            } else {
                let start = (1..e).rev().find(|&j| self.powers.contains_key(&(k, j)));
                let (mut j, mut acc) = match start {
                    Some(j) => (j, self.powers[&(k, j)].clone()),
                    None => (1, self.base[k].clone()),
                };
                while j < e {
                    acc = poly_mul_trunc(&acc, &self.base[k], self.cap);
                    j += 1;
                    self.powers.entry((k, j)).or_insert_with(|| acc.clone());
                }
                acc
            };
            self.powers.insert((k, e), value);
        }
        &self.powers[&(k, e)]
    }

    /// `Pr(N_s^e = m)` for `m = 0..=s` with `n` members; `s` must not exceed the cap.
    pub fn transition(&mut self, n: usize, s: u32) -> Result<Vec<f64>> {
        let EvenParams { a, c } = even_params(s, n)?;
        let cap = s as usize;
        assert!(cap <= self.cap, "round budget {s} exceeds cache cap {}", self.cap);
        let low = self.power(a as usize, n - c as usize).recap(cap);
        let high = self.power(a as usize + 1, c as usize).recap(cap);
        Ok(poly_mul_trunc(&low, &high, cap).normalize().into_coeffs())
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Transition vectors `T(n, s)` for every `1 ≤ n ≤ b`, `0 ≤ s ≤ b`.
/// For `n > s` the even allocation gives one unit to `s` members regardless of
/// `n`, so those share one vector per `s`.
struct Transitions {
    /// `by_size[n - 1][s]` for `s ≥ n`.
    by_size: Vec<Vec<Vec<f64>>>,
    /// `spread[s]` for any `n > s`.
    spread: Vec<Vec<f64>>,
}

impl Transitions {
    fn build(p: &PopulationModel, b: u32, parallel: bool) -> Result<Self> {
        let mut cache = PowerCache::new(p, b as usize);
        // Fill the cache serially, then read it concurrently.
        for s in 0..=b {
            for n in 1..=b as usize + 1 {
                let EvenParams { a, c } = even_params(s, n)?;
                cache.power(a as usize, n - c as usize);
                cache.power(a as usize + 1, c as usize);
            }
        }
        let cache = cache;
        let read = |n: usize, s: u32| -> Vec<f64> {
            let EvenParams { a, c } = even_params(s, n).expect("n ≥ 1");
            let cap = s as usize;
            let low = cache.powers[&(a as usize, n - c as usize)].recap(cap);
            let high = cache.powers[&(a as usize + 1, c as usize)].recap(cap);
            poly_mul_trunc(&low, &high, cap).normalize().into_coeffs()
        };
        let row = |n: usize| -> Vec<Vec<f64>> { (n as u32..=b).map(|s| read(n, s)).collect() };
        let by_size: Vec<Vec<Vec<f64>>> = if parallel {
            (1..=b as usize).into_par_iter().map(row).collect()
        } else {
            (1..=b as usize).map(row).collect()
        };
        let spread = (0..=b).map(|s| read(s as usize + 1, s)).collect();
        Ok(Transitions { by_size, spread })
    }

    fn get(&self, n: usize, s: u32) -> &[f64] {
        if n > s as usize {
            &self.spread[s as usize]
        } else {
            &self.by_size[n - 1][s as usize - n]
        }
    }
}

/// Builds `U(r, n)` for all `0 ≤ n ≤ r ≤ b` on the calling thread.
pub fn compute_table(p: &PopulationModel, b: u32, gamma: f64) -> Result<ValueTable> {
    build_table(p, b, gamma, false)
}

/// As [`compute_table`], evaluating the states of each budget layer in
/// parallel. The result is bit-identical to the serial build.
pub fn compute_table_parallel(p: &PopulationModel, b: u32, gamma: f64) -> Result<ValueTable> {
    build_table(p, b, gamma, true)
}

fn build_table(p: &PopulationModel, b: u32, gamma: f64, parallel: bool) -> Result<ValueTable> {
    check_discount(gamma)?;
    let entries = tri_index(b, b) + 1;
    let mut values = vec![0.0; entries];
    let mut round_budgets = vec![0u32; entries];
    let prefix = p.prefix_table(b as usize + 1);
    let transitions = Transitions::build(p, b, parallel)?;

    for r in 1..=b {
        let state = |n: u32| -> (f64, u32) {
            let n_us = n as usize;
            // s = 0 recruits nobody and ends the process.
            let mut best = (0.0, 0u32);
            for s in 1..=r {
                let a = (s / n) as usize;
                let c = s - (s / n) * n;
                let immediate = n as f64 * prefix[a] + c as f64 * p.survival(a + 1);
                let rest = r - s;
                let row = tri_index(rest, 0);
                let t = transitions.get(n_us, s);
                let mut cont = 0.0;
                for (m, &pm) in t.iter().enumerate() {
                    if pm != 0.0 {
                        cont += pm * values[row + m.min(rest as usize)];
                    }
                }
                let v = immediate + gamma * cont;
                if v > best.0 {
                    best = (v, s);
                }
            }
            best
        };
        let layer: Vec<(f64, u32)> = if parallel {
            (1..=r).into_par_iter().map(state).collect()
        } else {
            (1..=r).map(state).collect()
        };
        let start = tri_index(r, 1);
        for (i, (v, s)) in layer.into_iter().enumerate() {
            values[start + i] = v;
            round_budgets[start + i] = s;
        }
    }

    Ok(ValueTable {
        budget_cap: b,
        discount: gamma,
        population_digest: population_digest(p),
        values,
        round_budgets,
    })
}

/// Outcome of the round-budget search.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundChoice {
    pub round_budget: u32,
    pub objective: f64,
    pub allocation: Allocation,
}

/// `Σ_m Pr(N = m)·(m + γ·U(r − s, m))` for the greedy allocation `alloc`.
pub fn surrogate_objective(
    table: &ValueTable,
    frontier: &[Pmf],
    alloc: &Allocation,
    r: u32,
    s: u32,
) -> Result<f64> {
    let dist = greedy_frontier_dist(frontier, alloc)?;
    let gamma = table.discount();
    let mut total = 0.0;
    for (m, &pm) in dist.iter().enumerate() {
        if pm != 0.0 {
            total += pm * (m as f64 + gamma * table.lookup(r - s, m)?);
        }
    }
    Ok(total)
}

/// Round budget maximizing the surrogate objective over `s = 0..=r`, where the
/// current round uses the greedy allocation under `frontier_estimates`. Ties go
/// to the smaller budget.
pub fn select_round_budget(table: &ValueTable, frontier_estimates: &[Pmf], r: u32) -> Result<RoundChoice> {
    if frontier_estimates.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    if r > table.budget_cap() {
        return Err(Error::BudgetOutOfRange {
            requested: r,
            cap: table.budget_cap(),
        });
    }
    let order: Vec<usize> = GreedyUnits::new(frontier_estimates)
        .take(r as usize)
        .map(|(member, _)| member)
        .collect();
    let mut alloc = Allocation::zeros(frontier_estimates.len());
    let mut best = RoundChoice {
        round_budget: 0,
        objective: 0.0,
        allocation: alloc.clone(),
    };
    for s in 1..=r {
        if let Some(&member) = order.get(s as usize - 1) {
            alloc.0[member] += 1;
        }
        let objective = surrogate_objective(table, frontier_estimates, &alloc, r, s)?;
        if objective > best.objective {
            best = RoundChoice {
                round_budget: s,
                objective,
                allocation: alloc.clone(),
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::next_frontier_dist;
    use crate::single_round::greedy_allocate;

    fn delta_one() -> PopulationModel {
        PopulationModel::homogeneous(Pmf::point(1))
    }

    #[test]
    fn zero_budget_table() {
        let t = compute_table(&delta_one(), 0, 0.5).unwrap();
        assert_eq!(t.budget_cap(), 0);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.lookup(0, 7).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_worked_values() {
        let t = compute_table(&delta_one(), 3, 0.5).unwrap();
        assert_eq!(t.get(1, 1), 1.0);
        assert_eq!(t.get(2, 1), 1.5);
        assert_eq!(t.get(3, 1), 1.75);
        assert_eq!(t.round_budget(2, 1), 1);
        assert_eq!(t.lookup(1, 5).unwrap(), 1.0);
        assert_eq!(t.lookup(3, 0).unwrap(), 0.0);
        assert!(matches!(t.lookup(4, 1), Err(Error::BudgetOutOfRange { .. })));
    }

    #[test]
    fn rejects_bad_discount() {
        assert!(compute_table(&delta_one(), 3, 1.0).is_err());
        assert!(compute_table(&delta_one(), 3, 0.0).is_err());
    }

    #[test]
    fn cached_transitions_match_direct_powers() {
        let p = PopulationModel::new(vec![
            (0.3, Pmf::new(vec![0.2, 0.3, 0.1, 0.4]).unwrap()),
            (0.7, Pmf::new(vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.1]).unwrap()),
        ])
        .unwrap();
        let mut cache = PowerCache::new(&p, 14);
        for n in 1..=9 {
            for s in 0..=14 {
                let direct = next_frontier_dist(&p, n, s).unwrap();
                let cached = cache.transition(n, s).unwrap();
                assert_eq!(direct.len(), cached.len());
                for (a, b) in direct.iter().zip(&cached) {
                    assert!((a - b).abs() < 1e-13, "n={n} s={s}");
                }
            }
        }
    }

    #[test]
    fn parallel_build_is_bit_identical() {
        let p = PopulationModel::new(vec![
            (0.5, Pmf::new(vec![0.3, 0.3, 0.4]).unwrap()),
            (0.5, Pmf::new(vec![0.6, 0.0, 0.2, 0.2]).unwrap()),
        ])
        .unwrap();
        let a = compute_table(&p, 25, 0.7).unwrap();
        let b = compute_table_parallel(&p, 25, 0.7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        assert_eq!(a, compute_table(&p, 25, 0.7).unwrap());
    }

    #[test]
    fn selector_examples() {
        let t = compute_table(&delta_one(), 4, 0.5).unwrap();
        let choice = select_round_budget(&t, &[Pmf::point(1)], 2).unwrap();
        assert_eq!(choice.round_budget, 1);
        assert!((choice.objective - 1.5).abs() < 1e-15);
        let at_two =
            surrogate_objective(&t, &[Pmf::point(1)], &greedy_allocate(&[Pmf::point(1)], 2), 2, 2).unwrap();
        assert_eq!(at_two, 1.0);

        let coin = Pmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(select_round_budget(&t, &[coin], 1).unwrap().round_budget, 1);

        let dead = vec![Pmf::point(0), Pmf::point(0)];
        assert_eq!(select_round_budget(&t, &dead, 4).unwrap().round_budget, 0);

        assert!(matches!(
            select_round_budget(&t, &[], 2),
            Err(Error::EmptyFrontier)
        ));
        assert!(select_round_budget(&t, &[Pmf::point(1)], 9).is_err());
    }

    #[test]
    fn table_round_trips_through_json() {
        let t = compute_table(&delta_one(), 6, 0.3).unwrap();
        let dir = std::env::temp_dir().join(format!("stochalloc-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.json");
        t.save(&path).unwrap();
        let back = ValueTable::load(&path).unwrap();
        assert_eq!(back.checksum(), t.checksum());
        std::fs::remove_dir_all(&dir).ok();
    }
}
