//! Single-round allocation over a realized frontier.
//!
//! By the marginal decomposition, the expected recruits of an allocation `k`
//! equal `Σ_i Σ_{ℓ=1}^{k_i} p_i(ℓ)`. Each member's marginals are non-increasing,
//! so taking the largest available marginal one unit at a time is optimal.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::dist::{Pmf, PopulationModel};
use crate::error::{Error, Result};

/// Units given to each frontier member, in frontier order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation(pub Vec<u32>);

impl Allocation {
    pub fn zeros(n: usize) -> Self {
        Allocation(vec![0; n])
    }

    pub fn units(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl From<Vec<u32>> for Allocation {
    fn from(units: Vec<u32>) -> Self {
        Allocation(units)
    }
}

/// Parameters of the even allocation: `a = ⌊s/n⌋` units each, `c` members get one more.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvenParams {
    pub a: u32,
    pub c: u32,
}

fn check_lengths(alloc: &Allocation, frontier: &[Pmf]) -> Result<()> {
    if alloc.len() != frontier.len() {
        return Err(Error::LengthMismatch {
            expected: frontier.len(),
            found: alloc.len(),
        });
    }
    Ok(())
}

/// `E[Σ_i min{k_i, X_i}]` via survival sums.
pub fn expected_reward(alloc: &Allocation, frontier: &[Pmf]) -> Result<f64> {
    check_lengths(alloc, frontier)?;
    Ok(alloc
        .units()
        .iter()
        .zip(frontier)
        .map(|(&k, d)| (1..=k as usize).map(|l| d.survival(l)).sum::<f64>())
        .sum())
}

#[derive(Debug)]
struct Candidate {
    marginal: f64,
    units: u32,
    member: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap order: larger marginal first, then fewer units already held,
    // then lower member index.
    fn cmp(&self, other: &Self) -> Ordering {
        self.marginal
            .total_cmp(&other.marginal)
            .then_with(|| other.units.cmp(&self.units))
            .then_with(|| other.member.cmp(&self.member))
    }
}

/// Unit-by-unit greedy choices over a frontier.
///
/// Each item is `(member, marginal)` for the next unit. Iteration ends once
/// every remaining marginal is zero, so the sequence length is the number of
/// useful slots. Ties on the marginal go to the member holding fewer units,
/// then to the lowest index; on exchangeable frontiers this reproduces the
/// even allocation.
pub struct GreedyUnits<'a> {
    frontier: &'a [Pmf],
    heap: BinaryHeap<Candidate>,
}

impl<'a> GreedyUnits<'a> {
    pub fn new(frontier: &'a [Pmf]) -> Self {
        let heap = frontier
            .iter()
            .enumerate()
            .map(|(member, d)| Candidate {
                marginal: d.survival(1),
                units: 0,
                member,
            })
            .collect();
        GreedyUnits { frontier, heap }
    }
}

impl Iterator for GreedyUnits<'_> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let top = self.heap.pop()?;
        if top.marginal <= 0.0 {
            self.heap.clear();
            return None;
        }
        let units = top.units + 1;
        self.heap.push(Candidate {
            marginal: self.frontier[top.member].survival(units as usize + 1),
            units,
            member: top.member,
        });
        Some((top.member, top.marginal))
    }
}

/// Greedy allocation of at most `s` units. Units with zero marginal value are
/// left unallocated.
pub fn greedy_allocate(frontier: &[Pmf], s: u32) -> Allocation {
    let mut alloc = Allocation::zeros(frontier.len());
    for (member, _) in GreedyUnits::new(frontier).take(s as usize) {
        alloc.0[member] += 1;
    }
    alloc
}

/// Guard on the number of allocations [`brute_force_allocate`] will visit.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Number of vectors in `ℕⁿ` with entries summing to at most `s`, i.e. `C(s+n, n)`.
pub fn count_allocations(n: usize, s: u32) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = acc.saturating_mul(s as u128 + i) / i;
    }
    acc
}

/// Calls `visit` on every allocation of `n` members with total at most `s`,
/// in lexicographic order.
pub fn for_each_allocation(n: usize, s: u32, mut visit: impl FnMut(&[u32])) {
    fn rec(k: &mut Vec<u32>, i: usize, left: u32, visit: &mut dyn FnMut(&[u32])) {
        if i == k.len() {
            visit(k);
            return;
        }
        for v in 0..=left {
            k[i] = v;
            rec(k, i + 1, left - v, visit);
        }
        k[i] = 0;
    }
    let mut k = vec![0; n];
    rec(&mut k, 0, s, &mut visit);
}

/// Exhaustive maximizer of [`expected_reward`] over allocations with `Σk ≤ s`.
/// The first maximizer in lexicographic order is returned.
pub fn brute_force_allocate(frontier: &[Pmf], s: u32) -> Result<(Allocation, f64)> {
    let count = count_allocations(frontier.len(), s);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut best = (Allocation::zeros(frontier.len()), 0.0);
    for_each_allocation(frontier.len(), s, |k| {
        let value: f64 = k
            .iter()
            .zip(frontier)
            .map(|(&ki, d)| (1..=ki as usize).map(|l| d.survival(l)).sum::<f64>())
            .sum();
        if value > best.1 {
            best = (Allocation(k.to_vec()), value);
        }
    });
    Ok(best)
}

pub fn even_params(s: u32, n: usize) -> Result<EvenParams> {
    if n == 0 {
        return Err(Error::ZeroFrontierSize);
    }
    let n = n as u64;
    let a = s as u64 / n;
    Ok(EvenParams {
        a: a as u32,
        c: (s as u64 - a * n) as u32,
    })
}

/// Population-level single-round value `v̄_s(n) = n·g(a) + c·p̄(a+1)`.
pub fn even_value(p: &PopulationModel, s: u32, n: usize) -> Result<f64> {
    let EvenParams { a, c } = even_params(s, n)?;
    Ok(n as f64 * p.prefix(a as usize) + c as f64 * p.survival(a as usize + 1))
}
