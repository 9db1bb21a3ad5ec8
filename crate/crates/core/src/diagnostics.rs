//! Robustness quantities: how much acting on estimated distributions can cost.
//!
//! The single-round bound sums survival-table discrepancies over the first `s`
//! levels; the multi-round report splits the error into frontier, population
//! and heterogeneity terms.

use serde::{Deserialize, Serialize};

use crate::dist::{tv_distance, Pmf, PopulationModel};
use crate::error::{Error, Result};
use crate::single_round::{
    count_allocations, expected_reward, for_each_allocation, greedy_allocate, ENUMERATION_LIMIT,
};
use crate::surrogate::check_discount;

fn check_lengths(truth: &[Pmf], estimates: &[Pmf]) -> Result<()> {
    if truth.len() != estimates.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: estimates.len(),
        });
    }
    Ok(())
}

/// `Σ_i Σ_{ℓ=1..s} |p_{D_i}(ℓ) − p_{D̂_i}(ℓ)|`.
pub fn single_round_bound(truth: &[Pmf], estimates: &[Pmf], s: u32) -> Result<f64> {
    check_lengths(truth, estimates)?;
    Ok(truth
        .iter()
        .zip(estimates)
        .map(|(d, e)| {
            (1..=s as usize)
                .map(|l| (d.survival(l) - e.survival(l)).abs())
                .sum::<f64>()
        })
        .fold(0.0, |a, b| a + b))
}

/// True optimum minus the true value of greedy run on the estimates.
pub fn greedy_regret(truth: &[Pmf], estimates: &[Pmf], s: u32) -> Result<f64> {
    check_lengths(truth, estimates)?;
    let best = expected_reward(&greedy_allocate(truth, s), truth)?;
    let chosen = expected_reward(&greedy_allocate(estimates, s), truth)?;
    Ok(best - chosen)
}

/// Largest regret over all allocations that are optimal for the estimates
/// (within `1e-12`). Unlike [`greedy_regret`] this does not depend on how ties
/// among estimate-optimal allocations are broken.
pub fn worst_case_regret(truth: &[Pmf], estimates: &[Pmf], s: u32) -> Result<f64> {
    check_lengths(truth, estimates)?;
    let count = count_allocations(truth.len(), s);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let est_best = expected_reward(&greedy_allocate(estimates, s), estimates)?;
    let true_best = expected_reward(&greedy_allocate(truth, s), truth)?;
    let mut worst = f64::INFINITY;
    for_each_allocation(truth.len(), s, |k| {
        let est: f64 = k.iter().zip(estimates).map(|(&k, e)| marginal_sum(e, k)).sum();
        if est >= est_best - 1e-12 {
            let v: f64 = k.iter().zip(truth).map(|(&k, d)| marginal_sum(d, k)).sum();
            worst = worst.min(v);
        }
    });
    Ok(true_best - worst)
}

fn marginal_sum(d: &Pmf, k: u32) -> f64 {
    (1..=k as usize).map(|l| d.survival(l)).sum()
}

/// Two-member instance on which the single-round bound holds with equality.
#[derive(Clone, Debug, PartialEq)]
pub struct TightnessInstance {
    pub truth: [Pmf; 2],
    pub estimates: [Pmf; 2],
    pub s: u32,
}

/// Member 1 has `p₁(ℓ) = x`, member 2 has `p₂(ℓ) = x − β` for `ℓ ≤ s`; the
/// estimates move both by `α = β/2` toward each other so they coincide at
/// `x − β/2`, and an estimate-optimal allocation may put every unit on the
/// worse member, losing `s·β`.
pub fn tightness_instance(s: u32, x: f64, beta: f64) -> Result<TightnessInstance> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} is outside (0, 1]")));
    }
    if !(0.0..=x).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} is outside [0, x]"
        )));
    }
    let alpha = beta / 2.0;
    let at_s = |q: f64| Pmf::from_sparse(&[(0, 1.0 - q), (s as usize, q)]);
    Ok(TightnessInstance {
        truth: [at_s(x)?, at_s(x - beta)?],
        estimates: [at_s(x - alpha)?, at_s(x - beta + alpha)?],
        s,
    })
}

/// Terms of the multi-round error bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub frontier_term: f64,
    pub population_term: f64,
    pub heterogeneity_term: f64,
    pub total: f64,
    pub c_r_gamma: f64,
}

/// `c_{r,γ} = 2γr/(1−γ)`.
pub fn c_r_gamma(r: u32, gamma: f64) -> Result<f64> {
    check_discount(gamma)?;
    Ok(2.0 * gamma * r as f64 / (1.0 - gamma))
}

/// Frontier term `2(1+γ)r·Σ TV(D_i, D̂_i)`, population term `c·TV(P̄, P̂̄)`
/// between mean distributions, heterogeneity term `c·r·E_{D~P} TV(D, D̄)`.
pub fn multi_round_bound(
    truth_frontier: &[Pmf],
    estimate_frontier: &[Pmf],
    truth_pop: &PopulationModel,
    estimate_pop: &PopulationModel,
    r: u32,
    gamma: f64,
) -> Result<BoundReport> {
    check_lengths(truth_frontier, estimate_frontier)?;
    let c = c_r_gamma(r, gamma)?;
    let frontier_tv: f64 = truth_frontier
        .iter()
        .zip(estimate_frontier)
        .map(|(d, e)| tv_distance(d, e))
        .fold(0.0, |a, b| a + b);
    let frontier_term = 2.0 * (1.0 + gamma) * r as f64 * frontier_tv;
    let population_term = c * tv_distance(truth_pop.mean_distribution(), estimate_pop.mean_distribution());
    let heterogeneity_term = c * r as f64 * truth_pop.heterogeneity();
    Ok(BoundReport {
        frontier_term,
        population_term,
        heterogeneity_term,
        total: frontier_term + population_term + heterogeneity_term,
        c_r_gamma: c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_round_examples() {
        let d = vec![Pmf::new(vec![0.2, 0.5, 0.3]).unwrap(); 2];
        assert_eq!(single_round_bound(&d, &d, 3).unwrap(), 0.0);
        let t = [Pmf::new(vec![0.3, 0.7]).unwrap()];
        let e = [Pmf::new(vec![0.4, 0.6]).unwrap()];
        assert!((single_round_bound(&t, &e, 1).unwrap() - 0.1).abs() < 1e-15);
        assert!(single_round_bound(&t, &d, 1).is_err());
    }

    #[test]
    fn tightness_examples() {
        for (s, x, beta, want) in [(2, 0.9, 0.4, 0.8), (1, 1.0, 1.0, 1.0)] {
            let inst = tightness_instance(s, x, beta).unwrap();
            let bound = single_round_bound(&inst.truth, &inst.estimates, s).unwrap();
            let regret = worst_case_regret(&inst.truth, &inst.estimates, s).unwrap();
            assert!((bound - want).abs() < 1e-12, "{bound}");
            assert!((regret - want).abs() < 1e-12, "{regret}");
        }
        let sym = tightness_instance(3, 0.6, 0.0).unwrap();
        assert_eq!(sym.truth[0], sym.truth[1]);
        assert_eq!(worst_case_regret(&sym.truth, &sym.estimates, 3).unwrap(), 0.0);
        assert!(tightness_instance(2, 0.5, 0.6).is_err());
        assert!(tightness_instance(2, 0.0, 0.0).is_err());
    }

    #[test]
    fn multi_round_examples() {
        assert_eq!(c_r_gamma(10, 0.5).unwrap(), 20.0);
        assert!(c_r_gamma(10, 1.0).is_err());
        let d = Pmf::new(vec![0.5, 0.5]).unwrap();
        let pop = PopulationModel::homogeneous(d.clone());
        let exact = multi_round_bound(
            std::slice::from_ref(&d),
            std::slice::from_ref(&d),
            &pop,
            &pop,
            10,
            0.5,
        )
        .unwrap();
        assert_eq!(exact.total, 0.0);

        let shifted = PopulationModel::homogeneous(Pmf::new(vec![0.6, 0.4]).unwrap());
        let rep = multi_round_bound(
            std::slice::from_ref(&d),
            std::slice::from_ref(&d),
            &pop,
            &shifted,
            10,
            0.5,
        )
        .unwrap();
        assert!((rep.population_term - 2.0).abs() < 1e-12);
        assert!((rep.total - 2.0).abs() < 1e-12);
        assert_eq!(rep.frontier_term, 0.0);
        assert_eq!(rep.heterogeneity_term, 0.0);
    }
}
