//! Truncated probability generating functions.
//!
//! A truncated PGF of cap `s` stores coefficients for degrees `0..=s`, with all
//! mass of degree `≥ s` merged into degree `s`. Truncating `X` at `s` is the same
//! as truncating its PGF, and the PGF of a sum of independent variables is the
//! product of their PGFs; together these give the exact distribution of
//! `Σ min{k_i, X_i}`.

use crate::dist::{Pmf, PopulationModel};
use crate::error::{Error, Result};
use crate::single_round::{even_params, Allocation, EvenParams};

/// Polynomial coefficients indexed by degree `0..=cap`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPoly {
    coeffs: Vec<f64>,
}

impl TruncatedPoly {
    /// The constant polynomial `1`.
    pub fn one() -> Self {
        TruncatedPoly { coeffs: vec![1.0] }
    }

    /// Wraps raw coefficients; negative entries above `-1e-12` are clamped to zero.
    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        clamp_small_negatives(&mut coeffs);
        TruncatedPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Same polynomial with mass at degree `≥ cap` merged into `cap`.
    /// A larger cap pads with zeros.
    pub fn recap(&self, cap: usize) -> Self {
        if cap >= self.cap() {
            let mut coeffs = self.coeffs.clone();
            coeffs.resize(cap + 1, 0.0);
            return TruncatedPoly { coeffs };
        }
        let mut coeffs = self.coeffs[..=cap].to_vec();
        coeffs[cap] += self.coeffs[cap + 1..].iter().sum::<f64>();
        TruncatedPoly { coeffs }
    }

    /// Clamps drift and rescales to unit mass when it is off by more than `1e-12`.
    pub fn normalize(mut self) -> Self {
        for c in self.coeffs.iter_mut() {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        let mass = self.mass();
        if mass > 0.0 && (mass - 1.0).abs() > 1e-12 {
            for c in self.coeffs.iter_mut() {
                *c /= mass;
            }
        }
        self
    }
}

fn clamp_small_negatives(coeffs: &mut [f64]) {
    for c in coeffs.iter_mut() {
        if *c < 0.0 && *c >= -1e-12 {
            *c = 0.0;
        }
    }
}

/// `G_{D,s}(z) = E[z^{min(X, s)}]`.
pub fn truncated_pgf(d: &Pmf, s: usize) -> TruncatedPoly {
    let mut coeffs: Vec<f64> = (0..s).map(|j| d.prob(j)).collect();
    coeffs.push(d.survival(s));
    TruncatedPoly { coeffs }
}

/// `Ḡ_s(z) = E_{D~P}[G_{D,s}(z)]`, the truncated PGF of the mean distribution.
pub fn population_pgf(p: &PopulationModel, s: usize) -> TruncatedPoly {
    truncated_pgf(p.mean_distribution(), s)
}

/// Product of `p` and `q` with all mass above degree `s` merged into `s`.
pub fn poly_mul_trunc(p: &TruncatedPoly, q: &TruncatedPoly, s: usize) -> TruncatedPoly {
    let (p, q) = (&p.coeffs, &q.coeffs);
    // suffix[j] = Σ_{t ≥ j} q[t]
    let mut suffix = vec![0.0; q.len() + 1];
    for j in (0..q.len()).rev() {
        suffix[j] = suffix[j + 1] + q[j];
    }
    let mut out = vec![0.0; s + 1];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        if i >= s {
            out[s] += pi * suffix[0];
            continue;
        }
        let below = (s - i).min(q.len());
        for j in 0..below {
            out[i + j] += pi * q[j];
        }
        out[s] += pi * suffix[below];
    }
    TruncatedPoly::from_coeffs(out)
}

/// `p^e` truncated at `s`, by repeated squaring.
pub fn poly_pow_trunc(p: &TruncatedPoly, e: u64, s: usize) -> TruncatedPoly {
    if e == 0 {
        return TruncatedPoly::one();
    }
    let mut base = p.recap(s.min(p.cap()));
    let mut result: Option<TruncatedPoly> = None;
    let mut e = e;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(acc) => poly_mul_trunc(&acc, &base, s),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = poly_mul_trunc(&base, &base, s);
    }
    result.expect("e > 0 sets at least one bit")
}

/// Distribution of the next frontier size `N_s^e` under the even allocation of
/// `s` units over `n` members drawn from `p`; entry `m` is `Pr(N_s^e = m)` for
/// `m = 0..=s`.
pub fn next_frontier_dist(p: &PopulationModel, n: usize, s: u32) -> Result<Vec<f64>> {
    let EvenParams { a, c } = even_params(s, n)?;
    let cap = s as usize;
    let low = poly_pow_trunc(&population_pgf(p, a as usize), (n - c as usize) as u64, cap);
    let high = poly_pow_trunc(&population_pgf(p, a as usize + 1), c as u64, cap);
    Ok(poly_mul_trunc(&low, &high, cap)
        .recap(cap)
        .normalize()
        .into_coeffs())
}

/// Distribution of `Σ_i min{k_i, X_i}` for a fixed allocation, over `0..=Σk_i`.
pub fn greedy_frontier_dist(frontier: &[Pmf], alloc: &Allocation) -> Result<Vec<f64>> {
    if alloc.len() != frontier.len() {
        return Err(Error::LengthMismatch {
            expected: frontier.len(),
            found: alloc.len(),
        });
    }
    let cap = alloc.total() as usize;
    let mut acc = TruncatedPoly::one();
    for (&k, d) in alloc.units().iter().zip(frontier) {
        if k == 0 {
            continue;
        }
        acc = poly_mul_trunc(&acc, &truncated_pgf(d, k as usize), cap);
    }
    Ok(acc.recap(cap).normalize().into_coeffs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[f64]) -> TruncatedPoly {
        TruncatedPoly::from_coeffs(c.to_vec())
    }

    /// Plain convolution followed by tail merge.
    fn convolve_then_merge(p: &[f64], q: &[f64], s: usize) -> Vec<f64> {
        let mut full = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                full[i + j] += a * b;
            }
        }
        let mut out = vec![0.0; s + 1];
        for (d, v) in full.into_iter().enumerate() {
            out[d.min(s)] += v;
        }
        out
    }

    #[test]
    fn truncated_pgf_examples() {
        let coin = Pmf::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(truncated_pgf(&coin, 1).coeffs(), &[0.5, 0.5]);
        let three = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(truncated_pgf(&three, 1).coeffs(), &[0.2, 0.8]);
        assert_eq!(truncated_pgf(&three, 0).coeffs(), &[1.0]);
        assert_eq!(truncated_pgf(&three, 4).coeffs(), &[0.2, 0.3, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn mul_examples() {
        let q = poly(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(poly_mul_trunc(&TruncatedPoly::one(), &q, 3), q);
        let capped = poly_mul_trunc(&TruncatedPoly::one(), &q, 1);
        assert!((capped.coeffs()[0] - 0.1).abs() < 1e-15 && (capped.coeffs()[1] - 0.9).abs() < 1e-15);
        let half = poly(&[0.5, 0.5]);
        assert_eq!(
            poly_mul_trunc(&half, &half, 2).coeffs(),
            &convolve_then_merge(&[0.5, 0.5], &[0.5, 0.5], 2)[..]
        );
        assert_eq!(poly_mul_trunc(&half, &half, 2).coeffs(), &[0.25, 0.5, 0.25]);
        assert_eq!(poly_mul_trunc(&half, &half, 1).coeffs(), &[0.25, 0.75]);
    }

    #[test]
    fn mul_matches_naive_on_long_inputs() {
        let p = [0.05, 0.1, 0.15, 0.2, 0.1, 0.4];
        let q = [0.3, 0.0, 0.25, 0.45];
        for s in 0..10 {
            let got = poly_mul_trunc(&poly(&p), &poly(&q), s);
            let want = convolve_then_merge(&p, &q, s);
            for (a, b) in got.coeffs().iter().zip(&want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pow_examples() {
        let half = poly(&[0.5, 0.5]);
        assert_eq!(poly_pow_trunc(&half, 0, 3).coeffs(), &[1.0]);
        assert_eq!(poly_pow_trunc(&half, 2, 2).coeffs(), &[0.25, 0.5, 0.25]);
        let four = poly_pow_trunc(&half, 4, 4);
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for (j, c) in four.coeffs().iter().enumerate() {
            assert_eq!(*c, binom[j] / 16.0);
        }
    }

    #[test]
    fn pow_matches_chained_mul() {
        let p = poly(&[0.13, 0.29, 0.31, 0.27]);
        for s in 0..9 {
            for e in 1..12u64 {
                let mut chained = p.recap(s.min(p.cap()));
                for _ in 1..e {
                    chained = poly_mul_trunc(&chained, &p, s);
                }
                let fast = poly_pow_trunc(&p, e, s);
                assert_eq!(fast.cap(), chained.cap());
                for (a, b) in fast.coeffs().iter().zip(chained.coeffs()) {
                    assert!((a - b).abs() < 1e-14, "s={s} e={e}");
                }
            }
        }
    }

    #[test]
    fn next_frontier_examples() {
        let coin = PopulationModel::homogeneous(Pmf::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(next_frontier_dist(&coin, 4, 0).unwrap(), vec![1.0]);
        assert_eq!(
            next_frontier_dist(&coin, 2, 3).unwrap(),
            vec![0.25, 0.5, 0.25, 0.0]
        );
        let one = PopulationModel::homogeneous(Pmf::point(1));
        for n in 1..6 {
            let d = next_frontier_dist(&one, n, n as u32).unwrap();
            let mut want = vec![0.0; n + 1];
            want[n] = 1.0;
            assert_eq!(d, want);
        }
        assert!(next_frontier_dist(&one, 0, 3).is_err());
    }

    #[test]
    fn greedy_frontier_examples() {
        let coin = Pmf::new(vec![0.5, 0.5]).unwrap();
        let frontier = [coin.clone(), coin];
        assert_eq!(
            greedy_frontier_dist(&frontier, &Allocation::zeros(2)).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            greedy_frontier_dist(&frontier, &vec![1, 1].into()).unwrap(),
            vec![0.25, 0.5, 0.25]
        );
        assert_eq!(
            greedy_frontier_dist(&[Pmf::point(2)], &vec![2].into()).unwrap(),
            vec![0.0, 0.0, 1.0]
        );
        assert!(greedy_frontier_dist(&frontier, &vec![1].into()).is_err());
    }
}
