//! Active-relay set: relays that decoded both end-node packets.
//!
//! The A side and the B side are independent, so the joint probability of a
//! pair of codewords is the product of the two marginal codeword
//! probabilities. The number of active relays is the Hamming weight of the
//! bitwise AND of the two codewords.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::orthant::{Orthant, NEGATIVE_TOLERANCE, SUM_TOLERANCE};
use crate::shadowing::{q_function, NetworkConfig};

const MODULE: &str = "relay-set";

/// `probs[k] = P(|active set| = k)` for `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaySetDistribution {
    probs: Vec<f64>,
}

impl RelaySetDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::config(
                "a relay-set distribution needs at least n = 1",
            ));
        }
        let probs = check_distribution(probs, "relay-set distribution")?;
        Ok(RelaySetDistribution { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Number of relays.
    pub fn n(&self) -> usize {
        self.probs.len() - 1
    }
}

fn check_distribution(mut probs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    for p in probs.iter_mut() {
        if p.is_nan() || *p < -NEGATIVE_TOLERANCE || *p > 1.0 + NEGATIVE_TOLERANCE {
            return Err(Error::numerical(
                MODULE,
                format!("{what} has entry {p} outside [0, 1]"),
            ));
        }
        *p = p.clamp(0.0, 1.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::numerical(
            MODULE,
            format!("{what} sums to {total}, not 1"),
        ));
    }
    Ok(probs)
}

/// Combine the 2^n A-side and B-side codeword distributions.
pub fn active_set_distribution(dist_a: &[f64], dist_b: &[f64]) -> Result<RelaySetDistribution> {
    if dist_a.len() != dist_b.len() || !dist_a.len().is_power_of_two() || dist_a.len() < 2 {
        return Err(Error::config(format!(
            "codeword distributions must have equal power-of-two lengths, got {} and {}",
            dist_a.len(),
            dist_b.len()
        )));
    }
    let dist_a = check_distribution(dist_a.to_vec(), "A-side codeword distribution")?;
    let dist_b = check_distribution(dist_b.to_vec(), "B-side codeword distribution")?;
    let n = dist_a.len().trailing_zeros() as usize;
    let probs = dist_a
        .par_iter()
        .enumerate()
        .fold(
            || vec![0.0; n + 1],
            |mut acc, (ma, pa)| {
                if *pa > 0.0 {
                    for (mb, pb) in dist_b.iter().enumerate() {
                        acc[(ma & mb).count_ones() as usize] += pa * pb;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0.0; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    RelaySetDistribution::new(probs)
}

/// Probability that no relay decoded both packets.
pub fn outage_probability(dist: &RelaySetDistribution) -> f64 {
    dist.probs[0]
}

/// Mean active-set size, `sum_k k P(k)`.
pub fn expected_active_from_distribution(dist: &RelaySetDistribution) -> f64 {
    dist.probs
        .iter()
        .enumerate()
        .map(|(k, p)| k as f64 * p)
        .sum()
}

/// Mean active-set size from the marginals alone. It does not depend on
/// the correlation between links.
pub fn expected_active_closed_form(config: &NetworkConfig) -> f64 {
    config
        .ar_links
        .iter()
        .zip(&config.br_links)
        .map(|(a, b)| a.acceptance(config.gamma_star_db) * b.acceptance(config.gamma_star_db))
        .sum()
}

/// A-side and B-side codeword distributions together with the combined
/// active-set distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaySetAnalysis {
    pub dist_a: Vec<f64>,
    pub dist_b: Vec<f64>,
    pub set: RelaySetDistribution,
}

pub fn analyze_relay_set(
    config: &NetworkConfig,
    orthant: &Orthant<'_>,
) -> Result<RelaySetAnalysis> {
    config.validate()?;
    let dist_a = orthant.distribution(&config.ar_links, config.rho1, config.gamma_star_db)?;
    let dist_b = orthant.distribution(&config.br_links, config.rho2, config.gamma_star_db)?;
    let set = active_set_distribution(&dist_a, &dist_b)?;
    Ok(RelaySetAnalysis {
        dist_a,
        dist_b,
        set,
    })
}

/// Adaptive Simpson integration with Richardson correction.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `|E[Q((g - mu - sigma sqrt(rho) T) / (sigma sqrt(1 - rho)))] - Q((g - mu) / sigma)|`
/// with `T ~ N(0, 1)`, the expectation computed by quadrature over `[-10, 10]`.
///
/// Conditioning a link on a shared factor and averaging it back out must
/// return the marginal acceptance probability; the residual measures that.
pub fn lemma1_residual(gamma_star_db: f64, mu: f64, sigma: f64, rho: f64) -> f64 {
    if sigma <= 0.0 || rho <= 0.0 {
        // the integrand does not depend on t
        return 0.0;
    }
    let a = gamma_star_db - mu;
    let (sr, sc) = (sigma * rho.sqrt(), sigma * (1.0 - rho).sqrt());
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let lhs = adaptive_simpson(
        |t| norm * q_function((a - sr * t) / sc) * (-0.5 * t * t).exp(),
        -10.0,
        10.0,
        1e-13,
    );
    (lhs - q_function(a / sigma)).abs()
}
