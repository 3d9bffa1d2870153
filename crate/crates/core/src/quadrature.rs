//! Gauss rules for the half-range Gaussian weight `exp(-x^2)` on `[0, inf)`.
//!
//! Rules are rebuilt from the analytic moments `m_k = Γ((k+1)/2) / 2`:
//! the Chebyshev algorithm maps moments to three-term recurrence
//! coefficients, the Jacobi matrix eigenvalues give the nodes
//! (Golub-Welsch), and the weights come from the Christoffel function.
//!
//! The moment-to-recurrence map loses roughly one decimal digit per node, so
//! that stage runs in multi-precision arithmetic and only the final
//! recurrence coefficients are rounded to `f64`.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Order used throughout the analytical pipeline unless overridden.
pub const DEFAULT_ORDER: usize = 15;
pub const MAX_ORDER: usize = 64;

const RM: RoundingMode = RoundingMode::ToEven;

/// Nodes `r_i` and weights `w_i` with `∫_0^∞ e^{-x²} f(x) dx ≈ Σ w_i f(r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }
}

/// Half-range moment `∫_0^∞ x^k e^{-x²} dx = Γ((k+1)/2) / 2` in `f64`.
pub fn half_range_moment(k: u32) -> f64 {
    // m_0 = √π/2, m_1 = 1/2, m_k = (k-1)/2 · m_{k-2}
    let mut m = if k.is_multiple_of(2) {
        std::f64::consts::PI.sqrt() / 2.0
    } else {
        0.5
    };
    let mut j = if k.is_multiple_of(2) { 2 } else { 3 };
    while j <= k {
        m *= (j - 1) as f64 / 2.0;
        j += 2;
    }
    m
}

pub fn build_quadrature(count: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_ORDER).contains(&count) {
        return Err(Error::config(format!(
            "quadrature order must lie in [1, {MAX_ORDER}], got {count}"
        )));
    }
    // One extra coefficient pair for Newton polishing with the monic p_N.
    let (alpha, beta) = recurrence_coefficients(count + 1, working_precision(count))?;
    let nodes = golub_welsch_nodes(&alpha[..count], &beta[..count])?;

    let mut rule_nodes = Vec::with_capacity(count);
    let mut rule_weights = Vec::with_capacity(count);
    for x0 in nodes {
        let x = polish_root(x0, &alpha, &beta, count);
        rule_nodes.push(x);
        rule_weights.push(christoffel_weight(x, &alpha, &beta, count));
    }

    let rule = QuadratureRule {
        nodes: rule_nodes,
        weights: rule_weights,
    };
    check_rule(&rule)?;
    Ok(rule)
}

fn working_precision(count: usize) -> usize {
    128 + 8 * count
}

fn check_rule(rule: &QuadratureRule) -> Result<()> {
    if rule
        .weights
        .iter()
        .any(|&w| w.is_nan() || w <= 0.0 || !w.is_finite())
    {
        return Err(Error::numerical("quadrature", "non-positive weight"));
    }
    if rule.nodes.first().is_some_and(|&x| x < 0.0) {
        return Err(Error::numerical("quadrature", "negative node"));
    }
    if rule.nodes.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
        return Err(Error::numerical(
            "quadrature",
            "nodes not strictly increasing",
        ));
    }
    Ok(())
}

/// First `n` recurrence coefficients `(alpha_k, beta_k)` of the monic
/// orthogonal polynomials, with `beta_0 = m_0`.
pub(crate) fn recurrence_coefficients(n: usize, prec: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cc = Consts::new().map_err(|e| Error::numerical("quadrature", format!("{e:?}")))?;
    let p = prec;
    let big = |v: u64| BigFloat::from_u64(v, p);

    let len = 2 * n;
    let mut moments = Vec::with_capacity(len);
    let sqrt_pi = cc.pi(p, RM).sqrt(p, RM);
    moments.push(sqrt_pi.div(&big(2), p, RM));
    moments.push(BigFloat::from_f64(0.5, p));
    for k in 2..len {
        let factor = big(k as u64 - 1).div(&big(2), p, RM);
        let m = moments[k - 2].mul(&factor, p, RM);
        moments.push(m);
    }

    // Chebyshev algorithm on ordinary moments:
    // sigma_{-1,l} = 0, sigma_{0,l} = m_l,
    // sigma_{k,l} = sigma_{k-1,l+1} - a_{k-1} sigma_{k-1,l} - b_{k-1} sigma_{k-2,l}.
    let zero = BigFloat::from_u64(0, p);
    let mut prev: Vec<BigFloat> = vec![zero.clone(); len];
    let mut cur: Vec<BigFloat> = moments;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    a.push(cur[1].div(&cur[0], p, RM));
    b.push(cur[0].clone());

    for k in 1..n {
        let mut next = vec![zero.clone(); len];
        for l in k..(len - k) {
            let t = cur[l + 1].sub(&a[k - 1].mul(&cur[l], p, RM), p, RM).sub(
                &b[k - 1].mul(&prev[l], p, RM),
                p,
                RM,
            );
            next[l] = t;
        }
        let ak = next[k + 1]
            .div(&next[k], p, RM)
            .sub(&cur[k].div(&cur[k - 1], p, RM), p, RM);
        let bk = next[k].div(&cur[k - 1], p, RM);
        if !bk.is_positive() {
            return Err(Error::numerical(
                "quadrature",
                format!("recurrence coefficient beta_{k} lost positivity; precision exhausted"),
            ));
        }
        a.push(ak);
        b.push(bk);
        prev = std::mem::replace(&mut cur, next);
    }

    Ok((
        a.iter().map(to_f64).collect(),
        b.iter().map(to_f64).collect(),
    ))
}

/// Round a multi-precision value to the nearest `f64` (via its top 64 bits).
fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let (words, _, sign, exp, _) = x.as_raw_parts().expect("finite multi-precision value");
    // Mantissa is normalized to [0.5, 1) with the most significant word last.
    let top = *words.last().expect("non-empty mantissa") as f64;
    let v = top * 2f64.powi(exp - 64);
    match sign {
        Sign::Neg => -v,
        Sign::Pos => v,
    }
}

fn golub_welsch_nodes(alpha: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    let n = alpha.len();
    let mut jacobi = DMatrix::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = alpha[i];
        if i + 1 < n {
            let off = beta[i + 1].sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000)
        .ok_or_else(|| Error::numerical("quadrature", "Jacobi eigenproblem did not converge"))?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));
    Ok(nodes)
}

/// Monic `p_n(x)` and its derivative from the recurrence.
fn monic_with_derivative(x: f64, alpha: &[f64], beta: &[f64], n: usize) -> (f64, f64) {
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut d_prev, mut d) = (0.0, 0.0);
    for k in 0..n {
        let b = if k == 0 { 0.0 } else { beta[k] };
        let p_next = (x - alpha[k]) * p - b * p_prev;
        let d_next = p + (x - alpha[k]) * d - b * d_prev;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

fn polish_root(mut x: f64, alpha: &[f64], beta: &[f64], n: usize) -> f64 {
    for _ in 0..3 {
        let (p, d) = monic_with_derivative(x, alpha, beta, n);
        if d == 0.0 {
            break;
        }
        let step = p / d;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `w = 1 / Σ_{k<n} p̂_k(x)²` with `p̂_k` orthonormal.
fn christoffel_weight(x: f64, alpha: &[f64], beta: &[f64], n: usize) -> f64 {
    let mut p_prev = 0.0;
    let mut p = 1.0 / beta[0].sqrt();
    let mut sum = p * p;
    for k in 0..n - 1 {
        let b_cur = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let p_next = ((x - alpha[k]) * p - b_cur * p_prev) / beta[k + 1].sqrt();
        p_prev = p;
        p = p_next;
        sum += p * p;
    }
    1.0 / sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn multiprecision_round_trip() {
        for &v in &[0.75, 3.0, -2.5, 1e-30, 123456.789, std::f64::consts::PI] {
            assert_eq!(to_f64(&BigFloat::from_f64(v, 256)), v);
        }
    }

    #[test]
    fn moments() {
        assert_relative_eq!(
            half_range_moment(0),
            0.886_226_925_452_758,
            max_relative = 1e-15
        );
        assert_eq!(half_range_moment(1), 0.5);
        assert_relative_eq!(
            half_range_moment(4),
            0.375 * std::f64::consts::PI.sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(half_range_moment(5), 1.0);
    }

    #[test]
    fn one_point_rule_is_mean() {
        let rule = build_quadrature(1).unwrap();
        assert_relative_eq!(
            rule.weights()[0],
            half_range_moment(0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            rule.nodes()[0],
            0.5 / half_range_moment(0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn order_fifteen_basic_integrals() {
        let rule = build_quadrature(DEFAULT_ORDER).unwrap();
        assert_eq!(rule.len(), 15);
        assert_relative_eq!(rule.integrate(|_| 1.0), 0.886_226_925_5, epsilon = 1e-10);
        assert_relative_eq!(
            rule.integrate(|_| 1.0),
            std::f64::consts::PI.sqrt() / 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(rule.integrate(|x| x), 0.5, max_relative = 1e-12);
        assert_relative_eq!(
            rule.integrate(|x| x.powi(4)),
            0.664_670_194_1,
            epsilon = 1e-10
        );
    }

    #[test]
    fn monomial_exactness_every_order() {
        for count in [1, 2, 3, 5, 8, 15, 24, 32, 48, 64] {
            let rule = build_quadrature(count).unwrap();
            for k in 0..(2 * count as u32) {
                let exact = half_range_moment(k);
                let approx = rule.integrate(|x| x.powi(k as i32));
                let rel = ((approx - exact) / exact).abs();
                assert!(rel <= 1e-12, "count={count} k={k} rel={rel:e}");
            }
        }
    }

    #[test]
    fn precision_is_sufficient() {
        // Doubling the working precision must not move the coefficients.
        let n = MAX_ORDER + 1;
        let (a1, b1) = recurrence_coefficients(n, working_precision(MAX_ORDER)).unwrap();
        let (a2, b2) = recurrence_coefficients(n, 2 * working_precision(MAX_ORDER)).unwrap();
        for k in 0..n {
            assert_relative_eq!(a1[k], a2[k], max_relative = 1e-15);
            assert_relative_eq!(b1[k], b2[k], max_relative = 1e-15);
        }
    }

    #[test]
    fn out_of_range_orders_rejected() {
        assert!(build_quadrature(0).is_err());
        assert!(build_quadrature(65).is_err());
    }
}
