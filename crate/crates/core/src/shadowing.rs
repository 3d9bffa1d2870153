//! Exponentially correlated log-normal shadowing.
//!
//! Every power quantity is in dB. The correlation between links
//! `i` and `j` that share an end node is `rho^|i-j|`, i.e. the correlation
//! matrix is the Kac-Murdock-Szegő (KMS) Toeplitz matrix. Its inverse,
//! determinant and Cholesky factor all have closed forms, used here instead
//! of generic dense factorizations.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Upper bound on the correlation factor accepted anywhere in the crate.
/// Closer to one the KMS matrix is numerically singular.
pub const RHO_MAX: f64 = 1.0 - 1e-6;

/// Standard Gaussian tail `Q(x) = P(X > x)`.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard Gaussian CDF, `1 - Q(x)` without cancellation.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard Gaussian density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Shadowing statistics of one link: the mean received power is
/// `N(mu_db, sigma_db^2)` in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkStat {
    pub mu_db: f64,
    pub sigma_db: f64,
}

impl LinkStat {
    pub fn new(mu_db: f64, sigma_db: f64) -> Result<Self> {
        let link = LinkStat { mu_db, sigma_db };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_db.is_finite() {
            return Err(Error::config(format!(
                "link mean must be finite, got {}",
                self.mu_db
            )));
        }
        if self.sigma_db.is_nan() || self.sigma_db < 0.0 || !self.sigma_db.is_finite() {
            return Err(Error::config(format!(
                "link standard deviation must be finite and >= 0, got {}",
                self.sigma_db
            )));
        }
        Ok(())
    }

    /// Normalized threshold `(gamma* - mu) / sigma`.
    ///
    /// Deterministic links (`sigma = 0`) map to `-inf` when the mean clears the
    /// threshold and `+inf` otherwise, so that `Q(t)` is the step function.
    pub fn normalized_threshold(&self, gamma_star_db: f64) -> f64 {
        if self.sigma_db > 0.0 {
            (gamma_star_db - self.mu_db) / self.sigma_db
        } else if self.mu_db > gamma_star_db {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    }

    /// Probability that the link accepts a packet, `Q((gamma* - mu)/sigma)`.
    pub fn acceptance(&self, gamma_star_db: f64) -> f64 {
        q_function(self.normalized_threshold(gamma_star_db))
    }
}

/// Outage packet error rate of a link: `P(gain <= gamma*) = 1 - Q((gamma* - mu)/sigma)`.
///
/// A link with `sigma = 0` is deterministic: the result is 0 when `mu > gamma*`
/// and 1 otherwise.
pub fn oper(link: &LinkStat, gamma_star_db: f64) -> f64 {
    normal_cdf(link.normalized_threshold(gamma_star_db))
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::config(format!(
            "correlation factor must lie in [0, 1), got {rho}"
        )));
    }
    if rho > RHO_MAX {
        return Err(Error::config(format!(
            "correlation factor {rho} is too close to 1 (limit {RHO_MAX}): KMS matrix is near-singular"
        )));
    }
    Ok(())
}

/// KMS correlation matrix of dimension `n`, entries `rho^|i-j|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmsMatrix {
    n: usize,
    rho: f64,
}

impl KmsMatrix {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("KMS matrix dimension must be positive"));
        }
        check_rho(rho)?;
        Ok(KmsMatrix { n, rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rho.powi(i.abs_diff(j) as i32)
    }

    /// Tridiagonal inverse.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.n;
        let r2 = self.rho * self.rho;
        let scale = 1.0 / (1.0 - r2);
        let mut inv = DMatrix::zeros(n, n);
        if n == 1 {
            inv[(0, 0)] = 1.0;
            return inv;
        }
        for i in 0..n {
            inv[(i, i)] = if i == 0 || i == n - 1 {
                scale
            } else {
                (1.0 + r2) * scale
            };
            if i + 1 < n {
                inv[(i, i + 1)] = -self.rho * scale;
                inv[(i + 1, i)] = -self.rho * scale;
            }
        }
        inv
    }

    /// `det = (1 - rho^2)^(n-1)`.
    pub fn determinant(&self) -> f64 {
        (1.0 - self.rho * self.rho).powi(self.n as i32 - 1)
    }

    /// Natural log of the determinant.
    pub fn log_determinant(&self) -> f64 {
        (self.n as f64 - 1.0) * (-self.rho * self.rho).ln_1p()
    }

    /// Lower-triangular Cholesky factor: `L[i][0] = rho^i`,
    /// `L[i][j] = rho^(i-j) sqrt(1 - rho^2)` for `1 <= j <= i`.
    pub fn cholesky(&self) -> DMatrix<f64> {
        let n = self.n;
        let s = (1.0 - self.rho * self.rho).sqrt();
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let p = self.rho.powi((i - j) as i32);
                l[(i, j)] = if j == 0 { p } else { p * s };
            }
        }
        l
    }
}

pub fn kms_inverse(m: &KmsMatrix) -> DMatrix<f64> {
    m.inverse()
}

pub fn kms_determinant(m: &KmsMatrix) -> f64 {
    m.determinant()
}

pub fn kms_factor(m: &KmsMatrix) -> DMatrix<f64> {
    m.cholesky()
}

/// Fill `out` with one draw of exponentially correlated gains
/// `sigma * L * X + mu`, with `L` the KMS Cholesky factor.
///
/// The product with `L` is applied as the equivalent first-order recursion
/// `z_0 = x_0`, `z_i = rho z_{i-1} + sqrt(1 - rho^2) x_i`, which costs O(n).
pub fn sample_correlated_gains_into<R: Rng + ?Sized>(
    stats: &[LinkStat],
    rho: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    debug_assert_eq!(stats.len(), out.len());
    let s = (1.0 - rho * rho).sqrt();
    let mut z = 0.0;
    for (i, (link, slot)) in stats.iter().zip(out.iter_mut()).enumerate() {
        let x: f64 = rng.sample(StandardNormal);
        z = if i == 0 { x } else { rho * z + s * x };
        *slot = link.sigma_db * z + link.mu_db;
    }
}

pub fn sample_correlated_gains<R: Rng + ?Sized>(
    stats: &[LinkStat],
    rho: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = vec![0.0; stats.len()];
    sample_correlated_gains_into(stats, rho, rng, &mut out);
    out
}

/// Two links generated from a shared factor `X0`:
/// `sigma_i (sqrt(1 - rho^2) X_i + rho X0) + mu_i`.
///
/// Marginals are `N(mu_i, sigma_i^2)`; the pairwise correlation is `rho^2`.
pub fn sample_pair_common_factor<R: Rng + ?Sized>(
    s1: &LinkStat,
    s2: &LinkStat,
    rho: f64,
    rng: &mut R,
) -> (f64, f64) {
    let c = (1.0 - rho * rho).sqrt();
    let x0: f64 = rng.sample(StandardNormal);
    let x1: f64 = rng.sample(StandardNormal);
    let x2: f64 = rng.sample(StandardNormal);
    (
        s1.sigma_db * (c * x1 + rho * x0) + s1.mu_db,
        s2.sigma_db * (c * x2 + rho * x0) + s2.mu_db,
    )
}

/// Topology and PHY thresholds for `n` relays between end nodes A and B.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n: usize,
    /// Correlation between A-relay links.
    pub rho1: f64,
    /// Correlation between B-relay links.
    pub rho2: f64,
    pub ar_links: Vec<LinkStat>,
    pub br_links: Vec<LinkStat>,
    pub ab_link: LinkStat,
    pub gamma_star_db: f64,
}

impl NetworkConfig {
    /// `n` identical relays on both sides.
    pub fn homogeneous(
        n: usize,
        rho: f64,
        relay_link: LinkStat,
        ab_link: LinkStat,
        gamma_star_db: f64,
    ) -> Self {
        NetworkConfig {
            n,
            rho1: rho,
            rho2: rho,
            ar_links: vec![relay_link; n],
            br_links: vec![relay_link; n],
            ab_link,
            gamma_star_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("number of relays must be positive"));
        }
        if self.ar_links.len() != self.n || self.br_links.len() != self.n {
            return Err(Error::config(format!(
                "expected {} A-side and B-side links, got {} and {}",
                self.n,
                self.ar_links.len(),
                self.br_links.len()
            )));
        }
        check_rho(self.rho1)?;
        check_rho(self.rho2)?;
        for link in self.ar_links.iter().chain(&self.br_links) {
            link.validate()?;
        }
        self.ab_link.validate()?;
        if !self.gamma_star_db.is_finite() {
            return Err(Error::config("reliability threshold must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn dense(m: &KmsMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(m.n(), m.n(), |i, j| m.entry(i, j))
    }

    #[test]
    fn inverse_small_cases() {
        let one = KmsMatrix::new(1, 0.5).unwrap().inverse();
        assert_eq!(one[(0, 0)], 1.0);

        let two = KmsMatrix::new(2, 0.5).unwrap().inverse();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]) / 0.75;
        assert!((two - expect).amax() < 1e-14);
    }

    #[test]
    fn inverse_times_dense_is_identity() {
        for n in 1..=10 {
            for &rho in &[0.0, 0.3, 0.7, 0.99 - 1e-9] {
                let m = KmsMatrix::new(n, rho).unwrap();
                let prod = m.inverse() * dense(&m);
                let err = (prod - DMatrix::identity(n, n)).amax();
                assert!(err < 1e-10, "n={n} rho={rho} err={err}");
            }
        }
    }

    #[test]
    fn determinant_matches_lu() {
        assert_eq!(KmsMatrix::new(1, 0.8).unwrap().determinant(), 1.0);
        assert_eq!(KmsMatrix::new(3, 0.0).unwrap().determinant(), 1.0);
        let m = KmsMatrix::new(5, 0.9).unwrap();
        assert_relative_eq!(m.determinant(), 0.19f64.powi(4), max_relative = 1e-12);
        for n in 1..=10 {
            for &rho in &[0.0, 0.3, 0.7, 0.95] {
                let m = KmsMatrix::new(n, rho).unwrap();
                let lu = dense(&m).lu().determinant();
                assert_relative_eq!(m.determinant(), lu, max_relative = 1e-10);
                assert_relative_eq!(m.log_determinant().exp(), lu, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let l = KmsMatrix::new(2, 0.0).unwrap().cholesky();
        assert_eq!(l, DMatrix::identity(2, 2));
        let l = KmsMatrix::new(2, 0.6).unwrap().cholesky();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, 0.8]);
        assert!((l - expect).amax() < 1e-15);
        for n in 1..=12 {
            let m = KmsMatrix::new(n, 0.5).unwrap();
            let l = m.cholesky();
            assert!((&l * l.transpose() - dense(&m)).amax() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_dimensions_and_rho() {
        assert!(KmsMatrix::new(0, 0.5).is_err());
        assert!(KmsMatrix::new(3, 1.0).is_err());
        assert!(KmsMatrix::new(3, -0.1).is_err());
        assert!(KmsMatrix::new(3, 1.0 - 1e-7).is_err());
    }

    #[test]
    fn degenerate_shadowing_returns_means() {
        let stats = [
            LinkStat::new(20.0, 0.0).unwrap(),
            LinkStat::new(12.5, 0.0).unwrap(),
        ];
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        assert_eq!(
            sample_correlated_gains(&stats, 0.7, &mut rng),
            vec![20.0, 12.5]
        );
    }

    #[test]
    fn oper_values() {
        let g = 16.14;
        assert_relative_eq!(
            oper(&LinkStat::new(g, 2.0).unwrap(), g),
            0.5,
            epsilon = 1e-15
        );
        let direct = oper(&LinkStat::new(8.0, 2.0).unwrap(), g);
        assert_relative_eq!(direct, 1.0 - q_function(4.07), epsilon = 1e-12);
        assert!((direct - 0.99998).abs() < 1e-5);
        let relay = oper(&LinkStat::new(20.0, 5.0).unwrap(), g);
        assert_relative_eq!(relay, 0.220_057_213_749, epsilon = 1e-9);
        // Deterministic limit.
        assert_eq!(oper(&LinkStat::new(20.0, 0.0).unwrap(), g), 0.0);
        assert_eq!(oper(&LinkStat::new(g, 0.0).unwrap(), g), 1.0);
        assert_eq!(oper(&LinkStat::new(10.0, 0.0).unwrap(), g), 1.0);
    }

    #[test]
    fn q_function_reference_values() {
        // Values from the standard normal table.
        assert_relative_eq!(q_function(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(
            q_function(1.0),
            0.158_655_253_931_457_05,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            q_function(-1.96),
            0.975_002_104_851_780,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            q_function(5.0),
            2.866_515_718_791_939e-7,
            max_relative = 1e-12
        );
    }
}
