//! Reception-codeword probabilities over an exponentially correlated chain.
//!
//! A codeword fixes, for each of `n` links, whether the mean received power
//! lies above (`1`) or below (`0`) the reliability threshold. Its probability
//! is a Gaussian orthant-type integral with the KMS correlation matrix. The
//! tridiagonal inverse makes the `n`-fold integral collapse into a chain of
//! one-dimensional integrals, each evaluated with the half-range Hermite
//! rule from [`crate::quadrature`].
//!
//! Two evaluation schemes are offered:
//!
//! * [`Scheme::Normalized`] (default) propagates the conditional probability
//!   `G_k(x) = P(events 1..k-1 | y_k = x)` along the chain. Every stage is a
//!   ratio of two quadrature sums with the same Gaussian kernel, so the
//!   partition of unity holds to rounding and accuracy stays high as
//!   `rho -> 1`.
//! * [`Scheme::Literal`] substitutes `y = t +/- c r` with a fixed scale per
//!   stage and sums the unnormalized one-dimensional integrals directly
//!   ([`q1_eval`], [`qk_step`]). It is exact at `rho = 0` but loses accuracy at
//!   high correlation because the fixed grid does not follow the kernel.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::shadowing::{check_rho, normal_cdf, q_function, sample_correlated_gains_into, LinkStat};

/// Largest `n` for which the full 2^n codeword enumeration is attempted.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Entries of a distribution below this are a numerical failure; entries
/// between it and zero are clamped.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Tolerance on the partition of unity of an enumerated distribution.
pub const SUM_TOLERANCE: f64 = 1e-6;

const MODULE: &str = "orthant";

/// Which relays decoded a broadcast: bit `i` set means relay `i + 1` did.
///
/// Textual form is the binary number, most significant bit first, padded to
/// the width: relays 2 and 4 of four give `"1010"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelayMask {
    bits: u64,
    width: usize,
}

impl RelayMask {
    pub const MAX_WIDTH: usize = 64;

    pub fn new(bits: u64, width: usize) -> Result<Self> {
        if width == 0 || width > Self::MAX_WIDTH {
            return Err(Error::config(format!(
                "mask width must lie in 1..=64, got {width}"
            )));
        }
        if width < 64 && bits >> width != 0 {
            return Err(Error::config(format!(
                "mask {bits:#b} does not fit in {width} bits"
            )));
        }
        Ok(RelayMask { bits, width })
    }

    pub fn empty(width: usize) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn full(width: usize) -> Result<Self> {
        Self::new(Self::all_bits(width), width)
    }

    fn all_bits(width: usize) -> u64 {
        if width >= 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Whether relay `i + 1` (zero-based `i`) is set.
    pub fn is_set(&self, i: usize) -> bool {
        i < self.width && (self.bits >> i) & 1 == 1
    }

    pub fn with(mut self, i: usize, on: bool) -> Self {
        assert!(
            i < self.width,
            "relay index {i} out of range for width {}",
            self.width
        );
        if on {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
        self
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn complement(&self) -> Self {
        RelayMask {
            bits: !self.bits & Self::all_bits(self.width),
            width: self.width,
        }
    }

    pub fn and(&self, other: &RelayMask) -> Result<Self> {
        if self.width != other.width {
            return Err(Error::config(format!(
                "mask widths differ: {} vs {}",
                self.width, other.width
            )));
        }
        Ok(RelayMask {
            bits: self.bits & other.bits,
            width: self.width,
        })
    }

    /// Zero-based indices of the set relays, ascending.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.width).filter(move |&i| self.is_set(i))
    }

    /// Every mask of the given width, in increasing numeric order.
    pub fn all(width: usize) -> impl Iterator<Item = RelayMask> {
        assert!(width <= 32, "refusing to enumerate 2^{width} masks");
        (0..1u64 << width).map(move |bits| RelayMask { bits, width })
    }
}

impl fmt::Display for RelayMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.width).rev() {
            f.write_str(if self.is_set(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for RelayMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::config(format!(
                "mask must be a string of 0/1, got `{s}`"
            )));
        }
        if s.len() > Self::MAX_WIDTH {
            return Err(Error::config(format!("mask `{s}` is wider than 64 bits")));
        }
        let bits = u64::from_str_radix(s, 2).map_err(|e| Error::config(e.to_string()))?;
        Self::new(bits, s.len())
    }
}

/// Evaluation scheme for the chain of one-dimensional integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Normalized,
    Literal,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normalized" => Ok(Scheme::Normalized),
            "literal" => Ok(Scheme::Literal),
            other => Err(Error::config(format!(
                "unknown orthant scheme `{other}` (expected normalized or literal)"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Normalized => "normalized",
            Scheme::Literal => "literal",
        })
    }
}

fn check_inputs(width: usize, links: &[LinkStat], rho: f64, gamma_star_db: f64) -> Result<()> {
    if links.is_empty() {
        return Err(Error::config("at least one link is required"));
    }
    if width != links.len() {
        return Err(Error::config(format!(
            "mask width {width} does not match {} links",
            links.len()
        )));
    }
    check_rho(rho)?;
    if !gamma_star_db.is_finite() {
        return Err(Error::config("reliability threshold must be finite"));
    }
    links.iter().try_for_each(LinkStat::validate)
}

// ---------------------------------------------------------------------------
// Literal scheme
// ---------------------------------------------------------------------------

/// First integral of the chain,
/// `q1(x) = int_{I1} exp(-(y^2 - 2 rho x y) / (2 (1 - rho^2))) dy`,
/// in closed form. `I1` is `[t, inf)` when `event_first` is set and
/// `(-inf, t]` otherwise.
pub fn q1_eval(x: f64, event_first: bool, link1: &LinkStat, gamma_star_db: f64, rho: f64) -> f64 {
    log_q1(
        x,
        event_first,
        link1.normalized_threshold(gamma_star_db),
        rho,
    )
    .exp()
}

fn log_q1(x: f64, event: bool, t: f64, rho: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let s = s2.sqrt();
    let z = (t - rho * x) / s;
    let tail = if event { q_function(z) } else { normal_cdf(z) };
    0.5 * (2.0 * std::f64::consts::PI * s2).ln() + tail.ln() + rho * rho * x * x / (2.0 * s2)
}

/// Scale of the substitution `y = t +/- c r` at the interior stages.
fn interior_scale(rho: f64) -> f64 {
    (2.0 * (1.0 - rho * rho) / (1.0 + rho * rho)).sqrt()
}

/// Points of an interior stage where the previous integral must be known.
pub fn interior_points(event: bool, t: f64, rule: &QuadratureRule, rho: f64) -> Vec<f64> {
    stage_points(event, t, interior_scale(rho), rule)
}

fn stage_points(event: bool, t: f64, scale: f64, rule: &QuadratureRule) -> Vec<f64> {
    let sign = if event { 1.0 } else { -1.0 };
    rule.nodes().iter().map(|r| t + sign * scale * r).collect()
}

/// One interior step of the chain: from `q_{k-1}` known at the points of
/// stage `k` (see [`interior_points`]) to
/// `q_k(x) = int_{I_k} exp(-((1 + rho^2) y^2 - 2 rho x y) / (2 (1 - rho^2))) q_{k-1}(y) dy`
/// at every `x` in `x_points`.
///
/// `k` is the one-based stage index and only appears in error messages.
#[allow(clippy::too_many_arguments)]
pub fn qk_step(
    prev_values: &[f64],
    k: usize,
    event_k: bool,
    x_points: &[f64],
    rule: &QuadratureRule,
    link_k: &LinkStat,
    gamma_star_db: f64,
    rho: f64,
) -> Result<Vec<f64>> {
    if link_k.sigma_db <= 0.0 {
        return Err(Error::numerical(
            MODULE,
            "literal scheme needs sigma > 0 on every link",
        ));
    }
    let logs: Vec<f64> = prev_values.iter().map(|v| v.ln()).collect();
    let t = link_k.normalized_threshold(gamma_star_db);
    let out = log_qk_step(&logs, k, event_k, t, x_points, rule, rho)?;
    Ok(out.into_iter().map(f64::exp).collect())
}

/// Same recursion on natural logarithms, so that deep chains cannot overflow.
fn log_qk_step(
    prev_logs: &[f64],
    k: usize,
    event: bool,
    t: f64,
    x_points: &[f64],
    rule: &QuadratureRule,
    rho: f64,
) -> Result<Vec<f64>> {
    if prev_logs.len() != rule.len() {
        return Err(Error::numerical(
            MODULE,
            format!(
                "stage {k}: {} previous values for a {}-point rule",
                prev_logs.len(),
                rule.len()
            ),
        ));
    }
    let s2 = 1.0 - rho * rho;
    let c = interior_scale(rho);
    let sign = if event { 1.0 } else { -1.0 };
    let base: Vec<f64> = rule
        .weights()
        .iter()
        .zip(prev_logs)
        .map(|(w, q)| w.ln() + q)
        .collect();
    let mut out = Vec::with_capacity(x_points.len());
    let mut terms = vec![0.0; rule.len()];
    for &x in x_points {
        let a = -((1.0 + rho * rho) * t * t - 2.0 * rho * x * t) / (2.0 * s2);
        let b = (rho * x - (1.0 + rho * rho) * t) / s2;
        for ((term, r), base) in terms.iter_mut().zip(rule.nodes()).zip(&base) {
            *term = base + sign * c * r * b;
        }
        out.push(c.ln() + a + log_sum_exp(&terms));
    }
    Ok(out)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn literal_probability(
    mask: RelayMask,
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let n = links.len();
    if links.iter().any(|l| l.sigma_db <= 0.0) {
        return Err(Error::numerical(
            MODULE,
            "literal scheme needs sigma > 0 on every link",
        ));
    }
    let t: Vec<f64> = links
        .iter()
        .map(|l| l.normalized_threshold(gamma_star_db))
        .collect();
    let s2 = 1.0 - rho * rho;
    let last_scale = (2.0 * s2).sqrt();
    let points_for = |k: usize| {
        if k == n - 1 {
            stage_points(mask.is_set(k), t[k], last_scale, rule)
        } else {
            interior_points(mask.is_set(k), t[k], rule, rho)
        }
    };

    let mut logs: Vec<f64> = points_for(1)
        .iter()
        .map(|&x| log_q1(x, mask.is_set(0), t[0], rho))
        .collect();
    for (k, &tk) in t.iter().enumerate().take(n - 1).skip(1) {
        logs = log_qk_step(
            &logs,
            k + 1,
            mask.is_set(k),
            tk,
            &points_for(k + 1),
            rule,
            rho,
        )?;
    }

    let tn = t[n - 1];
    let sign = if mask.is_set(n - 1) { 1.0 } else { -1.0 };
    let terms: Vec<f64> = rule
        .nodes()
        .iter()
        .zip(rule.weights())
        .zip(&logs)
        .map(|((r, w), q)| w.ln() + q - (tn * tn + 2.0 * sign * last_scale * tn * r) / (2.0 * s2))
        .collect();
    let log_c0 =
        -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * (n - 1) as f64 * s2.ln();
    let p = (log_c0 + last_scale.ln() + log_sum_exp(&terms)).exp();
    if !p.is_finite() {
        return Err(Error::numerical(
            MODULE,
            format!("literal scheme produced {p}"),
        ));
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Normalized scheme
// ---------------------------------------------------------------------------

/// Where a normalized variable must lie for one link's event.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Interval {
    Above(f64),
    Below(f64),
    Everywhere,
    Nowhere,
}

impl Interval {
    fn of(link: &LinkStat, event: bool, gamma_star_db: f64) -> Self {
        if link.sigma_db > 0.0 {
            let t = link.normalized_threshold(gamma_star_db);
            if event {
                Interval::Above(t)
            } else {
                Interval::Below(t)
            }
        } else if (link.mu_db > gamma_star_db) == event {
            Interval::Everywhere
        } else {
            Interval::Nowhere
        }
    }

    /// Probability that `N(center, scale^2)` falls in the interval.
    fn mass(&self, center: f64, scale: f64) -> f64 {
        match *self {
            Interval::Above(t) => q_function((t - center) / scale),
            Interval::Below(t) => normal_cdf((t - center) / scale),
            Interval::Everywhere => 1.0,
            Interval::Nowhere => 0.0,
        }
    }
}

/// Thresholds farther than this on the wide side of an interval are treated
/// as the whole line when placing nodes (masses stay exact).
const WHOLE_LINE_BEYOND: f64 = 9.0;
/// Nodes on a half line that contains the origin reach at least this far.
const COVER: f64 = 7.0;

/// Quadrature nodes and log-weights (`dy` measure) covering one interval.
#[derive(Debug, Clone)]
struct Grid {
    nodes: Vec<f64>,
    log_w: Vec<f64>,
}

impl Grid {
    fn new(interval: Interval, rule: &QuadratureRule) -> Self {
        let r_max = rule.nodes().last().copied().unwrap_or(1.0).max(1e-3);
        let half = |anchor: f64, sign: f64, scale: f64| {
            let nodes = rule.nodes().iter().map(|r| anchor + sign * scale * r);
            let log_w = rule
                .nodes()
                .iter()
                .zip(rule.weights())
                .map(|(r, w)| scale.ln() + w.ln() + r * r);
            (nodes.collect::<Vec<_>>(), log_w.collect::<Vec<_>>())
        };
        let sqrt2 = std::f64::consts::SQRT_2;
        let (anchor, sign) = match interval {
            Interval::Above(t) if t > -WHOLE_LINE_BEYOND => (t, 1.0),
            Interval::Below(t) if t < WHOLE_LINE_BEYOND => (t, -1.0),
            Interval::Nowhere => {
                return Grid {
                    nodes: Vec::new(),
                    log_w: Vec::new(),
                }
            }
            _ => {
                let (mut nodes, mut log_w) = half(0.0, -1.0, sqrt2);
                nodes.reverse();
                log_w.reverse();
                let (n2, w2) = half(0.0, 1.0, sqrt2);
                nodes.extend(n2);
                log_w.extend(w2);
                return Grid { nodes, log_w };
            }
        };
        // distance from the threshold to the far edge of the bulk
        let reach = COVER - sign * anchor;
        let scale = sqrt2.max(reach / r_max);
        let (nodes, log_w) = half(anchor, sign, scale);
        Grid { nodes, log_w }
    }
}

/// `mass(I, rho x, s) * E[G(Y) | Y in I]` with `Y ~ N(rho x, s^2)`, for
/// every `x` in `targets`; `g` is known on the nodes of `grid`.
fn propagate(
    grid: &Grid,
    interval: Interval,
    g: &[f64],
    targets: &[f64],
    rho: f64,
    s: f64,
    scratch: &mut Vec<f64>,
) -> Vec<f64> {
    let inv = 1.0 / (2.0 * s * s);
    targets
        .iter()
        .map(|&x| {
            let center = rho * x;
            let mass = interval.mass(center, s);
            if mass == 0.0 {
                return 0.0;
            }
            scratch.clear();
            scratch.extend(grid.nodes.iter().zip(&grid.log_w).map(|(y, lw)| {
                let d = y - center;
                lw - d * d * inv
            }));
            let m = scratch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for (e, gi) in scratch.iter().zip(g) {
                let k = (e - m).exp();
                num += k * gi;
                den += k;
            }
            mass * num / den
        })
        .collect()
}

struct NormalizedChain<'a> {
    intervals: Vec<[Interval; 2]>,
    grids: Vec<[Grid; 2]>,
    rho: f64,
    s: f64,
    _rule: &'a QuadratureRule,
}

impl<'a> NormalizedChain<'a> {
    fn new(links: &[LinkStat], rho: f64, gamma_star_db: f64, rule: &'a QuadratureRule) -> Self {
        let intervals: Vec<[Interval; 2]> = links
            .iter()
            .map(|l| {
                [
                    Interval::of(l, false, gamma_star_db),
                    Interval::of(l, true, gamma_star_db),
                ]
            })
            .collect();
        let grids = intervals
            .iter()
            .map(|iv| [Grid::new(iv[0], rule), Grid::new(iv[1], rule)])
            .collect();
        NormalizedChain {
            intervals,
            grids,
            rho,
            s: (1.0 - rho * rho).sqrt(),
            _rule: rule,
        }
    }

    fn n(&self) -> usize {
        self.intervals.len()
    }

    fn interval(&self, k: usize, bit: bool) -> Interval {
        self.intervals[k][bit as usize]
    }

    fn grid(&self, k: usize, bit: bool) -> &Grid {
        &self.grids[k][bit as usize]
    }

    /// `G` on the grid of stage 1 (zero-based), from the exact first mass.
    fn start(&self, b0: bool, b1: bool) -> Vec<f64> {
        let iv = self.interval(0, b0);
        self.grid(1, b1)
            .nodes
            .iter()
            .map(|&x| iv.mass(self.rho * x, self.s))
            .collect()
    }

    fn step(&self, k: usize, bk: bool, g: &[f64], bnext: bool, scratch: &mut Vec<f64>) -> Vec<f64> {
        let targets = &self.grid(k + 1, bnext).nodes;
        propagate(
            self.grid(k, bk),
            self.interval(k, bk),
            g,
            targets,
            self.rho,
            self.s,
            scratch,
        )
    }

    fn finish(&self, bn: bool, g: &[f64], scratch: &mut Vec<f64>) -> f64 {
        let k = self.n() - 1;
        propagate(
            self.grid(k, bn),
            self.interval(k, bn),
            g,
            &[0.0],
            0.0,
            1.0,
            scratch,
        )[0]
    }

    fn probability(&self, mask: RelayMask) -> f64 {
        let n = self.n();
        if n == 1 {
            return self.interval(0, mask.is_set(0)).mass(0.0, 1.0);
        }
        if (0..n).any(|k| self.interval(k, mask.is_set(k)) == Interval::Nowhere) {
            return 0.0;
        }
        let mut scratch = Vec::new();
        let mut g = self.start(mask.is_set(0), mask.is_set(1));
        for k in 1..n - 1 {
            g = self.step(k, mask.is_set(k), &g, mask.is_set(k + 1), &mut scratch);
        }
        self.finish(mask.is_set(n - 1), &g, &mut scratch)
    }

    /// All 2^n probabilities, sharing work between masks with a common prefix.
    fn distribution(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; 1 << n];
        if n == 1 {
            out[0] = self.interval(0, false).mass(0.0, 1.0);
            out[1] = self.interval(0, true).mass(0.0, 1.0);
            return out;
        }
        let mut scratch = Vec::new();
        for b0 in [false, true] {
            if self.interval(0, b0) == Interval::Nowhere {
                continue;
            }
            for b1 in [false, true] {
                if self.interval(1, b1) == Interval::Nowhere {
                    continue;
                }
                let g = self.start(b0, b1);
                let bits = b0 as usize | (b1 as usize) << 1;
                self.descend(1, b1, g, bits, &mut out, &mut scratch);
            }
        }
        out
    }

    fn descend(
        &self,
        k: usize,
        bk: bool,
        g: Vec<f64>,
        bits: usize,
        out: &mut [f64],
        scratch: &mut Vec<f64>,
    ) {
        if k == self.n() - 1 {
            out[bits] = self.finish(bk, &g, scratch);
            return;
        }
        for b in [false, true] {
            if self.interval(k + 1, b) == Interval::Nowhere {
                continue;
            }
            let next = self.step(k, bk, &g, b, scratch);
            self.descend(k + 1, b, next, bits | (b as usize) << (k + 1), out, scratch);
        }
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Codeword-probability evaluator. Holds the quadrature rule and its settings.
#[derive(Debug, Clone, Copy)]
pub struct Orthant<'a> {
    pub rule: &'a QuadratureRule,
    pub scheme: Scheme,
    pub cap: usize,
}

impl<'a> Orthant<'a> {
    pub fn new(rule: &'a QuadratureRule) -> Self {
        Orthant {
            rule,
            scheme: Scheme::default(),
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn probability(
        &self,
        mask: RelayMask,
        links: &[LinkStat],
        rho: f64,
        gamma_star_db: f64,
    ) -> Result<f64> {
        check_inputs(mask.width(), links, rho, gamma_star_db)?;
        if links.len() == 1 {
            let t = links[0].normalized_threshold(gamma_star_db);
            return Ok(if mask.is_set(0) {
                q_function(t)
            } else {
                normal_cdf(t)
            });
        }
        let p = match self.scheme {
            Scheme::Normalized => {
                NormalizedChain::new(links, rho, gamma_star_db, self.rule).probability(mask)
            }
            Scheme::Literal => literal_probability(mask, links, rho, gamma_star_db, self.rule)?,
        };
        clamp_probability(p)
    }

    /// Probabilities of all 2^n codewords, indexed by mask bits.
    pub fn distribution(
        &self,
        links: &[LinkStat],
        rho: f64,
        gamma_star_db: f64,
    ) -> Result<Vec<f64>> {
        let n = links.len();
        if n > self.cap {
            return Err(Error::EnumerationCap { n, cap: self.cap });
        }
        check_inputs(n, links, rho, gamma_star_db)?;
        let raw = match self.scheme {
            Scheme::Normalized => {
                NormalizedChain::new(links, rho, gamma_star_db, self.rule).distribution()
            }
            Scheme::Literal => RelayMask::all(n)
                .map(|m| literal_probability(m, links, rho, gamma_star_db, self.rule))
                .collect::<Result<Vec<_>>>()?,
        };
        let probs = raw
            .into_iter()
            .map(clamp_probability)
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::numerical(
                MODULE,
                format!("codeword probabilities sum to {total}, not 1"),
            ));
        }
        Ok(probs)
    }
}

fn clamp_probability(p: f64) -> Result<f64> {
    if p.is_nan() {
        return Err(Error::numerical(MODULE, "probability is NaN"));
    }
    if !(-NEGATIVE_TOLERANCE..=1.0 + NEGATIVE_TOLERANCE).contains(&p) {
        return Err(Error::numerical(
            MODULE,
            format!("probability {p} outside [0, 1]"),
        ));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Probability of one codeword with the default scheme.
pub fn codeword_probability(
    mask: RelayMask,
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    Orthant::new(rule).probability(mask, links, rho, gamma_star_db)
}

/// All 2^n codeword probabilities with the default scheme and cap.
pub fn codeword_distribution(
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    Orthant::new(rule).distribution(links, rho, gamma_star_db)
}

/// Minimum sample count accepted by the Monte Carlo estimators.
pub const MIN_MC_SAMPLES: u64 = 10_000;

fn draw_masks(
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    samples: u64,
    seed: u64,
    mut visit: impl FnMut(u64),
) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::config(format!(
            "at least {MIN_MC_SAMPLES} samples are required, got {samples}"
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut gains = vec![0.0; links.len()];
    for _ in 0..samples {
        sample_correlated_gains_into(links, rho, &mut rng, &mut gains);
        let bits = gains
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, g)| acc | ((*g > gamma_star_db) as u64) << i);
        visit(bits);
    }
    Ok(())
}

/// Monte Carlo estimate of one codeword probability and its binomial
/// standard error.
pub fn codeword_probability_mc(
    mask: RelayMask,
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_inputs(mask.width(), links, rho, gamma_star_db)?;
    let mut hits = 0u64;
    draw_masks(links, rho, gamma_star_db, samples, seed, |bits| {
        hits += (bits == mask.bits()) as u64;
    })?;
    let p = hits as f64 / samples as f64;
    Ok((p, (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Monte Carlo frequencies of every codeword from one stream of draws.
pub fn codeword_histogram_mc(
    links: &[LinkStat],
    rho: f64,
    gamma_star_db: f64,
    samples: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = links.len();
    if n > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            n,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    check_inputs(n, links, rho, gamma_star_db)?;
    let mut counts = vec![0u64; 1 << n];
    draw_masks(links, rho, gamma_star_db, samples, seed, |bits| {
        counts[bits as usize] += 1
    })?;
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / samples as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_quadrature;
    use approx::assert_relative_eq;

    fn rule() -> QuadratureRule {
        build_quadrature(15).unwrap()
    }

    fn link(mu: f64, sigma: f64) -> LinkStat {
        LinkStat::new(mu, sigma).unwrap()
    }

    #[test]
    fn mask_text_round_trip() {
        let m: RelayMask = "1010".parse().unwrap();
        assert_eq!(m.bits(), 0b1010);
        assert!(m.is_set(1) && m.is_set(3) && !m.is_set(0));
        assert_eq!(m.to_string(), "1010");
        assert_eq!(m.complement().to_string(), "0101");
        assert_eq!(RelayMask::new(1, 3).unwrap().to_string(), "001");
        assert!(RelayMask::new(8, 3).is_err());
        assert!("10a".parse::<RelayMask>().is_err());
        assert_eq!(m.members().collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn independent_product() {
        let r = rule();
        let links = [link(20.0, 5.0), link(20.0, 5.0)];
        let p = codeword_probability(RelayMask::full(2).unwrap(), &links, 0.0, 16.14, &r).unwrap();
        let q = q_function((16.14 - 20.0) / 5.0);
        assert_relative_eq!(p, q * q, epsilon = 1e-12);
        assert_relative_eq!(p, 0.6082, epsilon = 2e-4);
    }

    #[test]
    fn single_link_shortcut() {
        let r = rule();
        let p = codeword_probability(
            RelayMask::full(1).unwrap(),
            &[link(16.14, 3.0)],
            0.4,
            16.14,
            &r,
        )
        .unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn q1_decoupled() {
        let l = link(18.0, 4.0);
        let t = l.normalized_threshold(16.14);
        let root = (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(
            q1_eval(0.7, true, &l, 16.14, 0.0),
            root * q_function(t),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            q1_eval(0.7, false, &l, 16.14, 0.0),
            root * normal_cdf(t),
            epsilon = 1e-14
        );
    }

    #[test]
    fn literal_step_factorizes_when_uncorrelated() {
        let r = rule();
        let l = link(15.0, 6.0);
        let t = l.normalized_threshold(16.14);
        let prev = vec![2.5; r.len()];
        let out = qk_step(&prev, 2, true, &[-1.0, 0.0, 3.0], &r, &l, 16.14, 0.0).unwrap();
        let expect = 2.5 * (2.0 * std::f64::consts::PI).sqrt() * q_function(t);
        for v in out {
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }
        assert!(qk_step(&prev[1..], 2, true, &[0.0], &r, &l, 16.14, 0.0).is_err());
    }

    #[test]
    fn both_schemes_agree_when_uncorrelated() {
        let r = rule();
        let links = [link(20.0, 2.0), link(15.0, 10.0), link(17.0, 4.0)];
        let lit = Orthant::new(&r).with_scheme(Scheme::Literal);
        for m in RelayMask::all(3) {
            let a = codeword_probability(m, &links, 0.0, 16.14, &r).unwrap();
            let b = lit.probability(m, &links, 0.0, 16.14).unwrap();
            let exact: f64 = links
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let p = l.acceptance(16.14);
                    if m.is_set(i) {
                        p
                    } else {
                        1.0 - p
                    }
                })
                .product();
            assert_relative_eq!(a, exact, epsilon = 1e-12);
            assert_relative_eq!(b, exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn distribution_matches_single_evaluations() {
        let r = rule();
        let links = [
            link(20.0, 2.0),
            link(15.0, 10.0),
            link(17.0, 4.0),
            link(19.0, 3.0),
        ];
        let d = codeword_distribution(&links, 0.8, 16.14, &r).unwrap();
        for m in RelayMask::all(4) {
            let p = codeword_probability(m, &links, 0.8, 16.14, &r).unwrap();
            assert_relative_eq!(d[m.bits() as usize], p, epsilon = 1e-15);
        }
        assert_relative_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_links() {
        let r = rule();
        let links = [link(20.0, 0.0), link(15.0, 5.0), link(20.0, 0.0)];
        // relays 1 and 3 always decode; relay 2 keeps its marginal
        let p2 = links[1].acceptance(16.14);
        let d = codeword_distribution(&links, 0.9, 16.14, &r).unwrap();
        assert_relative_eq!(d[0b111], p2, epsilon = 1e-8);
        assert_relative_eq!(d[0b101], 1.0 - p2, epsilon = 1e-8);
        assert_eq!(d.iter().filter(|&&p| p > 0.0).count(), 2);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let r = rule();
        let links = vec![link(20.0, 5.0); 13];
        match codeword_distribution(&links, 0.5, 16.14, &r) {
            Err(Error::EnumerationCap { n: 13, cap: 12 }) => {}
            other => panic!("expected cap refusal, got {other:?}"),
        }
        assert!(Orthant::new(&r)
            .with_cap(3)
            .distribution(&links[..4], 0.5, 16.14)
            .is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let r = rule();
        let links = [link(20.0, 5.0), link(20.0, 5.0)];
        let m = RelayMask::full(3).unwrap();
        assert!(codeword_probability(m, &links, 0.5, 16.14, &r).is_err());
        let m = RelayMask::full(2).unwrap();
        assert!(codeword_probability(m, &links, 1.0 - 1e-7, 16.14, &r).is_err());
        assert!(codeword_probability(m, &links, -0.1, 16.14, &r).is_err());
        assert!(codeword_probability_mc(m, &links, 0.5, 16.14, 100, 1).is_err());
    }

    #[test]
    fn mc_histogram_is_a_partition() {
        let links = [link(20.0, 5.0), link(15.0, 10.0), link(17.0, 3.0)];
        let h = codeword_histogram_mc(&links, 0.7, 16.14, 20_000, 9).unwrap();
        assert_relative_eq!(h.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let (p, se) = codeword_probability_mc(
            RelayMask::full(2).unwrap(),
            &[link(20.0, 0.0); 2],
            0.3,
            16.14,
            10_000,
            4,
        )
        .unwrap();
        assert_eq!((p, se), (1.0, 0.0));
    }
}
