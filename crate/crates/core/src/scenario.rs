//! Scenario files: flat `key = value` text with units in the key names.
//!
//! Blank lines and `#` comments are ignored. Every key may appear at most
//! once. Shorthand keys (`mu_db`, `sigma_db`, `rho`) set both sides and are
//! applied before the side-specific keys, whatever their position in the
//! file. Per-relay lists (`mu_ar_per_relay_db = 20, 18, 15`) override the
//! homogeneous values and must have exactly `n` entries.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mac::{
    ContentionEnergy, ContentionPopulation, MacProfile, ModelOptions, PowerProfile, ThroughputForm,
};
use crate::orthant::{Scheme, DEFAULT_ENUMERATION_CAP};
use crate::quadrature::{DEFAULT_ORDER, MAX_ORDER};
use crate::shadowing::{LinkStat, NetworkConfig, RHO_MAX};

/// Run controls that are not part of the system model.
#[derive(Debug, Clone, PartialEq)]
pub struct RunControls {
    pub rounds: u64,
    pub seed: u64,
    pub quadrature: usize,
    pub enumeration_cap: usize,
    /// Simulator worker threads; 0 lets the thread pool decide.
    pub workers: usize,
}

impl Default for RunControls {
    fn default() -> Self {
        RunControls {
            rounds: 100_000,
            seed: 1,
            quadrature: DEFAULT_ORDER,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            workers: 0,
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub gamma_star_db: f64,
    pub mu_ar_db: f64,
    pub mu_br_db: f64,
    pub sigma_ar_db: f64,
    pub sigma_br_db: f64,
    pub mu_ab_db: f64,
    /// `None`: the direct link uses `sigma_ar_db`.
    pub sigma_ab_db: Option<f64>,
    pub mu_ar_per_relay_db: Option<Vec<f64>>,
    pub mu_br_per_relay_db: Option<Vec<f64>>,
    pub sigma_ar_per_relay_db: Option<Vec<f64>>,
    pub sigma_br_per_relay_db: Option<Vec<f64>>,
    pub mac: MacProfile,
    pub power: PowerProfile,
    pub run: RunControls,
    pub scheme: Scheme,
    pub model: ModelOptions,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n: 5,
            rho1: 0.0,
            rho2: 0.0,
            gamma_star_db: 16.14,
            mu_ar_db: 20.0,
            mu_br_db: 20.0,
            sigma_ar_db: 2.0,
            sigma_br_db: 2.0,
            mu_ab_db: 8.0,
            sigma_ab_db: None,
            mu_ar_per_relay_db: None,
            mu_br_per_relay_db: None,
            sigma_ar_per_relay_db: None,
            sigma_br_per_relay_db: None,
            mac: MacProfile::default(),
            power: PowerProfile::default(),
            run: RunControls::default(),
            scheme: Scheme::default(),
            model: ModelOptions::default(),
        }
    }
}

fn side_links(
    n: usize,
    mu: f64,
    sigma: f64,
    mus: &Option<Vec<f64>>,
    sigmas: &Option<Vec<f64>>,
) -> Result<Vec<LinkStat>> {
    (0..n)
        .map(|i| {
            let m = mus.as_ref().map_or(mu, |v| v[i]);
            let s = sigmas.as_ref().map_or(sigma, |v| v[i]);
            LinkStat::new(m, s)
        })
        .collect()
}

impl Scenario {
    /// Materialize the per-relay link statistics.
    pub fn network(&self) -> Result<NetworkConfig> {
        self.check_lists()?;
        let cfg = NetworkConfig {
            n: self.n,
            rho1: self.rho1,
            rho2: self.rho2,
            ar_links: side_links(
                self.n,
                self.mu_ar_db,
                self.sigma_ar_db,
                &self.mu_ar_per_relay_db,
                &self.sigma_ar_per_relay_db,
            )?,
            br_links: side_links(
                self.n,
                self.mu_br_db,
                self.sigma_br_db,
                &self.mu_br_per_relay_db,
                &self.sigma_br_per_relay_db,
            )?,
            ab_link: LinkStat::new(self.mu_ab_db, self.sigma_ab_db.unwrap_or(self.sigma_ar_db))?,
            gamma_star_db: self.gamma_star_db,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn check_lists(&self) -> Result<()> {
        let lists = [
            ("mu_ar_per_relay_db", &self.mu_ar_per_relay_db),
            ("mu_br_per_relay_db", &self.mu_br_per_relay_db),
            ("sigma_ar_per_relay_db", &self.sigma_ar_per_relay_db),
            ("sigma_br_per_relay_db", &self.sigma_br_per_relay_db),
        ];
        for (key, list) in lists {
            if let Some(v) = list {
                if v.len() != self.n {
                    return Err(Error::config(format!(
                        "{key} has {} entries but n = {}",
                        v.len(),
                        self.n
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.network()?;
        self.mac.validate()?;
        self.power.validate()?;
        if !(1..=MAX_ORDER).contains(&self.run.quadrature) {
            return Err(Error::config(format!(
                "quadrature order must lie in 1..={MAX_ORDER}"
            )));
        }
        if self.run.rounds == 0 {
            return Err(Error::config("rounds must be positive"));
        }
        Ok(())
    }

    /// Serialize every field; [`parse_scenario`] reads it back unchanged.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        kv("n", self.n.to_string());
        kv("rho1", self.rho1.to_string());
        kv("rho2", self.rho2.to_string());
        kv("gamma_star_db", self.gamma_star_db.to_string());
        kv("mu_ar_db", self.mu_ar_db.to_string());
        kv("mu_br_db", self.mu_br_db.to_string());
        kv("sigma_ar_db", self.sigma_ar_db.to_string());
        kv("sigma_br_db", self.sigma_br_db.to_string());
        kv("mu_ab_db", self.mu_ab_db.to_string());
        if let Some(s) = self.sigma_ab_db {
            kv("sigma_ab_db", s.to_string());
        }
        for (k, v) in [
            ("mu_ar_per_relay_db", &self.mu_ar_per_relay_db),
            ("mu_br_per_relay_db", &self.mu_br_per_relay_db),
            ("sigma_ar_per_relay_db", &self.sigma_ar_per_relay_db),
            ("sigma_br_per_relay_db", &self.sigma_br_per_relay_db),
        ] {
            if let Some(v) = v {
                kv(k, list(v));
            }
        }
        let m = &self.mac;
        kv("payload_bytes", m.payload_bytes.to_string());
        kv("mac_header_bytes", m.mac_header_bytes.to_string());
        kv("phy_header_us", m.phy_header_us.to_string());
        kv("slot_us", m.slot_us.to_string());
        kv("sifs_us", m.sifs_us.to_string());
        kv("difs_us", m.difs_us.to_string());
        kv("timeout_us", m.timeout_us.to_string());
        kv("data_rate_bps", m.data_rate_bps.to_string());
        kv("ctrl_rate_bps", m.ctrl_rate_bps.to_string());
        kv("ctrl_frame_bytes", m.ctrl_frame_bytes.to_string());
        kv("t_onc_us", m.t_onc_us.to_string());
        kv("cw_min", m.cw_min.to_string());
        kv("backoff_stages", m.backoff_stages.to_string());
        kv("p_tx_mw", self.power.p_tx_mw.to_string());
        kv("p_rx_mw", self.power.p_rx_mw.to_string());
        kv("p_idle_mw", self.power.p_idle_mw.to_string());
        kv("rounds", self.run.rounds.to_string());
        kv("seed", self.run.seed.to_string());
        kv("quadrature", self.run.quadrature.to_string());
        kv("enumeration_cap", self.run.enumeration_cap.to_string());
        kv("workers", self.run.workers.to_string());
        kv("orthant_scheme", self.scheme.to_string());
        kv("throughput_form", self.model.throughput.to_string());
        kv(
            "contention_energy",
            self.model.contention_energy.to_string(),
        );
        kv(
            "contention_population",
            self.model.contention_population.to_string(),
        );
        out
    }
}

impl Scenario {
    /// Re-parse with extra `key = value` assignments that take precedence
    /// over the current values. Parse errors in an override report line 0.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Scenario> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let covered = |key: &str| {
            overrides.iter().any(|(k, _)| {
                let k = k.trim();
                k == key
                    || (k == "mu_db" && (key == "mu_ar_db" || key == "mu_br_db"))
                    || (k == "sigma_db" && (key == "sigma_ar_db" || key == "sigma_br_db"))
                    || (k == "rho" && (key == "rho1" || key == "rho2"))
            })
        };
        let mut doc: String = self
            .emit()
            .lines()
            .filter(|l| l.split_once('=').is_some_and(|(k, _)| !covered(k.trim())))
            .map(|l| format!("{l}\n"))
            .collect();
        let base_lines = doc.lines().count();
        for (k, v) in overrides {
            let _ = writeln!(doc, "{} = {}", k.trim(), v.trim());
        }
        parse_scenario(&doc).map_err(|e| match e {
            Error::Parse { line, key, reason } => Error::Parse {
                line: if line > base_lines { 0 } else { line },
                key,
                reason,
            },
            other => other,
        })
    }
}

/// Split `KEY=VALUE`.
pub fn parse_assignment(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::config(format!("expected KEY=VALUE, got `{text}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Every recognized key.
pub const KEYS: &[&str] = &[
    "n",
    "rho",
    "rho1",
    "rho2",
    "gamma_star_db",
    "mu_db",
    "mu_ar_db",
    "mu_br_db",
    "sigma_db",
    "sigma_ar_db",
    "sigma_br_db",
    "mu_ab_db",
    "sigma_ab_db",
    "mu_ar_per_relay_db",
    "mu_br_per_relay_db",
    "sigma_ar_per_relay_db",
    "sigma_br_per_relay_db",
    "payload_bytes",
    "mac_header_bytes",
    "phy_header_us",
    "slot_us",
    "sifs_us",
    "difs_us",
    "timeout_us",
    "data_rate_bps",
    "ctrl_rate_bps",
    "ctrl_frame_bytes",
    "t_onc_us",
    "cw_min",
    "backoff_stages",
    "p_tx_mw",
    "p_rx_mw",
    "p_idle_mw",
    "rounds",
    "seed",
    "quadrature",
    "enumeration_cap",
    "workers",
    "orthant_scheme",
    "throughput_form",
    "contention_energy",
    "contention_population",
];

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            key: self.key.to_string(),
            reason: reason.into(),
        }
    }

    fn real(&self) -> Result<f64> {
        let v: f64 = self
            .value
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a number", self.value)))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("value must be finite"))
        }
    }

    fn nonneg(&self) -> Result<f64> {
        let v = self.real()?;
        if v < 0.0 {
            return Err(self.err(format!("must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64> {
        let v = self.real()?;
        if v <= 0.0 {
            return Err(self.err(format!("must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn rho(&self) -> Result<f64> {
        let v = self.real()?;
        if !(0.0..1.0).contains(&v) || v > RHO_MAX {
            return Err(self.err(format!(
                "correlation factor must lie in [0, {RHO_MAX}], got {v}"
            )));
        }
        Ok(v)
    }

    fn int<T: std::str::FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` is not a nonnegative integer", self.value)))
    }

    fn list(&self, nonneg: bool) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|s| {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| self.err(format!("`{}` is not a number", s.trim())))?;
                if !v.is_finite() || (nonneg && v < 0.0) {
                    return Err(self.err(format!("invalid list entry {v}")));
                }
                Ok(v)
            })
            .collect()
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|e: Error| self.err(e.to_string()))
    }
}

/// Parse a scenario document; absent keys keep their defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut entries: Vec<Entry<'_>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            key: content.to_string(),
            reason: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let entry = Entry { line, key, value };
        if !KEYS.contains(&key) {
            return Err(entry.err("unknown key"));
        }
        if value.is_empty() {
            return Err(entry.err("missing value"));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(entry.err(format!("duplicate key (first set on line {})", prev.line)));
        }
        entries.push(entry);
    }

    let mut s = Scenario::default();
    // shorthands first, so that side-specific keys win
    let order = |k: &str| ["mu_db", "sigma_db", "rho"].contains(&k);
    entries.sort_by_key(|e| !order(e.key));
    let mut list_lines = Vec::new();
    for e in &entries {
        match e.key {
            "n" => {
                s.n = e.int()?;
                if s.n == 0 {
                    return Err(e.err("must be at least 1"));
                }
            }
            "rho" => {
                s.rho1 = e.rho()?;
                s.rho2 = s.rho1;
            }
            "rho1" => s.rho1 = e.rho()?,
            "rho2" => s.rho2 = e.rho()?,
            "gamma_star_db" => s.gamma_star_db = e.real()?,
            "mu_db" => {
                s.mu_ar_db = e.real()?;
                s.mu_br_db = s.mu_ar_db;
            }
            "mu_ar_db" => s.mu_ar_db = e.real()?,
            "mu_br_db" => s.mu_br_db = e.real()?,
            "sigma_db" => {
                s.sigma_ar_db = e.nonneg()?;
                s.sigma_br_db = s.sigma_ar_db;
            }
            "sigma_ar_db" => s.sigma_ar_db = e.nonneg()?,
            "sigma_br_db" => s.sigma_br_db = e.nonneg()?,
            "mu_ab_db" => s.mu_ab_db = e.real()?,
            "sigma_ab_db" => s.sigma_ab_db = Some(e.nonneg()?),
            "mu_ar_per_relay_db" => {
                s.mu_ar_per_relay_db = Some(e.list(false)?);
                list_lines.push(e);
            }
            "mu_br_per_relay_db" => {
                s.mu_br_per_relay_db = Some(e.list(false)?);
                list_lines.push(e);
            }
            "sigma_ar_per_relay_db" => {
                s.sigma_ar_per_relay_db = Some(e.list(true)?);
                list_lines.push(e);
            }
            "sigma_br_per_relay_db" => {
                s.sigma_br_per_relay_db = Some(e.list(true)?);
                list_lines.push(e);
            }
            "payload_bytes" => s.mac.payload_bytes = e.int()?,
            "mac_header_bytes" => s.mac.mac_header_bytes = e.int()?,
            "phy_header_us" => s.mac.phy_header_us = e.nonneg()?,
            "slot_us" => s.mac.slot_us = e.nonneg()?,
            "sifs_us" => s.mac.sifs_us = e.nonneg()?,
            "difs_us" => s.mac.difs_us = e.nonneg()?,
            "timeout_us" => s.mac.timeout_us = e.nonneg()?,
            "data_rate_bps" => s.mac.data_rate_bps = e.positive()?,
            "ctrl_rate_bps" => s.mac.ctrl_rate_bps = e.positive()?,
            "ctrl_frame_bytes" => s.mac.ctrl_frame_bytes = e.int()?,
            "t_onc_us" => s.mac.t_onc_us = e.nonneg()?,
            "cw_min" => {
                s.mac.cw_min = e.int()?;
                if s.mac.cw_min < 2 {
                    return Err(e.err("must be at least 2"));
                }
            }
            "backoff_stages" => {
                s.mac.backoff_stages = e.int()?;
                if s.mac.backoff_stages > 16 {
                    return Err(e.err("must be at most 16"));
                }
            }
            "p_tx_mw" => s.power.p_tx_mw = e.nonneg()?,
            "p_rx_mw" => s.power.p_rx_mw = e.nonneg()?,
            "p_idle_mw" => s.power.p_idle_mw = e.nonneg()?,
            "rounds" => {
                s.run.rounds = e.int()?;
                if s.run.rounds == 0 {
                    return Err(e.err("must be at least 1"));
                }
            }
            "seed" => s.run.seed = e.int()?,
            "quadrature" => {
                s.run.quadrature = e.int()?;
                if !(1..=MAX_ORDER).contains(&s.run.quadrature) {
                    return Err(e.err(format!("must lie in 1..={MAX_ORDER}")));
                }
            }
            "enumeration_cap" => s.run.enumeration_cap = e.int()?,
            "workers" => s.run.workers = e.int()?,
            "orthant_scheme" => s.scheme = e.parsed()?,
            "throughput_form" => s.model.throughput = e.parsed::<ThroughputForm>()?,
            "contention_energy" => s.model.contention_energy = e.parsed::<ContentionEnergy>()?,
            "contention_population" => {
                s.model.contention_population = e.parsed::<ContentionPopulation>()?
            }
            other => unreachable!("key {other} is listed but not handled"),
        }
    }
    for e in list_lines {
        let len = e.value.split(',').count();
        if len != s.n {
            return Err(e.err(format!(
                "expected {} entries (one per relay), got {len}",
                s.n
            )));
        }
    }
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Sweep dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Shadowing deviation of every link (the direct link too, unless its
    /// deviation is set explicitly).
    Sigma,
    /// Correlation factor of both sides.
    Rho,
    /// Number of relays.
    N,
    /// Mean power of every relay link.
    Mu,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigma" => Ok(Axis::Sigma),
            "rho" => Ok(Axis::Rho),
            "n" => Ok(Axis::N),
            "mu" => Ok(Axis::Mu),
            other => Err(Error::config(format!(
                "unknown sweep axis `{other}` (expected sigma, rho, n or mu)"
            ))),
        }
    }
}

impl Axis {
    /// CSV column name of the axis.
    pub fn column(&self) -> &'static str {
        match self {
            Axis::Sigma => "sigma_db",
            Axis::Rho => "rho",
            Axis::N => "n",
            Axis::Mu => "mu_db",
        }
    }

    fn check(&self, v: f64) -> Result<()> {
        let ok = match self {
            Axis::Sigma => v >= 0.0 && v.is_finite(),
            Axis::Rho => (0.0..1.0).contains(&v) && v <= RHO_MAX,
            Axis::N => v >= 1.0 && v.fract() == 0.0 && v <= 64.0,
            Axis::Mu => v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "value {v} is outside the domain of axis {}",
                self.column()
            )))
        }
    }

    /// `base` with the axis set to `v`.
    pub fn apply(&self, base: &Scenario, v: f64) -> Result<Scenario> {
        self.check(v)?;
        let mut s = base.clone();
        match self {
            Axis::Sigma => {
                s.sigma_ar_db = v;
                s.sigma_br_db = v;
                s.sigma_ar_per_relay_db = None;
                s.sigma_br_per_relay_db = None;
            }
            Axis::Rho => {
                s.rho1 = v;
                s.rho2 = v;
            }
            Axis::N => s.n = v as usize,
            Axis::Mu => {
                s.mu_ar_db = v;
                s.mu_br_db = v;
                s.mu_ar_per_relay_db = None;
                s.mu_br_per_relay_db = None;
            }
        }
        s.check_lists()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub fixed: Scenario,
}

impl SweepSpec {
    pub fn new(axis: Axis, values: Vec<f64>, fixed: Scenario) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("a sweep needs at least one value"));
        }
        for &v in &values {
            axis.apply(&fixed, v)?;
        }
        Ok(SweepSpec {
            axis,
            values,
            fixed,
        })
    }

    pub fn points(&self) -> Result<Vec<Scenario>> {
        self.values
            .iter()
            .map(|&v| self.axis.apply(&self.fixed, v))
            .collect()
    }
}

/// Parse a comma-separated list of numbers, e.g. `0,2,4.5`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("`{}` is not a number", s.trim())))
        })
        .collect()
}
