//! Experiment drivers behind the command-line front end.
//!
//! Every command writes RFC-4180 CSV with a header row. Floats are printed
//! with the shortest representation that round-trips, so output is
//! byte-stable for a fixed seed. Column names carry their units.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::analysis::{analyze, Analysis};
use crate::error::Result;
use crate::orthant::Orthant;
use crate::quadrature::build_quadrature;
use crate::relay_set::{expected_active_closed_form, lemma1_residual};
use crate::scenario::{Scenario, SweepSpec};
use crate::shadowing::{KmsMatrix, NetworkConfig};
use crate::sim::{run_simulation_with, SimMetrics, SimOptions};

/// Scenario columns leading every row.
pub const SCENARIO_COLUMNS: &[&str] = &[
    "n",
    "rho1",
    "rho2",
    "mu_ar_db",
    "sigma_ar_db",
    "mu_br_db",
    "sigma_br_db",
    "mu_ab_db",
    "sigma_ab_db",
    "gamma_star_db",
];

pub const ANALYTIC_COLUMNS: &[&str] = &[
    "oper_ab",
    "p_out",
    "e_active",
    "e_active_closed_form",
    "tau",
    "p_i",
    "p_s",
    "p_c",
    "e_t_d_us",
    "e_t_coop_us",
    "e_t_c_us",
    "e_l",
    "s_direct_bps",
    "s_coop_bps",
    "throughput_bps",
    "energy_per_round_mj",
    "eta_bits_per_j",
];

pub const SIM_COLUMNS: &[&str] = &[
    "rounds",
    "seed",
    "throughput_bps",
    "throughput_se_bps",
    "eta_bits_per_j",
    "eta_se_bits_per_j",
    "outage_rate",
    "outage_se",
    "mean_active",
    "mean_active_se",
    "mean_contention_us",
    "mean_round_time_us",
    "mean_round_energy_mj",
];

fn scenario_fields(s: &Scenario, net: &NetworkConfig) -> Vec<String> {
    vec![
        s.n.to_string(),
        s.rho1.to_string(),
        s.rho2.to_string(),
        s.mu_ar_db.to_string(),
        s.sigma_ar_db.to_string(),
        s.mu_br_db.to_string(),
        s.sigma_br_db.to_string(),
        s.mu_ab_db.to_string(),
        net.ab_link.sigma_db.to_string(),
        s.gamma_star_db.to_string(),
    ]
}

/// Analytic results for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticOutcome {
    pub analysis: Analysis,
    /// Mean active-set size from the marginals alone.
    pub e_active_closed_form: f64,
}

impl AnalyticOutcome {
    pub fn fields(&self) -> Vec<String> {
        let r = &self.analysis.report;
        [
            r.oper_ab,
            r.p_out,
            r.e_active,
            self.e_active_closed_form,
            r.tau,
            r.p_i,
            r.p_s,
            r.p_c,
            r.e_t_d_us,
            r.e_t_coop_us,
            r.e_t_c_us,
            r.e_l,
            r.s_direct_bps,
            r.s_coop_bps,
            r.throughput_bps,
            r.energy_per_round_mj,
            r.eta_bits_per_joule,
        ]
        .iter()
        .map(f64::to_string)
        .collect()
    }
}

fn sim_fields(s: &Scenario, m: &SimMetrics) -> Vec<String> {
    let mut v = vec![m.rounds.to_string(), s.run.seed.to_string()];
    v.extend(
        [
            m.throughput_bps,
            m.throughput_se_bps,
            m.eta_bits_per_joule,
            m.eta_se,
            m.outage_rate,
            m.outage_se,
            m.mean_active,
            m.mean_active_se,
            m.mean_contention_us,
            m.mean_round_time_us,
            m.mean_round_energy_mj,
        ]
        .iter()
        .map(f64::to_string),
    );
    v
}

pub fn run_analytic(s: &Scenario) -> Result<AnalyticOutcome> {
    s.validate()?;
    let net = s.network()?;
    let rule = build_quadrature(s.run.quadrature)?;
    let orthant = Orthant::new(&rule)
        .with_scheme(s.scheme)
        .with_cap(s.run.enumeration_cap);
    let analysis = analyze(&net, &s.mac, &s.power, &orthant, s.model)?;
    Ok(AnalyticOutcome {
        analysis,
        e_active_closed_form: expected_active_closed_form(&net),
    })
}

pub fn run_simulated(s: &Scenario) -> Result<SimMetrics> {
    s.validate()?;
    let options = SimOptions {
        workers: s.run.workers,
        ..SimOptions::default()
    };
    run_simulation_with(
        &s.network()?,
        &s.mac,
        &s.power,
        s.run.rounds,
        s.run.seed,
        options,
    )
}

fn write_table<W: Write>(out: W, header: Vec<String>, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn names(cols: &[&str], prefix: &str) -> Vec<String> {
    cols.iter().map(|c| format!("{prefix}{c}")).collect()
}

/// Analytic pipeline; one CSV row.
pub fn cmd_analytic<W: Write>(s: &Scenario, out: W) -> Result<AnalyticOutcome> {
    let outcome = run_analytic(s)?;
    let mut header = names(SCENARIO_COLUMNS, "");
    header.extend(names(ANALYTIC_COLUMNS, ""));
    let mut row = scenario_fields(s, &s.network()?);
    row.extend(outcome.fields());
    write_table(out, header, &[row])?;
    Ok(outcome)
}

/// Simulator; one CSV row with standard errors. The worker count is not
/// part of the output, which is identical for any number of workers.
pub fn cmd_simulate<W: Write>(s: &Scenario, out: W) -> Result<SimMetrics> {
    let metrics = run_simulated(s)?;
    let mut header = names(SCENARIO_COLUMNS, "");
    header.extend(names(SIM_COLUMNS, ""));
    let mut row = scenario_fields(s, &s.network()?);
    row.extend(sim_fields(s, &metrics));
    write_table(out, header, &[row])?;
    Ok(metrics)
}

/// One sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub analytic: AnalyticOutcome,
    pub simulated: Option<SimMetrics>,
}

/// Evaluate every point (in parallel) and write one row per axis value, in
/// the order given. Analytic columns are prefixed `analytic_`, simulated
/// ones `sim_`; the simulated block is omitted when `simulate` is false.
pub fn cmd_sweep<W: Write>(spec: &SweepSpec, simulate: bool, out: W) -> Result<Vec<SweepRow>> {
    let points = spec.points()?;
    let rows: Vec<SweepRow> = points
        .par_iter()
        .zip(&spec.values)
        .map(|(s, &value)| {
            Ok(SweepRow {
                value,
                analytic: run_analytic(s)?,
                simulated: if simulate {
                    Some(run_simulated(s)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<_>>()?;

    let mut header = vec![format!("axis_{}", spec.axis.column())];
    header.extend(names(SCENARIO_COLUMNS, ""));
    header.extend(names(ANALYTIC_COLUMNS, "analytic_"));
    if simulate {
        header.extend(names(SIM_COLUMNS, "sim_"));
    }
    let mut table = Vec::with_capacity(rows.len());
    for (row, s) in rows.iter().zip(&points) {
        let mut r = vec![row.value.to_string()];
        r.extend(scenario_fields(s, &s.network()?));
        r.extend(row.analytic.fields());
        if let Some(m) = &row.simulated {
            r.extend(sim_fields(s, m));
        }
        table.push(r);
    }
    write_table(out, header, &table)?;
    Ok(rows)
}

/// Thresholds used by [`cmd_validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Standard errors allowed between a simulated estimate and its analytic value.
    pub stderr_multiple: f64,
    /// Relative throughput gap allowed between model and simulator.
    pub throughput_rel: f64,
    /// Relative energy-efficiency gap allowed between model and simulator.
    pub eta_rel: f64,
    pub closed_form_abs: f64,
    pub partition_abs: f64,
    pub lemma_abs: f64,
    pub matrix_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stderr_multiple: 3.0,
            throughput_rel: 0.10,
            eta_rel: 0.15,
            closed_form_abs: 1e-3,
            partition_abs: 1e-6,
            lemma_abs: 1e-8,
            matrix_abs: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Observed discrepancy.
    pub value: f64,
    /// Largest acceptable discrepancy.
    pub bound: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            value,
            bound,
        }
    }

    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// Fixed-width table, one line per check.
    pub fn render(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut s = format!(
            "{:<width$}  {:>12}  {:>12}  status\n",
            "check", "value", "bound"
        );
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "{:<width$}  {:>12.4e}  {:>12.4e}  {status}",
                c.name, c.value, c.bound
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed()).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.checks.len());
        s
    }
}

fn factor_error(n: usize, rho: f64) -> Result<f64> {
    let k = KmsMatrix::new(n, rho)?;
    let l = k.cholesky();
    let llt = &l * l.transpose();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = rho.powi((i as i32 - j as i32).abs());
            worst = worst.max((llt[(i, j)] - target).abs());
        }
    }
    let id = k.inverse() * &llt;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((id[(i, j)] - target).abs());
        }
    }
    Ok(worst)
}

/// Internal consistency checks of every stage for this scenario, then the
/// model against the simulator.
pub fn cmd_validate(s: &Scenario, tol: &Tolerances) -> Result<ValidationReport> {
    let net = s.network()?;
    let outcome = run_analytic(s)?;
    let rs = &outcome.analysis.relay_set;
    let r = &outcome.analysis.report;
    let mut checks = Vec::new();

    let rule = build_quadrature(s.run.quadrature)?;
    let half_gauss = 0.5 * std::f64::consts::PI.sqrt();
    checks.push(Check::new(
        "quadrature_zeroth_moment",
        (rule.integrate(|_| 1.0) - half_gauss).abs(),
        1e-12,
    ));
    checks.push(Check::new(
        "kms_factor_and_inverse_a",
        factor_error(net.n, net.rho1)?,
        tol.matrix_abs,
    ));
    checks.push(Check::new(
        "kms_factor_and_inverse_b",
        factor_error(net.n, net.rho2)?,
        tol.matrix_abs,
    ));
    for (side, dist) in [("a", &rs.dist_a), ("b", &rs.dist_b)] {
        let total: f64 = dist.iter().sum();
        checks.push(Check::new(
            format!("partition_of_unity_{side}"),
            (total - 1.0).abs(),
            tol.partition_abs,
        ));
    }
    let lemma = net
        .ar_links
        .iter()
        .map(|l| lemma1_residual(net.gamma_star_db, l.mu_db, l.sigma_db, net.rho1))
        .chain(
            net.br_links
                .iter()
                .map(|l| lemma1_residual(net.gamma_star_db, l.mu_db, l.sigma_db, net.rho2)),
        )
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "common_factor_marginal_residual",
        lemma,
        tol.lemma_abs,
    ));
    checks.push(Check::new(
        "mean_active_vs_closed_form",
        (r.e_active - outcome.e_active_closed_form).abs(),
        tol.closed_form_abs,
    ));
    let in_unit = |p: f64| if (0.0..=1.0).contains(&p) { 0.0 } else { 1.0 };
    checks.push(Check::new(
        "probabilities_in_unit_interval",
        in_unit(r.p_out) + in_unit(r.oper_ab) + in_unit(r.tau) + in_unit(r.p_s),
        0.0,
    ));

    let m = run_simulated(s)?;
    let rounds = m.rounds as f64;
    // a zero-variance estimate still gets the binomial error of the model value
    let outage_se = m.outage_se.max((r.p_out * (1.0 - r.p_out) / rounds).sqrt());
    checks.push(Check::new(
        "sim_outage_vs_p_out",
        (m.outage_rate - r.p_out).abs(),
        tol.stderr_multiple * outage_se + 1e-12,
    ));
    checks.push(Check::new(
        "sim_mean_active_vs_model",
        (m.mean_active - r.e_active).abs(),
        tol.stderr_multiple * m.mean_active_se + 1e-9,
    ));
    let rel = |a: f64, b: f64| {
        if b == 0.0 {
            (a - b).abs()
        } else {
            ((a - b) / b).abs()
        }
    };
    checks.push(Check::new(
        "sim_throughput_vs_model_rel",
        rel(r.throughput_bps, m.throughput_bps),
        tol.throughput_rel,
    ));
    checks.push(Check::new(
        "sim_eta_vs_model_rel",
        rel(r.eta_bits_per_joule, m.eta_bits_per_joule),
        tol.eta_rel,
    ));
    Ok(ValidationReport { checks })
}

/// Exit status for a failed validation run.
pub const EXIT_VALIDATION: i32 = 4;
