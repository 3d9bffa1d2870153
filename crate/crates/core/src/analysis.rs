//! End-to-end analytical pipeline: link statistics to MAC-layer metrics.

use crate::error::Result;
use crate::mac::{analytic_report, AnalyticReport, MacProfile, ModelOptions, PowerProfile};
use crate::orthant::Orthant;
use crate::relay_set::{
    analyze_relay_set, expected_active_from_distribution, outage_probability, RelaySetAnalysis,
};
use crate::shadowing::{oper, NetworkConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub relay_set: RelaySetAnalysis,
    pub report: AnalyticReport,
}

/// OPER of the direct link, both codeword distributions, the active-set
/// distribution, then the MAC model.
pub fn analyze(
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
    orthant: &Orthant<'_>,
    options: ModelOptions,
) -> Result<Analysis> {
    let relay_set = analyze_relay_set(config, orthant)?;
    let oper_ab = oper(&config.ab_link, config.gamma_star_db);
    let p_out = outage_probability(&relay_set.set);
    let e_active = expected_active_from_distribution(&relay_set.set);
    let report = analytic_report(config.n, oper_ab, p_out, e_active, profile, power, options)?;
    Ok(Analysis { relay_set, report })
}
