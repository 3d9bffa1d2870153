//! Analytical MAC-layer model of DCF contention and its throughput and energy cost.
//!
//! Durations are in microseconds and powers in milliwatts, so raw energies
//! come out in mW·µs (1 mW·µs = 1e-6 mJ). Reports convert to mJ.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const MODULE: &str = "mac-model";

/// Frame format and timing of the MAC layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MacProfile {
    pub payload_bytes: u32,
    pub mac_header_bytes: u32,
    pub phy_header_us: f64,
    pub slot_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub timeout_us: f64,
    pub data_rate_bps: f64,
    pub ctrl_rate_bps: f64,
    /// Size of the RFC and ACK control frames.
    pub ctrl_frame_bytes: u32,
    /// Time to network-code the two packets at a relay.
    pub t_onc_us: f64,
    pub cw_min: u32,
    pub backoff_stages: u32,
}

impl Default for MacProfile {
    fn default() -> Self {
        MacProfile {
            payload_bytes: 1500,
            mac_header_bytes: 34,
            phy_header_us: 96.0,
            slot_us: 20.0,
            sifs_us: 10.0,
            difs_us: 50.0,
            timeout_us: 80.0,
            data_rate_bps: 54e6,
            ctrl_rate_bps: 6e6,
            ctrl_frame_bytes: 14,
            t_onc_us: 0.0,
            cw_min: 32,
            backoff_stages: 5,
        }
    }
}

impl MacProfile {
    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("phy_header_us", self.phy_header_us),
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("timeout_us", self.timeout_us),
            ("t_onc_us", self.t_onc_us),
        ];
        for (name, v) in durations {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be a finite duration >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("data_rate_bps", self.data_rate_bps),
            ("ctrl_rate_bps", self.ctrl_rate_bps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cw_min < 2 {
            return Err(Error::config(format!(
                "cw_min must be at least 2, got {}",
                self.cw_min
            )));
        }
        if self.backoff_stages > 16 {
            return Err(Error::config(format!(
                "backoff_stages must be at most 16, got {}",
                self.backoff_stages
            )));
        }
        Ok(())
    }

    pub fn payload_bits(&self) -> f64 {
        8.0 * self.payload_bytes as f64
    }

    /// Airtime of a data frame (`a`, `b` or `a xor b`).
    pub fn t_data_us(&self) -> f64 {
        self.phy_header_us
            + 8.0 * (self.payload_bytes + self.mac_header_bytes) as f64 / self.data_rate_bps * 1e6
    }

    /// Airtime of an RFC or ACK frame.
    pub fn t_ctrl_us(&self) -> f64 {
        self.phy_header_us + 8.0 * self.ctrl_frame_bytes as f64 / self.ctrl_rate_bps * 1e6
    }

    /// Fixed start of a cooperation phase: SIFS, then the RFC carrying `b`.
    pub fn t_def_us(&self) -> f64 {
        self.sifs_us + self.t_ctrl_us() + self.t_data_us()
    }

    /// Channel time lost to one collision of coded packets.
    pub fn t_col_us(&self) -> f64 {
        self.difs_us + self.t_data_us() + self.sifs_us
    }

    /// Time from the end of contention to the end of the round on success.
    pub fn t_delivery_us(&self) -> f64 {
        self.t_data_us() + 2.0 * self.sifs_us + 2.0 * self.t_ctrl_us()
    }

    /// Largest contention window, `cw_min * 2^stages`.
    pub fn cw_max(&self) -> u32 {
        self.cw_min.saturating_mul(1 << self.backoff_stages)
    }
}

/// Power drawn by a node in each radio state.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub p_tx_mw: f64,
    pub p_rx_mw: f64,
    pub p_idle_mw: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile {
            p_tx_mw: 1900.0,
            p_rx_mw: 1340.0,
            p_idle_mw: 1340.0,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_tx_mw", self.p_tx_mw),
            ("p_rx_mw", self.p_rx_mw),
            ("p_idle_mw", self.p_idle_mw),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be a finite power >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// How cooperative throughput is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThroughputForm {
    /// `S_d + S_coop` with separate denominators `E[T_d]` and
    /// `E[T_d] + E[T_coop]`.
    #[default]
    SumOfRatios,
    /// Expected delivered bits over expected round time,
    /// `E[T_d] + OPER_AB E[T_coop]`, which is what a long simulation measures.
    Renewal,
}

/// How the contention energy is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContentionEnergy {
    /// Idle and collision energies weighted by the expected number of idle
    /// and collided slots before the success, the same weights as in
    /// `E[T_C]`.
    #[default]
    PerContention,
    /// Idle and collision energies weighted by the per-slot probabilities
    /// `p_i` and `p_c` only (the energy of one average slot).
    PerSlot,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::config(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: ", $($text, " ",)+ ")"),
                        other
                    ))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text,)+ })
            }
        }
    };
}

/// Which contender count drives the DCF model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContentionPopulation {
    /// The unconditional mean active-set size `E[|A|]`.
    #[default]
    Unconditional,
    /// The mean active-set size given that cooperation takes place,
    /// `E[|A|] / (1 - p_out)`; contention never happens with an empty set.
    GivenCooperation,
}

text_enum!(ThroughputForm { SumOfRatios => "sum-of-ratios", Renewal => "renewal" });
text_enum!(ContentionEnergy { PerContention => "per-contention", PerSlot => "per-slot" });
text_enum!(ContentionPopulation { Unconditional => "unconditional", GivenCooperation => "given-cooperation" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelOptions {
    pub throughput: ThroughputForm,
    pub contention_energy: ContentionEnergy,
    pub contention_population: ContentionPopulation,
}

/// Per-slot channel states during contention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionProbs {
    pub p_i: f64,
    pub p_s: f64,
    pub p_c: f64,
}

fn bianchi_tau(p: f64, w: f64, m: u32) -> f64 {
    // 2(1-2p) / ((1-2p)(W+1) + pW(1-(2p)^m)) with the removable
    // singularity at p = 1/2 divided out
    let geometric: f64 = (0..m).map(|i| (2.0 * p).powi(i as i32)).sum();
    2.0 / (1.0 + w + p * w * geometric)
}

/// Transmission probability per slot of a saturated DCF station among
/// `e_active` contenders (the Bianchi fixed point).
///
/// `e_active` may be fractional; the conditional collision probability uses
/// the real exponent `max(e_active - 1, 0)`.
pub fn tau_fixed_point(e_active: f64, cw_min: u32, stages: u32) -> Result<f64> {
    if !(e_active >= 0.0 && e_active.is_finite()) {
        return Err(Error::config(format!(
            "expected active count must be >= 0, got {e_active}"
        )));
    }
    if cw_min < 2 {
        return Err(Error::config(format!(
            "cw_min must be at least 2, got {cw_min}"
        )));
    }
    let w = cw_min as f64;
    let others = (e_active - 1.0).max(0.0);
    let map = |tau: f64| bianchi_tau(1.0 - (1.0 - tau).powf(others), w, stages);
    let residual = |tau: f64| tau - map(tau);
    const TOL: f64 = 1e-12;

    let mut tau = 2.0 / (w + 1.0);
    for _ in 0..10_000 {
        let next = 0.5 * tau + 0.5 * map(tau);
        if (next - tau).abs() < TOL {
            tau = next;
            break;
        }
        tau = next;
    }
    if residual(tau).abs() < 1e-10 {
        return Ok(tau);
    }
    // residual is negative near 0 and positive at 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    if residual(tau).abs() < 1e-10 {
        Ok(tau)
    } else {
        Err(Error::numerical(
            MODULE,
            format!("transmission-probability fixed point did not converge for e = {e_active}"),
        ))
    }
}

/// Idle, success and collision probabilities of a slot with `e_active`
/// contenders each transmitting with probability `tau`.
///
/// With fewer than one expected contender the real-exponent formulas give
/// `e tau (1-tau)^(e-1) > 1-(1-tau)^e`, i.e. a slightly negative collision
/// probability; the success probability is capped at `p_tr` so that `p_c = 0`.
pub fn contention_probs(tau: f64, e_active: f64) -> ContentionProbs {
    if e_active <= 0.0 {
        return ContentionProbs {
            p_i: 1.0,
            p_s: 0.0,
            p_c: 0.0,
        };
    }
    let p_tr = 1.0 - (1.0 - tau).powf(e_active);
    let p_s = (e_active * tau * (1.0 - tau).powf(e_active - 1.0)).min(p_tr);
    ContentionProbs {
        p_i: 1.0 - p_tr,
        p_s,
        p_c: p_tr - p_s,
    }
}

/// Expected number of idle and collided slots before the first success.
fn slots_before_success(probs: &ContentionProbs) -> Result<(f64, f64)> {
    if probs.p_s <= 0.0 {
        return Err(Error::numerical(
            MODULE,
            "success probability is zero: contention never ends",
        ));
    }
    if probs.p_s >= 1.0 {
        return Ok((0.0, 0.0));
    }
    let failures = 1.0 / probs.p_s - 1.0;
    let rest = 1.0 - probs.p_s;
    Ok((failures * probs.p_i / rest, failures * probs.p_c / rest))
}

/// Mean contention time until a coded packet goes through, in µs.
pub fn expected_contention_time(probs: &ContentionProbs, profile: &MacProfile) -> Result<f64> {
    let (idle, collided) = slots_before_success(probs)?;
    Ok(idle * profile.slot_us + collided * profile.t_col_us())
}

/// Round `e_active` half-up to an integer contender count, at least 1.
pub fn contender_count(e_active: f64) -> u64 {
    ((e_active + 0.5).floor() as u64).max(1)
}

/// Mean number of relays in a collision: binomial over the rounded
/// contender count, conditioned on at least two transmitting.
pub fn expected_colliders(e_active: f64, tau: f64) -> f64 {
    let m = contender_count(e_active);
    if m < 2 || tau <= 0.0 {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut binom = 1.0f64;
    for l in 1..=m {
        binom *= (m - l + 1) as f64 / l as f64;
        if l >= 2 {
            let term = binom * tau.powi(l as i32) * (1.0 - tau).powi((m - l) as i32);
            num += l as f64 * term;
            den += term;
        }
    }
    if den > 0.0 {
        num / den
    } else {
        2.0
    }
}

/// Expected durations of one communication round, in µs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Durations {
    pub t_d: f64,
    pub t_def: f64,
    pub t_c: f64,
    pub t_cont: f64,
    pub t_ovh: f64,
    pub t_coop: f64,
}

/// Expected energies in mJ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    pub direct: f64,
    pub outage: f64,
    pub minimum: f64,
    pub contention: f64,
    pub coop: f64,
    pub total: f64,
}

/// Every quantity of the analytical model for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub oper_ab: f64,
    pub p_out: f64,
    pub e_active: f64,
    pub tau: f64,
    pub p_i: f64,
    pub p_s: f64,
    pub p_c: f64,
    pub e_t_d_us: f64,
    pub e_t_coop_us: f64,
    pub e_t_c_us: f64,
    pub e_l: f64,
    pub throughput_bps: f64,
    pub s_direct_bps: f64,
    pub s_coop_bps: f64,
    pub energy_per_round_mj: f64,
    pub eta_bits_per_joule: f64,
    pub durations: Durations,
    pub energy: EnergyLedger,
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Contention state shared by the throughput and energy models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contention {
    pub tau: f64,
    pub probs: ContentionProbs,
    /// Expected idle and collided slots before the success.
    pub idle_slots: f64,
    pub collided_slots: f64,
    pub e_l: f64,
}

impl Contention {
    /// Contention among `e_active` relays. When cooperation never happens
    /// (`p_out = 1`) the contention is irrelevant and reported as zero.
    pub fn new(e_active: f64, p_out: f64, profile: &MacProfile) -> Result<Self> {
        let tau = tau_fixed_point(e_active, profile.cw_min, profile.backoff_stages)?;
        let probs = contention_probs(tau, e_active);
        let (idle_slots, collided_slots) = if p_out >= 1.0 {
            (0.0, 0.0)
        } else {
            slots_before_success(&probs)?
        };
        Ok(Contention {
            tau,
            probs,
            idle_slots,
            collided_slots,
            e_l: expected_colliders(e_active, tau),
        })
    }

    pub fn time_us(&self, profile: &MacProfile) -> f64 {
        self.idle_slots * profile.slot_us + self.collided_slots * profile.t_col_us()
    }
}

/// Expected round durations.
pub fn durations(p_out: f64, contention: &Contention, profile: &MacProfile) -> Durations {
    let t_d = profile.t_data_us();
    let t_def = profile.t_def_us();
    let t_c = contention.time_us(profile);
    let t_cont = profile.t_onc_us + profile.difs_us + t_c + profile.t_delivery_us();
    let t_ovh = p_out * profile.timeout_us + (1.0 - p_out) * t_cont;
    Durations {
        t_d,
        t_def,
        t_c,
        t_cont,
        t_ovh,
        t_coop: t_def + t_ovh,
    }
}

/// Direct, cooperative and total throughput in b/s.
pub fn throughput(
    oper_ab: f64,
    p_out: f64,
    d: &Durations,
    profile: &MacProfile,
    form: ThroughputForm,
) -> (f64, f64, f64) {
    let bits = profile.payload_bits();
    let (direct, coop) = match form {
        ThroughputForm::SumOfRatios => (
            (1.0 - oper_ab) * bits / d.t_d,
            2.0 * oper_ab * (1.0 - p_out) * bits / (d.t_d + d.t_coop),
        ),
        ThroughputForm::Renewal => {
            let t = d.t_d + oper_ab * d.t_coop;
            (
                (1.0 - oper_ab) * bits / t,
                2.0 * oper_ab * (1.0 - p_out) * bits / t,
            )
        }
    };
    // µs to s
    (direct * 1e6, coop * 1e6, (direct + coop) * 1e6)
}

/// Expected energy ledger of one round for `n` relays, in mJ.
pub fn energy_ledger(
    n: usize,
    oper_ab: f64,
    p_out: f64,
    contention: &Contention,
    profile: &MacProfile,
    power: &PowerProfile,
    mode: ContentionEnergy,
) -> EnergyLedger {
    let nf = n as f64;
    let all = nf + 2.0;
    let (tx, rx, idle) = (power.p_tx_mw, power.p_rx_mw, power.p_idle_mw);
    let t_a = profile.t_data_us();
    let t_rfc_b = profile.t_ctrl_us() + profile.t_data_us();
    let t_ab = profile.t_data_us();
    let t_ack = profile.t_ctrl_us();
    let sifs = profile.sifs_us;

    let direct = tx * t_a + (nf + 1.0) * rx * t_a;
    let outage = all * idle * profile.timeout_us;
    let minimum = all * idle * sifs
        + tx * t_rfc_b
        + (nf + 1.0) * rx * t_rfc_b
        + all * idle * profile.t_onc_us
        + all * idle * profile.difs_us
        + tx * t_ab
        + 2.0 * rx * t_ab
        + (nf - 1.0) * idle * t_ab
        + all * idle * sifs
        + 2.0 * tx * t_ack
        + 2.0 * (nf + 1.0) * rx * t_ack
        + all * idle * sifs;

    let t_col = profile.t_col_us();
    let e_l = contention.e_l;
    let idle_slot = all * idle * profile.slot_us;
    let collision = e_l * tx * t_col + 2.0 * rx * t_col + (nf - e_l) * idle * t_col;
    let contention_energy = match mode {
        ContentionEnergy::PerSlot => {
            contention.probs.p_i * idle_slot + contention.probs.p_c * collision
        }
        ContentionEnergy::PerContention => {
            contention.idle_slots * idle_slot + contention.collided_slots * collision
        }
    };
    let coop = p_out * outage + (1.0 - p_out) * (minimum + contention_energy);
    let total = direct + oper_ab * coop;
    let mj = 1e-6;
    EnergyLedger {
        direct: direct * mj,
        outage: outage * mj,
        minimum: minimum * mj,
        contention: contention_energy * mj,
        coop: coop * mj,
        total: total * mj,
    }
}

/// Expected useful bits delivered per round.
pub fn delivered_bits(oper_ab: f64, p_out: f64, profile: &MacProfile) -> f64 {
    let bits = profile.payload_bits();
    (1.0 - oper_ab) * bits + 2.0 * oper_ab * (1.0 - p_out) * bits
}

/// Full analytical evaluation from the PHY-layer inputs.
pub fn analytic_report(
    n: usize,
    oper_ab: f64,
    p_out: f64,
    e_active: f64,
    profile: &MacProfile,
    power: &PowerProfile,
    options: ModelOptions,
) -> Result<AnalyticReport> {
    if n == 0 {
        return Err(Error::config("number of relays must be positive"));
    }
    check_probability("OPER_AB", oper_ab)?;
    check_probability("p_out", p_out)?;
    if !(0.0..=n as f64 + 1e-9).contains(&e_active) {
        return Err(Error::config(format!(
            "expected active count {e_active} outside [0, {n}]"
        )));
    }
    profile.validate()?;
    power.validate()?;

    let contenders = match options.contention_population {
        ContentionPopulation::GivenCooperation if p_out < 1.0 => {
            (e_active / (1.0 - p_out)).min(n as f64)
        }
        _ => e_active,
    };
    let contention = Contention::new(contenders, p_out, profile)?;
    let d = durations(p_out, &contention, profile);
    let (s_direct, s_coop, s_total) = throughput(oper_ab, p_out, &d, profile, options.throughput);
    let energy = energy_ledger(
        n,
        oper_ab,
        p_out,
        &contention,
        profile,
        power,
        options.contention_energy,
    );
    let bits = delivered_bits(oper_ab, p_out, profile);
    let eta = if bits > 0.0 {
        bits / (energy.total * 1e-3)
    } else {
        0.0
    };
    Ok(AnalyticReport {
        oper_ab,
        p_out,
        e_active,
        tau: contention.tau,
        p_i: contention.probs.p_i,
        p_s: contention.probs.p_s,
        p_c: contention.probs.p_c,
        e_t_d_us: d.t_d,
        e_t_coop_us: d.t_coop,
        e_t_c_us: d.t_c,
        e_l: contention.e_l,
        throughput_bps: s_total,
        s_direct_bps: s_direct,
        s_coop_bps: s_coop,
        energy_per_round_mj: energy.total,
        eta_bits_per_joule: eta,
        durations: d,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frame_airtimes() {
        let p = MacProfile::default();
        assert_relative_eq!(p.t_data_us(), 96.0 + 8.0 * 1534.0 / 54.0, epsilon = 1e-12);
        assert_relative_eq!(p.t_ctrl_us(), 96.0 + 14.0 * 8.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(
            p.t_def_us(),
            10.0 + p.t_ctrl_us() + p.t_data_us(),
            epsilon = 1e-12
        );
        assert_relative_eq!(p.t_col_us(), 60.0 + p.t_data_us(), epsilon = 1e-12);
        assert_eq!(p.cw_max(), 1024);
    }

    #[test]
    fn tau_single_contender() {
        let tau = tau_fixed_point(1.0, 32, 5).unwrap();
        assert_relative_eq!(tau, 2.0 / 33.0, epsilon = 1e-14);
        assert_relative_eq!(
            tau_fixed_point(0.0, 32, 5).unwrap(),
            2.0 / 33.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn tau_many_contenders() {
        for e in [2.0, 3.7, 5.0, 10.0, 50.0] {
            let tau = tau_fixed_point(e, 32, 5).unwrap();
            assert!(tau > 0.0 && tau <= 2.0 / 33.0);
            let p = 1.0 - (1.0f64 - tau).powf(e - 1.0);
            let w = 32.0;
            let direct = 2.0 * (1.0 - 2.0 * p)
                / ((1.0 - 2.0 * p) * (w + 1.0) + p * w * (1.0 - (2.0 * p).powi(5)));
            assert!((tau - direct).abs() < 1e-10, "e = {e}");
        }
        assert!(tau_fixed_point(-1.0, 32, 5).is_err());
    }

    #[test]
    fn slot_probabilities() {
        let c = contention_probs(2.0 / 33.0, 1.0);
        assert_eq!(c.p_c, 0.0);
        assert_relative_eq!(c.p_s, 2.0 / 33.0, epsilon = 1e-15);
        let c = contention_probs(0.06, 3.2);
        assert_relative_eq!(c.p_i + c.p_s + c.p_c, 1.0, epsilon = 1e-12);
        assert!(c.p_c > 0.0);
        let c = contention_probs(0.06, 0.4);
        assert!(c.p_c == 0.0 && c.p_s > 0.0);
        let c = contention_probs(1e-12, 3.0);
        assert!(c.p_i > 1.0 - 1e-11);
    }

    #[test]
    fn contention_time() {
        let p = MacProfile::default();
        let sure = ContentionProbs {
            p_i: 0.0,
            p_s: 1.0,
            p_c: 0.0,
        };
        assert_eq!(expected_contention_time(&sure, &p).unwrap(), 0.0);
        let c = contention_probs(2.0 / 33.0, 1.0);
        assert_relative_eq!(
            expected_contention_time(&c, &p).unwrap(),
            310.0,
            epsilon = 1e-9
        );
        let never = ContentionProbs {
            p_i: 1.0,
            p_s: 0.0,
            p_c: 0.0,
        };
        assert!(expected_contention_time(&never, &p).is_err());
    }

    #[test]
    fn collider_mean() {
        let tau = 0.05;
        assert_eq!(expected_colliders(2.0, tau), 2.0);
        assert_eq!(expected_colliders(2.49, tau), 2.0);
        assert!(expected_colliders(2.5, tau) > 2.0);
        assert_eq!(contender_count(2.5), 3);
        assert_eq!(contender_count(0.2), 1);
        assert_eq!(expected_colliders(1.0, tau), 0.0);
        let m = expected_colliders(10.0, 0.3);
        assert!(m > 2.0 && m < 10.0);
    }

    fn report(oper: f64, p_out: f64, e: f64, n: usize) -> AnalyticReport {
        analytic_report(
            n,
            oper,
            p_out,
            e,
            &MacProfile::default(),
            &PowerProfile::default(),
            ModelOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn direct_only_limit() {
        let r = report(0.0, 0.3, 0.7, 1);
        assert_eq!(r.s_coop_bps, 0.0);
        assert_relative_eq!(
            r.throughput_bps,
            12000.0 / MacProfile::default().t_data_us() * 1e6,
            epsilon = 1e-6
        );
        assert_relative_eq!(r.throughput_bps, 37.12e6, max_relative = 1e-3);
    }

    #[test]
    fn total_outage() {
        let r = report(1.0, 1.0, 0.0, 3);
        assert_eq!(r.throughput_bps, 0.0);
        assert_eq!(r.eta_bits_per_joule, 0.0);
        assert_relative_eq!(r.energy.coop, 5.0 * 1340.0 * 80.0 * 1e-6, epsilon = 1e-15);
    }

    #[test]
    fn throughput_is_sum_of_parts_and_monotone_in_outage() {
        let mut last = f64::INFINITY;
        for p_out in [0.0, 0.1, 0.4, 0.8, 1.0] {
            let r = report(0.7, p_out, 2.0, 3);
            assert_relative_eq!(
                r.throughput_bps,
                r.s_direct_bps + r.s_coop_bps,
                max_relative = 1e-14
            );
            assert!(r.throughput_bps <= last);
            last = r.throughput_bps;
        }
    }

    #[test]
    fn energy_ledger_recomputed() {
        let p = MacProfile::default();
        let w = PowerProfile::default();
        let r = report(0.9, 0.2, 2.7, 4);
        let e = r.energy;
        assert_relative_eq!(
            e.coop,
            0.2 * e.outage + 0.8 * (e.minimum + e.contention),
            max_relative = 1e-12
        );
        assert_relative_eq!(e.total, e.direct + 0.9 * e.coop, max_relative = 1e-12);
        let direct = (w.p_tx_mw + 5.0 * w.p_rx_mw) * p.t_data_us() * 1e-6;
        assert_relative_eq!(e.direct, direct, max_relative = 1e-12);
        let bits = 0.1 * 12000.0 + 2.0 * 0.9 * 0.8 * 12000.0;
        assert_relative_eq!(
            r.eta_bits_per_joule,
            bits / (e.total * 1e-3),
            max_relative = 1e-12
        );
    }

    #[test]
    fn renewal_form_shares_denominator() {
        let opts = ModelOptions {
            throughput: ThroughputForm::Renewal,
            ..ModelOptions::default()
        };
        let p = MacProfile::default();
        let r = analytic_report(2, 0.6, 0.1, 1.5, &p, &PowerProfile::default(), opts).unwrap();
        let t = r.e_t_d_us + 0.6 * r.e_t_coop_us;
        let bits = 0.4 * 12000.0 + 2.0 * 0.6 * 0.9 * 12000.0;
        assert_relative_eq!(r.throughput_bps, bits / t * 1e6, max_relative = 1e-12);
        assert_eq!(
            "renewal".parse::<ThroughputForm>().unwrap(),
            ThroughputForm::Renewal
        );
        assert_eq!(ContentionEnergy::PerSlot.to_string(), "per-slot");
        assert!("bogus".parse::<ContentionEnergy>().is_err());
    }

    #[test]
    fn rejects_out_of_range_inputs() {
        let (p, w) = (MacProfile::default(), PowerProfile::default());
        let o = ModelOptions::default();
        assert!(analytic_report(0, 0.5, 0.5, 0.0, &p, &w, o).is_err());
        assert!(analytic_report(2, 1.5, 0.5, 1.0, &p, &w, o).is_err());
        assert!(analytic_report(2, 0.5, 0.5, 3.0, &p, &w, o).is_err());
        let bad = MacProfile {
            cw_min: 1,
            ..MacProfile::default()
        };
        assert!(analytic_report(2, 0.5, 0.5, 1.0, &bad, &w, o).is_err());
    }
}
