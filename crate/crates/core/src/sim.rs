//! Packet-level Monte Carlo simulator of cooperative rounds.
//!
//! One round: A sends its packet directly to B. If B fails, B broadcasts an
//! RFC with its own packet `b` piggybacked. Relays that decoded both packets
//! contend with slotted DCF backoff to forward `a xor b`, and two ACKs close
//! the round. With no such relay everybody waits out the timeout.
//!
//! Shadowing is drawn fresh every round and held for the whole round.
//! Rounds are split into fixed-size chunks. Each chunk has its own
//! `Xoshiro256PlusPlus` stream: the seed, jumped once per chunk index. Chunk
//! tallies are merged in chunk order, so results do not depend on how many
//! worker threads run the chunks.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mac::{MacProfile, PowerProfile};
use crate::orthant::RelayMask;
use crate::shadowing::{sample_correlated_gains_into, NetworkConfig};

/// Rounds per RNG stream.
pub const CHUNK_ROUNDS: u64 = 8192;

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub direct_success: bool,
    /// Relays that decoded both packets, whether or not they were needed.
    pub active_mask: RelayMask,
    /// Cooperation was requested and no relay could help.
    pub outage: bool,
    pub idle_slots: u64,
    pub collisions: u64,
    /// Sum over collisions of the number of colliding relays.
    pub colliders_total: u64,
    pub round_time_us: f64,
    pub round_energy_mj: f64,
    pub delivered_bits: u64,
}

impl RoundOutcome {
    pub fn contention_us(&self, profile: &MacProfile) -> f64 {
        self.idle_slots as f64 * profile.slot_us + self.collisions as f64 * profile.t_col_us()
    }
}

/// Reusable buffers for [`run_round`].
#[derive(Debug, Default, Clone)]
pub struct RoundScratch {
    ar: Vec<f64>,
    br: Vec<f64>,
    counters: Vec<u32>,
    stages: Vec<u32>,
}

/// Radio energy bookkeeping in mW·µs.
struct Meter<'a> {
    power: &'a PowerProfile,
    nodes: f64,
    energy: f64,
    time: f64,
}

impl Meter<'_> {
    /// `tx` transmitters and `rx` receivers for `dt`; everyone else idles.
    fn phase(&mut self, dt: f64, tx: f64, rx: f64) {
        let idle = self.nodes - tx - rx;
        self.energy +=
            dt * (tx * self.power.p_tx_mw + rx * self.power.p_rx_mw + idle * self.power.p_idle_mw);
        self.time += dt;
    }
}

pub fn validate_for_simulation(
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
) -> Result<()> {
    config.validate()?;
    profile.validate()?;
    power.validate()?;
    if config.n > RelayMask::MAX_WIDTH {
        return Err(Error::config(format!(
            "the simulator supports at most {} relays, got {}",
            RelayMask::MAX_WIDTH,
            config.n
        )));
    }
    Ok(())
}

/// Simulate one round. The configuration is assumed valid (see
/// [`validate_for_simulation`]).
pub fn run_round<R: Rng + ?Sized>(
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
    rng: &mut R,
    scratch: &mut RoundScratch,
) -> RoundOutcome {
    let n = config.n;
    let g = config.gamma_star_db;

    let z: f64 = rng.sample(StandardNormal);
    let ab = config.ab_link.mu_db + config.ab_link.sigma_db * z;
    scratch.ar.resize(n, 0.0);
    scratch.br.resize(n, 0.0);
    sample_correlated_gains_into(&config.ar_links, config.rho1, rng, &mut scratch.ar);
    sample_correlated_gains_into(&config.br_links, config.rho2, rng, &mut scratch.br);
    let bits = scratch
        .ar
        .iter()
        .zip(&scratch.br)
        .enumerate()
        .fold(0u64, |acc, (i, (a, b))| {
            acc | (((*a > g) && (*b > g)) as u64) << i
        });
    let active_mask = RelayMask::new(bits, n).expect("mask width checked by validation");

    let mut meter = Meter {
        power,
        nodes: n as f64 + 2.0,
        energy: 0.0,
        time: 0.0,
    };
    let mut out = RoundOutcome {
        direct_success: false,
        active_mask,
        outage: false,
        idle_slots: 0,
        collisions: 0,
        colliders_total: 0,
        round_time_us: 0.0,
        round_energy_mj: 0.0,
        delivered_bits: 0,
    };
    let t_data = profile.t_data_us();
    let t_ctrl = profile.t_ctrl_us();
    let payload = 8 * profile.payload_bytes as u64;

    // direct transmission: B and every relay listen
    meter.phase(t_data, 1.0, n as f64 + 1.0);
    if ab > g {
        out.direct_success = true;
        out.delivered_bits = payload;
        return finish(out, meter);
    }

    // RFC with b piggybacked: A and every relay listen
    meter.phase(profile.sifs_us, 0.0, 0.0);
    meter.phase(t_ctrl + t_data, 1.0, n as f64 + 1.0);
    if bits == 0 {
        out.outage = true;
        meter.phase(profile.timeout_us, 0.0, 0.0);
        return finish(out, meter);
    }

    meter.phase(profile.t_onc_us, 0.0, 0.0);
    meter.phase(profile.difs_us, 0.0, 0.0);
    contend(active_mask, profile, rng, scratch, &mut meter, &mut out);

    // coded packet to A and B, then one ACK from each
    meter.phase(t_data, 1.0, 2.0);
    meter.phase(profile.sifs_us, 0.0, 0.0);
    meter.phase(t_ctrl, 1.0, n as f64 + 1.0);
    meter.phase(profile.sifs_us, 0.0, 0.0);
    meter.phase(t_ctrl, 1.0, n as f64 + 1.0);
    out.delivered_bits = 2 * payload;
    finish(out, meter)
}

fn finish(mut out: RoundOutcome, meter: Meter<'_>) -> RoundOutcome {
    out.round_time_us = meter.time;
    out.round_energy_mj = meter.energy * 1e-6;
    out
}

/// Slotted DCF among the active relays until exactly one transmits.
/// Contenders that do not transmit keep (freeze) their counters across
/// busy periods; colliders double their window and redraw.
fn contend<R: Rng + ?Sized>(
    active: RelayMask,
    profile: &MacProfile,
    rng: &mut R,
    scratch: &mut RoundScratch,
    meter: &mut Meter<'_>,
    out: &mut RoundOutcome,
) {
    let window = |stage: u32| profile.cw_min << stage.min(profile.backoff_stages);
    scratch.counters.clear();
    scratch.stages.clear();
    for _ in active.members() {
        scratch.counters.push(rng.gen_range(0..window(0)));
        scratch.stages.push(0);
    }
    let t_col = profile.t_col_us();
    loop {
        let k = *scratch
            .counters
            .iter()
            .min()
            .expect("at least one contender");
        if k > 0 {
            out.idle_slots += k as u64;
            meter.phase(k as f64 * profile.slot_us, 0.0, 0.0);
            scratch.counters.iter_mut().for_each(|c| *c -= k);
        }
        let winners = scratch.counters.iter().filter(|&&c| c == 0).count();
        if winners == 1 {
            return;
        }
        out.collisions += 1;
        out.colliders_total += winners as u64;
        meter.phase(t_col, winners as f64, 2.0);
        for (c, s) in scratch.counters.iter_mut().zip(scratch.stages.iter_mut()) {
            if *c == 0 {
                *s += 1;
                *c = rng.gen_range(0..window(*s));
            }
        }
    }
}

/// Time (µs) and energy (mJ) of a round rebuilt from its counts alone.
pub fn audit_round(
    outcome: &RoundOutcome,
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
) -> (f64, f64) {
    let nf = config.n as f64;
    let (tx, rx, idle) = (power.p_tx_mw, power.p_rx_mw, power.p_idle_mw);
    let all = nf + 2.0;
    let t_a = profile.t_data_us();
    let t_ack = profile.t_ctrl_us();
    let mut time = t_a;
    let mut energy = (tx + (nf + 1.0) * rx) * t_a;
    if outcome.direct_success {
        return (time, energy * 1e-6);
    }
    let t_rfc_b = t_ack + t_a;
    time += profile.sifs_us + t_rfc_b;
    energy += all * idle * profile.sifs_us + (tx + (nf + 1.0) * rx) * t_rfc_b;
    if outcome.outage {
        time += profile.timeout_us;
        energy += all * idle * profile.timeout_us;
        return (time, energy * 1e-6);
    }
    let t_col = profile.t_col_us();
    let (slots, cols, colliders) = (
        outcome.idle_slots as f64,
        outcome.collisions as f64,
        outcome.colliders_total as f64,
    );
    time += profile.t_onc_us
        + profile.difs_us
        + slots * profile.slot_us
        + cols * t_col
        + profile.t_delivery_us();
    energy += all
        * idle
        * (profile.t_onc_us + profile.difs_us + 2.0 * profile.sifs_us + slots * profile.slot_us)
        + t_col * (colliders * tx + cols * 2.0 * rx + (cols * nf - colliders) * idle)
        + t_a * (tx + 2.0 * rx + (nf - 1.0) * idle)
        + 2.0 * t_ack * (tx + (nf + 1.0) * rx);
    (time, energy * 1e-6)
}

/// Additive statistics over a set of rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    pub rounds: u64,
    pub direct_successes: u64,
    pub coop_rounds: u64,
    pub coop_successes: u64,
    pub outages: u64,
    /// Rounds whose active set was empty, cooperation needed or not.
    pub empty_set_rounds: u64,
    pub active_total: u64,
    pub active_sq_total: u64,
    pub idle_slots: u64,
    pub collisions: u64,
    pub colliders_total: u64,
    pub contention_us: f64,
    pub bits: f64,
    pub time_us: f64,
    pub energy_mj: f64,
    pub bits_sq: f64,
    pub time_sq: f64,
    pub energy_sq: f64,
    pub bits_time: f64,
    pub bits_energy: f64,
    pub audited: u64,
    pub audit_failures: u64,
}

impl Tally {
    pub fn add(&mut self, o: &RoundOutcome, profile: &MacProfile) {
        self.rounds += 1;
        self.direct_successes += o.direct_success as u64;
        if !o.direct_success {
            self.coop_rounds += 1;
            if o.outage {
                self.outages += 1;
            } else {
                self.coop_successes += 1;
                self.contention_us += o.contention_us(profile);
            }
        }
        let k = o.active_mask.weight() as u64;
        self.empty_set_rounds += (k == 0) as u64;
        self.active_total += k;
        self.active_sq_total += k * k;
        self.idle_slots += o.idle_slots;
        self.collisions += o.collisions;
        self.colliders_total += o.colliders_total;
        let (b, t, e) = (o.delivered_bits as f64, o.round_time_us, o.round_energy_mj);
        self.bits += b;
        self.time_us += t;
        self.energy_mj += e;
        self.bits_sq += b * b;
        self.time_sq += t * t;
        self.energy_sq += e * e;
        self.bits_time += b * t;
        self.bits_energy += b * e;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.rounds += other.rounds;
        self.direct_successes += other.direct_successes;
        self.coop_rounds += other.coop_rounds;
        self.coop_successes += other.coop_successes;
        self.outages += other.outages;
        self.empty_set_rounds += other.empty_set_rounds;
        self.active_total += other.active_total;
        self.active_sq_total += other.active_sq_total;
        self.idle_slots += other.idle_slots;
        self.collisions += other.collisions;
        self.colliders_total += other.colliders_total;
        self.contention_us += other.contention_us;
        self.bits += other.bits;
        self.time_us += other.time_us;
        self.energy_mj += other.energy_mj;
        self.bits_sq += other.bits_sq;
        self.time_sq += other.time_sq;
        self.energy_sq += other.energy_sq;
        self.bits_time += other.bits_time;
        self.bits_energy += other.bits_energy;
        self.audited += other.audited;
        self.audit_failures += other.audit_failures;
    }
}

/// Summary of a simulation run. Standard errors use the delta method for
/// ratio estimators and the binomial formula for rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub rounds: u64,
    pub throughput_bps: f64,
    pub throughput_se_bps: f64,
    pub eta_bits_per_joule: f64,
    pub eta_se: f64,
    /// Fraction of rounds with an empty active set (estimates `p_out`).
    pub outage_rate: f64,
    pub outage_se: f64,
    pub mean_active: f64,
    pub mean_active_se: f64,
    /// Mean contention time over rounds that went through contention.
    pub mean_contention_us: f64,
    pub mean_round_time_us: f64,
    pub mean_round_energy_mj: f64,
    pub tally: Tally,
}

/// Ratio `sum(x) / sum(y)` and its delta-method standard error.
fn ratio_with_se(n: f64, sx: f64, sy: f64, sxx: f64, syy: f64, sxy: f64) -> (f64, f64) {
    if sy == 0.0 {
        return (0.0, 0.0);
    }
    let r = sx / sy;
    let my = sy / n;
    let v = ((sxx - 2.0 * r * sxy + r * r * syy) / n).max(0.0);
    (r, (v / n).sqrt() / my)
}

impl SimMetrics {
    pub fn from_tally(t: Tally) -> Self {
        let n = t.rounds.max(1) as f64;
        let (thr, thr_se) = ratio_with_se(n, t.bits, t.time_us, t.bits_sq, t.time_sq, t.bits_time);
        let (eta, eta_se) = ratio_with_se(
            n,
            t.bits,
            t.energy_mj,
            t.bits_sq,
            t.energy_sq,
            t.bits_energy,
        );
        let p = t.empty_set_rounds as f64 / n;
        let mean_active = t.active_total as f64 / n;
        let var_active = (t.active_sq_total as f64 / n - mean_active * mean_active).max(0.0);
        SimMetrics {
            rounds: t.rounds,
            // bits per µs to b/s, bits per mJ to b/J
            throughput_bps: thr * 1e6,
            throughput_se_bps: thr_se * 1e6,
            eta_bits_per_joule: eta * 1e3,
            eta_se: eta_se * 1e3,
            outage_rate: p,
            outage_se: (p * (1.0 - p) / n).sqrt(),
            mean_active,
            mean_active_se: (var_active / n).sqrt(),
            mean_contention_us: if t.coop_successes > 0 {
                t.contention_us / t.coop_successes as f64
            } else {
                0.0
            },
            mean_round_time_us: t.time_us / n,
            mean_round_energy_mj: t.energy_mj / n,
            tally: t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// Audit every k-th round of each chunk against [`audit_round`]; 0 disables.
    pub audit_every: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            workers: 0,
            audit_every: 100,
        }
    }
}

/// Streams for `chunks` chunks: the seeded generator jumped once per chunk.
fn chunk_streams(seed: u64, chunks: usize) -> Vec<Xoshiro256PlusPlus> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..chunks)
        .map(|_| {
            let current = rng.clone();
            rng.jump();
            current
        })
        .collect()
}

fn run_chunk(
    rounds: u64,
    mut rng: Xoshiro256PlusPlus,
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
    audit_every: u64,
) -> Tally {
    let mut tally = Tally::default();
    let mut scratch = RoundScratch::default();
    for i in 0..rounds {
        let o = run_round(config, profile, power, &mut rng, &mut scratch);
        if audit_every > 0 && i % audit_every == 0 {
            let (t, e) = audit_round(&o, config, profile, power);
            tally.audited += 1;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
            if !close(t, o.round_time_us) || !close(e, o.round_energy_mj) {
                tally.audit_failures += 1;
            }
        }
        tally.add(&o, profile);
    }
    tally
}

/// Simulate `rounds` independent rounds.
pub fn run_simulation(
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
    rounds: u64,
    seed: u64,
) -> Result<SimMetrics> {
    run_simulation_with(config, profile, power, rounds, seed, SimOptions::default())
}

pub fn run_simulation_with(
    config: &NetworkConfig,
    profile: &MacProfile,
    power: &PowerProfile,
    rounds: u64,
    seed: u64,
    options: SimOptions,
) -> Result<SimMetrics> {
    validate_for_simulation(config, profile, power)?;
    if rounds == 0 {
        return Err(Error::config("at least one round is required"));
    }
    let chunks = rounds.div_ceil(CHUNK_ROUNDS) as usize;
    let streams = chunk_streams(seed, chunks);
    let work = || {
        streams
            .into_par_iter()
            .enumerate()
            .map(|(c, rng)| {
                let start = c as u64 * CHUNK_ROUNDS;
                let len = CHUNK_ROUNDS.min(rounds - start);
                run_chunk(len, rng, config, profile, power, options.audit_every)
            })
            .collect::<Vec<_>>()
    };
    let tallies = if options.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::config(format!("cannot start {} workers: {e}", options.workers)))?
            .install(work)
    };
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    Ok(SimMetrics::from_tally(total))
}
