//! Monte Carlo rounds next to the analytical model for a few relay counts.

use nccarq::experiments::{run_analytic, run_simulated};
use nccarq::scenario::Scenario;

fn main() -> nccarq::Result<()> {
    println!(" n   model Mb/s   sim Mb/s (se)        p_out     outage (se)");
    for n in [1, 2, 5, 10] {
        let mut s = Scenario {
            n,
            ..Scenario::default()
        };
        s.run.rounds = 200_000;
        let a = run_analytic(&s)?.analysis.report;
        let m = run_simulated(&s)?;
        println!(
            "{n:>2}   {:>10.3}   {:>8.3} ({:.3})   {:.5}   {:.5} ({:.5})",
            a.throughput_bps / 1e6,
            m.throughput_bps / 1e6,
            m.throughput_se_bps / 1e6,
            a.p_out,
            m.outage_rate,
            m.outage_se
        );
    }
    Ok(())
}
