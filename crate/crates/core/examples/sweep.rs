//! Shadowing-deviation sweep written as CSV to stdout.

use nccarq::experiments::cmd_sweep;
use nccarq::scenario::{Axis, Scenario, SweepSpec};

fn main() -> nccarq::Result<()> {
    let mut fixed = Scenario {
        rho1: 0.5,
        rho2: 0.5,
        ..Scenario::default()
    };
    fixed.run.rounds = 50_000;
    let spec = SweepSpec::new(Axis::Sigma, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0], fixed)?;
    cmd_sweep(&spec, true, std::io::stdout().lock())?;
    Ok(())
}
