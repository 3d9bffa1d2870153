//! MAC-layer model for a given outage state, under each modelling option.

use nccarq::mac::{
    analytic_report, ContentionEnergy, ContentionPopulation, MacProfile, ModelOptions,
    PowerProfile, ThroughputForm,
};

fn main() -> nccarq::Result<()> {
    let (profile, power) = (MacProfile::default(), PowerProfile::default());
    println!(
        "data frame {:.1} us, control frame {:.1} us",
        profile.t_data_us(),
        profile.t_ctrl_us()
    );
    let variants = [
        ("default", ModelOptions::default()),
        (
            "renewal",
            ModelOptions {
                throughput: ThroughputForm::Renewal,
                ..ModelOptions::default()
            },
        ),
        (
            "per-slot energy",
            ModelOptions {
                contention_energy: ContentionEnergy::PerSlot,
                ..ModelOptions::default()
            },
        ),
        (
            "renewal, conditioned contenders",
            ModelOptions {
                throughput: ThroughputForm::Renewal,
                contention_population: ContentionPopulation::GivenCooperation,
                ..ModelOptions::default()
            },
        ),
    ];
    for (name, opts) in variants {
        println!("{name}:");
        for (n, p_out, e) in [(1, 0.053, 0.947), (5, 0.0, 4.74), (10, 0.0, 9.47)] {
            let r = analytic_report(n, 0.99998, p_out, e, &profile, &power, opts)?;
            println!(
                "  n={n:<2} tau={:.4} E[Tc]={:7.1} us  S={:6.3} Mb/s  eta={:.3e} bit/J",
                r.tau,
                r.e_t_c_us,
                r.throughput_bps / 1e6,
                r.eta_bits_per_joule
            );
        }
    }
    Ok(())
}
