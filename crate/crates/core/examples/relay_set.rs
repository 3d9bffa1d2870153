//! Active-relay-set distribution and outage versus the correlation factor.

use nccarq::orthant::Orthant;
use nccarq::quadrature::build_quadrature;
use nccarq::relay_set::{
    analyze_relay_set, expected_active_closed_form, expected_active_from_distribution,
    outage_probability,
};
use nccarq::shadowing::{LinkStat, NetworkConfig};

fn main() -> nccarq::Result<()> {
    let rule = build_quadrature(15)?;
    let orthant = Orthant::new(&rule);
    let relay = LinkStat::new(20.0, 10.0)?;
    let ab = LinkStat::new(8.0, 10.0)?;
    println!("rho    p_out     E|A|      closed form  P(|A|=k)");
    for rho in [0.0, 0.3, 0.6, 0.9, 0.99] {
        let cfg = NetworkConfig::homogeneous(5, rho, relay, ab, 16.14);
        let a = analyze_relay_set(&cfg, &orthant)?;
        println!(
            "{rho:<5}  {:.5}   {:.5}   {:.5}      {:.4?}",
            outage_probability(&a.set),
            expected_active_from_distribution(&a.set),
            expected_active_closed_form(&cfg),
            a.set.probs()
        );
    }
    Ok(())
}
