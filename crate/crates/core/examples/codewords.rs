//! Reception-codeword probabilities: quadrature against Monte Carlo.

use nccarq::orthant::{codeword_probability_mc, Orthant, RelayMask, Scheme};
use nccarq::quadrature::build_quadrature;
use nccarq::shadowing::LinkStat;

fn main() -> nccarq::Result<()> {
    let (rho, gamma) = (0.8, 16.14);
    let links = vec![LinkStat::new(15.0, 10.0)?; 4];
    let rule = build_quadrature(15)?;
    let normalized = Orthant::new(&rule);
    let literal = Orthant::new(&rule).with_scheme(Scheme::Literal);
    println!("mask   normalized   literal      monte-carlo (se)");
    for bits in 0..16u64 {
        let mask = RelayMask::new(bits, 4)?;
        let p = normalized.probability(mask, &links, rho, gamma)?;
        let q = literal.probability(mask, &links, rho, gamma)?;
        let (mc, se) = codeword_probability_mc(mask, &links, rho, gamma, 200_000, bits)?;
        println!("{mask}   {p:.6}     {q:.6}     {mc:.6} ({se:.1e})");
    }
    let total: f64 = normalized.distribution(&links, rho, gamma)?.iter().sum();
    println!("sum over codewords = {total:.12}");
    Ok(())
}
