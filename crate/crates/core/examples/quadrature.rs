//! Half-range Gauss-Hermite rule and a few test integrals.

use nccarq::quadrature::{build_quadrature, DEFAULT_ORDER};

fn main() -> nccarq::Result<()> {
    let rule = build_quadrature(DEFAULT_ORDER)?;
    println!("{:>3}  {:>22}  {:>22}", "i", "node", "weight");
    for (i, (r, w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        println!("{i:>3}  {r:>22.16e}  {w:>22.16e}");
    }
    let pi = std::f64::consts::PI;
    println!(
        "int exp(-x^2)        = {:.15} (exact {:.15})",
        rule.integrate(|_| 1.0),
        0.5 * pi.sqrt()
    );
    println!(
        "int x^2 exp(-x^2)    = {:.15} (exact {:.15})",
        rule.integrate(|x| x * x),
        0.25 * pi.sqrt()
    );
    println!(
        "int cos(x) exp(-x^2) = {:.15} (exact {:.15})",
        rule.integrate(f64::cos),
        0.5 * pi.sqrt() * (-0.25f64).exp()
    );
    Ok(())
}
