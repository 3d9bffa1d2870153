//! KMS correlation algebra and correlated shadowing draws.

use nccarq::shadowing::{kms_determinant, sample_correlated_gains, KmsMatrix, LinkStat};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn main() -> nccarq::Result<()> {
    let m = KmsMatrix::new(4, 0.7)?;
    println!("inverse (tridiagonal):\n{:.4}", m.inverse());
    println!("cholesky factor:\n{:.4}", m.cholesky());
    println!("det = {:.6e} = (1 - 0.49)^3", kms_determinant(&m));

    let stats = vec![LinkStat::new(20.0, 5.0)?; 3];
    let rho = 0.8;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let draws = 200_000;
    let (mut s, mut ss, mut s13) = ([0.0; 3], [0.0; 3], 0.0);
    for _ in 0..draws {
        let g = sample_correlated_gains(&stats, rho, &mut rng);
        for i in 0..3 {
            s[i] += g[i];
            ss[i] += g[i] * g[i];
        }
        s13 += g[0] * g[2];
    }
    let n = draws as f64;
    let mean: Vec<f64> = s.iter().map(|x| x / n).collect();
    let var: Vec<f64> = (0..3).map(|i| ss[i] / n - mean[i] * mean[i]).collect();
    let corr13 = (s13 / n - mean[0] * mean[2]) / (var[0] * var[2]).sqrt();
    println!(
        "sample means {:.3?}, corr(1,3) = {corr13:.4} (rho^2 = {:.4})",
        mean,
        rho * rho
    );
    Ok(())
}
