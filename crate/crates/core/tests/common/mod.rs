//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use nccarq::shadowing::{normal_cdf, normal_pdf, q_function, LinkStat};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = K15_WEIGHTS[7] * f(c);
    let mut g = G7_WEIGHTS[3] * f(c);
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G7_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = kronrod(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    if a >= b {
        return 0.0;
    }
    rec(&f, a, b, tol, 40)
}

/// Beyond this many standard deviations the Gaussian mass is below 1e-30.
pub const CLIP: f64 = 12.0;

/// Event interval `[lo, hi]` of a normalized link variable, clipped to the bulk.
pub fn event_range(link: &LinkStat, event: bool, gamma_star_db: f64) -> (f64, f64) {
    let t = link.normalized_threshold(gamma_star_db).clamp(-CLIP, CLIP);
    if event {
        (t, CLIP)
    } else {
        (-CLIP, t)
    }
}

/// Probability that `N(center, scale^2)` lands in the event interval.
pub fn event_mass(
    link: &LinkStat,
    event: bool,
    gamma_star_db: f64,
    center: f64,
    scale: f64,
) -> f64 {
    let z = (link.normalized_threshold(gamma_star_db) - center) / scale;
    if event {
        q_function(z)
    } else {
        normal_cdf(z)
    }
}

/// Exact codeword probability for `n <= 4` by nested adaptive integration
/// over the Markov chain `y_{k+1} | y_k ~ N(rho y_k, 1 - rho^2)`.
pub fn exact_codeword(bits: &[bool], links: &[LinkStat], rho: f64, g: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let tol = 1e-13;
    match links.len() {
        1 => event_mass(&links[0], bits[0], g, 0.0, 1.0),
        2 => {
            let (a, b) = event_range(&links[0], bits[0], g);
            integrate(
                |y| normal_pdf(y) * event_mass(&links[1], bits[1], g, rho * y, s),
                a,
                b,
                tol,
            )
        }
        3 => {
            let (a, b) = event_range(&links[1], bits[1], g);
            integrate(
                |y| {
                    normal_pdf(y)
                        * event_mass(&links[0], bits[0], g, rho * y, s)
                        * event_mass(&links[2], bits[2], g, rho * y, s)
                },
                a,
                b,
                tol,
            )
        }
        4 => {
            let (a2, b2) = event_range(&links[1], bits[1], g);
            let (a3, b3) = event_range(&links[2], bits[2], g);
            integrate(
                |y2| {
                    let inner = integrate(
                        |y3| {
                            normal_pdf((y3 - rho * y2) / s) / s
                                * event_mass(&links[3], bits[3], g, rho * y3, s)
                        },
                        a3,
                        b3,
                        1e-14,
                    );
                    normal_pdf(y2) * event_mass(&links[0], bits[0], g, rho * y2, s) * inner
                },
                a2,
                b2,
                1e-12,
            )
        }
        n => panic!("exact oracle supports n <= 4, got {n}"),
    }
}

pub fn mask_bits(bits: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| (bits >> i) & 1 == 1).collect()
}
