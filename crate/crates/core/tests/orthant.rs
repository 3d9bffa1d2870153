mod common;

use approx::assert_abs_diff_eq;
use common::{exact_codeword, integrate, mask_bits};
use nccarq::orthant::{
    codeword_histogram_mc, codeword_probability_mc, q1_eval, Orthant, RelayMask, Scheme,
};
use nccarq::quadrature::{build_quadrature, QuadratureRule};
use nccarq::shadowing::{q_function, LinkStat};
use proptest::prelude::*;

const G: f64 = 16.14;

fn rule() -> QuadratureRule {
    build_quadrature(15).unwrap()
}

#[test]
fn first_stage_integral_matches_direct_integration() {
    let (x, rho, t) = (1.0, 0.5, 0.3);
    // sigma = 1 puts the normalized threshold at gamma* - mu
    let link = LinkStat::new(G - t, 1.0).unwrap();
    let s2 = 1.0 - rho * rho;
    let f = |y: f64| (-(y * y - 2.0 * rho * x * y) / (2.0 * s2)).exp();
    let above = integrate(f, t, 40.0, 1e-14);
    let below = integrate(f, -40.0, t, 1e-14);
    assert_abs_diff_eq!(q1_eval(x, true, &link, G, rho), above, epsilon = 1e-8);
    assert_abs_diff_eq!(q1_eval(x, false, &link, G, rho), below, epsilon = 1e-8);
}

#[test]
fn two_links_match_bivariate_oracle() {
    let rule = rule();
    let orthant = Orthant::new(&rule);
    let links = [
        LinkStat::new(18.0, 4.0).unwrap(),
        LinkStat::new(14.0, 6.0).unwrap(),
    ];
    for bits in 0..4 {
        let mask = RelayMask::new(bits, 2).unwrap();
        let p = orthant.probability(mask, &links, 0.7, G).unwrap();
        let exact = exact_codeword(&mask_bits(bits, 2), &links, 0.7, G);
        assert_abs_diff_eq!(p, exact, epsilon = 1e-6);
    }
}

#[test]
fn three_links_mixed_against_monte_carlo_and_oracle() {
    let rule = rule();
    let links = [
        LinkStat::new(20.0, 2.0).unwrap(),
        LinkStat::new(15.0, 10.0).unwrap(),
        LinkStat::new(17.0, 5.0).unwrap(),
    ];
    let mask: RelayMask = "101".parse().unwrap();
    let p = Orthant::new(&rule)
        .probability(mask, &links, 0.5, G)
        .unwrap();
    let (mc, _) = codeword_probability_mc(mask, &links, 0.5, G, 1_000_000, 3).unwrap();
    let se = (p * (1.0 - p) / 1e6).sqrt();
    assert!(
        (p - mc).abs() < 3.0 * se,
        "quadrature {p} vs monte carlo {mc}"
    );
    assert_abs_diff_eq!(
        p,
        exact_codeword(&mask_bits(mask.bits(), 3), &links, 0.5, G),
        epsilon = 1e-8
    );
}

#[test]
fn four_links_alternating_mask_against_monte_carlo() {
    let rule = rule();
    let links = vec![LinkStat::new(15.0, 10.0).unwrap(); 4];
    let mask: RelayMask = "1010".parse().unwrap();
    let p = Orthant::new(&rule)
        .probability(mask, &links, 0.8, G)
        .unwrap();
    let (mc, _) = codeword_probability_mc(mask, &links, 0.8, G, 1_000_000, 4).unwrap();
    let se = (p * (1.0 - p) / 1e6).sqrt();
    assert!(
        (p - mc).abs() < 3.0 * se,
        "quadrature {p} vs monte carlo {mc}"
    );
    assert_abs_diff_eq!(
        p,
        exact_codeword(&mask_bits(mask.bits(), 4), &links, 0.8, G),
        epsilon = 1e-7
    );
}

#[test]
fn histogram_agrees_with_distribution() {
    let rule = rule();
    let links = vec![LinkStat::new(17.0, 6.0).unwrap(); 3];
    let dist = Orthant::new(&rule).distribution(&links, 0.6, G).unwrap();
    let hist = codeword_histogram_mc(&links, 0.6, G, 400_000, 9).unwrap();
    for (p, h) in dist.iter().zip(&hist) {
        let se = (p * (1.0 - p) / 4e5).sqrt();
        assert!((p - h).abs() < 4.0 * se + 1e-12, "{p} vs {h}");
    }
}

#[test]
fn literal_scheme_accurate_in_moderate_regime() {
    let rule = rule();
    let literal = Orthant::new(&rule).with_scheme(Scheme::Literal);
    let links = vec![LinkStat::new(18.0, 5.0).unwrap(); 3];
    for bits in 0..8 {
        let mask = RelayMask::new(bits, 3).unwrap();
        let p = literal.probability(mask, &links, 0.5, G).unwrap();
        let exact = exact_codeword(&mask_bits(bits, 3), &links, 0.5, G);
        assert_abs_diff_eq!(p, exact, epsilon = 1e-4);
    }
}

#[test]
fn normalized_scheme_holds_at_strong_correlation() {
    let rule = rule();
    let orthant = Orthant::new(&rule);
    let links = vec![LinkStat::new(20.0, 2.0).unwrap(); 4];
    for bits in 0..16 {
        let p = orthant
            .probability(RelayMask::new(bits, 4).unwrap(), &links, 0.95, G)
            .unwrap();
        let exact = exact_codeword(&mask_bits(bits, 4), &links, 0.95, G);
        assert_abs_diff_eq!(p, exact, epsilon = 1e-5);
    }
}

#[test]
fn enumeration_cap_is_enforced() {
    let rule = rule();
    let links = vec![LinkStat::new(20.0, 2.0).unwrap(); 13];
    assert!(matches!(
        Orthant::new(&rule).distribution(&links, 0.5, G),
        Err(nccarq::Error::EnumerationCap { n: 13, cap: 12 })
    ));
    assert!(Orthant::new(&rule)
        .with_cap(13)
        .distribution(&links[..5], 0.5, G)
        .is_ok());
}

fn link_strategy() -> impl Strategy<Value = LinkStat> {
    (5.0f64..30.0, 0.5f64..10.0).prop_map(|(m, s)| LinkStat::new(m, s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Mirroring every link about the threshold swaps above and below.
    #[test]
    fn complement_symmetry(links in prop::collection::vec(link_strategy(), 1..6), rho in 0.0f64..0.9, raw in any::<u64>()) {
        let rule = rule();
        let orthant = Orthant::new(&rule);
        let n = links.len();
        let mask = RelayMask::new(raw & ((1 << n) - 1), n).unwrap();
        let mirrored: Vec<LinkStat> = links.iter().map(|l| LinkStat::new(2.0 * G - l.mu_db, l.sigma_db).unwrap()).collect();
        let p = orthant.probability(mask, &links, rho, G).unwrap();
        let q = orthant.probability(mask.complement(), &mirrored, rho, G).unwrap();
        prop_assert!((p - q).abs() < 1e-9, "{} vs {}", p, q);
    }

    #[test]
    fn threshold_monotonicity(links in prop::collection::vec(link_strategy(), 1..5), rho in 0.0f64..0.9, g in 5.0f64..25.0, dg in 0.1f64..5.0) {
        let rule = rule();
        let orthant = Orthant::new(&rule);
        let n = links.len();
        let (none, all) = (RelayMask::empty(n).unwrap(), RelayMask::full(n).unwrap());
        let lo_none = orthant.probability(none, &links, rho, g).unwrap();
        let hi_none = orthant.probability(none, &links, rho, g + dg).unwrap();
        let lo_all = orthant.probability(all, &links, rho, g).unwrap();
        let hi_all = orthant.probability(all, &links, rho, g + dg).unwrap();
        prop_assert!(hi_none >= lo_none - 1e-9);
        prop_assert!(hi_all <= lo_all + 1e-9);
    }

    #[test]
    fn partition_of_unity(n in 1usize..=8, rho_i in 0usize..3, sigma_i in 0usize..2, mu in 10.0f64..25.0) {
        let rule = rule();
        let rho = [0.0, 0.5, 0.9][rho_i];
        let sigma = [2.0, 10.0][sigma_i];
        let links = vec![LinkStat::new(mu, sigma).unwrap(); n];
        let total: f64 = Orthant::new(&rule).distribution(&links, rho, G).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-6, "sum {}", total);
    }

    #[test]
    fn independence_limit(links in prop::collection::vec(link_strategy(), 1..7), raw in any::<u64>()) {
        let rule = rule();
        let n = links.len();
        let mask = RelayMask::new(raw & ((1 << n) - 1), n).unwrap();
        let p = Orthant::new(&rule).probability(mask, &links, 0.0, G).unwrap();
        let product: f64 = links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let a = q_function(l.normalized_threshold(G));
                if mask.is_set(i) { a } else { 1.0 - a }
            })
            .product();
        prop_assert!((p - product).abs() < 1e-9, "{} vs {}", p, product);
    }
}
