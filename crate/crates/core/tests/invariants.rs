use hardedge::gapprob::{e_gap_finite, e_hard, JacobiBetaSpec};
use hardedge::hardedge::{bessel_kernel, bessel_kernel_closed, bessel_kernel_quadrature};
use hardedge::moments::{fuss_catalan, generating_function_coefficient, lattice_path_sum, laguerre_product_recurrence};
use hardedge::specfun::{gamma, ln_gamma};
use num_bigint::BigUint;
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

proptest! {
    #[test]
    fn fuss_catalan_times_denominator_is_binomial(k in 1u64..40, m in 1u64..6) {
        let fc = fuss_catalan(k, m).unwrap();
        prop_assert_eq!(fc * BigUint::from(k * m + 1), binomial(k * (m + 1), k));
    }

    #[test]
    fn lattice_paths_match_generating_function(k in 1u32..=7, m in 1usize..=3) {
        let c = laguerre_product_recurrence(m).unwrap();
        let gf = generating_function_coefficient(k, &c).unwrap();
        prop_assert_eq!(lattice_path_sum(k, &c).unwrap(), gf);
        prop_assert_eq!(BigUint::from(gf as u64), fuss_catalan(k as u64, m as u64).unwrap() * BigUint::from(k));
    }

    #[test]
    fn gamma_recurrence(x in 0.1f64..30.0) {
        let lhs = ln_gamma(x + 1.0) - ln_gamma(x) - x.ln();
        prop_assert!(lhs.abs() < 1e-12 * ln_gamma(x + 1.0).abs().max(1.0));
        let g = gamma(x).unwrap();
        prop_assert!((gamma(x + 1.0).unwrap() / g / x - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bessel_kernel_is_symmetric_and_forms_agree(x in 0.05f64..12.0, y in 0.05f64..12.0, a in 0.0f64..3.0) {
        let k = bessel_kernel(x, y, a).unwrap();
        prop_assert!((k - bessel_kernel(y, x, a).unwrap()).abs() < 1e-13);
        let q = bessel_kernel_quadrature(x, y, a).unwrap();
        prop_assert!((k - q).abs() < 1e-9, "{} vs {}", k, q);
        if (x - y).abs() > 0.5 {
            prop_assert!((bessel_kernel_closed(x, y, a).unwrap() - q).abs() < 1e-9);
        }
    }

    #[test]
    fn gap_probability_is_monotone_distribution(
        n in 1usize..8,
        beta in prop::sample::select(vec![1.0f64, 2.0, 4.0]),
        a in 0.0f64..2.0,
        s1 in 0.05f64..0.95,
        ds in 0.01f64..0.5,
    ) {
        let spec = JacobiBetaSpec::new(n, beta, a, 1).unwrap();
        let s2 = (s1 + ds).min(1.0);
        let (e1, e2) = (e_gap_finite(&spec, s1).unwrap(), e_gap_finite(&spec, s2).unwrap());
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e1));
        prop_assert!(e2 >= e1, "E({}) = {} < E({}) = {}", s2, e2, s1, e1);
    }

    #[test]
    fn hard_edge_gap_decreases(s in 0.05f64..6.0, ds in 0.05f64..2.0) {
        let (e1, e2) = (e_hard(s, 1, 2.0).unwrap(), e_hard(s + ds, 1, 2.0).unwrap());
        prop_assert!(e1 > 0.0 && e1 < 1.0);
        prop_assert!(e2 < e1);
    }
}
