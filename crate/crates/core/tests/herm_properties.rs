use proptest::prelude::*;
use qot_core::generate::{random_density, random_hermitian, rng_from_seed};
use qot_core::herm::hermitian_project;
use qot_core::{Hermitian, Hermitian32, ProductSpace};

fn rel(a: &Hermitian, b: &Hermitian) -> f64 {
    a.distance(b) / (1.0 + b.hs_norm())
}

fn product(a: &Hermitian, b: &Hermitian) -> Hermitian {
    hermitian_project(&(a.matrix() * b.matrix()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lifting_is_an_algebra_homomorphism(seed in any::<u64>(), d in 1usize..5) {
        let a = random_hermitian::<f64, _>(&mut rng_from_seed(seed), d);
        let (f1, f2) = (f64::sin, |x: f64| x * x - 0.5 * x);
        let sum = a.lift(|x| f1(x) + f2(x)).unwrap();
        prop_assert!(rel(&sum, &(&a.lift(f1).unwrap() + &a.lift(f2).unwrap())) < 1e-9);
        let prod = a.lift(|x| f1(x) * f2(x)).unwrap();
        prop_assert!(rel(&prod, &product(&a.lift(f1).unwrap(), &a.lift(f2).unwrap())) < 1e-9);
        let comp = a.lift(|x| f1(f2(x))).unwrap();
        prop_assert!(rel(&comp, &a.lift(f2).unwrap().lift(f1).unwrap()) < 1e-9);
    }

    #[test]
    fn partial_traces_are_adjoint_to_oplus(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let space = ProductSpace::new(d1, d2).unwrap();
        let gamma = random_hermitian::<f64, _>(&mut rng, d1 * d2);
        let u = random_hermitian(&mut rng, d1);
        let v = random_hermitian(&mut rng, d2);
        let lhs = gamma.hs_inner(&u.oplus(&v)).unwrap();
        let rhs = gamma.partial_trace_1(space).unwrap().hs_inner(&u).unwrap()
            + gamma.partial_trace_2(space).unwrap().hs_inner(&v).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn partial_traces_preserve_the_trace(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let space = ProductSpace::new(d1, d2).unwrap();
        let gamma = random_hermitian::<f64, _>(&mut rng_from_seed(seed), d1 * d2);
        let t = gamma.trace();
        prop_assert!((gamma.partial_trace_1(space).unwrap().trace() - t).abs() < 1e-12);
        prop_assert!((gamma.partial_trace_2(space).unwrap().trace() - t).abs() < 1e-12);
    }

    #[test]
    fn oplus_spectrum_is_the_minkowski_sum(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let u = random_hermitian::<f64, _>(&mut rng, d1);
        let v = random_hermitian(&mut rng, d2);
        let su = u.spectral_decompose().unwrap().eigenvalues;
        let sv = v.spectral_decompose().unwrap().eigenvalues;
        let mut want: Vec<f64> = su.iter().flat_map(|a| sv.iter().map(move |b| a + b)).collect();
        want.sort_by(f64::total_cmp);
        let got = u.oplus(&v).spectral_decompose().unwrap().eigenvalues;
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn kron_of_densities_has_the_factors_as_marginals(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let mut rng = rng_from_seed(seed);
        let rho = random_density::<f64, _>(&mut rng, d1).unwrap();
        let sigma = random_density(&mut rng, d2).unwrap();
        let space = ProductSpace::new(d1, d2).unwrap();
        let g = rho.kron(&sigma);
        prop_assert!(g.partial_trace_1(space).unwrap().distance(&rho) < 1e-12);
        prop_assert!(g.partial_trace_2(space).unwrap().distance(&sigma) < 1e-12);
    }

    #[test]
    fn single_precision_matches_double(seed in any::<u64>(), d in 1usize..4) {
        let a = random_hermitian::<f64, _>(&mut rng_from_seed(seed), d);
        let a32: Hermitian32 = a.cast();
        let e64 = a.lift(f64::exp).unwrap();
        let e32 = a32.lift(f32::exp).unwrap().cast::<f64>();
        prop_assert!(rel(&e32, &e64) < 1e-4);
    }

    #[test]
    fn matrix_json_round_trips_exactly(seed in any::<u64>(), d in 1usize..5) {
        let a = random_hermitian::<f64, _>(&mut rng_from_seed(seed), d);
        let text = serde_json::to_string(&a).unwrap();
        let back: Hermitian = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.dim(), d);
        for i in 0..d {
            for j in 0..d {
                prop_assert_eq!(back.entry(i, j), a.entry(i, j));
            }
        }
    }
}
