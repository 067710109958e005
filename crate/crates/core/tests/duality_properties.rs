use proptest::prelude::*;
use qot_core::balanced::{eval_dual, inner_tol, marginal_residuals, maximize_dual, sinkhorn, transform_f1, transform_f2};
use qot_core::generate::{random_density, random_hermitian, rng_from_seed, GeneratorSpec};
use qot_core::lab::recenter_potentials;
use qot_core::primal::{
    duality_gap, eval_primal, fenchel_young_check, minimize_primal_balanced, project_to_feasible, FeasibleSet,
};
use qot_core::unbalanced::{
    alternating_transforms_unbalanced, eval_dual_unbalanced, grad_dual_unbalanced, maximize_dual_unbalanced,
    relative_entropy,
};
use qot_core::{Balanced, Hermitian, Potentials, Reg, Unbalanced};

fn instance(seed: u64, d1: usize, d2: usize, eps: f64, reg: Reg) -> Balanced {
    let data = GeneratorSpec::new(d1, d2, seed).generate::<f64>().unwrap();
    Balanced::from_data(data, eps, reg).unwrap()
}

fn potentials(seed: u64, d1: usize, d2: usize, scale: f64) -> Potentials {
    let mut rng = rng_from_seed(seed);
    Potentials::new(
        random_hermitian(&mut rng, d1).scale(scale),
        random_hermitian(&mut rng, d2).scale(scale),
    )
}

/// A random PSD plan with the wrong marginals, halfway to `ρ ⊗ σ`.
fn random_start(inst: &Balanced, seed: u64) -> Hermitian {
    let d = inst.space().dim();
    let noise = random_density::<f64, _>(&mut rng_from_seed(seed), d).unwrap();
    inst.rho().kron(inst.sigma()).scale(0.5).axpy(0.5, &noise)
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn regularizer(k: usize) -> Reg {
    match k {
        0 => Reg::von_neumann(),
        1 => Reg::quadratic(),
        _ => Reg::tsallis(2.0).unwrap(),
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn weak_duality(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, eps in 0.1f64..1.0, k in 0usize..3) {
        let inst = instance(seed, d1, d2, eps, regularizer(k));
        let feasible = FeasibleSet::balanced(inst.rho().clone(), inst.sigma().clone()).unwrap();
        let gamma = project_to_feasible(&random_start(&inst, seed ^ 0x5eed), &feasible).unwrap();
        let primal = eval_primal(&gamma, &inst).unwrap().finite().unwrap();
        let p = potentials(seed.wrapping_add(1), d1, d2, 0.5);
        prop_assert!(primal >= eval_dual(&p, &inst).unwrap() - 1e-9);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let inst = instance(seed, d1, d2, 0.5, Reg::quadratic());
        let feasible = FeasibleSet::for_instance(&inst);
        let once = project_to_feasible(&random_start(&inst, seed ^ 7), &feasible).unwrap();
        prop_assert!(feasible.violation(&once).unwrap() <= 1e-9);
        let twice = project_to_feasible(&once, &feasible).unwrap();
        prop_assert!(twice.distance(&once) <= 1e-9);
    }

    #[test]
    fn dual_is_translation_invariant(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, lambda in -10.0f64..10.0, k in 0usize..3) {
        let inst = instance(seed, d1, d2, 0.5, regularizer(k));
        let p = potentials(seed ^ 3, d1, d2, 0.2);
        let a = eval_dual(&p, &inst).unwrap();
        let b = eval_dual(&p.translate(lambda), &inst).unwrap();
        prop_assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn klein_domination(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, tau in 0.1f64..100.0) {
        let inst = instance(seed, d1, d2, 0.5, Reg::von_neumann());
        let un = Unbalanced::from_balanced(&inst, tau, 2.0 * tau).unwrap();
        let p = potentials(seed ^ 11, d1, d2, 1.0);
        prop_assert!(eval_dual_unbalanced(&p, &un).unwrap() <= eval_dual(&p, &inst).unwrap() + 1e-9);
    }

    #[test]
    fn unbalanced_dual_converges_pointwise(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4) {
        let inst = instance(seed, d1, d2, 0.5, Reg::von_neumann());
        let p = potentials(seed ^ 13, d1, d2, 0.5);
        let balanced = eval_dual(&p, &inst).unwrap();
        let errs: Vec<f64> = [1e2, 1e4, 1e6]
            .iter()
            .map(|&tau| {
                let un = Unbalanced::from_balanced(&inst, tau, tau).unwrap();
                (eval_dual_unbalanced(&p, &un).unwrap() - balanced).abs()
            })
            .collect();
        prop_assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), d in 1usize..4, commuting in any::<bool>()) {
        let mut rng = rng_from_seed(seed);
        let (alpha, eta): (Hermitian, Hermitian) = if commuting {
            let a: Vec<f64> = (0..d).map(|i| 0.1 + ((seed >> i) % 7) as f64).collect();
            let b: Vec<f64> = (0..d).map(|i| 0.2 + ((seed >> (i + 8)) % 5) as f64).collect();
            (Hermitian::from_real_diagonal(&a), Hermitian::from_real_diagonal(&b))
        } else {
            (random_density(&mut rng, d).unwrap().scale(1.7), random_density(&mut rng, d).unwrap())
        };
        let e = relative_entropy(&alpha, &eta).unwrap().finite().unwrap();
        prop_assert!(e >= -1e-12);
        prop_assert!(relative_entropy(&eta, &eta).unwrap().finite().unwrap().abs() <= 1e-12);
    }

    #[test]
    fn recentering_is_idempotent(seed in any::<u64>(), d1 in 1usize..4, d2 in 1usize..4, shift in -5.0f64..5.0) {
        let p = potentials(seed, d1, d2, 1.0).translate(shift);
        let once = recenter_potentials(&p).unwrap();
        prop_assert!(recenter_potentials(&once).unwrap().distance(&once) <= 1e-12);
        prop_assert!(once.v.smallest_eigenvalue().unwrap().abs() <= 1e-12);
    }

    #[test]
    fn matrix_fenchel_young(seed in any::<u64>(), d in 1usize..5, k in 0usize..3) {
        let mut rng = rng_from_seed(seed);
        let gamma = random_density::<f64, _>(&mut rng, d).unwrap().scale(3.0);
        let w = random_hermitian(&mut rng, d);
        let fy = fenchel_young_check(&gamma, &w, &regularizer(k)).unwrap();
        prop_assert!(fy.holds);
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn maximizer_characterizations_agree(seed in 0u64..1000, d1 in 1usize..4, d2 in 1usize..4) {
        let inst = instance(seed, d1, d2, 0.5, Reg::von_neumann());
        let tol = 1e-9;
        let rep = maximize_dual(&Potentials::zeros(d1, d2), &inst, tol, 20_000).unwrap();
        prop_assert!(rep.converged);
        let p = &rep.potentials;
        let slack = 1e2 * inner_tol(tol);
        prop_assert!(transform_f2(&p.u, &inst).unwrap().distance(&p.v) <= slack.max(1e-7));
        prop_assert!(transform_f1(&p.v, &inst).unwrap().distance(&p.u) <= slack.max(1e-7));
        let (r1, r2) = marginal_residuals(&rep.plan, &inst).unwrap();
        prop_assert!(r1.max(r2) <= 1e-8);
        let primal = eval_primal(&rep.plan, &inst).unwrap().finite().unwrap();
        prop_assert!(primal - rep.dual_value <= 1e-6 * (1.0 + rep.dual_value.abs()));
    }

    #[test]
    fn primal_oracle_matches_the_dual_optimum(seed in 0u64..1000, d1 in 1usize..4, d2 in 1usize..4, k in 0usize..2) {
        let inst = instance(seed, d1, d2, 0.3, regularizer(k));
        let dual = maximize_dual(&Potentials::zeros(d1, d2), &inst, 1e-10, 20_000).unwrap();
        let primal = minimize_primal_balanced(&inst, 1e-8, 50_000).unwrap();
        prop_assert!(dual.converged && primal.converged);
        let gap = duality_gap(primal.value, dual.dual_value);
        prop_assert!(gap.is_consistent() && gap.relative_gap.abs() <= 1e-5, "{gap:?}");
    }

    #[test]
    fn maximizers_coincide_after_recentering(seed in 0u64..1000, d1 in 1usize..4, d2 in 1usize..4) {
        let inst = instance(seed, d1, d2, 0.5, Reg::von_neumann());
        let a = maximize_dual(&Potentials::zeros(d1, d2), &inst, 1e-10, 20_000).unwrap();
        let b = sinkhorn(&potentials(seed ^ 17, d1, d2, 1.0), &inst, 1e-10, 20_000).unwrap();
        prop_assert!(a.converged && b.converged);
        prop_assert!(b.dual_values_nondecreasing(1e-12));
        let ra = recenter_potentials(&a.potentials).unwrap();
        let rb = recenter_potentials(&b.potentials).unwrap();
        prop_assert!(ra.distance(&rb) <= 1e-6, "{}", ra.distance(&rb));
    }

    #[test]
    fn unbalanced_optimality(seed in 0u64..1000, d1 in 1usize..4, d2 in 1usize..4, tau in 0.5f64..20.0) {
        let inst = instance(seed, d1, d2, 0.5, Reg::von_neumann());
        let un = Unbalanced::from_balanced(&inst, tau, tau).unwrap();
        let tol = 1e-9;
        let rep = maximize_dual_unbalanced(&Potentials::zeros(d1, d2), &un, tol, 20_000).unwrap();
        prop_assert!(rep.converged);
        let (g1, g2) = grad_dual_unbalanced(&rep.potentials, &un).unwrap();
        prop_assert!(g1.hs_norm().max(g2.hs_norm()) <= tol);
        let gap = rep.primal_value.finite().unwrap() - rep.dual_value;
        prop_assert!(gap <= 1e-6 * (1.0 + rep.dual_value.abs()));
        let sweep = alternating_transforms_unbalanced(&Potentials::zeros(d1, d2), &un, 1e-9, 500).unwrap();
        prop_assert!(sweep.dual_values_nondecreasing(1e-12));
    }
}
