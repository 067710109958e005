//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qot_core::balanced::{eval_dual, grad_dual, sinkhorn, BalancedInstance};
use qot_core::generate::{random_density, random_hermitian, rng_from_seed, GeneratorSpec};
use qot_core::lab::{
    mollification_sweep, nonincreasing_tail, tau_sweep, transform_convergence_check, LabOptions,
};
use qot_core::primal::{fenchel_young_check, minimize_primal_balanced, minimize_primal_unbalanced};
use qot_core::regularizer::Regularizer;
use qot_core::selftest::{run_scalar_suite, scalar_instance};
use qot_core::unbalanced::{
    eval_dual_unbalanced, grad_dual_unbalanced, maximize_dual_unbalanced, UnbalancedInstance,
};
use qot_core::{DualPotentials, Hermitian, Report};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("runtime {t:?} exceeds {limit:?}"))
}

fn err(e: qot_core::QotError) -> String {
    e.to_string()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

// 1
fn scalar_closed_forms() -> Outcome {
    let start = Instant::now();
    let results = run_scalar_suite();
    for r in &results {
        ensure(r.passed, || {
            format!("{}: expected {} observed {}", r.name, r.expected, r.observed)
        })?;
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("{} scalar checks agree to 1e-8", results.len()))
}

fn criterion2_instance(k: u64) -> Result<BalancedInstance<f64>, String> {
    let d1 = 2 + (k % 2) as usize;
    let d2 = 2 + ((k / 2) % 2) as usize;
    let eps = if (k / 4) % 2 == 0 { 0.1 } else { 0.5 };
    let reg = if k < 10 {
        Regularizer::von_neumann()
    } else {
        Regularizer::tsallis(2.0).map_err(err)?
    };
    let data = GeneratorSpec::new(d1, d2, 1000 + k).generate::<f64>().map_err(err)?;
    BalancedInstance::from_data(data, eps, reg).map_err(err)
}

// 2
fn strong_duality(sinkhorn_runs: &mut Vec<Report>) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let inst = criterion2_instance(k)?;
        let (d1, d2) = (inst.space().d1, inst.space().d2);
        let sk = sinkhorn(&DualPotentials::zeros(d1, d2), &inst, 1e-10, 100_000).map_err(err)?;
        ensure(sk.converged, || format!("instance {k}: sinkhorn did not converge"))?;
        let primal = minimize_primal_balanced(&inst, 1e-8, 200_000).map_err(err)?;
        let gap = relative(primal.value, sk.dual_value);
        worst = worst.max(gap);
        ensure(gap <= 1e-5, || {
            format!(
                "instance {k} ({}, eps {}): primal {} dual {} relative gap {gap:e}",
                inst.regularizer(),
                inst.epsilon(),
                primal.value,
                sk.dual_value
            )
        })?;
        sinkhorn_runs.push(sk);
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("20 instances, worst relative gap {worst:.2e}"))
}

fn criterion3_instance(k: u64) -> Result<UnbalancedInstance<f64>, String> {
    let d1 = 2 + (k % 2) as usize;
    let d2 = 2 + ((k / 2) % 2) as usize;
    let tau = if k % 4 < 2 { 1.0 } else { 10.0 };
    let data = GeneratorSpec::new(d1, d2, 2000 + k).generate::<f64>().map_err(err)?;
    // marginals need not be normalized here
    let (m1, m2) = if k % 3 == 0 { (0.7, 1.3) } else { (1.0, 1.0) };
    UnbalancedInstance::new(
        data.cost,
        data.rho.scale(m1),
        data.sigma.scale(m2),
        0.5,
        tau,
        tau,
        Regularizer::von_neumann(),
    )
    .map_err(err)
}

// 3
fn unbalanced_duality() -> Outcome {
    let start = Instant::now();
    let (mut worst_gap, mut worst_dist) = (0.0f64, 0.0f64);
    for k in 0..20 {
        let inst = criterion3_instance(k)?;
        let (d1, d2) = (inst.space().d1, inst.space().d2);
        let a = maximize_dual_unbalanced(&DualPotentials::zeros(d1, d2), &inst, 1e-10, 100_000).map_err(err)?;
        let mut rng = rng_from_seed(3000 + k);
        let p0 = DualPotentials::new(random_hermitian(&mut rng, d1), random_hermitian(&mut rng, d2));
        let b = maximize_dual_unbalanced(&p0, &inst, 1e-10, 100_000).map_err(err)?;
        ensure(a.converged && b.converged, || format!("instance {k}: ascent did not converge"))?;
        let du = a.potentials.u.distance(&b.potentials.u);
        let dv = a.potentials.v.distance(&b.potentials.v);
        worst_dist = worst_dist.max(du).max(dv);
        ensure(du <= 1e-6 && dv <= 1e-6, || format!("instance {k}: initializations differ by {du:e}, {dv:e}"))?;
        let primal = minimize_primal_unbalanced(&inst, 1e-8, 200_000).map_err(err)?;
        let gap = relative(primal.value, a.dual_value);
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 1e-5, || {
            format!("instance {k}: primal {} dual {} relative gap {gap:e}", primal.value, a.dual_value)
        })?;
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("20 instances, worst relative gap {worst_gap:.2e}, worst potential spread {worst_dist:.2e}"))
}

// 4
fn sinkhorn_certificates(runs: &[Report]) -> Outcome {
    ensure(!runs.is_empty(), || "no Sinkhorn runs to certify".into())?;
    for (k, r) in runs.iter().enumerate() {
        ensure(r.dual_values_nondecreasing(1e-12), || format!("run {k}: dual values decrease"))?;
        let (r1, r2) = r.marginal_residuals;
        ensure(r1 <= 1e-8 && r2 <= 1e-8, || format!("run {k}: residuals {r1:e}, {r2:e}"))?;
        let tr = r.plan.trace();
        ensure((tr - 1.0).abs() <= 1e-8, || format!("run {k}: plan trace {tr}"))?;
        let low = r.plan.smallest_eigenvalue().map_err(err)?;
        ensure(low >= -1e-10, || format!("run {k}: plan eigenvalue {low:e}"))?;
    }
    Ok(format!("{} converged runs certified", runs.len()))
}

// 5
fn product_coupling() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut rng = rng_from_seed(5000 + seed);
        let rho = random_density::<f64, _>(&mut rng, 2).map_err(err)?;
        let sigma = random_density::<f64, _>(&mut rng, 2).map_err(err)?;
        let inst = BalancedInstance::new(Hermitian::zeros(4), rho.clone(), sigma.clone(), 0.3, Regularizer::von_neumann())
            .map_err(err)?;
        let r = sinkhorn(&DualPotentials::zeros(2, 2), &inst, 1e-10, 10_000).map_err(err)?;
        ensure(r.converged, || format!("seed {seed}: not converged"))?;
        let d = r.plan.distance(&rho.kron(&sigma));
        worst = worst.max(d);
        ensure(d <= 1e-6, || format!("seed {seed}: plan is {d:e} from the product"))?;
    }
    Ok(format!("5 instances, worst distance {worst:.2e}"))
}

// 6
fn klein_domination() -> Outcome {
    let mut samples = 0;
    for seed in 0..3u64 {
        let data = GeneratorSpec::new(2, 2 + seed as usize % 2, 6000 + seed).generate::<f64>().map_err(err)?;
        let bal = BalancedInstance::from_data(data, 0.5, Regularizer::von_neumann()).map_err(err)?;
        let tau = [0.5, 1.0, 10.0][seed as usize];
        let un = UnbalancedInstance::from_balanced(&bal, tau, 2.0 * tau).map_err(err)?;
        let (d1, d2) = (bal.space().d1, bal.space().d2);
        let mut rng = rng_from_seed(6100 + seed);
        for i in 0..1000 {
            let scale = 0.1 + 3.0 * (i as f64 / 1000.0);
            let p = DualPotentials::new(
                random_hermitian::<f64, _>(&mut rng, d1).scale(scale),
                random_hermitian::<f64, _>(&mut rng, d2).scale(scale),
            );
            let du = eval_dual_unbalanced(&p, &un).map_err(err)?;
            let db = eval_dual(&p, &bal).map_err(err)?;
            ensure(du <= db + 1e-9, || format!("instance {seed}, sample {i}: {du} > {db}"))?;
            samples += 1;
        }
    }
    Ok(format!("{samples} samples, zero violations"))
}

// 7
fn tau_convergence() -> Outcome {
    let start = Instant::now();
    let grid = [1.0, 10.0, 1e2, 1e3, 1e4];
    let opts = LabOptions::new(1e-10, 200_000);
    let mut worst = [0.0f64; 4];
    for seed in 0..5u64 {
        let d2 = 2 + seed as usize % 2;
        let data = GeneratorSpec::new(2, d2, 7000 + seed).generate::<f64>().map_err(err)?;
        let inst = BalancedInstance::from_data(data, 0.5, Regularizer::von_neumann()).map_err(err)?;
        // one asymmetric sweep with τ2 = 2τ1
        let factor = if seed == 4 { 2.0 } else { 1.0 };
        let sweep = tau_sweep(&inst, &grid, factor, &opts).map_err(err)?;
        ensure(sweep.complete, || format!("instance {seed}: sweep incomplete"))?;
        let series = [
            ("value error", sweep.value_errors()),
            ("plan distance", sweep.plan_distances()),
            ("potential distance", sweep.potential_distances()),
        ];
        for (i, (name, v)) in series.iter().enumerate() {
            ensure(nonincreasing_tail(v, 3), || format!("instance {seed}: {name} not monotone: {v:?}"))?;
            let last = v[v.len() - 1];
            ensure(last < 1e-2, || format!("instance {seed}: {name} {last:e} at tau=1e4"))?;
            worst[i] = worst[i].max(last);
        }
        let pens = sweep.entropy_penalties();
        ensure(pens.windows(2).all(|w| w[1] <= w[0]), || format!("instance {seed}: penalties {pens:?}"))?;
        let last = pens[pens.len() - 1];
        ensure(last < 1e-3, || format!("instance {seed}: penalty {last:e} at tau=1e4"))?;
        worst[3] = worst[3].max(last);
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!(
        "5 instances; at tau=1e4 value {:.1e}, plan {:.1e}, potentials {:.1e}, penalty {:.1e}",
        worst[0], worst[1], worst[2], worst[3]
    ))
}

// 8
fn transform_convergence() -> Outcome {
    let grid = [1e2, 1e4, 1e6];
    let mut worst = 0.0f64;
    for seed in 0..3u64 {
        let data = GeneratorSpec::new(2, 2, 8000 + seed).generate::<f64>().map_err(err)?;
        let inst = BalancedInstance::from_data(data, 0.5, Regularizer::von_neumann()).map_err(err)?;
        let mut rng = rng_from_seed(8100 + seed);
        let mut rh = || random_hermitian::<f64, _>(&mut rng, 2);
        let (u, v, zu, zv) = (rh(), rh(), rh(), rh());
        let check = transform_convergence_check(&inst, &u, &v, Some((&zu, &zv)), &grid, &LabOptions::new(1e-12, 100_000))
            .map_err(err)?;
        ensure(check.strictly_decreasing(), || {
            format!("instance {seed}: {:?} / {:?}", check.distances_f2, check.distances_f1)
        })?;
        let last = check.final_distance();
        worst = worst.max(last);
        ensure(last < 1e-4, || format!("instance {seed}: final distance {last:e}"))?;
    }
    Ok(format!("3 instances, worst distance at tau=1e6 {worst:.2e}"))
}

// 9
fn mollification() -> Outcome {
    let inst = scalar_instance(Regularizer::quadratic()).map_err(err)?;
    let sweep = mollification_sweep(&inst, &[4, 16, 64], &LabOptions::new(1e-10, 100_000)).map_err(err)?;
    let diffs = sweep.value_differences().ok_or("no direct reference")?;
    ensure(diffs.windows(2).all(|w| w[1] < w[0]), || format!("differences not decreasing: {diffs:?}"))?;
    let last = diffs[diffs.len() - 1];
    ensure(last < 1e-2, || format!("final difference {last:e}"))?;
    let reference = sweep.reference.as_ref().expect("checked above");
    let bound = 2.0 * (1.0 + reference.potentials.sup_norm().map_err(err)?);
    let sup = sweep.max_sup_norm();
    ensure(sup <= bound, || format!("maximizer sup-norm {sup} exceeds {bound}"))?;
    Ok(format!("differences {diffs:?}, max sup-norm {sup:.3} (bound {bound:.3})"))
}

// 10
fn calculus_identities() -> Outcome {
    let mut rng = rng_from_seed(10_000);
    let h = 1e-5;
    // balanced and unbalanced gradients
    for i in 0..10u64 {
        let data = GeneratorSpec::new(2, 3, 10_100 + i).generate::<f64>().map_err(err)?;
        let bal = BalancedInstance::from_data(data, 0.5, Regularizer::von_neumann()).map_err(err)?;
        let un = UnbalancedInstance::from_balanced(&bal, 2.0, 3.0).map_err(err)?;
        let p = DualPotentials::new(random_hermitian::<f64, _>(&mut rng, 2).scale(0.5), random_hermitian(&mut rng, 3).scale(0.5));
        let dir = DualPotentials::new(random_hermitian::<f64, _>(&mut rng, 2), random_hermitian(&mut rng, 3));
        let moved = |k: f64| DualPotentials::new(p.u.axpy(k, &dir.u), p.v.axpy(k, &dir.v));
        let (g1, g2) = grad_dual(&p, &bal).map_err(err)?;
        let an = g1.hs_inner(&dir.u).map_err(err)? + g2.hs_inner(&dir.v).map_err(err)?;
        let fd = (eval_dual(&moved(h), &bal).map_err(err)? - eval_dual(&moved(-h), &bal).map_err(err)?) / (2.0 * h);
        ensure((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), || format!("balanced point {i}: fd {fd} vs {an}"))?;
        let (g1, g2) = grad_dual_unbalanced(&p, &un).map_err(err)?;
        let an = g1.hs_inner(&dir.u).map_err(err)? + g2.hs_inner(&dir.v).map_err(err)?;
        let fd = (eval_dual_unbalanced(&moved(h), &un).map_err(err)? - eval_dual_unbalanced(&moved(-h), &un).map_err(err)?)
            / (2.0 * h);
        ensure((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), || format!("unbalanced point {i}: fd {fd} vs {an}"))?;
    }
    let regs = [
        Regularizer::von_neumann(),
        Regularizer::quadratic(),
        Regularizer::tsallis(1.5).map_err(err)?,
        Regularizer::tsallis(2.0).map_err(err)?,
    ];
    // Legendre equality at conjugate points, Fenchel–Young elsewhere
    for reg in &regs {
        for _ in 0..20 {
            let w = random_hermitian::<f64, _>(&mut rng, 3);
            let gamma = w.lift(|x| reg.psi_prime(x)).map_err(err)?;
            let fy = fenchel_young_check(&gamma, &w, reg).map_err(err)?;
            let slack = fy.slack.finite().ok_or("infinite slack at a conjugate point")?;
            ensure(slack.abs() <= 1e-8, || format!("{reg}: Legendre equality off by {slack:e}"))?;
        }
        for t in 0..1000 {
            let w = random_hermitian::<f64, _>(&mut rng, 3);
            let g = random_hermitian::<f64, _>(&mut rng, 3);
            let gamma = g.lift(|x| x * x).map_err(err)?;
            let fy = fenchel_young_check(&gamma, &w, reg).map_err(err)?;
            ensure(fy.holds, || format!("{reg}: trial {t} slack {:?}", fy.slack))?;
        }
    }
    // lifting is an algebra homomorphism
    for _ in 0..50 {
        let a = random_hermitian::<f64, _>(&mut rng, 4);
        let f = |x: f64| x.sin();
        let g = |x: f64| x * x + 1.0;
        let fa = a.lift(f).map_err(err)?;
        let ga = a.lift(g).map_err(err)?;
        let sum = a.lift(|x| f(x) + g(x)).map_err(err)?;
        ensure(sum.distance(&(&fa + &ga)) <= 1e-9, || "lift(f + g) != lift f + lift g".into())?;
        let prod = a.lift(|x| f(x) * g(x)).map_err(err)?;
        let mat = fa.matrix() * ga.matrix();
        let diff = (prod.matrix() - mat).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ensure(diff <= 1e-9, || format!("lift(fg) != lift f lift g by {diff:e}"))?;
        let comp = a.lift(|x| f(g(x))).map_err(err)?;
        ensure(comp.distance(&ga.lift(f).map_err(err)?) <= 1e-9, || "lift(f ∘ g) != lift f ∘ lift g".into())?;
    }
    // translation invariance
    let data = GeneratorSpec::new(3, 2, 10_900).generate::<f64>().map_err(err)?;
    let bal = BalancedInstance::from_data(data, 0.3, Regularizer::von_neumann()).map_err(err)?;
    for i in 0..100 {
        // Potentials on the scale of ‖C‖ keep Tr ψ(W) of order one, so 1e-10 is above roundoff.
        let p = DualPotentials::new(
            random_hermitian::<f64, _>(&mut rng, 3).scale(0.2),
            random_hermitian(&mut rng, 2).scale(0.2),
        );
        let lambda = -10.0 + 20.0 * (i as f64 / 99.0);
        let a = eval_dual(&p, &bal).map_err(err)?;
        let b = eval_dual(&p.translate(lambda), &bal).map_err(err)?;
        ensure((a - b).abs() <= 1e-10, || format!("translation by {lambda} changes D by {:e}", a - b))?;
    }
    Ok("gradients, Legendre, Fenchel–Young, lifting and translation all within tolerance".into())
}

fn main() -> ExitCode {
    let mut sinkhorn_runs = Vec::new();
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut run = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let line = match &outcome {
            Ok(msg) => format!("PASS criterion {n:>2} {name}: {msg} [{elapsed:.2?}]"),
            Err(msg) => format!("FAIL criterion {n:>2} {name}: {msg} [{elapsed:.2?}]"),
        };
        println!("{line}");
        results.push((n, name, outcome, elapsed));
    };
    run(1, "scalar closed forms", &mut scalar_closed_forms);
    run(2, "strong duality", &mut || strong_duality(&mut sinkhorn_runs));
    run(3, "unbalanced duality", &mut unbalanced_duality);
    run(4, "sinkhorn certificates", &mut || sinkhorn_certificates(&sinkhorn_runs));
    run(5, "product coupling", &mut product_coupling);
    run(6, "klein domination", &mut klein_domination);
    run(7, "tau convergence", &mut tau_convergence);
    run(8, "transform convergence", &mut transform_convergence);
    run(9, "mollification duality", &mut mollification);
    run(10, "calculus identities", &mut calculus_identities);
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
