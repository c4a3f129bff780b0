//! Acceptance gate: one test per criterion, each printing a single
//! PASS/FAIL line before asserting.

use std::sync::Arc;
use std::time::{Duration, Instant};

use dualcert_core::bounds::{
    block_gaussian_bound, f_exponent, generic_failure, lowrank_gaussian_bound,
    sparse_failure_terms, sparse_gaussian_bound, sparse_leading_order_terms, sparse_t_choice,
};
use dualcert_core::certificate::q_squared_distribution_probe;
use dualcert_core::ensembles::{make_map, AmbientShape, Ensemble};
use dualcert_core::models::{build_model, Layout};
use dualcert_core::montecarlo::{run_trial, sweep, CheckMode, GridSpec, TrialConfig};
use dualcert_core::registry::{ensembles, model_families, ModelParams};
use dualcert_core::stats::{binomial_se, ks_distance, scaled_inverse_chi_squared_cdf};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(criterion: u32, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn grid(model: &str, ensemble: &str, params: ModelParams, m: usize) -> GridSpec {
    GridSpec::new(
        model_families().get(model).unwrap(),
        ensembles().get(ensemble).unwrap(),
        params,
        vec![m],
    )
}

/// Certificate success rate over `trials` draws, and the wall time taken.
fn certificate_rate(
    grid: &GridSpec,
    trials: usize,
    seed: u64,
    one_thread: bool,
) -> (f64, Duration) {
    let started = Instant::now();
    let run = || sweep(grid, trials, seed, CheckMode::CertificateOnly).unwrap();
    let rows = if one_thread {
        single_thread(run)
    } else {
        run()
    };
    (rows[0].success_rate(), started.elapsed())
}

#[test]
fn criterion_1_sparse_gaussian() {
    let bound = sparse_gaussian_bound(2.0, 4, 256).unwrap();
    let params = ModelParams {
        n: Some(256),
        s: Some(4),
        ..Default::default()
    };
    let (rate, elapsed) = certificate_rate(&grid("sparse", "gaussian", params, 93), 400, 101, true);
    let floor = 0.7595 - 3.0 * binomial_se(0.76, 400);
    let pass = bound.m_threshold == 93
        && bound.success_prob_lower >= 0.7595 - 5e-5
        && rate >= floor
        && elapsed < Duration::from_secs(30);
    report(
        1,
        pass,
        format!(
            "m*={} bound={:.5} rate={rate:.4} (floor {floor:.4}) time={:.2}s single-threaded",
            bound.m_threshold,
            bound.success_prob_lower,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_lowrank_gaussian() {
    let bound = lowrank_gaussian_bound(1.5, 2, 40, 40).unwrap();
    let params = ModelParams {
        n1: Some(40),
        n2: Some(40),
        r: Some(2),
        ..Default::default()
    };
    let (rate, elapsed) =
        certificate_rate(&grid("lowrank", "gaussian", params, 690), 100, 202, false);
    let floor = 0.836 - 3.0 * binomial_se(0.836, 100);
    let pass = bound.m_threshold == 690
        && (bound.success_prob_lower - 0.83583).abs() < 5e-6
        && rate >= floor
        && elapsed < Duration::from_secs(600);
    report(
        2,
        pass,
        format!(
            "m*={} bound={:.5} rate={rate:.4} (floor {floor:.4}) time={:.2}s",
            bound.m_threshold,
            bound.success_prob_lower,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_block_gaussian() {
    let bound = block_gaussian_bound(2.0, 3, 4, 64).unwrap();
    let params = ModelParams {
        k: Some(3),
        block_size: Some(4),
        blocks: Some(64),
        ..Default::default()
    };
    let (rate, elapsed) =
        certificate_rate(&grid("block", "gaussian", params, 227), 400, 303, false);
    let floor = 0.375 - 3.0 * binomial_se(0.375, 400);
    let pass = bound.m_threshold == 227
        && (bound.success_prob_lower - 0.375).abs() < 1e-12
        && rate >= floor
        && elapsed < Duration::from_secs(120);
    report(
        3,
        pass,
        format!(
            "m*={} bound={:.5} rate={rate:.4} (floor {floor:.4}) time={:.2}s",
            bound.m_threshold,
            bound.success_prob_lower,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_certificate_implies_recovery() {
    let families = model_families();
    let gaussian = ensembles().get("gaussian").unwrap();
    let cases = [
        (
            "sparse",
            ModelParams {
                n: Some(128),
                s: Some(5),
                ..Default::default()
            },
            70,
            167,
        ),
        (
            "block",
            ModelParams {
                k: Some(2),
                block_size: Some(4),
                blocks: Some(32),
                ..Default::default()
            },
            70,
            167,
        ),
        (
            "lowrank",
            ModelParams {
                n1: Some(10),
                n2: Some(12),
                r: Some(2),
                ..Default::default()
            },
            80,
            166,
        ),
    ];
    let mut certified = 0;
    let mut recovered = 0;
    let mut detail = Vec::new();
    for (name, params, m, quota) in cases {
        let config = TrialConfig::new(
            families.get(name).unwrap(),
            params,
            gaussian.clone(),
            m,
            404,
        )
        .unwrap()
        .with_check_mode(CheckMode::Both);
        // Draw in batches until the quota of certified instances is met.
        let mut hits = Vec::new();
        let mut next = 0u64;
        while hits.len() < quota {
            let batch: Vec<_> = (next..next + 64)
                .into_par_iter()
                .map(|t| run_trial(&config, t).unwrap())
                .collect();
            next += 64;
            hits.extend(batch.into_iter().filter(|r| r.certified == Some(true)));
            assert!(next < 10_000, "{name}: too few certified draws");
        }
        hits.truncate(quota);
        let ok = hits
            .iter()
            .filter(|r| r.solver_success == Some(true))
            .count();
        certified += hits.len();
        recovered += ok;
        detail.push(format!("{name} {ok}/{}", hits.len()));
    }
    let pass = certified == 500 && recovered == 500;
    report(
        4,
        pass,
        format!(
            "recovered {recovered}/{certified} certified instances ({})",
            detail.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_q_norm_law() {
    let (m, dim_t) = (100, 10);
    let draws = q_squared_distribution_probe(m, dim_t, 2000, 505).unwrap();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let target = 100.0 / 89.0;
    let rel = (mean - target).abs() / target;
    let ks = ks_distance(
        &draws,
        scaled_inverse_chi_squared_cdf(m as f64, (m - dim_t + 1) as f64),
    );
    let pass = rel <= 0.05 && ks <= 0.05;
    report(
        5,
        pass,
        format!("mean={mean:.4} vs {target:.4} (rel {rel:.4}), KS={ks:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_bounds_algebra() {
    let mut worst_terms = 0.0f64;
    let mut worst_generic = 0.0f64;
    let mut worst_leading = 0.0f64;
    for beta in [1.5, 2.0, 3.0] {
        for s in [1.0, 4.0, 16.0] {
            for n in [128.0f64, 1024.0] {
                let m = (2.0 * beta * s * n.ln() + s).ceil();
                let (union, tail) = sparse_failure_terms(beta, s, n, m).unwrap();
                worst_terms = worst_terms.max((union - tail).abs() / union.max(tail));
                let t = sparse_t_choice(beta, s, n).unwrap();
                let target = 1.0 - 2.0 * n.powf(-f_exponent(beta, s).unwrap());
                let generic = generic_failure(m, s, t, union.min(1.0)).unwrap();
                worst_generic = worst_generic.max((generic - target).abs() / target.abs());

                let (lo_union, lo_tail) = sparse_leading_order_terms(beta, s, n).unwrap();
                let lo_target = n.powf(-f_exponent(beta, s).unwrap());
                worst_leading = worst_leading
                    .max((lo_union - lo_target).abs() / lo_target)
                    .max((lo_tail - lo_target).abs() / lo_target);
            }
        }
    }
    println!(
        "criterion 6 (info): at real m = 2*beta*s*ln(n) + s with m - s degrees of freedom both terms equal n^-f to rel {worst_leading:.2e}"
    );
    let pass = worst_terms <= 1e-9 && worst_generic <= 1e-9;
    report(
        6,
        pass,
        format!("at integer m: max rel gap between failure terms {worst_terms:.3e}, generic_failure vs 1-2n^-f {worst_generic:.3e} (tolerance 1e-9)"),
    );
    assert!(pass);
}

fn projection_algebra_holds() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut sparse = DVector::zeros(20);
    sparse[3] = 2.0;
    sparse[11] = -1.0;
    let mut block = DVector::zeros(24);
    block.rows_mut(4, 4).copy_from_slice(&[1.0, -1.0, 0.5, 2.0]);
    let u = DVector::from_fn(6, |i, _| i as f64 - 2.5);
    let v = DVector::from_fn(5, |i, _| (i as f64).cos());
    let w = DVector::from_fn(6, |i, _| (i as f64 * 0.3).sin());
    let lowrank = dualcert_core::ensembles::vectorize(
        &(u * v.transpose() + w * DVector::from_element(5, 1.0).transpose()),
    );
    let models = [
        build_model(sparse, Layout::Sparse).unwrap(),
        build_model(
            block,
            Layout::Block {
                blocks: 6,
                block_size: 4,
            },
        )
        .unwrap(),
        build_model(lowrank, Layout::LowRank { rows: 6, cols: 5 }).unwrap(),
    ];
    models.iter().all(|model| {
        let dim = model.x0().len();
        (0..100).all(|_| {
            let z = DVector::from_fn(dim, |_, _| rng.random_range(-3.0..3.0));
            let pt = model.project_t(&z).unwrap();
            let pp = model.project_tperp(&z).unwrap();
            let scale = 1e-12 * z.norm().max(1.0);
            (&pt + &pp - &z).norm() <= scale
                && (model.project_t(&pt).unwrap() - &pt).norm() <= scale
                && pt.dot(&pp).abs() <= scale * z.norm()
                && (model.project_t(model.sign_pattern()).unwrap() - model.sign_pattern()).norm()
                    <= scale
        })
    })
}

fn adjoint_identity_holds() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(708);
    let shapes = [
        AmbientShape::vector(30).unwrap(),
        AmbientShape::matrix(5, 7).unwrap(),
    ];
    ensembles().names().into_iter().all(|name| {
        let ensemble: Arc<dyn Ensemble> = ensembles().get(name).unwrap();
        shapes.iter().all(|&shape| {
            let map = make_map(ensemble.as_ref(), shape, 12, 9).unwrap();
            (0..100).all(|_| {
                let x = DVector::from_fn(shape.dim(), |_, _| rng.random_range(-1.0..1.0));
                let y = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
                let lhs = map.apply(&x).unwrap().dot(&y);
                let rhs = x.dot(&map.adjoint(&y).unwrap());
                (lhs - rhs).abs() <= 1e-10 * x.norm() * y.norm()
            })
        })
    })
}

fn prox_optimality_holds() -> bool {
    use dualcert_core::models::{GroupNorm, L1Norm, NuclearNorm, Regularizer};
    let mut rng = ChaCha8Rng::seed_from_u64(709);
    let norms: [Box<dyn Regularizer>; 3] = [
        Box::new(L1Norm),
        Box::new(GroupNorm { block_size: 3 }),
        Box::new(NuclearNorm { rows: 4, cols: 6 }),
    ];
    norms.iter().all(|norm| {
        (0..100).all(|_| {
            let v = DVector::from_fn(24, |_, _| rng.random_range(-2.0..2.0));
            let kappa = rng.random_range(0.05..3.0);
            let z = norm.prox(&v, kappa).unwrap();
            let g = (&v - &z) / kappa;
            norm.dual_norm(&g).unwrap() <= 1.0 + 1e-9
                && (g.dot(&z) - norm.norm(&z).unwrap()).abs() <= 1e-9 * (1.0 + z.norm())
        })
    })
}

fn f_exponent_shape_holds() -> bool {
    [1.1, 2.0, 5.0].iter().all(|&beta| {
        let values: Vec<f64> = (1..=10_000)
            .map(|s| f_exponent(beta, s as f64).unwrap())
            .collect();
        values.windows(2).all(|w| w[1] > w[0])
            && values.iter().all(|&f| f > 0.0 && f < beta - 1.0)
            && (beta - 1.0 - f_exponent(beta, 1e9).unwrap()) < 1e-3 * beta
    })
}

fn sweep_determinism_holds() -> bool {
    let params = ModelParams {
        n: Some(128),
        s: Some(4),
        ..Default::default()
    };
    let mut grid = GridSpec::new(
        model_families().get("sparse").unwrap(),
        ensembles().get("gaussian").unwrap(),
        params,
        vec![30, 50, 70],
    );
    grid.complexities = vec![3, 5];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep(&grid, 40, 710, CheckMode::Both).unwrap())
    };
    let reference = run(1);
    reference == run(3) && reference == run(8)
}

#[test]
fn criterion_7_property_suites() {
    let checks = [
        ("projection algebra", projection_algebra_holds()),
        ("adjoint identity", adjoint_identity_holds()),
        ("prox optimality", prox_optimality_holds()),
        ("f(beta,s) shape", f_exponent_shape_holds()),
        ("sweep determinism", sweep_determinism_holds()),
    ];
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, ok)| format!("{n}={}", if *ok { "ok" } else { "broken" }))
        .collect();
    report(7, pass, detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_8_sign_ensemble_sparse() {
    let params = ModelParams {
        n: Some(256),
        s: Some(4),
        ..Default::default()
    };
    let (rate, elapsed) = certificate_rate(&grid("sparse", "sign", params, 114), 400, 808, false);
    let pass = rate >= 0.95;
    report(
        8,
        pass,
        format!(
            "rate={rate:.4} (floor 0.95) over 400 trials, time={:.2}s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}
