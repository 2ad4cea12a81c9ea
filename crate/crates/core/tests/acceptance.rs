//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use dpkernel::data::{gen_synthetic, mse, SyntheticSpec};
use dpkernel::erm::{
    self, fit_functional_pert, fit_objpert, fit_rff_ridge, fit_rp_ridge, minimize_perturbed, privatize,
    sufficient_stats, FittedModel, FunctionalConfig, ModelParams, ObjpertConfig, PerturbedObjective, RidgeConfig,
    RidgeSolver, Seeds, UClip,
};
use dpkernel::experiment::{self, GroupBy, Settings, SweepConfig};
use dpkernel::gp::{norm_bound, sample_projection, GpSampler};
use dpkernel::kernel::KernelSpec;
use dpkernel::loss::LossSpec;
use dpkernel::optim::Objective;
use dpkernel::privacy::{self, FeatureKind, PrivacyBudget};
use dpkernel::rff::sample_rff;
use dpkernel::rng;

const BASE_SEED: u64 = 0x5eed_2024_0611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn uniform_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = rng::stream(seed);
    (0..n).map(|_| (0..d).map(|_| rng::uniform(&mut s)).collect()).collect()
}

fn ulps(a: f64, b: f64) -> u64 {
    if a == b {
        0
    } else if a.is_sign_negative() != b.is_sign_negative() || !a.is_finite() || !b.is_finite() {
        u64::MAX
    } else {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn criterion_1() -> Outcome {
    let text = include_str!("fixtures/noise_scales.csv");
    let mut worst = 0u64;
    let mut rows = 0;
    let mut worked = (0.0, 0.0);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let (k2, t, m, n, eps, delta, c1, c2) = (v[0], v[1], v[2] as usize, v[3] as usize, v[4], v[5], v[6], v[7]);
        let b = PrivacyBudget::new(eps, delta).unwrap();
        let rp = privacy::ridge_scales_rp(k2, t, m, n, &b).unwrap();
        let rff = privacy::ridge_scales_rff(t, n, &b).unwrap();
        let op_rp = privacy::objpert_scales(k2, m, n, c1, c2, 0.0, &b, FeatureKind::Rp).unwrap();
        let op_rff = privacy::objpert_scales(k2, m, n, c1, c2, 0.0, &b, FeatureKind::Rff).unwrap();
        let got = [
            rp.delta1,
            rp.delta2,
            rp.ridge_c_scale,
            rp.ridge_u_scale,
            rff.ridge_c_scale,
            rff.ridge_u_scale,
            op_rp.delta3,
            op_rp.objpert_b_std,
            op_rp.lambda_floor,
            op_rff.objpert_b_std,
            op_rff.lambda_floor,
        ];
        for (g, e) in got.iter().zip(&v[8..]) {
            worst = worst.max(ulps(*g, *e));
        }
        if rows == 0 {
            worked = (rp.delta1, op_rp.delta3);
        }
        rows += 1;
    }
    let off = PrivacyBudget::non_private(0.01).unwrap();
    let rp = privacy::ridge_scales_rp(1.0, 1.0, 100, 1000, &off).unwrap();
    let op = privacy::objpert_scales(1.0, 100, 1000, 1.0, 0.25, 0.1, &off, FeatureKind::Rp).unwrap();
    let sentinel =
        rp.ridge_c_scale == 0.0 && rp.ridge_u_scale == 0.0 && op.objpert_b_std == 0.0 && op.lambda_floor == 0.0;
    outcome(
        rows == 50 && worst <= 1 && sentinel,
        format!(
            "noise formulas: max {worst} ulp over {rows} tuples x 11 quantities; \
             Delta1(1, 100, 0.01) = {}, Delta3 = {}; eps = inf gives zero noise: {sentinel}",
            worked.0, worked.1
        ),
    )
}

fn criterion_2() -> Outcome {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let bound = norm_bound(1.0, 100, 0.05).unwrap();
    let trials = 10_000;
    let points = uniform_points(trials, 3, rng::seed_split(BASE_SEED, &[2, 0]));
    let mut exceed = 0;
    for (i, x) in points.iter().enumerate() {
        let map = sample_projection(
            k,
            std::slice::from_ref(x),
            100,
            rng::seed_split(BASE_SEED, &[2, 1, i as u64]),
        )
        .unwrap();
        let norm_sq: f64 = map.anchor_feature(0).iter().map(|v| v * v).sum();
        if norm_sq > bound {
            exceed += 1;
        }
    }
    let frac = exceed as f64 / trials as f64;
    outcome(
        frac <= 0.05,
        format!("norm concentration: {exceed}/{trials} = {frac:.4} projections exceed {bound:.6} (allowed 0.05)"),
    )
}

fn max_cov_error(
    k: KernelSpec,
    anchors: &[Vec<f64>],
    exact: &dyn Fn(&[f64], &[f64]) -> f64,
    m: usize,
    seed: u64,
) -> f64 {
    let f = sample_projection(k, anchors, m, seed).unwrap().anchor_features();
    let emp = &f * f.transpose();
    let mut worst: f64 = 0.0;
    for i in 0..anchors.len() {
        for j in 0..anchors.len() {
            worst = worst.max((emp[(i, j)] - exact(&anchors[i], &anchors[j])).abs());
        }
    }
    worst
}

fn criterion_3() -> Outcome {
    let m = 20_000;
    let g = KernelSpec::gaussian(1.0).unwrap();
    let anchors = uniform_points(5, 3, rng::seed_split(BASE_SEED, &[3, 0]));
    let err_g = max_cov_error(
        g,
        &anchors,
        &|a, b| g.eval(a, b).unwrap(),
        m,
        rng::seed_split(BASE_SEED, &[3, 1]),
    );
    let tol_g = 5.0 * g.kappa_sq() / (m as f64).sqrt();

    // Centered points in [-1, 1]^3, so ||x||^2 <= 3.
    let centered: Vec<Vec<f64>> = uniform_points(5, 3, rng::seed_split(BASE_SEED, &[3, 2]))
        .into_iter()
        .map(|p| p.iter().map(|v| 2.0 * v - 1.0).collect())
        .collect();
    let lin = KernelSpec::linear(3.0).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let err_l = max_cov_error(lin, &centered, &dot, m, rng::seed_split(BASE_SEED, &[3, 3]));
    let tol_l = 5.0 * lin.kappa_sq() / (m as f64).sqrt();
    outcome(
        err_g <= tol_g && err_l <= tol_l,
        format!(
            "covariance recovery, M = {m}: gaussian max error {err_g:.5} (tol {tol_g:.5}), \
             linear vs <x, y> max error {err_l:.5} (tol {tol_l:.5})"
        ),
    )
}

fn closed_form_beta(z: &DMatrix<f64>, y: &[f64], t: f64, lambda: f64) -> DVector<f64> {
    let n = z.nrows() as f64;
    let yt = DVector::from_iterator(y.len(), y.iter().map(|v| v.clamp(-t, t)));
    let a = z.transpose() * z / n + DMatrix::identity(z.ncols(), z.ncols()) * lambda;
    let b = z.transpose() * yt / n;
    a.cholesky().expect("positive definite").solve(&b)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn criterion_4() -> Outcome {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let budget = PrivacyBudget::non_private(1e-3).unwrap();
    let spec = SyntheticSpec::new(5, 200, 10, rng::seed_split(BASE_SEED, &[4, 0]));
    let (train, _) = gen_synthetic(&spec).unwrap();
    let cfg = RidgeConfig {
        m: 100,
        lambda: 1e-3,
        truncation: 3.0,
        budget,
        u_clip: UClip::Elementwise,
    };
    let seeds = Seeds::from_base(rng::seed_split(BASE_SEED, &[4, 1]));
    let mut oracle_err: f64 = 0.0;
    for rp in [true, false] {
        let model = if rp {
            fit_rp_ridge(&train.x, &train.y, k, &cfg, seeds, &[]).unwrap()
        } else {
            fit_rff_ridge(&train.x, &train.y, k, &cfg, seeds).unwrap()
        };
        let z = model.feature_map().unwrap().features(&train.x).unwrap();
        let exact = closed_form_beta(&z, &train.y, cfg.truncation, cfg.lambda);
        oracle_err = oracle_err.max(rel_err(model.beta().unwrap(), exact.as_slice()));
    }

    // Random-projection ridge against exact kernel ridge regression.
    let (n, m, lambda) = (300, 600, 1e-3);
    let mut rmse = Vec::new();
    for s in 0..10u64 {
        let spec = SyntheticSpec::new(5, n, 200, rng::seed_split(BASE_SEED, &[4, 2, s]));
        let (train, test) = gen_synthetic(&spec).unwrap();
        let cfg = RidgeConfig {
            m,
            lambda,
            truncation: 11.0,
            budget,
            u_clip: UClip::Elementwise,
        };
        let model = fit_rp_ridge(
            &train.x,
            &train.y,
            k,
            &cfg,
            Seeds::from_base(rng::seed_split(BASE_SEED, &[4, 3, s])),
            &test.x,
        )
        .unwrap();
        let pred = model.predict_many(&test.x).unwrap();
        let gram = k.gram(&train.x).unwrap().entries + DMatrix::identity(n, n) * (n as f64 * lambda);
        let alpha = gram.cholesky().unwrap().solve(&DVector::from_vec(train.y.clone()));
        let krr: Vec<f64> = test
            .x
            .iter()
            .map(|x| {
                train
                    .x
                    .iter()
                    .zip(alpha.iter())
                    .map(|(p, a)| a * k.eval(p, x).unwrap())
                    .sum()
            })
            .collect();
        rmse.push(rel_err(&pred, &krr));
    }
    let med = dpkernel::data::median(&rmse);
    outcome(
        oracle_err <= 1e-8 && med <= 0.10,
        format!(
            "ridge oracles: eps = inf coefficients vs closed form max rel error {oracle_err:.2e} (tol 1e-8); \
             rp vs exact KRR median relative RMSE {med:.4} over 10 seeds (tol 0.10)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let (n, m, t, delta) = (50usize, 50usize, 1.0, 1e-3);
    let budget = PrivacyBudget::new(1.0, delta).unwrap();
    let scales = privacy::ridge_scales_rp(k.kappa_sq(), t, m, n, &budget).unwrap();
    // In-bound pairs: both differing points satisfy the norm bound at level delta/8.
    let event_bound = norm_bound(k.kappa_sq(), m, delta / 8.0).unwrap();
    let (mut pairs, mut skipped, mut violations, mut p) = (0, 0, 0, 0u64);
    let mut worst_ratio: f64 = 0.0;
    while pairs < 1000 {
        let pts = uniform_points(n + 1, 3, rng::seed_split(BASE_SEED, &[5, 0, p]));
        let mut s = rng::stream(rng::seed_split(BASE_SEED, &[5, 1, p]));
        let y: Vec<f64> = (0..=n).map(|_| 4.0 * t * (rng::uniform(&mut s) - 0.5)).collect();
        let z = sample_projection(k, &pts, m, rng::seed_split(BASE_SEED, &[5, 2, p]))
            .unwrap()
            .anchor_features();
        p += 1;
        let norm = |i: usize| z.row(i).norm_squared();
        if norm(n - 1) > event_bound || norm(n) > event_bound {
            skipped += 1;
            continue;
        }
        let d = z.rows(0, n).into_owned();
        let mut d2 = d.clone();
        d2.row_mut(n - 1).copy_from(&z.row(n));
        let mut y2 = y[..n].to_vec();
        y2[n - 1] = y[n];
        let a = sufficient_stats(&d, &y[..n], t, UClip::Elementwise).unwrap();
        let b = sufficient_stats(&d2, &y2, t, UClip::Elementwise).unwrap();
        let dc = (&a.c_hat - &b.c_hat).norm() * n as f64;
        let du = (&a.u_hat - &b.u_hat).norm() * n as f64;
        worst_ratio = worst_ratio.max(dc / scales.delta1).max(du / scales.delta2);
        if dc > scales.delta1 * (1.0 + 1e-12) || du > scales.delta2 * (1.0 + 1e-12) {
            violations += 1;
        }
        pairs += 1;
    }

    let mut rff_max: f64 = 0.0;
    for j in 0..10u64 {
        let map = sample_rff(k, 4, 100, rng::seed_split(BASE_SEED, &[5, 3, j])).unwrap();
        let mut s = rng::stream(rng::seed_split(BASE_SEED, &[5, 4, j]));
        for _ in 0..10_000 {
            // Points well outside the unit cube as well.
            let x: Vec<f64> = (0..4).map(|_| 20.0 * (rng::uniform(&mut s) - 0.5)).collect();
            let f = map.feature(&x).unwrap();
            rff_max = rff_max.max(f.iter().map(|v| v * v).sum());
        }
    }
    // Summing 100 rounded squares can overshoot by a few ulps of 2.
    let rff_ok = rff_max <= 2.0 + 1e-13;
    outcome(
        violations == 0 && rff_ok,
        format!(
            "sensitivity audit: {violations} violations in {pairs} in-bound neighbor pairs \
             ({skipped} out-of-bound skipped, max used fraction {worst_ratio:.3}); \
             rff max ||phi||^2 over 1e5 points = {rff_max:.17}"
        ),
    )
}

fn criterion_6() -> Outcome {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let n = 100;
    let x = uniform_points(n, 3, rng::seed_split(BASE_SEED, &[6, 0]));
    let mut s = rng::stream(rng::seed_split(BASE_SEED, &[6, 1]));
    let y: Vec<f64> = x
        .iter()
        .map(|p| {
            if p[0] + p[1] - 1.0 + 0.3 * rng::normal(&mut s) > 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let m = 20;
    let z_rff = sample_rff(k, 3, m, rng::seed_split(BASE_SEED, &[6, 2]))
        .unwrap()
        .features(&x)
        .unwrap();
    let z_rp = sample_projection(k, &x, m, rng::seed_split(BASE_SEED, &[6, 3]))
        .unwrap()
        .anchor_features();
    let losses = [LossSpec::logistic(), LossSpec::huber(0.5).unwrap()];

    // b = 0 gives the non-private regularized ERM.
    let mut hook_ok = true;
    let mut hook_worst: f64 = 0.0;
    for z in [&z_rff, &z_rp] {
        for loss in losses {
            let zero = vec![0.0; m];
            let beta = minimize_perturbed(z, &y, loss, 1e-3, &zero).unwrap();
            let obj = PerturbedObjective {
                z,
                y: &y,
                loss,
                lambda0: 1e-3,
                b: &zero,
            };
            let (mut g, mut g0) = (vec![0.0; m], vec![0.0; m]);
            obj.eval(&beta, &mut g);
            obj.eval(&vec![0.0; m], &mut g0);
            let tol = 1e-9 * g0.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let gi = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            hook_worst = hook_worst.max(gi / tol);
            hook_ok &= gi <= tol;
        }
    }

    // Stability in b.
    let budget = PrivacyBudget::new(1.0, 1e-4).unwrap();
    let lambda = 0.05;
    let mut stab_violations = 0;
    let mut stab_worst: f64 = 0.0;
    for pair in 0..100u64 {
        let loss = losses[(pair % 2) as usize];
        let (c1, c2) = (loss.c1().unwrap(), loss.c2().unwrap());
        let sc = privacy::objpert_scales(1.0, m, n, c1, c2, lambda, &budget, FeatureKind::Rff).unwrap();
        let lambda0 = sc.effective_lambda(lambda);
        let mut s = rng::stream(rng::seed_split(BASE_SEED, &[6, 4, pair]));
        let b1: Vec<f64> = rng::normals(&mut s, m).iter().map(|v| v * sc.objpert_b_std).collect();
        let b2: Vec<f64> = rng::normals(&mut s, m).iter().map(|v| v * sc.objpert_b_std).collect();
        let beta1 = minimize_perturbed(&z_rff, &y, loss, lambda0, &b1).unwrap();
        let beta2 = minimize_perturbed(&z_rff, &y, loss, lambda0, &b2).unwrap();
        let db: f64 = b1.iter().zip(&b2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let dbeta: f64 = beta1
            .iter()
            .zip(&beta2)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = db / (n as f64 * lambda0);
        stab_worst = stab_worst.max(dbeta / bound);
        if dbeta > bound + 1e-8 {
            stab_violations += 1;
        }
    }

    // Loss derivatives against central differences.
    let mut s = rng::stream(rng::seed_split(BASE_SEED, &[6, 5]));
    let mut fd_worst: f64 = 0.0;
    let mut fd_checked = 0;
    for _ in 0..2000 {
        let yl = if rng::uniform(&mut s) < 0.5 { -1.0 } else { 1.0 };
        let p = 8.0 * (rng::uniform(&mut s) - 0.5);
        for loss in losses {
            let margin = yl * p;
            if (margin - 1.5).abs() < 1e-3 || (margin - 0.5).abs() < 1e-3 {
                continue;
            }
            let e = 1e-5;
            let fd = (loss.value(yl, p + e).unwrap() - loss.value(yl, p - e).unwrap()) / (2.0 * e);
            let g = loss.grad(yl, p).unwrap();
            let scale = g.abs().max(fd.abs());
            let rel = if scale == 0.0 { 0.0 } else { (g - fd).abs() / scale };
            fd_worst = fd_worst.max(rel);
            fd_checked += 1;
        }
    }
    outcome(
        hook_ok && stab_violations == 0 && fd_worst <= 1e-6,
        format!(
            "objective perturbation: b = 0 max gradient/tol {hook_worst:.3}; stability violations \
             {stab_violations}/100 (max ratio {stab_worst:.4}); loss gradient vs central differences \
             max rel error {fd_worst:.2e} over {fd_checked} points"
        ),
    )
}

fn criterion_7() -> Outcome {
    let draws = 2000u64;
    let (n, m, t, delta) = (50, 10, 1.0, 1e-3);
    let x = uniform_points(n, 2, rng::seed_split(BASE_SEED, &[7, 0]));
    let y: Vec<f64> = x.iter().map(|p| p[0] - p[1]).collect();
    let k = KernelSpec::gaussian(1.0).unwrap();
    let z = sample_rff(k, 2, m, rng::seed_split(BASE_SEED, &[7, 1]))
        .unwrap()
        .features(&x)
        .unwrap();
    let stats = sufficient_stats(&z, &y, t, UClip::Elementwise).unwrap();

    let ridge_sds = |eps: f64, tag: u64| {
        let b = PrivacyBudget::new(eps, delta).unwrap();
        let sc = privacy::ridge_scales_rp(1.0, t, m, n, &b).unwrap();
        let (mut c, mut u) = (Vec::new(), Vec::new());
        for i in 0..draws {
            let p = privatize(
                &stats,
                sc.ridge_c_scale,
                sc.ridge_u_scale,
                rng::seed_split(BASE_SEED, &[7, tag, i]),
            );
            for a in 0..m {
                for b2 in a + 1..m {
                    c.push(p.c_tilde[(a, b2)] - stats.c_hat[(a, b2)]);
                }
                u.push(p.u_tilde[a] - stats.u_hat[a]);
            }
        }
        (sd(&c), sd(&u))
    };
    let (c1s, u1s) = ridge_sds(1.0, 2);
    let (c2s, u2s) = ridge_sds(2.0, 3);
    let rc = c1s / c2s;
    let ru = u1s / u2s;

    // Functional perturbation: noise at evaluation points far apart, so the
    // samples are nearly independent.
    let (nf, lambda) = (20, 0.1);
    let xf = uniform_points(nf, 2, rng::seed_split(BASE_SEED, &[7, 4]));
    let yf: Vec<f64> = xf.iter().map(|p| (3.0 * p[0]).sin()).collect();
    let evals: Vec<Vec<f64>> = (1..=10).map(|i| vec![10.0 * i as f64, -5.0]).collect();
    let functional_sd = |eps: f64, tag: u64| {
        let cfg = FunctionalConfig {
            lambda,
            loss: LossSpec::squared(),
            truncation: Some(t),
            budget: PrivacyBudget::new(eps, delta).unwrap(),
        };
        let mut noise = Vec::new();
        for i in 0..draws {
            let seeds = Seeds::from_base(rng::seed_split(BASE_SEED, &[7, tag, i]));
            let model = fit_functional_pert(&xf, &yf, k, &cfg, seeds, &evals).unwrap();
            let ModelParams::Functional(part) = &model.params else {
                unreachable!()
            };
            for e in &evals {
                noise.push(model.predict(e).unwrap() - part.mean(k, e).unwrap());
            }
        }
        sd(&noise)
    };
    let f1 = functional_sd(1.0, 5);
    let f2 = functional_sd(2.0, 6);
    let rf = f1 / f2;
    let expected = 2.0 * t * k.kappa() * (1.0 + (2.0 * (1.0 / delta).ln()).sqrt()) / (nf as f64 * lambda * 1.0);
    let within = |r: f64| (r / 2.0 - 1.0).abs() <= 0.05;
    let formula_ok = (f1 / expected - 1.0).abs() <= 0.05;
    outcome(
        within(rc) && within(ru) && within(rf) && formula_ok,
        format!(
            "noise scaling, eps 1 -> 2 over {draws} draws: sd ratios C {rc:.4}, u {ru:.4}, functional {rf:.4} \
             (target 2 +- 5%); functional sd {f1:.5} vs formula {expected:.5}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let text = format!(
        "method = rp_ridge, rff_ridge\nepsilon = 10^-0.5, 1, 10^0.5, 10\nM = 25, 50, 100, 200, 400\n\
         lambda = n^-0.1i:10\nreps = 20\nseed = {BASE_SEED}\njobs = {jobs}\nd = 10\nn-train = 500\nn-test = 500\n"
    );
    let cfg = SweepConfig::from_settings(&Settings::parse(&text).unwrap()).unwrap();
    let records = experiment::run_sweep(&cfg).unwrap();
    let rows = experiment::summarize(&records, &GroupBy::Best).unwrap();
    let mean = |method: &str, eps: f64| {
        rows.iter()
            .find(|r| {
                r.key[0].to_string() == method && matches!(r.key[1], experiment::summary::KeyValue::Real(e) if e == eps)
            })
            .map(|r| r.mean)
            .unwrap()
    };
    let mut pass = true;
    let mut detail = String::from("desk-scale trend (T = 10.1):");
    for method in ["rp_ridge", "rff_ridge"] {
        let curve: Vec<f64> = cfg.epsilons.iter().map(|&e| mean(method, e)).collect();
        let inversions: Vec<f64> = curve.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
        let ok = inversions.is_empty() || (inversions.len() == 1 && inversions[0] <= 0.002);
        pass &= ok;
        detail += &format!(
            " {method} [{}] monotone={ok};",
            curve.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        );
    }
    for &eps in &cfg.epsilons[2..] {
        let (rp, rff) = (mean("rp_ridge", eps), mean("rff_ridge", eps));
        let ok = rp <= rff + 0.005;
        pass &= ok;
        detail += &format!(" eps {eps:.3}: rp {rp:.4} <= rff {rff:.4} + 0.005: {ok};");
    }
    let failed = records.iter().filter(|r| r.test_mse.is_none()).count();
    detail += &format!(" {} records, {failed} failed", records.len());
    outcome(pass, detail)
}

fn criterion_9() -> Outcome {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let ns = [100usize, 200, 400, 800];
    let reps = 5u64;
    let mut errs = Vec::new();
    for &n in &ns {
        let mut total = 0.0;
        for r in 0..reps {
            let mut spec = SyntheticSpec::new(10, n, 500, rng::seed_split(BASE_SEED, &[9, 0, n as u64, r]));
            spec.target_seed = Some(rng::seed_split(BASE_SEED, &[9, 1, r]));
            let (train, test) = gen_synthetic(&spec).unwrap();
            let mut anchors = train.x.clone();
            anchors.extend(test.x.iter().cloned());
            let map = GpSampler::new(k, &anchors)
                .unwrap()
                .sample(n, rng::seed_split(BASE_SEED, &[9, 2, n as u64, r]))
                .unwrap();
            let all = map.anchor_features();
            let z = all.rows(0, n).into_owned();
            let z_test = all.rows(n, test.len()).into_owned();
            let stats = sufficient_stats(&z, &train.y, 11.0, UClip::Elementwise).unwrap();
            let solver = RidgeSolver::new(&privatize(&stats, 0.0, 0.0, 0));
            let signal = test.signal.as_ref().unwrap();
            let best = (0..=10)
                .map(|i| {
                    let beta = solver.solve((n as f64).powf(-0.1 * i as f64)).unwrap();
                    let pred = &z_test * DVector::from_vec(beta);
                    mse(pred.as_slice(), signal).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            total += best;
        }
        errs.push(total / reps as f64);
    }
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    outcome(
        (-1.2..=-0.3).contains(&slope),
        format!(
            "rate: excess error [{}] at n = 100..800, log-log slope {slope:.3} (allowed [-1.2, -0.3])",
            errs.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn fitted_models() -> Vec<FittedModel> {
    let k = KernelSpec::gaussian(1.0).unwrap();
    let (train, _) = gen_synthetic(&SyntheticSpec::new(3, 60, 5, rng::seed_split(BASE_SEED, &[10, 0]))).unwrap();
    let threshold = dpkernel::data::median(&train.y);
    let labels = train.to_labels(threshold).y;
    let budget = PrivacyBudget::new(1.0, 1e-3).unwrap();
    let seeds = Seeds::from_base(rng::seed_split(BASE_SEED, &[10, 1]));
    let ridge = RidgeConfig {
        m: 30,
        lambda: 1e-2,
        truncation: 3.1,
        budget,
        u_clip: UClip::Elementwise,
    };
    let op = ObjpertConfig {
        m: 30,
        lambda: 1e-2,
        loss: LossSpec::logistic(),
        budget,
    };
    let fp = FunctionalConfig {
        lambda: 1e-2,
        loss: LossSpec::squared(),
        truncation: Some(3.1),
        budget,
    };
    vec![
        fit_rp_ridge(&train.x, &train.y, k, &ridge, seeds, &[]).unwrap(),
        fit_rff_ridge(&train.x, &train.y, k, &ridge, seeds).unwrap(),
        fit_objpert(&train.x, &labels, FeatureKind::Rp, k, &op, seeds, &[]).unwrap(),
        fit_objpert(&train.x, &labels, FeatureKind::Rff, k, &op, seeds, &[]).unwrap(),
        fit_functional_pert(&train.x, &train.y, k, &fp, seeds, &[]).unwrap(),
    ]
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "method = rp_ridge, rff_ridge, functional_pert\nepsilon = 1, inf\nM = 10, 20\nlambda = n^-0.2i:3\n\
         reps = 2\nseed = {BASE_SEED}\nd = 3\nn-train = 60\nn-test = 40\n"
    );
    let mut cfg = SweepConfig::from_settings(&Settings::parse(&text).unwrap()).unwrap();
    let mut files = Vec::new();
    for (i, jobs) in [1usize, 1, 2].into_iter().enumerate() {
        cfg.jobs = jobs;
        let path = dir.path().join(format!("run{i}.csv"));
        experiment::write_results(&path, &experiment::run_sweep(&cfg).unwrap()).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    let sweep_ok = files[0] == files[1] && files[0] == files[2];

    let mut models_ok = 0;
    let models = fitted_models();
    let probe = [vec![0.2, 0.4, 0.6], vec![0.9, 0.1, 0.5]];
    for (i, model) in models.iter().enumerate() {
        let path = dir.path().join(format!("m{i}.model"));
        erm::save_model(model, &path).unwrap();
        let back = erm::load_model(&path).unwrap();
        let same = |x: &[f64]| model.predict(x).unwrap().to_bits() == back.predict(x).unwrap().to_bits();
        let self_test = back.self_test.len() == erm::SELF_TEST_POINTS
            && back
                .self_test
                .iter()
                .zip(&model.self_test)
                .all(|(a, b)| a.1.to_bits() == b.1.to_bits() && same(&a.0));
        if self_test && probe.iter().all(|p| same(p)) {
            models_ok += 1;
        }
    }
    outcome(
        sweep_ok && models_ok == models.len(),
        format!(
            "determinism: three sweep runs (1, 1, 2 workers) byte-identical: {sweep_ok}; \
             {models_ok}/{} models reproduce self-test and probe predictions bit for bit after reload",
            models.len()
        ),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let checks: [(u32, Check, u64); 10] = [
        (1, criterion_1, 1),
        (2, criterion_2, 30),
        (3, criterion_3, 20),
        (4, criterion_4, 60),
        (5, criterion_5, 10),
        (6, criterion_6, 60),
        (7, criterion_7, 60),
        (8, criterion_8, 15 * 60),
        (9, criterion_9, 5 * 60),
        (10, criterion_10, 120),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failures = 0;
    for (id, check, limit) in checks {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(limit);
        let pass = out.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {} {} [{:.2} s, limit {limit} s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            if in_time { "" } else { ", exceeded" }
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
