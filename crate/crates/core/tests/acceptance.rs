//! Acceptance suite: one test per criterion, each named `cNN_...`.
//! Every test prints a `criterion N ...: PASS|FAIL` line (visible with
//! `--nocapture`) and fails when the criterion or its runtime cap is not met.

use hpo::data::{make_kfold, synth, Metric, PredictionMatrix, ResamplingPlan, ResamplingSpec, Split, Target};
use hpo::exec::{Executor, Level};
use hpo::learn::{tune_threshold, ElasticNet, FeaturelessRandom, Knn};
use hpo::nested::{nested_evaluate, NestedOptions, TunedLearner};
use hpo::objective::{FidelityRange, Objective, SyntheticFn, SyntheticObjective};
use hpo::rng;
use hpo::tuners::acquisition::expected_improvement;
use hpo::tuners::gp::{Gp, GpOptions, NoiseMode};
use hpo::tuners::racing::{race, RaceSettings};
use hpo::tuners::{
    bracket_schedule, run, satisfies_budget_law, BayesOpt, BoSettings, EsSettings, GridSearch, GridSettings,
    RandomSearch, RandomSettings, RunOptions, Termination, TunerSpec,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

fn verdict(n: u32, name: &str, ok: bool, detail: String, started: Instant, cap_seconds: f64) {
    let secs = started.elapsed().as_secs_f64();
    let in_time = secs < cap_seconds;
    let status = if ok && in_time { "PASS" } else { "FAIL" };
    println!("criterion {n} {name}: {status} ({detail}; {secs:.2} s of {cap_seconds} s)");
    assert!(ok, "criterion {n} {name}: {detail}");
    assert!(in_time, "criterion {n} {name}: took {secs:.2} s, cap {cap_seconds} s");
}

#[test]
fn c01_hyperband_budget_law() {
    let t = Instant::now();
    let mut failures = Vec::new();
    for eta in [2u64, 3] {
        for upper in [8u64, 9, 27, 81] {
            // integer oracle: everything scaled by eta^s
            let mut s_max = 0u32;
            while eta.pow(s_max + 1) <= upper {
                s_max += 1;
            }
            let schedule = bracket_schedule(FidelityRange { lower: 1.0, upper: upper as f64 }, eta as f64).unwrap();
            if schedule.len() != s_max as usize + 1 || !satisfies_budget_law(upper, eta) {
                failures.push(format!("eta {eta} upper {upper}: bracket count or law"));
                continue;
            }
            for (b, s) in schedule.iter().zip((0..=s_max).rev()) {
                let scale = eta.pow(s);
                let p = ((s_max as u64 + 1) * scale).div_ceil(s as u64 + 1);
                let mut spend = 0u64;
                for t in 0..=s {
                    let n = p / eta.pow(t);
                    spend += n * upper * eta.pow(t);
                    let stage = b.stages[t as usize];
                    let fid = upper as f64 * (eta as f64).powi(t as i32 - s as i32);
                    if stage.n as u64 != n || (stage.fidelity - fid).abs() > 1e-12 * fid {
                        failures.push(format!("eta {eta} upper {upper} s {s} stage {t}"));
                    }
                }
                if spend > (s_max as u64 + 1) * upper * scale {
                    failures.push(format!("eta {eta} upper {upper} s {s}: spend over budget"));
                }
            }
        }
    }
    let fig = bracket_schedule(FidelityRange { lower: 1.0, upper: 8.0 }, 2.0).unwrap();
    let pops: Vec<usize> = fig.iter().map(|b| b.stages[0].n).collect();
    let shapes: Vec<Vec<(usize, f64)>> = fig.iter().map(|b| b.stages.iter().map(|s| (s.n, s.fidelity)).collect()).collect();
    let want = vec![
        vec![(8, 1.0), (4, 2.0), (2, 4.0), (1, 8.0)],
        vec![(6, 2.0), (3, 4.0), (1, 8.0)],
        vec![(4, 4.0), (2, 8.0)],
        vec![(4, 8.0)],
    ];
    if shapes != want {
        failures.push(format!("eta 2 upper 8 design {shapes:?}"));
    }
    verdict(1, "hyperband budget law", failures.is_empty(), format!("populations {pops:?}, failures {failures:?}"), t, 1.0);
}

#[test]
fn c02_expected_improvement_matches_monte_carlo() {
    let t = Instant::now();
    let mut r = rng::stream(2, &[]);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mean: f64 = r.random_range(-2.0..2.0);
        let sd: f64 = r.random_range(0.05..2.0);
        let c_min: f64 = r.random_range(-2.0..2.0);
        let n = 1_000_000;
        let mc = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                (c_min - (mean + sd * z)).max(0.0)
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((expected_improvement(mean, sd, c_min) - mc).abs());
    }
    let limits = expected_improvement(0.25, 0.0, 1.0) == 0.75
        && expected_improvement(1.5, 0.0, 1.0) == 0.0
        && expected_improvement(1.0, 0.0, 1.0) == 0.0;
    verdict(2, "EI vs Monte Carlo", worst < 1e-2 && limits, format!("max abs error {worst:.2e}, limits exact {limits}"), t, 30.0);
}

#[test]
fn c03_gp_interpolates_and_reverts_to_prior() {
    let t = Instant::now();
    let mut r = rng::stream(3, &[]);
    let x: Vec<Vec<f64>> = (0..12).map(|_| vec![r.random::<f64>(), r.random::<f64>()]).collect();
    let y: Vec<f64> = x.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
    let opts = GpOptions { noise: NoiseMode::Noiseless, ..GpOptions::default() };
    let gp = Gp::fit(x.clone(), &y, &opts, &mut r).unwrap();
    let interp = x.iter().zip(&y).map(|(p, v)| (gp.predict(p).0 - v).abs()).fold(0.0, f64::max);
    let (_, far_sd) = gp.predict(&[1e3, -1e3]);
    let rel = (far_sd - gp.prior_sd()).abs() / gp.prior_sd();
    verdict(3, "GP sanity", interp < 1e-6 && rel < 0.05, format!("max interpolation error {interp:.2e}, far-field sd off by {:.2}%", 100.0 * rel), t, 5.0);
}

#[test]
fn c04_nested_resampling_removes_optimism() {
    let t = Instant::now();
    let tl = TunedLearner::new(
        Arc::new(FeaturelessRandom),
        TunerSpec::Random(RandomSettings::default()),
        ResamplingSpec::holdout(2.0 / 3.0),
        Metric::Ce,
        Termination::evals(100),
    );
    let exec = Executor::new(4, Level::Outer).unwrap();
    let (mut inner, mut outer) = (Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let data = Arc::new(synth::random_labels(100, 2, seed));
        assert_eq!(data.target().class_counts(), vec![50, 50]);
        let plan = make_kfold(100, 3, 1, Some(data.target()), &mut rng::stream(seed, &[rng::label::OUTER])).unwrap();
        let report = nested_evaluate(&tl, &data, &plan, seed, &exec, &NestedOptions::default());
        inner.push(report.inner_mean.unwrap());
        outer.push(report.aggregate.unwrap());
    }
    let mi = inner.iter().sum::<f64>() / 20.0;
    let mo = outer.iter().sum::<f64>() / 20.0;
    let ok = mi < 0.45 && (0.45..=0.55).contains(&mo);
    verdict(4, "overtuning and nested resampling", ok, format!("mean inner-best CE {mi:.3}, mean nested outer CE {mo:.3}"), t, 120.0);
}

#[test]
fn c05_random_beats_grid_on_low_effective_dimension() {
    let t = Instant::now();
    let obj = SyntheticObjective::new(SyntheticFn::LowEffDim { dim: 2 });
    let exec = Executor::sequential();
    let (mut rs, mut gs) = (Vec::new(), Vec::new());
    for seed in 0..50u64 {
        let opts = RunOptions::new(Termination::evals(9), seed);
        let mut a = RandomSearch::new(obj.space().clone(), RandomSettings::default(), seed);
        rs.push(run(&obj, &mut a, &opts, &exec).unwrap().incumbent.unwrap().1);
        let mut b = GridSearch::new(obj.space().clone(), GridSettings { resolution: 3, ..GridSettings::default() }, seed).unwrap();
        let out = run(&obj, &mut b, &opts, &exec).unwrap();
        assert_eq!(out.archive.len(), 9);
        gs.push(out.incumbent.unwrap().1);
    }
    rs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    let (rs_med, gs_med) = (0.5 * (rs[24] + rs[25]), 0.5 * (gs[24] + gs[25]));
    verdict(5, "random vs grid search", rs_med <= gs_med, format!("RS median best {rs_med:.4}, GS best {gs_med:.4}"), t, 10.0);
}

#[test]
fn c06_bayesian_optimization_beats_random_search() {
    let t = Instant::now();
    let obj = SyntheticObjective::new(SyntheticFn::Branin);
    let exec = Executor::sequential();
    let mut wins = 0;
    for seed in 0..20u64 {
        let opts = RunOptions::new(Termination::evals(30), seed);
        let mut bo = BayesOpt::new(obj.space().clone(), BoSettings::default(), seed).unwrap();
        let b = run(&obj, &mut bo, &opts, &exec).unwrap().incumbent.unwrap().1;
        let mut rs = RandomSearch::new(obj.space().clone(), RandomSettings::default(), seed);
        let r = run(&obj, &mut rs, &opts, &exec).unwrap().incumbent.unwrap().1;
        wins += usize::from(b < r);
    }
    verdict(6, "BO sample efficiency", wins >= 14, format!("BO better on {wins} of 20 seeds"), t, 180.0);
}

#[test]
fn c07_racing_eliminates_losers_keeps_ties() {
    let t = Instant::now();
    let folds = 12;
    // one test after five folds: repeated looks at alpha 0.05 would drop
    // identical pairs far more often than 5% of the time
    let settings = RaceSettings { n_min: 1, t_first: 5, t_each: folds, ..RaceSettings::default() };
    let mut r = rng::stream(7, &[]);
    let noise = |r: &mut rng::Rng| -> f64 { StandardNormal.sample(r) };
    let (mut dropped_early, mut survived) = (0, 0);
    for _ in 0..100 {
        let e: Vec<[f64; 2]> = (0..folds).map(|_| [noise(&mut r), noise(&mut r)]).collect();
        let worse = race(2, (0..folds).collect(), settings, |c, f| Some(5.0 * c as f64 + e[f][c])).unwrap();
        dropped_early += usize::from(worse.eliminated_at[1].is_some_and(|k| k < folds / 2) && worse.eliminated_at[0].is_none());
        let e: Vec<[f64; 2]> = (0..folds).map(|_| [noise(&mut r), noise(&mut r)]).collect();
        let same = race(2, (0..folds).collect(), settings, |c, f| Some(e[f][c])).unwrap();
        survived += usize::from(same.eliminated_at.iter().all(Option::is_none));
    }
    let ok = dropped_early >= 95 && survived >= 90;
    verdict(7, "racing soundness", ok, format!("worse config dropped before fold {} in {dropped_early}/100, identical pair kept in {survived}/100", folds / 2), t, 30.0);
}

fn auc_pairs(y: &[usize], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

#[test]
fn c08_metric_oracles() {
    let t = Instant::now();
    let mut r = rng::stream(8, &[]);
    let mut auc_mismatch = 0;
    let mut done = 0;
    while done < 200 {
        let n = r.random_range(2..=50);
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        // coarse scores so that ties occur
        let s: Vec<f64> = (0..n).map(|_| r.random_range(0..8) as f64 / 4.0).collect();
        let got = Metric::Auc.score(&Target::classes(y.clone(), 2), &PredictionMatrix::scores(s.clone())).unwrap();
        auc_mismatch += usize::from(got != auc_pairs(&y, &s));
        done += 1;
    }
    let mut identity_violations = 0;
    for _ in 0..500 {
        let n = r.random_range(1..=40);
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let yh: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let ce = Metric::Ce.score_labels(&y, &yh, 2).unwrap();
        let acc = Metric::Acc.score_labels(&y, &yh, 2).unwrap();
        identity_violations += usize::from((ce + acc - 1.0).abs() > 1e-12);
        if let (Ok(tpr), Ok(fnr)) = (Metric::Tpr.score_labels(&y, &yh, 2), Metric::Fnr.score_labels(&y, &yh, 2)) {
            identity_violations += usize::from((tpr + fnr - 1.0).abs() > 1e-12);
        }
    }
    let ok = auc_mismatch == 0 && identity_violations == 0;
    verdict(8, "metric oracles", ok, format!("AUC mismatches {auc_mismatch}/200, identity violations {identity_violations}"), t, 10.0);
}

fn gaussian_matrix(r: &mut rng::Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(r))
}

fn to_matrix(x: &DMatrix<f64>) -> hpo::data::Matrix {
    let rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
    hpo::data::Matrix::from_rows(&rows)
}

#[test]
fn c09_elastic_net_oracles() {
    let t = Instant::now();
    let mut r = rng::stream(9, &[]);
    let en = ElasticNet { max_iter: 200_000, tol: 1e-12, ..ElasticNet::default() };
    let mut ols_err = 0.0f64;
    for _ in 0..10 {
        let (n, p) = (60, 4);
        let x = gaussian_matrix(&mut r, n, p);
        let y: Vec<f64> = (0..n).map(|i| 1.0 + x[(i, 0)] - 2.0 * x[(i, 2)] + 0.3 * { let z: f64 = StandardNormal.sample(&mut r); z }).collect();
        let fit = en.fit_linear(&to_matrix(&x), &Target::Regression(y.clone()), 0.0, 0.0).unwrap();
        // normal equations with an explicit intercept column
        let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let beta = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * DVector::from_vec(y)));
        ols_err = ols_err.max((fit.intercept - beta[0]).abs());
        for j in 0..p {
            ols_err = ols_err.max((fit.coef[j] - beta[j + 1]).abs());
        }
    }
    let mut lasso_err = 0.0f64;
    for _ in 0..10 {
        let (n, p) = (40, 5);
        // centred columns, orthonormal after scaling: X'X / n = I
        let mut g = gaussian_matrix(&mut r, n, p);
        for mut c in g.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let q = g.qr().q() * (n as f64).sqrt();
        let y: Vec<f64> = (0..n).map(|i| 0.5 + 1.5 * q[(i, 0)] - 0.2 * q[(i, 3)] + 0.5 * { let z: f64 = StandardNormal.sample(&mut r); z }).collect();
        let lambda = 0.3;
        let fit = en.fit_linear(&to_matrix(&q), &Target::Regression(y.clone()), lambda, 1.0).unwrap();
        for j in 0..p {
            let z = (0..n).map(|i| q[(i, j)] * y[i]).sum::<f64>() / n as f64;
            let want = z.signum() * (z.abs() - lambda).max(0.0);
            lasso_err = lasso_err.max((fit.coef[j] - want).abs());
        }
    }
    let ok = ols_err < 1e-6 && lasso_err < 1e-6;
    verdict(9, "elastic net oracles", ok, format!("OLS max error {ols_err:.2e}, lasso max error {lasso_err:.2e}"), t, 10.0);
}

#[test]
fn c10_threshold_tuning_never_worse() {
    let t = Instant::now();
    let mut r = rng::stream(10, &[]);
    let mut worse = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=60);
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        for m in [Metric::Acc, Metric::Ce, Metric::F1, Metric::Ba] {
            let Ok(tt) = tune_threshold(&y, &s, &m, 0.5) else { continue };
            let lw = m.direction() == hpo::data::Direction::Maximize;
            if (lw && tt.score < tt.default_score) || (!lw && tt.score > tt.default_score) {
                worse += 1;
            }
        }
    }
    let ex = tune_threshold(&[1, 1, 0, 0], &[0.3, 0.4, 0.1, 0.2], &Metric::Acc, 0.5).unwrap();
    let ok = worse == 0 && ex.score == 1.0;
    verdict(10, "threshold tuning", ok, format!("worse than default in {worse} cases, worked example accuracy {}", ex.score), t, 5.0);
}

#[test]
fn c11_determinism_across_workers_and_levels() {
    let t = Instant::now();
    let data = Arc::new(synth::smooth_classification(90, 0.1, 11));
    let outer = make_kfold(90, 3, 1, Some(data.target()), &mut rng::stream(11, &[])).unwrap();
    let tl = TunedLearner::new(
        Arc::new(Knn),
        TunerSpec::Es(EsSettings { mu: 4, lambda: 4, ..EsSettings::default() }),
        ResamplingSpec::cv(3),
        Metric::Ce,
        Termination::evals(12),
    );
    let fingerprint = |exec: &Executor| {
        let rep = nested_evaluate(&tl, &data, &outer, 11, exec, &NestedOptions::default());
        let mut s = serde_json::to_string(&rep).unwrap();
        for f in &rep.folds {
            let mut buf = Vec::new();
            f.archive.as_ref().unwrap().write_jsonl(&mut buf).unwrap();
            s.push_str(&String::from_utf8(buf).unwrap());
        }
        s
    };
    let base = fingerprint(&Executor::sequential());
    let mut mismatches = Vec::new();
    for workers in [1, 4, 8] {
        for level in [Level::Outer, Level::Batch, Level::Config, Level::Fold, Level::Combined] {
            if fingerprint(&Executor::new(workers, level).unwrap()) != base {
                mismatches.push(format!("{workers}@{level}"));
            }
        }
    }
    verdict(11, "determinism and parallel equivalence", mismatches.is_empty(), format!("15 runs, mismatches {mismatches:?}"), t, 120.0);
}

fn contained(inner: &ResamplingPlan, outer: &Split) -> bool {
    let train: HashSet<usize> = outer.train.iter().copied().collect();
    let test: HashSet<usize> = outer.test.iter().copied().collect();
    inner.splits().iter().all(|s| s.train.iter().chain(&s.test).all(|i| train.contains(i) && !test.contains(i)))
}

#[test]
fn c12_leakage_guard_holds() {
    let t = Instant::now();
    let data = Arc::new(synth::smooth_classification(80, 0.1, 12));
    let inner_specs = [ResamplingSpec::holdout(0.7), ResamplingSpec::cv(4), ResamplingSpec::Cv { folds: 2, repeats: 3, stratify: false }];
    let outer_specs = [ResamplingSpec::cv(5), ResamplingSpec::holdout(0.6), ResamplingSpec::Cv { folds: 3, repeats: 2, stratify: true }];
    let mut checked = 0;
    let mut violations = 0;
    for (i, inner) in inner_specs.iter().enumerate() {
        for (o, outer_spec) in outer_specs.iter().enumerate() {
            let seed = (10 * i + o) as u64;
            let tl = TunedLearner::new(Arc::new(Knn), TunerSpec::Random(RandomSettings::default()), inner.clone(), Metric::Ce, Termination::evals(2));
            let outer = outer_spec.instantiate(data.target(), &mut rng::stream(seed, &[])).unwrap();
            // the guard inside nested_evaluate panics on a violation
            let report = nested_evaluate(&tl, &data, &outer, seed, &Executor::sequential(), &NestedOptions::default());
            assert_eq!(report.n_failed(), 0);
            for split in outer.splits() {
                let m = tl.tune(&data, &split.train, seed, &Executor::sequential()).unwrap();
                violations += usize::from(!contained(&m.inner_plan, split));
                checked += 1;
            }
        }
    }
    verdict(12, "leakage guard", violations == 0, format!("{checked} outer splits checked independently, {violations} violations"), t, 60.0);
}
