use hpo::data::{make_holdout, make_kfold, Direction, Metric, PredictionMatrix, Target};
use hpo::exec::{Executor, Level};
use hpo::objective::{FidelityRange, Objective, SyntheticFn, SyntheticObjective};
use hpo::rng;
use hpo::space::{Config, ParamSpec, SearchSpace, Trafo, Value};
use hpo::tuners::acquisition::expected_improvement;
use hpo::tuners::{
    bracket_schedule, parent_probabilities, run, BoSettings, EsSettings, GridSettings, HyperbandSettings, RacingSettings,
    RandomSettings, RunOptions, Termination, TunerSpec,
};
use proptest::prelude::*;
use std::collections::HashSet;

/// Mixed, hierarchical toy objective with a fidelity range and noisy
/// instances, so every tuner kind can run on it.
struct Toy {
    space: SearchSpace,
}

impl Toy {
    fn new() -> Self {
        let space = SearchSpace::new(vec![
            ParamSpec::real("lr", -4.0, 0.0).with_trafo(Trafo::Pow10),
            ParamSpec::integer("depth", 1, 6),
            ParamSpec::categorical("kind", ["a", "b", "c"]),
            ParamSpec::real("gamma", 0.0, 1.0).when("kind", ["a"]),
            ParamSpec::integer("k", 1, 20).when("kind", ["b", "c"]),
        ])
        .unwrap();
        Self { space }
    }
}

impl Objective for Toy {
    fn id(&self) -> String {
        "toy".into()
    }
    fn space(&self) -> &SearchSpace {
        &self.space
    }
    fn direction(&self) -> Direction {
        Direction::Minimize
    }
    fn fidelity(&self) -> Option<FidelityRange> {
        Some(FidelityRange { lower: 1.0, upper: 9.0 })
    }
    fn n_instances(&self) -> usize {
        6
    }
    fn evaluate_instance(&self, cfg: &Config, instance: usize, fidelity: f64, seed: u64) -> Result<Option<f64>, String> {
        if !self.space.is_valid(cfg) {
            return Err(format!("invalid config {cfg}"));
        }
        let lr = self.space.transform(cfg).f64_or("lr", f64::NAN);
        let depth = cfg.get("depth").and_then(Value::as_f64).unwrap();
        let extra = match cfg.get("kind").and_then(Value::as_str).unwrap() {
            "a" => cfg.get("gamma").and_then(Value::as_f64).unwrap(),
            _ => cfg.get("k").and_then(Value::as_f64).unwrap() / 20.0,
        };
        let noise = (rng::derive_seed(seed, &[instance as u64]) % 1000) as f64 / 1e4;
        Ok(Some((lr.log10() + 2.0).powi(2) + (depth - 3.0).abs() + extra + noise + 1.0 / fidelity))
    }
}

fn all_specs() -> Vec<TunerSpec> {
    vec![
        TunerSpec::Grid(GridSettings { resolution: 2, ..GridSettings::default() }),
        TunerSpec::Random(RandomSettings::default()),
        TunerSpec::Es(EsSettings { mu: 3, lambda: 4, ..EsSettings::default() }),
        TunerSpec::Bo(BoSettings { init_design: Some(4), ..BoSettings::default() }),
        TunerSpec::Hyperband(HyperbandSettings::default()),
        TunerSpec::Racing(RacingSettings::default()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_and_repaired_configs_are_valid(seed in any::<u64>()) {
        let toy = Toy::new();
        let mut r = rng::stream(seed, &[]);
        for _ in 0..20 {
            let c = toy.space.sample_uniform(&mut r);
            prop_assert!(toy.space.is_valid(&c), "{c}");
            // activate a child the condition forbids and drop a required one
            let mut broken = c.clone();
            broken.insert("gamma", 2.0);
            broken.remove("depth");
            let fixed = toy.space.repair(broken, &mut r);
            prop_assert!(toy.space.is_valid(&fixed), "{fixed}");
        }
    }

    #[test]
    fn every_tuner_proposes_valid_configs(seed in any::<u64>(), which in 0usize..6) {
        let toy = Toy::new();
        let spec = &all_specs()[which];
        let mut tuner = spec.build(&toy.space, toy.fidelity(), toy.n_instances(), Some(60), seed).unwrap();
        let term = Termination { max_evals: Some(60), ..Termination::default() };
        let out = run(&toy, tuner.as_mut(), &RunOptions::new(term, seed), &Executor::sequential()).unwrap();
        prop_assert!(!out.archive.is_empty());
        prop_assert!(out.archive.len() <= 60);
        for e in out.archive.entries() {
            prop_assert!(toy.space.is_valid(&e.config), "{} proposed {}", spec.kind(), e.config);
            prop_assert!(!e.failed, "{}", spec.kind());
        }
    }

    #[test]
    fn trace_is_running_minimum(seed in any::<u64>(), evals in 1usize..40) {
        let obj = SyntheticObjective::new(SyntheticFn::Sphere { dim: 3 }).with_noise(0.5, 1);
        let mut t = TunerSpec::Random(RandomSettings::default()).build(obj.space(), None, 1, None, seed).unwrap();
        let out = run(&obj, t.as_mut(), &RunOptions::new(Termination::evals(evals), seed), &Executor::sequential()).unwrap();
        let trace = out.archive.trace();
        prop_assert_eq!(trace.len(), evals);
        let scores: Vec<f64> = out.archive.entries().iter().map(|e| e.score).collect();
        for (i, p) in trace.iter().enumerate() {
            let want = scores[..=i].iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(p.best, Some(want));
        }
    }

    #[test]
    fn archive_jsonl_round_trips_exactly(seed in any::<u64>()) {
        let toy = Toy::new();
        let mut t = TunerSpec::Random(RandomSettings::default()).build(&toy.space, None, 6, None, seed).unwrap();
        let out = run(&toy, t.as_mut(), &RunOptions::new(Termination::evals(8), seed), &Executor::sequential()).unwrap();
        let mut first = Vec::new();
        out.archive.write_jsonl(&mut first).unwrap();
        let back = hpo::objective::Archive::read_jsonl(first.as_slice()).unwrap();
        let mut second = Vec::new();
        back.write_jsonl(&mut second).unwrap();
        prop_assert_eq!(&first, &second);
        for (a, b) in out.archive.entries().iter().zip(back.entries()) {
            prop_assert_eq!(&a.config, &b.config);
            prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
    }

    #[test]
    fn kfold_partitions_rows(n in 4usize..120, k in 2usize..8, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % 3).collect();
        let target = Target::classes(labels.clone(), 3);
        for stratify in [None, Some(&target)] {
            let plan = make_kfold(n, k, 1, stratify, &mut rng::stream(seed, &[])).unwrap();
            prop_assert_eq!(plan.len(), k);
            let mut seen = vec![0usize; n];
            for s in plan.splits() {
                let train: HashSet<_> = s.train.iter().collect();
                prop_assert!(s.test.iter().all(|i| !train.contains(i)));
                prop_assert_eq!(s.train.len() + s.test.len(), n);
                for &i in &s.test {
                    seen[i] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            if stratify.is_some() {
                // each class spread over folds as evenly as possible
                for class in 0..3 {
                    let per: Vec<usize> = plan.splits().iter().map(|s| s.test.iter().filter(|&&i| labels[i] == class).count()).collect();
                    prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
                }
            }
        }
    }

    #[test]
    fn holdout_is_disjoint_and_covers(n in 2usize..200, frac in 0.1f64..0.9, seed in any::<u64>()) {
        let plan = make_holdout(n, frac, None, &mut rng::stream(seed, &[])).unwrap();
        let s = &plan.splits()[0];
        let all: HashSet<_> = s.train.iter().chain(&s.test).collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(s.train.len() + s.test.len(), n);
        prop_assert!(!s.train.is_empty() && !s.test.is_empty());
    }

    #[test]
    fn auc_flips_with_scores(labels in proptest::collection::vec(0usize..2, 2..60), seed in any::<u64>()) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let mut r = rng::stream(seed, &[]);
        let s: Vec<f64> = labels.iter().map(|_| (rand::Rng::random_range(&mut r, 0..5)) as f64).collect();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let y = Target::classes(labels.clone(), 2);
        let a = Metric::Auc.score(&y, &PredictionMatrix::scores(s)).unwrap();
        let b = Metric::Auc.score(&y, &PredictionMatrix::scores(neg)).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_improvement_is_nonnegative_and_monotone(mean in -5.0f64..5.0, sd in 0.0f64..3.0, c in -5.0f64..5.0, dc in 0.0f64..2.0) {
        let ei = expected_improvement(mean, sd, c);
        prop_assert!(ei >= 0.0);
        prop_assert!(ei >= (c - mean).max(0.0) - 1e-12);
        prop_assert!(expected_improvement(mean, sd, c + dc) >= ei - 1e-12);
    }

    #[test]
    fn hyperband_spend_within_budget(eta in 2u32..5, lower in 0.5f64..2.0, ratio in 1.0f64..200.0) {
        let range = FidelityRange { lower, upper: lower * ratio };
        let schedule = bracket_schedule(range, eta as f64).unwrap();
        let s_max = schedule.len() - 1;
        for b in &schedule {
            let spend: f64 = b.stages.iter().map(|s| s.n as f64 * s.fidelity).sum();
            let n_stages = b.stages.len();
            let budget = (s_max + 1) as f64 * range.upper;
            prop_assert!(spend <= budget * (1.0 + 1e-9) + range.upper * n_stages as f64, "{spend} > {budget}");
            prop_assert!(b.stages.windows(2).all(|w| w[1].n <= w[0].n && w[1].fidelity >= w[0].fidelity));
            prop_assert!((b.stages.last().unwrap().fidelity - range.upper).abs() < 1e-9 * range.upper);
        }
    }
}

#[test]
fn parent_probabilities_sum_to_one() {
    for n in 1..=20 {
        let p = parent_probabilities(n);
        assert_eq!(p.len(), n);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12, "n = {n}");
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        // rational form: sum of 2(n - r + 1) over r is n(n + 1)
        assert_eq!((1..=n).map(|r| 2 * (n - r + 1)).sum::<usize>(), n * (n + 1));
    }
}

#[test]
fn tuners_are_reproducible_across_levels() {
    let toy = Toy::new();
    for spec in all_specs() {
        let archive = |exec: &Executor| {
            let mut t = spec.build(&toy.space, toy.fidelity(), toy.n_instances(), Some(40), 17).unwrap();
            let out = run(&toy, t.as_mut(), &RunOptions::new(Termination::evals(40), 17), exec).unwrap();
            let mut buf = Vec::new();
            out.archive.write_jsonl(&mut buf).unwrap();
            buf
        };
        let base = archive(&Executor::sequential());
        for level in [Level::Config, Level::Fold, Level::Combined] {
            assert!(archive(&Executor::new(3, level).unwrap()) == base, "{} at {level:?}", spec.kind());
        }
    }
}

