//! Tuning a learner that ignores its hyperparameter and guesses labels at
//! random. The best inner holdout error looks better than chance after 100
//! evaluations; the nested outer estimate stays at 0.5.

use hpo::data::{make_kfold, synth, Metric, ResamplingSpec};
use hpo::exec::{Executor, Level};
use hpo::learn::FeaturelessRandom;
use hpo::nested::{nested_evaluate, NestedOptions, TunedLearner};
use hpo::rng;
use hpo::tuners::{RandomSettings, Termination, TunerSpec};
use std::sync::Arc;

fn main() {
    let tl = TunedLearner::new(
        Arc::new(FeaturelessRandom),
        TunerSpec::Random(RandomSettings::default()),
        ResamplingSpec::holdout(2.0 / 3.0),
        Metric::Ce,
        Termination::evals(100),
    );
    let exec = Executor::new(3, Level::Outer).expect("pool");
    let (mut inner, mut outer) = (0.0, 0.0);
    let seeds = 10;
    for seed in 0..seeds {
        let data = Arc::new(synth::random_labels(100, 2, seed));
        let plan = make_kfold(data.n(), 3, 1, Some(data.target()), &mut rng::stream(seed, &[])).expect("plan");
        let report = nested_evaluate(&tl, &data, &plan, seed, &exec, &NestedOptions::default());
        inner += report.inner_mean.expect("inner");
        outer += report.aggregate.expect("outer");
        if seed == 0 {
            print!("{}", report.table());
        }
    }
    println!("over {seeds} seeds: mean best inner CE {:.3}, mean nested outer CE {:.3}", inner / seeds as f64, outer / seeds as f64);
}
