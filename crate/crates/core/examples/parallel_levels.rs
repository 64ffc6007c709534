//! The same nested run at every parallelization level: identical results,
//! different job structure.

use hpo::data::{make_kfold, synth, Metric, ResamplingSpec};
use hpo::exec::{Executor, Level};
use hpo::learn::Knn;
use hpo::nested::{nested_evaluate, NestedOptions, TunedLearner};
use hpo::rng;
use hpo::tuners::{EsSettings, Termination, TunerSpec};
use std::sync::Arc;

fn main() {
    let data = Arc::new(synth::smooth_classification(150, 0.1, 6));
    let outer = make_kfold(data.n(), 3, 1, Some(data.target()), &mut rng::stream(6, &[])).expect("plan");
    let tl = TunedLearner::new(
        Arc::new(Knn),
        TunerSpec::Es(EsSettings { mu: 4, lambda: 4, ..EsSettings::default() }),
        ResamplingSpec::cv(3),
        Metric::Ce,
        Termination::evals(12),
    );
    let mut first: Option<String> = None;
    for level in [Level::Outer, Level::Batch, Level::Config, Level::Fold, Level::Combined] {
        let exec = Executor::new(4, level).expect("pool");
        let report = nested_evaluate(&tl, &data, &outer, 6, &exec, &NestedOptions::default());
        let json = serde_json::to_string(&report).expect("json");
        let same = first.get_or_insert_with(|| json.clone()) == &json;
        let jobs: Vec<usize> = exec.dispatches().iter().map(|d| d.jobs).collect();
        println!("{:>8}: outer CE {:.4}, same as first level: {same}, {} dispatches, jobs {:?}", level.name(), report.aggregate.unwrap_or(f64::NAN), jobs.len(), &jobs[..jobs.len().min(8)]);
    }
}
