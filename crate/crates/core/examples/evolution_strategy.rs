//! (mu + lambda) evolution strategy over the mixed k-NN space (real,
//! log-integer and categorical parameters).

use hpo::data::{make_kfold, synth, Metric};
use hpo::exec::Executor;
use hpo::learn::Knn;
use hpo::objective::{Objective, ResampledObjective};
use hpo::rng;
use hpo::tuners::{run, EsSettings, EvolutionStrategy, RunOptions, Termination};
use std::sync::Arc;

fn main() {
    let data = Arc::new(synth::smooth_classification(200, 0.15, 5));
    let plan = make_kfold(data.n(), 5, 1, Some(data.target()), &mut rng::stream(5, &[])).expect("plan");
    let obj = ResampledObjective::new(Arc::new(Knn), data, plan, Metric::Ce);
    let settings = EsSettings { mu: 8, lambda: 8, ..EsSettings::default() };
    let mut es = EvolutionStrategy::new(obj.space().clone(), settings, 5).expect("settings");
    let exec = Executor::new(4, hpo::exec::Level::Combined).expect("pool");
    let out = run(&obj, &mut es, &RunOptions::new(Termination::evals(64), 5), &exec).expect("run");
    for gen in 0..out.iterations {
        let best = out.archive.entries().iter().filter(|e| e.batch == gen).map(|e| e.score).fold(f64::INFINITY, f64::min);
        println!("generation {gen}: best CE in batch {best:.4}");
    }
    let (cfg, ce) = out.incumbent.expect("incumbent");
    println!("incumbent {cfg} with CE {ce:.4}");
    println!("jobs per dispatch: {:?}", exec.dispatches().iter().map(|d| d.jobs).collect::<Vec<_>>());
}
