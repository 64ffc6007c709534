//! Tuning over a branch between two pipelines. The branch choice is a
//! categorical parameter; each option's parameters are active only when it
//! is selected.

use hpo::data::{make_kfold, synth, Metric};
use hpo::exec::Executor;
use hpo::learn;
use hpo::objective::{Objective, ResampledObjective};
use hpo::rng;
use hpo::tuners::{run, RandomSearch, RandomSettings, RunOptions, Termination};
use std::sync::Arc;

fn main() {
    let learner = learn::by_id("branch:pipe:standardize+elastic_net|pipe:standardize+knn").expect("learner");
    for s in learner.space().specs() {
        println!("{:<40} {:?}", s.name, s.domain);
    }
    let data = Arc::new(synth::linear(150, 5, 0.5, 9));
    let plan = make_kfold(data.n(), 5, 1, None, &mut rng::stream(9, &[])).expect("plan");
    let obj = ResampledObjective::new(learner, data, plan, Metric::Mse);
    let mut rs = RandomSearch::new(obj.space().clone(), RandomSettings::default(), 9);
    let out = run(&obj, &mut rs, &RunOptions::new(Termination::evals(40), 9), &Executor::sequential()).expect("run");
    let (cfg, mse) = out.incumbent.expect("incumbent");
    println!("best of 40: {cfg}\n  MSE {mse:.4}");
}
