//! Hyperband bracket design and a multi-fidelity run where fidelity is the
//! share of training rows a k-NN model sees.

use hpo::data::{make_holdout, synth, Metric};
use hpo::exec::Executor;
use hpo::learn::Knn;
use hpo::objective::{FidelityRange, Objective, ResampledObjective};
use hpo::rng;
use hpo::tuners::{bracket_schedule, run, Hyperband, HyperbandSettings, RunOptions, Termination};
use std::sync::Arc;

fn main() {
    let range = FidelityRange { lower: 1.0, upper: 8.0 };
    for b in bracket_schedule(range, 2.0).expect("schedule") {
        let stages: Vec<String> = b.stages.iter().map(|s| format!("{}@{}", s.n, s.fidelity)).collect();
        println!("bracket s={}: {}  (spend {} of {})", b.s, stages.join(" -> "), b.spend(), b.budget);
    }

    let data = Arc::new(synth::smooth_classification(400, 0.1, 2));
    let plan = make_holdout(data.n(), 2.0 / 3.0, Some(data.target()), &mut rng::stream(2, &[])).expect("plan");
    let obj = ResampledObjective::new(Arc::new(Knn), data, plan, Metric::Ce).with_fidelity(1.0, 8.0);
    let mut hb = Hyperband::new(obj.space().clone(), HyperbandSettings { eta: 2.0, repetitions: Some(1) }, range, 2).expect("hb");
    let out = run(&obj, &mut hb, &RunOptions::new(Termination { max_fidelity: Some(128.0), ..Termination::default() }, 2), &Executor::sequential()).expect("run");
    println!("{} evaluations, fidelity spent {}", out.archive.len(), out.archive.total_fidelity());
    let (cfg, ce) = out.incumbent.expect("incumbent");
    println!("best at full fidelity: {cfg} with CE {ce:.4}");
}
