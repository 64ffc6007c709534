//! Gaussian-process Bayesian optimization on Branin, single proposals with
//! expected improvement and batches of four with randomized LCB.

use hpo::exec::Executor;
use hpo::objective::{Objective, SyntheticFn, SyntheticObjective};
use hpo::tuners::{run, BayesOpt, BoSettings, RandomSearch, RandomSettings, RunOptions, Termination};

fn main() {
    let f = SyntheticFn::Branin;
    let obj = SyntheticObjective::new(f.clone());
    let exec = Executor::sequential();
    let opts = RunOptions::new(Termination::evals(30), 11);
    println!("optimum {:.4}", f.optimum());

    let mut bo = BayesOpt::new(obj.space().clone(), BoSettings { noisy: false, ..BoSettings::default() }, 11).expect("bo");
    let out = run(&obj, &mut bo, &opts, &exec).expect("run");
    for p in out.archive.trace().iter().step_by(5) {
        println!("  EI  after {:>2} evals: {:.4}", p.index, p.best.unwrap_or(f64::NAN));
    }
    println!("  EI  final: {:.4}", out.incumbent.expect("best").1);

    let mut q = BayesOpt::new(obj.space().clone(), BoSettings { batch: 4, noisy: false, ..BoSettings::default() }, 11).expect("bo");
    let out = run(&obj, &mut q, &opts, &exec).expect("run");
    println!("  qLCB (batch 4) final: {:.4} in {} iterations", out.incumbent.expect("best").1, out.iterations);

    let mut rs = RandomSearch::new(obj.space().clone(), RandomSettings::default(), 11);
    let out = run(&obj, &mut rs, &opts, &exec).expect("run");
    println!("  random search final: {:.4}", out.incumbent.expect("best").1);
}
