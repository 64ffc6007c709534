//! Random search against grid search when only one of two parameters
//! matters. With nine evaluations the grid tries three values of the
//! relevant parameter, random search tries nine.

use hpo::exec::Executor;
use hpo::objective::{Objective, SyntheticFn, SyntheticObjective};
use hpo::tuners::{run, GridSearch, GridSettings, RandomSearch, RandomSettings, RunOptions, Termination};

fn main() {
    let obj = SyntheticObjective::new(SyntheticFn::LowEffDim { dim: 2 });
    let exec = Executor::sequential();
    let opts = |seed| RunOptions::new(Termination::evals(9), seed);
    let mut rs = Vec::new();
    let mut gs = Vec::new();
    for seed in 0..50 {
        let mut t = RandomSearch::new(obj.space().clone(), RandomSettings::default(), seed);
        rs.push(run(&obj, &mut t, &opts(seed), &exec).expect("run").incumbent.expect("best").1);
        let mut t = GridSearch::new(obj.space().clone(), GridSettings { resolution: 3, ..GridSettings::default() }, seed).expect("grid");
        gs.push(run(&obj, &mut t, &opts(seed), &exec).expect("run").incumbent.expect("best").1);
    }
    rs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    println!("best after 9 evaluations over 50 seeds");
    println!("  random: median {:.4}, quartiles [{:.4}, {:.4}]", rs[25], rs[12], rs[37]);
    println!("  grid:   median {:.4} (the same nine points every seed)", gs[25]);
}
