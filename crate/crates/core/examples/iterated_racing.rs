//! Single races and iterated racing. A race evaluates candidates fold by
//! fold and drops those a paired test shows to be worse than the best.

use hpo::exec::Executor;
use hpo::objective::{Objective, SyntheticFn, SyntheticObjective};
use hpo::rng;
use hpo::tuners::racing::{race, RaceSettings};
use hpo::tuners::{run, IteratedRacing, RacingSettings, RunOptions, Termination};
use rand_distr::{Distribution, Normal};

fn main() {
    // five candidates with true means 0, 0.5, 1, 3, 6 and unit fold noise
    let means = [0.0, 0.5, 1.0, 3.0, 6.0];
    let mut r = rng::stream(4, &[]);
    let noise: Vec<Vec<f64>> = (0..20).map(|_| (0..5).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut r)).collect()).collect();
    let settings = RaceSettings { n_min: 1, ..RaceSettings::default() };
    let done = race(5, (0..20).collect(), settings, |c, fold| Some(means[c] + noise[fold][c])).expect("race");
    for c in 0..5 {
        match done.eliminated_at[c] {
            Some(k) => println!("candidate {c} (mean {}) dropped after {k} folds", means[c]),
            None => println!("candidate {c} (mean {}) survived, observed mean {:.3}", means[c], done.mean(c)),
        }
    }

    let obj = SyntheticObjective::new(SyntheticFn::Branin).with_noise(2.0, 10);
    let settings = RacingSettings { budget: Some(400), ..RacingSettings::default() };
    let mut ir = IteratedRacing::new(obj.space().clone(), settings, obj.n_instances(), 4).expect("racing");
    let out = run(&obj, &mut ir, &RunOptions::new(Termination::evals(400), 4), &Executor::sequential()).expect("run");
    let (cfg, score) = out.incumbent.expect("elite");
    let x = SyntheticFn::Branin.point(&cfg).expect("point");
    println!("iterated racing: {} races, {} fold evaluations", ir.n_iter(), out.archive.len());
    println!("best elite {cfg}: mean noisy score {score:.3}, true value {:.3}", SyntheticFn::Branin.value(&x));
}
