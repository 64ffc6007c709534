//! Holdout and cross-validation estimates of a k-NN classifier on a
//! bundled dataset, scored with several metrics.

use hpo::data::{estimate_ge, make_holdout, make_kfold, synth, Aggregator, Metric};
use hpo::learn::{Knn, Learner};
use hpo::rng;
use hpo::space::Params;

fn main() {
    let data = synth::smooth_classification(200, 0.1, 3);
    let mut r = rng::stream(3, &[]);
    let holdout = make_holdout(data.n(), 2.0 / 3.0, Some(data.target()), &mut r).expect("plan");
    let cv = make_kfold(data.n(), 10, 1, Some(data.target()), &mut r).expect("plan");
    let params = Params::new().with("k", 7i64);
    println!("{:>8}  {:>10}  {:>10}", "metric", "holdout", "10-fold");
    for m in [Metric::Ce, Metric::Ba, Metric::Auc, Metric::Brier, Metric::LogLoss] {
        let h = estimate_ge(&Knn, &params, &data, &holdout, &m, Aggregator::Mean, 1).expect("estimate");
        let c = estimate_ge(&Knn, &params, &data, &cv, &m, Aggregator::Mean, 1).expect("estimate");
        println!("{:>8}  {:>10.4}  {:>10.4}", m.id(), h.aggregate.unwrap_or(f64::NAN), c.aggregate.unwrap_or(f64::NAN));
    }
    let c = estimate_ge(&Knn, &params, &data, &cv, &Metric::Ce, Aggregator::Mean, 1).expect("estimate");
    println!("per-fold CE of {}: {:?}", Knn.id(), c.per_split.iter().map(|v| v.unwrap_or(f64::NAN)).collect::<Vec<_>>());
}
