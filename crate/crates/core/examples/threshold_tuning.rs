//! Post-hoc threshold tuning for a probabilistic classifier, on a small
//! worked example and on out-of-fold scores of a k-NN model.

use hpo::data::{make_holdout, synth, Metric};
use hpo::learn::{tune_threshold, Knn, Learner};
use hpo::rng;
use hpo::space::Params;

fn main() {
    // positives score 0.3 and 0.4, negatives 0.1 and 0.2: 0.5 misses both
    let y = [1, 1, 0, 0];
    let s = [0.3, 0.4, 0.1, 0.2];
    let t = tune_threshold(&y, &s, &Metric::Acc, 0.5).expect("tuned");
    println!("worked example: {:?} gives accuracy {} (0.5 gives {})", t.rule, t.score, t.default_score);

    let data = synth::smooth_classification(300, 0.2, 8);
    let plan = make_holdout(data.n(), 0.5, Some(data.target()), &mut rng::stream(8, &[])).expect("plan");
    let split = &plan.splits()[0];
    let model = Knn.train(&data.subset(&split.train), &Params::new().with("k", 15i64), 8).expect("model");
    let test = data.subset(&split.test);
    let scores = model.predict(&test).expect("predict").positive_scores().expect("probabilities");
    let labels = test.target().labels().expect("classes").to_vec();
    for m in [Metric::Acc, Metric::F1, Metric::Ba] {
        let t = tune_threshold(&labels, &scores, &m, 0.5).expect("tuned");
        println!("{:>4}: default {:.4}, tuned {:.4} with {:?}", m.id(), t.default_score, t.score, t.rule);
    }
}
