//! Benchmark harness: several tuners, equal evaluation budgets, paired
//! replications, quartiles of best-so-far at checkpoints.

use hpo::cli::SuiteConfig;
use hpo::exec::Executor;

const SUITE: &str = r#"
seed = 21
replications = 10
checkpoints = [5, 10, 20, 30]

[task]
synthetic = { function = "branin" }

[termination]
max_evals = 30

[[tuners]]
tuner = { kind = "random" }

[[tuners]]
tuner = { kind = "es", mu = 6, lambda = 6 }

[[tuners]]
tuner = { kind = "bo", gp_restarts = 3, noisy = false }
"#;

fn main() {
    let suite: SuiteConfig = toml::from_str(SUITE).expect("suite");
    let seed = suite.validate().expect("valid");
    let result = hpo::cli::run_suite(&suite, seed, &Executor::sequential()).expect("suite runs");
    print!("{}", result.table());
    for a in 0..result.tuners.len() {
        for b in 0..result.tuners.len() {
            if a != b {
                println!("{} beats {} on {:.0}% of replications", result.tuners[a], result.tuners[b], 100.0 * result.win_rate(a, b));
            }
        }
    }
}
