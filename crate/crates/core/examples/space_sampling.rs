//! Conditional search space: parse a document, sample, build a grid and
//! encode configurations for a surrogate model.

use hpo::rng;
use hpo::space::SearchSpace;

const SPACE: &str = r#"
[[param]]
name = "kernel"
kind = "categorical"
levels = ["linear", "rbf"]

[[param]]
name = "cost"
kind = "real"
lower = -10.0
upper = 10.0
trafo = "pow2"

[[param]]
name = "gamma"
kind = "real"
lower = -10.0
upper = 10.0
trafo = "pow2"
condition = { parent = "kernel", values = ["rbf"] }
"#;

fn main() {
    let space = SearchSpace::from_toml_str(SPACE).expect("valid space");
    let mut r = rng::stream(1, &[]);
    println!("uniform samples (tuner scale -> learner scale):");
    for _ in 0..5 {
        let c = space.sample_uniform(&mut r);
        let p = space.transform(&c);
        println!("  {c}\n    -> {:?}", p.iter().collect::<Vec<_>>());
    }
    let grid = space.grid(3).expect("grid");
    println!("resolution-3 grid has {} points (gamma only under rbf)", grid.len());
    for c in &grid {
        println!("  {c}  encoded {:?}", space.encode(c).expect("valid"));
    }
}
