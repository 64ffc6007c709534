pub mod cli;
pub mod data;
pub mod exec;
pub mod learn;
pub mod nested;
pub mod objective;
pub mod rng;
pub mod space;
pub mod tuners;
