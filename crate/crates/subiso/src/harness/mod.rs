//! Instance generators, the Monte-Carlo experiment runner, concentration
//! statistics and file I/O for the command-line interface.

pub mod generators;
pub mod instance;
pub mod runner;

pub use generators::{
    gen_block_instance, gen_komlos, gen_makespan, gen_matching_cycle, gen_matching_random,
    gen_petersen, gen_random_cubic, gen_sparse_lp, gen_tree_cycle, BlockInstance, BlockOracle,
};
pub use instance::{GuaranteeReport, Instance};
pub use runner::{
    run_experiment, ConcentrationReport, ExperimentConfig, ExperimentResult, FunctionalReport,
    HarnessError, TailPoint,
};
