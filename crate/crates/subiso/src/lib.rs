//! Sub-isotropic rounding: a walk-based rounding engine that combines
//! iterated rounding (hard constraints conserved exactly) with
//! randomized-rounding-style concentration.
//!
//! The engine repeatedly asks a constraint oracle for a subspace of rows to
//! conserve, solves a small feasibility SDP for a covariance matrix `U` whose
//! directions are orthogonal to those rows yet almost pairwise independent,
//! and takes a symmetric `±U^{1/2} r` step until every coordinate reaches 0
//! or 1. Each application module (column-sparse LPs, unrelated-machine
//! makespan, degree-bounded spanning trees, bipartite matching) supplies an
//! oracle with a declared slack `δ`, which is what buys the concentration.
//!
//! Layout:
//! - [`linalg`]: orthonormal bases and PSD square roots.
//! - [`cert`]: the covariance SDP, its certificates and the checker.
//! - [`state`] / [`walk`]: the fractional state and the rounding engine.
//! - [`bernstein`]: the tail-bound evaluator used by the harness.
//! - [`sparse_lp`], [`makespan`], [`degmat`], [`matching`]: application oracles
//!   and per-run guarantee verifiers.
//! - [`harness`]: instance generators, the Monte-Carlo experiment runner and
//!   concentration statistics.

pub mod bernstein;
pub mod cert;
pub mod degmat;
pub mod harness;
pub mod linalg;
pub mod makespan;
pub mod matching;
pub mod rng;
pub mod sparse_lp;
pub mod state;
pub mod walk;

pub use cert::{find_subisotropic_covariance, verify_certificate, CovarianceCertificate};
pub use state::FractionalState;
pub use walk::{
    subiso_round, subiso_round_energy_mode, RoundingOutcome, RoundingParams, StepMode,
    SubspaceOracle, SubspaceSpec, WalkError,
};
