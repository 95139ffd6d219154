//! The Monte-Carlo experiment runner: N seeded runs, per-run guarantee
//! checks, unbiasedness accumulators, concentration statistics against the
//! Bernstein bound, and a raw CSV of functional values.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::bernstein::bernstein_tail_bound;
use crate::rng::{derive_run_seed, splitmix64};
use crate::walk::{RoundingParams, WalkError};

use super::instance::Instance;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: WalkError },
    #[error("guarantee failed on seed {seed}: {detail}")]
    Guarantee { seed: u64, detail: String },
}

/// Experiment description: an instance, a run budget, a root seed, engine
/// parameters and the linear functionals to track.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub instance: Instance,
    pub runs: usize,
    pub seed: u64,
    pub params: RoundingParams,
    /// Explicit coefficient vectors (each of length n).
    pub explicit_functionals: Vec<Vec<f64>>,
    /// Number of additional random unit functionals, drawn once per
    /// experiment from the root seed.
    pub random_unit_functionals: usize,
    /// Concentration factor for tail bounds; defaults to `20 / delta`.
    pub beta: Option<f64>,
    /// Number of tail grid points (default 10).
    pub tail_grid: usize,
    /// Cap on worker threads (default: rayon's global pool).
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(instance: Instance, runs: usize, seed: u64) -> Self {
        Self {
            instance,
            runs,
            seed,
            params: RoundingParams::default(),
            explicit_functionals: Vec::new(),
            random_unit_functionals: 0,
            beta: None,
            tail_grid: 10,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error at the bound.
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub id: usize,
    pub mean_empirical: f64,
    pub mean_predicted: f64,
    pub var_empirical: f64,
    /// Bernstein variance scale `sum_i a_i^2 (x_i - x_i^2)`.
    pub var_predicted: f64,
    /// `var_empirical / var_predicted`.
    pub beta_hat: f64,
    pub tails: Vec<TailPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub runs: usize,
    pub beta: f64,
    pub functionals: Vec<FunctionalReport>,
    /// True iff every tail point of every functional passes.
    pub tails_pass: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: ConcentrationReport,
    /// Empirical mean of each coordinate across runs.
    pub coordinate_means: Vec<f64>,
    /// All per-run guarantee checks passed (a failure aborts instead).
    pub guarantees_pass: bool,
    /// CSV with one row per (run, functional).
    pub csv: String,
}

impl ExperimentResult {
    pub fn report_json(&self) -> serde_json::Value {
        json!({
            "schema": super::instance::SCHEMA,
            "kind": "concentration_report",
            "report": self.report,
            "coordinate_means": self.coordinate_means,
            "guarantees_pass": self.guarantees_pass,
        })
    }
}

/// Draw a uniformly random unit vector (Box-Muller normals, normalized).
fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    while v.len() < n {
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        v.push(r * (2.0 * std::f64::consts::PI * u2).cos());
        if v.len() < n {
            v.push(r * (2.0 * std::f64::consts::PI * u2).sin());
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    v.iter().map(|x| x / norm).collect()
}

/// Run `config.runs` independent seeded rounding runs, verify every run's
/// guarantee, and aggregate concentration statistics.
///
/// Replay-deterministic: the same config and root seed give a bit-identical
/// CSV regardless of thread count (runs derive their seeds by index and the
/// aggregation is order-independent).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    if config.runs == 0 {
        return Err(HarnessError::Invalid("need at least one run".into()));
    }
    config.instance.validate().map_err(HarnessError::Invalid)?;

    let n = config.instance.n();
    let x0 = config.instance.x0();
    let mut functionals = config.explicit_functionals.clone();
    for f in &functionals {
        if f.len() != n {
            return Err(HarnessError::Invalid("functional length mismatch".into()));
        }
    }
    let mut frng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0xf17e));
    for _ in 0..config.random_unit_functionals {
        functionals.push(random_unit(n, &mut frng));
    }

    let beta = config.beta.unwrap_or(20.0 / config.instance.delta());

    let body = || -> Result<Vec<(u64, Vec<f64>, Vec<u8>)>, HarnessError> {
        (0..config.runs)
            .into_par_iter()
            .map(|run| {
                let seed = derive_run_seed(config.seed, run as u64);
                let params = RoundingParams { seed, ..config.params.clone() };
                let outcome = config
                    .instance
                    .run_one(&params)
                    .map_err(|source| HarnessError::Run { seed, source })?;
                let check = config.instance.verify(&outcome);
                if !check.pass {
                    return Err(HarnessError::Guarantee { seed, detail: check.detail });
                }
                let xf = outcome.x_f64();
                let values: Vec<f64> = functionals
                    .iter()
                    .map(|a| a.iter().zip(&xf).map(|(ai, xi)| ai * xi).sum())
                    .collect();
                Ok((seed, values, outcome.x))
            })
            .collect()
    };
    let rows = match config.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| HarnessError::Invalid(e.to_string()))?
            .install(body),
        None => body(),
    }?;

    let runs_f = config.runs as f64;
    let mut coordinate_means = vec![0.0; n];
    for (_, _, x) in &rows {
        for (m, &b) in coordinate_means.iter_mut().zip(x.iter()) {
            *m += b as f64;
        }
    }
    for m in &mut coordinate_means {
        *m /= runs_f;
    }

    let mut reports = Vec::with_capacity(functionals.len());
    let mut tails_pass = true;
    for (fid, a) in functionals.iter().enumerate() {
        let mean_predicted: f64 = a.iter().zip(&x0).map(|(ai, xi)| ai * xi).sum();
        let var_predicted: f64 =
            a.iter().zip(&x0).map(|(ai, xi)| ai * ai * (xi - xi * xi)).sum();
        let values: Vec<f64> = rows.iter().map(|(_, v, _)| v[fid]).collect();
        let mean_empirical = values.iter().sum::<f64>() / runs_f;
        let var_empirical = if config.runs > 1 {
            values.iter().map(|v| (v - mean_empirical).powi(2)).sum::<f64>() / (runs_f - 1.0)
        } else {
            0.0
        };
        let beta_hat = if var_predicted > 0.0 { var_empirical / var_predicted } else { 0.0 };

        let sigma_beta = (beta * var_predicted).sqrt();
        let mut tails = Vec::with_capacity(config.tail_grid);
        for j in 1..=config.tail_grid {
            let t = 0.5 * j as f64 * sigma_beta;
            let bound = bernstein_tail_bound(a, &x0, t, beta);
            let p = bound.min(1.0);
            let sigma = (p * (1.0 - p) / runs_f).sqrt();
            let empirical =
                values.iter().filter(|&&v| v - mean_predicted >= t).count() as f64 / runs_f;
            let pass = empirical <= bound + 3.0 * sigma;
            tails_pass &= pass;
            tails.push(TailPoint { t, empirical, bound, sigma, pass });
        }
        reports.push(FunctionalReport {
            id: fid,
            mean_empirical,
            mean_predicted,
            var_empirical,
            var_predicted,
            beta_hat,
            tails,
        });
    }

    let mut csv = String::from("run,seed,functional_id,value,mean_pred\n");
    for (run, (seed, values, _)) in rows.iter().enumerate() {
        for (fid, v) in values.iter().enumerate() {
            let mp = reports[fid].mean_predicted;
            csv.push_str(&format!("{run},{seed},{fid},{v},{mp}\n"));
        }
    }

    Ok(ExperimentResult {
        report: ConcentrationReport { runs: config.runs, beta, functionals: reports, tails_pass },
        coordinate_means,
        guarantees_pass: true,
        csv,
    })
}
