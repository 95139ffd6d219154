//! Unrelated-machine makespan rounding with slack, including the q-resource
//! generalization.
//!
//! Assignment rows (one per not-yet-assigned job) are always conserved, so
//! every outcome is a genuine assignment. A machine's load rows are conserved
//! while its excess `e_i = sum_{alive (i,j)} (1 - x_ij)` exceeds
//! `q / (1 - 2 delta)`; once it drops below, the remaining fractional mass
//! can add at most `q * p_max / (1 - 2 delta)` to the load.

use serde::Serialize;
use thiserror::Error;

use crate::state::FractionalState;
use crate::walk::{RoundingOutcome, SubspaceOracle, SubspaceSpec, WalkError};

#[derive(Debug, Error)]
pub enum MakespanError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("outcome is not an assignment: job {job} selected {count} machines")]
    NotAnAssignment { job: usize, count: usize },
}

/// An unrelated-machines instance with a fractional assignment to round.
///
/// Sizes are `p[i][j][h]` for machine `i`, job `j`, resource `h`; `q = 1`
/// recovers scalar loads. The walk variables are exactly the support triplets
/// of `x0`, in the given order.
#[derive(Debug, Clone)]
pub struct MakespanInstance {
    pub machines: usize,
    pub jobs: usize,
    pub resources: usize,
    pub p: Vec<Vec<Vec<f64>>>,
    /// Target makespan per resource.
    pub target: Vec<f64>,
    /// Sparse fractional assignment: `(machine, job, value)` with value > 0.
    pub x0: Vec<(usize, usize, f64)>,
    pub delta: f64,
}

impl MakespanInstance {
    pub fn new(
        machines: usize,
        jobs: usize,
        resources: usize,
        p: Vec<Vec<Vec<f64>>>,
        target: Vec<f64>,
        x0: Vec<(usize, usize, f64)>,
        delta: f64,
    ) -> Result<Self, MakespanError> {
        let inst = Self { machines, jobs, resources, p, target, x0, delta };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), MakespanError> {
        if !(0.0..0.5).contains(&self.delta) {
            return Err(MakespanError::Invalid("delta must be in [0, 1/2)".into()));
        }
        if self.p.len() != self.machines
            || self.p.iter().any(|pj| pj.len() != self.jobs)
            || self.p.iter().flatten().any(|ph| ph.len() != self.resources)
        {
            return Err(MakespanError::Invalid("size tensor shape mismatch".into()));
        }
        if self.target.len() != self.resources {
            return Err(MakespanError::Invalid("target length != resources".into()));
        }
        if self.p.iter().flatten().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(MakespanError::Invalid("sizes must be finite and nonnegative".into()));
        }
        let mut job_sum = vec![0.0; self.jobs];
        for &(i, j, v) in &self.x0 {
            if i >= self.machines || j >= self.jobs {
                return Err(MakespanError::Invalid("x0 triplet out of range".into()));
            }
            if !(v > 0.0 && v <= 1.0 + 1e-9) {
                return Err(MakespanError::Invalid("x0 values must be in (0, 1]".into()));
            }
            for h in 0..self.resources {
                if self.p[i][j][h] > self.target[h] + 1e-9 {
                    return Err(MakespanError::Invalid(format!(
                        "x0[{i}][{j}] > 0 but p exceeds target on resource {h}"
                    )));
                }
            }
            job_sum[j] += v;
        }
        for (j, s) in job_sum.iter().enumerate() {
            if (s - 1.0).abs() > 1e-9 {
                return Err(MakespanError::Invalid(format!(
                    "job {j} fractional assignment sums to {s}"
                )));
            }
        }
        if self.p_max() <= 0.0 {
            return Err(MakespanError::Invalid("p_max must be positive".into()));
        }
        Ok(())
    }

    /// Maximum size over the support of `x0`, across resources.
    pub fn p_max(&self) -> f64 {
        self.x0
            .iter()
            .flat_map(|&(i, j, _)| self.p[i][j].iter().copied())
            .fold(0.0, f64::max)
    }

    /// Walk variables in order: the `(machine, job)` pairs of `x0`.
    pub fn variables(&self) -> Vec<(usize, usize)> {
        self.x0.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    /// Initial vector for the walk, in variable order.
    pub fn x0_vector(&self) -> Vec<f64> {
        self.x0.iter().map(|&(_, _, v)| v.min(1.0)).collect()
    }

    /// Protection threshold `q / (1 - 2 delta)` on the excess.
    pub fn excess_threshold(&self) -> f64 {
        self.resources as f64 / (1.0 - 2.0 * self.delta)
    }

    pub fn lst_oracle(&self) -> LstOracle {
        let pm = self.p_max();
        LstOracle {
            vars: self.variables(),
            p_norm: self
                .x0
                .iter()
                .map(|&(i, j, _)| self.p[i][j].iter().map(|&v| v / pm).collect())
                .collect(),
            resources: self.resources,
            threshold: self.excess_threshold(),
            delta: self.delta,
        }
    }
}

/// Excess of machine `i`: total fractional headroom over the alive variables
/// of that machine, `sum (1 - x_ij)`.
pub fn machine_excess(state: &FractionalState, instance: &MakespanInstance, i: usize) -> f64 {
    instance
        .x0
        .iter()
        .enumerate()
        .filter(|&(v, &(mi, _, _))| mi == i && state.is_alive(v))
        .map(|(v, _)| 1.0 - state.x()[v])
        .sum()
}

/// Slack variant of the list-scheduling iterated rounding oracle.
#[derive(Debug, Clone)]
pub struct LstOracle {
    vars: Vec<(usize, usize)>,
    /// Sizes normalized by `p_max`, per variable per resource.
    p_norm: Vec<Vec<f64>>,
    resources: usize,
    threshold: f64,
    delta: f64,
}

impl SubspaceOracle for LstOracle {
    fn slack(&self) -> f64 {
        self.delta
    }

    fn subspace(&self, state: &FractionalState) -> Result<SubspaceSpec, WalkError> {
        let alive = state.alive();
        let n_k = alive.len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();

        // Assignment rows for jobs not yet integrally assigned (= jobs with
        // alive variables; a frozen 1 freezes the whole job row).
        let mut job_positions: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        let mut machine_positions: std::collections::BTreeMap<usize, Vec<usize>> =
            Default::default();
        for (k, &v) in alive.iter().enumerate() {
            let (i, j) = self.vars[v];
            job_positions.entry(j).or_default().push(k);
            machine_positions.entry(i).or_default().push(k);
        }
        for (j, positions) in &job_positions {
            let mut row = vec![0.0; n_k];
            for &k in positions {
                row[k] = 1.0;
            }
            rows.push(row);
            labels.push(format!("assign job {j}"));
        }

        // Load rows for machines whose excess is above threshold, one per
        // resource.
        for (i, positions) in &machine_positions {
            let excess: f64 = positions.iter().map(|&k| 1.0 - state.x()[alive[k]]).sum();
            if excess > self.threshold {
                for h in 0..self.resources {
                    let mut row = vec![0.0; n_k];
                    for &k in positions {
                        row[k] = self.p_norm[alive[k]][h];
                    }
                    rows.push(row);
                    labels.push(format!("load machine {i} resource {h}"));
                }
            }
        }
        Ok(SubspaceSpec { rows, forced_zero: Vec::new(), labels })
    }
}

/// Per-machine, per-resource load report.
#[derive(Debug, Clone, Serialize)]
pub struct LoadReport {
    /// `loads[i][h]` of the integral assignment.
    pub loads: Vec<Vec<f64>>,
    /// Loads of the fractional input.
    pub fractional: Vec<Vec<f64>>,
    /// Additive allowance `q * p_max / (1 - 2 delta)` (q = 1 collapses to
    /// `p_max / (1 - 2 delta)`).
    pub allowance: f64,
    pub max_increase: f64,
    pub pass: bool,
}

/// Check the additive load guarantee of an outcome.
pub fn verify_loads(
    instance: &MakespanInstance,
    outcome: &RoundingOutcome,
) -> Result<LoadReport, MakespanError> {
    let x = &outcome.x;
    let vars = instance.variables();
    assert_eq!(x.len(), vars.len(), "outcome length mismatch");

    let mut chosen = vec![0usize; instance.jobs];
    for (v, &(_, j)) in vars.iter().enumerate() {
        if x[v] == 1 {
            chosen[j] += 1;
        }
    }
    for (j, &count) in chosen.iter().enumerate() {
        if count != 1 {
            return Err(MakespanError::NotAnAssignment { job: j, count });
        }
    }

    let mut loads = vec![vec![0.0; instance.resources]; instance.machines];
    let mut fractional = vec![vec![0.0; instance.resources]; instance.machines];
    for (v, &(i, j)) in vars.iter().enumerate() {
        for h in 0..instance.resources {
            loads[i][h] += instance.p[i][j][h] * x[v] as f64;
            fractional[i][h] += instance.p[i][j][h] * instance.x0[v].2;
        }
    }
    let allowance =
        instance.resources as f64 * instance.p_max() / (1.0 - 2.0 * instance.delta);
    let mut max_increase = f64::MIN;
    for i in 0..instance.machines {
        for h in 0..instance.resources {
            max_increase = max_increase.max(loads[i][h] - fractional[i][h]);
        }
    }
    if instance.machines == 0 {
        max_increase = 0.0;
    }
    Ok(LoadReport {
        pass: max_increase <= allowance + 1e-6,
        loads,
        fractional,
        allowance,
        max_increase,
    })
}
