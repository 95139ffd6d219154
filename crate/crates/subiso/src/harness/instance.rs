//! The harness-level instance abstraction: one enum over every application
//! module, with JSON round-tripping ("schema": "subiso/1"), validation,
//! rounding and per-run guarantee verification.

use serde_json::{json, Value};

use crate::degmat::{verify_tree, DegreeSet, DegreeTreeInstance};
use crate::makespan::{verify_loads, MakespanInstance};
use crate::matching::{verify_matching, BipartiteMatchingInstance};
use crate::rng::splitmix64;
use crate::sparse_lp::{verify_row_errors, NormMode, SparseLPInstance};
use crate::walk::{subiso_round, RoundingOutcome, RoundingParams, WalkError};

use super::generators::BlockInstance;

pub const SCHEMA: &str = "subiso/1";

/// Outcome of a per-run guarantee check.
#[derive(Debug, Clone)]
pub struct GuaranteeReport {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub enum Instance {
    Block(BlockInstance),
    SparseLp(SparseLPInstance),
    Makespan(MakespanInstance),
    Tree(DegreeTreeInstance),
    Matching(BipartiteMatchingInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Block(_) => "block",
            Instance::SparseLp(_) => "sparse_lp",
            Instance::Makespan(_) => "makespan",
            Instance::Tree(_) => "tree",
            Instance::Matching(_) => "matching",
        }
    }

    /// Number of walk variables.
    pub fn n(&self) -> usize {
        self.x0().len()
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            Instance::Block(b) => b.x0(),
            Instance::SparseLp(i) => i.x0.clone(),
            Instance::Makespan(i) => i.x0_vector(),
            Instance::Tree(i) => i.x0.clone(),
            Instance::Matching(i) => i.x0_vector(),
        }
    }

    /// The instance-level slack parameter, used for the default
    /// `beta = 20/delta` in concentration reports.
    pub fn delta(&self) -> f64 {
        match self {
            Instance::Block(b) => b.delta(),
            Instance::SparseLp(i) => i.delta,
            Instance::Makespan(i) => i.delta,
            Instance::Tree(i) => i.delta,
            Instance::Matching(i) => i.delta,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Instance::Block(_) => Ok(()), // validated at construction
            Instance::SparseLp(i) => i.validate().map_err(|e| e.to_string()),
            Instance::Makespan(i) => i.validate().map_err(|e| e.to_string()),
            Instance::Tree(i) => i.validate().map_err(|e| e.to_string()),
            Instance::Matching(i) => i.validate().map_err(|e| e.to_string()),
        }
    }

    /// One rounding run. Oracles that use their own randomness (matching
    /// drops) are seeded deterministically from the run seed.
    pub fn run_one(&self, params: &RoundingParams) -> Result<RoundingOutcome, WalkError> {
        let x0 = self.x0();
        match self {
            Instance::Block(b) => subiso_round(&x0, &b.oracle(), params),
            Instance::SparseLp(i) => match i.norm_mode {
                NormMode::L1 => subiso_round(
                    &x0,
                    &i.bf_oracle().map_err(|e| WalkError::Oracle(e.to_string()))?,
                    params,
                ),
                NormMode::L2 => subiso_round(
                    &x0,
                    &i.komlos_oracle().map_err(|e| WalkError::Oracle(e.to_string()))?,
                    params,
                ),
            },
            Instance::Makespan(i) => subiso_round(&x0, &i.lst_oracle(), params),
            Instance::Tree(i) => subiso_round(&x0, &i.degmat_oracle(), params),
            Instance::Matching(i) => {
                let oracle = i.matching_oracle(splitmix64(params.seed ^ 0x0dd5));
                subiso_round(&x0, &oracle, params)
            }
        }
    }

    /// Per-run guarantee check, delegated to the module verifier.
    pub fn verify(&self, outcome: &RoundingOutcome) -> GuaranteeReport {
        match self {
            Instance::Block(b) => {
                let ok = outcome
                    .x
                    .chunks(b.t)
                    .all(|chunk| chunk.iter().all(|&v| v == chunk[0]));
                GuaranteeReport {
                    pass: ok,
                    detail: if ok {
                        "all blocks integral and equal".into()
                    } else {
                        "a block split".into()
                    },
                }
            }
            Instance::SparseLp(i) => {
                let r = verify_row_errors(i, outcome);
                GuaranteeReport {
                    pass: r.pass,
                    detail: format!(
                        "max row error {:.6} vs reference {:.6}",
                        r.max_error, r.reference
                    ),
                }
            }
            Instance::Makespan(i) => match verify_loads(i, outcome) {
                Ok(r) => GuaranteeReport {
                    pass: r.pass,
                    detail: format!(
                        "max load increase {:.6} vs allowance {:.6}",
                        r.max_increase, r.allowance
                    ),
                },
                Err(e) => GuaranteeReport { pass: false, detail: e.to_string() },
            },
            Instance::Tree(i) => match verify_tree(i, outcome) {
                Ok(r) => GuaranteeReport {
                    pass: r.pass,
                    detail: format!(
                        "max degree violation {} vs bound {:.3}",
                        r.max_violation, r.violation_bound
                    ),
                },
                Err(e) => GuaranteeReport { pass: false, detail: e.to_string() },
            },
            Instance::Matching(i) => {
                let r = verify_matching(i, outcome);
                GuaranteeReport {
                    pass: r.pass,
                    detail: format!("matching with {} matched vertices", r.matched),
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Instance::Block(b) => json!({
                "schema": SCHEMA, "kind": "block",
                "n": b.n, "t": b.t, "x": b.x_value,
            }),
            Instance::SparseLp(i) => json!({
                "schema": SCHEMA, "kind": "sparse_lp",
                "m": i.m, "n": i.n,
                "rows": i.rows.iter()
                    .map(|r| r.iter().map(|&(j, v)| json!([j, v])).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
                "x0": i.x0, "delta": i.delta,
                "norm_mode": match i.norm_mode { NormMode::L1 => "l1", NormMode::L2 => "l2" },
            }),
            Instance::Makespan(i) => json!({
                "schema": SCHEMA, "kind": "makespan",
                "m": i.machines, "r": i.jobs, "q": i.resources,
                "p": i.p, "T": i.target,
                "x0": i.x0.iter().map(|&(a, b, v)| json!([a, b, v])).collect::<Vec<_>>(),
                "delta": i.delta,
            }),
            Instance::Tree(i) => json!({
                "schema": SCHEMA, "kind": "tree",
                "vertices": i.vertices,
                "edges": i.edges.iter().map(|&(u, v, c)| json!([u, v, c])).collect::<Vec<_>>(),
                "degree_sets": i.degree_sets.iter()
                    .map(|s| json!({"edges": s.edges, "b": s.bound}))
                    .collect::<Vec<_>>(),
                "x0": i.x0, "delta": i.delta,
            }),
            Instance::Matching(i) => json!({
                "schema": SCHEMA, "kind": "matching",
                "n_left": i.n_left, "n_right": i.n_right,
                "edges": i.edges.iter().map(|&(u, v, x)| json!([u, v, x])).collect::<Vec<_>>(),
                "delta": i.delta,
            }),
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| "missing \"kind\"".to_string())?;
        let getf = |k: &str| -> Result<f64, String> {
            v.get(k).and_then(Value::as_f64).ok_or_else(|| format!("missing number \"{k}\""))
        };
        let getu = |k: &str| -> Result<usize, String> {
            v.get(k)
                .and_then(Value::as_u64)
                .map(|x| x as usize)
                .ok_or_else(|| format!("missing integer \"{k}\""))
        };
        let get_vec_f64 = |k: &str| -> Result<Vec<f64>, String> {
            v.get(k)
                .and_then(Value::as_array)
                .ok_or_else(|| format!("missing array \"{k}\""))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| format!("non-number in \"{k}\"")))
                .collect()
        };
        match kind {
            "block" => {
                let x = v.get("x").and_then(Value::as_f64).unwrap_or(0.5);
                BlockInstance::new(getu("n")?, getu("t")?, x)
                    .map(Instance::Block)
                    .map_err(|e| e.to_string())
            }
            "sparse_lp" => {
                let rows_v = v
                    .get("rows")
                    .and_then(Value::as_array)
                    .ok_or_else(|| "missing \"rows\"".to_string())?;
                let mut rows = Vec::with_capacity(rows_v.len());
                for r in rows_v {
                    let entries = r.as_array().ok_or("row must be an array")?;
                    // Dense form: array of numbers; sparse form: [j, value]
                    // pairs.
                    let mut row = Vec::new();
                    for e in entries {
                        if let Some(pair) = e.as_array() {
                            let j = pair
                                .first()
                                .and_then(Value::as_u64)
                                .ok_or("bad sparse entry")? as usize;
                            let val =
                                pair.get(1).and_then(Value::as_f64).ok_or("bad sparse entry")?;
                            row.push((j, val));
                        } else {
                            let val = e.as_f64().ok_or("bad dense entry")?;
                            let j = row.len();
                            if val != 0.0 {
                                row.push((j, val));
                            } else {
                                row.push((j, 0.0));
                            }
                        }
                    }
                    rows.push(row);
                }
                let norm_mode = match v.get("norm_mode").and_then(Value::as_str) {
                    Some("l2") => NormMode::L2,
                    _ => NormMode::L1,
                };
                SparseLPInstance::new(getu("m")?, getu("n")?, rows, get_vec_f64("x0")?, getf("delta")?, norm_mode)
                    .map(Instance::SparseLp)
                    .map_err(|e| e.to_string())
            }
            "makespan" => {
                let p: Vec<Vec<Vec<f64>>> = serde_json::from_value(
                    v.get("p").cloned().ok_or_else(|| "missing \"p\"".to_string())?,
                )
                .map_err(|e| e.to_string())?;
                let q = getu("q").unwrap_or(1);
                let target: Vec<f64> = match v.get("T") {
                    Some(Value::Array(_)) => {
                        serde_json::from_value(v["T"].clone()).map_err(|e| e.to_string())?
                    }
                    Some(t) => vec![t.as_f64().ok_or("bad \"T\"")?; q],
                    None => return Err("missing \"T\"".into()),
                };
                let x0_v = v
                    .get("x0")
                    .and_then(Value::as_array)
                    .ok_or_else(|| "missing \"x0\"".to_string())?;
                let mut x0 = Vec::new();
                for t in x0_v {
                    let a = t.as_array().ok_or("x0 triplets must be arrays")?;
                    x0.push((
                        a[0].as_u64().ok_or("bad triplet")? as usize,
                        a[1].as_u64().ok_or("bad triplet")? as usize,
                        a[2].as_f64().ok_or("bad triplet")?,
                    ));
                }
                MakespanInstance::new(getu("m")?, getu("r")?, q, p, target, x0, getf("delta")?)
                    .map(Instance::Makespan)
                    .map_err(|e| e.to_string())
            }
            "tree" => {
                let edges_v = v
                    .get("edges")
                    .and_then(Value::as_array)
                    .ok_or_else(|| "missing \"edges\"".to_string())?;
                let mut edges = Vec::new();
                for e in edges_v {
                    let a = e.as_array().ok_or("edges must be arrays")?;
                    edges.push((
                        a[0].as_u64().ok_or("bad edge")? as usize,
                        a[1].as_u64().ok_or("bad edge")? as usize,
                        a.get(2).and_then(Value::as_f64).unwrap_or(0.0),
                    ));
                }
                let mut degree_sets = Vec::new();
                if let Some(sets) = v.get("degree_sets").and_then(Value::as_array) {
                    for s in sets {
                        let edge_ids: Vec<usize> = serde_json::from_value(
                            s.get("edges").cloned().ok_or("degree set needs edges")?,
                        )
                        .map_err(|e| e.to_string())?;
                        let bound =
                            s.get("b").and_then(Value::as_i64).ok_or("degree set needs b")?;
                        degree_sets.push(DegreeSet { edges: edge_ids, bound });
                    }
                }
                DegreeTreeInstance::new(
                    getu("vertices")?,
                    edges,
                    degree_sets,
                    get_vec_f64("x0")?,
                    getf("delta")?,
                )
                .map(Instance::Tree)
                .map_err(|e| e.to_string())
            }
            "matching" => {
                let edges_v = v
                    .get("edges")
                    .and_then(Value::as_array)
                    .ok_or_else(|| "missing \"edges\"".to_string())?;
                let mut edges = Vec::new();
                for e in edges_v {
                    let a = e.as_array().ok_or("edges must be arrays")?;
                    edges.push((
                        a[0].as_u64().ok_or("bad edge")? as usize,
                        a[1].as_u64().ok_or("bad edge")? as usize,
                        a[2].as_f64().ok_or("bad edge")?,
                    ));
                }
                BipartiteMatchingInstance::new(
                    getu("n_left")?,
                    getu("n_right")?,
                    edges,
                    getf("delta")?,
                )
                .map(Instance::Matching)
                .map_err(|e| e.to_string())
            }
            other => Err(format!("unknown instance kind {other:?}")),
        }
    }
}

/// Outcome JSON, stable across runs for replay.
pub fn outcome_to_json(outcome: &RoundingOutcome) -> Value {
    json!({
        "schema": SCHEMA,
        "kind": "outcome",
        "x": outcome.x,
        "seed": outcome.seed,
        "sdp_solves": outcome.sdp_solves,
        "wall_steps": outcome.wall_steps,
    })
}

/// Parse the `x` vector of an outcome JSON into a synthetic outcome.
pub fn outcome_from_json(v: &Value) -> Result<RoundingOutcome, String> {
    let x: Vec<u8> =
        serde_json::from_value(v.get("x").cloned().ok_or("missing \"x\"")?).map_err(|e| e.to_string())?;
    if x.iter().any(|&b| b > 1) {
        return Err("outcome entries must be 0/1".into());
    }
    Ok(RoundingOutcome {
        x,
        trace: Vec::new(),
        seed: v.get("seed").and_then(Value::as_u64).unwrap_or(0),
        sdp_solves: v.get("sdp_solves").and_then(Value::as_u64).unwrap_or(0) as usize,
        wall_steps: v.get("wall_steps").and_then(Value::as_u64).unwrap_or(0) as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::generators::*;

    #[test]
    fn json_round_trips_every_kind() {
        let instances = vec![
            Instance::Block(gen_block_instance(8, 2).unwrap()),
            Instance::SparseLp(gen_sparse_lp(8, 8, 3, 0.5, 1)),
            Instance::Makespan(gen_makespan(3, 6, 1, 0.25, 2)),
            Instance::Tree(gen_tree_cycle(5, 0.25)),
            Instance::Matching(gen_matching_cycle(3, 0.2)),
        ];
        for inst in instances {
            let j = inst.to_json();
            assert_eq!(j["schema"], SCHEMA);
            let back = Instance::from_json(&j).unwrap();
            assert_eq!(back.kind(), inst.kind());
            assert_eq!(back.x0(), inst.x0());
            back.validate().unwrap();
        }
    }

    #[test]
    fn run_and_verify_each_kind() {
        let instances = vec![
            Instance::Block(gen_block_instance(8, 2).unwrap()),
            Instance::SparseLp(gen_sparse_lp(8, 8, 3, 0.5, 1)),
            Instance::Makespan(gen_makespan(3, 6, 1, 0.25, 2)),
            Instance::Tree(gen_tree_cycle(5, 0.25)),
            Instance::Matching(gen_matching_cycle(3, 0.2)),
        ];
        for inst in instances {
            let out = inst.run_one(&RoundingParams::seeded(11)).unwrap();
            let rep = inst.verify(&out);
            assert!(rep.pass, "{}: {}", inst.kind(), rep.detail);
        }
    }

    #[test]
    fn outcome_json_round_trip() {
        let inst = Instance::Block(gen_block_instance(4, 2).unwrap());
        let out = inst.run_one(&RoundingParams::seeded(3)).unwrap();
        let j = outcome_to_json(&out);
        let back = outcome_from_json(&j).unwrap();
        assert_eq!(back.x, out.x);
        assert_eq!(back.seed, out.seed);
    }
}
