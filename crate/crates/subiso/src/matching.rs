//! Bipartite perfect-matching rounding with controlled vertex-unmatching.
//!
//! Vertex rows (one per vertex of alive-degree >= 2) would normally leave no
//! slack at all, so the oracle creates it by dropping a sparse, random set of
//! edges whenever the alive support contains a long cycle or a long run of
//! degree-2 vertices. After dropping, every component is either a short
//! cycle (whose tight rows already have `1/L` slack) or a graph with short
//! degree-2 runs, where `|E| >= (1 + 1/(4t)) (d2 + d>=3)` bounds the row
//! count away from `n_k`.

use std::sync::Mutex;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::state::FractionalState;
use crate::walk::{RoundingOutcome, SubspaceOracle, SubspaceSpec, WalkError};

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

/// A fractional perfect matching on a bipartite graph.
#[derive(Debug, Clone)]
pub struct BipartiteMatchingInstance {
    pub n_left: usize,
    pub n_right: usize,
    /// `(left, right, x0)` per edge.
    pub edges: Vec<(usize, usize, f64)>,
    /// Target unmatching probability bound.
    pub delta: f64,
}

impl BipartiteMatchingInstance {
    pub fn new(
        n_left: usize,
        n_right: usize,
        edges: Vec<(usize, usize, f64)>,
        delta: f64,
    ) -> Result<Self, MatchingError> {
        let inst = Self { n_left, n_right, edges, delta };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), MatchingError> {
        if self.n_left != self.n_right {
            return Err(MatchingError::Invalid("sides must have equal size".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(MatchingError::Invalid("delta must be in (0,1)".into()));
        }
        let mut left_sum = vec![0.0; self.n_left];
        let mut right_sum = vec![0.0; self.n_right];
        for &(u, v, x) in &self.edges {
            if u >= self.n_left || v >= self.n_right {
                return Err(MatchingError::Invalid("edge endpoint out of range".into()));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(MatchingError::Invalid("x0 outside [0,1]".into()));
            }
            left_sum[u] += x;
            right_sum[v] += x;
        }
        for (v, s) in left_sum.iter().chain(right_sum.iter()).enumerate() {
            if (s - 1.0).abs() > 1e-9 {
                return Err(MatchingError::Invalid(format!(
                    "vertex {v} fractional degree {s} != 1"
                )));
            }
        }
        Ok(())
    }

    pub fn x0_vector(&self) -> Vec<f64> {
        self.edges.iter().map(|&(_, _, x)| x).collect()
    }

    /// Vertex ids in the union graph: left as-is, right offset by `n_left`.
    pub fn endpoints(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(u, v, _)| (u, self.n_left + v)).collect()
    }

    /// Path/cycle granularity parameter `t = ceil(4 / delta)`, so the total
    /// per-edge drop probability stays at most `2/(4t) <= delta / 8`.
    pub fn t_param(&self) -> usize {
        (4.0 / self.delta).ceil() as usize
    }

    pub fn matching_oracle(&self, seed: u64) -> MatchingOracle {
        MatchingOracle::new(self, self.t_param(), seed)
    }
}

/// A maximal run of degree-2 vertices, as an ordered edge list.
#[derive(Debug, Clone, Serialize)]
pub struct Deg2Path {
    /// Edge positions (into the analyzed edge list) in path order.
    pub edges: Vec<usize>,
    /// Number of interior degree-2 vertices.
    pub deg2_count: usize,
}

/// Per-component support classification.
#[derive(Debug, Clone, Serialize)]
pub struct Component {
    pub vertices: Vec<usize>,
    /// Edge positions in this component; for cycles, in cyclic order.
    pub edges: Vec<usize>,
    pub is_cycle: bool,
    pub deg2_paths: Vec<Deg2Path>,
    /// (degree-1, degree-2, degree->=3) vertex counts.
    pub degree_histogram: (usize, usize, usize),
}

/// Exact decomposition of a support graph into components, cycles and
/// maximal degree-2 paths.
#[derive(Debug, Clone, Serialize)]
pub struct SupportTopology {
    pub components: Vec<Component>,
}

/// Analyze an undirected support graph given as `(u, v)` pairs over
/// `n_vertices`. Cycle components are reported as cycles (with no paths);
/// every edge of a non-cycle component lands in exactly one maximal
/// degree-2 path.
pub fn analyze_support(n_vertices: usize, edges: &[(usize, usize)]) -> SupportTopology {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
    for (e, &(u, v)) in edges.iter().enumerate() {
        adj[u].push((v, e));
        adj[v].push((u, e));
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut comp_of = vec![usize::MAX; n_vertices];
    let mut components = Vec::new();
    for start in 0..n_vertices {
        if deg[start] == 0 || comp_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut stack = vec![start];
        comp_of[start] = id;
        let mut vertices = Vec::new();
        let mut comp_edges = Vec::new();
        while let Some(u) = stack.pop() {
            vertices.push(u);
            for &(v, e) in &adj[u] {
                if comp_of[v] == usize::MAX {
                    comp_of[v] = id;
                    stack.push(v);
                }
                if u < v || (u == v) {
                    comp_edges.push(e);
                }
            }
        }
        let is_cycle = vertices.iter().all(|&v| deg[v] == 2);
        let mut histogram = (0usize, 0usize, 0usize);
        for &v in &vertices {
            match deg[v] {
                1 => histogram.0 += 1,
                2 => histogram.1 += 1,
                _ => histogram.2 += 1,
            }
        }
        components.push(Component {
            vertices,
            edges: comp_edges,
            is_cycle,
            deg2_paths: Vec::new(),
            degree_histogram: histogram,
        });
    }

    // Order cycle edges cyclically, and decompose non-cycle components into
    // maximal degree-2 paths by walking unexplored edges from every vertex
    // of degree other than two.
    let mut explored = vec![false; edges.len()];
    for comp in &mut components {
        if comp.is_cycle {
            let start = comp.vertices[0];
            let mut ordered = Vec::with_capacity(comp.edges.len());
            let mut prev = usize::MAX;
            let mut cur = start;
            loop {
                let &(next, e) = adj[cur]
                    .iter()
                    .find(|&&(w, e)| !explored[e] && (w != prev || adj[cur].len() == 1))
                    .or_else(|| adj[cur].iter().find(|&&(_, e)| !explored[e]))
                    .expect("cycle traversal");
                explored[e] = true;
                ordered.push(e);
                prev = cur;
                cur = next;
                if cur == start && ordered.len() == comp.edges.len() {
                    break;
                }
            }
            comp.edges = ordered;
            continue;
        }
        let anchors: Vec<usize> =
            comp.vertices.iter().copied().filter(|&v| deg[v] != 2).collect();
        for &u0 in &anchors {
            loop {
                // Next unexplored edge out of the anchor.
                let Some(&(mut cur, e0)) = adj[u0].iter().find(|&&(_, e)| !explored[e]) else {
                    break;
                };
                explored[e0] = true;
                let mut path_edges = vec![e0];
                let mut deg2_count = 0;
                let mut prev = u0;
                while deg[cur] == 2 {
                    deg2_count += 1;
                    let &(next, e) = adj[cur]
                        .iter()
                        .find(|&&(_, e)| !explored[e])
                        .expect("degree-2 vertex must continue the path");
                    explored[e] = true;
                    path_edges.push(e);
                    prev = cur;
                    cur = next;
                }
                let _ = prev;
                comp.deg2_paths.push(Deg2Path { edges: path_edges, deg2_count });
            }
        }
    }
    SupportTopology { components }
}

/// Edge-drop plan creating slack: for every cycle longer than `4t` edges,
/// drop a random edge and every consecutive `4t`-th after it; for every
/// degree-2 run of more than `4t` interior vertices, drop the edge at a
/// random offset in `[1, 4t]` and every `4t`-th after it. Per application an
/// edge is dropped with probability at most `1/(4t)` (`1/(2t)` on cycles),
/// and afterwards every remaining degree-2 run has fewer than `4t` interior
/// vertices.
pub fn drop_plan<R: Rng + ?Sized>(
    topology: &SupportTopology,
    t_param: usize,
    rng: &mut R,
) -> Vec<usize> {
    let stride = 4 * t_param;
    let mut drops = Vec::new();
    for comp in &topology.components {
        if comp.is_cycle {
            let len = comp.edges.len();
            if len > stride {
                let start = rng.gen_range(0..len);
                let mut pos = 0;
                while pos < len {
                    drops.push(comp.edges[(start + pos) % len]);
                    pos += stride;
                }
            }
            continue;
        }
        for path in &comp.deg2_paths {
            if path.deg2_count > stride {
                let offset = rng.gen_range(1..=stride);
                let mut pos = offset;
                while pos <= path.edges.len() {
                    drops.push(path.edges[pos - 1]);
                    pos += stride;
                }
            }
        }
    }
    drops
}

/// Evaluate the path lemma `|E| >= (1 + 1/(4t)) (d2 + d>=3)` on a connected
/// non-cycle component with no degree-2 run of `t_param` vertices.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn lemma_path_bound(
    component: &Component,
    t_param: usize,
) -> Result<LemmaReport, MatchingError> {
    if component.is_cycle {
        return Err(MatchingError::PreconditionViolated("component is a cycle".into()));
    }
    if component.deg2_paths.iter().any(|p| p.deg2_count >= t_param) {
        return Err(MatchingError::PreconditionViolated(format!(
            "degree-2 run of {} vertices >= t = {t_param}",
            component.deg2_paths.iter().map(|p| p.deg2_count).max().unwrap_or(0)
        )));
    }
    let (_, d2, d3) = component.degree_histogram;
    let lhs = component.edges.len() as f64;
    let rhs = (1.0 + 1.0 / (4.0 * t_param as f64)) * (d2 + d3) as f64;
    Ok(LemmaReport { lhs, rhs, pass: lhs >= rhs - 1e-12 })
}

/// Oracle conserving vertex rows, with random edge drops creating slack.
pub struct MatchingOracle {
    endpoints: Vec<(usize, usize)>,
    n_vertices: usize,
    t_param: usize,
    rng: Mutex<ChaCha8Rng>,
}

impl MatchingOracle {
    pub fn new(instance: &BipartiteMatchingInstance, t_param: usize, seed: u64) -> Self {
        Self {
            endpoints: instance.endpoints(),
            n_vertices: instance.n_left + instance.n_right,
            t_param: t_param.max(1),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    fn alive_topology(&self, state: &FractionalState) -> (SupportTopology, Vec<usize>) {
        let alive: Vec<usize> = state.alive().to_vec();
        let edges: Vec<(usize, usize)> = alive.iter().map(|&e| self.endpoints[e]).collect();
        (analyze_support(self.n_vertices, &edges), alive)
    }
}

impl SubspaceOracle for MatchingOracle {
    /// After drops every degree-2 run has at most `4t - 1` interior
    /// vertices, so the path lemma at parameter `4t` bounds the row count by
    /// `|E| / (1 + 1/(16t))`; kept cycles of length `L <= 4t` have slack
    /// `1/L >= 1/(4t)`. Both are at least `1/(16t + 1)`.
    fn slack(&self) -> f64 {
        1.0 / (16.0 * self.t_param as f64 + 1.0)
    }

    fn subspace(&self, state: &FractionalState) -> Result<SubspaceSpec, WalkError> {
        let (topology, alive) = self.alive_topology(state);

        let drops = {
            let mut rng = self.rng.lock().expect("oracle rng poisoned");
            drop_plan(&topology, self.t_param, &mut *rng)
        };
        if !drops.is_empty() {
            // Positions index the alive list; translate to global edge ids.
            let forced_zero = drops.into_iter().map(|pos| alive[pos]).collect();
            return Ok(SubspaceSpec { rows: Vec::new(), forced_zero, labels: Vec::new() });
        }

        // Vertex rows for alive-degree >= 2.
        let n_k = alive.len();
        let mut degree = vec![0usize; self.n_vertices];
        for &e in &alive {
            let (u, v) = self.endpoints[e];
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for vert in 0..self.n_vertices {
            if degree[vert] >= 2 {
                let mut row = vec![0.0; n_k];
                for (k, &e) in alive.iter().enumerate() {
                    let (u, v) = self.endpoints[e];
                    if u == vert || v == vert {
                        row[k] = 1.0;
                    }
                }
                rows.push(row);
                labels.push(format!("vertex {vert}"));
            }
        }
        Ok(SubspaceSpec { rows, forced_zero: Vec::new(), labels })
    }
}

/// Per-run matching report.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingReport {
    /// True iff every vertex is covered at most once.
    pub is_matching: bool,
    pub matched: usize,
    pub vertex_matched: Vec<bool>,
    pub pass: bool,
}

/// Check that the outcome is a matching and report coverage.
pub fn verify_matching(
    instance: &BipartiteMatchingInstance,
    outcome: &RoundingOutcome,
) -> MatchingReport {
    let n = instance.n_left + instance.n_right;
    let mut cover = vec![0usize; n];
    for (e, &(u, v)) in instance.endpoints().iter().enumerate() {
        if outcome.x[e] == 1 {
            cover[u] += 1;
            cover[v] += 1;
        }
    }
    let is_matching = cover.iter().all(|&c| c <= 1);
    let vertex_matched: Vec<bool> = cover.iter().map(|&c| c == 1).collect();
    let matched = vertex_matched.iter().filter(|&&m| m).count();
    MatchingReport { is_matching, matched, vertex_matched, pass: is_matching }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_run_seed;
    use crate::walk::{subiso_round, RoundingParams};

    fn cycle_instance(n_per_side: usize) -> BipartiteMatchingInstance {
        // 2n-cycle alternating sides: L_i - R_i - L_{i+1} - ...
        let mut edges = Vec::new();
        for i in 0..n_per_side {
            edges.push((i, i, 0.5));
            edges.push(((i + 1) % n_per_side, i, 0.5));
        }
        BipartiteMatchingInstance::new(n_per_side, n_per_side, edges, 0.2).unwrap()
    }

    #[test]
    fn analyze_single_cycle() {
        let inst = cycle_instance(3);
        let topo = analyze_support(6, &inst.endpoints());
        assert_eq!(topo.components.len(), 1);
        assert!(topo.components[0].is_cycle);
        assert!(topo.components[0].deg2_paths.is_empty());
        assert_eq!(topo.components[0].edges.len(), 6);
    }

    #[test]
    fn analyze_path_graph() {
        // Path of 5 edges: one degree-2 run with 4 interior vertices.
        let edges: Vec<(usize, usize)> = (0..5).map(|i| (i, i + 1)).collect();
        let topo = analyze_support(6, &edges);
        assert_eq!(topo.components.len(), 1);
        let comp = &topo.components[0];
        assert!(!comp.is_cycle);
        assert_eq!(comp.deg2_paths.len(), 1);
        assert_eq!(comp.deg2_paths[0].deg2_count, 4);
        assert_eq!(comp.deg2_paths[0].edges.len(), 5);
    }

    #[test]
    fn analyze_two_triangles_sharing_a_vertex() {
        let edges = vec![(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)];
        let topo = analyze_support(5, &edges);
        assert_eq!(topo.components.len(), 1);
        let comp = &topo.components[0];
        assert!(!comp.is_cycle);
        let (_, d2, d3) = comp.degree_histogram;
        assert_eq!(d3, 1, "the shared vertex has degree 4");
        assert_eq!(d2, 4);
        assert_eq!(comp.deg2_paths.len(), 2, "two loops from the anchor");
        for p in &comp.deg2_paths {
            assert_eq!(p.deg2_count, 2);
            assert_eq!(p.edges.len(), 3);
        }
    }

    #[test]
    fn drop_plan_short_cycle_empty() {
        let inst = cycle_instance(3);
        let topo = analyze_support(6, &inst.endpoints());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 4t = 8 >= 6 edges: nothing to drop.
        assert!(drop_plan(&topo, 2, &mut rng).is_empty());
    }

    #[test]
    fn drop_plan_long_path_two_drops_every_offset() {
        // A degree-2 run of 8t edges (8t - 1 interior... use 8t edges and
        // 8t+1 vertices: interior = 8t - 1 > 4t): exactly 2 drops for every
        // offset in [1, 4t].
        let t = 2;
        let len = 8 * t; // edges
        let edges: Vec<(usize, usize)> = (0..len).map(|i| (i, i + 1)).collect();
        let topo = analyze_support(len + 1, &edges);
        let comp = &topo.components[0];
        assert_eq!(comp.deg2_paths.len(), 1);
        assert_eq!(comp.deg2_paths[0].deg2_count, len - 1);
        assert!(comp.deg2_paths[0].deg2_count > 4 * t);
        // Exhaust all offsets deterministically by scanning seeds until all
        // offsets appear; each plan must drop exactly 2 edges.
        let mut seen = std::collections::HashSet::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let drops = drop_plan(&topo, t, &mut rng);
            assert_eq!(drops.len(), 2, "path of 8t edges drops exactly 2");
            seen.insert(drops[0]);
        }
        assert_eq!(seen.len(), 4 * t, "all offsets occur");
    }

    #[test]
    fn drop_plan_monte_carlo_frequency() {
        // 100-edge path, t = 25 (4t = 100 >= run of 98: no drop!); use a
        // longer run: 200 edges, t = 25: per-edge drop frequency <= 1/100 +
        // 3 sigma.
        let t = 25;
        let len = 200;
        let edges: Vec<(usize, usize)> = (0..len).map(|i| (i, i + 1)).collect();
        let topo = analyze_support(len + 1, &edges);
        let n_trials = 20_000;
        let mut counts = vec![0usize; len];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..n_trials {
            for d in drop_plan(&topo, t, &mut rng) {
                counts[d] += 1;
            }
        }
        let p = 1.0 / (4.0 * t as f64);
        let sigma = (p * (1.0 - p) / n_trials as f64).sqrt();
        for (e, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n_trials as f64;
            assert!(freq <= p + 3.0 * sigma, "edge {e}: freq {freq} > {p}");
        }
    }

    #[test]
    fn lemma_star_and_theta() {
        // Star K_{1,3}: d2 = 0, d>=3 = 1, |E| = 3 >= (1 + 1/(4t)).
        let topo = analyze_support(4, &[(0, 1), (0, 2), (0, 3)]);
        let rep = lemma_path_bound(&topo.components[0], 2).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.lhs, 3.0);

        // Theta graph: two degree-3 vertices joined by three 2-edge paths:
        // |E| = 6, d2 = 3, d>=3 = 2, t = 2 -> 6 >= 1.125 * 5.
        let topo = analyze_support(5, &[(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)]);
        let rep = lemma_path_bound(&topo.components[0], 2).unwrap();
        assert!(rep.pass);
        assert!((rep.rhs - 1.125 * 5.0).abs() < 1e-12);

        // Precondition: a long degree-2 run must be rejected.
        let edges: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
        let topo = analyze_support(7, &edges);
        assert!(matches!(
            lemma_path_bound(&topo.components[0], 2),
            Err(MatchingError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn four_cycle_rounds_to_either_perfect_matching() {
        let inst = cycle_instance(2);
        let x0 = inst.x0_vector();
        let n_runs = 10_000;
        let mut odd = 0usize;
        for run in 0..n_runs {
            let seed = derive_run_seed(40, run);
            let oracle = inst.matching_oracle(seed ^ 0x5eed);
            let out = subiso_round(&x0, &oracle, &RoundingParams::seeded(seed)).unwrap();
            let report = verify_matching(&inst, &out);
            assert!(report.is_matching);
            assert_eq!(report.matched, 4, "perfect matching on a short cycle");
            // The two perfect matchings are edges {0,2} or {1,3}.
            if out.x[0] == 1 {
                assert_eq!(out.x[2], 1);
                odd += 1;
            } else {
                assert_eq!(out.x[1], 1);
                assert_eq!(out.x[3], 1);
            }
        }
        let freq = odd as f64 / n_runs as f64;
        assert!((freq - 0.5).abs() <= 0.02, "freq = {freq}");
    }

    #[test]
    fn long_cycle_with_drops_still_a_matching() {
        // Cycle of 64 edges with t = 4 (4t = 16 < 64): drops occur, every
        // outcome is a matching, and per-vertex unmatching stays below
        // 2/16 + 3 sigma.
        let inst = cycle_instance(32);
        let x0 = inst.x0_vector();
        let t = 4;
        let n_runs = 3000;
        let mut unmatched = vec![0usize; 64];
        let mut dropped = vec![0usize; 64];
        for run in 0..n_runs {
            let seed = derive_run_seed(41, run);
            let oracle = MatchingOracle::new(&inst, t, seed ^ 0xd0);
            let out = subiso_round(&x0, &oracle, &RoundingParams::seeded(seed)).unwrap();
            let report = verify_matching(&inst, &out);
            assert!(report.is_matching);
            for (v, &m) in report.vertex_matched.iter().enumerate() {
                if !m {
                    unmatched[v] += 1;
                }
            }
            for rec in &out.trace {
                for &e in &rec.forced_zeros {
                    dropped[e] += 1;
                }
            }
        }
        let p_drop = 1.0 / (2.0 * t as f64); // cycle rule allowance
        for (e, &c) in dropped.iter().enumerate() {
            let freq = c as f64 / n_runs as f64;
            let sigma = (p_drop * (1.0 - p_drop) / n_runs as f64).sqrt();
            assert!(freq <= p_drop + 3.0 * sigma, "edge {e} dropped at {freq}");
        }
        let p_un = 2.0 / 16.0;
        let sigma = (p_un * (1.0 - p_un) / n_runs as f64).sqrt();
        for (v, &c) in unmatched.iter().enumerate() {
            let freq = c as f64 / n_runs as f64;
            assert!(freq <= p_un + 3.0 * sigma, "vertex {v} unmatched at {freq}");
        }
    }
}
