//! Degree-bounded minimum-cost spanning tree rounding (the graphic-matroid
//! case of degree-bounded matroid basis).
//!
//! The oracle conserves (i) a chain of tight rank sets of the contracted
//! support graph, whose span contains every tight rank constraint, and
//! (ii) degree rows whose excess is at least `q / (1 - 2 delta)`. Because
//! all alive values are strictly fractional, consecutive chain sets differ
//! by at least two edges, giving the chain at most `n_k / 2` rows; the
//! degree counting gives at most `(1 - 2 delta)(n_k - c_k)` protected rows,
//! so the total stays within `(1 - delta) n_k`. The full alive edge set is
//! always tight (the base constraint) and is the chain's top element.
//!
//! Steps are additionally capped at the non-tight rank faces of the
//! spanning-tree polytope, so a maximal step lands exactly on a face, which
//! the next chain computation picks up as a new tight set. Desk-scale graphs
//! (|V| <= ~20) are assumed: tight sets are found by enumerating connected
//! vertex subsets of the contracted support per component.

use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::state::FractionalState;
use crate::walk::{RoundingOutcome, SubspaceOracle, SubspaceSpec, WalkError};

/// Tightness / polytope tolerance.
const TIGHT_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum DegmatError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("point left the spanning-tree polytope: x(E[S]) exceeds rank by {violation:.3e}")]
    NotInPolytope { violation: f64 },
    #[error("outcome is not a spanning tree: {0}")]
    NotATree(String),
}

/// One degree constraint: `|X ∩ edges| <= bound`.
#[derive(Debug, Clone, Serialize)]
pub struct DegreeSet {
    pub edges: Vec<usize>,
    pub bound: i64,
}

/// A graph with edge costs, degree constraints and a fractional spanning
/// tree to round.
#[derive(Debug, Clone)]
pub struct DegreeTreeInstance {
    pub vertices: usize,
    /// `(u, v, cost)` per edge.
    pub edges: Vec<(usize, usize, f64)>,
    pub degree_sets: Vec<DegreeSet>,
    pub x0: Vec<f64>,
    pub delta: f64,
}

impl DegreeTreeInstance {
    pub fn new(
        vertices: usize,
        edges: Vec<(usize, usize, f64)>,
        degree_sets: Vec<DegreeSet>,
        x0: Vec<f64>,
        delta: f64,
    ) -> Result<Self, DegmatError> {
        let inst = Self { vertices, edges, degree_sets, x0, delta };
        inst.validate()?;
        Ok(inst)
    }

    /// Degree-set instance for vertex bounds `b_v`: one set per vertex with
    /// its incident edges (`q = 2`).
    pub fn with_vertex_bounds(
        vertices: usize,
        edges: Vec<(usize, usize, f64)>,
        bound: i64,
        x0: Vec<f64>,
        delta: f64,
    ) -> Result<Self, DegmatError> {
        let mut sets = vec![
            DegreeSet { edges: Vec::new(), bound };
            vertices
        ];
        for (e, &(u, v, _)) in edges.iter().enumerate() {
            sets[u].edges.push(e);
            sets[v].edges.push(e);
        }
        Self::new(vertices, edges, sets, x0, delta)
    }

    pub fn validate(&self) -> Result<(), DegmatError> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(DegmatError::Invalid("delta must be in (0, 1/2)".into()));
        }
        if self.x0.len() != self.edges.len() {
            return Err(DegmatError::Invalid("x0 length mismatch".into()));
        }
        if self.x0.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(DegmatError::Invalid("x0 outside [0,1]".into()));
        }
        for &(u, v, c) in &self.edges {
            if u >= self.vertices || v >= self.vertices || u == v || !(c >= 0.0) {
                return Err(DegmatError::Invalid("bad edge".into()));
            }
        }
        for s in &self.degree_sets {
            if s.edges.iter().any(|&e| e >= self.edges.len()) {
                return Err(DegmatError::Invalid("degree set references bad edge".into()));
            }
        }
        let total: f64 = self.x0.iter().sum();
        if (total - (self.vertices as f64 - 1.0)).abs() > 1e-7 {
            return Err(DegmatError::Invalid(format!(
                "sum of x0 is {total}, expected |V| - 1"
            )));
        }
        // Rank constraints: exhaustive on small graphs, sampled otherwise.
        if self.vertices <= 16 {
            let adj = neighbor_masks(self.vertices, &self.edges);
            for s in 1u64..(1 << self.vertices) {
                if s.count_ones() < 2 || !mask_connected(s, &adj) {
                    continue;
                }
                let xs: f64 = self
                    .edges
                    .iter()
                    .zip(&self.x0)
                    .filter(|(&(u, v, _), _)| s & (1 << u) != 0 && s & (1 << v) != 0)
                    .map(|(_, &x)| x)
                    .sum();
                let rank = s.count_ones() as f64 - 1.0;
                if xs > rank + TIGHT_TOL {
                    return Err(DegmatError::NotInPolytope { violation: xs - rank });
                }
            }
        }
        Ok(())
    }

    /// `q`: the maximum number of degree sets covering any edge.
    pub fn q(&self) -> usize {
        let mut cover = vec![0usize; self.edges.len()];
        for s in &self.degree_sets {
            for &e in &s.edges {
                cover[e] += 1;
            }
        }
        cover.into_iter().max().unwrap_or(0)
    }

    /// Degree-row protection threshold `q / (1 - 2 delta)`.
    pub fn excess_threshold(&self) -> f64 {
        self.q() as f64 / (1.0 - 2.0 * self.delta)
    }

    pub fn degmat_oracle(&self) -> DegmatOracle {
        DegmatOracle {
            instance: self.clone(),
            threshold: self.excess_threshold(),
            snapshot: Mutex::new(None),
        }
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.edges.iter().zip(x).map(|(&(_, _, c), &v)| c * v).sum()
    }
}

/// Excess of degree set `j` over the alive edges:
/// `e_j = sum_{alive e in S_j} (1 - x_e)`.
pub fn degree_excess(state: &FractionalState, instance: &DegreeTreeInstance, j: usize) -> f64 {
    instance.degree_sets[j]
        .edges
        .iter()
        .filter(|&&e| state.is_alive(e))
        .map(|&e| 1.0 - state.x()[e])
        .sum()
}

/// A nested family `C_1 ⊂ C_2 ⊂ ... ⊂ C_l` of tight edge sets of the
/// contracted support whose rows (with the base row = the full alive set,
/// always the top element) span every tight rank constraint.
#[derive(Debug, Clone)]
pub struct ChainFamily {
    /// Global edge ids per chain set, ascending within each set.
    pub sets: Vec<Vec<usize>>,
}

impl ChainFamily {
    /// Indicator rows over the alive coordinates, in chain order.
    pub fn rows(&self, alive: &[usize]) -> Vec<Vec<f64>> {
        self.sets
            .iter()
            .map(|set| {
                let mut row = vec![0.0; alive.len()];
                for e in set {
                    if let Ok(k) = alive.binary_search(e) {
                        row[k] = 1.0;
                    }
                }
                row
            })
            .collect()
    }
}

// --- contracted-support machinery -----------------------------------------

fn neighbor_masks(n: usize, edges: &[(usize, usize, f64)]) -> Vec<u64> {
    let mut adj = vec![0u64; n];
    for &(u, v, _) in edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    adj
}

fn mask_connected(mask: u64, adj: &[u64]) -> bool {
    let start = mask & mask.wrapping_neg();
    let mut reach = start;
    loop {
        let mut next = reach;
        let mut frontier = reach;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            next |= adj[v] & mask;
        }
        if next == reach {
            return reach == mask;
        }
        reach = next;
    }
}

/// A connected vertex subset of the contracted support with its induced
/// alive-edge set (global edge-id mask).
#[derive(Debug, Clone)]
struct SubsetInfo {
    emask: u128,
    n_vertices: u32,
}

/// Contraction snapshot: valid until the set of 1-frozen edges changes.
struct Snapshot {
    ones_key: Vec<usize>,
    subsets: Vec<SubsetInfo>,
}

fn build_snapshot(
    state: &FractionalState,
    instance: &DegreeTreeInstance,
) -> Result<Snapshot, DegmatError> {
    let n_edges = instance.edges.len();
    assert!(n_edges <= 128, "desk-scale instances only (at most 128 edges)");
    let ones_key: Vec<usize> = (0..n_edges)
        .filter(|&e| state.frozen_value(e) == Some(true))
        .collect();

    // Union-find over original vertices along 1-frozen edges.
    let mut parent: Vec<usize> = (0..instance.vertices).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &e in &ones_key {
        let (u, v, _) = instance.edges[e];
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
        }
    }

    // Contracted ids for classes incident to alive edges.
    let mut class_id = vec![usize::MAX; instance.vertices];
    let mut vc = 0usize;
    let mut ends = Vec::new();
    for &e in state.alive() {
        let (u, v, _) = instance.edges[e];
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        for r in [ru, rv] {
            if class_id[r] == usize::MAX {
                class_id[r] = vc;
                vc += 1;
            }
        }
        if class_id[ru] == class_id[rv] {
            // An alive edge inside a contracted class closes a cycle of
            // 1-edges: the point is outside the polytope.
            return Err(DegmatError::NotInPolytope { violation: state.x()[e] });
        }
        ends.push((e, class_id[ru], class_id[rv]));
    }
    assert!(vc <= 64, "contracted support must fit a 64-bit vertex mask");

    // Components of the contracted support.
    let mut adj = vec![0u64; vc];
    for &(_, cu, cv) in &ends {
        adj[cu] |= 1 << cv;
        adj[cv] |= 1 << cu;
    }
    let mut comp_masks: Vec<u64> = Vec::new();
    let mut seen = 0u64;
    for v in 0..vc {
        if seen & (1 << v) != 0 {
            continue;
        }
        let mut mask = 1u64 << v;
        loop {
            let mut next = mask;
            let mut frontier = mask;
            while frontier != 0 {
                let w = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                next |= adj[w];
            }
            if next == mask {
                break;
            }
            mask = next;
        }
        seen |= mask;
        comp_masks.push(mask);
    }

    // Connected subsets, enumerated inside each component.
    let mut subsets = Vec::new();
    for &comp in &comp_masks {
        let verts: Vec<usize> = (0..vc).filter(|&v| comp & (1 << v) != 0).collect();
        let m = verts.len();
        for bits in 1u64..(1u64 << m) {
            if bits.count_ones() < 2 {
                continue;
            }
            let mut mask = 0u64;
            let mut b = bits;
            while b != 0 {
                let i = b.trailing_zeros() as usize;
                b &= b - 1;
                mask |= 1 << verts[i];
            }
            if !mask_connected(mask, &adj) {
                continue;
            }
            let mut emask = 0u128;
            for &(e, cu, cv) in &ends {
                if mask & (1 << cu) != 0 && mask & (1 << cv) != 0 {
                    emask |= 1 << e;
                }
            }
            if emask != 0 {
                subsets.push(SubsetInfo { emask, n_vertices: mask.count_ones() });
            }
        }
    }
    Ok(Snapshot { ones_key, subsets })
}

fn xsum(state: &FractionalState, emask: u128) -> f64 {
    let mut sum = 0.0;
    let mut m = emask;
    while m != 0 {
        let e = m.trailing_zeros() as usize;
        m &= m - 1;
        sum += state.x()[e];
    }
    sum
}

/// Build the tight-set chain from a snapshot's subsets at the current point.
fn chain_from_snapshot(
    state: &FractionalState,
    snapshot: &Snapshot,
) -> Result<ChainFamily, DegmatError> {
    let mut alive_mask = 0u128;
    for &e in state.alive() {
        alive_mask |= 1 << e;
    }
    // Tight connected subsets (x(E[S]) = |S| - 1 within tolerance); anything
    // above rank is a polytope violation.
    let mut tights: Vec<u128> = Vec::new();
    for s in &snapshot.subsets {
        let em = s.emask & alive_mask;
        if em == 0 {
            continue;
        }
        let xs = xsum(state, em);
        let rank = s.n_vertices as f64 - 1.0;
        if xs > rank + TIGHT_TOL {
            return Err(DegmatError::NotInPolytope { violation: xs - rank });
        }
        if xs >= rank - TIGHT_TOL {
            tights.push(em);
        }
    }

    // Greedy maximal chain through the lattice of tight sets: unions of
    // tight sets are tight, so repeatedly adding the smallest union keeps
    // every step a minimal cover.
    let mut sets = Vec::new();
    let mut current = 0u128;
    while current != alive_mask {
        let mut best: Option<u128> = None;
        for &t in &tights {
            if t & !current == 0 {
                continue;
            }
            let cand = current | t;
            if best.map_or(true, |b| cand.count_ones() < b.count_ones()) {
                best = Some(cand);
            }
        }
        let Some(next) = best else {
            // The full alive set is tight (conserved base row), so the chain
            // always completes; failing to is numeric drift.
            return Err(DegmatError::NotInPolytope { violation: f64::NAN });
        };
        debug_assert!((next & !current).count_ones() >= 2, "chain gaps must be >= 2 edges");
        let edges: Vec<usize> = (0..128).filter(|&e| next & (1 << e) != 0).collect();
        sets.push(edges);
        current = next;
    }
    Ok(ChainFamily { sets })
}

/// Compute the tight-set chain for the current state (fresh, uncached).
///
/// Preconditions: all alive coordinates strictly fractional (guaranteed by
/// the walk state) and the point inside the spanning-tree polytope of the
/// contracted support.
pub fn tight_chain(
    state: &FractionalState,
    instance: &DegreeTreeInstance,
) -> Result<ChainFamily, DegmatError> {
    if state.n_alive() == 0 {
        return Ok(ChainFamily { sets: Vec::new() });
    }
    let snapshot = build_snapshot(state, instance)?;
    chain_from_snapshot(state, &snapshot)
}

/// Constraint oracle: tight-chain rank rows plus protected degree rows, with
/// polytope step caps.
pub struct DegmatOracle {
    instance: DegreeTreeInstance,
    threshold: f64,
    snapshot: Mutex<Option<Snapshot>>,
}

impl DegmatOracle {
    fn with_snapshot<T>(
        &self,
        state: &FractionalState,
        f: impl FnOnce(&Snapshot) -> T,
    ) -> Result<T, DegmatError> {
        let ones_key: Vec<usize> = (0..self.instance.edges.len())
            .filter(|&e| state.frozen_value(e) == Some(true))
            .collect();
        let mut guard = self.snapshot.lock().expect("snapshot lock poisoned");
        if guard.as_ref().map_or(true, |s| s.ones_key != ones_key) {
            *guard = Some(build_snapshot(state, &self.instance)?);
        }
        Ok(f(guard.as_ref().unwrap()))
    }
}

impl SubspaceOracle for DegmatOracle {
    fn slack(&self) -> f64 {
        self.instance.delta
    }

    fn subspace(&self, state: &FractionalState) -> Result<SubspaceSpec, WalkError> {
        let alive = state.alive().to_vec();
        let chain = self
            .with_snapshot(state, |snap| chain_from_snapshot(state, snap))
            .and_then(|r| r)
            .map_err(|e| WalkError::Oracle(e.to_string()))?;
        let mut rows = chain.rows(&alive);
        let mut labels: Vec<String> =
            chain.sets.iter().map(|s| format!("tight set ({} edges)", s.len())).collect();

        for (j, set) in self.instance.degree_sets.iter().enumerate() {
            let excess: f64 = set
                .edges
                .iter()
                .filter(|&&e| state.is_alive(e))
                .map(|&e| 1.0 - state.x()[e])
                .sum();
            if excess >= self.threshold - 1e-12 {
                let mut row = vec![0.0; alive.len()];
                let mut any = false;
                for &e in &set.edges {
                    if let Ok(k) = alive.binary_search(&e) {
                        row[k] = 1.0;
                        any = true;
                    }
                }
                if any {
                    rows.push(row);
                    labels.push(format!("degree set {j}"));
                }
            }
        }
        Ok(SubspaceSpec { rows, forced_zero: Vec::new(), labels })
    }

    /// Cap the step at every non-tight rank face: gamma such that
    /// `x ± gamma * dir` keeps `x(E[S]) <= |S| - 1` for all connected `S`.
    fn step_cap(&self, state: &FractionalState, dir: &[f64]) -> Option<f64> {
        let alive = state.alive();
        let mut alive_mask = 0u128;
        for &e in alive {
            alive_mask |= 1 << e;
        }
        let cap = self
            .with_snapshot(state, |snap| {
                let mut cap = f64::INFINITY;
                for s in &snap.subsets {
                    let em = s.emask & alive_mask;
                    if em == 0 {
                        continue;
                    }
                    let slack = (s.n_vertices as f64 - 1.0) - xsum(state, em);
                    if slack <= TIGHT_TOL {
                        // Tight: conserved by the chain rows, not capped.
                        continue;
                    }
                    let mut rate = 0.0;
                    let mut m = em;
                    while m != 0 {
                        let e = m.trailing_zeros() as usize;
                        m &= m - 1;
                        rate += dir[alive.binary_search(&e).expect("alive edge")];
                    }
                    if rate.abs() > 1e-12 {
                        cap = cap.min(slack / rate.abs());
                    }
                }
                cap
            })
            .unwrap_or(f64::INFINITY);
        Some(cap)
    }
}

/// Spanning-tree report.
#[derive(Debug, Clone, Serialize)]
pub struct TreeReport {
    /// Per-set degree violation `|X ∩ S_j| - b_j`.
    pub violations: Vec<i64>,
    pub max_violation: i64,
    /// Strict bound `q / (1 - 2 delta)`; every violation must be below it.
    pub violation_bound: f64,
    pub cost: f64,
    pub fractional_cost: f64,
    /// Max over cuts of (tree edges across) / (x0-mass across), on graphs
    /// with at most 12 vertices; reported, never asserted.
    pub cut_thinness: Option<f64>,
    pub pass: bool,
}

/// Check that the outcome is a spanning tree and report degree violations
/// against the strict `q/(1-2 delta)` bound.
pub fn verify_tree(
    instance: &DegreeTreeInstance,
    outcome: &RoundingOutcome,
) -> Result<TreeReport, DegmatError> {
    let chosen: Vec<usize> = (0..instance.edges.len()).filter(|&e| outcome.x[e] == 1).collect();
    if chosen.len() != instance.vertices - 1 {
        return Err(DegmatError::NotATree(format!(
            "{} edges selected, expected {}",
            chosen.len(),
            instance.vertices - 1
        )));
    }
    let mut parent: Vec<usize> = (0..instance.vertices).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &e in &chosen {
        let (u, v, _) = instance.edges[e];
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            return Err(DegmatError::NotATree("selected edges contain a cycle".into()));
        }
        parent[ru] = rv;
    }

    let bound = instance.q() as f64 / (1.0 - 2.0 * instance.delta);
    let violations: Vec<i64> = instance
        .degree_sets
        .iter()
        .map(|s| {
            let count = s.edges.iter().filter(|&&e| outcome.x[e] == 1).count() as i64;
            count - s.bound
        })
        .collect();
    let max_violation = violations.iter().copied().max().unwrap_or(0);
    let pass = (max_violation as f64) + 1e-9 < bound || violations.is_empty();

    let cut_thinness = (instance.vertices <= 12).then(|| {
        let mut worst: f64 = 0.0;
        for s in 1u64..((1 << instance.vertices) - 1) {
            let mut tree_cross = 0usize;
            let mut x_cross = 0.0;
            for (e, &(u, v, _)) in instance.edges.iter().enumerate() {
                if (s >> u) & 1 != (s >> v) & 1 {
                    x_cross += instance.x0[e];
                    if outcome.x[e] == 1 {
                        tree_cross += 1;
                    }
                }
            }
            if x_cross > 1e-12 {
                worst = worst.max(tree_cross as f64 / x_cross);
            }
        }
        worst
    });

    Ok(TreeReport {
        violations,
        max_violation,
        violation_bound: bound,
        cost: instance.cost(&outcome.x_f64()),
        fractional_cost: instance.cost(&instance.x0),
        cut_thinness,
        pass,
    })
}
