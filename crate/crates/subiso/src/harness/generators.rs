//! Instance generators. Fractional points are built as explicit convex
//! combinations of integral solutions, so polytope membership is certain by
//! construction.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::degmat::DegreeTreeInstance;
use crate::makespan::MakespanInstance;
use crate::matching::BipartiteMatchingInstance;
use crate::sparse_lp::{NormMode, SparseLPInstance};
use crate::state::FractionalState;
use crate::walk::{SubspaceOracle, SubspaceSpec, WalkError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("bad shape: {0}")]
    BadShape(String),
}

/// The tightness family: `n` variables in blocks of `t`, every block forced
/// to move in lockstep by `t - 1` equality rows, `(t-1)(n/t) = (1 - 1/t) n`
/// rows in total. `t = 1` has no rows at all (the trivial oracle).
#[derive(Debug, Clone)]
pub struct BlockInstance {
    pub n: usize,
    pub t: usize,
    pub x_value: f64,
}

impl BlockInstance {
    pub fn new(n: usize, t: usize, x_value: f64) -> Result<Self, GenError> {
        if t == 0 || n == 0 || n % t != 0 {
            return Err(GenError::BadShape(format!("t = {t} must divide n = {n}")));
        }
        if !(0.0..=1.0).contains(&x_value) {
            return Err(GenError::BadShape("x must be in [0,1]".into()));
        }
        Ok(Self { n, t, x_value })
    }

    pub fn x0(&self) -> Vec<f64> {
        vec![self.x_value; self.n]
    }

    /// Declared slack: exactly `1/t`.
    pub fn delta(&self) -> f64 {
        1.0 / self.t as f64
    }

    pub fn oracle(&self) -> BlockOracle {
        BlockOracle { t: self.t }
    }

    /// Equality rows at the initial state, for rank arithmetic checks.
    pub fn initial_rows(&self) -> usize {
        (self.t - 1) * (self.n / self.t)
    }
}

/// Oracle conserving `x_{bt} = x_{bt+1} = ... = x_{bt+t-1}` per block.
#[derive(Debug, Clone)]
pub struct BlockOracle {
    t: usize,
}

impl SubspaceOracle for BlockOracle {
    fn slack(&self) -> f64 {
        1.0 / self.t as f64
    }

    fn subspace(&self, state: &FractionalState) -> Result<SubspaceSpec, WalkError> {
        let alive = state.alive();
        let mut rows = Vec::new();
        let mut by_block: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (k, &i) in alive.iter().enumerate() {
            by_block.entry(i / self.t).or_default().push(k);
        }
        for members in by_block.values() {
            for pair in members.windows(2) {
                let mut row = vec![0.0; alive.len()];
                row[pair[0]] = 1.0;
                row[pair[1]] = -1.0;
                rows.push(row);
            }
        }
        Ok(SubspaceSpec { rows, forced_zero: Vec::new(), labels: Vec::new() })
    }
}

/// Block instance at the paper's midpoint `x = 1/2`.
pub fn gen_block_instance(n: usize, t: usize) -> Result<BlockInstance, GenError> {
    BlockInstance::new(n, t, 0.5)
}

/// Random 0-1 matrix with column l1 norms at most `max_col_ones` and a
/// uniform random fractional point.
pub fn gen_sparse_lp(
    m: usize,
    n: usize,
    max_col_ones: usize,
    delta: f64,
    seed: u64,
) -> SparseLPInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for j in 0..n {
        let k = rng.gen_range(1..=max_col_ones);
        let mut hit: Vec<usize> = (0..m).collect();
        hit.shuffle(&mut rng);
        for &i in hit.iter().take(k) {
            rows[i].push((j, 1.0));
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|&(j, _)| j);
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    SparseLPInstance::new(m, n, rows, x0, delta, NormMode::L1).expect("generated instance valid")
}

/// Random dense ±1 matrix in the l2 (Komlos) setting, `delta = 1/2`.
pub fn gen_komlos(m: usize, n: usize, seed: u64) -> SparseLPInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|_| (0..n).map(|j| (j, if rng.gen::<bool>() { 1.0 } else { -1.0 })).collect())
        .collect();
    let x0: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    SparseLPInstance::new(m, n, rows, x0, 0.5, NormMode::L2).expect("generated instance valid")
}

/// Random unrelated-machines instance: sizes uniform in `[0.2, 1]` per
/// resource, `x0` a convex combination of 8 random integral assignments,
/// and per-resource targets dominating both fractional loads and supported
/// sizes.
pub fn gen_makespan(
    machines: usize,
    jobs: usize,
    resources: usize,
    delta: f64,
    seed: u64,
) -> MakespanInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<Vec<Vec<f64>>> = (0..machines)
        .map(|_| {
            (0..jobs)
                .map(|_| (0..resources).map(|_| rng.gen_range(0.2..1.0)).collect())
                .collect()
        })
        .collect();
    let k = 8;
    let assignments: Vec<Vec<usize>> =
        (0..k).map(|_| (0..jobs).map(|_| rng.gen_range(0..machines)).collect()).collect();
    let raw: Vec<f64> = (0..k).map(|_| -(rng.gen::<f64>().max(1e-12).ln())).collect();
    let total: f64 = raw.iter().sum();
    let mut x = vec![vec![0.0; jobs]; machines];
    for (a, w) in assignments.iter().zip(&raw) {
        for (j, &i) in a.iter().enumerate() {
            x[i][j] += w / total;
        }
    }
    let mut x0 = Vec::new();
    for i in 0..machines {
        for j in 0..jobs {
            if x[i][j] > 0.0 {
                x0.push((i, j, x[i][j]));
            }
        }
    }
    let mut target = vec![0.0f64; resources];
    for h in 0..resources {
        for i in 0..machines {
            let load: f64 = (0..jobs).map(|j| p[i][j][h] * x[i][j]).sum();
            target[h] = target[h].max(load);
        }
        for &(i, j, _) in &x0 {
            target[h] = target[h].max(p[i][j][h]);
        }
    }
    MakespanInstance::new(machines, jobs, resources, p, target, x0, delta)
        .expect("generated instance valid")
}

/// Fractional spanning tree on a cycle of length `len`: every edge at
/// `(len-1)/len`.
pub fn gen_tree_cycle(len: usize, delta: f64) -> DegreeTreeInstance {
    let edges: Vec<(usize, usize, f64)> = (0..len).map(|i| (i, (i + 1) % len, 1.0)).collect();
    let x = (len as f64 - 1.0) / len as f64;
    DegreeTreeInstance::new(len, edges, Vec::new(), vec![x; len], delta)
        .expect("cycle instance valid")
}

/// `x0` as a convex combination of random spanning trees (Kruskal over
/// shuffled edge orders, random positive weights).
fn fractional_tree(
    vertices: usize,
    edges: &[(usize, usize, f64)],
    n_trees: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut mass = vec![0.0; edges.len()];
    let mut weight_total = 0.0;
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for _ in 0..n_trees {
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.shuffle(rng);
        let mut parent: Vec<usize> = (0..vertices).collect();
        let w = rng.gen_range(0.5..1.5);
        weight_total += w;
        for &e in &order {
            let (u, v, _) = edges[e];
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
                mass[e] += w;
            }
        }
    }
    mass.iter().map(|m| m / weight_total).collect()
}

/// The Petersen graph with vertex degree bounds `b_v = 2` and random costs.
pub fn gen_petersen(delta: f64, seed: u64) -> DegreeTreeInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..5 {
        edges.push((i, (i + 1) % 5, rng.gen_range(0.0..1.0)));
        edges.push((i, i + 5, rng.gen_range(0.0..1.0)));
        edges.push((5 + i, 5 + (i + 2) % 5, rng.gen_range(0.0..1.0)));
    }
    let x0 = fractional_tree(10, &edges, 12, &mut rng);
    DegreeTreeInstance::with_vertex_bounds(10, edges, 2, x0, delta)
        .expect("Petersen instance valid")
}

/// Random connected cubic graph on `v` vertices (v even, v >= 6): a random
/// Hamiltonian cycle plus a random perfect matching avoiding duplicates.
pub fn gen_random_cubic(v: usize, delta: f64, seed: u64) -> Result<DegreeTreeInstance, GenError> {
    if v % 2 != 0 || v < 6 {
        return Err(GenError::BadShape("cubic graphs need even v >= 6".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'outer: for _attempt in 0..1000 {
        let mut perm: Vec<usize> = (0..v).collect();
        perm.shuffle(&mut rng);
        let mut adj = vec![[false; 64]; v];
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..v {
            let (a, b) = (perm[i], perm[(i + 1) % v]);
            adj[a][b] = true;
            adj[b][a] = true;
            edges.push((a, b, rng.gen_range(0.0..1.0)));
        }
        let mut pair: Vec<usize> = (0..v).collect();
        pair.shuffle(&mut rng);
        for c in pair.chunks(2) {
            let (a, b) = (c[0], c[1]);
            if a == b || adj[a][b] {
                continue 'outer;
            }
            adj[a][b] = true;
            adj[b][a] = true;
            edges.push((a, b, rng.gen_range(0.0..1.0)));
        }
        let x0 = fractional_tree(v, &edges, 12, &mut rng);
        return DegreeTreeInstance::with_vertex_bounds(v, edges, 2, x0, delta)
            .map_err(|e| GenError::BadShape(e.to_string()));
    }
    Err(GenError::BadShape("could not sample a simple cubic graph".into()))
}

/// The 2n-cycle fractional perfect matching at `x = 1/2`.
pub fn gen_matching_cycle(n_per_side: usize, delta: f64) -> BipartiteMatchingInstance {
    let mut edges = Vec::new();
    for i in 0..n_per_side {
        edges.push((i, i, 0.5));
        edges.push(((i + 1) % n_per_side, i, 0.5));
    }
    BipartiteMatchingInstance::new(n_per_side, n_per_side, edges, delta)
        .expect("cycle matching valid")
}

/// Random fractional perfect matching: a convex combination of `k` random
/// permutations.
pub fn gen_matching_random(
    n_per_side: usize,
    k: usize,
    delta: f64,
    seed: u64,
) -> BipartiteMatchingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..k).map(|_| -(rng.gen::<f64>().max(1e-12).ln())).collect();
    let total: f64 = raw.iter().sum();
    let mut weight = std::collections::BTreeMap::new();
    for w in &raw {
        let mut perm: Vec<usize> = (0..n_per_side).collect();
        perm.shuffle(&mut rng);
        for (u, &v) in perm.iter().enumerate() {
            *weight.entry((u, v)).or_insert(0.0) += w / total;
        }
    }
    let edges: Vec<(usize, usize, f64)> =
        weight.into_iter().map(|((u, v), x)| (u, v, x)).collect();
    BipartiteMatchingInstance::new(n_per_side, n_per_side, edges, delta)
        .expect("random matching valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_shapes() {
        // n = 4, t = 2: two rows (x1 = x2, x3 = x4).
        let b = gen_block_instance(4, 2).unwrap();
        assert_eq!(b.initial_rows(), 2);
        assert_eq!(b.x0(), vec![0.5; 4]);

        // n = t: a single block with t - 1 rows.
        let b = gen_block_instance(6, 6).unwrap();
        assert_eq!(b.initial_rows(), 5);

        // n = 6, t = 2: three rows; rank check 3 = (1 - 1/2) * 6.
        let b = gen_block_instance(6, 2).unwrap();
        assert_eq!(b.initial_rows(), 3);
        assert_eq!(b.initial_rows() as f64, (1.0 - b.delta()) * 6.0);

        assert!(gen_block_instance(5, 2).is_err());
    }

    #[test]
    fn generated_instances_validate() {
        gen_sparse_lp(16, 16, 4, 0.5, 1).validate().unwrap();
        gen_komlos(12, 12, 2).validate().unwrap();
        gen_makespan(4, 12, 1, 0.25, 3).validate().unwrap();
        gen_tree_cycle(5, 0.25).validate().unwrap();
        gen_petersen(1.0 / 6.0 - 0.01, 4).validate().unwrap();
        gen_random_cubic(10, 1.0 / 6.0 - 0.01, 5).unwrap().validate().unwrap();
        gen_matching_cycle(2, 0.2).validate().unwrap();
        gen_matching_random(8, 4, 0.2, 6).validate().unwrap();
    }

    #[test]
    fn matching_cycle_is_the_four_cycle() {
        let inst = gen_matching_cycle(2, 0.2);
        assert_eq!(inst.edges.len(), 4);
        let mut sums = vec![0.0; 4];
        for &(u, v, x) in &inst.edges {
            sums[u] += x;
            sums[2 + v] += x;
        }
        assert!(sums.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn tree_cycle_rank_arithmetic() {
        let inst = gen_tree_cycle(5, 0.25);
        let total: f64 = inst.x0.iter().sum();
        assert!((total - 4.0).abs() < 1e-12, "a fractional spanning tree");
    }

    #[test]
    fn cubic_graphs_are_cubic() {
        for seed in 0..10 {
            let inst = gen_random_cubic(12, 0.15, seed).unwrap();
            let mut deg = vec![0usize; 12];
            for &(u, v, _) in &inst.edges {
                deg[u] += 1;
                deg[v] += 1;
            }
            assert!(deg.iter().all(|&d| d == 3), "degrees {deg:?}");
        }
    }
}
