//! Synthetic forest-structured models and exact ancestral sampling.
//!
//! The star topology ties nodes `1..=k` to a hub at node 0 through binary
//! symmetric channels with uniform marginals; nodes `k+1..d-1` stay
//! isolated. Random forests with floored probabilities and a minimum edge
//! information are available for property tests beyond the star.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{mutual_information, NodeDist, PairwiseDist};
use crate::empirical::SampleMatrix;
use crate::error::{Error, Result};
use crate::forest::ForestModel;

/// A counter-based random stream: the pair (seed, stream) fully determines
/// the generated sequence, independent of scheduling, so parallel trials
/// stay reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeededRng {
    pub seed: u64,
    pub stream: u64,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeededRng { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Star-plus-isolated-nodes topology: binary variables, uniform marginals,
/// every edge a binary symmetric channel with the given crossover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarForestSpec {
    pub d: usize,
    pub k: usize,
    pub crossover: f64,
}

impl StarForestSpec {
    pub fn new(d: usize, k: usize, crossover: f64) -> Result<Self> {
        if d < 2 || k < 1 || k > d - 1 {
            return Err(Error::InvalidParameter(format!(
                "star spec needs 1 <= k <= d - 1, got d = {d}, k = {k}"
            )));
        }
        if !(crossover > 0.0 && crossover < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "crossover must lie strictly inside (0, 0.5), got {crossover}"
            )));
        }
        Ok(StarForestSpec { d, k, crossover })
    }

    /// Mutual information of one edge in nats: `ln 2 - H_b(crossover)`.
    pub fn edge_mi(&self) -> f64 {
        let c = self.crossover;
        let hb = -(c * c.ln() + (1.0 - c) * (1.0 - c).ln());
        std::f64::consts::LN_2 - hb
    }
}

/// Builds the star forest: hub node 0 joined to nodes `1..=k`.
pub fn build_star_forest(spec: &StarForestSpec) -> Result<ForestModel> {
    let c = spec.crossover;
    let same = (1.0 - c) / 2.0;
    let diff = c / 2.0;
    let table = PairwiseDist::new(2, vec![same, diff, diff, same])?;
    let marginals = vec![NodeDist::uniform(2); spec.d];
    let edges = (1..=spec.k).map(|j| ((0, j), table.clone())).collect();
    ForestModel::new(marginals, edges)
}

/// The fully independent uniform-binary model on `d` nodes (the `k = 0`
/// extreme of the star family).
pub fn build_empty_forest(d: usize) -> Result<ForestModel> {
    ForestModel::product_model(vec![NodeDist::uniform(2); d])
}

/// Floors applied while drawing random models: `min_prob` bounds every
/// pairwise-joint entry away from zero and `min_edge_mi` keeps edges
/// non-degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestPolicy {
    pub min_prob: f64,
    pub min_edge_mi: f64,
}

impl Default for ForestPolicy {
    fn default() -> Self {
        ForestPolicy {
            min_prob: 0.02,
            min_edge_mi: 0.01,
        }
    }
}

/// Draws a random forest-structured model with `k` edges on `d` nodes.
///
/// The skeleton is a uniform spanning tree (Wilson's loop-erased random
/// walk on the complete graph) with `d - 1 - k` uniformly chosen edges
/// deleted. Note the deletion step makes the skeleton law close to but not
/// exactly uniform over k-edge forests. Marginals are drawn from floored
/// simplices and each edge joint is resampled until its mutual information
/// clears the policy floor.
pub fn build_random_forest(
    d: usize,
    k: usize,
    r: usize,
    rng: &mut impl Rng,
    policy: &ForestPolicy,
) -> Result<ForestModel> {
    if d < 2 || r < 2 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 2 and r >= 2, got d = {d}, r = {r}"
        )));
    }
    if k > d - 1 {
        return Err(Error::Infeasible(format!(
            "a forest on {d} nodes has at most {} edges, requested {k}",
            d - 1
        )));
    }
    let kappa = policy.min_prob;
    if !(kappa >= 0.0 && kappa < 1.0 / (r * r) as f64) {
        return Err(Error::InvalidParameter(format!(
            "min_prob must lie in [0, 1/r^2) = [0, {}), got {kappa}",
            1.0 / (r * r) as f64
        )));
    }

    // Skeleton: uniform spanning tree, then prune to k edges.
    let mut edges = wilson_spanning_tree(d, rng);
    while edges.len() > k {
        let drop = rng.random_range(0..edges.len());
        edges.swap_remove(drop);
    }

    // Orient each component away from its lowest-index node and draw the
    // tables parent-first so every child marginal is derived, keeping the
    // factorization consistent by construction.
    let mut adj = vec![Vec::new(); d];
    for &(i, j) in &edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let node_floor = r as f64 * kappa;
    let mut marginals: Vec<Option<NodeDist>> = vec![None; d];
    let mut tables: Vec<((usize, usize), PairwiseDist)> = Vec::with_capacity(edges.len());
    let mut seen = vec![false; d];
    for start in 0..d {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        marginals[start] = Some(NodeDist::new(floored_simplex(r, node_floor, 1.0, rng)?)?);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let pu = marginals[u].clone().expect("parent drawn before child");
            for &v in &adj[u] {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                let joint = random_edge_joint(&pu, kappa, policy.min_edge_mi, rng)?;
                // Stored orientation: rows index the smaller endpoint.
                let (key, oriented) = if u < v {
                    ((u, v), joint.clone())
                } else {
                    ((v, u), joint.transpose())
                };
                marginals[v] = Some(joint.col_marginal());
                tables.push((key, oriented));
                queue.push_back(v);
            }
        }
    }
    let marginals: Vec<NodeDist> = marginals.into_iter().map(|m| m.unwrap()).collect();
    ForestModel::new(marginals, tables)
}

/// Uniform random spanning tree of the complete graph on `d` nodes.
fn wilson_spanning_tree(d: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut in_tree = vec![false; d];
    let mut next = vec![usize::MAX; d];
    let root = rng.random_range(0..d);
    in_tree[root] = true;
    for start in 0..d {
        if in_tree[start] {
            continue;
        }
        // Random walk to the tree, remembering only the last exit.
        let mut u = start;
        while !in_tree[u] {
            let mut step = rng.random_range(0..d - 1);
            if step >= u {
                step += 1;
            }
            next[u] = step;
            u = step;
        }
        // Retrace the loop-erased path and attach it.
        let mut u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    (0..d)
        .filter(|&u| u != root)
        .map(|u| (u.min(next[u]), u.max(next[u])))
        .collect()
}

/// A point of the scaled simplex `{v >= floor, sum v = total}`.
fn floored_simplex(r: usize, floor: f64, total: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let free = total - r as f64 * floor;
    if free < 0.0 {
        return Err(Error::Infeasible(format!(
            "floor {floor} infeasible for {r} entries summing to {total}"
        )));
    }
    let raw: Vec<f64> = (0..r)
        .map(|_| -rng.random::<f64>().max(1e-12).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    let mut v: Vec<f64> = raw.iter().map(|&e| floor + free * e / sum).collect();
    let norm: f64 = v.iter().sum();
    if (norm - total).abs() > 1e-15 {
        let scale = total / norm;
        for x in &mut v {
            *x *= scale;
        }
    }
    Ok(v)
}

/// A pairwise joint with the given row marginal, entries floored at
/// `kappa`, resampled until the mutual information clears `mi_floor`.
fn random_edge_joint(
    parent: &NodeDist,
    kappa: f64,
    mi_floor: f64,
    rng: &mut impl Rng,
) -> Result<PairwiseDist> {
    let r = parent.r();
    const MAX_TRIES: usize = 1000;
    for _ in 0..MAX_TRIES {
        let mut table = Vec::with_capacity(r * r);
        for x in 0..r {
            table.extend(floored_simplex(r, kappa, parent.prob(x), rng)?);
        }
        let total: f64 = table.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            let scale = 1.0 / total;
            for v in &mut table {
                *v *= scale;
            }
        }
        let joint = PairwiseDist::new(r, table)?;
        if mutual_information(&joint) >= mi_floor {
            return Ok(joint);
        }
    }
    Err(Error::Infeasible(format!(
        "could not draw an edge joint with MI >= {mi_floor} under floor {kappa} in {MAX_TRIES} tries"
    )))
}

/// Draws `n` i.i.d. configurations by ancestral sampling: each component's
/// root from its node marginal, every child from the conditional row given
/// its parent's value, in parent-before-child order.
pub fn sample(m: &ForestModel, n: usize, src: SeededRng) -> SampleMatrix {
    let directed = m
        .directed_decomposition(None)
        .expect("default roots are always valid");
    let d = m.d();
    let r = m.r();

    // Per-node samplers: root marginal rows or conditional rows by parent
    // symbol, as cumulative sums.
    let mut cdf: Vec<Vec<f64>> = vec![Vec::new(); d];
    for &i in &directed.order {
        let rows = match directed.parent[i] {
            None => m.node_marginal(i).probs().to_vec(),
            Some(par) => {
                let joint = m.pairwise_marginal(par, i);
                let mut rows = vec![0.0; r * r];
                for a in 0..r {
                    let pa = m.node_marginal(par).prob(a);
                    for b in 0..r {
                        rows[a * r + b] = if pa > 0.0 { joint.prob(a, b) / pa } else { 0.0 };
                    }
                }
                rows
            }
        };
        let mut acc = rows;
        let chunks = acc.len() / r;
        for c in 0..chunks {
            for idx in 1..r {
                acc[c * r + idx] += acc[c * r + idx - 1];
            }
        }
        cdf[i] = acc;
    }

    let mut rng = src.rng();
    let mut data = vec![0u8; n * d];
    let mut state = vec![0usize; d];
    for l in 0..n {
        for &i in &directed.order {
            let row = match directed.parent[i] {
                None => &cdf[i][..r],
                Some(par) => {
                    let a = state[par];
                    &cdf[i][a * r..(a + 1) * r]
                }
            };
            let u: f64 = rng.random();
            let mut sym = r - 1;
            for (idx, &c) in row.iter().enumerate() {
                if u < c {
                    sym = idx;
                    break;
                }
            }
            state[i] = sym;
            data[l * d + i] = sym as u8;
        }
    }
    SampleMatrix::new(n, d, r, data).expect("sampled symbols lie in the alphabet")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::empirical_pairwise;
    use approx::assert_abs_diff_eq;

    #[test]
    fn star_edges_and_mi() {
        let spec = StarForestSpec::new(3, 2, 0.3).unwrap();
        let m = build_star_forest(&spec).unwrap();
        assert_eq!(m.edges(), &[(0, 1), (0, 2)]);
        for &(i, j) in m.edges() {
            let mi = mutual_information(m.edge_marginal(i, j).unwrap());
            assert_abs_diff_eq!(mi, 0.082282, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(spec.edge_mi(), 0.082282, epsilon = 1e-6);
    }

    #[test]
    fn full_star_is_a_tree() {
        let spec = StarForestSpec::new(6, 5, 0.3).unwrap();
        let m = build_star_forest(&spec).unwrap();
        assert_eq!(m.num_edges(), 5);
        // Every non-hub node has degree 1, the hub degree 5: connected.
        assert_eq!(m.neighbors(0).len(), 5);
    }

    #[test]
    fn crossover_validation_and_weak_edge_taylor() {
        assert!(StarForestSpec::new(4, 2, 0.5).is_err());
        assert!(StarForestSpec::new(4, 2, 0.0).is_err());
        let spec = StarForestSpec::new(4, 2, 0.49).unwrap();
        // Near c = 1/2 the information behaves like 2 (1/2 - c)^2.
        let approx_mi = 2.0 * 0.01f64.powi(2);
        let mi = spec.edge_mi();
        assert!(mi > 0.0);
        assert!(
            (mi - approx_mi).abs() / approx_mi < 0.01,
            "MI {mi} vs Taylor {approx_mi}"
        );
        let m = build_star_forest(&spec).unwrap();
        assert_abs_diff_eq!(m.min_edge_mi(), mi, epsilon = 1e-12);
    }

    #[test]
    fn random_forest_edge_counts_and_floors() {
        let mut rng = SeededRng::new(5, 0).rng();
        let policy = ForestPolicy::default();
        for _ in 0..200 {
            let m = build_random_forest(6, 3, 2, &mut rng, &policy).unwrap();
            assert_eq!(m.num_edges(), 3);
            assert!(m.is_strictly_positive());
            assert!(m.min_edge_mi() >= policy.min_edge_mi);
            for &(i, j) in m.edges() {
                assert!(m.edge_marginal(i, j).unwrap().min_prob() >= policy.min_prob - 1e-12);
            }
        }
    }

    #[test]
    fn random_forest_property_sweep() {
        // Model construction already verifies acyclicity and marginal
        // consistency, so each successful draw is a passed check.
        let mut rng = SeededRng::new(55, 0).rng();
        let policy = ForestPolicy::default();
        for _ in 0..10_000 {
            let m = build_random_forest(6, 3, 2, &mut rng, &policy).unwrap();
            assert_eq!(m.num_edges(), 3);
        }
    }

    #[test]
    fn random_forest_extremes() {
        let mut rng = SeededRng::new(6, 0).rng();
        let policy = ForestPolicy::default();
        let empty = build_random_forest(5, 0, 2, &mut rng, &policy).unwrap();
        assert_eq!(empty.num_edges(), 0);
        let tree = build_random_forest(5, 4, 3, &mut rng, &policy).unwrap();
        assert_eq!(tree.num_edges(), 4);
        // Spanning: every node reachable from node 0.
        let df = tree.directed_decomposition(None).unwrap();
        assert_eq!(df.roots, vec![0]);
        assert!(build_random_forest(5, 5, 2, &mut rng, &policy).is_err());
    }

    #[test]
    fn sampling_is_reproducible_per_seed_and_stream() {
        let m = build_star_forest(&StarForestSpec::new(5, 3, 0.3).unwrap()).unwrap();
        let a = sample(&m, 200, SeededRng::new(9, 4));
        let b = sample(&m, 200, SeededRng::new(9, 4));
        assert_eq!(a, b);
        let c = sample(&m, 200, SeededRng::new(9, 5));
        assert_ne!(a, c);
    }

    #[test]
    fn deterministic_edge_copies_columns() {
        let diag = PairwiseDist::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        let m = ForestModel::new(
            vec![NodeDist::uniform(2), NodeDist::uniform(2)],
            vec![((0, 1), diag)],
        )
        .unwrap();
        let s = sample(&m, 500, SeededRng::new(1, 0));
        for l in 0..s.n() {
            assert_eq!(s.get(l, 0), s.get(l, 1));
        }
    }

    #[test]
    fn empty_forest_column_means_near_half() {
        let m = build_empty_forest(4).unwrap();
        let s = sample(&m, 100_000, SeededRng::new(12, 0));
        for i in 0..4 {
            let mean = s.node_type(i).prob(1);
            assert!((0.49..=0.51).contains(&mean), "column {i} mean {mean}");
        }
    }

    #[test]
    fn sampled_edge_types_converge() {
        let m = build_star_forest(&StarForestSpec::new(6, 4, 0.3).unwrap()).unwrap();
        let s = sample(&m, 100_000, SeededRng::new(13, 0));
        for &(i, j) in m.edges() {
            let t = empirical_pairwise(&s, i, j);
            let truth = m.edge_marginal(i, j).unwrap();
            let linf = t
                .type_table()
                .table()
                .iter()
                .zip(truth.table())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(linf < 0.03, "edge ({i}, {j}) type off by {linf}");
        }
    }

    #[test]
    fn desk_scale_joint_type_matches_exact_joint() {
        use crate::forest::JointTable;
        let mut rng = SeededRng::new(3, 7).rng();
        let m = build_random_forest(5, 3, 2, &mut rng, &ForestPolicy::default()).unwrap();
        let s = sample(&m, 1_000_000, SeededRng::new(3, 8));
        let type_joint = JointTable::from_samples(&s).unwrap();
        let exact = JointTable::from_model(&m).unwrap();
        let tv: f64 = type_joint
            .probs()
            .iter()
            .zip(exact.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv} too large");
    }
}
