//! Forest-structured models: acyclic pairwise factorizations, exact pairwise
//! inference along paths, divergences between forests, and projections onto
//! fixed structures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dist::{mutual_information, NodeDist, PairwiseDist, TOL_CONSISTENCY};
use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Unordered edges are stored with the smaller endpoint first.
pub(crate) fn norm_edge(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// A distribution that factorizes over the nodes and edges of a forest.
///
/// The joint is `prod_i P_i(x_i) * prod_{(i,j) in E} P_ij(x_i,x_j) /
/// (P_i(x_i) P_j(x_j))`. Instances are immutable after construction and the
/// stored marginals are checked for mutual consistency, so all operations
/// are pure reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    d: usize,
    r: usize,
    edges: Vec<(usize, usize)>,
    node_marginals: Vec<NodeDist>,
    edge_marginals: BTreeMap<(usize, usize), PairwiseDist>,
    adjacency: Vec<Vec<usize>>,
}

impl ForestModel {
    /// Builds a model from per-node marginals and per-edge joint tables.
    ///
    /// Edge tables may be given in either orientation; `(j, i)` with `j > i`
    /// is transposed on the way in. Fails if the edges contain a cycle, if a
    /// table's marginals disagree with the stored node marginals beyond
    /// `TOL_CONSISTENCY`, or if alphabet sizes are mixed.
    pub fn new(
        node_marginals: Vec<NodeDist>,
        edges: Vec<((usize, usize), PairwiseDist)>,
    ) -> Result<Self> {
        let d = node_marginals.len();
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "a model needs at least 2 nodes, got {d}"
            )));
        }
        let r = node_marginals[0].r();
        if node_marginals.iter().any(|m| m.r() != r) {
            return Err(Error::DimensionMismatch(
                "all node marginals must share one alphabet size".into(),
            ));
        }

        let mut uf = UnionFind::new(d);
        let mut edge_marginals = BTreeMap::new();
        let mut edge_list = Vec::with_capacity(edges.len());
        for ((a, b), table) in edges {
            if a >= d || b >= d || a == b {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) is not a valid node pair for d = {d}"
                )));
            }
            if table.r() != r {
                return Err(Error::DimensionMismatch(format!(
                    "edge ({a}, {b}) table has alphabet size {} but the model uses {r}",
                    table.r()
                )));
            }
            let (i, j) = norm_edge(a, b);
            let oriented = if a <= b { table } else { table.transpose() };
            if !uf.union(i, j) {
                return Err(Error::NotAcyclic(i, j));
            }
            check_marginal_match(&oriented.row_marginal(), &node_marginals[i], i)?;
            check_marginal_match(&oriented.col_marginal(), &node_marginals[j], j)?;
            if edge_marginals.insert((i, j), oriented).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({i}, {j})"
                )));
            }
            edge_list.push((i, j));
        }
        edge_list.sort_unstable();

        let mut adjacency = vec![Vec::new(); d];
        for &(i, j) in &edge_list {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }

        Ok(ForestModel {
            d,
            r,
            edges: edge_list,
            node_marginals,
            edge_marginals,
            adjacency,
        })
    }

    /// Fully independent model: no edges, given per-node marginals.
    pub fn product_model(node_marginals: Vec<NodeDist>) -> Result<Self> {
        ForestModel::new(node_marginals, Vec::new())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Edges in normalized `(min, max)` form, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_marginal(&self, i: usize) -> &NodeDist {
        &self.node_marginals[i]
    }

    pub fn node_marginals(&self) -> &[NodeDist] {
        &self.node_marginals
    }

    /// The stored table for an edge, oriented so rows index `min(i, j)`.
    pub fn edge_marginal(&self, i: usize, j: usize) -> Option<&PairwiseDist> {
        self.edge_marginals.get(&norm_edge(i, j))
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// Minimum mutual information over the model's edges (`INFINITY` for an
    /// empty edge set).
    pub fn min_edge_mi(&self) -> f64 {
        self.edge_marginals
            .values()
            .map(mutual_information)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.node_marginals.iter().all(|m| m.min_prob() > 0.0)
            && self
                .edge_marginals
                .values()
                .all(|t| t.is_strictly_positive())
    }

    /// Exact joint marginal of the pair `(i, j)` with rows indexing `x_i`.
    ///
    /// For an edge this is the stored table. Within a component the joint is
    /// the product of conditional transitions along the unique path; across
    /// components it is the outer product of the node marginals.
    pub fn pairwise_marginal(&self, i: usize, j: usize) -> PairwiseDist {
        assert!(
            i < self.d && j < self.d && i != j,
            "need two distinct nodes"
        );
        if let Some(table) = self.edge_marginals.get(&norm_edge(i, j)) {
            return if i < j {
                table.clone()
            } else {
                table.transpose()
            };
        }
        let Some(path) = self.path_between(i, j) else {
            return PairwiseDist::product(&self.node_marginals[i], &self.node_marginals[j])
                .expect("node marginals share r");
        };
        let r = self.r;
        // trans[x_i][x_k]: probability of symbol x_k at the path end given
        // x_i at the start.
        let mut trans = vec![0.0; r * r];
        for x in 0..r {
            trans[x * r + x] = 1.0;
        }
        for step in path.windows(2) {
            let cond = self.conditional(step[0], step[1]);
            let mut next = vec![0.0; r * r];
            for a in 0..r {
                for m in 0..r {
                    let w = trans[a * r + m];
                    if w == 0.0 {
                        continue;
                    }
                    for b in 0..r {
                        next[a * r + b] += w * cond[m * r + b];
                    }
                }
            }
            trans = next;
        }
        let mut table = vec![0.0; r * r];
        for a in 0..r {
            let pa = self.node_marginals[i].prob(a);
            for b in 0..r {
                table[a * r + b] = pa * trans[a * r + b];
            }
        }
        PairwiseDist::new(r, table).expect("path product of stochastic maps stays normalized")
    }

    /// Row-stochastic conditional `P(x_to | x_from)` for an existing edge.
    fn conditional(&self, from: usize, to: usize) -> Vec<f64> {
        let r = self.r;
        let joint = self
            .edge_marginals
            .get(&norm_edge(from, to))
            .expect("conditional requires an edge");
        let mut cond = vec![0.0; r * r];
        for a in 0..r {
            let pa = self.node_marginals[from].prob(a);
            for b in 0..r {
                let j = if from < to {
                    joint.prob(a, b)
                } else {
                    joint.prob(b, a)
                };
                cond[a * r + b] = if pa > 0.0 { j / pa } else { 0.0 };
            }
        }
        cond
    }

    /// Node sequence of the unique path from `i` to `j`, if connected.
    fn path_between(&self, i: usize, j: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.d];
        let mut queue = std::collections::VecDeque::new();
        prev[i] = i;
        queue.push_back(i);
        while let Some(u) = queue.pop_front() {
            if u == j {
                break;
            }
            for &v in &self.adjacency[u] {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[j] == usize::MAX {
            return None;
        }
        let mut path = vec![j];
        let mut cur = j;
        while cur != i {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Log-probability of one configuration under the factorization, in
    /// nats. A zero-probability configuration yields `-INFINITY`.
    pub fn log_likelihood(&self, x: &[usize]) -> f64 {
        assert_eq!(x.len(), self.d, "configuration length must equal d");
        let mut total = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let p = self.node_marginals[i].prob(xi);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += p.ln();
        }
        for (&(i, j), table) in &self.edge_marginals {
            let pij = table.prob(x[i], x[j]);
            if pij <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += pij.ln()
                - self.node_marginals[i].prob(x[i]).ln()
                - self.node_marginals[j].prob(x[j]).ln();
        }
        total
    }

    /// Log-probability through a directed factorization of this model.
    /// Equals `log_likelihood` for any valid orientation.
    pub fn directed_log_likelihood(&self, directed: &DirectedForest, x: &[usize]) -> f64 {
        assert_eq!(x.len(), self.d);
        let r = self.r;
        let mut total = 0.0;
        for &i in &directed.order {
            let p = match directed.parent[i] {
                None => self.node_marginals[i].prob(x[i]),
                Some(par) => self.conditional(par, i)[x[par] * r + x[i]],
            };
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += p.ln();
        }
        total
    }

    /// Orients the forest by choosing one root per component (the
    /// lowest-index node when `roots` is `None`) and pointing every other
    /// node at its parent.
    pub fn directed_decomposition(&self, roots: Option<&[usize]>) -> Result<DirectedForest> {
        let comp = self.component_ids();
        let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let chosen: Vec<usize> = match roots {
            Some(rs) => {
                let mut per_comp = vec![None; n_comp];
                for &root in rs {
                    if root >= self.d {
                        return Err(Error::InvalidRoots(format!("node {root} out of range")));
                    }
                    let c = comp[root];
                    if per_comp[c].is_some() {
                        return Err(Error::InvalidRoots(format!(
                            "two roots given for one component (second is node {root})"
                        )));
                    }
                    per_comp[c] = Some(root);
                }
                let missing = per_comp.iter().filter(|r| r.is_none()).count();
                if missing > 0 {
                    return Err(Error::InvalidRoots(format!(
                        "{missing} component(s) have no root"
                    )));
                }
                per_comp.into_iter().map(|r| r.unwrap()).collect()
            }
            None => {
                let mut per_comp = vec![usize::MAX; n_comp];
                for i in (0..self.d).rev() {
                    per_comp[comp[i]] = i;
                }
                per_comp
            }
        };

        let mut parent = vec![None; self.d];
        let mut order = Vec::with_capacity(self.d);
        let mut seen = vec![false; self.d];
        let mut queue = std::collections::VecDeque::new();
        let mut roots_sorted = chosen;
        roots_sorted.sort_unstable();
        for &root in &roots_sorted {
            seen[root] = true;
            queue.push_back(root);
            while let Some(u) = queue.pop_front() {
                order.push(u);
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some(u);
                        queue.push_back(v);
                    }
                }
            }
        }
        Ok(DirectedForest {
            parent,
            order,
            roots: roots_sorted,
        })
    }

    fn component_ids(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.d];
        let mut next = 0;
        for start in 0..self.d {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = next;
            while let Some(u) = stack.pop() {
                for &v in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    /// The reverse information projection of this model onto a fixed
    /// acyclic structure: the distribution Markov on `edges` that matches
    /// this model's node and pairwise marginals there, which minimizes
    /// `D(self || .)` over all distributions Markov on `edges`.
    pub fn project_onto_structure(&self, edges: &[(usize, usize)]) -> Result<ForestModel> {
        let mut uf = UnionFind::new(self.d);
        let mut with_tables = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= self.d || b >= self.d || a == b {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) is not a valid node pair"
                )));
            }
            let (i, j) = norm_edge(a, b);
            if !uf.union(i, j) {
                return Err(Error::NotAcyclic(i, j));
            }
            with_tables.push(((i, j), self.pairwise_marginal(i, j)));
        }
        ForestModel::new(self.node_marginals.clone(), with_tables)
    }

    /// Exact `D(p || q)` between two forest models over the same variables.
    ///
    /// Expectations of `q`'s edge terms under `p` are taken with `p`'s exact
    /// pairwise marginals, so the structures may differ arbitrarily.
    /// Returns `INFINITY` when `q` is not absolutely continuous w.r.t. `p`
    /// on the evaluated marginals.
    pub fn forest_kl(p: &ForestModel, q: &ForestModel) -> Result<f64> {
        if p.d != q.d || p.r != q.r {
            return Err(Error::DimensionMismatch(format!(
                "models must agree on (d, r): ({}, {}) vs ({}, {})",
                p.d, p.r, q.d, q.r
            )));
        }
        // E_p[log p] = sum_i -H(P_i) + sum_{e in E_p} I(P_e)
        let mut e_log_p = 0.0;
        for m in &p.node_marginals {
            e_log_p -= m.entropy();
        }
        for table in p.edge_marginals.values() {
            e_log_p += mutual_information(table);
        }
        // E_p[log q] needs p's marginals on q's nodes and edges.
        let mut e_log_q = 0.0;
        for i in 0..p.d {
            for x in 0..p.r {
                let w = p.node_marginals[i].prob(x);
                if w > 0.0 {
                    let qv = q.node_marginals[i].prob(x);
                    if qv <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    e_log_q += w * qv.ln();
                }
            }
        }
        for (&(i, j), qt) in &q.edge_marginals {
            let pm = p.pairwise_marginal(i, j);
            for x in 0..p.r {
                for y in 0..p.r {
                    let w = pm.prob(x, y);
                    if w > 0.0 {
                        let qv = qt.prob(x, y);
                        let qi = q.node_marginals[i].prob(x);
                        let qj = q.node_marginals[j].prob(y);
                        if qv <= 0.0 || qi <= 0.0 || qj <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        e_log_q += w * (qv.ln() - qi.ln() - qj.ln());
                    }
                }
            }
        }
        Ok((e_log_p - e_log_q).max(0.0))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)
            .map_err(|e| Error::io(format!("writing model to {}", path.display()), e))
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading model from {}", path.display()), e))?;
        ForestModel::from_json_str(&text)
    }
}

fn check_marginal_match(got: &NodeDist, expected: &NodeDist, node: usize) -> Result<()> {
    for (a, b) in got.probs().iter().zip(expected.probs().iter()) {
        if (a - b).abs() > TOL_CONSISTENCY {
            return Err(Error::InvalidDistribution(format!(
                "edge table marginal disagrees with node {node} marginal: {a:.17} vs {b:.17}"
            )));
        }
    }
    Ok(())
}

/// One parent pointer per node (roots have none) plus a traversal order in
/// which every parent precedes its children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedForest {
    pub parent: Vec<Option<usize>>,
    pub order: Vec<usize>,
    pub roots: Vec<usize>,
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelJson {
    d: usize,
    r: usize,
    edges: Vec<[usize; 2]>,
    node_marginals: Vec<Vec<f64>>,
    edge_marginals: BTreeMap<String, Vec<Vec<f64>>>,
}

impl Serialize for ForestModel {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let json = ModelJson {
            d: self.d,
            r: self.r,
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
            node_marginals: self
                .node_marginals
                .iter()
                .map(|m| m.probs().to_vec())
                .collect(),
            edge_marginals: self
                .edge_marginals
                .iter()
                .map(|(&(i, j), t)| (format!("{i}-{j}"), t.to_rows()))
                .collect(),
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ForestModel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = ModelJson::deserialize(deserializer)?;
        if json.node_marginals.len() != json.d {
            return Err(D::Error::custom(format!(
                "model declares d = {} but has {} node marginals",
                json.d,
                json.node_marginals.len()
            )));
        }
        let node_marginals: Vec<NodeDist> = json
            .node_marginals
            .into_iter()
            .map(NodeDist::new)
            .collect::<Result<_>>()
            .map_err(D::Error::custom)?;
        if node_marginals.iter().any(|m| m.r() != json.r) {
            return Err(D::Error::custom("node marginal length disagrees with r"));
        }
        let mut edges = Vec::new();
        for [i, j] in json.edges {
            let key = format!("{}-{}", i.min(j), i.max(j));
            let rows = json
                .edge_marginals
                .get(&key)
                .ok_or_else(|| D::Error::custom(format!("missing edge marginal {key}")))?;
            let table = PairwiseDist::from_rows(rows).map_err(D::Error::custom)?;
            edges.push(((i, j), table));
        }
        ForestModel::new(node_marginals, edges).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Exact joint tables for small d
// ---------------------------------------------------------------------------

/// Limit on `d` for operations that enumerate all of `X^d`.
pub const MAX_EXACT_D: usize = 12;

/// A dense joint distribution over `X^d`, indexed little-endian: variable
/// `i` contributes digit `(state / r^i) % r`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    d: usize,
    r: usize,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(d: usize, r: usize, probs: Vec<f64>) -> Result<Self> {
        if d < 2 || r < 2 {
            return Err(Error::InvalidParameter(
                "a joint table needs d >= 2 and r >= 2".into(),
            ));
        }
        let size = (r as u128).checked_pow(d as u32);
        match size {
            Some(s) if s == probs.len() as u128 => {}
            _ => {
                return Err(Error::DimensionMismatch(format!(
                    "joint table over r = {r}, d = {d} needs r^d entries, got {}",
                    probs.len()
                )))
            }
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidDistribution(
                "joint entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "joint entries must sum to 1, got {sum:.17}"
            )));
        }
        Ok(JointTable { d, r, probs })
    }

    /// Materializes a forest model as a dense joint (exponential in `d`).
    pub fn from_model(m: &ForestModel) -> Result<Self> {
        let size = (m.r() as u128).checked_pow(m.d() as u32);
        let size = match size {
            Some(s) if s <= (1 << 26) => s as usize,
            _ => {
                return Err(Error::TooLarge(format!(
                    "r^d state space for d = {}, r = {}",
                    m.d(),
                    m.r()
                )))
            }
        };
        let mut probs = vec![0.0; size];
        let mut state = vec![0usize; m.d()];
        for (s, slot) in probs.iter_mut().enumerate() {
            decode_state(s, m.r(), &mut state);
            let ll = m.log_likelihood(&state);
            *slot = if ll.is_finite() { ll.exp() } else { 0.0 };
        }
        JointTable::new(m.d(), m.r(), probs)
    }

    /// The empirical joint type of a sample matrix.
    pub fn from_samples(samples: &crate::empirical::SampleMatrix) -> Result<Self> {
        let (n, d, r) = (samples.n(), samples.d(), samples.r());
        let size = (r as u128).checked_pow(d as u32);
        let size = match size {
            Some(s) if s <= (1 << 26) => s as usize,
            _ => {
                return Err(Error::TooLarge(format!(
                    "r^d state space for d = {d}, r = {r}"
                )))
            }
        };
        let mut probs = vec![0.0; size];
        let w = 1.0 / n as f64;
        for l in 0..n {
            let mut idx = 0usize;
            let mut mult = 1usize;
            for i in 0..d {
                idx += samples.get(l, i) as usize * mult;
                mult *= r;
            }
            probs[idx] += w;
        }
        JointTable::new(d, r, probs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob_of(&self, state: &[usize]) -> f64 {
        debug_assert_eq!(state.len(), self.d);
        let mut idx = 0usize;
        let mut mult = 1usize;
        for &x in state {
            idx += x * mult;
            mult *= self.r;
        }
        self.probs[idx]
    }

    pub fn node_marginal(&self, i: usize) -> NodeDist {
        let mut acc = vec![0.0; self.r];
        let mut state = vec![0usize; self.d];
        for (s, &p) in self.probs.iter().enumerate() {
            decode_state(s, self.r, &mut state);
            acc[state[i]] += p;
        }
        NodeDist::new(normalize_exact(acc)).expect("marginal of a valid joint")
    }

    pub fn pairwise_marginal(&self, i: usize, j: usize) -> PairwiseDist {
        assert!(i != j && i < self.d && j < self.d);
        let mut acc = vec![0.0; self.r * self.r];
        let mut state = vec![0usize; self.d];
        for (s, &p) in self.probs.iter().enumerate() {
            decode_state(s, self.r, &mut state);
            acc[state[i] * self.r + state[j]] += p;
        }
        PairwiseDist::new(self.r, normalize_exact(acc)).expect("marginal of a valid joint")
    }

    /// `D(joint || model)` by state enumeration, in nats.
    pub fn kl_to_model(&self, m: &ForestModel) -> f64 {
        assert_eq!(self.d, m.d());
        assert_eq!(self.r, m.r());
        let mut total = 0.0;
        let mut state = vec![0usize; self.d];
        for (s, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            decode_state(s, self.r, &mut state);
            let ll = m.log_likelihood(&state);
            if !ll.is_finite() {
                return f64::INFINITY;
            }
            total += p * (p.ln() - ll);
        }
        total.max(0.0)
    }

    /// Marginal-matching projection of the joint onto an acyclic structure.
    pub fn project_onto_structure(&self, edges: &[(usize, usize)]) -> Result<ForestModel> {
        let mut uf = UnionFind::new(self.d);
        let mut with_tables = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= self.d || b >= self.d || a == b {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) is not a valid node pair"
                )));
            }
            let (i, j) = norm_edge(a, b);
            if !uf.union(i, j) {
                return Err(Error::NotAcyclic(i, j));
            }
            with_tables.push(((i, j), self.pairwise_marginal(i, j)));
        }
        let marginals = (0..self.d).map(|i| self.node_marginal(i)).collect();
        ForestModel::new(marginals, with_tables)
    }

    /// The forest-structured distribution closest to this joint in
    /// `D(joint || .)`: a max-weight spanning tree on exact pairwise mutual
    /// informations, pruned to the edges with strictly positive weight.
    ///
    /// Among equal-divergence optima this returns the one with the fewest
    /// edges; remaining ties are broken lexicographically by edge, which is
    /// a choice this library fixes (any total order would do).
    pub fn forest_projection(&self) -> Result<ForestModel> {
        if self.d > MAX_EXACT_D {
            return Err(Error::TooLarge(format!(
                "forest projection enumerates X^d exactly; d = {} exceeds {MAX_EXACT_D}",
                self.d
            )));
        }
        if self.probs.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidDistribution(
                "forest projection requires a strictly positive joint".into(),
            ));
        }
        let mut mi = crate::empirical::MiMatrix::new(self.d);
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                mi.set(i, j, mutual_information(&self.pairwise_marginal(i, j)));
            }
        }
        let ranking = crate::learn::kruskal_mwst(&mi)?;
        let kept: Vec<(usize, usize)> = ranking
            .edges()
            .iter()
            .zip(ranking.scores())
            .filter(|&(_, &score)| score > 1e-12)
            .map(|(&e, _)| e)
            .collect();
        self.project_onto_structure(&kept)
    }
}

fn decode_state(mut s: usize, r: usize, out: &mut [usize]) {
    for slot in out.iter_mut() {
        *slot = s % r;
        s /= r;
    }
}

/// Clamps accumulated roundoff so marginals pass the 1e-12 simplex gate.
fn normalize_exact(mut v: Vec<f64>) -> Vec<f64> {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && (sum - 1.0).abs() > 1e-15 {
        for x in &mut v {
            *x /= sum;
        }
    }
    v
}

/// Divergence between a dense joint and a forest model's own dense joint,
/// used when both sides are explicit tables.
pub fn joint_kl(p: &JointTable, q: &JointTable) -> f64 {
    assert_eq!(p.d, q.d);
    assert_eq!(p.r, q.r);
    let mut total = 0.0;
    for (&pv, &qv) in p.probs.iter().zip(q.probs.iter()) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return f64::INFINITY;
            }
            total += pv * (pv / qv).ln();
        }
    }
    total.max(0.0)
}
