//! Forest structure learning: a max-weight spanning tree over empirical
//! mutual informations, followed by adaptive thresholding of the ranked
//! edge scores and a marginal-matching projection of the joint type onto
//! the surviving structure.
//!
//! The full pipeline is [`clthres`]; [`chow_liu`] stops after the ranking
//! step (equivalently, keeps all `d - 1` edges).

use crate::empirical::{all_empirical_mi, empirical_pairwise, MiMatrix, SampleMatrix};
use crate::error::{Error, Result};
use crate::forest::{norm_edge, ForestModel};
use crate::union_find::UnionFind;

/// A spanning tree's edges sorted by nonincreasing score.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRanking {
    edges: Vec<(usize, usize)>,
    scores: Vec<f64>,
}

impl EdgeRanking {
    /// Edges in rank order (highest score first), each as `(min, max)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Scores matching `edges`, nonincreasing.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.scores.iter().sum()
    }

    /// The top `k` edges as a sorted set.
    pub fn top_edges(&self, k: usize) -> Vec<(usize, usize)> {
        let mut top: Vec<(usize, usize)> = self.edges[..k.min(self.edges.len())].to_vec();
        top.sort_unstable();
        top
    }
}

/// Max-weight spanning tree by Kruskal's algorithm.
///
/// Candidate pairs are pre-sorted by (score descending, then `(min, max)`
/// lexicographically ascending), which makes tie-breaking deterministic:
/// with all-equal weights the result is the star rooted at node 0. The
/// output edges arrive already sorted by nonincreasing score.
pub fn kruskal_mwst(mi: &MiMatrix) -> Result<EdgeRanking> {
    let d = mi.d();
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "spanning tree needs at least 2 nodes, got {d}"
        )));
    }
    let mut pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    for &(i, j) in &pairs {
        if !mi.get(i, j).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight for pair ({i}, {j}) is not finite"
            )));
        }
    }
    pairs.sort_by(|&a, &b| {
        mi.get(b.0, b.1)
            .partial_cmp(&mi.get(a.0, a.1))
            .expect("weights are finite")
            .then(a.cmp(&b))
    });

    let mut uf = UnionFind::new(d);
    let mut edges = Vec::with_capacity(d - 1);
    let mut scores = Vec::with_capacity(d - 1);
    for (i, j) in pairs {
        if uf.union(i, j) {
            edges.push((i, j));
            scores.push(mi.get(i, j));
            if edges.len() == d - 1 {
                break;
            }
        }
    }
    Ok(EdgeRanking { edges, scores })
}

/// Number of ranked scores strictly above the threshold.
///
/// Scores exactly equal to the threshold are excluded; the cut may fall
/// anywhere, so this is right-continuous and nonincreasing in `eps`.
pub fn threshold_estimate(scores: &[f64], eps: f64) -> usize {
    debug_assert!(eps > 0.0, "threshold must be positive");
    debug_assert!(
        scores.windows(2).all(|w| w[0] >= w[1]),
        "scores must be nonincreasing"
    );
    scores.iter().take_while(|&&s| s > eps).count()
}

/// The regularization threshold as a function of the sample count.
///
/// The power schedule `eps_n = n^-beta` with `beta` in (0, 1) shrinks to
/// zero while `n * eps_n / log n` diverges, which is what consistent
/// pruning requires. The oracle schedule holds a constant threshold (half
/// the smallest true edge information, when known). Explicit sequences
/// support custom experiments; queries past the end of an explicit
/// sequence clamp to its last element.
#[derive(Debug, Clone, PartialEq)]
pub enum RegSchedule {
    Power { beta: f64 },
    Oracle { eps: f64 },
    Explicit(Vec<f64>),
}

impl RegSchedule {
    pub fn power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power schedule needs beta strictly inside (0, 1), got {beta}"
            )));
        }
        Ok(RegSchedule::Power { beta })
    }

    pub fn oracle(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "oracle schedule needs a positive threshold, got {eps}"
            )));
        }
        Ok(RegSchedule::Oracle { eps })
    }

    pub fn explicit(seq: Vec<f64>) -> Result<Self> {
        if seq.is_empty() || seq.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter(
                "explicit schedule needs a nonempty sequence of positive thresholds".into(),
            ));
        }
        Ok(RegSchedule::Explicit(seq))
    }

    /// The threshold applied at sample count `n`.
    pub fn eps(&self, n: usize) -> f64 {
        match self {
            RegSchedule::Power { beta } => (n as f64).powf(-beta),
            RegSchedule::Oracle { eps } => *eps,
            RegSchedule::Explicit(seq) => seq[(n - 1).min(seq.len() - 1)],
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            RegSchedule::Power { beta } => format!("power({beta})"),
            RegSchedule::Oracle { eps } => format!("oracle({eps})"),
            RegSchedule::Explicit(_) => "explicit".into(),
        }
    }
}

/// Output of the full learning pipeline.
#[derive(Debug, Clone)]
pub struct LearnedModel {
    ranking: EdgeRanking,
    k_hat: usize,
    eps: f64,
    model: ForestModel,
}

impl LearnedModel {
    pub fn ranking(&self) -> &EdgeRanking {
        &self.ranking
    }

    /// The estimated number of edges: ranked scores strictly above the
    /// threshold.
    pub fn k_hat(&self) -> usize {
        self.k_hat
    }

    /// The threshold that was applied.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The retained edges (top `k_hat` of the ranking), sorted.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        self.ranking.top_edges(self.k_hat)
    }

    /// The learned distribution: node and pairwise types on the retained
    /// structure.
    pub fn model(&self) -> &ForestModel {
        &self.model
    }

    pub fn into_model(self) -> ForestModel {
        self.model
    }
}

/// Steps 1-3 of the pipeline: pairwise types, empirical informations, and
/// the max-weight spanning tree ranking. Deterministic on fixed input.
pub fn chow_liu(s: &SampleMatrix) -> Result<EdgeRanking> {
    kruskal_mwst(&all_empirical_mi(s))
}

/// The full pipeline: rank edges by empirical mutual information, keep
/// those strictly above the schedule's threshold at this sample count, and
/// project the joint type onto the retained structure.
///
/// The projection has closed form: the learned model carries the empirical
/// node types at every node and the empirical pairwise types on retained
/// edges, which is exactly the minimizer of `D(type || .)` over
/// distributions Markov on the retained forest.
pub fn clthres(s: &SampleMatrix, sched: &RegSchedule) -> Result<LearnedModel> {
    let ranking = chow_liu(s)?;
    let eps = sched.eps(s.n());
    let k_hat = threshold_estimate(ranking.scores(), eps);

    let node_marginals = (0..s.d()).map(|i| s.node_type(i)).collect();
    let mut edges = Vec::with_capacity(k_hat);
    for &(i, j) in &ranking.edges()[..k_hat] {
        let (a, b) = norm_edge(i, j);
        edges.push(((a, b), empirical_pairwise(s, a, b).type_table().clone()));
    }
    let model = ForestModel::new(node_marginals, edges)?;
    Ok(LearnedModel {
        ranking,
        k_hat,
        eps,
        model,
    })
}
