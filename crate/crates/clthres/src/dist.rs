//! Discrete distributions over finite alphabets and their information measures.
//!
//! All quantities are in nats. Zero probabilities follow the usual
//! conventions `0 log 0 = 0` and `0 log(0/0) = 0`; a positive probability
//! against a zero reference signals infinite divergence through the return
//! value `f64::INFINITY` rather than an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for "sums to one" checks at construction time.
pub const TOL_CONSTRUCT: f64 = 1e-12;
/// Tolerance for marginal-consistency checks between stored tables.
pub const TOL_CONSISTENCY: f64 = 1e-10;
/// Tolerance against brute-force oracles in tests.
pub const TOL_ORACLE: f64 = 1e-9;
/// Mutual information this far below zero is floating-point noise and is
/// clamped to zero (mutual information is provably nonnegative).
pub const MI_NEG_TOL: f64 = 1e-12;

/// A distribution over a single variable with alphabet `{0, .., r-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeDist {
    probs: Vec<f64>,
}

impl NodeDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "alphabet size must be at least 2, got {}",
                probs.len()
            )));
        }
        validate_simplex(&probs)?;
        Ok(NodeDist { probs })
    }

    pub fn uniform(r: usize) -> Self {
        NodeDist {
            probs: vec![1.0 / r as f64; r],
        }
    }

    pub fn r(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.probs[x]
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `D(self || other)` in nats; `INFINITY` on an absolute-continuity
    /// violation.
    pub fn kl_to(&self, other: &NodeDist) -> f64 {
        assert_eq!(self.r(), other.r(), "alphabet sizes must match");
        let mut total = 0.0;
        for (&p, &q) in self.probs.iter().zip(other.probs.iter()) {
            if p > 0.0 {
                if q <= 0.0 {
                    return f64::INFINITY;
                }
                total += p * (p / q).ln();
            }
        }
        total.max(0.0)
    }
}

/// A joint distribution over a pair of variables, each on `{0, .., r-1}`.
///
/// The table is stored row-major: `table[x * r + y]` is the probability of
/// the first variable taking `x` and the second taking `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDist {
    r: usize,
    table: Vec<f64>,
}

impl PairwiseDist {
    pub fn new(r: usize, table: Vec<f64>) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidDistribution(format!(
                "alphabet size must be at least 2, got {r}"
            )));
        }
        if table.len() != r * r {
            return Err(Error::DimensionMismatch(format!(
                "pairwise table must have {} entries, got {}",
                r * r,
                table.len()
            )));
        }
        validate_simplex(&table)?;
        Ok(PairwiseDist { r, table })
    }

    /// Builds from a nested `r x r` matrix of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let mut table = Vec::with_capacity(r * r);
        for row in rows {
            if row.len() != r {
                return Err(Error::DimensionMismatch(format!(
                    "expected square table, row has {} entries for r = {r}",
                    row.len()
                )));
            }
            table.extend_from_slice(row);
        }
        PairwiseDist::new(r, table)
    }

    /// The independent coupling of two node distributions.
    pub fn product(px: &NodeDist, py: &NodeDist) -> Result<Self> {
        if px.r() != py.r() {
            return Err(Error::DimensionMismatch(
                "product factors must share one alphabet size".into(),
            ));
        }
        let r = px.r();
        let mut table = Vec::with_capacity(r * r);
        for x in 0..r {
            for y in 0..r {
                table.push(px.prob(x) * py.prob(y));
            }
        }
        PairwiseDist::new(r, table)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.r + y]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.r)
            .map(|x| self.table[x * self.r..(x + 1) * self.r].to_vec())
            .collect()
    }

    /// Marginal of the first (row) variable.
    pub fn row_marginal(&self) -> NodeDist {
        let probs = (0..self.r)
            .map(|x| (0..self.r).map(|y| self.prob(x, y)).sum())
            .collect();
        NodeDist { probs }
    }

    /// Marginal of the second (column) variable.
    pub fn col_marginal(&self) -> NodeDist {
        let probs = (0..self.r)
            .map(|y| (0..self.r).map(|x| self.prob(x, y)).sum())
            .collect();
        NodeDist { probs }
    }

    /// Swaps the roles of the two variables.
    pub fn transpose(&self) -> PairwiseDist {
        let mut table = vec![0.0; self.r * self.r];
        for x in 0..self.r {
            for y in 0..self.r {
                table[y * self.r + x] = self.prob(x, y);
            }
        }
        PairwiseDist { r: self.r, table }
    }

    pub fn min_prob(&self) -> f64 {
        self.table.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.table.iter().all(|&p| p > 0.0)
    }
}

#[derive(Serialize, Deserialize)]
struct PairwiseJson {
    r: usize,
    table: Vec<Vec<f64>>,
}

impl Serialize for PairwiseDist {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        PairwiseJson {
            r: self.r,
            table: self.to_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PairwiseDist {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = PairwiseJson::deserialize(deserializer)?;
        if json.table.len() != json.r {
            return Err(D::Error::custom("table row count disagrees with r"));
        }
        PairwiseDist::from_rows(&json.table).map_err(D::Error::custom)
    }
}

fn validate_simplex(probs: &[f64]) -> Result<()> {
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "probabilities must be finite and nonnegative, got {p}"
            )));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > TOL_CONSTRUCT {
        return Err(Error::InvalidDistribution(format!(
            "probabilities must sum to 1 within {TOL_CONSTRUCT:.0e}, got {sum:.17}"
        )));
    }
    Ok(())
}

/// Mutual information `I(p) = sum p(x,y) log(p(x,y) / (p_x(x) p_y(y)))` in
/// nats, with results inside floating-point noise of zero clamped to zero.
pub fn mutual_information(p: &PairwiseDist) -> f64 {
    let px = p.row_marginal();
    let py = p.col_marginal();
    let mut total = 0.0;
    for x in 0..p.r() {
        for y in 0..p.r() {
            let pxy = p.prob(x, y);
            if pxy > 0.0 {
                total += pxy * (pxy / (px.prob(x) * py.prob(y))).ln();
            }
        }
    }
    if total < 0.0 && total > -MI_NEG_TOL {
        0.0
    } else {
        total
    }
}

/// Mutual information of a flattened (row-major) `r x r` table.
///
/// The table does not have to be normalized: this is the natural extension
/// of the mutual-information formula to arbitrary positive vectors, with
/// marginals taken as row and column sums. Finite-difference probes and the
/// local solvers rely on this extension.
pub fn mutual_information_flat(table: &[f64], r: usize) -> f64 {
    debug_assert_eq!(table.len(), r * r);
    let mut row = vec![0.0; r];
    let mut col = vec![0.0; r];
    for x in 0..r {
        for y in 0..r {
            row[x] += table[x * r + y];
            col[y] += table[x * r + y];
        }
    }
    let mut total = 0.0;
    for x in 0..r {
        for y in 0..r {
            let q = table[x * r + y];
            if q > 0.0 {
                total += q * (q / (row[x] * col[y])).ln();
            }
        }
    }
    total
}

/// Kullback-Leibler divergence `D(p || q)` in nats.
///
/// Returns `INFINITY` when `p` puts mass where `q` does not.
pub fn kl_divergence(p: &PairwiseDist, q: &PairwiseDist) -> f64 {
    assert_eq!(p.r(), q.r(), "alphabet sizes must match");
    let mut total = 0.0;
    for (&pv, &qv) in p.table.iter().zip(q.table.iter()) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return f64::INFINITY;
            }
            total += pv * (pv / qv).ln();
        }
    }
    total.max(0.0)
}

/// Conditional divergence `D(p_{X|Y} || q_{X|Y})` weighted by `p`'s marginal
/// of the second variable.
///
/// Together with the marginal divergence this obeys the chain rule
/// `D(p || q) = conditional_kl(p, q) + D(p_Y || q_Y)`.
pub fn conditional_kl(p: &PairwiseDist, q: &PairwiseDist) -> f64 {
    assert_eq!(p.r(), q.r(), "alphabet sizes must match");
    let r = p.r();
    let py = p.col_marginal();
    let qy = q.col_marginal();
    let mut total = 0.0;
    for y in 0..r {
        let wy = py.prob(y);
        if wy <= 0.0 {
            continue;
        }
        for x in 0..r {
            let pc = p.prob(x, y) / wy;
            if pc > 0.0 {
                if qy.prob(y) <= 0.0 || q.prob(x, y) <= 0.0 {
                    return f64::INFINITY;
                }
                let qc = q.prob(x, y) / qy.prob(y);
                total += wy * pc * (pc / qc).ln();
            }
        }
    }
    total.max(0.0)
}
