//! Empirical statistics (types) computed from sample matrices: pairwise
//! co-occurrence types, node types, and the matrix of empirical mutual
//! informations that drives structure learning.
//!
//! Types are raw normalized counts. No smoothing is applied: zero-count
//! cells stay zero and are handled by the `0 log 0 = 0` convention, which
//! keeps empirical mutual informations faithful to the counts.

use rayon::prelude::*;

use crate::dist::{mutual_information, NodeDist, PairwiseDist};
use crate::error::{Error, Result};

/// An `n x d` matrix of categorical observations over `{0, .., r-1}`.
///
/// Symbols are stored as bytes, so alphabets up to 256 are supported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    r: usize,
    data: Vec<u8>,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, r: usize, data: Vec<u8>) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 and d >= 2, got n = {n}, d = {d}"
            )));
        }
        if !(2..=256).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "alphabet size must be in 2..=256, got {r}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "data length {} does not match n * d = {}",
                data.len(),
                n * d
            )));
        }
        if let Some(pos) = data.iter().position(|&s| (s as usize) >= r) {
            return Err(Error::InvalidParameter(format!(
                "symbol {} at sample {}, column {} is outside the alphabet 0..{r}",
                data[pos],
                pos / d,
                pos % d
            )));
        }
        Ok(SampleMatrix { n, d, r, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, sample: usize, var: usize) -> u8 {
        self.data[sample * self.d + var]
    }

    pub fn row(&self, sample: usize) -> &[u8] {
        &self.data[sample * self.d..(sample + 1) * self.d]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Selects a subset of rows (for splits and folds).
    pub fn select_rows(&self, rows: &[usize]) -> Result<SampleMatrix> {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &l in rows {
            if l >= self.n {
                return Err(Error::InvalidParameter(format!("row {l} out of range")));
            }
            data.extend_from_slice(self.row(l));
        }
        SampleMatrix::new(rows.len(), self.d, self.r, data)
    }

    /// The empirical marginal (node type) of one column, exact as a ratio
    /// of integer counts.
    pub fn node_type(&self, i: usize) -> NodeDist {
        let counts = self.node_counts(i);
        let n = self.n as f64;
        NodeDist::new(counts.iter().map(|&c| c as f64 / n).collect())
            .expect("counts normalize to a distribution")
    }

    pub fn node_counts(&self, i: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.r];
        for l in 0..self.n {
            counts[self.get(l, i) as usize] += 1;
        }
        counts
    }
}

/// The pairwise type of one column pair: co-occurrence counts normalized
/// by the sample count.
#[derive(Debug, Clone)]
pub struct EmpiricalPair {
    pair: (usize, usize),
    n: usize,
    counts: Vec<u64>,
    type_table: PairwiseDist,
}

impl EmpiricalPair {
    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Raw co-occurrence counts, row-major over `(x_i, x_j)`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The normalized type; every entry is an integer multiple of `1/n`.
    pub fn type_table(&self) -> &PairwiseDist {
        &self.type_table
    }

    /// Node type of the first coordinate, computed from integer row sums so
    /// it is exactly the column's node type regardless of the partner.
    pub fn x_type(&self) -> NodeDist {
        let r = self.type_table.r();
        let n = self.n as f64;
        let probs = (0..r)
            .map(|x| (0..r).map(|y| self.counts[x * r + y]).sum::<u64>() as f64 / n)
            .collect();
        NodeDist::new(probs).expect("counts normalize to a distribution")
    }

    /// Node type of the second coordinate; see `x_type`.
    pub fn y_type(&self) -> NodeDist {
        let r = self.type_table.r();
        let n = self.n as f64;
        let probs = (0..r)
            .map(|y| (0..r).map(|x| self.counts[x * r + y]).sum::<u64>() as f64 / n)
            .collect();
        NodeDist::new(probs).expect("counts normalize to a distribution")
    }
}

/// Pairwise type of columns `(i, j)`; rows of the table index `x_i`.
pub fn empirical_pairwise(s: &SampleMatrix, i: usize, j: usize) -> EmpiricalPair {
    assert!(
        i != j && i < s.d() && j < s.d(),
        "need two distinct columns"
    );
    let r = s.r();
    let mut counts = vec![0u64; r * r];
    for l in 0..s.n() {
        counts[s.get(l, i) as usize * r + s.get(l, j) as usize] += 1;
    }
    let n = s.n() as f64;
    let table: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    EmpiricalPair {
        pair: (i, j),
        n: s.n(),
        type_table: PairwiseDist::new(r, table).expect("counts normalize to a distribution"),
        counts,
    }
}

/// Symmetric matrix of pairwise scores with an ignored diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix {
    d: usize,
    vals: Vec<f64>,
}

impl MiMatrix {
    pub fn new(d: usize) -> Self {
        MiMatrix {
            d,
            vals: vec![0.0; d * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.vals[i * self.d + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.vals[i * self.d + j] = v;
        self.vals[j * self.d + i] = v;
    }
}

/// Empirical mutual information for every column pair, in nats.
///
/// Pairs are independent of one another, so the d(d-1)/2 computations run
/// in parallel; each pair accumulates counts in one pass over the samples.
pub fn all_empirical_mi(s: &SampleMatrix) -> MiMatrix {
    let d = s.d();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| mutual_information(empirical_pairwise(s, i, j).type_table()))
        .collect();
    let mut mi = MiMatrix::new(d);
    for (&(i, j), &v) in pairs.iter().zip(scores.iter()) {
        mi.set(i, j, v);
    }
    mi
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

/// Reads a sample matrix from CSV: one sample per line, integer symbols.
///
/// With `r = None` the alphabet size is inferred as `max symbol + 1` (at
/// least 2); an explicit `r` turns out-of-range symbols into errors.
/// Parse failures report the 1-based line and column.
pub fn read_samples_csv(
    path: &std::path::Path,
    has_header: bool,
    r: Option<usize>,
) -> Result<SampleMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(file);

    let mut data: Vec<u8> = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    let mut max_symbol = 0usize;
    let offset = if has_header { 2 } else { 1 };
    for (rec_idx, record) in reader.records().enumerate() {
        let line = rec_idx + offset;
        let record = record.map_err(|e| Error::csv(format!("line {line}"), e))?;
        if n == 0 {
            d = record.len();
            if d < 2 {
                return Err(Error::Parse {
                    line,
                    column: None,
                    msg: format!("need at least 2 columns, found {d}"),
                });
            }
        } else if record.len() != d {
            return Err(Error::Parse {
                line,
                column: None,
                msg: format!("expected {d} columns, found {}", record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            let sym: usize = field.trim().parse().map_err(|_| Error::Parse {
                line,
                column: Some(col + 1),
                msg: format!("expected a nonnegative integer symbol, found {field:?}"),
            })?;
            if sym > 255 || r.is_some_and(|r| sym >= r) {
                return Err(Error::Parse {
                    line,
                    column: Some(col + 1),
                    msg: format!(
                        "symbol {sym} outside the alphabet (r = {})",
                        r.map_or("<=256".to_string(), |r| r.to_string())
                    ),
                });
            }
            max_symbol = max_symbol.max(sym);
            data.push(sym as u8);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse {
            line: offset - 1,
            column: None,
            msg: "no sample rows".into(),
        });
    }
    let r = r.unwrap_or((max_symbol + 1).max(2));
    SampleMatrix::new(n, d, r, data)
}

/// Writes samples as plain CSV, optionally with a `x0,x1,...` header.
pub fn write_samples_csv(
    s: &SampleMatrix,
    path: &std::path::Path,
    with_header: bool,
) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut writer = csv::Writer::from_writer(file);
    let ctx = || format!("writing {}", path.display());
    if with_header {
        let header: Vec<String> = (0..s.d()).map(|i| format!("x{i}")).collect();
        writer
            .write_record(&header)
            .map_err(|e| Error::csv(ctx(), e))?;
    }
    let mut row = Vec::with_capacity(s.d());
    for l in 0..s.n() {
        row.clear();
        row.extend(s.row(l).iter().map(|v| v.to_string()));
        writer
            .write_record(&row)
            .map_err(|e| Error::csv(ctx(), e))?;
    }
    writer.flush().map_err(|e| Error::io(ctx(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn from_rows(rows: &[&[u8]], r: usize) -> SampleMatrix {
        let d = rows[0].len();
        let data: Vec<u8> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SampleMatrix::new(rows.len(), d, r, data).unwrap()
    }

    #[test]
    fn pairwise_type_direct_count() {
        let s = from_rows(&[&[0, 0], &[0, 1], &[1, 1], &[1, 1]], 2);
        let pair = empirical_pairwise(&s, 0, 1);
        assert_eq!(pair.type_table().table(), &[0.25, 0.25, 0.0, 0.5]);
    }

    #[test]
    fn constant_columns_are_a_point_mass() {
        let s = from_rows(&[&[1, 0], &[1, 0], &[1, 0]], 2);
        let pair = empirical_pairwise(&s, 0, 1);
        assert_eq!(pair.type_table().prob(1, 0), 1.0);
    }

    #[test]
    fn type_entries_are_multiples_of_one_over_n() {
        let s = from_rows(
            &[&[0, 1, 1], &[1, 0, 1], &[0, 0, 0], &[1, 1, 0], &[0, 1, 0]],
            2,
        );
        let pair = empirical_pairwise(&s, 0, 2);
        for &v in pair.type_table().table() {
            let scaled = v * s.n() as f64;
            assert!((scaled - scaled.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn node_types_agree_across_partners_exactly() {
        let s = from_rows(
            &[
                &[0, 1, 1, 0],
                &[1, 0, 1, 1],
                &[0, 0, 0, 1],
                &[1, 1, 0, 0],
                &[0, 1, 0, 1],
                &[1, 1, 1, 0],
                &[0, 0, 1, 1],
            ],
            2,
        );
        let direct = s.node_type(1);
        for other in [0, 2, 3] {
            let via_pair = empirical_pairwise(&s, 1, other).x_type();
            assert_eq!(via_pair.probs(), direct.probs());
            let via_pair_rev = empirical_pairwise(&s, other, 1).y_type();
            assert_eq!(via_pair_rev.probs(), direct.probs());
        }
    }

    #[test]
    fn large_sample_type_approaches_truth() {
        use crate::dist::PairwiseDist;
        use rand::{Rng, SeedableRng};
        let truth = PairwiseDist::new(2, vec![0.35, 0.15, 0.15, 0.35]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(424242);
        let n = 10_000;
        let mut data = Vec::with_capacity(n * 2);
        for _ in 0..n {
            let u: f64 = rng.random();
            let cell = match u {
                u if u < 0.35 => (0, 0),
                u if u < 0.50 => (0, 1),
                u if u < 0.65 => (1, 0),
                _ => (1, 1),
            };
            data.push(cell.0);
            data.push(cell.1);
        }
        let s = SampleMatrix::new(n, 2, 2, data).unwrap();
        let pair = empirical_pairwise(&s, 0, 1);
        let linf = pair
            .type_table()
            .table()
            .iter()
            .zip(truth.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(linf < 0.05, "l-infinity distance {linf} too large");
    }

    #[test]
    fn mi_matrix_perfect_correlation() {
        let s = from_rows(&[&[0, 0], &[1, 1], &[0, 0], &[1, 1]], 2);
        let mi = all_empirical_mi(&s);
        assert_abs_diff_eq!(mi.get(0, 1), std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn mi_of_independent_columns_is_small_at_large_n() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let data: Vec<u8> = (0..2 * n).map(|_| rng.random_range(0..2) as u8).collect();
        let s = SampleMatrix::new(n, 2, 2, data).unwrap();
        let mi = all_empirical_mi(&s);
        assert!(
            mi.get(0, 1) <= 0.02,
            "empirical MI {} too large",
            mi.get(0, 1)
        );
    }

    #[test]
    fn mi_matrix_is_permutation_equivariant() {
        let rows: Vec<Vec<u8>> = vec![
            vec![0, 1, 1],
            vec![1, 0, 1],
            vec![0, 0, 0],
            vec![1, 1, 0],
            vec![0, 1, 1],
            vec![1, 1, 1],
        ];
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = from_rows(&refs, 2);
        // Permute columns as 0 -> 2, 1 -> 0, 2 -> 1.
        let perm = [2usize, 0, 1];
        let permuted_rows: Vec<Vec<u8>> = rows
            .iter()
            .map(|row| {
                let mut out = vec![0u8; 3];
                for (src, &dst) in perm.iter().enumerate() {
                    out[dst] = row[src];
                }
                out
            })
            .collect();
        let refs2: Vec<&[u8]> = permuted_rows.iter().map(|r| r.as_slice()).collect();
        let sp = from_rows(&refs2, 2);
        let mi = all_empirical_mi(&s);
        let mip = all_empirical_mi(&sp);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_eq!(mi.get(i, j), mip.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let s = from_rows(&[&[0, 1, 2], &[2, 0, 1], &[1, 1, 1]], 3);
        write_samples_csv(&s, &path, true).unwrap();
        let back = read_samples_csv(&path, true, Some(3)).unwrap();
        assert_eq!(back, s);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "0,1\n1,x\n").unwrap();
        let err = read_samples_csv(&bad, false, Some(2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "error should carry the line: {msg}");

        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "0,1\n1\n").unwrap();
        assert!(read_samples_csv(&ragged, false, Some(2)).is_err());
    }

    #[test]
    fn rejects_out_of_alphabet_symbols() {
        assert!(SampleMatrix::new(2, 2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(SampleMatrix::new(0, 2, 2, vec![]).is_err());
    }
}
