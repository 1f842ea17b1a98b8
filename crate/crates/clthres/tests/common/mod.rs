//! Independent oracles for the acceptance suite: brute-force enumeration
//! and dense-grid minimizers that never touch the implementation paths
//! they check.

use clthres::{JointTable, MiMatrix, PairwiseDist};

/// Exact divergence between two dense joints by state enumeration.
pub fn joint_kl_oracle(p: &JointTable, q: &JointTable) -> f64 {
    let mut total = 0.0;
    for (&pv, &qv) in p.probs().iter().zip(q.probs()) {
        if pv > 0.0 {
            if qv <= 0.0 {
                return f64::INFINITY;
            }
            total += pv * (pv / qv).ln();
        }
    }
    total
}

/// Decodes a Pruefer sequence into tree edges on `d` nodes.
pub fn prufer_decode(seq: &[usize], d: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; d];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(d - 1);
    let mut used = vec![false; d];
    for &s in seq {
        let leaf = (0..d)
            .find(|&i| degree[i] == 1 && !used[i])
            .expect("a leaf exists");
        edges.push((leaf.min(s), leaf.max(s)));
        used[leaf] = true;
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..d).filter(|&i| degree[i] == 1 && !used[i]).collect();
    edges.push((rest[0].min(rest[1]), rest[0].max(rest[1])));
    edges
}

/// Maximum spanning-tree weight over all labeled trees, by enumerating
/// every Pruefer sequence.
pub fn max_tree_weight_exhaustive(mi: &MiMatrix) -> f64 {
    let d = mi.d();
    let total = (d as u64).pow((d - 2) as u32);
    let mut best = f64::NEG_INFINITY;
    let mut seq = vec![0usize; d - 2];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = (c % d as u64) as usize;
            c /= d as u64;
        }
        let w: f64 = prufer_decode(&seq, d)
            .iter()
            .map(|&(i, j)| mi.get(i, j))
            .sum();
        best = best.max(w);
    }
    best
}

/// Counts labeled forests on `d` nodes by brute force over all edge
/// subsets; returns counts indexed by edge count.
pub fn count_forests_by_edges(d: usize) -> Vec<u64> {
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let m = pairs.len();
    assert!(m <= 25, "enumeration over 2^{m} subsets");
    let mut counts = vec![0u64; d];
    'subset: for mask in 0u32..(1u32 << m) {
        let mut parent: Vec<usize> = (0..d).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let n = parent[c];
                parent[c] = r;
                c = n;
            }
            r
        }
        let mut edges = 0usize;
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if mask >> b & 1 == 1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri == rj {
                    continue 'subset;
                }
                parent[ri] = rj;
                edges += 1;
            }
        }
        counts[edges] += 1;
    }
    counts
}

/// Dense-grid minimizer of `D(qa (x) qb || p)` over binary product
/// distributions, step 1e-3 in both marginals.
pub fn under_rate_grid_oracle(p: &PairwiseDist) -> f64 {
    assert_eq!(p.r(), 2);
    let t = p.table();
    let mut best = f64::INFINITY;
    let steps = 999;
    for ia in 1..=steps {
        let a = ia as f64 / (steps + 1) as f64;
        for ib in 1..=steps {
            let b = ib as f64 / (steps + 1) as f64;
            let q = [a * b, a * (1.0 - b), (1.0 - a) * b, (1.0 - a) * (1.0 - b)];
            let mut div = 0.0;
            for (qv, &pv) in q.iter().zip(t) {
                div += qv * (qv / pv).ln();
            }
            best = best.min(div);
        }
    }
    best
}

/// Mutual information of the binary joint with marginals `(a, b)` and
/// coupling offset `t`: `[[ab + t, a(1-b) - t], [(1-a)b - t, ...]]`.
fn binary_mi(a: f64, b: f64, t: f64) -> f64 {
    let q = [
        a * b + t,
        a * (1.0 - b) - t,
        (1.0 - a) * b - t,
        (1.0 - a) * (1.0 - b) + t,
    ];
    let row = [q[0] + q[1], q[2] + q[3]];
    let col = [q[0] + q[2], q[1] + q[3]];
    let mut mi = 0.0;
    for (idx, &qv) in q.iter().enumerate() {
        if qv > 0.0 {
            mi += qv * (qv / (row[idx / 2] * col[idx % 2])).ln();
        }
    }
    mi
}

/// Dense-grid minimizer of `D(Q || p)` subject to `I(Q) >= level` for
/// binary `p`: grid over the marginals, and on each cell a bisection in
/// the coupling offset to sit exactly on the information level (both
/// signs). The base distribution's own marginals are included as a grid
/// point.
pub fn over_rate_grid_oracle(p: &PairwiseDist, level: f64) -> f64 {
    assert_eq!(p.r(), 2);
    let t = p.table();
    let pa = t[0] + t[1];
    let pb = t[0] + t[2];
    let mut best = f64::INFINITY;
    let steps = 480usize;
    let mut grid: Vec<f64> = (1..steps)
        .map(|i| 0.02 + (0.98 - 0.02) * i as f64 / steps as f64)
        .collect();
    grid.push(pa);
    grid.push(pb);

    let objective = |a: f64, b: f64, off: f64| -> f64 {
        let q = [
            a * b + off,
            a * (1.0 - b) - off,
            (1.0 - a) * b - off,
            (1.0 - a) * (1.0 - b) + off,
        ];
        let mut div = 0.0;
        for (qv, &pv) in q.iter().zip(t) {
            if *qv > 0.0 {
                div += qv * (qv / pv).ln();
            }
        }
        div
    };

    for &a in &grid {
        for &b in &grid {
            let t_hi = (a * (1.0 - b)).min((1.0 - a) * b);
            let t_lo = -(a * b).min((1.0 - a) * (1.0 - b));
            for (near, far) in [(0.0, t_hi), (0.0, t_lo)] {
                if binary_mi(a, b, far * 0.999_999) < level {
                    continue;
                }
                let (mut lo, mut hi) = (near, far * 0.999_999);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if binary_mi(a, b, mid) >= level {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                best = best.min(objective(a, b, hi));
            }
        }
    }
    best
}
