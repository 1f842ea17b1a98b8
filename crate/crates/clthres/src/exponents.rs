//! Numerical rate-function machinery for the thresholded learner's error
//! events: local curvature of mutual information, the eigenvalue solution
//! of the overestimation exponent's dual program, constrained divergence
//! minimizations, the local quadratic approximation of KL divergence, and
//! sample-complexity converse calculators.
//!
//! Conventions: a pairwise table is flattened row-major, so entry `(x, y)`
//! sits at index `x * r + y`; all information quantities are in nats.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;

use crate::dist::{kl_divergence, mutual_information, mutual_information_flat, PairwiseDist};
use crate::error::{Error, Result};

/// Inputs with mutual information below this are treated as product
/// distributions.
pub const PRODUCT_TOL: f64 = 1e-10;

/// Local curvature of the information functional at a pairwise
/// distribution: the diagonal of reciprocal probabilities that weights the
/// divergence locally, and the Hessian of mutual information in the flat
/// coordinates.
#[derive(Debug, Clone)]
pub struct LocalCurvature {
    pi_diag: Vec<f64>,
    hessian: DMatrix<f64>,
}

impl LocalCurvature {
    /// Diagonal entries `1 / p(x, y)` in flat order.
    pub fn pi_diag(&self) -> &[f64] {
        &self.pi_diag
    }

    /// Hessian of `I` as a function of the flattened joint, evaluated at
    /// the base distribution. Symmetric; indefinite in general.
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }
}

/// Analytic Hessian of mutual information at `p`.
///
/// With row sums `R` and column sums `C`, the second derivative with
/// respect to entries `(a, b)` and `(c, d)` is
/// `[ (a,b)=(c,d) ] / p(a,b) - [ a=c ] / R(a) - [ b=d ] / C(b)`.
pub fn mi_hessian(p: &PairwiseDist) -> Result<LocalCurvature> {
    if !p.is_strictly_positive() {
        return Err(Error::InvalidParameter(
            "curvature needs a strictly positive distribution".into(),
        ));
    }
    let r = p.r();
    let n = r * r;
    let row = p.row_marginal();
    let col = p.col_marginal();
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    for a in 0..r {
        for b in 0..r {
            let i = a * r + b;
            for c in 0..r {
                for d in 0..r {
                    let j = c * r + d;
                    let mut v = 0.0;
                    if i == j {
                        v += 1.0 / p.prob(a, b);
                    }
                    if a == c {
                        v -= 1.0 / row.prob(a);
                    }
                    if b == d {
                        v -= 1.0 / col.prob(b);
                    }
                    hessian[(i, j)] = v;
                }
            }
        }
    }
    let pi_diag = p.table().iter().map(|&v| 1.0 / v).collect();
    Ok(LocalCurvature { pi_diag, hessian })
}

/// The dual optimum of the overestimation exponent's local semidefinite
/// program, computed through its eigenvalue form: the reciprocal of the
/// largest eigenvalue of `Pi^-1/2 H Pi^-1/2`.
///
/// For every strictly positive product distribution this equals 1: the
/// matrix `I - Pi^-1/2 H Pi^-1/2` is positive semidefinite with an
/// eigenvalue at zero.
pub fn mu_star(p: &PairwiseDist) -> Result<f64> {
    if mutual_information(p) >= PRODUCT_TOL {
        return Err(Error::InvalidParameter(format!(
            "mu* is defined at product distributions; input has I = {:.3e}",
            mutual_information(p)
        )));
    }
    let curv = mi_hessian(p)?;
    let s = whitened_hessian(&curv);
    let eig = s.symmetric_eigenvalues();
    let lambda_max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::Degenerate(format!(
            "whitened Hessian has no positive eigenvalue (max {lambda_max:.3e})"
        )));
    }
    Ok(1.0 / lambda_max)
}

/// `Pi^-1/2 H Pi^-1/2`, i.e. `diag(sqrt p) H diag(sqrt p)`.
pub(crate) fn whitened_hessian(curv: &LocalCurvature) -> DMatrix<f64> {
    let n = curv.pi_diag.len();
    let sqrt_p: Vec<f64> = curv.pi_diag.iter().map(|&x| (1.0 / x).sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| sqrt_p[i] * curv.hessian[(i, j)] * sqrt_p[j])
}

/// Result of a rate-function minimization.
#[derive(Debug, Clone)]
pub struct RateFunctionResult {
    /// The minimized divergence, in nats.
    pub value: f64,
    /// The minimizing distribution.
    pub argmin: PairwiseDist,
    /// Total inner iterations across all starts.
    pub iterations: usize,
    /// First-order stationarity residual at the reported minimizer.
    pub grad_norm: f64,
    /// True when global optimality rests on multi-start local search only
    /// (alphabets where no dense-grid check is feasible, i.e. r > 2).
    pub local_only: bool,
}

/// The underestimation rate function at level zero: the smallest divergence
/// `D(Q || p)` over product distributions `Q = q_x (x) q_y`.
///
/// Solved by alternating closed-form minimizations over the two factors
/// from multiple starts; each half-step decreases the objective, so the
/// iteration converges to a stationary pair.
pub fn underestimation_rate(p: &PairwiseDist) -> Result<RateFunctionResult> {
    if !p.is_strictly_positive() {
        return Err(Error::InvalidParameter(
            "rate function needs a strictly positive distribution".into(),
        ));
    }
    let r = p.r();
    let ln_p: Vec<f64> = p.table().iter().map(|&v| v.ln()).collect();

    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = vec![
        (
            p.row_marginal().probs().to_vec(),
            p.col_marginal().probs().to_vec(),
        ),
        (vec![1.0 / r as f64; r], vec![1.0 / r as f64; r]),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0001);
    while starts.len() < 20 {
        starts.push((random_simplex(r, &mut rng), random_simplex(r, &mut rng)));
    }

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut total_iters = 0usize;
    for (mut qx, mut qy) in starts {
        let mut prev = product_div(&qx, &qy, &ln_p);
        for _ in 0..500 {
            total_iters += 1;
            qx = factor_update(&qy, &ln_p, r, true);
            qy = factor_update(&qx, &ln_p, r, false);
            let cur = product_div(&qx, &qy, &ln_p);
            if (prev - cur).abs() < 1e-13 {
                prev = cur;
                break;
            }
            prev = cur;
        }
        if best.as_ref().is_none_or(|b| prev < b.0) {
            best = Some((prev, qx, qy));
        }
    }
    let (value, qx, qy) = best.expect("at least one start");
    let grad_norm = product_grad_norm(&qx, &qy, &ln_p);
    let argmin = outer(&qx, &qy)?;
    Ok(RateFunctionResult {
        value: value.max(0.0),
        argmin,
        iterations: total_iters,
        grad_norm,
        local_only: r > 2,
    })
}

/// `D(qx (x) qy || p)` given `ln p`.
fn product_div(qx: &[f64], qy: &[f64], ln_p: &[f64]) -> f64 {
    let r = qx.len();
    let mut total = 0.0;
    for (x, &ax) in qx.iter().enumerate() {
        for (y, &ay) in qy.iter().enumerate() {
            let q = ax * ay;
            if q > 0.0 {
                total += q * (q.ln() - ln_p[x * r + y]);
            }
        }
    }
    total
}

/// Exact minimizer over one factor with the other held fixed:
/// `q(x) proportional to exp( sum_y other(y) ln p(x, y) )`.
fn factor_update(other: &[f64], ln_p: &[f64], r: usize, over_rows: bool) -> Vec<f64> {
    let mut logits = vec![0.0; r];
    for (i, logit) in logits.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &w) in other.iter().enumerate() {
            let idx = if over_rows { i * r + j } else { j * r + i };
            acc += w * ln_p[idx];
        }
        *logit = acc;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Norm of the simplex-tangent gradient of `D(qx (x) qy || p)` in both
/// factors.
fn product_grad_norm(qx: &[f64], qy: &[f64], ln_p: &[f64]) -> f64 {
    let r = qx.len();
    let mut gx = vec![0.0; r];
    let mut gy = vec![0.0; r];
    for x in 0..r {
        for y in 0..r {
            let term = (qx[x] * qy[y]).max(1e-300).ln() + 1.0 - ln_p[x * r + y];
            gx[x] += qy[y] * term;
            gy[y] += qx[x] * term;
        }
    }
    center(&mut gx);
    center(&mut gy);
    (gx.iter().map(|v| v * v).sum::<f64>() + gy.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in v {
        *x -= mean;
    }
}

fn random_simplex(r: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..r)
        .map(|_| -rng.random::<f64>().max(1e-12).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|&v| v / sum).collect()
}

fn outer(qx: &[f64], qy: &[f64]) -> Result<PairwiseDist> {
    let r = qx.len();
    let mut table = Vec::with_capacity(r * r);
    for &ax in qx {
        for &ay in qy {
            table.push(ax * ay);
        }
    }
    let sum: f64 = table.iter().sum();
    if (sum - 1.0).abs() > 1e-13 {
        for v in &mut table {
            *v /= sum;
        }
    }
    PairwiseDist::new(r, table)
}

/// The underestimation rate at a general level: the smallest divergence
/// `D(Q || p)` over joints with `I(Q) <= a`. Nonincreasing in `a`, zero
/// once `a` reaches `I(p)`, and equal to [`underestimation_rate`] at
/// `a = 0`.
///
/// For `a > 0` the minimizer sits on the information level set, found by
/// descent with feasibility restored toward a product anchor.
pub fn underestimation_rate_at(p: &PairwiseDist, a: f64) -> Result<RateFunctionResult> {
    if a < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "level must be nonnegative, got {a}"
        )));
    }
    let base = underestimation_rate(p)?;
    if a == 0.0 {
        return Ok(base);
    }
    if mutual_information(p) <= a {
        // p itself is feasible.
        return Ok(RateFunctionResult {
            value: 0.0,
            argmin: p.clone(),
            iterations: base.iterations,
            grad_norm: 0.0,
            local_only: p.r() > 2,
        });
    }
    let r = p.r();
    let target = p.table().to_vec();
    // Product anchor: the level-zero solution, strictly feasible.
    let anchor = base.argmin.table().to_vec();
    // Start on the level set along the anchor -> p segment (information
    // rises continuously from ~0 to I(p) along it).
    let seg = |t: f64| -> Vec<f64> {
        let mut q: Vec<f64> = anchor
            .iter()
            .zip(&target)
            .map(|(&av, &pv)| (1.0 - t) * av + t * pv)
            .collect();
        floor_and_normalize(&mut q);
        q
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mutual_information_flat(&seg(mid), r) <= a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut q = seg(lo);
    let mut cur = div_flat(&q, &target);
    let mut iterations = base.iterations;
    for _ in 0..500 {
        iterations += 1;
        let mut grad: Vec<f64> = q
            .iter()
            .zip(&target)
            .map(|(&qv, &pv)| (qv.max(1e-300) / pv).ln() + 1.0)
            .collect();
        center(&mut grad);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-12 {
            break;
        }
        let mut step = 0.25 / gnorm.max(1.0);
        let mut improved = false;
        while step > 1e-14 {
            let mut cand: Vec<f64> = q.iter().zip(&grad).map(|(qv, g)| qv - step * g).collect();
            project_to_simplex(&mut cand);
            floor_and_normalize(&mut cand);
            let cand = if mutual_information_flat(&cand, r) <= a {
                cand
            } else {
                // Pull back toward the product anchor until feasible.
                let pull = |t: f64| -> Vec<f64> {
                    let mut v: Vec<f64> = cand
                        .iter()
                        .zip(&anchor)
                        .map(|(&cv, &av)| (1.0 - t) * cv + t * av)
                        .collect();
                    floor_and_normalize(&mut v);
                    v
                };
                let (mut plo, mut phi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (plo + phi);
                    if mutual_information_flat(&pull(mid), r) <= a {
                        phi = mid;
                    } else {
                        plo = mid;
                    }
                }
                pull(phi)
            };
            let val = div_flat(&cand, &target);
            if val < cur - 1e-15 {
                q = cand;
                cur = val;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let grad_norm = kkt_residual(&q, &target, r);
    Ok(RateFunctionResult {
        value: cur.min(base.value).max(0.0),
        argmin: PairwiseDist::new(r, q)?,
        iterations,
        grad_norm,
        local_only: r > 2,
    })
}

/// Overestimation rate with its quadratic surrogate.
#[derive(Debug, Clone)]
pub struct OverestimationRate {
    pub rate: RateFunctionResult,
    /// Exact optimum of the local quadratic program `min 1/2 z' Pi z`
    /// subject to `1/2 z' H z >= b` on the zero-sum subspace. By weak
    /// duality it is at least `mu* b`.
    pub quadratic_surrogate: f64,
}

/// The overestimation rate function: the smallest divergence `D(Q || p)`
/// over joints with `I(Q) >= b`, for a product base `p` and a small level
/// `b`.
///
/// Solved by projected multi-start local search. Each start is a feasible
/// point with `I = b` found by bisection along a mutual-information-raising
/// direction; descent steps project back to the simplex and restore
/// feasibility by pulling toward a high-information anchor. The reported
/// minimum is the best across starts (ties resolve to the earliest start).
pub fn overestimation_rate(p: &PairwiseDist, b: f64) -> Result<OverestimationRate> {
    if mutual_information(p) >= PRODUCT_TOL {
        return Err(Error::InvalidParameter(
            "overestimation rate is defined at product distributions".into(),
        ));
    }
    if !p.is_strictly_positive() {
        return Err(Error::InvalidParameter(
            "rate function needs a strictly positive distribution".into(),
        ));
    }
    if !(b > 0.0 && b <= 0.05) {
        return Err(Error::InvalidParameter(format!(
            "level must lie in (0, 0.05] nats, got {b}"
        )));
    }
    let r = p.r();
    let n = r * r;
    let base = p.table().to_vec();

    // Anchor with high information: a slightly smoothed matching coupling.
    let anchor = {
        let mut a = vec![1e-3 / (n as f64 - r as f64).max(1.0); n];
        for x in 0..r {
            a[x * r + x] = (1.0 - 1e-3) / r as f64;
        }
        normalize(&mut a);
        a
    };
    let anchor_mi = mutual_information_flat(&anchor, r);
    if anchor_mi <= b {
        return Err(Error::Degenerate(format!(
            "anchor information {anchor_mi:.3e} does not exceed the level {b:.3e}"
        )));
    }

    // Multi-start: marginal-preserving tilts (rank-one, zero-sum in both
    // factors) plus mixtures toward the anchor.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for s in 0..20 {
        let dir: Vec<f64> = if s < 10 {
            let u = centered_unit(r, &mut rng);
            let v = centered_unit(r, &mut rng);
            let mut d = vec![0.0; n];
            for x in 0..r {
                for y in 0..r {
                    d[x * r + y] = u[x] * v[y];
                }
            }
            d
        } else {
            anchor.iter().zip(&base).map(|(a, p)| a - p).collect()
        };
        if let Some(q0) = bisect_to_level(&base, &dir, b, r) {
            starts.push(q0);
        }
    }
    if starts.is_empty() {
        starts.push(bisect_segment(&base, &anchor, b, r));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut total_iters = 0usize;
    for mut q in starts {
        let mut cur = div_flat(&q, &base);
        for _ in 0..500 {
            total_iters += 1;
            let mut grad: Vec<f64> = q
                .iter()
                .zip(&base)
                .map(|(&qv, &pv)| (qv.max(1e-300) / pv).ln() + 1.0)
                .collect();
            center(&mut grad);
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm < 1e-12 {
                break;
            }
            let mut step = 0.25 / gnorm.max(1.0);
            let mut improved = false;
            while step > 1e-14 {
                let mut cand: Vec<f64> = q.iter().zip(&grad).map(|(qv, g)| qv - step * g).collect();
                project_to_simplex(&mut cand);
                floor_and_normalize(&mut cand);
                let cand = if mutual_information_flat(&cand, r) >= b {
                    cand
                } else {
                    bisect_segment(&cand, &anchor, b, r)
                };
                let val = div_flat(&cand, &base);
                if val < cur - 1e-15 {
                    q = cand;
                    cur = val;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| cur < b.0) {
            best = Some((cur, q));
        }
    }
    let (value, q) = best.expect("at least one start");
    let grad_norm = kkt_residual(&q, &base, r);
    let argmin = PairwiseDist::new(r, q)?;
    let rate = RateFunctionResult {
        value: value.max(0.0),
        argmin,
        iterations: total_iters,
        grad_norm,
        local_only: r > 2,
    };
    let quadratic_surrogate = quadratic_surrogate(p, b)?;
    Ok(OverestimationRate {
        rate,
        quadratic_surrogate,
    })
}

/// Exact solution of the local quadratic program on the zero-sum subspace:
/// `b / lambda_max` where `lambda_max` is the top generalized eigenvalue of
/// `(H, Pi)` restricted to `{z : z' 1 = 0}`.
fn quadratic_surrogate(p: &PairwiseDist, b: f64) -> Result<f64> {
    let curv = mi_hessian(p)?;
    let n = p.r() * p.r();
    let basis = helmert_basis(n);
    let h = &curv.hessian;
    let pi = DMatrix::from_fn(n, n, |i, j| if i == j { curv.pi_diag[i] } else { 0.0 });
    let h_t = basis.transpose() * h * &basis;
    let pi_t = basis.transpose() * pi * &basis;
    let chol = nalgebra::Cholesky::new(pi_t).ok_or_else(|| {
        Error::Degenerate("restricted weight matrix not positive definite".into())
    })?;
    // L^-1 H L^-T, symmetric.
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&h_t)
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let y = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let sym = (&y + y.transpose()) * 0.5;
    let lambda_max = sym
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::Degenerate(
            "no information-increasing direction in the tangent space".into(),
        ));
    }
    Ok(b / lambda_max)
}

/// Orthonormal basis of `{z : z' 1 = 0}` as the columns of a Helmert-style
/// matrix.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, col| {
        let k = col + 1;
        let denom = (k as f64 * (k + 1) as f64).sqrt();
        if i < k {
            1.0 / denom
        } else if i == k {
            -(k as f64) / denom
        } else {
            0.0
        }
    })
}

fn div_flat(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&qv, _)| qv > 0.0)
        .map(|(&qv, &pv)| qv * (qv / pv).ln())
        .sum()
}

fn centered_unit(r: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..r).map(|_| rng.random::<f64>() - 0.5).collect();
        center(&mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            for x in &mut v {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Walks `p + t dir` to the largest feasible tilt and bisects to `I = b`.
/// Returns `None` when the direction cannot reach the level.
fn bisect_to_level(p: &[f64], dir: &[f64], b: f64, r: usize) -> Option<Vec<f64>> {
    // Largest t keeping all entries at least a sliver positive.
    let mut t_max = f64::INFINITY;
    for (&pv, &dv) in p.iter().zip(dir) {
        if dv < 0.0 {
            t_max = t_max.min(-0.999 * pv / dv);
        }
    }
    if !t_max.is_finite() || t_max <= 0.0 {
        return None;
    }
    let at = |t: f64| -> Vec<f64> {
        let mut q: Vec<f64> = p.iter().zip(dir).map(|(&pv, &dv)| pv + t * dv).collect();
        floor_and_normalize(&mut q);
        q
    };
    if mutual_information_flat(&at(t_max), r) < b {
        return None;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mutual_information_flat(&at(mid), r) >= b {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(at(hi))
}

/// Bisection along the segment from an infeasible point to a feasible
/// anchor, landing just on the feasible side of `I = b`.
fn bisect_segment(from: &[f64], anchor: &[f64], b: f64, r: usize) -> Vec<f64> {
    let at = |t: f64| -> Vec<f64> {
        let mut q: Vec<f64> = from
            .iter()
            .zip(anchor)
            .map(|(&f, &a)| (1.0 - t) * f + t * a)
            .collect();
        floor_and_normalize(&mut q);
        q
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mutual_information_flat(&at(mid), r) >= b {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &mut [f64]) {
    let n = v.len();
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut().take(n) {
        *x = (*x - theta).max(0.0);
    }
}

fn floor_and_normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.max(1e-12);
    }
    normalize(v);
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// First-order optimality residual for the constrained minimization:
/// the least-squares misfit of `grad D = mu grad I + nu 1` with `mu >= 0`.
fn kkt_residual(q: &[f64], p: &[f64], r: usize) -> f64 {
    let n = q.len();
    let mut row = vec![0.0; r];
    let mut col = vec![0.0; r];
    for x in 0..r {
        for y in 0..r {
            row[x] += q[x * r + y];
            col[y] += q[x * r + y];
        }
    }
    let g: Vec<f64> = q
        .iter()
        .zip(p)
        .map(|(&qv, &pv)| (qv.max(1e-300) / pv).ln() + 1.0)
        .collect();
    let h: Vec<f64> = (0..n)
        .map(|i| {
            let (x, y) = (i / r, i % r);
            q[i].max(1e-300).ln() - row[x].ln() - col[y].ln() - 1.0
        })
        .collect();
    // Solve min_{mu, nu} || g - mu h - nu 1 ||^2 by normal equations.
    let hh: f64 = h.iter().map(|v| v * v).sum();
    let h1: f64 = h.iter().sum();
    let gh: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
    let g1: f64 = g.iter().sum();
    let nf = n as f64;
    let det = hh * nf - h1 * h1;
    let (mu, nu) = if det.abs() < 1e-14 {
        (0.0, g1 / nf)
    } else {
        let mu = (gh * nf - g1 * h1) / det;
        let nu = (g1 - mu * h1) / nf;
        (mu.max(0.0), nu)
    };
    g.iter()
        .zip(&h)
        .map(|(gi, hi)| {
            let res = gi - mu * hi - nu;
            res * res
        })
        .sum::<f64>()
        .sqrt()
}

/// Exact and locally approximated divergence between nearby distributions:
/// the approximation is half the squared Euclidean norm weighted by the
/// reciprocals of the first argument, and the gap vanishes to second order
/// as the distributions approach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlApprox {
    pub exact: f64,
    pub approx: f64,
    pub gap: f64,
}

pub fn euclidean_kl_approx(p: &PairwiseDist, q: &PairwiseDist) -> Result<KlApprox> {
    if !p.is_strictly_positive() {
        return Err(Error::InvalidParameter(
            "the local approximation weights by 1/p, so p must be strictly positive".into(),
        ));
    }
    if p.r() != q.r() {
        return Err(Error::DimensionMismatch(
            "distributions must share one alphabet".into(),
        ));
    }
    let exact = kl_divergence(p, q);
    let approx = 0.5
        * p.table()
            .iter()
            .zip(q.table())
            .map(|(&pv, &qv)| (pv - qv) * (pv - qv) / pv)
            .sum::<f64>();
    Ok(KlApprox {
        exact,
        approx,
        gap: exact - approx,
    })
}

/// Sample-size thresholds below which no estimator can succeed, under a
/// uniform prior on the true structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverseBounds {
    /// Threshold when the edge count `k` is known:
    /// `rho (k - 1) ln d / (d ln r)` (clamped at zero for `k < 1`).
    pub known_k: f64,
    /// Threshold over all forests: `rho ln d / ln r`.
    pub any_forest: f64,
}

pub fn converse_sample_bound(d: usize, k: usize, r: usize, rho: f64) -> Result<ConverseBounds> {
    if d < 2 || r < 2 || k > d - 1 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 2, r >= 2, 0 <= k <= d - 1; got d = {d}, k = {k}, r = {r}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1], got {rho}"
        )));
    }
    let ln_d = (d as f64).ln();
    let ln_r = (r as f64).ln();
    let known_k = (rho * (k as f64 - 1.0) * ln_d / (d as f64 * ln_r)).max(0.0);
    let any_forest = rho * ln_d / ln_r;
    Ok(ConverseBounds {
        known_k,
        any_forest,
    })
}

/// Counting bounds for labeled forests, on the log scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestCountBounds {
    /// `ln((d - k) d^(k-1))`, a lower bound on the number of labeled
    /// forests with `k` edges on `d` nodes.
    pub log_forests_with_k_edges_lower: f64,
    /// `(d - 2) ln d`, a lower bound on the log-number of all labeled
    /// forests on `d` nodes.
    pub log_all_forests_lower: f64,
    /// `(d - 1) ln(d + 1)`, the matching upper bound.
    pub log_all_forests_upper: f64,
}

pub fn forest_count_bounds(d: usize, k: usize) -> Result<ForestCountBounds> {
    if d < 2 || k > d - 1 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 2 and 0 <= k <= d - 1, got d = {d}, k = {k}"
        )));
    }
    let ln_d = (d as f64).ln();
    Ok(ForestCountBounds {
        log_forests_with_k_edges_lower: ((d - k) as f64).ln() + (k as f64 - 1.0) * ln_d,
        log_all_forests_lower: (d as f64 - 2.0) * ln_d,
        log_all_forests_upper: (d as f64 - 1.0) * ((d + 1) as f64).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::NodeDist;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn product(px: &[f64], py: &[f64]) -> PairwiseDist {
        PairwiseDist::product(
            &NodeDist::new(px.to_vec()).unwrap(),
            &NodeDist::new(py.to_vec()).unwrap(),
        )
        .unwrap()
    }

    fn bsc(crossover: f64) -> PairwiseDist {
        let same = (1.0 - crossover) / 2.0;
        let diff = crossover / 2.0;
        PairwiseDist::new(2, vec![same, diff, diff, same]).unwrap()
    }

    /// Entries bounded well away from zero so the finite-difference
    /// truncation error stays below the 1e-5 comparison gate.
    fn random_positive(r: usize, rng: &mut impl Rng) -> PairwiseDist {
        let mut t: Vec<f64> = (0..r * r).map(|_| rng.random_range(0.5..1.0)).collect();
        normalize(&mut t);
        PairwiseDist::new(r, t).unwrap()
    }

    #[test]
    fn hessian_matches_finite_differences() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let mut cases = vec![product(&[0.5, 0.5], &[0.5, 0.5]), bsc(0.3)];
        cases.push(random_positive(2, &mut rng));
        cases.push(random_positive(3, &mut rng));
        for p in cases {
            let r = p.r();
            let n = r * r;
            let curv = mi_hessian(&p).unwrap();
            for (pi, &pv) in curv.pi_diag().iter().zip(p.table()) {
                assert!((pi - 1.0 / pv).abs() < 1e-15 && *pi > 0.0);
            }
            for i in 0..n {
                for j in 0..n {
                    let gap = (curv.hessian()[(i, j)] - curv.hessian()[(j, i)]).abs();
                    assert!(gap < 1e-8, "Hessian asymmetry {gap} at ({i}, {j})");
                }
            }
            let h = 1e-5;
            for i in 0..n {
                for j in 0..n {
                    let probe = |si: f64, sj: f64| {
                        let mut t = p.table().to_vec();
                        t[i] += si * h;
                        t[j] += sj * h;
                        mutual_information_flat(&t, r)
                    };
                    let fd = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                        + probe(-1.0, -1.0))
                        / (4.0 * h * h);
                    assert!(
                        (curv.hessian()[(i, j)] - fd).abs() < 1e-5,
                        "entry ({i}, {j}): analytic {} vs fd {fd}",
                        curv.hessian()[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn hessian_nonnegative_on_tangent_at_products() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let p = product(&[0.6, 0.4], &[0.3, 0.7]);
        let curv = mi_hessian(&p).unwrap();
        for _ in 0..200 {
            let mut v: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
            center(&mut v);
            let vv = DVector::from_vec(v);
            let quad = (vv.transpose() * curv.hessian() * &vv)[(0, 0)];
            assert!(quad >= -1e-10, "tangent quadratic form {quad} negative");
        }
    }

    #[test]
    fn hessian_of_transpose_is_permuted() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let p = random_positive(2, &mut rng);
        let h = mi_hessian(&p).unwrap();
        let ht = mi_hessian(&p.transpose()).unwrap();
        let r = p.r();
        let perm = |i: usize| (i % r) * r + i / r;
        for i in 0..r * r {
            for j in 0..r * r {
                assert_abs_diff_eq!(
                    ht.hessian()[(perm(i), perm(j))],
                    h.hessian()[(i, j)],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn hessian_rejects_zero_entries() {
        let p = PairwiseDist::new(2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(mi_hessian(&p).is_err());
    }

    #[test]
    fn mu_star_is_one_at_uniform() {
        let p = product(&[0.5, 0.5], &[0.5, 0.5]);
        assert_abs_diff_eq!(mu_star(&p).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn mu_star_universal_and_whitened_psd() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        for r in [2usize, 3] {
            for _ in 0..10 {
                let px: Vec<f64> = random_simplex_floored(r, &mut rng);
                let py: Vec<f64> = random_simplex_floored(r, &mut rng);
                let p = product(&px, &py);
                assert_abs_diff_eq!(mu_star(&p).unwrap(), 1.0, epsilon = 1e-6);
                let curv = mi_hessian(&p).unwrap();
                let s = whitened_hessian(&curv);
                let n = r * r;
                let gap = DMatrix::<f64>::identity(n, n) - s;
                let min_eig = gap
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                assert!(min_eig >= -1e-8, "I - S has eigenvalue {min_eig}");
            }
        }
    }

    fn random_simplex_floored(r: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut v: Vec<f64> = (0..r).map(|_| rng.random_range(0.05..1.0)).collect();
        normalize(&mut v);
        v
    }

    #[test]
    fn mu_star_rejects_dependent_input() {
        assert!(mu_star(&bsc(0.3)).is_err());
    }

    #[test]
    fn underestimation_zero_at_products() {
        let p = product(&[0.3, 0.7], &[0.6, 0.4]);
        let res = underestimation_rate(&p).unwrap();
        assert!(res.value < 1e-12, "value {} should vanish", res.value);
        assert!(!res.local_only);
    }

    #[test]
    fn underestimation_near_information_for_bsc() {
        let p = bsc(0.3);
        let i = mutual_information(&p);
        let res = underestimation_rate(&p).unwrap();
        assert!(res.value > 0.0);
        assert!(
            (res.value - i).abs() / i < 0.25,
            "L = {}, I = {i}",
            res.value
        );
    }

    #[test]
    fn underestimation_tracks_information_for_weak_edges() {
        let p = bsc(0.49);
        let i = mutual_information(&p);
        let res = underestimation_rate(&p).unwrap();
        assert!(
            (res.value - i).abs() / i < 0.05,
            "L = {}, I = {i}",
            res.value
        );
    }

    #[test]
    fn underestimation_is_nonincreasing_in_the_level() {
        let p = bsc(0.3);
        let i = mutual_information(&p);
        let mut prev = f64::INFINITY;
        for a in [0.0, 0.01, 0.03, 0.06] {
            let res = underestimation_rate_at(&p, a).unwrap();
            assert!(
                res.value <= prev + 1e-12,
                "L must be nonincreasing in the level: {} after {prev} at a = {a}",
                res.value
            );
            assert!(mutual_information(&res.argmin) <= a + 1e-8 || a == 0.0);
            prev = res.value;
        }
        // Once the level reaches I(p), p itself is feasible.
        let res = underestimation_rate_at(&p, i + 1e-3).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(underestimation_rate_at(&p, -0.1).is_err());
    }

    #[test]
    fn overestimation_vanishes_with_the_level() {
        let p = product(&[0.5, 0.5], &[0.5, 0.5]);
        let res = overestimation_rate(&p, 1e-6).unwrap();
        assert!(res.rate.value < 1e-4, "value {}", res.rate.value);
    }

    #[test]
    fn overestimation_ratio_near_one_and_monotone() {
        let p = product(&[0.5, 0.5], &[0.5, 0.5]);
        let mut prev = 0.0;
        for b in [0.001, 0.005, 0.01] {
            let res = overestimation_rate(&p, b).unwrap();
            let ratio = res.rate.value / b;
            assert!(
                (0.9..=1.1).contains(&ratio),
                "M(p; {b}) / b = {ratio} outside [0.9, 1.1]"
            );
            assert!(res.rate.value >= prev - 1e-12, "not monotone at {b}");
            prev = res.rate.value;
            // Weak duality against the dual optimum mu* = 1.
            assert!(res.quadratic_surrogate >= b - 1e-6);
        }
    }

    #[test]
    fn overestimation_argmin_is_feasible() {
        let p = product(&[0.6, 0.4], &[0.7, 0.3]);
        let b = 0.01;
        let res = overestimation_rate(&p, b).unwrap();
        assert!(mutual_information(&res.rate.argmin) >= b - 1e-8);
    }

    #[test]
    fn euclid_exact_at_identity() {
        let p = bsc(0.3);
        let k = euclidean_kl_approx(&p, &p).unwrap();
        assert_eq!((k.exact, k.approx, k.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn euclid_gap_shrinks_quadratically() {
        let p = product(&[0.5, 0.5], &[0.5, 0.5]);
        let mut prev_ratio = f64::INFINITY;
        for delta in [1e-1, 1e-2, 1e-3] {
            let q = PairwiseDist::new(
                2,
                vec![0.25 + delta, 0.25 - delta, 0.25 - delta, 0.25 + delta],
            )
            .unwrap();
            let k = euclidean_kl_approx(&p, &q).unwrap();
            let ratio = k.gap.abs() / (delta * delta);
            assert!(ratio < prev_ratio, "gap ratio must shrink toward p");
            prev_ratio = ratio;
        }
    }

    #[test]
    fn euclid_regimes() {
        let p = product(&[0.5, 0.5], &[0.5, 0.5]);
        let small = PairwiseDist::new(2, vec![0.251, 0.249, 0.249, 0.251]).unwrap();
        let k = euclidean_kl_approx(&p, &small).unwrap();
        assert!(k.gap.abs() / k.approx < 0.01);
        let large = PairwiseDist::new(2, vec![0.35, 0.15, 0.15, 0.35]).unwrap();
        let k = euclidean_kl_approx(&p, &large).unwrap();
        assert!(
            k.gap.abs() / k.approx > 0.01,
            "gap {} approx {}",
            k.gap,
            k.approx
        );
    }

    #[test]
    fn converse_reference_values() {
        let b = converse_sample_bound(100, 50, 2, 1.0).unwrap();
        assert_abs_diff_eq!(
            b.known_k,
            49.0 * 100f64.ln() / (100.0 * 2f64.ln()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.known_k, 3.2555, epsilon = 1e-3);
        assert_abs_diff_eq!(b.any_forest, 100f64.ln() / 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.any_forest, 6.6439, epsilon = 1e-3);
        // k = 1 zeroes the known-k bound; k = 0 clamps.
        assert_eq!(converse_sample_bound(100, 1, 2, 1.0).unwrap().known_k, 0.0);
        assert_eq!(converse_sample_bound(100, 0, 2, 1.0).unwrap().known_k, 0.0);
        assert!(converse_sample_bound(100, 50, 2, 1.5).is_err());
    }

    #[test]
    fn forest_count_reference_values() {
        let b = forest_count_bounds(4, 3).unwrap();
        assert_abs_diff_eq!(b.log_forests_with_k_edges_lower.exp(), 16.0, epsilon = 1e-9);
        let b = forest_count_bounds(3, 0).unwrap();
        assert_abs_diff_eq!(b.log_forests_with_k_edges_lower.exp(), 1.0, epsilon = 1e-12);
        let b = forest_count_bounds(5, 2).unwrap();
        assert_abs_diff_eq!(b.log_all_forests_lower, 3.0 * 5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.log_all_forests_upper, 4.0 * 6f64.ln(), epsilon = 1e-12);
    }
}
