//! The error-exponent machinery behind the threshold choice: the
//! eigenvalue identity mu* = 1 at product distributions, the
//! underestimation rate L (divergence to the nearest product), the
//! overestimation rate M (divergence to the nearest dependent joint at a
//! given information level) with its quadratic surrogate, and the local
//! Euclidean approximation of the divergence.
//!
//! Run with: cargo run --release --example rate_functions

use clthres::exponents::{euclidean_kl_approx, mu_star, overestimation_rate, underestimation_rate};
use clthres::{mutual_information, NodeDist, PairwiseDist};

fn main() -> clthres::Result<()> {
    // mu*: reciprocal of the top eigenvalue of the whitened information
    // Hessian. Identically 1 at every strictly positive product.
    println!("mu* at product distributions:");
    for (px, py) in [
        (vec![0.5, 0.5], vec![0.5, 0.5]),
        (vec![0.7, 0.3], vec![0.4, 0.6]),
        (vec![0.2, 0.3, 0.5], vec![0.6, 0.3, 0.1]),
    ] {
        let p = PairwiseDist::product(&NodeDist::new(px.clone())?, &NodeDist::new(py.clone())?)?;
        println!("  px = {px:?}, py = {py:?}  ->  mu* = {:.9}", mu_star(&p)?);
    }

    // Underestimation rate at a dependent pair: how expensive it is for
    // the empirical information of a true edge to look independent.
    let bsc = |c: f64| {
        PairwiseDist::new(2, vec![(1.0 - c) / 2.0, c / 2.0, c / 2.0, (1.0 - c) / 2.0]).unwrap()
    };
    println!("\nunderestimation rate L vs edge information I:");
    for c in [0.3, 0.4, 0.45, 0.49] {
        let p = bsc(c);
        let res = underestimation_rate(&p)?;
        let i = mutual_information(&p);
        println!(
            "  crossover {c:<5} I = {i:.6}  L = {:.6}  (L/I = {:.3}, {} iterations)",
            res.value,
            res.value / i,
            res.iterations
        );
    }

    // Overestimation rate at a product: how expensive it is for a null
    // pair to fake an information level b. M(p; b) tracks b itself, and
    // the quadratic surrogate bounds it from below through mu*.
    let uniform = PairwiseDist::new(2, vec![0.25; 4])?;
    println!("\noverestimation rate M at the uniform product:");
    for b in [0.001, 0.005, 0.01, 0.02] {
        let res = overestimation_rate(&uniform, b)?;
        println!(
            "  b = {b:<6} M = {:.6}  M/b = {:.4}  surrogate = {:.6}",
            res.rate.value,
            res.rate.value / b,
            res.quadratic_surrogate
        );
    }

    // The local quadratic view of the divergence that powers the theory.
    println!("\nEuclidean approximation of D(p || q) near p:");
    for delta in [0.1, 0.01, 0.001] {
        let q = PairwiseDist::new(
            2,
            vec![0.25 + delta, 0.25 - delta, 0.25 - delta, 0.25 + delta],
        )?;
        let k = euclidean_kl_approx(&uniform, &q)?;
        println!(
            "  |p - q| = {delta:<6} exact = {:.6e}  approx = {:.6e}  gap/approx = {:.2e}",
            k.exact,
            k.approx,
            k.gap.abs() / k.approx
        );
    }
    Ok(())
}
