//! Sample-complexity converses and forest counting: below the printed
//! thresholds no estimator can identify the structure (under a uniform
//! prior over structures), because there are too many forests for the
//! sample space to distinguish.
//!
//! Run with: cargo run --release --example sample_complexity

use clthres::exponents::{converse_sample_bound, forest_count_bounds};

fn main() -> clthres::Result<()> {
    println!("converse thresholds (samples below which failure is certain):\n");
    println!(
        "{:>6} {:>6} {:>4} {:>14} {:>14}",
        "d", "k", "r", "known-k bound", "any-forest"
    );
    for (d, k, r) in [
        (100, 50, 2),
        (100, 99, 2),
        (1_000, 500, 2),
        (10_000, 5_000, 2),
        (100, 50, 4),
    ] {
        let b = converse_sample_bound(d, k, r, 1.0)?;
        println!(
            "{d:>6} {k:>6} {r:>4} {:>14.4} {:>14.4}",
            b.known_k, b.any_forest
        );
    }
    println!("\nwith k/d fixed, the known-k bound grows like (k/d) log d:");
    println!("logarithmically many samples are necessary even with oracle k.\n");

    println!("forest counting bounds (log scale):\n");
    println!(
        "{:>4} {:>4} {:>22} {:>18} {:>18}",
        "d", "k", "ln #forests(k) >=", "ln #forests >=", "ln #forests <="
    );
    for (d, k) in [(4, 3), (5, 2), (7, 4), (30, 15), (101, 50)] {
        let b = forest_count_bounds(d, k)?;
        println!(
            "{d:>4} {k:>4} {:>22.4} {:>18.4} {:>18.4}",
            b.log_forests_with_k_edges_lower, b.log_all_forests_lower, b.log_all_forests_upper
        );
    }
    println!(
        "\nat d = 4, k = 3 the lower bound exp({:.4}) = 16 is exactly Cayley's count.",
        forest_count_bounds(4, 3)?.log_forests_with_k_edges_lower
    );
    Ok(())
}
