//! End-to-end walkthrough: build a star forest with binary-symmetric-
//! channel edges, draw samples, learn the structure back with a thresholded
//! spanning tree, and measure the divergence to the truth.
//!
//! Run with: cargo run --release --example learn_star

use clthres::learn::{clthres, RegSchedule};
use clthres::synth::{build_star_forest, sample, SeededRng, StarForestSpec};
use clthres::ForestModel;

fn main() -> clthres::Result<()> {
    let spec = StarForestSpec::new(12, 6, 0.3)?;
    let truth = build_star_forest(&spec)?;
    println!(
        "truth: {} nodes, {} edges (hub 0), per-edge information {:.6} nats",
        truth.d(),
        truth.num_edges(),
        spec.edge_mi()
    );

    let n = 4000;
    let samples = sample(&truth, n, SeededRng::new(2024, 0));
    let sched = RegSchedule::power(0.625)?;
    let learned = clthres(&samples, &sched)?;

    println!(
        "\nlearned from n = {n} samples with threshold n^-0.625 = {:.6} nats:",
        learned.eps()
    );
    for (rank, (&(i, j), &score)) in learned
        .ranking()
        .edges()
        .iter()
        .zip(learned.ranking().scores())
        .enumerate()
    {
        let mark = if rank < learned.k_hat() {
            "kept"
        } else {
            "cut "
        };
        println!(
            "  #{:<2} ({i:>2}, {j:>2})  {score:.6} nats  {mark}",
            rank + 1
        );
    }

    let exact = learned.edge_set() == truth.edges();
    let kl = ForestModel::forest_kl(&truth, learned.model())?;
    println!("\nexact structure recovery: {exact}");
    println!("D(truth || learned) = {kl:.6} nats");

    let json = learned.model().to_json_string()?;
    println!("\nmodel JSON (first 3 lines):");
    for line in json.lines().take(3) {
        println!("  {line}");
    }
    Ok(())
}
