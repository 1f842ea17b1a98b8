//! Projecting an arbitrary joint distribution onto the forests: the best
//! forest approximation keeps the strongest pairwise informations that fit
//! in an acyclic structure, and projections onto a fixed structure obey
//! the Pythagorean identity.
//!
//! Run with: cargo run --release --example forest_projection

use clthres::synth::{build_random_forest, ForestPolicy, SeededRng};
use clthres::{JointTable, NodeDist, PairwiseDist};

fn main() -> clthres::Result<()> {
    // A 3-variable joint with pair interactions plus a weak 3-way term, so
    // no forest reproduces it exactly.
    let mut probs = vec![0.0; 8];
    for (s, p) in probs.iter_mut().enumerate() {
        let (a, b, c) = (s & 1, (s >> 1) & 1, (s >> 2) & 1);
        let mut w = 1.0;
        if a == b {
            w *= 1.6;
        }
        if b == c {
            w *= 1.25;
        }
        if a ^ b ^ c == 1 {
            w *= 1.08;
        }
        *p = w;
    }
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    let joint = JointTable::new(3, 2, probs)?;

    println!("pairwise informations of the target joint (nats):");
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mi = clthres::mutual_information(&joint.pairwise_marginal(i, j));
        println!("  I({i}, {j}) = {mi:.6}");
    }

    let projection = joint.forest_projection()?;
    println!(
        "\nforest projection keeps {:?} with divergence {:.6} nats",
        projection.edges(),
        joint.kl_to_model(&projection)
    );

    // Compare against every forest on 3 nodes.
    let forests: [&[(usize, usize)]; 7] = [
        &[],
        &[(0, 1)],
        &[(0, 2)],
        &[(1, 2)],
        &[(0, 1), (0, 2)],
        &[(0, 1), (1, 2)],
        &[(0, 2), (1, 2)],
    ];
    println!("\nall forests on 3 nodes:");
    for f in forests {
        let m = joint.project_onto_structure(f)?;
        println!("  {f:?}: D = {:.6}", joint.kl_to_model(&m));
    }

    // Pythagorean identity on a bigger random example: for any q Markov on
    // the structure, D(p||q) = D(p||proj) + D(proj||q).
    let mut rng = SeededRng::new(5, 0).rng();
    let p = build_random_forest(6, 4, 2, &mut rng, &ForestPolicy::default())?;
    let structure = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)];
    let proj = p.project_onto_structure(&structure)?;
    let q = {
        let other = build_random_forest(6, 5, 2, &mut rng, &ForestPolicy::default())?;
        other.project_onto_structure(&structure)?
    };
    let d_pq = clthres::ForestModel::forest_kl(&p, &q)?;
    let d_pp = clthres::ForestModel::forest_kl(&p, &proj)?;
    let d_projq = clthres::ForestModel::forest_kl(&proj, &q)?;
    println!("\nPythagorean identity on a 6-node chain structure:");
    println!("  D(p||q)            = {d_pq:.9}");
    println!("  D(p||proj) + D(proj||q) = {:.9}", d_pp + d_projq);
    println!(
        "  residual           = {:.3e}",
        (d_pq - d_pp - d_projq).abs()
    );

    // Projections preserve marginals exactly.
    let node0: &NodeDist = proj.node_marginal(0);
    let edge: &PairwiseDist = proj.edge_marginal(0, 1).unwrap();
    println!(
        "\nprojected node 0 marginal {:?} and edge (0,1) row sums match the source: {}",
        node0.probs(),
        (edge.row_marginal().probs()[0] - node0.probs()[0]).abs() < 1e-12
    );
    Ok(())
}
