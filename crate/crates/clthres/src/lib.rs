//! Learning forest-structured discrete graphical models by thresholded
//! Chow-Liu: rank candidate edges with a max-weight spanning tree over
//! empirical mutual informations, keep the edges whose score clears an
//! adaptive threshold `eps_n` (canonically `n^-beta`), and project the
//! joint type onto the surviving forest.
//!
//! Alongside the learner the crate carries the numerical theory of its
//! error events: local curvature of mutual information and the eigenvalue
//! identity behind the overestimation exponent, under/over-estimation rate
//! functions with their quadratic surrogates, sample-complexity converse
//! calculators, and a seeded Monte Carlo harness for error-probability and
//! divergence-decay experiments.
//!
//! ```
//! use clthres::learn::{clthres, RegSchedule};
//! use clthres::synth::{build_star_forest, sample, SeededRng, StarForestSpec};
//!
//! let truth = build_star_forest(&StarForestSpec::new(8, 3, 0.3).unwrap()).unwrap();
//! let samples = sample(&truth, 4000, SeededRng::new(7, 0));
//! let learned = clthres(&samples, &RegSchedule::power(0.6).unwrap()).unwrap();
//! assert_eq!(learned.edge_set(), truth.edges());
//! ```
//!
//! Runnable walkthroughs of each capability live under `examples/`.

pub mod dist;
pub mod empirical;
mod error;
pub mod exponents;
pub mod forest;
pub mod harness;
pub mod learn;
pub mod synth;
pub mod union_find;

pub use error::{Error, Result};

pub use dist::{conditional_kl, kl_divergence, mutual_information, NodeDist, PairwiseDist};
pub use empirical::{all_empirical_mi, empirical_pairwise, MiMatrix, SampleMatrix};
pub use forest::{DirectedForest, ForestModel, JointTable};
pub use learn::{
    chow_liu, clthres, kruskal_mwst, threshold_estimate, EdgeRanking, LearnedModel, RegSchedule,
};
pub use synth::{
    build_random_forest, build_star_forest, sample, ForestPolicy, SeededRng, StarForestSpec,
};
