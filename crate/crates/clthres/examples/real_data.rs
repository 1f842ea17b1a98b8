//! A full real-data workflow on a synthesized mixed-type CSV: load with a
//! seeded split, binarize continuous columns at the training mean, profile
//! the train/test likelihood over the threshold exponent, and pick the
//! exponent by cross-validation.
//!
//! Run with: cargo run --release --example real_data

use std::io::Write;

use clthres::harness::{
    beta_profile, cross_validate_beta, load_dataset, ColumnKind, DatasetSpec, SplitRule,
};
use clthres::learn::{clthres, RegSchedule};
use rand::{Rng, SeedableRng};

fn main() -> clthres::Result<()> {
    // Synthesize a small clinical-style table: two continuous measurements
    // driven by a hidden binary label, one noisy copy, one independent
    // categorical column, and the label itself.
    let dir = std::env::temp_dir().join("clthres_real_data_example");
    std::fs::create_dir_all(&dir).map_err(|e| clthres::Error::Config(e.to_string()))?;
    let csv_path = dir.join("cohort.csv");
    {
        let mut f =
            std::fs::File::create(&csv_path).map_err(|e| clthres::Error::Config(e.to_string()))?;
        writeln!(f, "age,pressure,label,echo,noise").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..270 {
            let label = rng.random_range(0..2);
            let age = 48.0 + 9.0 * label as f64 + rng.random_range(-8.0..8.0);
            let pressure = 118.0 + 12.0 * label as f64 + rng.random_range(-10.0..10.0);
            let echo = if rng.random::<f64>() < 0.8 {
                label
            } else {
                1 - label
            };
            let noise = rng.random_range(0..3);
            writeln!(f, "{age:.1},{pressure:.1},{label},{echo},{noise}").unwrap();
        }
    }

    let spec = DatasetSpec {
        path: csv_path,
        has_header: true,
        columns: vec![
            ColumnKind::Continuous,
            ColumnKind::Continuous,
            ColumnKind::Categorical,
            ColumnKind::Categorical,
            ColumnKind::Categorical,
        ],
        split: SplitRule::Counts {
            train: 230,
            test: 40,
            seed: 1,
        },
    };
    let (train, test, report) = load_dataset(&spec)?;
    println!(
        "loaded {} train rows, {} test rows, alphabet r = {}",
        report.train_rows, report.test_rows, report.r
    );
    for (c, enc) in report.columns.iter().enumerate() {
        match enc.threshold {
            Some(t) => println!("  column {c}: continuous, train-mean threshold {t:.2}"),
            None => println!("  column {c}: categorical, codes {:?}", enc.categories),
        }
    }

    let betas: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
    println!("\ntrain/test likelihood profile:");
    println!(
        "{:>6} {:>6} {:>12} {:>12} {:>8}",
        "beta", "k", "train ll", "test ll", "floored"
    );
    for row in beta_profile(&train, &test, &betas)? {
        println!(
            "{:>6.1} {:>6} {:>12.4} {:>12.4} {:>8}",
            row.beta, row.k_hat, row.train_ll, row.test_ll, row.floored_test
        );
    }

    let cv = cross_validate_beta(&train, 5, &betas, 1)?;
    println!("\n5-fold cross-validation:");
    for (beta, score) in &cv.mean_by_beta {
        let marker = if *beta == cv.chosen_beta {
            "  <- chosen"
        } else {
            ""
        };
        println!("  beta {beta:.1}: mean held-fold ll {score:.4}{marker}");
    }

    let learned = clthres(&train, &RegSchedule::power(cv.chosen_beta)?)?;
    println!(
        "\nfinal model at beta = {}: {} edges {:?}",
        cv.chosen_beta,
        learned.k_hat(),
        learned.edge_set()
    );
    println!("(columns: 0 age, 1 pressure, 2 label, 3 echo, 4 noise)");
    Ok(())
}
