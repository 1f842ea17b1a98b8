//! Command-line front end. All logic lives in the library; this binary
//! parses arguments and config files, calls into it, and writes outputs.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use clthres::harness::{
    self, beta_profile, cross_validate_beta, kl_decay, load_dataset, mc_error_sweep, ColumnKind,
    DatasetSpec, ExperimentConfig, ScheduleSpec, SplitRule, TopologySpec,
};
use clthres::learn::RegSchedule;
use clthres::synth::{build_empty_forest, build_star_forest, sample, SeededRng, StarForestSpec};
use clthres::{exponents, PairwiseDist};

const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

#[derive(Parser)]
#[command(
    name = "clthres",
    version,
    about = "Forest-structured model learning by thresholded Chow-Liu, with error-exponent calculators and a Monte Carlo harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate samples from a synthetic forest model.
    Generate(GenerateArgs),
    /// Learn a forest model from a CSV of samples.
    Learn(LearnArgs),
    /// Rate-function and sample-complexity calculators.
    Exponents(ExponentsArgs),
    /// Monte Carlo error-probability sweep over (n, schedule) cells.
    McError(SweepArgs),
    /// Divergence decay across an n grid, with the fitted log-log slope.
    KlDecay(SweepArgs),
    /// Train/test log-likelihood profile over the threshold exponent.
    Loglik(DataArgs),
    /// Cross-validate the threshold exponent on a dataset.
    CvBeta(DataArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Topology: star | empty
    #[arg(long, default_value = "star")]
    topology: String,
    #[arg(long)]
    d: usize,
    /// Edge count (star only).
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Channel crossover probability in (0, 0.5) (star only).
    #[arg(long, default_value_t = 0.3)]
    crossover: f64,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV of samples.
    #[arg(long)]
    out: PathBuf,
    /// Optional path for the ground-truth model JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Write a header row to the CSV.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct LearnArgs {
    /// Input CSV of integer symbols, one sample per line.
    #[arg(long)]
    input: PathBuf,
    /// The input file starts with a header row.
    #[arg(long)]
    header: bool,
    /// Power-schedule exponent in (0, 1): threshold n^-beta.
    #[arg(long, conflicts_with = "oracle_eps")]
    beta: Option<f64>,
    /// Constant threshold in nats (oracle mode).
    #[arg(long)]
    oracle_eps: Option<f64>,
    /// Output path for the learned model JSON.
    #[arg(long)]
    output: PathBuf,
    /// Optional CSV of the full edge ranking.
    #[arg(long)]
    ranking: Option<PathBuf>,
    /// Print information values in bits instead of nats.
    #[arg(long)]
    bits: bool,
}

#[derive(Args)]
struct ExponentsArgs {
    /// mu-star | under | over | euclid | converse | counts
    #[arg(long)]
    which: String,
    /// Pairwise distribution JSON ({"r": 2, "table": [[..], [..]]}).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Second distribution (euclid mode).
    #[arg(long)]
    dist2: Option<PathBuf>,
    /// Information level in nats (over mode).
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML config file (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// TOML config file (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    /// Override the fold count (cv-beta).
    #[arg(long)]
    folds: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

// ---------------------------------------------------------------------------
// Config file schemas
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SweepConfigFile {
    topology: TopologyConfig,
    n: Vec<usize>,
    #[serde(default)]
    beta: Vec<f64>,
    oracle_eps: Option<f64>,
    trials: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct TopologyConfig {
    kind: String,
    d: Option<usize>,
    k: Option<usize>,
    crossover: Option<f64>,
    path: Option<PathBuf>,
}

impl TopologyConfig {
    fn to_spec(&self) -> clthres::Result<TopologySpec> {
        match self.kind.as_str() {
            "star" => Ok(TopologySpec::Star {
                d: self.require(self.d, "topology.d")?,
                k: self.require(self.k, "topology.k")?,
                crossover: self.require(self.crossover, "topology.crossover")?,
            }),
            "empty" => Ok(TopologySpec::Empty {
                d: self.require(self.d, "topology.d")?,
            }),
            "model" => Ok(TopologySpec::Model {
                path: self.require(self.path.clone(), "topology.path")?,
            }),
            other => Err(clthres::Error::Config(format!(
                "unknown topology kind {other:?} (expected star, empty, or model)"
            ))),
        }
    }

    fn require<T>(&self, v: Option<T>, name: &str) -> clthres::Result<T> {
        v.ok_or_else(|| {
            clthres::Error::Config(format!("{name} is required for kind {:?}", self.kind))
        })
    }
}

#[derive(Deserialize)]
struct DataConfigFile {
    dataset: DatasetConfig,
    split: SplitConfig,
    beta: Vec<f64>,
    folds: Option<usize>,
}

#[derive(Deserialize)]
struct DatasetConfig {
    path: PathBuf,
    #[serde(default)]
    has_header: bool,
    /// One character per column: 'c' categorical, 'n' numeric/continuous.
    columns: String,
}

#[derive(Deserialize)]
struct SplitConfig {
    kind: String,
    train: Option<usize>,
    test: Option<usize>,
    train_fraction: Option<f64>,
    seed: u64,
}

impl SplitConfig {
    fn to_rule(&self) -> clthres::Result<SplitRule> {
        match self.kind.as_str() {
            "counts" => Ok(SplitRule::Counts {
                train: self
                    .train
                    .ok_or_else(|| clthres::Error::Config("split.train is required".into()))?,
                test: self
                    .test
                    .ok_or_else(|| clthres::Error::Config("split.test is required".into()))?,
                seed: self.seed,
            }),
            "ratio" => Ok(SplitRule::Ratio {
                train_fraction: self.train_fraction.ok_or_else(|| {
                    clthres::Error::Config("split.train_fraction is required".into())
                })?,
                seed: self.seed,
            }),
            other => Err(clthres::Error::Config(format!(
                "unknown split kind {other:?} (expected counts or ratio)"
            ))),
        }
    }
}

fn main() {
    // Die quietly when a downstream pipe closes (e.g. piping into head).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Learn(args) => run_learn(args),
        Command::Exponents(args) => run_exponents(args),
        Command::McError(args) => run_mc_error(args),
        Command::KlDecay(args) => run_kl_decay(args),
        Command::Loglik(args) => run_loglik(args),
        Command::CvBeta(args) => run_cv_beta(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run_generate(args: GenerateArgs) -> clthres::Result<()> {
    let model = match args.topology.as_str() {
        "star" => build_star_forest(&StarForestSpec::new(args.d, args.k, args.crossover)?)?,
        "empty" => build_empty_forest(args.d)?,
        other => {
            return Err(clthres::Error::Config(format!(
                "unknown topology {other:?} (expected star or empty)"
            )))
        }
    };
    let samples = sample(&model, args.n, SeededRng::new(args.seed, 0));
    clthres::empirical::write_samples_csv(&samples, &args.out, args.header)?;
    if let Some(model_out) = &args.model_out {
        model.save_json(model_out)?;
    }
    println!(
        "wrote {} samples over {} variables to {}",
        args.n,
        args.d,
        args.out.display()
    );
    Ok(())
}

fn run_learn(args: LearnArgs) -> clthres::Result<()> {
    let samples = clthres::empirical::read_samples_csv(&args.input, args.header, None)?;
    let sched = match (args.beta, args.oracle_eps) {
        (Some(beta), None) => RegSchedule::power(beta)?,
        (None, Some(eps)) => RegSchedule::oracle(eps)?,
        (None, None) => RegSchedule::power(0.625)?,
        (Some(_), Some(_)) => unreachable!("clap forbids both"),
    };
    let learned = clthres::learn::clthres(&samples, &sched)?;
    learned.model().save_json(&args.output)?;

    if let Some(ranking_path) = &args.ranking {
        write_ranking_csv(&learned, ranking_path)?;
    }
    let unit = if args.bits { "bits" } else { "nats" };
    let scale = if args.bits { 1.0 / NATS_PER_BIT } else { 1.0 };
    println!(
        "n = {}, d = {}, threshold = {:.6} {unit}, kept {} of {} edges",
        samples.n(),
        samples.d(),
        learned.eps() * scale,
        learned.k_hat(),
        learned.ranking().len(),
    );
    for (rank, (&(i, j), &score)) in learned
        .ranking()
        .edges()
        .iter()
        .zip(learned.ranking().scores())
        .enumerate()
    {
        let kept = if rank < learned.k_hat() {
            "kept"
        } else {
            "cut"
        };
        println!(
            "  #{:<3} ({i}, {j})  {:.6} {unit}  {kept}",
            rank + 1,
            score * scale
        );
    }
    Ok(())
}

fn write_ranking_csv(learned: &clthres::LearnedModel, path: &Path) -> clthres::Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| clthres::Error::Config(format!("creating {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| clthres::Error::Config(format!("writing {}: {e}", path.display()));
    w.write_record(["rank", "i", "j", "mi_nats", "kept"])
        .map_err(fail)?;
    for (rank, (&(i, j), &score)) in learned
        .ranking()
        .edges()
        .iter()
        .zip(learned.ranking().scores())
        .enumerate()
    {
        w.write_record(&[
            (rank + 1).to_string(),
            i.to_string(),
            j.to_string(),
            format!("{score:.17e}"),
            u8::from(rank < learned.k_hat()).to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush()
        .map_err(|e| clthres::Error::Config(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

fn run_exponents(args: ExponentsArgs) -> clthres::Result<()> {
    let load_dist = |path: &Option<PathBuf>| -> clthres::Result<PairwiseDist> {
        let path = path
            .as_ref()
            .ok_or_else(|| clthres::Error::Config("--dist is required for this mode".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| clthres::Error::Config(format!("reading {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    };
    let output = match args.which.as_str() {
        "mu-star" => {
            let p = load_dist(&args.dist)?;
            let value = exponents::mu_star(&p)?;
            serde_json::json!({ "which": "mu-star", "value": value })
        }
        "under" => {
            let p = load_dist(&args.dist)?;
            let res = exponents::underestimation_rate(&p)?;
            serde_json::json!({
                "which": "under",
                "value": res.value,
                "argmin": res.argmin,
                "diagnostics": {
                    "iterations": res.iterations,
                    "grad_norm": res.grad_norm,
                    "local_only": res.local_only,
                },
            })
        }
        "over" => {
            let p = load_dist(&args.dist)?;
            let b = args
                .b
                .ok_or_else(|| clthres::Error::Config("--b is required for over".into()))?;
            let res = exponents::overestimation_rate(&p, b)?;
            serde_json::json!({
                "which": "over",
                "b": b,
                "value": res.rate.value,
                "quadratic_surrogate": res.quadratic_surrogate,
                "argmin": res.rate.argmin,
                "diagnostics": {
                    "iterations": res.rate.iterations,
                    "grad_norm": res.rate.grad_norm,
                    "local_only": res.rate.local_only,
                },
            })
        }
        "euclid" => {
            let p = load_dist(&args.dist)?;
            let q = load_dist(&args.dist2)?;
            let k = exponents::euclidean_kl_approx(&p, &q)?;
            serde_json::json!({
                "which": "euclid",
                "exact": k.exact,
                "approx": k.approx,
                "gap": k.gap,
            })
        }
        "converse" => {
            let (d, k) = (require(args.d, "--d")?, require(args.k, "--k")?);
            let r = require(args.r, "--r")?;
            let rho = args.rho.unwrap_or(1.0);
            let b = exponents::converse_sample_bound(d, k, r, rho)?;
            serde_json::json!({
                "which": "converse",
                "known_k": b.known_k,
                "any_forest": b.any_forest,
            })
        }
        "counts" => {
            let (d, k) = (require(args.d, "--d")?, require(args.k, "--k")?);
            let b = exponents::forest_count_bounds(d, k)?;
            serde_json::json!({
                "which": "counts",
                "log_forests_with_k_edges_lower": b.log_forests_with_k_edges_lower,
                "log_all_forests_lower": b.log_all_forests_lower,
                "log_all_forests_upper": b.log_all_forests_upper,
            })
        }
        other => {
            return Err(clthres::Error::Config(format!(
            "unknown mode {other:?} (expected mu-star, under, over, euclid, converse, or counts)"
        )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&output)?);
    Ok(())
}

fn require<T>(v: Option<T>, name: &str) -> clthres::Result<T> {
    v.ok_or_else(|| clthres::Error::Config(format!("{name} is required for this mode")))
}

fn read_sweep_config(args: &SweepArgs) -> clthres::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| clthres::Error::Config(format!("reading {}: {e}", args.config.display())))?;
    let file: SweepConfigFile =
        toml::from_str(&text).map_err(|e| clthres::Error::Config(e.to_string()))?;
    let mut schedules: Vec<ScheduleSpec> = file
        .beta
        .iter()
        .map(|&beta| ScheduleSpec::Power { beta })
        .collect();
    if let Some(eps) = file.oracle_eps {
        schedules.push(ScheduleSpec::Oracle { eps });
    }
    Ok(ExperimentConfig {
        topology: file.topology.to_spec()?,
        n_grid: file.n,
        schedules,
        trials: args.trials.unwrap_or(file.trials),
        master_seed: args.seed.unwrap_or(file.seed),
    })
}

fn ensure_dir(dir: &Path) -> clthres::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| clthres::Error::Config(format!("creating {}: {e}", dir.display())))
}

fn run_mc_error(args: SweepArgs) -> clthres::Result<()> {
    let cfg = read_sweep_config(&args)?;
    ensure_dir(&args.out_dir)?;
    let sweep = mc_error_sweep(&cfg)?;
    harness::write_records_csv(&sweep.records, &args.out_dir.join("records.csv"))?;
    harness::write_summary_csv(&sweep.cells, &args.out_dir.join("summary.csv"))?;
    harness::write_manifest(
        &args.out_dir.join("manifest.json"),
        "mc-error",
        serde_json::to_value(&cfg)?,
    )?;
    for c in &sweep.cells {
        println!(
            "n = {:<6} {}({:.3})  P(err) = {:.4} [{:.4}, {:.4}]  over = {:.4}  under = {:.4}",
            c.n,
            c.schedule,
            c.param,
            c.p_struct.estimate,
            c.p_struct.lo,
            c.p_struct.hi,
            c.p_over.estimate,
            c.p_under.estimate,
        );
    }
    println!(
        "wrote records.csv, summary.csv, manifest.json to {}",
        args.out_dir.display()
    );
    Ok(())
}

fn run_kl_decay(args: SweepArgs) -> clthres::Result<()> {
    let cfg = read_sweep_config(&args)?;
    ensure_dir(&args.out_dir)?;
    let decay = kl_decay(&cfg)?;
    harness::write_records_csv(&decay.records, &args.out_dir.join("records.csv"))?;
    let path = args.out_dir.join("decay.csv");
    {
        let file = std::fs::File::create(&path)
            .map_err(|e| clthres::Error::Config(format!("creating {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        let fail =
            |e: csv::Error| clthres::Error::Config(format!("writing {}: {e}", path.display()));
        w.write_record(["n", "kl_mean", "kl_min", "kl_max"])
            .map_err(fail)?;
        for s in &decay.per_n {
            w.write_record(&[
                s.n.to_string(),
                format!("{:.17e}", s.mean),
                format!("{:.17e}", s.min),
                format!("{:.17e}", s.max),
            ])
            .map_err(fail)?;
        }
        w.flush()
            .map_err(|e| clthres::Error::Config(format!("writing {}: {e}", path.display())))?;
    }
    harness::write_manifest(
        &args.out_dir.join("manifest.json"),
        "kl-decay",
        serde_json::to_value(&cfg)?,
    )?;
    for s in &decay.per_n {
        println!(
            "n = {:<6} mean D = {:.6e}  [{:.3e}, {:.3e}]",
            s.n, s.mean, s.min, s.max
        );
    }
    println!(
        "log-log slope = {:.4} (r^2 = {:.4}, max |residual| = {:.3})",
        decay.fit.slope, decay.fit.r_squared, decay.fit.max_abs_residual
    );
    Ok(())
}

fn read_data_config(path: &Path) -> clthres::Result<(DatasetSpec, Vec<f64>, Option<usize>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| clthres::Error::Config(format!("reading {}: {e}", path.display())))?;
    let file: DataConfigFile =
        toml::from_str(&text).map_err(|e| clthres::Error::Config(e.to_string()))?;
    let columns: Vec<ColumnKind> = file
        .dataset
        .columns
        .chars()
        .map(|c| match c {
            'c' => Ok(ColumnKind::Categorical),
            'n' => Ok(ColumnKind::Continuous),
            other => Err(clthres::Error::Config(format!(
                "unknown column tag {other:?} (expected 'c' or 'n')"
            ))),
        })
        .collect::<clthres::Result<_>>()?;
    let spec = DatasetSpec {
        path: file.dataset.path,
        has_header: file.dataset.has_header,
        columns,
        split: file.split.to_rule()?,
    };
    Ok((spec, file.beta, file.folds))
}

fn run_loglik(args: DataArgs) -> clthres::Result<()> {
    let (spec, betas, _) = read_data_config(&args.config)?;
    ensure_dir(&args.out_dir)?;
    let (train, test, report) = load_dataset(&spec)?;
    let rows = beta_profile(&train, &test, &betas)?;
    let path = args.out_dir.join("profile.csv");
    {
        let file = std::fs::File::create(&path)
            .map_err(|e| clthres::Error::Config(format!("creating {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        let fail =
            |e: csv::Error| clthres::Error::Config(format!("writing {}: {e}", path.display()));
        w.write_record(["beta", "k_hat", "train_ll", "test_ll", "floored_test"])
            .map_err(fail)?;
        for r in &rows {
            w.write_record(&[
                format!("{:.6}", r.beta),
                r.k_hat.to_string(),
                format!("{:.10}", r.train_ll),
                format!("{:.10}", r.test_ll),
                r.floored_test.to_string(),
            ])
            .map_err(fail)?;
        }
        w.flush()
            .map_err(|e| clthres::Error::Config(format!("writing {}: {e}", path.display())))?;
    }
    std::fs::write(
        args.out_dir.join("encoding.json"),
        serde_json::to_string_pretty(&report)?,
    )
    .map_err(|e| clthres::Error::Config(format!("writing encoding report: {e}")))?;
    harness::write_manifest(
        &args.out_dir.join("manifest.json"),
        "loglik",
        serde_json::json!({ "dataset": spec, "beta": betas }),
    )?;
    println!(
        "train rows = {}, test rows = {}, alphabet r = {}",
        report.train_rows, report.test_rows, report.r
    );
    for r in &rows {
        println!(
            "beta = {:.3}  k = {:<3} train ll/sample = {:>9.4}  test ll/sample = {:>9.4}  floored = {}",
            r.beta, r.k_hat, r.train_ll, r.test_ll, r.floored_test
        );
    }
    Ok(())
}

fn run_cv_beta(args: DataArgs) -> clthres::Result<()> {
    let (spec, betas, folds) = read_data_config(&args.config)?;
    let folds = args.folds.or(folds).unwrap_or(5);
    ensure_dir(&args.out_dir)?;
    let (train, _test, report) = load_dataset(&spec)?;
    let seed = match spec.split {
        SplitRule::Ratio { seed, .. } | SplitRule::Counts { seed, .. } => seed,
    };
    let cv = cross_validate_beta(&train, folds, &betas, seed)?;
    let path = args.out_dir.join("cv.csv");
    {
        let file = std::fs::File::create(&path)
            .map_err(|e| clthres::Error::Config(format!("creating {}: {e}", path.display())))?;
        let mut w = csv::Writer::from_writer(file);
        let fail =
            |e: csv::Error| clthres::Error::Config(format!("writing {}: {e}", path.display()));
        w.write_record(["beta", "fold", "heldout_ll"])
            .map_err(fail)?;
        for cell in &cv.table {
            w.write_record(&[
                format!("{:.6}", cell.beta),
                cell.fold.to_string(),
                format!("{:.10}", cell.heldout_ll),
            ])
            .map_err(fail)?;
        }
        w.flush()
            .map_err(|e| clthres::Error::Config(format!("writing {}: {e}", path.display())))?;
    }
    harness::write_manifest(
        &args.out_dir.join("manifest.json"),
        "cv-beta",
        serde_json::json!({ "dataset": spec, "beta": betas, "folds": folds }),
    )?;
    println!(
        "train rows = {}, alphabet r = {}",
        report.train_rows, report.r
    );
    for (beta, score) in &cv.mean_by_beta {
        println!("beta = {beta:.3}  mean held-fold ll/sample = {score:.4}");
    }
    println!("chosen beta = {}", cv.chosen_beta);
    Ok(())
}
