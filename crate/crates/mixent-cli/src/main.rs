//! Command-line front end: entropy estimation, scalar bounds, the
//! mutual-information pipeline, synthetic data, bootstrap intervals, and the
//! accuracy sweep used to compare estimators.
//!
//! Exit codes: 0 on success, 2 on input errors (bad files, bad flags,
//! malformed data), 3 on numeric or resource errors during computation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use mixent::bootstrap::{bootstrap_t_ci, BootstrapSpec};
use mixent::bounds::{entropy_bounds_1d, intersection_lambda, ScalarMixturePair};
use mixent::datagen::{synth_dataset, SynthConfig};
use mixent::erp::{
    per_trial_mi, read_dataset_csv, write_dataset_csv, EstimateOptions, MiEstimator, MiReport,
    RoiMap,
};
use mixent::oracle::{entropy_monte_carlo, entropy_quadrature, McSpec, QuadratureSpec};
use mixent::taylor::{
    entropy_taylor, entropy_with_splitting, SplitSchedule, SplitTargetRule, SplitWays,
};
use mixent::{mixture_from_json, Error, GaussianMixture, TaylorOrder};

#[derive(Parser)]
#[command(name = "mixent", version, about = "Gaussian-mixture entropy and ERP-channel mutual information")]
struct Cli {
    /// Print progress information to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the differential entropy of a mixture from its JSON file.
    Entropy(EntropyArgs),
    /// Closed-form entropy bounds for a two-component scalar mixture.
    Bounds(BoundsArgs),
    /// Per-trial mutual information from a dataset CSV and ROI map.
    Mi(MiArgs),
    /// Generate a synthetic dataset with planted class covariances.
    Synth(SynthArgs),
    /// Bootstrap-t confidence interval for the median of a list of numbers.
    Ci(CiArgs),
    /// Estimator-accuracy sweep over a family of two-component mixtures.
    Fig7Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Taylor,
    TaylorSplit,
    Quadrature,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    /// Split only the largest-eigenvalue component each round.
    Largest,
    /// Split every component each round.
    All,
}

impl RuleArg {
    fn to_rule(self) -> SplitTargetRule {
        match self {
            RuleArg::Largest => SplitTargetRule::LargestEigenvalue,
            RuleArg::All => SplitTargetRule::AllComponents,
        }
    }
}

#[derive(Args)]
struct EntropyArgs {
    /// Mixture JSON: { "components": [{ "weight", "mean", "cov" }] }.
    gmm_file: PathBuf,
    #[arg(long, value_enum, default_value = "taylor")]
    method: MethodArg,
    /// Expansion order for the Taylor methods (0, 2, or 4).
    #[arg(long, default_value_t = 4)]
    order: u8,
    /// Sub-components per split (2 or 4).
    #[arg(long, default_value_t = 4)]
    ways: u8,
    /// Splitting rounds.
    #[arg(long, default_value_t = 2)]
    rounds: u32,
    /// Which components each round splits.
    #[arg(long, value_enum, default_value = "all")]
    split_rule: RuleArg,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    sigma1: f64,
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MiArgs {
    /// Dataset CSV with columns trial_id,block_id,label,t,ch_0,...
    dataset: PathBuf,
    /// ROI map JSON: { "rois": [{ "name", "channels" }] }.
    roimap: PathBuf,
    #[arg(long, value_enum, default_value = "quadrature")]
    estimator: MethodArg,
    #[arg(long, default_value_t = 4)]
    order: u8,
    #[arg(long, default_value_t = 4)]
    ways: u8,
    #[arg(long, default_value_t = 2)]
    rounds: u32,
    #[arg(long, value_enum, default_value = "all")]
    split_rule: RuleArg,
    #[arg(long, default_value_t = 1_000_000)]
    mc_samples: usize,
    /// Force the zero-mean class-conditional model.
    #[arg(long)]
    zero_mean: bool,
    /// Attach a bootstrap-t confidence interval for the median MI.
    #[arg(long)]
    ci: bool,
    /// Outer bootstrap resamples.
    #[arg(long = "B", default_value_t = 1000)]
    outer_b: usize,
    /// Nested bootstrap resamples.
    #[arg(long, default_value_t = 200)]
    inner_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthesis configuration JSON.
    config: PathBuf,
    /// Directory that receives dataset.csv and roimap.json.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CiArgs {
    /// Text file with one number per whitespace-separated token.
    values: PathBuf,
    #[arg(long = "B", default_value_t = 1000)]
    outer_b: usize,
    #[arg(long, default_value_t = 200)]
    inner_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Largest variance increment p (the sweep runs 0..=p-max).
    #[arg(long, default_value_t = 50.0)]
    p_max: f64,
    #[arg(long, default_value_t = 5.0)]
    p_step: f64,
    #[arg(long, default_value_t = 4)]
    order: u8,
    #[arg(long, default_value_t = 4)]
    ways: u8,
    #[arg(long, default_value_t = 2)]
    rounds: u32,
    #[arg(long, value_enum, default_value = "all")]
    split_rule: RuleArg,
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err.downcast_ref::<Error>() {
                Some(e) if !e.is_input_error() => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Entropy(args) => cmd_entropy(args, cli.verbose),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Mi(args) => cmd_mi(args, cli.verbose),
        Command::Synth(args) => cmd_synth(args, cli.verbose),
        Command::Ci(args) => cmd_ci(args),
        Command::Fig7Sweep(args) => cmd_fig7_sweep(args, cli.verbose),
    }
}

fn emit(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            // write atomically: temp file in the same directory, then rename
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, text).map_err(Error::Io)?;
            fs::rename(&tmp, path).map_err(Error::Io)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn load_mixture(path: &Path) -> Result<GaussianMixture, Error> {
    let text = fs::read_to_string(path)?;
    mixture_from_json(&text)
}

fn schedule_from(ways: u8, rounds: u32, rule: RuleArg) -> Result<SplitSchedule, Error> {
    Ok(SplitSchedule::new(
        SplitWays::from_u8(ways)?,
        rounds,
        rule.to_rule(),
    ))
}

fn cmd_entropy(args: EntropyArgs, verbose: bool) -> anyhow::Result<()> {
    let gmm = load_mixture(&args.gmm_file)?;
    let order = TaylorOrder::from_u8(args.order)?;
    if verbose {
        eprintln!(
            "mixture: {} component(s), dimension {}",
            gmm.len(),
            gmm.dim()
        );
    }
    let est = match args.method {
        MethodArg::Taylor => entropy_taylor(&gmm, order)?,
        MethodArg::TaylorSplit => {
            let schedule = schedule_from(args.ways, args.rounds, args.split_rule)?;
            entropy_with_splitting(&gmm, order, &schedule)?
        }
        MethodArg::Quadrature => entropy_quadrature(&gmm, &QuadratureSpec::default())?,
        MethodArg::Mc => entropy_monte_carlo(
            &gmm,
            &McSpec {
                samples: args.mc_samples,
                seed: args.seed,
            },
        )?,
    };
    let report = json!({
        "version": mixent::VERSION,
        "method": est.method,
        "order": est.order.map(TaylorOrder::as_u8),
        "schedule": est.schedule,
        "entropy_nats": est.nats,
        "entropy_bits": est.bits(),
        "stderr_nats": est.stderr,
        "components": gmm.len(),
        "dim": gmm.dim(),
    });
    emit(
        args.output.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )
}

fn cmd_bounds(args: BoundsArgs) -> anyhow::Result<()> {
    let pair = ScalarMixturePair::new(args.sigma1, args.sigma2)?;
    let bounds = entropy_bounds_1d(&pair)?;
    let lambda = intersection_lambda(&pair).ok();
    let ln2 = std::f64::consts::LN_2;
    let report = json!({
        "version": mixent::VERSION,
        "sigma1": args.sigma1,
        "sigma2": args.sigma2,
        "lambda": lambda,
        "lower_nats": bounds.lower,
        "upper_nats": bounds.upper,
        "lower_bits": bounds.lower / ln2,
        "upper_bits": bounds.upper / ln2,
    });
    emit(
        args.output.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )
}

fn mi_estimator_from(args: &MiArgs) -> Result<MiEstimator, Error> {
    Ok(match args.estimator {
        MethodArg::Taylor => MiEstimator::Taylor {
            order: TaylorOrder::from_u8(args.order)?,
        },
        MethodArg::TaylorSplit => MiEstimator::TaylorSplit {
            order: TaylorOrder::from_u8(args.order)?,
            schedule: schedule_from(args.ways, args.rounds, args.split_rule)?,
        },
        MethodArg::Quadrature => MiEstimator::Quadrature,
        MethodArg::Mc => MiEstimator::MonteCarlo {
            samples: args.mc_samples,
            seed: args.seed,
        },
    })
}

fn cmd_mi(args: MiArgs, verbose: bool) -> anyhow::Result<()> {
    let dataset = read_dataset_csv(fs::File::open(&args.dataset).map_err(Error::Io)?)?;
    let map = RoiMap::from_json(&fs::read_to_string(&args.roimap).map_err(Error::Io)?)?;
    let estimator = mi_estimator_from(&args)?;
    let opts = EstimateOptions {
        zero_mean: args.zero_mean,
        pooled_electrode_variance: false,
    };
    if verbose {
        eprintln!(
            "dataset: {} trial(s), {} channel(s), {} ROI(s)",
            dataset.trials.len(),
            dataset.channel_count(),
            map.len()
        );
    }
    let results = per_trial_mi(&dataset, &map, &estimator, opts);
    for r in &results {
        if let Err(e) = &r.outcome {
            eprintln!("trial '{}' failed: {e}", r.trial_id);
        }
    }
    let succeeded: Vec<f64> = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|v| v.bits))
        .collect();
    if !results.is_empty() && succeeded.is_empty() {
        return Err(Error::Parse("no trial could be evaluated".into()).into());
    }
    let ci = if args.ci && !succeeded.is_empty() {
        Some(bootstrap_t_ci(
            &succeeded,
            &BootstrapSpec {
                outer: args.outer_b,
                inner: args.inner_b,
                seed: args.seed,
                ..Default::default()
            },
        )?)
    } else {
        None
    };
    let report = MiReport::assemble(&results, &estimator, opts, ci);
    emit(args.output.as_deref(), &report.to_json())
}

/// On-disk synthesis configuration.
#[derive(Deserialize)]
struct SynthConfigJson {
    n_rois: usize,
    electrodes_per_roi: usize,
    trials: usize,
    blocks_per_trial: usize,
    #[serde(default = "default_block_seconds")]
    block_seconds: f64,
    #[serde(default = "default_sample_rate")]
    sample_rate_hz: f64,
    c1: Vec<Vec<f64>>,
    c2: Vec<Vec<f64>>,
    #[serde(default)]
    electrode_noise: Option<f64>,
    #[serde(default)]
    seed: u64,
}

fn default_block_seconds() -> f64 {
    5.0
}

fn default_sample_rate() -> f64 {
    1024.0
}

fn cmd_synth(args: SynthArgs, verbose: bool) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.config).map_err(Error::Io)?;
    let raw: SynthConfigJson =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("synth config: {e}")))?;
    let cfg = SynthConfig {
        n_rois: raw.n_rois,
        electrodes_per_roi: raw.electrodes_per_roi,
        trials: raw.trials,
        blocks_per_trial: raw.blocks_per_trial,
        block_seconds: raw.block_seconds,
        sample_rate_hz: raw.sample_rate_hz,
        c1: mixent::CovarianceMatrix::from_rows(&raw.c1)?,
        c2: mixent::CovarianceMatrix::from_rows(&raw.c2)?,
        electrode_noise: raw.electrode_noise,
        seed: raw.seed,
    };
    let dataset = synth_dataset(&cfg)?;
    fs::create_dir_all(&args.output).map_err(Error::Io)?;
    let csv_path = args.output.join("dataset.csv");
    let map_path = args.output.join("roimap.json");
    let mut file = fs::File::create(&csv_path).map_err(Error::Io)?;
    write_dataset_csv(&dataset, &mut file)?;
    file.flush().map_err(Error::Io)?;
    fs::write(&map_path, cfg.roi_map().to_json()).map_err(Error::Io)?;
    if verbose {
        eprintln!(
            "wrote {} and {}",
            csv_path.display(),
            map_path.display()
        );
    }
    println!(
        "{}",
        json!({
            "dataset": csv_path,
            "roimap": map_path,
            "trials": cfg.trials,
            "channels": cfg.n_rois * cfg.electrodes_per_roi,
        })
    );
    Ok(())
}

fn cmd_ci(args: CiArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.values).map_err(Error::Io)?;
    let mut values = Vec::new();
    for token in text.split_whitespace() {
        values.push(
            token
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{token}'")))?,
        );
    }
    let ci = bootstrap_t_ci(
        &values,
        &BootstrapSpec {
            outer: args.outer_b,
            inner: args.inner_b,
            seed: args.seed,
            ..Default::default()
        },
    )?;
    if ci.degenerate {
        eprintln!("warning: fewer than 3 samples; interval fell back to (min, max)");
    }
    let report = json!({
        "version": mixent::VERSION,
        "n": values.len(),
        "median": ci.median,
        "ci_low": ci.ci_low,
        "ci_high": ci.ci_high,
        "degenerate": ci.degenerate,
    });
    emit(
        args.output.as_deref(),
        &serde_json::to_string_pretty(&report)?,
    )
}

fn sweep_mixture(p: f64) -> Result<GaussianMixture, Error> {
    let c1 = mixent::CovarianceMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 4.0]])?;
    let c2 = mixent::CovarianceMatrix::from_rows(&[vec![5.0 + p, 2.0], vec![2.0, 5.0 + p]])?;
    GaussianMixture::new(vec![
        mixent::GaussianComponent::new(0.5, nalgebra_zeros(), c1)?,
        mixent::GaussianComponent::new(0.5, nalgebra_zeros(), c2)?,
    ])
}

fn nalgebra_zeros() -> mixent::nalgebra::DVector<f64> {
    mixent::nalgebra::DVector::zeros(2)
}

fn cmd_fig7_sweep(args: SweepArgs, verbose: bool) -> anyhow::Result<()> {
    if args.p_max < 0.0 || args.p_step <= 0.0 {
        return Err(Error::InvalidConfig("p-max must be >= 0 and p-step > 0".into()).into());
    }
    let order = TaylorOrder::from_u8(args.order)?;
    let schedule = schedule_from(args.ways, args.rounds, args.split_rule)?;
    let mut lines = vec!["p,taylor,taylor_split,quadrature,mc".to_string()];
    let mut p = 0.0;
    while p <= args.p_max + 1e-12 {
        let gmm = sweep_mixture(p)?;
        let taylor = entropy_taylor(&gmm, order)?.nats;
        let split = entropy_with_splitting(&gmm, order, &schedule)?.nats;
        let quad = entropy_quadrature(&gmm, &QuadratureSpec::default())?.nats;
        let mc = entropy_monte_carlo(
            &gmm,
            &McSpec {
                samples: args.mc_samples,
                seed: args.seed,
            },
        )?
        .nats;
        if verbose {
            eprintln!("p = {p}: quadrature {quad:.6}");
        }
        lines.push(format!("{p},{taylor},{split},{quad},{mc}"));
        p += args.p_step;
    }
    emit(args.output.as_deref(), &(lines.join("\n") + "\n"))
}
