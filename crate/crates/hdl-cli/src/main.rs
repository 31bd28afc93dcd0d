//! Command-line front end for the labeling library.
//!
//! Subcommands:
//!
//! * `label` — run hierarchical or independent-vote labeling end to end.
//! * `select-k` — score candidate neighborhood sizes on a labeled set.
//! * `estimate-mu` — estimate local purity for a single `k`.
//! * `gen-synth` — generate a synthetic Gaussian-mixture benchmark.
//! * `eval` — score a labeling run against ground truth.
//!
//! Exit codes: `0` success, `1` data/runtime failure (unreadable or
//! malformed files, invalid parameter combinations detected while
//! running), `2` command-line usage errors.
//!
//! `label` writes a one-line JSON run manifest to stderr on success;
//! stdout stays clean (results go to `--out`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hdl_core::{
    estimate_mu_with_mode, evaluate, generate, load_embeddings, load_labels, load_output, run_hdl,
    run_knn_dv, select_k, write_embeddings, write_labels, write_output, KSelectParams,
    LabeledOutput, Metric, SampleMode, SynthSpec,
};

#[derive(Parser)]
#[command(
    name = "hdl",
    version,
    about = "Batch pseudo-labeling of embedding sets"
)]
struct Cli {
    /// Cap the rayon thread pool (default: one thread per core).
    #[arg(long, global = true, value_parser = parse_positive("--threads"))]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label an unlabeled embedding set from a labeled one.
    Label(LabelArgs),
    /// Score candidate neighborhood sizes and report the best.
    SelectK(SelectKArgs),
    /// Estimate local purity for one neighborhood size.
    EstimateMu(EstimateMuArgs),
    /// Generate a synthetic Gaussian-mixture instance on disk.
    GenSynth(GenSynthArgs),
    /// Compare a labeling output against ground truth.
    Eval(EvalArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Hierarchical dynamic labeling (levels + in-level ordering).
    Hdl,
    /// Independent majority vote over labeled neighbors only.
    KnnDv,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Hdl => "hdl",
            MethodArg::KnnDv => "knn-dv",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Metric {
        match m {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
        }
    }
}

/// `--k` accepts `auto` or a positive integer.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum KArg {
    Auto,
    Fixed(usize),
}

fn parse_k(text: &str) -> Result<KArg, String> {
    if text == "auto" {
        return Ok(KArg::Auto);
    }
    match text.parse::<usize>() {
        Ok(0) => Err("--k must be a positive integer or `auto`".into()),
        Ok(v) => Ok(KArg::Fixed(v)),
        Err(_) => Err(format!(
            "--k must be a positive integer or `auto`, got `{text}`"
        )),
    }
}

/// Positive-integer parser with the flag name baked into the message.
fn parse_positive(flag: &'static str) -> impl Fn(&str) -> Result<usize, String> + Clone {
    move |text: &str| match text.parse::<usize>() {
        Ok(0) => Err(format!("{flag} must be a positive integer")),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("{flag} must be a positive integer, got `{text}`")),
    }
}

#[derive(Args)]
struct LabelArgs {
    /// Labeling method.
    #[arg(long, value_enum, default_value = "hdl")]
    method: MethodArg,
    /// Labeled embeddings (EMB1 file).
    #[arg(long)]
    labeled: PathBuf,
    /// Labels for the labeled set (`index,label` CSV).
    #[arg(long)]
    labels: PathBuf,
    /// Unlabeled embeddings (EMB1 file).
    #[arg(long)]
    unlabeled: PathBuf,
    /// Output CSV path (`index,label,level,rank,margin`).
    #[arg(long)]
    out: PathBuf,
    /// Neighborhood size: a positive integer, or `auto` to select one
    /// from the labeled set.
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    k: KArg,
    /// Distance metric.
    #[arg(long, value_enum, default_value = "cosine")]
    metric: MetricArg,
    /// Number of classes (default: inferred as 1 + max label).
    #[arg(long, value_parser = parse_positive("--num-classes"))]
    num_classes: Option<usize>,
    /// Base seed for `--k auto` sampling.
    #[arg(long)]
    seed: u64,
    /// Sample fraction for `--k auto`.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Tolerated neighbor impurity for `--k auto`.
    #[arg(long, default_value_t = 0.15)]
    e: f64,
    /// Exclusive upper bound on candidate `k` for `--k auto`.
    #[arg(long, default_value_t = 20, value_parser = parse_positive("--k-upper-limit"))]
    k_upper_limit: usize,
    /// Draw purity-sample centers without replacement.
    #[arg(long)]
    without_replacement: bool,
}

#[derive(Args)]
struct SelectKArgs {
    /// Labeled embeddings (EMB1 file).
    #[arg(long)]
    labeled: PathBuf,
    /// Labels for the labeled set (`index,label` CSV).
    #[arg(long)]
    labels: PathBuf,
    /// Number of classes (default: inferred as 1 + max label).
    #[arg(long, value_parser = parse_positive("--num-classes"))]
    num_classes: Option<usize>,
    /// Base seed; candidate `k` uses `seed + k`.
    #[arg(long)]
    seed: u64,
    /// Sample fraction.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Tolerated neighbor impurity.
    #[arg(long, default_value_t = 0.15)]
    e: f64,
    /// Exclusive upper bound on candidate `k`.
    #[arg(long, default_value_t = 20, value_parser = parse_positive("--k-upper-limit"))]
    k_upper_limit: usize,
    /// Draw purity-sample centers without replacement.
    #[arg(long)]
    without_replacement: bool,
}

#[derive(Args)]
struct EstimateMuArgs {
    /// Labeled embeddings (EMB1 file).
    #[arg(long)]
    labeled: PathBuf,
    /// Labels for the labeled set (`index,label` CSV).
    #[arg(long)]
    labels: PathBuf,
    /// Neighborhood size to probe.
    #[arg(long, value_parser = parse_positive("--k"))]
    k: usize,
    /// Number of classes (default: inferred as 1 + max label).
    #[arg(long, value_parser = parse_positive("--num-classes"))]
    num_classes: Option<usize>,
    /// Base seed. The effective seed is `seed + k`, so the estimate
    /// matches the corresponding `select-k` row.
    #[arg(long)]
    seed: u64,
    /// Sample fraction.
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    /// Draw purity-sample centers without replacement.
    #[arg(long)]
    without_replacement: bool,
}

#[derive(Args)]
struct GenSynthArgs {
    /// Number of classes.
    #[arg(long, value_parser = parse_positive("--classes"))]
    classes: usize,
    /// Embedding dimension.
    #[arg(long, value_parser = parse_positive("--dim"))]
    dim: usize,
    /// Per-class point counts: one integer (shared by all classes) or a
    /// comma-separated list with one entry per class.
    #[arg(long)]
    per_class: String,
    /// Isotropic noise scale around each class mean.
    #[arg(long, default_value_t = 0.5)]
    sigma: f32,
    /// Distance of the default one-hot class means from the origin.
    #[arg(long, default_value_t = 4.0)]
    radius: f32,
    /// Fraction of each class that keeps its label (stratified,
    /// rounded up).
    #[arg(long, default_value_t = 0.1)]
    labeled_fraction: f64,
    /// Generator seed.
    #[arg(long)]
    seed: u64,
    /// Output: labeled embeddings (EMB1).
    #[arg(long)]
    out_labeled: PathBuf,
    /// Output: labels for the labeled set (CSV).
    #[arg(long)]
    out_labels: PathBuf,
    /// Output: unlabeled embeddings (EMB1).
    #[arg(long)]
    out_unlabeled: PathBuf,
    /// Output: ground-truth labels for the unlabeled set (CSV).
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Labeling output CSV (`index,label,level,rank,margin`).
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth labels for the same points (`index,label` CSV).
    #[arg(long)]
    truth: PathBuf,
    /// Method name to embed in the report.
    #[arg(long, default_value = "hdl")]
    method: String,
    /// Number of classes (default: inferred from truth and predictions).
    #[arg(long, value_parser = parse_positive("--num-classes"))]
    num_classes: Option<usize>,
}

/// Run manifest printed to stderr by `label`.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    method: &'a str,
    metric: Metric,
    k: usize,
    k_mode: &'a str,
    num_labeled: usize,
    num_unlabeled: usize,
    num_classes: usize,
    levels: usize,
    wall_ms: u128,
}

/// A command-line usage mistake (conflicting or malformed flags), as opposed to
/// bad input data. Usage errors exit with status 2, matching clap's own parse
/// failures; data errors exit with status 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage_error(message: String) -> anyhow::Error {
    anyhow::Error::new(UsageError(message))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || match &cli.command {
        Command::Label(args) => cmd_label(args),
        Command::SelectK(args) => cmd_select_k(args),
        Command::EstimateMu(args) => cmd_estimate_mu(args),
        Command::GenSynth(args) => cmd_gen_synth(args),
        Command::Eval(args) => cmd_eval(args),
    };
    let outcome = match cli.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .context("failed to build the thread pool");
            match pool {
                Ok(pool) => pool.install(run),
                Err(err) => Err(err),
            }
        }
        None => run(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Refuse to overwrite an input: every `(out, input)` pair must differ.
fn require_distinct(out: (&Path, &str), inputs: &[(&Path, &str)]) -> anyhow::Result<()> {
    for (path, flag) in inputs {
        if out.0 == *path {
            return Err(usage_error(format!(
                "{} and {flag} point at the same file ({})",
                out.1,
                out.0.display()
            )));
        }
    }
    Ok(())
}

fn mode_of(without_replacement: bool) -> SampleMode {
    if without_replacement {
        SampleMode::WithoutReplacement
    } else {
        SampleMode::WithReplacement
    }
}

fn cmd_label(args: &LabelArgs) -> anyhow::Result<()> {
    require_distinct(
        (&args.out, "--out"),
        &[
            (&args.labeled, "--labeled"),
            (&args.labels, "--labels"),
            (&args.unlabeled, "--unlabeled"),
        ],
    )?;
    let started = Instant::now();
    let labeled = load_flagged_embeddings(&args.labeled, "--labeled")?;
    let labels = load_flagged_labels(&args.labels, labeled.count(), args.num_classes)?;
    let unlabeled = load_flagged_embeddings(&args.unlabeled, "--unlabeled")?;
    let metric = Metric::from(args.metric);

    let (k, k_mode) = match args.k {
        KArg::Fixed(k) => (k, "fixed"),
        KArg::Auto => {
            let mut params = KSelectParams::new(args.seed);
            params.p = args.p;
            params.e = args.e;
            params.k_upper_limit = args.k_upper_limit;
            params.mode = mode_of(args.without_replacement);
            let report = select_k(&labeled, &labels, &params)
                .context("neighborhood-size selection failed")?;
            (report.chosen_k, "auto")
        }
    };

    let output: LabeledOutput = match args.method {
        MethodArg::Hdl => run_hdl(&labeled, &labels, &unlabeled, k, metric)?,
        MethodArg::KnnDv => run_knn_dv(&labeled, &labels, &unlabeled, k, metric)?,
    };
    write_output(&output, &args.out)?;

    let manifest = RunManifest {
        command: "label",
        method: args.method.name(),
        metric,
        k,
        k_mode,
        num_labeled: labeled.count(),
        num_unlabeled: unlabeled.count(),
        num_classes: labels.num_classes(),
        levels: output.num_levels(),
        wall_ms: started.elapsed().as_millis(),
    };
    eprintln!("{}", serde_json::to_string(&manifest)?);
    Ok(())
}

/// Wrap embedding loads so the error names the originating flag and path.
fn load_flagged_embeddings(path: &Path, flag: &str) -> anyhow::Result<hdl_core::EmbeddingSet> {
    load_embeddings(path).with_context(|| format!("{flag} {}", path.display()))
}

/// Wrap label loads so the error names `--labels` and the path.
fn load_flagged_labels(
    path: &Path,
    expected: usize,
    num_classes: Option<usize>,
) -> anyhow::Result<hdl_core::LabelVector> {
    load_labels(path, expected, num_classes).with_context(|| format!("--labels {}", path.display()))
}

fn cmd_select_k(args: &SelectKArgs) -> anyhow::Result<()> {
    let labeled = load_flagged_embeddings(&args.labeled, "--labeled")?;
    let labels = load_flagged_labels(&args.labels, labeled.count(), args.num_classes)?;
    let mut params = KSelectParams::new(args.seed);
    params.p = args.p;
    params.e = args.e;
    params.k_upper_limit = args.k_upper_limit;
    params.mode = mode_of(args.without_replacement);
    let report = select_k(&labeled, &labels, &params)?;
    let mut text = String::from("k,mu,beta,product\n");
    for c in &report.candidates {
        text.push_str(&format!(
            "{},{:.12},{:.12},{:.12}\n",
            c.k, c.mu, c.beta, c.product
        ));
    }
    text.push_str(&format!("chosen,{}\n", report.chosen_k));
    print!("{text}");
    Ok(())
}

fn cmd_estimate_mu(args: &EstimateMuArgs) -> anyhow::Result<()> {
    let labeled = load_flagged_embeddings(&args.labeled, "--labeled")?;
    let labels = load_flagged_labels(&args.labels, labeled.count(), args.num_classes)?;
    let effective_seed = args.seed.wrapping_add(args.k as u64);
    let mu = estimate_mu_with_mode(
        &labeled,
        &labels,
        args.k,
        args.p,
        effective_seed,
        mode_of(args.without_replacement),
    )?;
    print!("k,mu\n{},{:.12}\n", args.k, mu);
    Ok(())
}

fn cmd_gen_synth(args: &GenSynthArgs) -> anyhow::Result<()> {
    let outs = [
        (&args.out_labeled, "--out-labeled"),
        (&args.out_labels, "--out-labels"),
        (&args.out_unlabeled, "--out-unlabeled"),
        (&args.out_truth, "--out-truth"),
    ];
    for i in 0..outs.len() {
        for j in (i + 1)..outs.len() {
            if outs[i].0 == outs[j].0 {
                return Err(usage_error(format!(
                    "{} and {} point at the same file ({})",
                    outs[i].1,
                    outs[j].1,
                    outs[i].0.display()
                )));
            }
        }
    }
    let per_class = parse_per_class(&args.per_class, args.classes)?;
    let spec = SynthSpec {
        num_classes: args.classes,
        dim: args.dim,
        per_class,
        means: None,
        radius: args.radius,
        sigma: args.sigma,
        labeled_fraction: args.labeled_fraction,
        seed: args.seed,
    };
    let data = generate(&spec)?;
    write_embeddings(&data.labeled, &args.out_labeled)?;
    write_labels(&data.labels, &args.out_labels)?;
    write_embeddings(&data.unlabeled, &args.out_unlabeled)?;
    write_labels(&data.truth, &args.out_truth)?;
    eprintln!(
        "wrote {} labeled and {} unlabeled points in {} classes",
        data.labeled.count(),
        data.unlabeled.count(),
        spec.num_classes
    );
    Ok(())
}

fn parse_per_class(text: &str, num_classes: usize) -> anyhow::Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(',').collect();
    let mut counts = Vec::with_capacity(parts.len());
    for part in &parts {
        let v: usize = part
            .trim()
            .parse()
            .map_err(|_| usage_error(format!("--per-class entry `{part}` is not an integer")))?;
        counts.push(v);
    }
    if counts.len() == 1 {
        return Ok(vec![counts[0]; num_classes]);
    }
    if counts.len() != num_classes {
        return Err(usage_error(format!(
            "--per-class lists {} entries but --classes is {num_classes}",
            counts.len()
        )));
    }
    Ok(counts)
}

fn cmd_eval(args: &EvalArgs) -> anyhow::Result<()> {
    let output =
        load_output(&args.output).with_context(|| format!("--output {}", args.output.display()))?;
    let truth = load_labels(&args.truth, output.records.len(), args.num_classes)
        .with_context(|| format!("--truth {}", args.truth.display()))?;
    let result = evaluate(&output, &truth, &args.method)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}
