use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use smixs::config::{AlphaMode, AlphaOrder, Backend, BicDf, FitConfig, Mode, VarianceEstimator};
use smixs::evaluation::{
    evaluate_params, head_to_head, run_benchmark, BenchReport, BenchSettings, Better, SweepAxis, Variant,
};
use smixs::init::{parameter_count, run_restarts, select_cluster_count, RestartPlan};
use smixs::io::{self, MetricsFile, ModelFile, SelectionReport, TimingReport, Truth, MODEL_SCHEMA};
use smixs::model::{e_step, Dataset, FitResult};
use smixs::synth::{generate_dataset, GeneratorSpec};
use smixs::Error;

#[derive(Parser)]
#[command(name = "smixs", version, about = "Cluster longitudinal data with mixtures of smoothing splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV and its ground-truth sidecar.
    Generate(GenerateArgs),
    /// Fit a mixture to a dataset CSV and write the model JSON.
    Fit(FitArgs),
    /// Score a fitted model against ground truth.
    Evaluate(EvaluateArgs),
    /// Time fitting variants across a parameter sweep.
    Benchmark(BenchmarkArgs),
    /// Count per-dataset wins between two metrics CSVs.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SpecArgs {
    /// Number of clusters.
    #[arg(long, default_value_t = 3)]
    c: usize,
    /// Number of subjects.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Measurements per subject.
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Noise level, 1 (mild) to 4 (heavy).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=4))]
    noise: u8,
    #[arg(long, default_value_t = 1.0)]
    mean_scale: f64,
    #[arg(long, default_value_t = 2)]
    octaves: u32,
    #[arg(long, default_value_t = 4.0)]
    frequency: f64,
}

impl SpecArgs {
    fn spec(&self, seed: u64) -> GeneratorSpec {
        GeneratorSpec {
            mean_scale: self.mean_scale,
            octaves: self.octaves,
            frequency: self.frequency,
            ..GeneratorSpec::new(self.c, self.n, self.p, self.noise, seed)
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, env = "SMIXS_SEED", default_value_t = 0)]
    seed: u64,
    /// Dataset CSV path; the truth sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitOptions {
    #[arg(long, value_enum, default_value_t = Mode::Smixs)]
    mode: Mode,
    /// gradient, grid or fixed:<value>.
    #[arg(long, default_value = "gradient")]
    alpha_mode: AlphaMode,
    #[arg(long, value_enum, default_value_t = AlphaOrder::BeforeMStep)]
    alpha_order: AlphaOrder,
    #[arg(long, default_value_t = smixs::config::DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value_t = smixs::config::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = smixs::config::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, env = "SMIXS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BicDf::Naive)]
    bic_df: BicDf,
    #[arg(long, value_enum, default_value_t = VarianceEstimator::Corrected)]
    variance: VarianceEstimator,
    #[arg(long, value_enum, default_value_t = Backend::Banded)]
    backend: Backend,
    /// Worker threads for restarts (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl FitOptions {
    fn config(&self) -> FitConfig {
        FitConfig {
            mode: self.mode,
            alpha_mode: self.alpha_mode.clone(),
            alpha_order: self.alpha_order,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed: self.seed,
            bic_df: self.bic_df,
            variance: self.variance,
            backend: self.backend,
            workers: self.workers,
            ..FitConfig::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV.
    data: PathBuf,
    /// Number of clusters.
    #[arg(long, required_unless_present = "select_c", conflicts_with = "select_c")]
    c: Option<usize>,
    /// Choose the cluster count from an inclusive range `lo:hi` by BIC.
    #[arg(long, value_parser = parse_range)]
    select_c: Option<CountRange>,
    /// Relative BIC improvement below which a larger count is not worth it.
    #[arg(long, default_value_t = 0.03)]
    bic_threshold: f64,
    #[command(flatten)]
    options: FitOptions,
    /// Include per-phase wall-clock times in the model JSON.
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV the model is scored on.
    #[arg(long)]
    data: PathBuf,
    /// Ground-truth JSON; defaults to the sidecar next to the dataset.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Metrics JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Also write long-format metrics CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[arg(long, value_parser = |s: &str| s.parse::<SweepAxis>())]
    sweep: SweepAxis,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "gmm,smixs,smixs-ca,smixs-ca-nr", value_parser = |s: &str| s.parse::<Variant>())]
    variants: Vec<Variant>,
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, env = "SMIXS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// EM iterations per timed fit.
    #[arg(long, default_value_t = 10, conflicts_with = "converge")]
    iters: usize,
    /// Run every fit to convergence instead of a fixed iteration count.
    #[arg(long)]
    converge: bool,
    #[arg(long)]
    out: PathBuf,
    /// Also write one CSV row per sweep point and variant.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Metrics CSV of the first method.
    a: PathBuf,
    /// Metrics CSV of the second method.
    b: PathBuf,
    #[arg(long, default_value = "f_score", value_parser = ["f_score", "rmse"])]
    metric: String,
}

#[derive(Clone)]
struct CountRange(Vec<usize>);

fn parse_range(s: &str) -> Result<CountRange, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got '{s}'"))?;
    let lo: usize = lo.parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: usize = hi.parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    if lo == 0 || lo > hi {
        return Err(format!("range must satisfy 1 <= lo <= hi, got {lo}:{hi}"));
    }
    Ok(CountRange((lo..=hi).collect()))
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn generate(args: GenerateArgs) -> CmdResult {
    let data = generate_dataset(&args.spec.spec(args.seed))?;
    io::write_atomic(&args.out, &io::dataset_to_csv(&data.dataset)?)?;
    io::write_json(&io::truth_path(&args.out), &Truth::from_synthetic(&data))?;
    Ok(())
}

fn model_file(fit: &FitResult, d: &Dataset, cfg: &FitConfig, failed: usize, timings: bool) -> Result<ModelFile, Error> {
    let k = parameter_count(fit, d, cfg.bic_df, cfg.mode)?;
    Ok(ModelFile {
        schema: MODEL_SCHEMA,
        t: d.t().to_vec(),
        clusters: fit.params.clusters.clone(),
        loglik: fit.loglik,
        bic: smixs::init::bic_value(fit.loglik, k, d.n()),
        iterations: fit.iterations,
        converged: fit.converged,
        objective_trace: fit.objective_trace.clone(),
        failed_restarts: failed,
        selection: None,
        timings: timings.then(|| TimingReport::from(&fit.timings)),
    })
}

fn fit(args: FitArgs) -> CmdResult {
    let d = io::read_dataset(&args.data)?;
    let cfg = args.options.config();
    let model = if let Some(CountRange(range)) = args.select_c {
        let mut plan = RestartPlan::new(cfg.restarts, cfg.seed, range);
        plan.bic_threshold = args.bic_threshold;
        let sel = select_cluster_count(&d, &plan, &cfg)?;
        let mut m = model_file(&sel.fit, &d, &cfg, 0, args.timings)?;
        m.selection = Some(SelectionReport { chosen_c: sel.chosen_c, exhausted: sel.exhausted, curve: sel.curve });
        m
    } else {
        let c = args.c.expect("clap enforces --c or --select-c");
        let plan = RestartPlan::new(cfg.restarts, cfg.seed, vec![c]);
        let outcome = run_restarts(&d, c, &plan, &cfg)?;
        let failed = outcome.records.iter().filter(|r| r.error.is_some()).count();
        let Some((_, best)) = outcome.best else {
            for r in &outcome.records {
                if let Some(e) = &r.error {
                    eprintln!("restart seed {}: {e}", r.seed);
                }
            }
            return Err(Error::AllRestartsFailed(plan.n_restarts).into());
        };
        model_file(&best, &d, &cfg, failed, args.timings)?
    };
    io::write_json(&args.out, &model)?;
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn evaluate(args: EvaluateArgs) -> CmdResult {
    let model = ModelFile::load(&args.model)?;
    let d = io::read_dataset(&args.data)?;
    let truth_path = args.truth.unwrap_or_else(|| io::truth_path(&args.data));
    if !truth_path.exists() {
        return Err(Failure::Input(format!("truth file {} not found", truth_path.display())));
    }
    let truth: Truth = io::read_json(&truth_path)?;
    if model.t != d.t() {
        return Err(Failure::Input("model and dataset have different measurement times".into()));
    }
    let params = model.params();
    let resp = e_step(&d, &params)?;
    let metrics = evaluate_params(&params, &resp, &truth.labels, &truth.means_array()?)?;
    let row = MetricsFile { dataset: dataset_name(&args.data), metrics };
    io::write_json(&args.out, &row)?;
    if let Some(csv) = &args.csv {
        io::write_atomic(csv, &io::metrics_csv(std::slice::from_ref(&row))?)?;
    }
    Ok(())
}

fn bench_csv(report: &BenchReport) -> Result<Vec<u8>, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["axis", "value", "variant", "seconds", "ratio_to_gmm", "iterations", "error"]).map_err(err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    for r in &report.rows {
        w.write_record([
            report.axis.to_string(),
            r.axis_value.to_string(),
            r.variant.to_string(),
            opt(r.seconds),
            opt(r.ratio_to_gmm),
            r.iterations.map_or(String::new(), |i| i.to_string()),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
}

fn benchmark(args: BenchmarkArgs) -> CmdResult {
    let settings = BenchSettings {
        axis: args.sweep,
        values: args.values,
        base: args.spec.spec(args.seed),
        variants: args.variants,
        fit: FitConfig { seed: args.seed, ..FitConfig::default() },
        repeats: args.repeats,
        iterations: (!args.converge).then_some(args.iters),
    };
    let report = run_benchmark(&settings)?;
    io::write_json(&args.out, &report)?;
    if let Some(csv) = &args.csv {
        io::write_atomic(csv, &bench_csv(&report)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Comparison {
    metric: String,
    datasets: usize,
    wins_a: usize,
    wins_b: usize,
    ties: usize,
}

fn compare(args: CompareArgs) -> CmdResult {
    let a = io::read_metric_column(&args.a, &args.metric)?;
    let b = io::read_metric_column(&args.b, &args.metric)?;
    if let Some(((na, _), (nb, _))) = a.iter().zip(&b).find(|((x, _), (y, _))| x != y) {
        return Err(Failure::Input(format!("datasets are not paired: '{na}' vs '{nb}'")));
    }
    let better = if args.metric == "rmse" { Better::Lower } else { Better::Higher };
    let va: Vec<f64> = a.iter().map(|(_, v)| *v).collect();
    let vb: Vec<f64> = b.iter().map(|(_, v)| *v).collect();
    let (wins_a, wins_b, ties) = head_to_head(&va, &vb, better)?;
    let out = Comparison { metric: args.metric, datasets: va.len(), wins_a, wins_b, ties };
    println!("{}", serde_json::to_string_pretty(&out).map_err(|e| Failure::Input(e.to_string()))?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Fit(a) => fit(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
