//! `rcsdp`: build, solve and benchmark rank-constrained least-squares SDP
//! instances, and run the kernel dimension-reduction recognition protocol.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rcsdp_core::dc::{penalty_continuation_from, solve_fixed};
use rcsdp_core::io::{read_labels_csv, read_matrix_csv, write_log_jsonl, write_matrix_csv};
use rcsdp_core::pipeline::{run_bench, run_dr, DrConfig};
use rcsdp_core::problem::{
    build_instance, build_kernel_instance, default_knn, gaussian_gram, one_hot, scale_instance,
    silverman_bandwidth, synthetic_instance,
};
use rcsdp_core::{
    initial_point, objective_j, Algorithm, Dataset, Error, SdppInstance, SolveStatus, SolverConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "rcsdp",
    version,
    about = "Rank-constrained least-squares SDP solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scaled instance from covariates and responses or labels.
    Build(BuildArgs),
    /// Solve an instance by penalty continuation, or at a fixed penalty.
    Solve(SolveArgs),
    /// Compare solvers at one penalty from a shared initial point.
    Bench(BenchArgs),
    /// Kernel dimension reduction with 1-NN recognition over random splits.
    Dr(DrArgs),
    /// Generate a random planted instance.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// JSON file overriding solver defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "eps-init")]
    eps_init: Option<f64>,
    /// η threshold for the proximal DC methods (and the extrapolated one).
    #[arg(long = "eta-tol")]
    eta_tol: Option<f64>,
}

impl SolverFlags {
    fn resolve(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).map_err(Error::from)?
            }
            None => SolverConfig::default(),
        };
        if let Some(v) = self.c0 {
            cfg.c0 = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.kappa {
            cfg.kappa = v;
        }
        if let Some(v) = self.eps_init {
            cfg.eps_init = v;
        }
        if let Some(v) = self.eta_tol {
            cfg.eta_tol = v;
            cfg.eta_tol_pdcae = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Covariates, one sample per row.
    #[arg(long)]
    features: PathBuf,
    /// Real-valued responses, one sample per row.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    responses: Option<PathBuf>,
    /// Integer class labels, encoded one-hot.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    rank: usize,
    /// Neighborhood size; round(ln n) by default.
    #[arg(long)]
    knn: Option<usize>,
    /// Replace covariates by Gaussian kernel rows (d = n).
    #[arg(long)]
    kernel: bool,
    #[arg(long, default_value_t = 2.0)]
    varsigma: f64,
    /// Kernel bandwidth t; Silverman's rule by default.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "sipdca")]
    algo: Algorithm,
    /// Overrides the instance's target rank.
    #[arg(long)]
    rank: Option<usize>,
    /// Solve once at this penalty instead of running continuation.
    #[arg(long)]
    c: Option<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Accepted for interface symmetry; a single solve runs sequentially.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory for factor.csv, log.jsonl and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated list of algorithms.
    #[arg(long, value_delimiter = ',', default_value = "pdcae,pdca,sipdca")]
    algo: Vec<Algorithm>,
    #[arg(long)]
    rank: Option<usize>,
    /// Common penalty value.
    #[arg(long, default_value_t = 0.01)]
    c: f64,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DrArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Training samples drawn per class; the rest are test points.
    #[arg(long = "train-per-class", default_value_t = 5)]
    train_per_class: usize,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    varsigma: f64,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long, default_value = "sipdca")]
    algo: Algorithm,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Report path (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    rank: usize,
    /// Number of pairs p.
    #[arg(long)]
    pairs: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for instance.json, planted.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_instance(path: &Path, rank: Option<usize>) -> anyhow::Result<SdppInstance> {
    let mut inst = SdppInstance::load_json(path)?;
    if let Some(r) = rank {
        if r == 0 || r > inst.d() {
            bail!(Error::InvalidInput(format!(
                "rank {r} outside 1..={}",
                inst.d()
            )));
        }
        inst.r = r;
    }
    Ok(scale_instance(&inst)?)
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIterations => 3,
        SolveStatus::RankNotReached => 4,
    }
}

fn cmd_build(args: &BuildArgs) -> anyhow::Result<u8> {
    let features = read_matrix_csv(&args.features)?;
    let responses = match (&args.responses, &args.labels) {
        (Some(p), _) => read_matrix_csv(p)?,
        (None, Some(p)) => one_hot(&read_labels_csv(p)?)?,
        (None, None) => bail!(Error::InvalidInput("need --responses or --labels".into())),
    };
    let n = features.nrows();
    let k = args.knn.unwrap_or_else(|| default_knn(n));
    let raw = if args.kernel {
        let t = match args.bandwidth {
            Some(t) => t,
            None => silverman_bandwidth(&features)?,
        };
        let kernel = gaussian_gram(&features, args.varsigma, t)?;
        build_kernel_instance(&kernel, &responses, k, args.rank)?
    } else {
        build_instance(&Dataset::new(features, responses)?, k, args.rank)?
    };
    let inst = scale_instance(&raw)?;
    inst.save_json(&args.out)?;
    eprintln!(
        "instance: d={} p={} n={} r={}",
        inst.d(),
        inst.p(),
        inst.n_samples,
        inst.r
    );
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let cfg = args.solver.resolve()?;
    let inst = load_instance(&args.instance, args.rank)?;
    fs::create_dir_all(&args.out)?;
    let u0 = initial_point(&inst, &cfg)?;
    let sol = match args.c {
        Some(c) => solve_fixed(&inst, args.algo, c, &cfg, &u0, None)?,
        None => penalty_continuation_from(&inst, &cfg, args.algo, &u0, None)?,
    };
    let factor = sol.unscaled(&inst);
    write_matrix_csv(&args.out.join("factor.csv"), factor.factor())?;
    write_log_jsonl(&args.out.join("log.jsonl"), &sol.log)?;
    let report = json!({
        "algorithm": args.algo.name(),
        "J": sol.objective_j,
        "J_unscaled": inst.unscale_objective(sol.objective_j),
        "Jc": sol.objective_jc,
        "eta": sol.final_eta(),
        "rank": sol.rank,
        "c_final": sol.c_final,
        "status": sol.status,
        "outer_iters": sol.outer_iters,
        "inner_iters": sol.inner_iters,
        "seconds": sol.seconds,
    });
    write_text(
        &args.out.join("report.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    eprintln!(
        "{}: J={:e} rank={} c={:e} status={:?}",
        args.algo.name(),
        sol.objective_j,
        sol.rank,
        sol.c_final,
        sol.status
    );
    Ok(status_code(sol.status))
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let cfg = args.solver.resolve()?;
    let inst = load_instance(&args.instance, args.rank)?;
    fs::create_dir_all(&args.out)?;
    let report = run_bench(&inst, &args.algo, args.c, &cfg)?;
    report.write_csv(fs::File::create(args.out.join("report.csv"))?)?;
    write_text(&args.out.join("report.json"), &report.to_json()?)?;
    report.write_csv(std::io::stdout())?;
    Ok(report
        .rows
        .iter()
        .map(|r| status_code(r.status))
        .max()
        .unwrap_or(0))
}

fn cmd_dr(args: &DrArgs) -> anyhow::Result<u8> {
    let features = read_matrix_csv(&args.features)?;
    let labels = read_labels_csv(&args.labels)?;
    let cfg = DrConfig {
        rank: args.rank,
        train_per_class: args.train_per_class,
        repetitions: args.repetitions,
        seed: args.seed,
        varsigma: args.varsigma,
        bandwidth: args.bandwidth,
        knn: args.knn,
        algorithm: args.algo,
        solver: args.solver.resolve()?,
        threads: args.threads.max(1),
    };
    let report = run_dr(&features, &labels, &cfg)?;
    write_text(&args.out, &report.to_json()?)?;
    eprintln!(
        "{}: accuracy {:.2} ± {:.2} % over {} runs",
        report.partition, report.mean_accuracy, report.std_accuracy, report.repetitions
    );
    Ok(0)
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<u8> {
    let (inst, planted) = synthetic_instance(args.d, args.rank, args.pairs, args.noise, args.seed)?;
    fs::create_dir_all(&args.out)?;
    inst.save_json(&args.out.join("instance.json"))?;
    write_matrix_csv(&args.out.join("planted.csv"), planted.factor())?;
    let summary = json!({
        "d": args.d,
        "rank": args.rank,
        "pairs": args.pairs,
        "noise": args.noise,
        "seed": args.seed,
        "J_planted": objective_j(&inst, &planted)?,
    });
    write_text(
        &args.out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    Ok(0)
}

/// Input problems exit with 2, anything else with 1.
fn error_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NumericalFailure(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Dr(a) => cmd_dr(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(error_code(&err))
        }
    }
}
