//! End-to-end protocols: solver comparison on one instance and kernel
//! dimension reduction followed by nearest-neighbor recognition.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dc::{
    initial_point, penalty_continuation, solve_fixed, Algorithm, SolveStatus, SolverConfig,
};
use crate::error::{Error, Result};
use crate::problem::{
    build_kernel_instance, default_knn, extract_projection, gaussian_cross_kernel, gaussian_gram,
    one_hot, scale_instance, silverman_bandwidth, SdppInstance,
};

/// One solver's outcome in a comparison run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub algorithm: String,
    #[serde(rename = "J")]
    pub j: f64,
    pub eta: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub seconds: f64,
    pub rank: usize,
    pub c_final: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<RunRow>,
}

const RUN_COLUMNS: [&str; 9] = [
    "algorithm",
    "J",
    "eta",
    "outer_iters",
    "inner_iters",
    "seconds",
    "rank",
    "c_final",
    "status",
];

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterations => "max_iterations",
        SolveStatus::RankNotReached => "rank_not_reached",
    }
}

impl RunReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.algorithm.clone(),
                format!("{:e}", r.j),
                format!("{:e}", r.eta),
                r.outer_iters.to_string(),
                r.inner_iters.to_string(),
                format!("{:.6}", r.seconds),
                r.rank.to_string(),
                format!("{:e}", r.c_final),
                status_name(r.status).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Runs every listed algorithm at the same penalty `c` from the same convex
/// initial point. Timing covers the solver work only; the shared initial
/// point is computed once up front.
pub fn run_bench(
    inst: &SdppInstance,
    algorithms: &[Algorithm],
    c: f64,
    cfg: &SolverConfig,
) -> Result<RunReport> {
    if algorithms.is_empty() {
        return Err(Error::invalid("no algorithms requested"));
    }
    let u0 = initial_point(inst, cfg)?;
    let mut rows = Vec::with_capacity(algorithms.len());
    for &alg in algorithms {
        let start = Instant::now();
        let sol = solve_fixed(inst, alg, c, cfg, &u0, None)?;
        rows.push(RunRow {
            algorithm: alg.name().to_string(),
            j: sol.objective_j,
            eta: sol.final_eta(),
            outer_iters: sol.outer_iters,
            inner_iters: sol.inner_iters,
            seconds: start.elapsed().as_secs_f64(),
            rank: sol.rank,
            c_final: sol.c_final,
            status: sol.status,
        });
    }
    Ok(RunReport { rows })
}

/// Settings for the recognition protocol: `train_per_class` samples of each
/// class are drawn for training, the rest are test points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrConfig {
    pub rank: usize,
    pub train_per_class: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Kernel width multiplier ς in `exp(−‖x − y‖² / (ς t²))`.
    pub varsigma: f64,
    /// Explicit bandwidth `t`; Silverman's rule on the training set if absent.
    pub bandwidth: Option<f64>,
    /// Neighborhood size; `round(ln n_train)` if absent.
    pub knn: Option<usize>,
    pub algorithm: Algorithm,
    pub solver: SolverConfig,
    /// Worker threads for independent repetitions.
    pub threads: usize,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            rank: 2,
            train_per_class: 5,
            repetitions: 10,
            seed: 0,
            varsigma: 2.0,
            bandwidth: None,
            knn: None,
            algorithm: Algorithm::Sipdca,
            solver: SolverConfig::default(),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub accuracy: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub seconds: f64,
    pub rank: usize,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionReport {
    /// `G{p}/T{q}`: p training samples per class, q the smallest per-class
    /// test count.
    pub partition: String,
    pub repetitions: usize,
    pub mean_accuracy: f64,
    /// Population standard deviation of the per-repetition accuracies.
    pub std_accuracy: f64,
    #[serde(rename = "mean_J")]
    pub mean_j: f64,
    pub mean_seconds: f64,
    pub runs: Vec<RepetitionResult>,
}

impl RecognitionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Indices of each class, keyed by label.
fn class_members(labels: &[i64]) -> BTreeMap<i64, Vec<usize>> {
    let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        map.entry(l).or_default().push(i);
    }
    map
}

/// Random per-class split: `(train, test)` index lists.
pub fn split_per_class(
    labels: &[i64],
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut idx) in class_members(labels) {
        if idx.len() < per_class + 1 {
            return Err(Error::InvalidPartition(format!(
                "class {label} has {} samples, need at least {}",
                idx.len(),
                per_class + 1
            )));
        }
        idx.shuffle(rng);
        train.extend_from_slice(&idx[..per_class]);
        test.extend_from_slice(&idx[per_class..]);
    }
    Ok((train, test))
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Index of the nearest row of `reference` to each row of `queries`; ties go
/// to the smaller index.
pub fn nearest_neighbors(reference: &DMatrix<f64>, queries: &DMatrix<f64>) -> Vec<usize> {
    (0..queries.nrows())
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for r in 0..reference.nrows() {
                let d = (queries.row(q) - reference.row(r)).norm_squared();
                if d < best.0 {
                    best = (d, r);
                }
            }
            best.1
        })
        .collect()
}

/// Learned kernel projection with the data needed to embed new points.
#[derive(Debug, Clone)]
pub struct KernelProjection {
    pub train_features: DMatrix<f64>,
    pub varsigma: f64,
    pub bandwidth: f64,
    /// `P ∈ R^{n_train × r}`
    pub projection: DMatrix<f64>,
}

impl KernelProjection {
    /// Embeds rows of `x` as `k(x, X_train)·P`.
    pub fn embed(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        gaussian_cross_kernel(x, &self.train_features, self.varsigma, self.bandwidth)
            * &self.projection
    }
}

/// Fits the rank-constrained kernel projection on one training set.
pub fn fit_kernel_projection(
    features: &DMatrix<f64>,
    labels: &[i64],
    cfg: &DrConfig,
) -> Result<(KernelProjection, crate::dc::Solution)> {
    let t = match cfg.bandwidth {
        Some(t) => t,
        None => silverman_bandwidth(features)?,
    };
    let kernel = gaussian_gram(features, cfg.varsigma, t)?;
    let responses = one_hot(labels)?;
    let k = cfg.knn.unwrap_or_else(|| default_knn(features.nrows()));
    let raw = build_kernel_instance(&kernel, &responses, k, cfg.rank)?;
    if raw.b.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData(format!(
            "all {k}-nearest-neighbor pairs share a label; increase the neighborhood size"
        )));
    }
    let inst = scale_instance(&raw)?;
    let sol = penalty_continuation(&inst, &cfg.solver, cfg.algorithm)?;
    let projection = extract_projection(&sol.unscaled(&inst), cfg.rank)?;
    Ok((
        KernelProjection {
            train_features: features.clone(),
            varsigma: cfg.varsigma,
            bandwidth: t,
            projection,
        },
        sol,
    ))
}

fn accuracy(predicted: &[i64], truth: &[i64]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / truth.len() as f64
}

/// Repeated random-split recognition with 1-NN in the learned embedding.
/// Repetition `i` draws its split from seed `cfg.seed + i`.
pub fn run_dr(
    features: &DMatrix<f64>,
    labels: &[i64],
    cfg: &DrConfig,
) -> Result<RecognitionReport> {
    if features.nrows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} feature rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if cfg.repetitions == 0 || cfg.train_per_class == 0 {
        return Err(Error::invalid(
            "repetitions and train_per_class must be positive",
        ));
    }
    let min_test = class_members(labels)
        .values()
        .map(|v| v.len().saturating_sub(cfg.train_per_class))
        .min()
        .unwrap_or(0);

    let one = |rep: usize| -> Result<RepetitionResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
        let (train, test) = split_per_class(labels, cfg.train_per_class, &mut rng)?;
        let x_train = select_rows(features, &train);
        let y_train: Vec<i64> = train.iter().map(|&i| labels[i]).collect();
        let x_test = select_rows(features, &test);
        let y_test: Vec<i64> = test.iter().map(|&i| labels[i]).collect();

        let start = Instant::now();
        let (proj, sol) = fit_kernel_projection(&x_train, &y_train, cfg)?;
        let seconds = start.elapsed().as_secs_f64();
        let nn = nearest_neighbors(&proj.embed(&x_train), &proj.embed(&x_test));
        let predicted: Vec<i64> = nn.iter().map(|&i| y_train[i]).collect();
        Ok(RepetitionResult {
            repetition: rep,
            accuracy: accuracy(&predicted, &y_test),
            j: sol.objective_j,
            seconds,
            rank: sol.rank,
            status: sol.status,
        })
    };
    let threads = cfg.threads.clamp(1, cfg.repetitions);
    let mut runs: Vec<RepetitionResult> = if threads == 1 {
        (0..cfg.repetitions).map(one).collect::<Result<_>>()?
    } else {
        let one = &one;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    scope.spawn(move || {
                        (w..cfg.repetitions)
                            .step_by(threads)
                            .map(one)
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(cfg.repetitions);
            for h in handles {
                all.extend(h.join().expect("worker thread panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };
    runs.sort_by_key(|r| r.repetition);
    let m = runs.len() as f64;
    let mean = runs.iter().map(|r| r.accuracy).sum::<f64>() / m;
    let var = runs
        .iter()
        .map(|r| (r.accuracy - mean).powi(2))
        .sum::<f64>()
        / m;
    Ok(RecognitionReport {
        partition: format!("G{}/T{}", cfg.train_per_class, min_test),
        repetitions: cfg.repetitions,
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        mean_j: runs.iter().map(|r| r.j).sum::<f64>() / m,
        mean_seconds: runs.iter().map(|r| r.seconds).sum::<f64>() / m,
        runs,
    })
}
