//! Building least-squares SDP instances from data: neighbor graphs, pair
//! differences, Gaussian kernels, scaling and synthetic planted problems.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::PairMap;
use crate::spectral::{sym_eigen, FactoredPsd};

/// Covariates (n × d_in) and responses (n × m).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub responses: DMatrix<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, responses: DMatrix<f64>) -> Result<Self> {
        if features.nrows() < 2 {
            return Err(Error::invalid("dataset needs at least two samples"));
        }
        if responses.nrows() != features.nrows() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} response rows",
                features.nrows(),
                responses.nrows()
            )));
        }
        if features
            .iter()
            .chain(responses.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Self {
            features,
            responses,
        })
    }

    pub fn with_labels(features: DMatrix<f64>, labels: &[i64]) -> Result<Self> {
        Self::new(features, one_hot(labels)?)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }
}

/// A (possibly scaled) instance of `min (1/n)‖A(U) − b‖²` over PSD `U` with
/// target rank `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdppInstance {
    pub map: PairMap,
    pub b: DVector<f64>,
    pub n_samples: usize,
    pub r: usize,
    /// Cumulative factor applied to `A` by scaling (1 when unscaled).
    pub scale_a: f64,
    /// Cumulative factor applied to `b` by scaling (1 when unscaled).
    pub scale_b: f64,
}

impl SdppInstance {
    pub fn new(map: PairMap, b: DVector<f64>, n_samples: usize, r: usize) -> Result<Self> {
        if b.len() != map.p() {
            return Err(Error::invalid(format!(
                "target has length {} but operator has {} pairs",
                b.len(),
                map.p()
            )));
        }
        if n_samples == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        if r == 0 || r > map.d() {
            return Err(Error::invalid(format!("rank {r} outside 1..={}", map.d())));
        }
        if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("targets must be finite and nonnegative"));
        }
        Ok(Self {
            map,
            b,
            n_samples,
            r,
            scale_a: 1.0,
            scale_b: 1.0,
        })
    }

    pub fn d(&self) -> usize {
        self.map.d()
    }

    pub fn p(&self) -> usize {
        self.map.p()
    }

    /// Maps a solution of this instance back to the coordinates of the
    /// original unscaled problem: `U = (scale_b / scale_a) · Ũ`.
    pub fn unscale_solution(&self, u: &FactoredPsd) -> FactoredPsd {
        u.scaled(self.scale_b / self.scale_a)
    }

    /// Converts an objective value of this instance to the unscaled problem.
    pub fn unscale_objective(&self, j: f64) -> f64 {
        j * self.scale_b * self.scale_b
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = InstanceFile::from(self);
        let text = serde_json::to_string(&file)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&InstanceFile::from(self))?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance()
    }
}

pub const INSTANCE_FORMAT: &str = "rcsdp-instance";
pub const INSTANCE_VERSION: u32 = 1;

/// On-disk JSON layout of an [`SdppInstance`]. `taus` holds one array per
/// pair (length `d` each).
#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format: String,
    pub version: u32,
    pub d: usize,
    pub p: usize,
    pub n: usize,
    pub r: usize,
    pub scale_a: f64,
    pub scale_b: f64,
    pub taus: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl From<&SdppInstance> for InstanceFile {
    fn from(inst: &SdppInstance) -> Self {
        let t = inst.map.taus();
        InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            version: INSTANCE_VERSION,
            d: inst.d(),
            p: inst.p(),
            n: inst.n_samples,
            r: inst.r,
            scale_a: inst.scale_a,
            scale_b: inst.scale_b,
            taus: (0..inst.p())
                .map(|i| t.column(i).iter().copied().collect())
                .collect(),
            b: inst.b.iter().copied().collect(),
        }
    }
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<SdppInstance> {
        if self.format != INSTANCE_FORMAT {
            return Err(Error::Format(format!(
                "expected format '{INSTANCE_FORMAT}', found '{}'",
                self.format
            )));
        }
        if self.version != INSTANCE_VERSION {
            return Err(Error::Format(format!(
                "unsupported instance version {}",
                self.version
            )));
        }
        if self.taus.len() != self.p || self.taus.iter().any(|t| t.len() != self.d) {
            return Err(Error::Format(
                "difference vectors do not match declared d and p".into(),
            ));
        }
        let flat: Vec<f64> = self.taus.into_iter().flatten().collect();
        let map = PairMap::new(DMatrix::from_column_slice(self.d, self.p, &flat))?;
        let mut inst = SdppInstance::new(map, DVector::from_vec(self.b), self.n, self.r)?;
        inst.scale_a = self.scale_a;
        inst.scale_b = self.scale_b;
        Ok(inst)
    }
}

fn sq_dist_rows(x: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..x.ncols())
        .map(|c| (x[(i, c)] - x[(j, c)]).powi(2))
        .sum()
}

/// Directed k-nearest-neighbor graph over the rows of `features`, excluding
/// self. Edges are ordered by source, then neighbor rank; distance ties go to
/// the smaller index.
pub fn knn_graph(features: &DMatrix<f64>, k: usize) -> Result<Vec<(usize, usize)>> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "neighborhood size {k} must be in 1..{n}"
        )));
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (sq_dist_rows(features, i, j), j)),
        );
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(cand.iter().take(k).map(|&(_, j)| (i, j)));
    }
    Ok(edges)
}

/// Default neighborhood size `round(ln n)`, at least 1 and at most `n − 1`.
pub fn default_knn(n: usize) -> usize {
    ((n as f64).ln().round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// One difference column `xᵢ − xⱼ` and target `‖yᵢ − yⱼ‖²` per edge.
pub fn build_pairs(
    dataset: &Dataset,
    graph: &[(usize, usize)],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if graph.is_empty() {
        return Err(Error::invalid("neighbor graph is empty"));
    }
    let n = dataset.n();
    let x = &dataset.features;
    let y = &dataset.responses;
    let mut taus = DMatrix::zeros(x.ncols(), graph.len());
    let mut b = DVector::zeros(graph.len());
    for (col, &(i, j)) in graph.iter().enumerate() {
        if i >= n || j >= n {
            return Err(Error::invalid(format!(
                "edge ({i}, {j}) out of range for {n} samples"
            )));
        }
        for r in 0..x.ncols() {
            taus[(r, col)] = x[(i, r)] - x[(j, r)];
        }
        b[col] = sq_dist_rows(y, i, j);
    }
    Ok((taus, b))
}

/// One-hot encoding with one column per distinct label, in ascending label
/// order.
pub fn one_hot(labels: &[i64]) -> Result<DMatrix<f64>> {
    if labels.is_empty() {
        return Err(Error::invalid("labels are empty"));
    }
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut y = DMatrix::zeros(labels.len(), classes.len());
    for (i, l) in labels.iter().enumerate() {
        let c = classes.binary_search(l).expect("label present");
        y[(i, c)] = 1.0;
    }
    Ok(y)
}

/// Silverman rule of thumb `t = 1.06·n^(−1/5)·√(Σ‖xᵢ − x̄‖² / (n − 1))`.
pub fn silverman_bandwidth(features: &DMatrix<f64>) -> Result<f64> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::invalid("bandwidth needs at least two samples"));
    }
    let mean = features.row_mean();
    let spread: f64 = features
        .row_iter()
        .map(|row| (row - &mean).norm_squared())
        .sum();
    if spread == 0.0 {
        return Err(Error::DegenerateData(
            "all samples coincide; supply an explicit bandwidth".into(),
        ));
    }
    Ok(1.06 * (n as f64).powf(-0.2) * (spread / (n as f64 - 1.0)).sqrt())
}

/// Gaussian kernel `exp(−‖x − y‖² / (ς t²))` between rows of `a` and rows of `b`.
pub fn gaussian_cross_kernel(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    varsigma: f64,
    t: f64,
) -> DMatrix<f64> {
    let denom = varsigma * t * t;
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let s: f64 = (0..a.ncols())
            .map(|c| (a[(i, c)] - b[(j, c)]).powi(2))
            .sum();
        (-s / denom).exp()
    })
}

/// Symmetric Gaussian Gram matrix over the rows of `features`.
pub fn gaussian_gram(features: &DMatrix<f64>, varsigma: f64, t: f64) -> Result<DMatrix<f64>> {
    if !(varsigma > 0.0) || !(t > 0.0) {
        return Err(Error::invalid("kernel parameters must be positive"));
    }
    let n = features.nrows();
    let denom = varsigma * t * t;
    let mut k = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (-sq_dist_rows(features, i, j) / denom).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Builds an unscaled instance from raw covariates.
pub fn build_instance(dataset: &Dataset, k: usize, r: usize) -> Result<SdppInstance> {
    let graph = knn_graph(&dataset.features, k)?;
    let (taus, b) = build_pairs(dataset, &graph)?;
    SdppInstance::new(PairMap::new(taus)?, b, dataset.n(), r)
}

/// Kernelized instance: kernel rows stand in for covariates, so `d = n`.
pub fn build_kernel_instance(
    kernel: &DMatrix<f64>,
    responses: &DMatrix<f64>,
    k: usize,
    r: usize,
) -> Result<SdppInstance> {
    if kernel.nrows() != kernel.ncols() {
        return Err(Error::invalid("kernel matrix must be square"));
    }
    let dataset = Dataset::new(kernel.clone(), responses.clone())?;
    build_instance(&dataset, k, r)
}

/// Rescales to `‖A‖_F = 1` and `‖b‖ = 1`, accumulating the applied factors.
pub fn scale_instance(inst: &SdppInstance) -> Result<SdppInstance> {
    let fa = inst.map.frob_a();
    let nb = inst.b.norm();
    if fa == 0.0 {
        return Err(Error::DegenerateData("operator is identically zero".into()));
    }
    if nb == 0.0 {
        return Err(Error::DegenerateData("target vector is zero".into()));
    }
    Ok(SdppInstance {
        map: inst.map.scaled(1.0 / fa),
        b: &inst.b / nb,
        n_samples: inst.n_samples,
        r: inst.r,
        scale_a: inst.scale_a * fa,
        scale_b: inst.scale_b * nb,
    })
}

/// `P = Q_r diag(√λ₁ … √λ_r)` from the top-r eigenpairs of `U`.
pub fn extract_projection(u: &FactoredPsd, r: usize) -> Result<DMatrix<f64>> {
    let d = u.order();
    if r == 0 || r > d {
        return Err(Error::invalid(format!(
            "projection rank {r} outside 1..={d}"
        )));
    }
    let eig = sym_eigen(&u.to_dense())?;
    let mut p = eig.vectors.columns(0, r).into_owned();
    for j in 0..r {
        p.column_mut(j).scale_mut(eig.values[j].max(0.0).sqrt());
    }
    Ok(p)
}

/// Random planted problem: unit-norm τ vectors, `U* = PPᵀ` with standard
/// normal `P ∈ R^{d×r}`, `b = A(U*) + σ·noise` clamped at zero. The sample
/// count is set to the number of pairs.
pub fn synthetic_instance(
    d: usize,
    r: usize,
    n_pairs: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(SdppInstance, FactoredPsd)> {
    if d == 0 || r == 0 || r > d {
        return Err(Error::invalid(format!(
            "need 1 <= r <= d, got r={r}, d={d}"
        )));
    }
    if n_pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taus = DMatrix::zeros(d, n_pairs);
    for i in 0..n_pairs {
        loop {
            for k in 0..d {
                taus[(k, i)] = StandardNormal.sample(&mut rng);
            }
            let nrm = taus.column(i).norm();
            if nrm > 1e-8 {
                taus.column_mut(i).unscale_mut(nrm);
                break;
            }
        }
    }
    let planted = FactoredPsd::new(DMatrix::from_fn(d, r, |_, _| {
        StandardNormal.sample(&mut rng)
    }))?;
    let map = PairMap::new(taus)?;
    let mut b = map.apply_factored(&planted)?;
    if noise_sigma > 0.0 {
        for v in b.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v = (*v + noise_sigma * e).max(0.0);
        }
    }
    Ok((SdppInstance::new(map, b, n_pairs, r)?, planted))
}
