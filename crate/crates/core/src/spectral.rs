//! Dense symmetric spectral toolkit: eigendecomposition, semidefinite cone
//! projections in factored form, Ky-Fan norms and their subgradients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold under which an eigenvalue is treated as zero when
/// splitting a matrix into its positive and negative parts.
pub const SPLIT_ZERO_TOL: f64 = 1e-12;

/// Default relative tolerance for [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Columns of a factor with norm below this are dropped by [`FactoredPsd::compact`].
pub const FACTOR_DROP_TOL: f64 = 1e-14;

/// Dense real symmetric matrix. Construction symmetrizes its input so the
/// stored entries satisfy `m[(i, j)] == m[(j, i)]` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    m: DMatrix<f64>,
}

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("symmetric matrix must have order >= 1"));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes `(m + mᵀ)/2` without checking shape. Callers guarantee a
    /// square, non-empty input.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { m }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    /// Trace inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &SymmetricMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &SymmetricMatrix) -> SymmetricMatrix {
        Self::symmetrized(&self.m + &other.m)
    }

    pub fn sub(&self, other: &SymmetricMatrix) -> SymmetricMatrix {
        Self::symmetrized(&self.m - &other.m)
    }

    pub fn scale(&self, s: f64) -> SymmetricMatrix {
        Self { m: &self.m * s }
    }

    /// `self + s·I`
    pub fn shift_diagonal(&self, s: f64) -> SymmetricMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += s;
        }
        Self { m }
    }

    /// Linear combination `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &SymmetricMatrix, b: f64) -> SymmetricMatrix {
        Self::symmetrized(&self.m * a + &other.m * b)
    }
}

/// Eigenpairs sorted by nonincreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// Rebuilds `Q diag(λ) Qᵀ`.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        SymmetricMatrix::symmetrized(&scaled * self.vectors.transpose())
    }
}

/// Positive semidefinite matrix stored as `factor · factorᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredPsd {
    factor: DMatrix<f64>,
}

impl FactoredPsd {
    pub fn new(factor: DMatrix<f64>) -> Result<Self> {
        if factor.nrows() == 0 {
            return Err(Error::invalid("factor must have at least one row"));
        }
        if factor.ncols() > factor.nrows() {
            return Err(Error::invalid(format!(
                "factor has {} columns for order {}",
                factor.ncols(),
                factor.nrows()
            )));
        }
        if factor.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("factor has non-finite entries"));
        }
        Ok(Self { factor })
    }

    pub(crate) fn from_factor_unchecked(factor: DMatrix<f64>) -> Self {
        Self { factor }
    }

    /// The zero matrix of order `d` (no columns).
    pub fn empty(d: usize) -> Self {
        Self {
            factor: DMatrix::zeros(d, 0),
        }
    }

    pub fn order(&self) -> usize {
        self.factor.nrows()
    }

    /// Number of stored columns.
    pub fn columns(&self) -> usize {
        self.factor.ncols()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn into_factor(self) -> DMatrix<f64> {
        self.factor
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        if self.factor.ncols() == 0 {
            return SymmetricMatrix::zeros(self.order());
        }
        SymmetricMatrix::symmetrized(&self.factor * self.factor.transpose())
    }

    /// `trace(V Vᵀ) = ‖V‖_F²`
    pub fn trace(&self) -> f64 {
        self.factor.norm_squared()
    }

    /// Factor of `s · V Vᵀ` for `s >= 0`.
    pub fn scaled(&self, s: f64) -> FactoredPsd {
        debug_assert!(s >= 0.0);
        Self {
            factor: &self.factor * s.sqrt(),
        }
    }

    /// Drops columns whose norm is below [`FACTOR_DROP_TOL`].
    pub fn compact(self) -> FactoredPsd {
        let keep: Vec<usize> = (0..self.factor.ncols())
            .filter(|&j| self.factor.column(j).norm() >= FACTOR_DROP_TOL)
            .collect();
        if keep.len() == self.factor.ncols() {
            return self;
        }
        Self {
            factor: self.factor.select_columns(keep.iter()),
        }
    }
}

/// Full dense symmetric eigendecomposition with eigenvalues sorted
/// nonincreasing; ties keep the backend's order, so output is deterministic.
pub fn sym_eigen(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = m.order();
    let eig = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(d, idx.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(idx.iter());
    Ok(EigenDecomposition { values, vectors })
}

/// Splits an eigendecomposition into `(Π₊, factor of −Π₋)`, i.e. `pos` with
/// columns `qᵢ√λᵢ` for positive λ and `neg` with `qᵢ√(−λᵢ)` for negative λ,
/// so that `M = pos·posᵀ − neg·negᵀ`.
pub fn psd_split_eigen(eig: &EigenDecomposition) -> (FactoredPsd, FactoredPsd) {
    let d = eig.order();
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = SPLIT_ZERO_TOL * scale.max(1.0);
    let pos: Vec<usize> = (0..d).filter(|&i| eig.values[i] > tol).collect();
    let neg: Vec<usize> = (0..d).filter(|&i| eig.values[i] < -tol).collect();
    let build = |ids: &[usize]| {
        let mut f = eig.vectors.select_columns(ids.iter());
        for (col, &i) in ids.iter().enumerate() {
            f.column_mut(col).scale_mut(eig.values[i].abs().sqrt());
        }
        FactoredPsd::from_factor_unchecked(f)
    };
    (build(&pos), build(&neg))
}

/// Projections onto the PSD and NSD cones, both returned as PSD factors.
pub fn psd_split(m: &SymmetricMatrix) -> Result<(FactoredPsd, FactoredPsd)> {
    Ok(psd_split_eigen(&sym_eigen(m)?))
}

/// Ky-Fan r-norm: sum of the r largest singular values.
pub fn kyfan_norm(m: &SymmetricMatrix, r: usize) -> Result<f64> {
    let eig = sym_eigen(m)?;
    kyfan_norm_eigen(&eig, r)
}

pub fn kyfan_norm_eigen(eig: &EigenDecomposition, r: usize) -> Result<f64> {
    let d = eig.order();
    if r == 0 || r > d {
        return Err(Error::invalid(format!("Ky-Fan order {r} outside 1..={d}")));
    }
    let mut mags: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[..r].iter().sum())
}

/// Subgradient `W = c Σᵢ₌₁ʳ qᵢqᵢᵀ` of `c‖·‖_(r)` at a PSD matrix, as the
/// factor `√c [q₁ … q_r]`.
pub fn kyfan_subgradient(eig: &EigenDecomposition, r: usize, c: f64) -> Result<FactoredPsd> {
    let d = eig.order();
    if r == 0 || r > d {
        return Err(Error::invalid(format!("Ky-Fan order {r} outside 1..={d}")));
    }
    if !(c >= 0.0) {
        return Err(Error::invalid("penalty must be nonnegative"));
    }
    if c == 0.0 {
        return Ok(FactoredPsd::empty(d));
    }
    let f = eig.vectors.columns(0, r) * c.sqrt();
    Ok(FactoredPsd::from_factor_unchecked(f))
}

/// Number of eigenvalues above `rel_tol · max(λ₁, 1e-30)`.
pub fn numerical_rank(m: &SymmetricMatrix, rel_tol: f64) -> Result<usize> {
    Ok(numerical_rank_eigen(&sym_eigen(m)?, rel_tol))
}

pub fn numerical_rank_eigen(eig: &EigenDecomposition, rel_tol: f64) -> usize {
    if eig.order() == 0 {
        return 0;
    }
    let cut = rel_tol * eig.values[0].max(1e-30);
    eig.values.iter().filter(|&&l| l > cut).count()
}

/// Numerical rank of a factored matrix through the small Gram `VᵀV`, whose
/// nonzero spectrum equals that of `VVᵀ`.
pub fn factored_rank(v: &FactoredPsd, rel_tol: f64) -> usize {
    let m = v.columns();
    if m == 0 {
        return 0;
    }
    let small = SymmetricMatrix::symmetrized(v.factor().transpose() * v.factor());
    match sym_eigen(&small) {
        Ok(e) => numerical_rank_eigen(&e, rel_tol),
        Err(_) => m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        SymmetricMatrix::new(m).unwrap()
    }

    fn random_psd(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
        let p = DMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0));
        SymmetricMatrix::new(&p * p.transpose()).unwrap()
    }

    #[test]
    fn construction_symmetrizes_exactly() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.1, 2.0]);
        let s = SymmetricMatrix::new(m).unwrap();
        assert_eq!(s.as_matrix()[(0, 1)], s.as_matrix()[(1, 0)]);
        assert!((s.as_matrix()[(0, 1)] - 0.2).abs() < 1e-15);
        assert!(SymmetricMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymmetricMatrix::new(DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn eigen_of_diagonal_sorts_values() {
        let e = sym_eigen(&SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        let expect = [0usize, 2, 1];
        for (col, &axis) in expect.iter().enumerate() {
            assert!((e.vectors[(axis, col)].abs() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_of_zero_matrix() {
        let z = SymmetricMatrix::zeros(4);
        let e = sym_eigen(&z).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
        assert!(e.reconstruct().frobenius_norm() < 1e-14);
        let qtq = e.vectors.transpose() * &e.vectors;
        assert!((qtq - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = f64::NAN;
        let s = SymmetricMatrix::symmetrized(m);
        assert!(matches!(sym_eigen(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn eigen_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_sym(6, &mut rng);
            let e = sym_eigen(&m).unwrap();
            let err = e.reconstruct().sub(&m).frobenius_norm();
            assert!(err <= 1e-8 * (1.0 + m.frobenius_norm()));
            let qtq = e.vectors.transpose() * &e.vectors;
            assert!((qtq - DMatrix::identity(6, 6)).amax() <= 1e-10);
            for w in e.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn split_diagonal() {
        let (pos, neg) = psd_split(&SymmetricMatrix::from_diagonal(&[2.0, -3.0])).unwrap();
        let p = pos.to_dense();
        assert!(
            (p.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).amax()
                < 1e-14
        );
        assert_eq!(neg.columns(), 1);
        assert!((neg.factor()[(0, 0)]).abs() < 1e-14);
        assert!((neg.factor()[(1, 0)].abs() - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn split_of_psd_is_identity_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_psd(5, 5, &mut rng);
        let (pos, neg) = psd_split(&m).unwrap();
        assert_eq!(neg.columns(), 0);
        assert!(pos.to_dense().sub(&m).frobenius_norm() < 1e-12);
    }

    #[test]
    fn split_matches_clamped_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_sym(8, &mut rng);
            let e = sym_eigen(&m).unwrap();
            let clamped = EigenDecomposition {
                values: e.values.map(|v| v.max(0.0)),
                vectors: e.vectors.clone(),
            }
            .reconstruct();
            let (pos, neg) = psd_split(&m).unwrap();
            assert!(pos.to_dense().sub(&clamped).frobenius_norm() < 1e-10);
            let back = pos.to_dense().sub(&neg.to_dense());
            assert!(back.sub(&m).frobenius_norm() <= 1e-8 * (1.0 + m.frobenius_norm()));
            assert!(pos.columns() + neg.columns() <= 8);
        }
    }

    #[test]
    fn kyfan_examples() {
        assert!((kyfan_norm(&SymmetricMatrix::identity(3), 2).unwrap() - 2.0).abs() < 1e-14);
        let d = SymmetricMatrix::from_diagonal(&[3.0, 2.0, 1.0]);
        assert!((kyfan_norm(&d, 2).unwrap() - 5.0).abs() < 1e-14);
        assert!(kyfan_norm(&d, 0).is_err());
        assert!(kyfan_norm(&d, 4).is_err());
        // magnitudes, not signed values
        let s = SymmetricMatrix::from_diagonal(&[1.0, -4.0, 2.0]);
        assert!((kyfan_norm(&s, 1).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn kyfan_matches_eigen_oracle_on_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_psd(7, 7, &mut rng);
        let e = sym_eigen(&m).unwrap();
        for r in 1..=7 {
            let oracle: f64 = e.values.iter().take(r).sum();
            assert!((kyfan_norm(&m, r).unwrap() - oracle).abs() < 1e-12);
            // nuclear minus Ky-Fan is nonnegative
            assert!(m.trace() - kyfan_norm(&m, r).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn subgradient_examples() {
        let e = sym_eigen(&SymmetricMatrix::from_diagonal(&[3.0, 2.0, 1.0])).unwrap();
        let w = kyfan_subgradient(&e, 2, 1.0).unwrap().to_dense();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((w.as_matrix() - expect).amax() < 1e-14);
        let w = kyfan_subgradient(&e, 3, 2.5).unwrap().to_dense();
        assert!((w.as_matrix() - DMatrix::identity(3, 3) * 2.5).amax() < 1e-14);
    }

    #[test]
    fn subgradient_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (d, r, c) = (6, 2, 0.7);
        let u = random_psd(d, 4, &mut rng);
        let e = sym_eigen(&u).unwrap();
        let w = kyfan_subgradient(&e, r, c).unwrap().to_dense();
        let fu = c * kyfan_norm(&u, r).unwrap();
        assert!((w.inner(&u) - fu).abs() < 1e-8);
        for _ in 0..100 {
            let z = random_psd(d, rng.random_range(1..=d), &mut rng);
            let lhs = c * kyfan_norm(&z, r).unwrap();
            let rhs = fu + w.inner(&z.sub(&u));
            assert!(lhs >= rhs - 1e-10);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(
            numerical_rank(&SymmetricMatrix::zeros(3), DEFAULT_RANK_TOL).unwrap(),
            0
        );
        let m = SymmetricMatrix::from_diagonal(&[1.0, 1e-12]);
        assert_eq!(numerical_rank(&m, DEFAULT_RANK_TOL).unwrap(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let planted = random_psd(12, 5, &mut rng);
        assert_eq!(numerical_rank(&planted, DEFAULT_RANK_TOL).unwrap(), 5);
    }

    #[test]
    fn factored_rank_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let f = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-1.0..1.0));
        let v = FactoredPsd::new(f).unwrap();
        assert_eq!(factored_rank(&v, DEFAULT_RANK_TOL), 4);
        assert_eq!(numerical_rank(&v.to_dense(), DEFAULT_RANK_TOL).unwrap(), 4);
        assert_eq!(factored_rank(&FactoredPsd::empty(3), DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn compact_drops_null_columns() {
        let mut f = DMatrix::zeros(3, 2);
        f[(0, 0)] = 1.0;
        let v = FactoredPsd::new(f).unwrap().compact();
        assert_eq!(v.columns(), 1);
        assert!(FactoredPsd::new(DMatrix::zeros(2, 3)).is_err());
    }
}
