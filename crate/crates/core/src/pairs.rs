//! The pair-difference measurement operator `A(U)ᵢ = τᵢᵀ U τᵢ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{FactoredPsd, SymmetricMatrix};

/// Linear map `A: Sᵈ → Rᵖ` with rank-one sensing matrices `Aᵢ = τᵢτᵢᵀ`.
///
/// The difference vectors are stored column-major as a `d × p` array. The
/// Gram matrix `AAᵀ` with entries `(τᵢᵀτⱼ)²` is precomputed unless disabled,
/// in which case [`PairMap::gram_matvec`] falls back to `A(A*(z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMap {
    taus: DMatrix<f64>,
    gram: Option<DMatrix<f64>>,
    sq_norms: DVector<f64>,
    frob_a: f64,
}

impl PairMap {
    pub fn new(taus: DMatrix<f64>) -> Result<Self> {
        Self::with_gram(taus, true)
    }

    pub fn with_gram(taus: DMatrix<f64>, precompute_gram: bool) -> Result<Self> {
        if taus.nrows() == 0 {
            return Err(Error::invalid("pair map needs matrix order d >= 1"));
        }
        if taus.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "difference vectors contain non-finite entries",
            ));
        }
        let p = taus.ncols();
        let sq_norms = DVector::from_iterator(p, (0..p).map(|i| taus.column(i).norm_squared()));
        let frob_a = sq_norms.iter().map(|s| s * s).sum::<f64>().sqrt();
        let gram = precompute_gram.then(|| {
            let mut g = taus.transpose() * &taus;
            g.apply(|v| *v = *v * *v);
            g
        });
        Ok(Self {
            taus,
            gram,
            sq_norms,
            frob_a,
        })
    }

    pub fn d(&self) -> usize {
        self.taus.nrows()
    }

    pub fn p(&self) -> usize {
        self.taus.ncols()
    }

    pub fn taus(&self) -> &DMatrix<f64> {
        &self.taus
    }

    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.gram.as_ref()
    }

    /// `(‖τᵢ‖²)ᵢ`, which equals `A(I)`.
    pub fn sq_norms(&self) -> &DVector<f64> {
        &self.sq_norms
    }

    /// `‖A‖_F`, the Frobenius norm of the `p × d²` matrix representing `A`.
    pub fn frob_a(&self) -> f64 {
        self.frob_a
    }

    pub fn gram_diagonal(&self) -> DVector<f64> {
        self.sq_norms.map(|s| s * s)
    }

    pub fn gram_trace(&self) -> f64 {
        self.frob_a * self.frob_a
    }

    /// `‖AAᵀ‖_F²`
    pub fn gram_frob_sq(&self) -> f64 {
        match &self.gram {
            Some(g) => g.norm_squared(),
            None => {
                let inner = self.taus.transpose() * &self.taus;
                inner.iter().map(|v| v.powi(4)).sum()
            }
        }
    }

    /// Returns the map for `s·A` (`s > 0`), i.e. every τ scaled by `√s`.
    /// Derived quantities are recomputed from the scaled vectors.
    pub fn scaled(&self, s: f64) -> PairMap {
        debug_assert!(s > 0.0);
        PairMap::with_gram(&self.taus * s.sqrt(), self.gram.is_some())
            .expect("scaling preserves finiteness")
    }

    fn check_order(&self, d: usize) -> Result<()> {
        if d != self.d() {
            return Err(Error::invalid(format!(
                "matrix order {d} does not match operator order {}",
                self.d()
            )));
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.p() {
            return Err(Error::invalid(format!(
                "vector length {len} does not match pair count {}",
                self.p()
            )));
        }
        Ok(())
    }

    /// `A(U)` for a dense symmetric `U`, O(p·d²).
    pub fn apply(&self, u: &SymmetricMatrix) -> Result<DVector<f64>> {
        self.check_order(u.order())?;
        let ut = u.as_matrix() * &self.taus;
        Ok(DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|i| self.taus.column(i).dot(&ut.column(i))),
        ))
    }

    /// `A(VVᵀ)ᵢ = ‖Vᵀτᵢ‖²`, O(p·d·m).
    pub fn apply_factored(&self, v: &FactoredPsd) -> Result<DVector<f64>> {
        self.check_order(v.order())?;
        if v.columns() == 0 {
            return Ok(DVector::zeros(self.p()));
        }
        let vt = v.factor().transpose() * &self.taus;
        Ok(DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|i| vt.column(i).norm_squared()),
        ))
    }

    /// `A*(z) = Σᵢ zᵢ τᵢτᵢᵀ`
    pub fn adjoint(&self, z: &DVector<f64>) -> Result<SymmetricMatrix> {
        self.check_len(z.len())?;
        let mut tz = self.taus.clone();
        for (i, &zi) in z.iter().enumerate() {
            tz.column_mut(i).scale_mut(zi);
        }
        Ok(SymmetricMatrix::symmetrized(tz * self.taus.transpose()))
    }

    /// `AAᵀ z = A(A*(z))`
    pub fn gram_matvec(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(z.len())?;
        match &self.gram {
            Some(g) => Ok(g * z),
            None => self.apply(&self.adjoint(z)?),
        }
    }

    /// `‖A*(z)‖_F² = zᵀ(AAᵀ)z`
    pub fn adjoint_norm_sq(&self, z: &DVector<f64>) -> Result<f64> {
        Ok(z.dot(&self.gram_matvec(z)?).max(0.0))
    }

    /// Frobenius norm of the operator `(2/n)A*A + (α−1)I` acting on the
    /// d²-dimensional space of d×d matrices, evaluated in O(p²) as
    /// `√((4/n²)‖AAᵀ‖_F² + (4/n)(α−1)·tr(AAᵀ) + (α−1)²d²)`.
    pub fn hessian_shift_norm(&self, n: usize, alpha: f64) -> f64 {
        let n = n as f64;
        let shift = alpha - 1.0;
        let d = self.d() as f64;
        let sq = 4.0 / (n * n) * self.gram_frob_sq()
            + 4.0 / n * shift * self.gram_trace()
            + shift * shift * d * d;
        sq.max(0.0).sqrt()
    }

    /// Spectral norm of `AAᵀ` (equal to `‖A*A‖₂`) by power iteration from the
    /// all-ones start vector.
    pub fn gram_spectral_norm(&self, max_iter: usize, rel_tol: f64) -> Result<f64> {
        let p = self.p();
        if p == 0 {
            return Ok(0.0);
        }
        let mut x = DVector::from_element(p, 1.0 / (p as f64).sqrt());
        let mut lambda = 0.0;
        for _ in 0..max_iter {
            let y = self.gram_matvec(&x)?;
            let norm = y.norm();
            if norm == 0.0 {
                return Ok(0.0);
            }
            let next = x.dot(&y);
            x = y / norm;
            if (next - lambda).abs() <= rel_tol * next.abs() {
                return Ok(next.max(norm));
            }
            lambda = next;
        }
        Ok(lambda)
    }
}
