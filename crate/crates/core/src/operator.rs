//! The sample covariance as a linear operator.
//!
//! In implicit mode the operator keeps the (optionally centered) `n x p` data
//! matrix and evaluates `S u = (1/n) X^T (X u)` in `O(np)` without ever forming
//! the `p x p` covariance. Explicit mode wraps a dense symmetric matrix and is
//! mostly useful for small problems and as a reference.
//!
//! Deflation comes in two flavours:
//!
//! * [`DeflationMode::Covariance`] (default): `S <- S - (v^T S v) v v^T`. The
//!   pairs `(v, rho)` are kept in a list and subtracted lazily on every apply,
//!   costing `O(p)` per deflation.
//! * [`DeflationMode::Data`]: `X <- X - (X v) v^T`, equivalently
//!   `S <- (I - v v^T) S (I - v v^T)`. Applied eagerly to the backing storage.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Result, SgpcaError};
use crate::types::DataMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeflationMode {
    #[default]
    Covariance,
    Data,
}

/// Whether columns are mean-centered before forming the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Centering {
    #[default]
    Center,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deflation {
    pub loading: Array1<f64>,
    /// `v^T S v` under the operator as it was just before this deflation.
    pub rho: f64,
}

#[derive(Debug, Clone)]
enum Backing {
    Implicit { x: Array2<f64> },
    Explicit { s: Array2<f64> },
}

#[derive(Debug, Clone)]
pub struct CovOperator {
    backing: Backing,
    n_samples: Option<usize>,
    mode: DeflationMode,
    deflations: Vec<Deflation>,
}

impl CovOperator {
    /// Implicit operator over `data`, centered per `centering`.
    pub fn from_data(data: &DataMatrix, centering: Centering) -> Self {
        let mut x = data.values().to_owned();
        if centering == Centering::Center {
            let means = data.column_means();
            x -= &means.insert_axis(Axis(0));
        }
        Self {
            backing: Backing::Implicit { x },
            n_samples: Some(data.n()),
            mode: DeflationMode::Covariance,
            deflations: Vec::new(),
        }
    }

    /// Explicit operator over a dense symmetric matrix.
    pub fn explicit(s: Array2<f64>) -> Result<Self> {
        let (r, c) = s.dim();
        if r != c || r == 0 {
            return Err(SgpcaError::InvalidInput(format!(
                "explicit covariance must be square and nonempty, got {r}x{c}"
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(SgpcaError::InvalidInput(
                "explicit covariance has non-finite entries".into(),
            ));
        }
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..r {
            for j in 0..i {
                if (s[[i, j]] - s[[j, i]]).abs() > 1e-12 * scale {
                    return Err(SgpcaError::InvalidInput(format!(
                        "explicit covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            backing: Backing::Explicit { s },
            n_samples: None,
            mode: DeflationMode::Covariance,
            deflations: Vec::new(),
        })
    }

    /// Attaches a sample count to an explicit operator (needed by the
    /// diagonal-thresholding initializer).
    pub fn with_sample_count(mut self, n: usize) -> Self {
        self.n_samples = Some(n);
        self
    }

    /// Sets the deflation mode. Must be called before any deflation.
    pub fn with_deflation_mode(mut self, mode: DeflationMode) -> Self {
        assert!(
            self.deflations.is_empty(),
            "deflation mode must be chosen before deflating"
        );
        self.mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.backing {
            Backing::Implicit { x } => x.ncols(),
            Backing::Explicit { s } => s.ncols(),
        }
    }

    pub fn n_samples(&self) -> Option<usize> {
        self.n_samples
    }

    pub fn is_implicit(&self) -> bool {
        matches!(self.backing, Backing::Implicit { .. })
    }

    pub fn deflation_mode(&self) -> DeflationMode {
        self.mode
    }

    pub fn deflations(&self) -> &[Deflation] {
        &self.deflations
    }

    /// The (centered) data backing an implicit operator, with any data-mode
    /// deflations already applied.
    pub fn data(&self) -> Option<&Array2<f64>> {
        match &self.backing {
            Backing::Implicit { x } => Some(x),
            Backing::Explicit { .. } => None,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(SgpcaError::DimensionMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    fn apply_base(&self, u: ArrayView1<'_, f64>) -> Array1<f64> {
        match &self.backing {
            Backing::Implicit { x } => {
                // X^T (X u) as a sum of rows, so X is only read row-contiguously
                let xu = x.dot(&u);
                let mut out = Array1::zeros(x.ncols());
                for (row, &c) in x.rows().into_iter().zip(xu.iter()) {
                    out.scaled_add(c, &row);
                }
                out /= x.nrows() as f64;
                out
            }
            Backing::Explicit { s } => s.dot(&u),
        }
    }

    /// `S u` for the current (possibly deflated) operator.
    pub fn apply(&self, u: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(u.len())?;
        let mut out = self.apply_base(u);
        if self.mode == DeflationMode::Covariance {
            for d in &self.deflations {
                let coef = d.rho * d.loading.dot(&u);
                out.scaled_add(-coef, &d.loading);
            }
        }
        Ok(out)
    }

    /// `v^T S v`.
    pub fn rayleigh(&self, v: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(v.dot(&self.apply(v)?))
    }

    /// Removes the direction `v` (assumed unit norm) from the operator and
    /// returns `rho = v^T S v` measured before the update.
    pub fn deflate(&mut self, v: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(v.len())?;
        let sv = self.apply(v)?;
        let rho = v.dot(&sv);
        if self.mode == DeflationMode::Data {
            match &mut self.backing {
                Backing::Implicit { x } => {
                    // X <- X - (X v) v^T
                    let xv = x.dot(&v);
                    for (mut row, &xvi) in x.axis_iter_mut(Axis(0)).zip(xv.iter()) {
                        row.scaled_add(-xvi, &v);
                    }
                }
                Backing::Explicit { s } => {
                    // (I - vv^T) S (I - vv^T) = S - v (Sv)^T - (Sv) v^T + rho v v^T
                    let p = s.nrows();
                    for i in 0..p {
                        for j in 0..p {
                            s[[i, j]] += -v[i] * sv[j] - sv[i] * v[j] + rho * v[i] * v[j];
                        }
                    }
                }
            }
        }
        self.deflations.push(Deflation {
            loading: v.to_owned(),
            rho,
        });
        Ok(rho)
    }

    /// Diagonal of the current operator.
    pub fn diagonal(&self) -> Array1<f64> {
        let mut diag = match &self.backing {
            Backing::Implicit { x } => {
                let mut sq = Array1::zeros(x.ncols());
                for row in x.rows() {
                    sq.zip_mut_with(&row, |a, &b| *a += b * b);
                }
                sq / x.nrows() as f64
            }
            Backing::Explicit { s } => s.diag().to_owned(),
        };
        if self.mode == DeflationMode::Covariance {
            for d in &self.deflations {
                diag.zip_mut_with(&d.loading, |a, &v| *a -= d.rho * v * v);
            }
        }
        diag
    }

    /// The principal submatrix `S[idx, idx]` of the current operator.
    pub fn submatrix(&self, idx: &[usize]) -> Array2<f64> {
        let mut sub = match &self.backing {
            Backing::Implicit { x } => {
                let xb = x.select(Axis(1), idx);
                xb.t().dot(&xb) / x.nrows() as f64
            }
            Backing::Explicit { s } => s.select(Axis(0), idx).select(Axis(1), idx),
        };
        if self.mode == DeflationMode::Covariance {
            for d in &self.deflations {
                let vb = d.loading.select(Axis(0), idx);
                for (i, &vi) in vb.iter().enumerate() {
                    for (j, &vj) in vb.iter().enumerate() {
                        sub[[i, j]] -= d.rho * vi * vj;
                    }
                }
            }
        }
        sub
    }

    /// The full `p x p` matrix of the current operator. `O(p^2)` memory.
    pub fn to_dense(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.submatrix(&all)
    }
}

/// Free-function form of [`CovOperator::apply`].
pub fn cov_apply(op: &CovOperator, u: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    op.apply(u)
}
