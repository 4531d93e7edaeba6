//! Double-thresholding power iteration.
//!
//! Each iteration multiplies by the covariance operator, block soft-thresholds
//! every group at `sqrt(p_g) * eta`, soft-thresholds the surviving entries at
//! `tau`, and renormalizes. With both thresholds at zero this is plain power
//! iteration. Multiple components are extracted by deflating the operator
//! after each one; [`fit_subspace`] instead runs the thresholded step inside
//! an orthogonal iteration on a block of columns.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Result, SgpcaError};
use crate::init::{diagonal_threshold_init_op, InitConfig};
use crate::operator::CovOperator;
use crate::threshold::{block_soft_threshold_inplace, soft_threshold, subspace_distance};
use crate::types::{canonicalize_sign, GroupPartition, PCEstimate, ThresholdSchedule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the subspace distance between successive iterates is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of components to extract.
    pub components: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 1000,
            components: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(SgpcaError::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(SgpcaError::InvalidInput(
                "max_iter must be at least 1".into(),
            ));
        }
        if self.components == 0 {
            return Err(SgpcaError::InvalidInput(
                "at least one component must be requested".into(),
            ));
        }
        Ok(())
    }
}

fn check_thresholds(eta: f64, tau: f64) -> Result<()> {
    if !(eta >= 0.0 && tau >= 0.0 && eta.is_finite() && tau.is_finite()) {
        return Err(SgpcaError::InvalidInput(format!(
            "thresholds must be finite and nonnegative, got eta={eta}, tau={tau}"
        )));
    }
    Ok(())
}

/// Group-wise then entry-wise thresholding of `gamma`, in place.
///
/// Groups are visited in partition order; entries of a group killed by the
/// block step stay zero through the entry step.
pub fn double_threshold(gamma: &mut Array1<f64>, partition: &GroupPartition, eta: f64, tau: f64) {
    let mut buf = Vec::new();
    for members in partition.groups() {
        let level = (members.len() as f64).sqrt() * eta;
        buf.clear();
        buf.extend(members.iter().map(|&c| gamma[c]));
        let mut block = ndarray::ArrayViewMut1::from(&mut buf[..]);
        block_soft_threshold_inplace(block.view_mut(), level);
        for (&c, &x) in members.iter().zip(buf.iter()) {
            gamma[c] = soft_threshold(x, tau);
        }
    }
}

fn normalize(v: &mut Array1<f64>) -> Option<f64> {
    let norm = v.dot(v).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    *v /= norm;
    Some(norm)
}

/// Extracts one sparse component from `op` starting at `init`.
///
/// Returns [`SgpcaError::ThresholdTooLarge`] if an iterate is thresholded to
/// zero. Hitting `max_iter` is not an error; the last iterate comes back with
/// `converged = false`.
pub fn fit_component(
    op: &CovOperator,
    partition: &GroupPartition,
    eta: f64,
    tau: f64,
    init: ArrayView1<'_, f64>,
    config: &SolverConfig,
) -> Result<PCEstimate> {
    config.validate()?;
    check_thresholds(eta, tau)?;
    if partition.dim() != op.dim() {
        return Err(SgpcaError::DimensionMismatch {
            expected: op.dim(),
            found: partition.dim(),
        });
    }
    if init.len() != op.dim() {
        return Err(SgpcaError::DimensionMismatch {
            expected: op.dim(),
            found: init.len(),
        });
    }
    let mut v = init.to_owned();
    if normalize(&mut v).is_none() {
        return Err(SgpcaError::DegenerateVector("initial vector is zero"));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let mut gamma = op.apply(v.view())?;
        double_threshold(&mut gamma, partition, eta, tau);
        if normalize(&mut gamma).is_none() {
            return Err(SgpcaError::ThresholdTooLarge {
                iteration: iterations,
            });
        }
        let dist = subspace_distance(gamma.view(), v.view())?;
        v = gamma;
        if dist <= config.tol {
            converged = true;
            break;
        }
    }

    canonicalize_sign(&mut v);
    let variance = op.rayleigh(v.view())?;
    Ok(PCEstimate::new(
        v, partition, variance, iterations, converged,
    ))
}

/// Sequential extraction of `schedule.len()` components with covariance
/// deflation between them. `op` itself is left untouched.
pub fn fit(
    op: &CovOperator,
    partition: &GroupPartition,
    schedule: &ThresholdSchedule,
    inits: &[Array1<f64>],
    config: &SolverConfig,
) -> Result<Vec<PCEstimate>> {
    if inits.len() != schedule.len() {
        return Err(SgpcaError::InvalidInput(format!(
            "{} thresholds pairs but {} initial vectors",
            schedule.len(),
            inits.len()
        )));
    }
    let mut work = op.clone();
    let mut out = Vec::with_capacity(schedule.len());
    for (j, (&(eta, tau), init)) in schedule.pairs().iter().zip(inits).enumerate() {
        let est = fit_component(&work, partition, eta, tau, init.view(), config)
            .map_err(|e| e.at_component(j))?;
        work.deflate(est.loading.view())
            .map_err(|e| e.at_component(j))?;
        out.push(est);
    }
    Ok(out)
}

/// Like [`fit`], but each component starts from the diagonal-thresholding
/// initializer run on the operator deflated so far.
pub fn fit_with_diagonal_init(
    op: &CovOperator,
    partition: &GroupPartition,
    schedule: &ThresholdSchedule,
    init_config: &InitConfig,
    config: &SolverConfig,
) -> Result<Vec<PCEstimate>> {
    let mut work = op.clone();
    let mut out = Vec::with_capacity(schedule.len());
    for (j, &(eta, tau)) in schedule.pairs().iter().enumerate() {
        let est = diagonal_threshold_init_op(&work, partition, init_config)
            .and_then(|init| fit_component(&work, partition, eta, tau, init.vector.view(), config))
            .map_err(|e| e.at_component(j))?;
        work.deflate(est.loading.view())
            .map_err(|e| e.at_component(j))?;
        out.push(est);
    }
    Ok(out)
}

/// Modified Gram-Schmidt, applied twice, with the sign of every column made
/// canonical. Returns the index of the first column that vanishes.
fn orthonormalize(block: &mut Array2<f64>) -> std::result::Result<(), usize> {
    let k = block.ncols();
    for j in 0..k {
        let original = block.column(j).dot(&block.column(j)).sqrt();
        if original == 0.0 {
            return Err(j);
        }
        for _pass in 0..2 {
            for i in 0..j {
                let (done, mut rest) = block.multi_slice_mut((s![.., i], s![.., j]));
                let proj = done.dot(&rest);
                rest.scaled_add(-proj, &done);
            }
        }
        let mut col = block.column(j).to_owned();
        let norm = col.dot(&col).sqrt();
        if !(norm > 1e-12 * original) {
            return Err(j);
        }
        col /= norm;
        canonicalize_sign(&mut col);
        block.column_mut(j).assign(&col);
    }
    Ok(())
}

/// `||V V^T - W W^T||_F^2` for orthonormal blocks.
fn block_distance(v: &Array2<f64>, w: &Array2<f64>) -> f64 {
    // 2 ||(I - VV^T) W||_F^2, symmetrized; no cancellation near zero
    let rw = w - &v.dot(&v.t().dot(w));
    let rv = v - &w.dot(&w.t().dot(v));
    rw.iter().chain(rv.iter()).map(|x| x * x).sum::<f64>()
}

/// Default starting block for [`fit_subspace`]: the coordinate axes of the
/// `k` largest diagonal entries (lowest index first on ties).
pub fn diagonal_axes_block(op: &CovOperator, k: usize) -> Array2<f64> {
    let diag = op.diagonal();
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]).then(a.cmp(&b)));
    let mut block = Array2::zeros((op.dim(), k));
    for (j, &c) in order.iter().take(k).enumerate() {
        block[[c, j]] = 1.0;
    }
    block
}

/// Thresholded orthogonal iteration for a `k`-dimensional subspace with one
/// shared `(eta, tau)` pair, started from [`diagonal_axes_block`].
pub fn fit_subspace(
    op: &CovOperator,
    partition: &GroupPartition,
    eta: f64,
    tau: f64,
    k: usize,
    config: &SolverConfig,
) -> Result<Vec<PCEstimate>> {
    if k == 0 || k > op.dim() || op.n_samples().is_some_and(|n| k > n) {
        return Err(SgpcaError::InvalidInput(format!(
            "subspace dimension {k} must be in 1..=min(n, p)"
        )));
    }
    let init = diagonal_axes_block(op, k);
    fit_subspace_from(op, partition, eta, tau, init, config)
}

/// As [`fit_subspace`] from an explicit `p x k` starting block.
///
/// The returned loadings are mutually orthogonal and ordered by decreasing
/// Rayleigh quotient.
pub fn fit_subspace_from(
    op: &CovOperator,
    partition: &GroupPartition,
    eta: f64,
    tau: f64,
    init: Array2<f64>,
    config: &SolverConfig,
) -> Result<Vec<PCEstimate>> {
    config.validate()?;
    check_thresholds(eta, tau)?;
    let (p, k) = init.dim();
    if p != op.dim() || partition.dim() != p {
        return Err(SgpcaError::DimensionMismatch {
            expected: op.dim(),
            found: p,
        });
    }
    let mut block = init;
    orthonormalize(&mut block).map_err(|column| SgpcaError::RankCollapse {
        column,
        iteration: 0,
    })?;

    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let mut next = Array2::zeros((p, k));
        for (j, col) in block.axis_iter(Axis(1)).enumerate() {
            let mut gamma = op.apply(col)?;
            double_threshold(&mut gamma, partition, eta, tau);
            next.column_mut(j).assign(&gamma);
        }
        orthonormalize(&mut next).map_err(|column| SgpcaError::RankCollapse {
            column,
            iteration: iterations,
        })?;
        let dist = block_distance(&next, &block);
        block = next;
        if dist <= config.tol {
            converged = true;
            break;
        }
    }

    let mut out = Vec::with_capacity(k);
    for col in block.axis_iter(Axis(1)) {
        let loading = col.to_owned();
        let variance = op.rayleigh(loading.view())?;
        out.push(PCEstimate::new(
            loading, partition, variance, iterations, converged,
        ));
    }
    out.sort_by(|a, b| b.variance.total_cmp(&a.variance));
    Ok(out)
}
