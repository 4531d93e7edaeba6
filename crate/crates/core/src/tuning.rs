//! Stability-based threshold selection.
//!
//! For each component, every `(eta, tau)` cell of the grid is fitted on `B`
//! row subsamples of size `floor(n rho)`. The alignment score of a cell is the
//! mean absolute inner product over all pairs of resampled estimates; the
//! cell with the highest score wins. The winning thresholds are then scaled
//! by `sqrt(floor(n rho) / n)` and the component is re-fitted on the full
//! data before deflating and moving on.
//!
//! Subsamples are drawn once per `(component, resample)` and shared by all
//! cells. Every task gets its own seeded stream and results are gathered in
//! grid order, so the reports do not depend on how rayon schedules the work.

use ndarray::{Array1, ArrayView1};
use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Result, SgpcaError};
use crate::init::{diagonal_threshold_init_op, InitConfig};
use crate::operator::{Centering, CovOperator, DeflationMode};
use crate::rng::{stream, Purpose};
use crate::solver::{fit_component, SolverConfig};
use crate::types::{DataMatrix, GroupPartition, PCEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    /// Candidate group-wise thresholds.
    pub etas: Vec<f64>,
    /// Candidate entry-wise thresholds.
    pub taus: Vec<f64>,
    /// Subsample proportion.
    pub rho: f64,
    /// Number of subsamples per component.
    pub resamples: usize,
    pub seed: u64,
}

impl TuningGrid {
    pub fn new(
        etas: Vec<f64>,
        taus: Vec<f64>,
        rho: f64,
        resamples: usize,
        seed: u64,
    ) -> Result<Self> {
        let grid = Self {
            etas,
            taus,
            rho,
            resamples,
            seed,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.etas.is_empty() || self.taus.is_empty() {
            return Err(SgpcaError::InvalidInput(
                "threshold grids must be nonempty".into(),
            ));
        }
        if self
            .etas
            .iter()
            .chain(&self.taus)
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return Err(SgpcaError::InvalidInput(
                "grid thresholds must be finite and nonnegative".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(SgpcaError::InvalidInput(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.resamples < 2 {
            return Err(SgpcaError::InvalidInput(format!(
                "need at least 2 resamples, got {}",
                self.resamples
            )));
        }
        Ok(())
    }

    /// Cells in report order: `eta` outer, `tau` inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.etas
            .iter()
            .flat_map(|&eta| self.taus.iter().map(move |&tau| (eta, tau)))
            .collect()
    }
}

/// `floor(n rho)`, checked against the minimum usable size.
pub fn subsample_size(n: usize, rho: f64) -> Result<usize> {
    let size = (n as f64 * rho).floor() as usize;
    if size < 2 {
        return Err(SgpcaError::SubsampleTooSmall { n, rho, size });
    }
    Ok(size)
}

/// `sqrt(floor(n rho) / n)`.
pub fn rescale_factor(n: usize, rho: f64) -> Result<f64> {
    Ok((subsample_size(n, rho)? as f64 / n as f64).sqrt())
}

/// Row indices of a subsample drawn without replacement, ascending.
pub fn subsample_rows(n: usize, rho: f64, seed: u64) -> Result<Vec<usize>> {
    subsample_rows_tagged(n, rho, seed, 0, 0)
}

fn subsample_rows_tagged(
    n: usize,
    rho: f64,
    seed: u64,
    component: u64,
    resample: u64,
) -> Result<Vec<usize>> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SgpcaError::InvalidInput(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    let size = subsample_size(n, rho)?;
    let mut rng = stream(seed, Purpose::Subsample, component, resample);
    let mut rows = index::sample(&mut rng, n, size).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Subsample of `floor(n rho)` rows, kept in original order.
pub fn subsample(data: &DataMatrix, rho: f64, seed: u64) -> Result<DataMatrix> {
    data.select_rows(&subsample_rows(data.n(), rho, seed)?)
}

/// Alignment of a set of estimates with failure bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub score: f64,
    /// Fewer than two usable estimates; the score is 0.
    pub insufficient: bool,
}

/// Mean absolute pairwise inner product of unit vectors over all
/// `B(B-1)/2` pairs. `None` entries are failed fits: they contribute no
/// pairs, but still count in the denominator, exactly as a zero estimate
/// would.
pub fn alignment_score(estimates: &[Option<ArrayView1<'_, f64>>]) -> Alignment {
    let usable: Vec<&ArrayView1<'_, f64>> = estimates.iter().flatten().collect();
    let m = usable.len();
    if m < 2 {
        return Alignment {
            score: 0.0,
            insufficient: true,
        };
    }
    let mut total = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            total += usable[a].dot(usable[b]).abs();
        }
    }
    let b = estimates.len();
    let pairs = (b * (b - 1) / 2) as f64;
    Alignment {
        score: (total / pairs).min(1.0),
        insufficient: false,
    }
}

/// One `(eta, tau)` cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentRow {
    pub component: usize,
    pub eta: f64,
    pub tau: f64,
    pub align: f64,
    /// Mean support size over all resamples, counting failed fits as empty.
    pub mean_support: f64,
    /// Resamples whose fit was thresholded to zero.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub component: usize,
    /// Rows in grid order (`eta` outer, `tau` inner).
    pub rows: Vec<AlignmentRow>,
    /// Index into `rows` of the chosen cell.
    pub selected: usize,
    /// `sqrt(floor(n rho) / n)`.
    pub rescale: f64,
    /// Thresholds after rescaling, as used on the full data.
    pub applied_eta: f64,
    pub applied_tau: f64,
}

impl AlignmentReport {
    pub fn selected_row(&self) -> &AlignmentRow {
        &self.rows[self.selected]
    }

    pub fn best_align(&self) -> f64 {
        self.selected_row().align
    }
}

/// Index of the best row: highest alignment, then larger `eta`, then larger `tau`.
pub fn select_cell(rows: &[AlignmentRow]) -> usize {
    let mut best = 0;
    for (i, row) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        let better = row
            .align
            .total_cmp(&b.align)
            .then(row.eta.total_cmp(&b.eta))
            .then(row.tau.total_cmp(&b.tau))
            .is_gt();
        if better {
            best = i;
        }
    }
    best
}

/// Where the resampled fits start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleInit {
    /// Diagonal thresholding rerun on every subsample.
    #[default]
    PerResample,
    /// One diagonal-thresholding start computed on the full (deflated) data
    /// and shared by every subsample.
    FullData,
}

/// Settings shared by the tuning entry points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TuningOptions {
    pub solver: SolverConfig,
    pub init: InitConfig,
    pub centering: Centering,
    pub deflation: DeflationMode,
    pub resample_init: ResampleInit,
}

fn build_operator(
    data: &DataMatrix,
    previous: &[Array1<f64>],
    opts: &TuningOptions,
) -> Result<CovOperator> {
    let mut op = CovOperator::from_data(data, opts.centering).with_deflation_mode(opts.deflation);
    for v in previous {
        op.deflate(v.view())?;
    }
    Ok(op)
}

/// Sweeps the grid for component `component` (0-based) after deflating the
/// subsample operators by the full-data loadings in `previous`.
///
/// Returns the alignment report; its `applied_*` fields hold the rescaled
/// thresholds for the full-data fit.
pub fn tune_component(
    data: &DataMatrix,
    partition: &GroupPartition,
    component: usize,
    previous: &[Array1<f64>],
    grid: &TuningGrid,
    opts: &TuningOptions,
) -> Result<AlignmentReport> {
    grid.validate()?;
    if partition.dim() != data.p() {
        return Err(SgpcaError::DimensionMismatch {
            expected: data.p(),
            found: partition.dim(),
        });
    }
    let rescale = rescale_factor(data.n(), grid.rho)?;
    let cells = grid.cells();

    let shared_init = match opts.resample_init {
        ResampleInit::PerResample => None,
        ResampleInit::FullData => {
            let full = build_operator(data, previous, opts)?;
            Some(diagonal_threshold_init_op(&full, partition, &opts.init)?.vector)
        }
    };

    // Per resample: deflated subsample operator and its initializer.
    let contexts: Vec<(CovOperator, Array1<f64>)> = (0..grid.resamples)
        .into_par_iter()
        .map(|b| -> Result<(CovOperator, Array1<f64>)> {
            let rows =
                subsample_rows_tagged(data.n(), grid.rho, grid.seed, component as u64, b as u64)?;
            let sub = data.select_rows(&rows)?;
            let op = build_operator(&sub, previous, opts)?;
            let init = match &shared_init {
                Some(v) => v.clone(),
                None => diagonal_threshold_init_op(&op, partition, &opts.init)?.vector,
            };
            Ok((op, init))
        })
        .collect::<Result<_>>()?;

    // Task (cell, resample) -> estimate or failure, flattened cell-major.
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.resamples).map(move |b| (c, b)))
        .collect();
    let fits: Vec<Option<PCEstimate>> = tasks
        .par_iter()
        .map(|&(c, b)| -> Result<Option<PCEstimate>> {
            let (eta, tau) = cells[c];
            let (op, init) = &contexts[b];
            match fit_component(op, partition, eta, tau, init.view(), &opts.solver) {
                Ok(est) => Ok(Some(est)),
                Err(SgpcaError::ThresholdTooLarge { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let rows: Vec<AlignmentRow> = cells
        .iter()
        .enumerate()
        .map(|(c, &(eta, tau))| {
            let cell_fits = &fits[c * grid.resamples..(c + 1) * grid.resamples];
            let views: Vec<Option<ArrayView1<'_, f64>>> = cell_fits
                .iter()
                .map(|f| f.as_ref().map(|e| e.loading.view()))
                .collect();
            let align = alignment_score(&views).score;
            let ok: Vec<&PCEstimate> = cell_fits.iter().flatten().collect();
            // a failed fit has empty support
            let mean_support =
                ok.iter().map(|e| e.support.len() as f64).sum::<f64>() / cell_fits.len() as f64;
            AlignmentRow {
                component,
                eta,
                tau,
                align,
                mean_support,
                failures: cell_fits.len() - ok.len(),
            }
        })
        .collect();

    if rows.iter().all(|r| r.failures == grid.resamples) {
        return Err(SgpcaError::TuningFailed { component });
    }
    let selected = select_cell(&rows);
    let chosen = rows[selected];
    Ok(AlignmentReport {
        component,
        rows,
        selected,
        rescale,
        applied_eta: rescale * chosen.eta,
        applied_tau: rescale * chosen.tau,
    })
}

/// Tunes and fits `components` components in sequence.
pub fn tune_and_fit(
    data: &DataMatrix,
    partition: &GroupPartition,
    components: usize,
    grid: &TuningGrid,
    opts: &TuningOptions,
) -> Result<(Vec<PCEstimate>, Vec<AlignmentReport>)> {
    if components == 0 {
        return Err(SgpcaError::InvalidInput(
            "at least one component is required".into(),
        ));
    }
    let mut full = CovOperator::from_data(data, opts.centering).with_deflation_mode(opts.deflation);
    let mut loadings: Vec<Array1<f64>> = Vec::with_capacity(components);
    let mut estimates = Vec::with_capacity(components);
    let mut reports = Vec::with_capacity(components);
    for j in 0..components {
        let report = tune_component(data, partition, j, &loadings, grid, opts)
            .map_err(|e| e.at_component(j))?;
        let est = diagonal_threshold_init_op(&full, partition, &opts.init)
            .and_then(|init| {
                fit_component(
                    &full,
                    partition,
                    report.applied_eta,
                    report.applied_tau,
                    init.vector.view(),
                    &opts.solver,
                )
            })
            .map_err(|e| e.at_component(j))?;
        full.deflate(est.loading.view())
            .map_err(|e| e.at_component(j))?;
        loadings.push(est.loading.clone());
        estimates.push(est);
        reports.push(report);
    }
    Ok((estimates, reports))
}

/// Shape of a component's alignment-versus-support curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveShape {
    /// An interior maximum beats both ends by the margin: a sparse signal.
    Peaked,
    /// Alignment keeps growing with support: dense noise.
    Monotone,
}

pub const DEFAULT_RANK_MARGIN: f64 = 0.05;

/// Classifies a curve given as alignment values ordered by support size.
pub fn classify_curve(aligns: &[f64], margin: f64) -> CurveShape {
    if aligns.len() < 3 {
        return CurveShape::Monotone;
    }
    let first = aligns[0];
    let last = aligns[aligns.len() - 1];
    let interior = aligns[1..aligns.len() - 1]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if interior >= first + margin && interior >= last + margin {
        CurveShape::Peaked
    } else {
        CurveShape::Monotone
    }
}

/// The report's curve: alignment of every cell sorted by mean support (ties
/// by grid order). Cells where every fit failed sit at support 0.
pub fn report_curve(report: &AlignmentReport) -> Vec<f64> {
    let mut rows: Vec<&AlignmentRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| a.mean_support.total_cmp(&b.mean_support));
    rows.iter().map(|r| r.align).collect()
}

/// Number of leading components whose curve is peaked.
pub fn rank_heuristic(reports: &[AlignmentReport], margin: f64) -> usize {
    reports
        .iter()
        .take_while(|r| classify_curve(&report_curve(r), margin) == CurveShape::Peaked)
        .count()
}

/// Tunes components one at a time, up to `max_components`, and stops at the
/// first whose curve is not peaked. A component whose every cell fails
/// counts as not peaked. Returns the rank and the reports produced.
pub fn tune_rank(
    data: &DataMatrix,
    partition: &GroupPartition,
    max_components: usize,
    grid: &TuningGrid,
    opts: &TuningOptions,
    margin: f64,
) -> Result<(usize, Vec<AlignmentReport>)> {
    let mut full = CovOperator::from_data(data, opts.centering).with_deflation_mode(opts.deflation);
    let mut loadings: Vec<Array1<f64>> = Vec::new();
    let mut reports = Vec::new();
    for j in 0..max_components {
        let report = match tune_component(data, partition, j, &loadings, grid, opts) {
            Ok(r) => r,
            Err(SgpcaError::TuningFailed { .. }) => break,
            Err(e) => return Err(e.at_component(j)),
        };
        let peaked = classify_curve(&report_curve(&report), margin) == CurveShape::Peaked;
        let (eta, tau) = (report.applied_eta, report.applied_tau);
        reports.push(report);
        if !peaked || j + 1 == max_components {
            break;
        }
        let init = diagonal_threshold_init_op(&full, partition, &opts.init)
            .map_err(|e| e.at_component(j))?;
        let est = match fit_component(&full, partition, eta, tau, init.vector.view(), &opts.solver)
        {
            Ok(est) => est,
            Err(SgpcaError::ThresholdTooLarge { .. }) => break,
            Err(e) => return Err(e.at_component(j)),
        };
        full.deflate(est.loading.view())
            .map_err(|e| e.at_component(j))?;
        loadings.push(est.loading);
    }
    Ok((rank_heuristic(&reports, margin), reports))
}
