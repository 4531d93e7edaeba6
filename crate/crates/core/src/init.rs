//! Two-stage diagonal thresholding initializer.
//!
//! Groups are screened by their summed diagonal variance, then individual
//! coordinates inside the kept groups by their own variance. The starting
//! vector is the leading eigenvector of the covariance restricted to the kept
//! coordinates, zero-padded back to full length.
//!
//! The selection rules assume unit noise variance:
//!
//! * group `g` is kept when `sum_{c in g} S_cc >= p_g + pi_n`, with
//!   `pi_n = pi * sqrt(log G / n)`;
//! * coordinate `c` of a kept group is kept when `S_cc >= 1 + omega_n`, with
//!   `omega_n = omega * sqrt(log(K) / n)` and `K` the number of coordinates in
//!   the kept groups (`T |B_G|` for equal group sizes).

use ndarray::Array1;

use crate::eigen::leading_eigenpair;
use crate::error::{Result, SgpcaError};
use crate::operator::{Centering, CovOperator};
use crate::types::{canonicalize_sign, DataMatrix, GroupPartition};

/// What to do when no coordinate survives both screens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitFallback {
    /// 1-sparse start at the coordinate of largest variance.
    #[default]
    LargestVariance,
    /// Surface the empty selection as an error.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub pi_const: f64,
    pub omega_const: f64,
    pub fallback: InitFallback,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            pi_const: 3.0,
            omega_const: 3.0,
            fallback: InitFallback::LargestVariance,
        }
    }
}

impl InitConfig {
    pub fn new(pi_const: f64, omega_const: f64) -> Result<Self> {
        let cfg = Self {
            pi_const,
            omega_const,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi_const > 0.0 && self.omega_const > 0.0)
            || !self.pi_const.is_finite()
            || !self.omega_const.is_finite()
        {
            return Err(SgpcaError::InvalidInput(format!(
                "initializer constants must be positive, got pi={}, omega={}",
                self.pi_const, self.omega_const
            )));
        }
        Ok(())
    }
}

/// The two screening stages.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSelection {
    pub pi_n: f64,
    pub omega_n: f64,
    /// Kept groups, ascending.
    pub groups: Vec<usize>,
    /// Kept coordinates, ascending.
    pub coords: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    /// Unit-norm start vector with canonical sign.
    pub vector: Array1<f64>,
    /// `None` when the fallback fired.
    pub selection: Option<InitSelection>,
    pub used_fallback: bool,
}

fn sample_count(op: &CovOperator) -> Result<usize> {
    op.n_samples().ok_or_else(|| {
        SgpcaError::InvalidInput(
            "diagonal thresholding needs the sample count; use with_sample_count".into(),
        )
    })
}

/// Group screen only: returns `(pi_n, kept groups)`.
pub fn select_groups(
    diag: &Array1<f64>,
    partition: &GroupPartition,
    n: usize,
    pi_const: f64,
) -> (f64, Vec<usize>) {
    let num_groups = partition.num_groups() as f64;
    let pi_n = pi_const * (num_groups.ln() / n as f64).sqrt();
    let kept = partition
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, members)| {
            let stat: f64 = members.iter().map(|&c| diag[c]).sum();
            stat >= members.len() as f64 + pi_n
        })
        .map(|(g, _)| g)
        .collect();
    (pi_n, kept)
}

/// Both screens. Fails with `EmptySelection` when either stage keeps nothing.
pub fn select(
    op: &CovOperator,
    partition: &GroupPartition,
    config: &InitConfig,
) -> Result<InitSelection> {
    config.validate()?;
    if partition.dim() != op.dim() {
        return Err(SgpcaError::DimensionMismatch {
            expected: op.dim(),
            found: partition.dim(),
        });
    }
    let n = sample_count(op)?;
    let diag = op.diagonal();
    let (pi_n, groups) = select_groups(&diag, partition, n, config.pi_const);
    if groups.is_empty() {
        return Err(SgpcaError::EmptySelection(
            "no group passed the group screen",
        ));
    }
    let candidates = partition.coordinates_of(&groups);
    let omega_n = config.omega_const * ((candidates.len() as f64).ln() / n as f64).sqrt();
    let coords: Vec<usize> = candidates
        .into_iter()
        .filter(|&c| diag[c] >= 1.0 + omega_n)
        .collect();
    if coords.is_empty() {
        return Err(SgpcaError::EmptySelection(
            "no coordinate passed the individual screen",
        ));
    }
    Ok(InitSelection {
        pi_n,
        omega_n,
        groups,
        coords,
    })
}

fn largest_variance_axis(op: &CovOperator) -> Array1<f64> {
    let diag = op.diagonal();
    let mut best = 0;
    for (c, &d) in diag.iter().enumerate() {
        if d > diag[best] {
            best = c;
        }
    }
    let mut v = Array1::zeros(op.dim());
    v[best] = 1.0;
    v
}

/// Initializer on an existing (possibly deflated) operator.
pub fn diagonal_threshold_init_op(
    op: &CovOperator,
    partition: &GroupPartition,
    config: &InitConfig,
) -> Result<InitOutcome> {
    let selection = match select(op, partition, config) {
        Ok(sel) => sel,
        Err(SgpcaError::EmptySelection(_)) if config.fallback == InitFallback::LargestVariance => {
            return Ok(InitOutcome {
                vector: largest_variance_axis(op),
                selection: None,
                used_fallback: true,
            });
        }
        Err(e) => return Err(e),
    };
    let sub = op.submatrix(&selection.coords);
    let (_, lead) = leading_eigenpair(&sub);
    let mut vector = Array1::zeros(op.dim());
    for (&c, &x) in selection.coords.iter().zip(lead.iter()) {
        vector[c] = x;
    }
    let norm = vector.dot(&vector).sqrt();
    vector /= norm;
    canonicalize_sign(&mut vector);
    Ok(InitOutcome {
        vector,
        selection: Some(selection),
        used_fallback: false,
    })
}

/// Initializer on raw data, centered by default like the covariance operator.
pub fn diagonal_threshold_init(
    data: &DataMatrix,
    partition: &GroupPartition,
    config: &InitConfig,
) -> Result<InitOutcome> {
    let op = CovOperator::from_data(data, Centering::Center);
    diagonal_threshold_init_op(&op, partition, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn unit_second_moments_select_nothing() {
        // every column has mean 0 and second moment exactly 1
        let x = array![
            [1.0, 1.0, -1.0, 1.0],
            [-1.0, 1.0, 1.0, -1.0],
            [1.0, -1.0, 1.0, 1.0],
            [-1.0, -1.0, -1.0, -1.0]
        ];
        let data = DataMatrix::new(x).unwrap();
        let part = GroupPartition::equal(2, 2).unwrap();
        let cfg = InitConfig {
            fallback: InitFallback::Fail,
            ..InitConfig::new(1.0, 1.0).unwrap()
        };
        let err = diagonal_threshold_init(&data, &part, &cfg).unwrap_err();
        assert!(matches!(err, SgpcaError::EmptySelection(_)));

        let fallback = diagonal_threshold_init(&data, &part, &InitConfig::default()).unwrap();
        assert!(fallback.used_fallback);
        assert_eq!(fallback.vector, array![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn needs_sample_count() {
        let op = CovOperator::explicit(Array2::eye(2)).unwrap();
        let part = GroupPartition::singletons(2).unwrap();
        assert!(select(&op, &part, &InitConfig::default()).is_err());
        let op = op.with_sample_count(10);
        assert!(matches!(
            select(&op, &part, &InitConfig::default()),
            Err(SgpcaError::EmptySelection(_))
        ));
    }

    #[test]
    fn rejects_bad_constants() {
        assert!(InitConfig::new(0.0, 1.0).is_err());
        assert!(InitConfig::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn explicit_selection() {
        let s = Array2::from_diag(&array![4.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let op = CovOperator::explicit(s).unwrap().with_sample_count(100);
        let part = GroupPartition::equal(3, 2).unwrap();
        let out = diagonal_threshold_init_op(&op, &part, &InitConfig::default()).unwrap();
        let sel = out.selection.unwrap();
        assert_eq!(sel.groups, vec![0]);
        assert_eq!(sel.coords, vec![0]);
        assert_eq!(out.vector, array![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
