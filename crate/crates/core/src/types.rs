//! Domain types shared by every stage of the pipeline.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Result, SgpcaError};

/// An `n x p` sample matrix, samples in rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(SgpcaError::InvalidInput(format!(
                "data matrix needs at least 2 rows, got {n}"
            )));
        }
        if p < 1 {
            return Err(SgpcaError::InvalidInput(
                "data matrix needs at least 1 column".into(),
            ));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SgpcaError::InvalidInput(format!(
                "non-finite entry {v} at row {i}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Rows in the given order. Indices must be in range.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        DataMatrix::new(self.values.select(Axis(0), rows))
    }

    /// Column means.
    pub fn column_means(&self) -> Array1<f64> {
        self.values
            .mean_axis(Axis(0))
            .expect("data matrix has at least two rows")
    }
}

/// A disjoint cover of `0..p` by `G` ordered groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupPartition {
    /// Validates that `groups` exactly covers `0..p` with no overlaps or empty groups.
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(SgpcaError::InvalidInput("partition has no groups".into()));
        }
        let mut group_of = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(SgpcaError::InvalidInput(format!("group {g} is empty")));
            }
            for &c in members {
                if c >= p {
                    return Err(SgpcaError::InvalidInput(format!(
                        "group {g} contains index {c} outside 0..{p}"
                    )));
                }
                if group_of[c] != usize::MAX {
                    return Err(SgpcaError::InvalidInput(format!(
                        "index {c} assigned to groups {} and {g}",
                        group_of[c]
                    )));
                }
                group_of[c] = g;
            }
        }
        if let Some(c) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(SgpcaError::InvalidInput(format!(
                "index {c} is not covered by any group"
            )));
        }
        Ok(Self { groups, group_of })
    }

    /// `num_groups` contiguous groups of `group_size` coordinates each.
    pub fn equal(num_groups: usize, group_size: usize) -> Result<Self> {
        if num_groups == 0 || group_size == 0 {
            return Err(SgpcaError::InvalidInput(
                "group count and group size must be positive".into(),
            ));
        }
        let groups = (0..num_groups)
            .map(|g| (g * group_size..(g + 1) * group_size).collect())
            .collect();
        Self::new(groups, num_groups * group_size)
    }

    /// Every coordinate in its own group.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::equal(p, 1)
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.group_of.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    pub fn group_of(&self, c: usize) -> usize {
        self.group_of[c]
    }

    /// The common group size when all groups are equal, `None` otherwise.
    pub fn uniform_size(&self) -> Option<usize> {
        let t = self.groups[0].len();
        self.groups.iter().all(|g| g.len() == t).then_some(t)
    }

    /// Sorted union of the coordinates of the listed groups.
    pub fn coordinates_of(&self, groups: &[usize]) -> Vec<usize> {
        let mut coords: Vec<usize> = groups
            .iter()
            .flat_map(|&g| self.groups[g].iter().copied())
            .collect();
        coords.sort_unstable();
        coords
    }
}

/// Per-component `(eta, tau)` group-wise and entry-wise thresholding levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    pairs: Vec<(f64, f64)>,
}

impl ThresholdSchedule {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(SgpcaError::InvalidInput("empty threshold schedule".into()));
        }
        for (j, &(eta, tau)) in pairs.iter().enumerate() {
            if !(eta >= 0.0 && eta.is_finite() && tau >= 0.0 && tau.is_finite()) {
                return Err(SgpcaError::InvalidInput(format!(
                    "thresholds for component {j} must be finite and nonnegative, got ({eta}, {tau})"
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// The same pair for each of `components` components.
    pub fn uniform(eta: f64, tau: f64, components: usize) -> Result<Self> {
        Self::new(vec![(eta, tau); components])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn get(&self, j: usize) -> (f64, f64) {
        self.pairs[j]
    }
}

/// One estimated sparse loading vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PCEstimate {
    pub loading: Array1<f64>,
    /// Indices with a nonzero entry, ascending.
    pub support: Vec<usize>,
    /// Groups with at least one nonzero entry, ascending.
    pub active_groups: Vec<usize>,
    /// Rayleigh quotient of the loading under the operator it was fitted on.
    pub variance: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PCEstimate {
    pub(crate) fn new(
        loading: Array1<f64>,
        partition: &GroupPartition,
        variance: f64,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let support = support_of(loading.view());
        let mut active_groups: Vec<usize> =
            support.iter().map(|&c| partition.group_of(c)).collect();
        active_groups.sort_unstable();
        active_groups.dedup();
        Self {
            loading,
            support,
            active_groups,
            variance,
            iterations,
            converged,
        }
    }
}

pub fn support_of(v: ArrayView1<'_, f64>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Flips `v` so that its largest-magnitude entry (lowest index on ties) is positive.
pub fn canonicalize_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn data_matrix_rejects_bad_shapes() {
        assert!(DataMatrix::new(Array2::zeros((1, 3))).is_err());
        assert!(DataMatrix::new(Array2::zeros((3, 0))).is_err());
        assert!(DataMatrix::new(array![[1.0, f64::NAN], [0.0, 1.0]]).is_err());
        assert!(DataMatrix::new(Array2::zeros((2, 1))).is_ok());
    }

    #[test]
    fn partition_validation() {
        let part = GroupPartition::equal(3, 2).unwrap();
        assert_eq!(part.sizes(), vec![2, 2, 2]);
        assert_eq!(part.group_of(5), 2);
        assert_eq!(part.uniform_size(), Some(2));
        assert!(GroupPartition::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0], vec![2]], 3).is_err());
        assert!(GroupPartition::new(vec![vec![0, 1], vec![]], 2).is_err());
        let uneven = GroupPartition::new(vec![vec![2, 0], vec![1]], 3).unwrap();
        assert_eq!(uneven.uniform_size(), None);
        assert_eq!(uneven.coordinates_of(&[0]), vec![0, 2]);
    }

    #[test]
    fn schedule_rejects_negative() {
        assert!(ThresholdSchedule::new(vec![(0.1, -0.1)]).is_err());
        assert!(ThresholdSchedule::new(vec![]).is_err());
        assert_eq!(ThresholdSchedule::uniform(0.1, 0.2, 3).unwrap().len(), 3);
    }

    #[test]
    fn sign_convention() {
        let mut v = array![0.5, -0.7, 0.1];
        canonicalize_sign(&mut v);
        assert_eq!(v, array![-0.5, 0.7, -0.1]);
        // ties go to the lowest index
        let mut w = array![-0.5, 0.5];
        canonicalize_sign(&mut w);
        assert_eq!(w, array![0.5, -0.5]);
    }
}
