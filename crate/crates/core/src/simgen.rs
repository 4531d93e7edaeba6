//! Spiked covariance simulation and recovery metrics.
//!
//! Data follow `x_i = sum_j lambda_j q_ij v_j + eps_i` with standard Gaussian
//! scores and `N(0, sigma^2 I)` noise, so `Cov(x) = sum_j lambda_j^2 v_j v_j^T
//! + sigma^2 I`. Loadings are hierarchically sparse: a leading block of active
//! groups, and within each active group a leading block of active coordinates
//! carrying Rademacher signs.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SgpcaError};
use crate::rng::{stream, Purpose};
use crate::threshold::subspace_distance;
use crate::types::{canonicalize_sign, DataMatrix, GroupPartition, PCEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct Spike {
    pub lambda_sq: f64,
    pub loading: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModelSpec {
    pub spikes: Vec<Spike>,
    pub sigma_sq: f64,
    pub partition: GroupPartition,
    pub active_group_frac: f64,
    pub within_active_frac: f64,
}

impl SpikedModelSpec {
    pub fn new(
        spikes: Vec<Spike>,
        sigma_sq: f64,
        partition: GroupPartition,
        active_group_frac: f64,
        within_active_frac: f64,
    ) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(SgpcaError::DegenerateSpec(format!(
                "noise variance must be positive, got {sigma_sq}"
            )));
        }
        let p = partition.dim();
        for (j, spike) in spikes.iter().enumerate() {
            if spike.loading.len() != p {
                return Err(SgpcaError::DimensionMismatch {
                    expected: p,
                    found: spike.loading.len(),
                });
            }
            if !(spike.lambda_sq > 0.0 && spike.lambda_sq.is_finite()) {
                return Err(SgpcaError::DegenerateSpec(format!(
                    "spike {j} strength must be positive"
                )));
            }
            if (spike.loading.dot(&spike.loading) - 1.0).abs() > 1e-10 {
                return Err(SgpcaError::DegenerateSpec(format!(
                    "spike {j} loading is not unit norm"
                )));
            }
            if j > 0 && spike.lambda_sq >= spikes[j - 1].lambda_sq {
                return Err(SgpcaError::DegenerateSpec(
                    "spike strengths must be strictly decreasing".into(),
                ));
            }
            for (k, other) in spikes[..j].iter().enumerate() {
                if spike.loading.dot(&other.loading).abs() > 1e-10 {
                    return Err(SgpcaError::DegenerateSpec(format!(
                        "loadings {k} and {j} are not orthogonal"
                    )));
                }
            }
        }
        Ok(Self {
            spikes,
            sigma_sq,
            partition,
            active_group_frac,
            within_active_frac,
        })
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    /// Population eigenvalues of the spiked directions, `lambda_j^2 + sigma^2`.
    pub fn spike_eigenvalues(&self) -> Vec<f64> {
        self.spikes
            .iter()
            .map(|s| s.lambda_sq + self.sigma_sq)
            .collect()
    }

    /// Population covariance. `O(p^2)`; meant for small checks.
    pub fn covariance(&self) -> Array2<f64> {
        let p = self.dim();
        let mut sigma = Array2::eye(p) * self.sigma_sq;
        for spike in &self.spikes {
            let v = spike.loading.view();
            for i in 0..p {
                if v[i] == 0.0 {
                    continue;
                }
                for k in 0..p {
                    sigma[[i, k]] += spike.lambda_sq * v[i] * v[k];
                }
            }
        }
        sigma
    }
}

/// `ceil(frac * count)`, tolerant of representation error in `frac`.
fn ceil_count(frac: f64, count: usize) -> usize {
    ((frac * count as f64) - 1e-9).ceil().max(0.0) as usize
}

fn check_frac(name: &str, frac: f64) -> Result<()> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(SgpcaError::DegenerateSpec(format!(
            "{name} must lie in (0, 1], got {frac}"
        )));
    }
    Ok(())
}

/// Sparse loading whose active groups start at group `first_group`.
///
/// `ceil(active_group_frac * G)` consecutive groups are active; in each, the
/// first `ceil(within_active_frac * p_g)` coordinates get independent random
/// signs. `tag` selects the sign stream so several loadings can share a seed.
pub fn gen_loading_at(
    partition: &GroupPartition,
    first_group: usize,
    active_group_frac: f64,
    within_active_frac: f64,
    seed: u64,
    tag: u64,
) -> Result<Array1<f64>> {
    check_frac("active group fraction", active_group_frac)?;
    check_frac("within-group fraction", within_active_frac)?;
    let num_active = ceil_count(active_group_frac, partition.num_groups());
    if first_group + num_active > partition.num_groups() {
        return Err(SgpcaError::DegenerateSpec(format!(
            "groups {first_group}..{} exceed the {} available",
            first_group + num_active,
            partition.num_groups()
        )));
    }
    let mut rng = stream(seed, Purpose::LoadingSigns, tag, 0);
    let mut v = Array1::<f64>::zeros(partition.dim());
    for g in first_group..first_group + num_active {
        let members = partition.group(g);
        let k = ceil_count(within_active_frac, members.len());
        for &c in &members[..k] {
            v[c] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
    }
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return Err(SgpcaError::DegenerateSpec(
            "loading has empty support".into(),
        ));
    }
    v /= norm;
    canonicalize_sign(&mut v);
    Ok(v)
}

/// Sparse loading on the leading groups.
pub fn gen_loading(
    partition: &GroupPartition,
    active_group_frac: f64,
    within_active_frac: f64,
    seed: u64,
) -> Result<Array1<f64>> {
    gen_loading_at(partition, 0, active_group_frac, within_active_frac, seed, 0)
}

/// Sparse loading on the first block of groups untouched by `existing`, so
/// its support is disjoint from all of theirs.
pub fn gen_loading_disjoint(
    partition: &GroupPartition,
    active_group_frac: f64,
    within_active_frac: f64,
    seed: u64,
    existing: &[ArrayView1<'_, f64>],
) -> Result<Array1<f64>> {
    let first_free = existing
        .iter()
        .flat_map(|v| {
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(c, _)| partition.group_of(c) + 1)
        })
        .max()
        .unwrap_or(0);
    gen_loading_at(
        partition,
        first_free,
        active_group_frac,
        within_active_frac,
        seed,
        existing.len() as u64,
    )
}

/// `n` samples from the spiked model. Scores and noise are drawn row by row
/// from a single stream keyed by `seed`.
pub fn gen_data(spec: &SpikedModelSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    if n < 2 {
        return Err(SgpcaError::InvalidInput(format!("need n >= 2, got {n}")));
    }
    let p = spec.dim();
    let sigma = spec.sigma_sq.sqrt();
    let scales: Vec<f64> = spec.spikes.iter().map(|s| s.lambda_sq.sqrt()).collect();
    let mut rng = stream(seed, Purpose::Data, 0, 0);
    let mut x = Array2::zeros((n, p));
    let mut scores = vec![0.0; spec.spikes.len()];
    for mut row in x.rows_mut() {
        for (score, scale) in scores.iter_mut().zip(&scales) {
            let q: f64 = rng.sample(StandardNormal);
            *score = scale * q;
        }
        for entry in row.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *entry = sigma * e;
        }
        for (spike, &score) in spec.spikes.iter().zip(&scores) {
            row.scaled_add(score, &spike.loading);
        }
    }
    DataMatrix::new(x)
}

/// The named simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One spike, `G = 300`, `T = 3`.
    S1a,
    /// One spike, `G = 300`, `T = 5`.
    S1b,
    /// One spike, `G = 300`, `T = 10`.
    S1c,
    /// Group sparsity only.
    S2i,
    /// Group plus within-group sparsity.
    S2ii,
    /// Three spikes with disjoint supports.
    S3,
}

impl std::str::FromStr for Preset {
    type Err = SgpcaError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1a" => Preset::S1a,
            "1b" => Preset::S1b,
            "1c" => Preset::S1c,
            "2i" => Preset::S2i,
            "2ii" => Preset::S2ii,
            "3" => Preset::S3,
            other => return Err(SgpcaError::UnknownPreset(other.to_string())),
        })
    }
}

impl Preset {
    pub fn tag(self) -> &'static str {
        match self {
            Preset::S1a => "1a",
            Preset::S1b => "1b",
            Preset::S1c => "1c",
            Preset::S2i => "2i",
            Preset::S2ii => "2ii",
            Preset::S3 => "3",
        }
    }
}

pub const PRESET_SAMPLES: usize = 100;
const PRESET_GROUPS: usize = 300;
const ACTIVE_GROUP_FRAC: f64 = 0.01;

/// A spike model with `strengths.len()` disjoint sparse loadings on equal groups.
pub fn spiked_spec(
    num_groups: usize,
    group_size: usize,
    strengths: &[f64],
    sigma_sq: f64,
    active_group_frac: f64,
    within_active_frac: f64,
    seed: u64,
) -> Result<SpikedModelSpec> {
    let partition = GroupPartition::equal(num_groups, group_size)?;
    let mut loadings: Vec<Array1<f64>> = Vec::with_capacity(strengths.len());
    for _ in strengths {
        let views: Vec<_> = loadings.iter().map(|v| v.view()).collect();
        let v = gen_loading_disjoint(
            &partition,
            active_group_frac,
            within_active_frac,
            seed,
            &views,
        )?;
        loadings.push(v);
    }
    let spikes = strengths
        .iter()
        .zip(loadings)
        .map(|(&lambda_sq, loading)| Spike { lambda_sq, loading })
        .collect();
    SpikedModelSpec::new(
        spikes,
        sigma_sq,
        partition,
        active_group_frac,
        within_active_frac,
    )
}

/// Ground truth and sample size for a named setting.
pub fn setting_preset(which: Preset, seed: u64) -> Result<(SpikedModelSpec, usize)> {
    let (group_size, strengths, within): (usize, &[f64], f64) = match which {
        Preset::S1a => (3, &[5.0], 0.8),
        Preset::S1b => (5, &[5.0], 0.8),
        Preset::S1c => (10, &[5.0], 0.8),
        Preset::S2i => (10, &[5.0], 1.0),
        Preset::S2ii => (10, &[5.0], 0.8),
        Preset::S3 => (10, &[20.0, 10.0, 5.0], 0.8),
    };
    let spec = spiked_spec(
        PRESET_GROUPS,
        group_size,
        strengths,
        1.0,
        ACTIVE_GROUP_FRAC,
        within,
        seed,
    )?;
    Ok((spec, PRESET_SAMPLES))
}

/// Pure-noise model (no spikes) on equal groups.
pub fn null_spec(num_groups: usize, group_size: usize, sigma_sq: f64) -> Result<SpikedModelSpec> {
    SpikedModelSpec::new(
        Vec::new(),
        sigma_sq,
        GroupPartition::equal(num_groups, group_size)?,
        0.0,
        0.0,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// `|v_hat^T v|` per component.
    pub alignment: Vec<f64>,
    /// Selected true-zero coordinates over all true-zero coordinates, pooled.
    pub type1: f64,
    /// Missed true-nonzero coordinates over all true-nonzero coordinates, pooled.
    pub type2: f64,
    pub type1_per_component: Vec<f64>,
    pub type2_per_component: Vec<f64>,
    /// Subspace distance to the truth per component.
    pub distance: Vec<f64>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics of estimated loadings against true loadings, matched by index.
pub fn evaluate_loadings(estimates: &[Array1<f64>], truths: &[Array1<f64>]) -> Result<EvalResult> {
    if estimates.len() > truths.len() {
        return Err(SgpcaError::InvalidInput(format!(
            "{} estimates but only {} true loadings",
            estimates.len(),
            truths.len()
        )));
    }
    let mut res = EvalResult {
        alignment: Vec::new(),
        type1: 0.0,
        type2: 0.0,
        type1_per_component: Vec::new(),
        type2_per_component: Vec::new(),
        distance: Vec::new(),
    };
    let (mut fp, mut nulls, mut fn_, mut signals) = (0usize, 0usize, 0usize, 0usize);
    for (est, truth) in estimates.iter().zip(truths) {
        if est.len() != truth.len() {
            return Err(SgpcaError::DimensionMismatch {
                expected: truth.len(),
                found: est.len(),
            });
        }
        let (mut c_fp, mut c_nulls, mut c_fn, mut c_signals) = (0, 0, 0, 0);
        for (&e, &t) in est.iter().zip(truth.iter()) {
            if t == 0.0 {
                c_nulls += 1;
                if e != 0.0 {
                    c_fp += 1;
                }
            } else {
                c_signals += 1;
                if e == 0.0 {
                    c_fn += 1;
                }
            }
        }
        res.type1_per_component.push(ratio(c_fp, c_nulls));
        res.type2_per_component.push(ratio(c_fn, c_signals));
        fp += c_fp;
        nulls += c_nulls;
        fn_ += c_fn;
        signals += c_signals;

        let cos = est.dot(truth).abs() / (est.dot(est).sqrt() * truth.dot(truth).sqrt());
        res.alignment
            .push(if cos.is_finite() { cos.min(1.0) } else { 0.0 });
        res.distance
            .push(subspace_distance(est.view(), truth.view()).unwrap_or(2.0));
    }
    res.type1 = ratio(fp, nulls);
    res.type2 = ratio(fn_, signals);
    Ok(res)
}

/// Metrics of fitted components against a simulation's ground truth.
pub fn evaluate(estimates: &[PCEstimate], spec: &SpikedModelSpec) -> Result<EvalResult> {
    let est: Vec<Array1<f64>> = estimates.iter().map(|e| e.loading.clone()).collect();
    let truth: Vec<Array1<f64>> = spec.spikes.iter().map(|s| s.loading.clone()).collect();
    evaluate_loadings(&est, &truth)
}
