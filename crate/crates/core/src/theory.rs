//! Closed-form quantities from the convergence analysis.
//!
//! All rates are evaluated with their implicit constants set to one, so they
//! are only meaningful for trend comparisons.

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Result, SgpcaError};
use crate::types::GroupPartition;

/// Signal-to-noise scaling `h(x) = x^2 / (1 + x)`.
pub fn snr(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(SgpcaError::Domain(format!("snr needs x > 0, got {x}")));
    }
    Ok(x * x / (1.0 + x))
}

/// Hierarchical weak-l_r sparsity model and problem sizes.
///
/// Sizes are real-valued because they only enter through logarithms and
/// ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityModel {
    pub r: f64,
    /// Radius of the group-level weak-l_r ball.
    pub m_groups: f64,
    /// Within-group radii `m_(g)` for `g = 1, 2, ...`. Indices past the end
    /// reuse the last value; an empty list means `m_(g) = m_groups`.
    pub m_within: Vec<f64>,
    pub lambda_sq: f64,
    pub num_groups: f64,
    pub group_size: f64,
    pub n: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub tau: f64,
    /// `|G|` used for the entry-level threshold. When absent it is taken
    /// from the cardinality bound on the group oracle set, floored and at least 1.
    pub card_groups: Option<usize>,
}

impl SparsityModel {
    /// Model with all four threshold constants set to one.
    pub fn new(
        r: f64,
        m_groups: f64,
        lambda_sq: f64,
        num_groups: f64,
        group_size: f64,
        n: f64,
    ) -> Result<Self> {
        let model = Self {
            r,
            m_groups,
            m_within: Vec::new(),
            lambda_sq,
            num_groups,
            group_size,
            n,
            alpha: 1.0,
            beta: 1.0,
            eta: 1.0,
            tau: 1.0,
            card_groups: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 2.0) {
            return Err(SgpcaError::Domain(format!(
                "r must lie in (0, 2), got {}",
                self.r
            )));
        }
        let positive = [
            ("m_G", self.m_groups),
            ("lambda^2", self.lambda_sq),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SgpcaError::Domain(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("G", self.num_groups),
            ("T", self.group_size),
            ("n", self.n),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(SgpcaError::Domain(format!(
                    "{name} must be at least 1, got {v}"
                )));
            }
        }
        if self.m_within.iter().any(|m| !(*m > 0.0)) {
            return Err(SgpcaError::Domain(
                "within-group radii must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `m_(g)` for 1-based `g`.
    pub fn m_within_at(&self, g: usize) -> f64 {
        match self.m_within.len() {
            0 => self.m_groups,
            len => self.m_within[g.clamp(1, len) - 1],
        }
    }

    fn h(&self) -> Result<f64> {
        snr(self.lambda_sq)
    }
}

/// Group- and entry-level loading thresholds `(alpha_n, beta_n)`.
pub fn loading_thresholds(model: &SparsityModel, card_groups: usize) -> Result<(f64, f64)> {
    model.validate()?;
    let h = model.h()?;
    let group_arg = model.num_groups;
    let entry_arg = model.group_size * card_groups as f64;
    if !(group_arg > 0.0) || !(entry_arg > 0.0) {
        return Err(SgpcaError::Domain(format!(
            "logarithm arguments must be positive, got G={group_arg}, T|G|={entry_arg}"
        )));
    }
    let alpha_n = model.alpha * (group_arg.ln() / (model.n * h)).sqrt();
    let beta_n = model.beta * (entry_arg.ln() / (model.n * h)).sqrt();
    Ok((alpha_n, beta_n))
}

/// `floor((m_G / alpha_n)^r ∧ G)`, at least 1.
pub fn group_card_hint(model: &SparsityModel, alpha_n: f64) -> usize {
    let bound = (model.m_groups / alpha_n)
        .powf(model.r)
        .min(model.num_groups);
    (bound.floor() as usize).max(1)
}

/// Thresholds with `|G|` resolved from `model.card_groups` or the cardinality bound.
pub fn resolved_thresholds(model: &SparsityModel) -> Result<(f64, f64, usize)> {
    let (alpha_n, _) = loading_thresholds(model, 1)?;
    let card = model
        .card_groups
        .unwrap_or_else(|| group_card_hint(model, alpha_n));
    let (alpha_n, beta_n) = loading_thresholds(model, card)?;
    Ok((alpha_n, beta_n, card))
}

/// Oracle sets: groups with norm at least `alpha_n`, and coordinates of those
/// groups with magnitude at least `beta_n`. Both sorted ascending.
pub fn oracle_sets(
    v: ArrayView1<'_, f64>,
    partition: &GroupPartition,
    alpha_n: f64,
    beta_n: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if v.len() != partition.dim() {
        return Err(SgpcaError::DimensionMismatch {
            expected: partition.dim(),
            found: v.len(),
        });
    }
    let groups: Vec<usize> = partition
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, members)| members.iter().map(|&c| v[c] * v[c]).sum::<f64>().sqrt() >= alpha_n)
        .map(|(g, _)| g)
        .collect();
    let coords = partition
        .coordinates_of(&groups)
        .into_iter()
        .filter(|&c| v[c].abs() >= beta_n)
        .collect();
    Ok((groups, coords))
}

/// Cardinality bounds `(bound_G, bound_S)` given the actual `|G|`.
pub fn lemma1_bounds(
    model: &SparsityModel,
    alpha_n: f64,
    beta_n: f64,
    card_groups: usize,
) -> Result<(f64, f64)> {
    if !(alpha_n > 0.0 && beta_n > 0.0) {
        return Err(SgpcaError::Domain(format!(
            "bounds need positive thresholds, got ({alpha_n}, {beta_n})"
        )));
    }
    let bound_g = (model.m_groups / alpha_n)
        .powf(model.r)
        .min(model.num_groups);
    let bound_s = (model.group_size * card_groups as f64)
        .min((model.m_within_at(card_groups) / beta_n).powf(model.r));
    Ok((bound_g, bound_s))
}

/// Iteration thresholds `(eta * alpha_n / sqrt(T), tau * beta_n)`.
pub fn iteration_thresholds(model: &SparsityModel, alpha_n: f64, beta_n: f64) -> (f64, f64) {
    (
        model.eta * alpha_n / model.group_size.sqrt(),
        model.tau * beta_n,
    )
}

/// The three terms of the convergence rate bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTerms {
    pub alpha_n: f64,
    pub beta_n: f64,
    pub card_groups: usize,
    /// Error from ignoring weak groups.
    pub group: f64,
    /// Error from ignoring weak coordinates inside strong groups.
    pub entry: f64,
    /// Error of separating the spike from the noise bulk.
    pub parametric: f64,
}

impl RateTerms {
    pub fn total(&self) -> f64 {
        self.group + self.entry + self.parametric
    }
}

pub fn theorem1_rate(model: &SparsityModel) -> Result<RateTerms> {
    let (alpha_n, beta_n, card) = resolved_thresholds(model)?;
    let r = model.r;
    let groups_bound = (model.m_groups / alpha_n).powf(r);
    let group = groups_bound.min(model.num_groups) * alpha_n * alpha_n;
    let entry = if beta_n > 0.0 {
        (model.m_within_at(card) / beta_n)
            .powf(r)
            .min(model.group_size * groups_bound)
            * beta_n
            * beta_n
    } else {
        0.0
    };
    let l2 = model.lambda_sq;
    let parametric = (l2 * l2 + l2 + 1.0) / (l2 * l2) * model.num_groups.ln() / model.n;
    Ok(RateTerms {
        alpha_n,
        beta_n,
        card_groups: card,
        group,
        entry,
        parametric,
    })
}

/// Unit vector whose sorted group norms follow `m_G g^{-1/r}` and whose
/// entries decay like `j^{-1/r}` inside each group, with random group order,
/// random positions within groups, and random signs; then renormalized.
///
/// `active_groups` limits how many groups carry signal.
pub fn weak_lr_vector<R: Rng + ?Sized>(
    partition: &GroupPartition,
    r: f64,
    m_groups: f64,
    active_groups: usize,
    rng: &mut R,
) -> Array1<f64> {
    let mut v = Array1::zeros(partition.dim());
    let mut order: Vec<usize> = (0..partition.num_groups()).collect();
    order.shuffle(rng);
    for (rank, &g) in order.iter().take(active_groups.max(1)).enumerate() {
        let norm = m_groups * ((rank + 1) as f64).powf(-1.0 / r);
        let mut members = partition.group(g).to_vec();
        members.shuffle(rng);
        let raw: Vec<f64> = (1..=members.len())
            .map(|j| (j as f64).powf(-1.0 / r))
            .collect();
        let raw_norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (&c, &x) in members.iter().zip(&raw) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            v[c] = sign * norm * x / raw_norm;
        }
    }
    let total = v.dot(&v).sqrt();
    v / total
}

/// Smallest weak-l_r radii that contain `v`: `m_G` over sorted group norms and
/// `m_(g)` over the sorted entries of the top `g` groups, for every `g`.
pub fn envelope_constants(
    v: ArrayView1<'_, f64>,
    partition: &GroupPartition,
    r: f64,
) -> (f64, Vec<f64>) {
    let mut groups: Vec<(f64, usize)> = partition
        .groups()
        .iter()
        .enumerate()
        .map(|(g, m)| (m.iter().map(|&c| v[c] * v[c]).sum::<f64>().sqrt(), g))
        .collect();
    groups.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let m_groups = groups
        .iter()
        .enumerate()
        .map(|(k, (norm, _))| norm * ((k + 1) as f64).powf(1.0 / r))
        .fold(0.0, f64::max);

    let mut m_within = Vec::with_capacity(groups.len());
    let mut pooled: Vec<f64> = Vec::new();
    for &(_, g) in &groups {
        pooled.extend(partition.group(g).iter().map(|&c| v[c].abs()));
        pooled.sort_by(|a, b| b.total_cmp(a));
        let m = pooled
            .iter()
            .enumerate()
            .map(|(j, x)| x * ((j + 1) as f64).powf(1.0 / r))
            .fold(0.0, f64::max);
        m_within.push(m);
    }
    (m_groups, m_within)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn snr_values() {
        assert_eq!(snr(1.0).unwrap(), 0.5);
        assert_eq!(snr(3.0).unwrap(), 2.25);
        let x = 1e-6;
        assert!((snr(x).unwrap() / (x * x) - 1.0).abs() < 1e-5);
        assert!(snr(0.0).is_err());
        assert!(snr(-1.0).is_err());
    }

    fn model() -> SparsityModel {
        SparsityModel::new(1.0, 1.0, 1.0, std::f64::consts::E, 1.0, 1.0).unwrap()
    }

    #[test]
    fn threshold_formulas() {
        let m = model();
        let (a, _) = loading_thresholds(&m, 1).unwrap();
        assert!((a - 2f64.sqrt()).abs() < 1e-14);
        // T = 1 and |G| = 1 gives log(1) = 0
        let (_, b) = loading_thresholds(&m, 1).unwrap();
        assert_eq!(b, 0.0);
        assert!(loading_thresholds(&m, 0).is_err());

        let mut m2 = SparsityModel::new(1.0, 1.0, 5.0, 300.0, 10.0, 100.0).unwrap();
        let (a1, b1) = loading_thresholds(&m2, 3).unwrap();
        m2.n = 200.0;
        let (a2, b2) = loading_thresholds(&m2, 3).unwrap();
        assert!((a1 / a2 - 2f64.sqrt()).abs() < 1e-14);
        assert!((b1 / b2 - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn iteration_threshold_formulas() {
        let mut m = model();
        m.group_size = 4.0;
        assert_eq!(iteration_thresholds(&m, 2.0, 0.3).0, 1.0);
        m.tau = 2.0;
        assert!((iteration_thresholds(&m, 2.0, 0.3).1 - 0.6).abs() < 1e-15);
        m.group_size = 1.0;
        m.eta = 1.5;
        assert_eq!(iteration_thresholds(&m, 2.0, 0.3).0, 3.0);
    }

    #[test]
    fn oracle_set_edges() {
        let part = GroupPartition::equal(3, 2).unwrap();
        let e1 = array![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let (g, s) = oracle_sets(e1.view(), &part, 0.5, 0.5).unwrap();
        assert_eq!(g, vec![0]);
        assert_eq!(s, vec![0]);
        let (g, s) = oracle_sets(e1.view(), &part, 1.01, 0.5).unwrap();
        assert!(g.is_empty() && s.is_empty());
    }

    #[test]
    fn lemma_bound_edges() {
        let m = SparsityModel::new(1.0, 0.3, 5.0, 300.0, 10.0, 100.0).unwrap();
        let (bg, _) = lemma1_bounds(&m, 0.3, 0.1, 1).unwrap();
        assert!((bg - 1.0).abs() < 1e-15);
        let mut tiny = m.clone();
        tiny.r = 0.01;
        let (bg, _) = lemma1_bounds(&tiny, 0.15, 0.1, 1).unwrap();
        assert!((bg - 2f64.powf(0.01)).abs() < 1e-14);
        assert_eq!(bg.floor(), 1.0);
        assert!(lemma1_bounds(&m, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn rate_limits() {
        let mut m = SparsityModel::new(1.0, 1.0, 5.0, 300.0, 10.0, 100.0).unwrap();
        let base = theorem1_rate(&m).unwrap();
        m.n = 400.0;
        let quad = theorem1_rate(&m).unwrap();
        assert!((base.parametric / quad.parametric - 4.0).abs() < 1e-12);
        m.lambda_sq = 1e6;
        let big = theorem1_rate(&m).unwrap();
        let prefactor = big.parametric / (300f64.ln() / 400.0);
        assert!((prefactor - 1.0).abs() < 1e-5);
    }

    #[test]
    fn model_validation() {
        assert!(SparsityModel::new(2.0, 1.0, 1.0, 10.0, 1.0, 1.0).is_err());
        assert!(SparsityModel::new(1.0, 0.0, 1.0, 10.0, 1.0, 1.0).is_err());
        assert!(SparsityModel::new(1.0, 1.0, 1.0, 0.5, 1.0, 1.0).is_err());
    }
}
