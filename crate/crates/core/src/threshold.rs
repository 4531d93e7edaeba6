//! Proximal shrinkage operators and the projector distance between lines.

use ndarray::{ArrayView1, ArrayViewMut1};

use crate::error::{Result, SgpcaError};

/// Entry-wise soft thresholding, `(1 - lambda/|x|)_+ x`.
#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if x.abs() <= lambda {
        0.0
    } else {
        x - lambda * x.signum()
    }
}

/// Block soft thresholding, `(1 - lambda/||x||_2)_+ x`, in place.
///
/// A block whose norm equals `lambda` exactly is zeroed.
pub fn block_soft_threshold_inplace(mut x: ArrayViewMut1<'_, f64>, lambda: f64) {
    debug_assert!(lambda >= 0.0);
    if lambda == 0.0 {
        return;
    }
    if x.len() == 1 {
        // exact reduction to the scalar case
        x[0] = soft_threshold(x[0], lambda);
        return;
    }
    let norm = x.dot(&x).sqrt();
    if norm <= lambda {
        x.fill(0.0);
    } else {
        let scale = 1.0 - lambda / norm;
        x.mapv_inplace(|v| v * scale);
    }
}

pub fn block_soft_threshold(x: ArrayView1<'_, f64>, lambda: f64) -> ndarray::Array1<f64> {
    let mut out = x.to_owned();
    block_soft_threshold_inplace(out.view_mut(), lambda);
    out
}

/// Squared Frobenius distance between the rank-one projectors onto `span(v1)`
/// and `span(v2)`, i.e. `2 (1 - cos^2 theta)`. Invariant to scaling and sign.
pub fn subspace_distance(v1: ArrayView1<'_, f64>, v2: ArrayView1<'_, f64>) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(SgpcaError::DimensionMismatch {
            expected: v1.len(),
            found: v2.len(),
        });
    }
    let n1 = v1.dot(&v1);
    let n2 = v2.dot(&v2);
    if n1 == 0.0 || n2 == 0.0 {
        return Err(SgpcaError::DegenerateVector(
            "subspace distance of a zero vector",
        ));
    }
    let u1 = &v1 / n1.sqrt();
    let u2 = &v2 / n2.sqrt();
    let c = u1.dot(&u2);
    let sin2 = if c * c < 0.5 {
        1.0 - c * c
    } else {
        // near-parallel: residual norms avoid the cancellation in 1 - c^2
        let r1 = &u2 - &(&u1 * c);
        let r2 = &u1 - &(&u2 * c);
        0.5 * (r1.dot(&r1) + r2.dot(&r2))
    };
    Ok((2.0 * sin2).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
        assert_eq!(soft_threshold(0.3, 0.5), 0.0);
        assert_eq!(soft_threshold(-7.0, 0.0), -7.0);
        assert_eq!(soft_threshold(0.0, 0.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5), -1.5);
    }

    #[test]
    fn soft_threshold_matches_grid_minimizer() {
        // argmin 1/2 (y - 2)^2 + 0.5 |y| over a 1e-4 grid on [-4, 4]
        let objective = |y: f64| 0.5 * (y - 2.0) * (y - 2.0) + 0.5 * y.abs();
        let best = (0..=80_000)
            .map(|k| -4.0 + k as f64 * 1e-4)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        assert!((best - 1.5).abs() < 1e-4);
        assert_eq!(soft_threshold(2.0, 0.5), 1.5);
    }

    #[test]
    fn block_soft_threshold_examples() {
        assert_eq!(
            block_soft_threshold(array![3.0, 4.0].view(), 5.0),
            array![0.0, 0.0]
        );
        let shrunk = block_soft_threshold(array![3.0, 4.0].view(), 1.0);
        assert!((shrunk[0] - 2.4).abs() < 1e-15 && (shrunk[1] - 3.2).abs() < 1e-15);
        assert_eq!(
            block_soft_threshold(array![-2.0, 0.0, 0.0].view(), 0.0),
            array![-2.0, 0.0, 0.0]
        );
        assert_eq!(
            block_soft_threshold(array![0.0, 0.0].view(), 1.0),
            array![0.0, 0.0]
        );
    }

    #[test]
    fn block_soft_threshold_matches_ray_minimizer() {
        // the minimizer lies on the ray through x: y = s x / ||x||, s >= 0
        let objective = |s: f64| 0.5 * (s - 5.0) * (s - 5.0) + 1.0 * s;
        let best = (0..=100_000)
            .map(|k| k as f64 * 1e-4)
            .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
            .unwrap();
        let expected = [best * 3.0 / 5.0, best * 4.0 / 5.0];
        let got = block_soft_threshold(array![3.0, 4.0].view(), 1.0);
        assert!((got[0] - expected[0]).abs() < 1e-4);
        assert!((got[1] - expected[1]).abs() < 1e-4);
    }

    #[test]
    fn block_soft_threshold_at_boundary_is_zero() {
        let out = block_soft_threshold(array![0.6, 0.8].view(), 1.0);
        assert_eq!(out, array![0.0, 0.0]);
    }

    #[test]
    fn subspace_distance_examples() {
        let e1 = array![1.0, 0.0];
        let e2 = array![0.0, 1.0];
        assert_eq!(subspace_distance(e1.view(), e1.view()).unwrap(), 0.0);
        assert_eq!(subspace_distance(e1.view(), e2.view()).unwrap(), 2.0);
        let d = array![1.0, 1.0] / 2f64.sqrt();
        let got = subspace_distance(d.view(), e1.view()).unwrap();

        // explicit projector difference
        let outer = |v: &ndarray::Array1<f64>| {
            let c = v.view().insert_axis(ndarray::Axis(1));
            c.dot(&c.t()) / v.dot(v)
        };
        let diff: Array2<f64> = outer(&d) - outer(&e1);
        let frob2: f64 = diff.iter().map(|x| x * x).sum();
        assert!((frob2 - 1.0).abs() < 1e-15);
        assert!((got - frob2).abs() < 1e-15);
    }

    #[test]
    fn subspace_distance_rejects_zero() {
        let z = array![0.0, 0.0];
        let e1 = array![1.0, 0.0];
        assert!(matches!(
            subspace_distance(z.view(), e1.view()),
            Err(SgpcaError::DegenerateVector(_))
        ));
        assert!(subspace_distance(e1.view(), array![1.0].view()).is_err());
    }
}
