use ndarray::Array1;
use proptest::prelude::*;
use sgpca::solver::double_threshold;
use sgpca::theory::{oracle_sets, snr};
use sgpca::tuning::alignment_score;
use sgpca::types::canonicalize_sign;
use sgpca::{block_soft_threshold, soft_threshold, subspace_distance, GroupPartition};

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Array1<f64>> {
    prop::collection::vec(-10.0..10.0f64, len).prop_map(Array1::from)
}

fn nonzero_vector(len: usize) -> impl Strategy<Value = Array1<f64>> {
    vector(len..len + 1).prop_filter("nonzero", |v| norm(v) > 1e-3)
}

proptest! {
    #[test]
    fn soft_threshold_shrinks(x in -1e3..1e3f64, y in -1e3..1e3f64, lambda in 0.0..50.0f64) {
        let (sx, sy) = (soft_threshold(x, lambda), soft_threshold(y, lambda));
        prop_assert!(sx.abs() <= x.abs());
        prop_assert!((sx - sy).abs() <= (x - y).abs() + 1e-12);
        prop_assert!(sx == 0.0 || sx.signum() == x.signum());
    }

    #[test]
    fn block_soft_threshold_shrinks(x in vector(1..12), lambda in 0.0..20.0f64) {
        let y = block_soft_threshold(x.view(), lambda);
        prop_assert!(norm(&y) <= norm(&x) + 1e-12);
        // the norm drops by exactly lambda, or to zero
        let expected = (norm(&x) - lambda).max(0.0);
        prop_assert!((norm(&y) - expected).abs() <= 1e-9 * (1.0 + norm(&x)));
        // the direction is kept
        if norm(&y) > 0.0 {
            let cos = y.dot(&x) / (norm(&x) * norm(&y));
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn block_soft_threshold_is_nonexpansive(x in vector(5..6), y in vector(5..6), lambda in 0.0..20.0f64) {
        let d = &block_soft_threshold(x.view(), lambda) - &block_soft_threshold(y.view(), lambda);
        prop_assert!(norm(&d) <= norm(&(&x - &y)) + 1e-9);
    }

    #[test]
    fn one_dimensional_block_is_entrywise(x in -100.0..100.0f64, lambda in 0.0..50.0f64) {
        let y = block_soft_threshold(Array1::from(vec![x]).view(), lambda);
        prop_assert_eq!(y[0], soft_threshold(x, lambda));
    }

    #[test]
    fn distance_ignores_scale_and_sign(v in nonzero_vector(6), a in 0.1..10.0f64, b in -10.0..-0.1f64) {
        prop_assert!(subspace_distance(v.view(), (-&v).view()).unwrap() < 1e-12);
        prop_assert!(subspace_distance((&v * a).view(), (&v * b).view()).unwrap() < 1e-12);
    }

    #[test]
    fn distance_of_unit_vectors(v in nonzero_vector(7), w in nonzero_vector(7)) {
        let v = &v / norm(&v);
        let w = &w / norm(&w);
        let d = subspace_distance(v.view(), w.view()).unwrap();
        let c = v.dot(&w);
        prop_assert!((d - 2.0 * (1.0 - c * c)).abs() < 1e-12);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&d));
        prop_assert!((d - subspace_distance(w.view(), v.view()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn canonical_sign_is_idempotent(v in nonzero_vector(8)) {
        let mut once = v.clone();
        canonicalize_sign(&mut once);
        let mut twice = once.clone();
        canonicalize_sign(&mut twice);
        prop_assert_eq!(&once, &twice);
        let mut flipped = -&v;
        canonicalize_sign(&mut flipped);
        prop_assert_eq!(&once, &flipped);
    }

    #[test]
    fn alignment_is_permutation_and_sign_invariant(
        vs in prop::collection::vec(nonzero_vector(5), 2..7),
        flips in prop::collection::vec(any::<bool>(), 7),
        rotate in 0usize..7,
    ) {
        let units: Vec<Array1<f64>> = vs.iter().map(|v| v / norm(v)).collect();
        let base: Vec<_> = units.iter().map(|v| Some(v.view())).collect();
        let score = alignment_score(&base).score;
        prop_assert!((0.0..=1.0).contains(&score));

        let mut moved: Vec<Array1<f64>> = units
            .iter()
            .zip(&flips)
            .map(|(v, &f)| if f { -v } else { v.clone() })
            .collect();
        let k = moved.len();
        moved.rotate_left(rotate % k);
        moved.reverse();
        let views: Vec<_> = moved.iter().map(|v| Some(v.view())).collect();
        prop_assert!((alignment_score(&views).score - score).abs() < 1e-12);
    }

    #[test]
    fn snr_is_increasing(x in 1e-6..1e3f64, dx in 1e-6..10.0f64) {
        prop_assert!(snr(x + dx).unwrap() > snr(x).unwrap());
    }

    #[test]
    fn oracle_sets_nest(
        v in nonzero_vector(12),
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
        da in 0.0..0.5f64,
        db in 0.0..0.5f64,
    ) {
        let v = &v / norm(&v);
        let part = GroupPartition::equal(4, 3).unwrap();
        let (g, s) = oracle_sets(v.view(), &part, a, b).unwrap();
        let members = part.coordinates_of(&g);
        prop_assert!(s.iter().all(|c| members.contains(c)));
        let (g2, s2) = oracle_sets(v.view(), &part, a + da, b + db).unwrap();
        prop_assert!(g2.iter().all(|x| g.contains(x)));
        prop_assert!(s2.iter().all(|x| s.contains(x)));
    }

    #[test]
    fn killed_groups_stay_zero(x in vector(12..13), eta in 0.0..3.0f64, tau in 0.0..3.0f64) {
        let part = GroupPartition::equal(4, 3).unwrap();
        let mut y = x.clone();
        double_threshold(&mut y, &part, eta, tau);
        for members in part.groups() {
            let group_norm: f64 = members.iter().map(|&c| x[c] * x[c]).sum::<f64>().sqrt();
            if group_norm <= 3f64.sqrt() * eta {
                prop_assert!(members.iter().all(|&c| y[c] == 0.0));
            }
        }
        // support only shrinks
        for c in 0..12 {
            prop_assert!(x[c] != 0.0 || y[c] == 0.0);
            prop_assert!(y[c].abs() <= x[c].abs());
        }
    }
}
