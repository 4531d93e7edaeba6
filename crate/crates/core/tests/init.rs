mod common;

use common::{gaussian_matrix, rng};
use proptest::prelude::*;
use sgpca::eigen::leading_eigenpair;
use sgpca::init::{select, select_groups};
use sgpca::{
    diagonal_threshold_init, diagonal_threshold_init_op, subspace_distance, Centering, CovOperator,
    DataMatrix, GroupPartition, InitConfig, InitFallback, SgpcaError,
};

fn strict(pi: f64, omega: f64) -> InitConfig {
    InitConfig {
        fallback: InitFallback::Fail,
        ..InitConfig::new(pi, omega).unwrap()
    }
}

#[test]
fn planted_loud_column_is_selected() {
    let planted = 7;
    for seed in 0..10u64 {
        let mut r = rng(seed);
        let mut x = gaussian_matrix(&mut r, 200, 20);
        x.column_mut(planted).mapv_inplace(|a| 10.0 * a);
        let data = DataMatrix::new(x.clone()).unwrap();
        let partition = GroupPartition::equal(5, 4).unwrap();
        let out = diagonal_threshold_init(&data, &partition, &strict(1.0, 1.0)).unwrap();
        let sel = out.selection.unwrap();

        // direct variance check of the planted column
        let col = x.column(planted);
        let mean = col.sum() / 200.0;
        let var = col.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 200.0;
        assert!(var > 1.0 + sel.omega_n);

        assert!(sel.groups.contains(&partition.group_of(planted)));
        assert!(sel.coords.contains(&planted));
        let argmax = out
            .vector
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert_eq!(argmax, planted);
        assert!((out.vector.dot(&out.vector) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pure_noise_with_large_constants_selects_nothing() {
    let partition = GroupPartition::equal(50, 5).unwrap();
    let mut empty = 0;
    for seed in 0..100u64 {
        let mut r = rng(500 + seed);
        let data = DataMatrix::new(gaussian_matrix(&mut r, 100, 250)).unwrap();
        match diagonal_threshold_init(&data, &partition, &strict(10.0, 10.0)) {
            Err(SgpcaError::EmptySelection(_)) => empty += 1,
            Ok(_) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }
    assert!(empty >= 99, "only {empty}/100 empty");
}

#[test]
fn fallback_returns_the_largest_variance_axis() {
    let mut r = rng(3);
    let mut x = gaussian_matrix(&mut r, 50, 12);
    x.column_mut(4).mapv_inplace(|a| 1.5 * a);
    let data = DataMatrix::new(x).unwrap();
    let partition = GroupPartition::equal(4, 3).unwrap();
    let out =
        diagonal_threshold_init(&data, &partition, &InitConfig::new(50.0, 50.0).unwrap()).unwrap();
    assert!(out.used_fallback);
    assert!(out.selection.is_none());
    let op = CovOperator::from_data(&data, Centering::Center);
    let diag = op.diagonal();
    let best = (0..12)
        .max_by(|&a, &b| diag[a].total_cmp(&diag[b]))
        .unwrap();
    assert_eq!(out.vector[best], 1.0);
    assert_eq!(out.vector.iter().filter(|a| **a != 0.0).count(), 1);
}

#[test]
fn full_selection_reduces_to_dense_pca() {
    let mut r = rng(4);
    // variances near 4 so every group and column clears a small margin
    let x = gaussian_matrix(&mut r, 400, 12) * 2.0;
    let data = DataMatrix::new(x).unwrap();
    let partition = GroupPartition::equal(4, 3).unwrap();
    let op = CovOperator::from_data(&data, Centering::Center);
    let out = diagonal_threshold_init_op(&op, &partition, &strict(1e-3, 1e-3)).unwrap();
    assert_eq!(out.selection.unwrap().coords, (0..12).collect::<Vec<_>>());
    let (_, lead) = leading_eigenpair(&op.to_dense());
    assert!(subspace_distance(out.vector.view(), lead.view()).unwrap() <= 1e-10);
}

#[test]
fn singleton_groups_give_single_stage_screen() {
    let mut r = rng(5);
    let mut x = gaussian_matrix(&mut r, 100, 30);
    for c in [2, 11, 19] {
        x.column_mut(c).mapv_inplace(|a| 3.0 * a);
    }
    let data = DataMatrix::new(x).unwrap();
    let partition = GroupPartition::singletons(30).unwrap();
    let op = CovOperator::from_data(&data, Centering::Center);
    let sel = select(&op, &partition, &strict(3.0, 3.0)).unwrap();
    // kept groups are exactly the candidate columns
    assert_eq!(partition.coordinates_of(&sel.groups), sel.groups);
    let diag = op.diagonal();
    for &g in &sel.groups {
        assert!(diag[g] >= 1.0 + sel.pi_n);
    }
    for c in 0..30 {
        let passes_both = diag[c] >= 1.0 + sel.pi_n && diag[c] >= 1.0 + sel.omega_n;
        assert_eq!(sel.coords.contains(&c), passes_both);
    }
    for c in [2, 11, 19] {
        assert!(sel.coords.contains(&c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn screens_are_monotone(seed in 0u64..10_000, pi in 0.05f64..4.0, omega in 0.05f64..4.0,
                            dpi in 0.0f64..3.0, domega in 0.0f64..3.0) {
        let mut r = rng(seed);
        let mut x = gaussian_matrix(&mut r, 40, 24);
        x.column_mut((seed % 24) as usize).mapv_inplace(|a| 2.5 * a);
        let data = DataMatrix::new(x).unwrap();
        let partition = GroupPartition::equal(6, 4).unwrap();
        let op = CovOperator::from_data(&data, Centering::Center);
        let diag = op.diagonal();

        let (_, loose) = select_groups(&diag, &partition, 40, pi);
        let (_, tight) = select_groups(&diag, &partition, 40, pi + dpi);
        prop_assert!(tight.iter().all(|g| loose.contains(g)));

        if let Ok(loose) = select(&op, &partition, &strict(pi, omega)) {
            if let Ok(tight) = select(&op, &partition, &strict(pi, omega + domega)) {
                prop_assert!(tight.coords.iter().all(|c| loose.coords.contains(c)));
            }
        } else {
            // tightening cannot revive an empty screen
            prop_assert!(select(&op, &partition, &strict(pi, omega + domega)).is_err());
        }
    }

    #[test]
    fn output_is_unit_and_supported_on_selection(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let mut x = gaussian_matrix(&mut r, 60, 20);
        for c in 0..4 {
            x.column_mut(c).mapv_inplace(|a| 2.0 * a);
        }
        let data = DataMatrix::new(x).unwrap();
        let partition = GroupPartition::equal(5, 4).unwrap();
        let out = diagonal_threshold_init(&data, &partition, &InitConfig::new(1.0, 1.0).unwrap()).unwrap();
        prop_assert!((out.vector.dot(&out.vector) - 1.0).abs() < 1e-12);
        if let Some(sel) = out.selection {
            for (c, &a) in out.vector.iter().enumerate() {
                if a != 0.0 {
                    prop_assert!(sel.coords.contains(&c));
                }
            }
        }
    }
}
