mod common;

use brewsolve::augment::{
    self, augment, coverage_deviation, mix_augment, sample_dirichlet_pool, select_cyclic, temp_augment,
    AugmentConfig, Composition, CompositionCell, DirichletPool, NaturalSpline, SelectionPlan,
};
use brewsolve::datagen::{Dataset, GridSpec};
use brewsolve::{Chemistry, LabeledSample, Provenance, N_SPECIES};
use common::oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Synthetic grid dataset whose chemistry is linear in the fractions.
fn fake_grid() -> Dataset {
    let rows = GridSpec::default()
        .recipes()
        .unwrap()
        .into_iter()
        .map(|r| {
            let mut y = [0.0; N_SPECIES];
            for k in 0..N_SPECIES {
                for v in 0..4 {
                    let base = 10.0 * (k + 1) as f64 + v as f64 + r.granulometry.code() as f64;
                    y[k] += r.fractions[v] * base * (1.0 + 0.02 * (r.temperature - 93.0)).powi(2);
                }
            }
            LabeledSample::new(r, Chemistry(y), Provenance::Grid)
        })
        .collect();
    Dataset::new(rows)
}

#[test]
fn hand_pool_matches_oracle() {
    let pool = vec![
        [0.1, 0.2, 0.3, 0.4],
        [0.7, 0.1, 0.1, 0.1],
        [0.0, 0.9, 0.05, 0.05],
        [0.25, 0.25, 0.25, 0.25],
        [0.05, 0.05, 0.8, 0.1],
        [0.3, 0.3, 0.0, 0.4],
        [0.0, 0.0, 0.1, 0.9],
        [0.5, 0.0, 0.5, 0.0],
    ];
    let plan = SelectionPlan::with_levels(&[0.6]).unwrap();
    let sel = select_cyclic(&DirichletPool { samples: pool.clone(), seed: 0 }, &plan).unwrap();
    assert_eq!(sel.indices, oracle::selection(&pool, &plan));
    assert_eq!(sel.indices, vec![1, 5, 7, 0]);
}

#[test]
fn two_hundred_point_pool_matches_oracle() {
    let pool = sample_dirichlet_pool(200, 42);
    let plan = SelectionPlan::new(40).unwrap();
    let sel = select_cyclic(&pool, &plan).unwrap();
    assert_eq!(sel.indices, oracle::selection(&pool.samples, &plan));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn selection_matches_oracle_with_ties(raw in prop::collection::vec(prop::array::uniform4(0u8..6), 12..60), m4 in 2usize..4) {
        // Coarse quantisation produces many exact ties.
        let pool: Vec<Composition> = raw
            .iter()
            .map(|w| {
                let w = w.map(|x| x as f64 + 1.0);
                let s: f64 = w.iter().sum();
                w.map(|x| x / s)
            })
            .collect();
        let plan = SelectionPlan::new(4 * m4).unwrap();
        prop_assume!(pool.len() >= plan.total());
        let sel = select_cyclic(&DirichletPool { samples: pool.clone(), seed: 0 }, &plan).unwrap();
        prop_assert_eq!(&sel.indices, &oracle::selection(&pool, &plan));
        let mut seen = sel.indices.clone();
        seen.sort();
        seen.dedup();
        prop_assert_eq!(seen.len(), sel.indices.len());
    }
}

#[test]
fn pool_marginal_means_are_a_quarter() {
    let pool = sample_dirichlet_pool(100_000, 9);
    for i in 0..4 {
        let mean = pool.samples.iter().map(|c| c[i]).sum::<f64>() / pool.samples.len() as f64;
        assert!((mean - 0.25).abs() < 0.01, "axis {i}: {mean}");
    }
}

#[test]
fn coverage_gap_is_reported_per_axis() {
    let plan = SelectionPlan::new(400).unwrap();
    let sel = select_cyclic(&sample_dirichlet_pool(50 * 400, 5), &plan).unwrap();
    let dev = coverage_deviation(&sel, &plan);
    // The interior levels are matched closely; the gap is set by the sparse
    // corner near c_i = 1.
    assert!(dev.iter().all(|d| *d > 0.0 && *d < 0.5), "{dev:?}");
    assert!(sel.mixtures.iter().all(|c| (c.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

#[test]
fn spline_matches_independent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let mut x = vec![88.0];
        for _ in 0..6 {
            x.push(x.last().unwrap() + rng.random_range(0.5..2.5));
        }
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(0.0..300.0)).collect();
        let s = NaturalSpline::fit(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() <= 1e-12 * yi.abs().max(1.0));
        }
        for i in 0..x.len() - 1 {
            let mid = 0.5 * (x[i] + x[i + 1]);
            assert!((s.eval(mid) - oracle::hermite_spline(&x, &y, mid)).abs() < 1e-10);
        }
        for _ in 0..100 {
            let t = rng.random_range(x[0]..x[6]);
            let (a, b) = (s.eval(t), oracle::hermite_spline(&x, &y, t));
            assert!((a - b).abs() < 1e-10, "{t}: {a} vs {b}");
        }
    }
}

#[test]
fn mixtures_are_convex_combinations_of_pure_rows() {
    let ds = fake_grid();
    let cells = augment::pure_profiles(&ds).unwrap();
    assert_eq!(cells.len(), 21);
    let (_, pure) = &cells[0];
    assert_eq!(augment::convex_chemistry(&[1.0, 0.0, 0.0, 0.0], pure), pure[0]);
    let mean = augment::convex_chemistry(&[0.25; 4], pure);
    for k in 0..N_SPECIES {
        let m = pure.iter().map(|p| p.0[k]).sum::<f64>() / 4.0;
        assert!((mean.0[k] - m).abs() < 1e-12);
    }
    let mixed = mix_augment(&ds, 3000, 50, 1).unwrap();
    assert_eq!(mixed.len(), 3000);
    // The fake chemistry is linear in the fractions, so mixtures reproduce it.
    for s in mixed.iter().step_by(97) {
        let r = s.recipe;
        for k in 0..N_SPECIES {
            let mut want = 0.0;
            for v in 0..4 {
                let base = 10.0 * (k + 1) as f64 + v as f64 + r.granulometry.code() as f64;
                want += r.fractions[v] * base * (1.0 + 0.02 * (r.temperature - 93.0)).powi(2);
            }
            assert!((s.chemistry.0[k] - want).abs() < 1e-9);
        }
    }
}

#[test]
fn missing_pure_row_names_the_cell() {
    let mut ds = fake_grid();
    ds.samples.retain(|s| !(s.recipe.fractions == [0.0, 0.0, 1.0, 0.0] && s.recipe.temperature == 93.0));
    let err = mix_augment(&ds, 40, 50, 1).unwrap_err().to_string();
    assert!(err.contains("T=93"), "{err}");
}

#[test]
fn temperature_rows_stay_in_range_and_union_counts_add_up() {
    let ds = fake_grid();
    let (rows, _) = temp_augment(&ds, 3000, (88.0, 98.0), 4).unwrap();
    assert_eq!(rows.len(), 3000);
    assert!(rows.iter().all(|s| (88.0..=98.0).contains(&s.recipe.temperature)));
    let (all, report) = augment(&ds, &AugmentConfig::default(), 4).unwrap();
    assert_eq!(all.len(), ds.len() + 6000);
    assert_eq!((report.mix, report.temp, report.total), (3000, 3000, 7764));
    assert!(report.log_line().contains("mix: 3000, temp: 3000"));
}

#[test]
fn cell_splines_pass_through_grid_rows() {
    let ds = fake_grid();
    let row = ds.samples[500];
    let splines = augment::fit_temperature_splines(&ds, &CompositionCell::of(&row.recipe)).unwrap();
    for k in 0..N_SPECIES {
        assert!((splines[k].eval(row.recipe.temperature) - row.chemistry.0[k]).abs() < 1e-12 * row.chemistry.0[k].max(1.0));
    }
}

#[test]
fn augmentation_is_deterministic() {
    let ds = fake_grid();
    let cfg = AugmentConfig {
        mix: 400,
        temp: 400,
        ..AugmentConfig::default()
    };
    let (a, _) = augment(&ds, &cfg, 21).unwrap();
    let (b, _) = augment(&ds, &cfg, 21).unwrap();
    assert_eq!(a.to_tsv(), b.to_tsv());
}
