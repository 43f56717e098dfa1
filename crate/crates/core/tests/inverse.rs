mod common;

use brewsolve::inverse::*;
use brewsolve::nn::TrainPolicy;
use brewsolve::surrogate::{self, SurrogateSpec};
use brewsolve::{Chemistry, Error, Split};
use common::oracle::check_objective_gradient;
use common::{random_targets, recipe_scaler, toy_inverse, toy_split, toy_surrogate};
use ndarray::Array2;
use proptest::prelude::*;

fn check_fd(spec: &InverseSpec) {
    let sur = toy_surrogate(1);
    let net = toy_inverse(2);
    let obj = InverseObjective::new(spec, &sur, SurrogateMode::Frozen, &recipe_scaler()).unwrap();
    let x = Array2::from_shape_fn((6, 8), |(i, j)| ((i * 8 + j) as f64 * 0.37).sin());
    check_objective_gradient(&net, &x, &random_targets(6, 3), &obj).unwrap();
}

#[test]
fn reconstruction_term_gradient_matches_finite_differences() {
    let spec = InverseSpec {
        weights: TaskWeights {
            distrib: 0.0,
            temp: 0.0,
            press: 0.0,
            gran: 0.0,
        },
        ..InverseSpec::default()
    };
    check_fd(&spec);
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    check_fd(&InverseSpec::default());
}

#[test]
fn zero_beta_is_the_weighted_task_sum() {
    let sur = toy_surrogate(4);
    let spec = InverseSpec {
        beta: 0.0,
        ..InverseSpec::default()
    };
    let obj = InverseObjective::new(&spec, &sur, SurrogateMode::Frozen, &recipe_scaler()).unwrap();
    let net = toy_inverse(5);
    let x = Array2::from_shape_fn((5, 8), |(i, j)| (i as f64 - j as f64) * 0.1);
    let t = random_targets(5, 6);
    let out = net.predict(&x).unwrap();
    let p = obj.parts(&out, &t).unwrap();
    assert_eq!(p.recon, 0.0);
    let w = spec.weights;
    let sum = w.distrib * p.distrib + w.temp * p.temp + w.press * p.press + w.gran * p.gran;
    assert!((p.total - sum).abs() < 1e-15);
    let mut by_hand = 0.0;
    for (o, tt) in out.rows().into_iter().zip(t.rows()) {
        let (o, tt) = (o.to_vec(), tt.to_vec());
        by_hand += loss_distrib(&tt[..4], &o[..4], 1e-3);
    }
    assert!((p.distrib - by_hand / 5.0).abs() < 1e-14);
}

#[test]
fn consistent_targets_have_zero_reconstruction() {
    let sur = toy_surrogate(7);
    let obj = InverseObjective::new(&InverseSpec::default(), &sur, SurrogateMode::Frozen, &recipe_scaler()).unwrap();
    let net = toy_inverse(8);
    let x = Array2::from_shape_fn((4, 8), |(i, j)| (i + j) as f64 * 0.05);
    let out = net.predict(&x).unwrap();
    let mut t = random_targets(4, 9);
    let chem = sur.predict(&obj.surrogate_inputs(&out)).unwrap();
    t.slice_mut(ndarray::s![.., 9..]).assign(&chem);
    assert!(obj.parts(&out, &t).unwrap().recon < 1e-30);
}

#[test]
fn unfrozen_surrogate_is_a_contract_violation() {
    let sur = toy_surrogate(10);
    let obj = InverseObjective::new(&InverseSpec::default(), &sur, SurrogateMode::Trainable, &recipe_scaler()).unwrap();
    let out = toy_inverse(11).predict(&Array2::zeros((2, 8))).unwrap();
    assert!(matches!(obj.parts(&out, &random_targets(2, 12)), Err(Error::Contract(_))));
}

#[test]
fn bridge_maps_outputs_to_surrogate_features() {
    let sur = toy_surrogate(13);
    let obj = InverseObjective::new(&InverseSpec::default(), &sur, SurrogateMode::Frozen, &recipe_scaler()).unwrap();
    // Fractions, scaled T = 0.3, pressure, certain class F.
    let out = Array2::from_shape_vec((1, 9), vec![0.1, 0.2, 0.3, 0.4, 0.3, 0.7, 0.0, 0.0, 1.0]).unwrap();
    let z = obj.surrogate_inputs(&out);
    let want = [0.3, 0.0, 1.0, 0.1, 0.2, 0.3, 0.4];
    for (a, b) in z.iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn distrib_loss_is_permutation_invariant(
        a in prop::array::uniform4(0.0f64..1.0),
        b in prop::array::uniform4(0.0f64..1.0),
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        prop_assert!((loss_distrib(&a, &b, 1e-3) - loss_distrib(&pa, &pb, 1e-3)).abs() < 1e-12);
    }

    #[test]
    fn temperature_loss_penalizes_overestimates_more(y in -5.0f64..5.0, d in 1e-3f64..3.0) {
        prop_assert!(loss_temp(y, y + d, 1.5) > loss_temp(y, y - d, 1.5));
        prop_assert!((loss_temp(y, y + d, 1.5) - 1.5 * loss_temp(y, y - d, 1.5)).abs() < 1e-9);
    }
}

#[test]
fn training_round_trips_held_out_rows_and_leaves_surrogate_untouched() {
    let ds = toy_split(&[88.0, 90.0, 92.0, 94.0, 96.0, 98.0], 1.0 / 6.0, 21);
    let sur_policy = TrainPolicy {
        lr: 2e-3,
        max_epochs: 250,
        seed: 5,
        ..TrainPolicy::default()
    };
    let (sur, _) = surrogate::train_surrogate(&ds, &SurrogateSpec::default(), &sur_policy).unwrap();
    let before = sur.to_json().unwrap();
    let policy = TrainPolicy {
        lr: 2e-3,
        max_epochs: 250,
        seed: 6,
        ..TrainPolicy::default()
    };
    let (inv, history) = train_inverse(&ds, &InverseSpec::default(), &policy, &sur).unwrap();
    assert_eq!(sur.to_json().unwrap(), before);
    assert_eq!(inv.meta.best_epoch, history.best_epoch);

    let test = ds.in_split(Split::Test);
    let targets: Vec<Chemistry> = test.iter().map(|s| surrogate::predict_one(&sur, &s.recipe).unwrap()).collect();
    let out = invert(&inv, Some(&sur), &targets).unwrap();
    let mut t_err = Vec::new();
    let mut f_err = Vec::new();
    let mut correct = 0;
    for (s, o) in test.iter().zip(&out) {
        assert!((o.recipe.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(o.recipe.pressure, 9.0);
        assert!(o.residual.unwrap().is_finite());
        t_err.push((o.recipe.temperature - s.recipe.temperature).abs());
        f_err.push((0..4).map(|k| (o.recipe.fractions[k] - s.recipe.fractions[k]).abs()).fold(0.0, f64::max));
        correct += usize::from(o.recipe.granulometry == s.recipe.granulometry);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    assert!(median(&mut t_err) <= 0.5);
    assert!(median(&mut f_err) <= 0.07);
    assert!(correct as f64 >= 0.95 * test.len() as f64);

    let report = eval_inverse(&inv, Some(&sur), &test).unwrap();
    assert_eq!(report.temperature_tsv().lines().count(), test.len() + 1);
    assert_eq!(report.confusion_tsv().lines().count(), 4);
    let total: usize = report.granulometry.confusion.iter().flatten().sum();
    assert_eq!(total, test.len());
    assert_eq!(report.pressure_mse, 0.0);
}

#[test]
fn out_of_range_targets_are_flagged_not_rejected() {
    let ds = toy_split(&[88.0, 93.0, 98.0], 0.25, 22);
    let policy = TrainPolicy {
        max_epochs: 3,
        ..TrainPolicy::default()
    };
    let (sur, _) = surrogate::train_surrogate(&ds, &SurrogateSpec::default(), &policy).unwrap();
    let (inv, _) = train_inverse(&ds, &InverseSpec::default(), &policy, &sur).unwrap();
    let mut c = ds.in_split(Split::Train)[0].chemistry;
    c.0[3] = 1e6;
    let out = invert(&inv, None, &[c]).unwrap();
    assert_eq!(out[0].out_of_range, vec![3]);
    assert!(out[0].residual.is_none());
    assert!(matches!(invert(&sur, None, &[c]), Err(Error::Contract(_))));
}
