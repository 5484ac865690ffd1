use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::datagen::{simulate_var, split_indices, VarConfig};
use crate::models::{ModelConfig, ModelKind, ModelParams, ModelSpec};
use crate::penalties::PenaltyKind;

fn hyper(lr: f64, eps: f64) -> AdamHyper {
    AdamHyper {
        learning_rate: lr,
        beta1: 0.9,
        beta2: 0.999,
        eps,
    }
}

#[test]
fn adam_first_step_is_minus_lr() {
    let mut w = [0.0];
    let mut st = AdamState::zeros(1);
    adam_step("w", &mut w, &[1.0], &mut st, &hyper(0.1, 0.0), 1).unwrap();
    assert!((w[0] + 0.1).abs() < 1e-15);
}

#[test]
fn adam_zero_gradient_keeps_params() {
    let mut w = [0.3, -2.0];
    let mut st = AdamState::zeros(2);
    adam_step("w", &mut w, &[0.0, 0.0], &mut st, &hyper(0.1, 1e-8), 1).unwrap();
    assert_eq!(w, [0.3, -2.0]);
}

#[test]
fn adam_names_bad_group() {
    let mut w = [0.0];
    let mut st = AdamState::zeros(1);
    let err = adam_step("layer0.weight", &mut w, &[f64::NAN], &mut st, &hyper(0.1, 1e-8), 1).unwrap_err();
    assert!(err.to_string().contains("layer0.weight"), "{err}");
    assert!(adam_step("w", &mut w, &[1.0], &mut st, &hyper(0.1, 1e-8), 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adam_matches_scalar_recurrence(gs in prop::collection::vec(-5.0f64..5.0, 1..20), lr in 1e-4f64..1.0) {
        let h = hyper(lr, 1e-8);
        let mut w = [0.7];
        let mut st = AdamState::zeros(1);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.7f64);
        for (t, &g) in gs.iter().enumerate() {
            let t = t as i32 + 1;
            adam_step("w", &mut w, &[g], &mut st, &h, t as u64).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            x -= lr * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        prop_assert!((w[0] - x).abs() <= 1e-12 * (1.0 + x.abs()));
    }
}

fn linear_dataset(n: usize, coef: f64, seed: u64) -> LaggedDataset {
    let mut rng = crate::rng::stream(seed, "test");
    let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = inputs.iter().map(|x| coef * x).collect();
    LaggedDataset::from_parts(inputs, targets, 1, 1).unwrap()
}

fn var_panel_dataset(p: usize, t: usize, lags: usize, seed: u64) -> (LaggedDataset, LaggedDataset) {
    let cfg = VarConfig {
        num_series: p,
        length: t,
        ..VarConfig::default()
    };
    let panel = simulate_var(&cfg, seed).unwrap();
    let ds = LaggedDataset::from_panel(&panel, lags).unwrap();
    let (tr, va) = split_indices(ds.len(), 0.2, seed).unwrap();
    (ds.subset(&tr), ds.subset(&va))
}

fn no_penalty() -> PenaltyConfig {
    PenaltyConfig::new(PenaltyKind::GroupLasso, 0.0)
}

#[test]
fn var_recovers_noiseless_ar1_coefficient() {
    let train_set = linear_dataset(200, 0.5, 1);
    let val_set = linear_dataset(50, 0.5, 2);
    let model = Model::new(ModelConfig::new(ModelSpec::new(ModelKind::Var, false), 1, 1, None).unwrap(), 3).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 32,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let out = train(model, &train_set, &val_set, &no_penalty(), &cfg).unwrap();
    let ModelParams::Var(v) = out.best_model.params() else { panic!() };
    assert!((v.coef.values()[0] - 0.5).abs() < 1e-2, "{:?}", v.coef.values());
}

#[test]
fn zero_epochs_leaves_model_unchanged() {
    let (tr, va) = var_panel_dataset(3, 60, 2, 0);
    let model = Model::new(ModelConfig::new("cMLP".parse().unwrap(), 3, 2, Some(1)).unwrap(), 5).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let out = train(model.clone(), &tr, &va, &no_penalty(), &cfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.final_model, model);
    assert_eq!(out.best_model, model);
}

#[test]
fn training_is_deterministic_and_uses_partial_batches() {
    let (tr, va) = var_panel_dataset(3, 80, 2, 1);
    let model = Model::new(ModelConfig::new("cLSTMwF".parse().unwrap(), 3, 2, Some(0)).unwrap(), 5).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 25,
        learning_rate: 0.01,
        seed: 11,
        ..TrainConfig::default()
    };
    let pen = PenaltyConfig::new(PenaltyKind::DecoupledL1, 0.01);
    let a = train(model.clone(), &tr, &va, &pen, &cfg).unwrap();
    let b = train(model, &tr, &va, &pen, &cfg).unwrap();
    assert_eq!(a.final_model.flat_params(), b.final_model.flat_params());
    assert_eq!(a.history.len(), 3);
    assert!(a.history.to_csv().starts_with("epoch,data_loss,penalty,val_mse,seconds\n"));
}

#[test]
fn heavy_penalty_zeroes_series_factors() {
    let (tr, va) = var_panel_dataset(4, 300, 2, 2);
    let model = Model::new(ModelConfig::new("cMLPwF".parse().unwrap(), 4, 2, Some(0)).unwrap(), 7).unwrap();
    let cfg = TrainConfig {
        epochs: 1500,
        batch_size: 1024,
        learning_rate: 0.001,
        ..TrainConfig::default()
    };
    let out = train(model, &tr, &va, &PenaltyConfig::new(PenaltyKind::DecoupledL1, 100.0), &cfg).unwrap();
    let v = out.final_model.factors().unwrap().v.values().to_vec();
    assert!(v.iter().all(|x| x.abs() < 1e-3), "{v:?}");
}

#[test]
fn validation_mse_excludes_penalty() {
    let (tr, va) = var_panel_dataset(3, 80, 2, 3);
    let model = Model::new(ModelConfig::new(ModelSpec::new(ModelKind::Var, false), 3, 2, None).unwrap(), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 4,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };
    let out = train(model, &tr, &va, &PenaltyConfig::new(PenaltyKind::GroupLasso, 0.5), &cfg).unwrap();
    for snapshot in [&out.best_model] {
        assert_eq!(mean_squared_error(snapshot, &va).unwrap(), out.best_val_mse);
    }
    assert_eq!(out.history.records.last().unwrap().val_mse, mean_squared_error(&out.final_model, &va).unwrap());
    assert!(out.history.records.iter().all(|r| r.penalty > 0.0));
}

#[test]
fn gradient_step_is_descent_direction() {
    let (tr, _) = var_panel_dataset(3, 40, 2, 4);
    let model = Model::new(ModelConfig::new("cMLP".parse().unwrap(), 3, 2, Some(2)).unwrap(), 9).unwrap();
    let all: Vec<usize> = (0..tr.len()).collect();
    let (batch, targets) = tr.batch(&all).unwrap();
    let targets: Vec<f64> = targets.chunks(3).map(|r| r[2]).collect();
    let pen = PenaltyConfig::new(PenaltyKind::GroupLasso, 0.1);
    let base = batch_loss(&model, &batch, &targets, &pen).unwrap();
    let grad: Vec<f64> = base.grads.concat();
    let norm2: f64 = grad.iter().map(|g| g * g).sum();
    let lr = 1e-6;
    let mut stepped = model.clone();
    let flat: Vec<f64> = model.flat_params().iter().zip(&grad).map(|(w, g)| w - lr * g).collect();
    stepped.set_flat_params(&flat).unwrap();
    let after = batch_loss(&stepped, &batch, &targets, &pen).unwrap();
    let drop = (base.data + base.penalty) - (after.data + after.penalty);
    assert!((drop - lr * norm2).abs() <= 1e-3 * lr * norm2, "drop {drop} vs {}", lr * norm2);
}

#[test]
fn singleton_grid_matches_train() {
    let (tr, va) = var_panel_dataset(3, 80, 2, 5);
    let base = ModelConfig::new(ModelSpec::new(ModelKind::Var, false), 3, 2, None).unwrap();
    let cfg = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let pen = PenaltyConfig::new(PenaltyKind::GroupLasso, 0.0);
    let res = grid_search(&base, &tr, &va, &pen, &[0.01], &[0.001], &cfg, 42).unwrap();
    let (model_seed, train_seed) = grid::target_seeds(42, 0);
    let direct = train(
        Model::new(base, model_seed).unwrap(),
        &tr,
        &va,
        &pen.with_lambda(0.001),
        &TrainConfig {
            learning_rate: 0.01,
            seed: train_seed,
            ..cfg
        },
    )
    .unwrap();
    assert_eq!(res.fits.len(), 1);
    assert_eq!(res.fits[0].model, direct.best_model);
    assert_eq!(res.fits[0].val_mse, direct.best_val_mse);
}

#[test]
fn grid_flags_diverging_point_and_breaks_ties() {
    let (tr, va) = var_panel_dataset(3, 80, 2, 6);
    let base = ModelConfig::new("cMLP".parse().unwrap(), 3, 2, Some(0)).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let pen = PenaltyConfig::new(PenaltyKind::GroupLasso, 0.0);
    // An enormous step size overflows the network; the other point survives.
    let res = grid_search(&base, &tr, &va, &pen, &[1e300, 0.001], &[0.0], &cfg, 1).unwrap();
    assert_eq!(res.fits.len(), 3);
    assert_eq!(res.points.len(), 6);
    assert!(res.points.iter().filter(|p| p.learning_rate == 1e300).all(|p| p.failed()));
    assert!(res.fits.iter().all(|f| f.learning_rate == 0.001));

    // With zero epochs every grid point returns the same initial model, so
    // selection falls to the tie-break.
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let res = grid_search(&base, &tr, &va, &pen, &[0.1, 0.01], &[0.1, 0.001], &cfg, 1).unwrap();
    for f in &res.fits {
        assert_eq!((f.lambda, f.learning_rate), (0.001, 0.01));
    }
}

#[test]
fn grid_reports_exhaustion() {
    let (tr, va) = var_panel_dataset(3, 80, 2, 7);
    let base = ModelConfig::new(ModelSpec::new(ModelKind::Var, false), 3, 2, None).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    let pen = PenaltyConfig::new(PenaltyKind::GroupLasso, 0.0);
    let err = grid_search(&base, &tr, &va, &pen, &[1e300], &[0.0], &cfg, 1).unwrap_err();
    assert!(matches!(err, Error::GridExhausted { count: 1, .. }), "{err}");
}
