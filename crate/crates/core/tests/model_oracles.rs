//! Checks of the classifier against independent numerical oracles.

use ldprepr_core::model::{Mlp, MlpConfig, Params};
use ldprepr_core::{EmbeddingVector, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(rng: &mut ChaCha8Rng) -> MlpConfig {
    MlpConfig {
        input_dim: rng.random_range(2..9),
        hidden_units: rng.random_range(2..7),
        num_classes: rng.random_range(2..5),
        dropout_rate: 0.0,
        learning_rate: 0.05,
        decay: 0.0,
        momentum: 0.0,
        batch_size: 64,
        epochs: 1,
    }
}

fn random_batch(rng: &mut ChaCha8Rng, c: &MlpConfig, n: usize) -> Vec<EmbeddingVector> {
    (0..n)
        .map(|_| {
            let label = rng.random_range(0..c.num_classes);
            let values = (0..c.input_dim)
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            EmbeddingVector::new(label, values)
        })
        .collect()
}

/// Central differences of the eval-mode mean loss, one parameter at a time.
fn finite_difference(model: &Mlp, batch: &[EmbeddingVector], h: f64) -> Vec<f64> {
    let mut probe = model.clone();
    let mut grad = Vec::new();
    for s in 0..4 {
        let len = probe.params().slices()[s].len();
        for i in 0..len {
            let orig = probe.params().slices()[s][i];
            probe.params_mut().slices_mut()[s][i] = orig + h;
            let up = probe.loss(batch).unwrap();
            probe.params_mut().slices_mut()[s][i] = orig - h;
            let down = probe.loss(batch).unwrap();
            probe.params_mut().slices_mut()[s][i] = orig;
            grad.push((up - down) / (2.0 * h));
        }
    }
    grad
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let c = small_config(&mut rng);
        let model = Mlp::new(c.clone(), RngSeed::new(case, 0)).unwrap();
        let n = rng.random_range(1..6);
        let batch = random_batch(&mut rng, &c, n);
        let (_, analytic) = model.gradient(&batch).unwrap();
        let numeric = finite_difference(&model, &batch, 1e-6);
        let err = relative_error(&analytic.flatten(), &numeric);
        assert!(err <= 1e-4, "case {case}: relative error {err:e} for {c:?}");
    }
}

#[test]
fn one_plain_sgd_step_moves_by_minus_lr_times_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let c = small_config(&mut rng);
    let batch = random_batch(&mut rng, &c, 8);
    let mut model = Mlp::new(c.clone(), RngSeed::new(1, 0)).unwrap();
    let before = model.params().flatten();
    let numeric = finite_difference(&model, &batch, 1e-6);
    model.train(&batch, RngSeed::new(2, 0)).unwrap();
    assert_eq!(model.updates(), 1);
    let step: Vec<f64> = model
        .params()
        .flatten()
        .iter()
        .zip(&before)
        .map(|(a, b)| a - b)
        .collect();
    let expected: Vec<f64> = numeric.iter().map(|g| -c.learning_rate * g).collect();
    let err = relative_error(&step, &expected);
    assert!(err <= 1e-4, "relative error {err:e}");
}

fn blobs(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = i % 2;
            let shift = if label == 0 { -1.5 } else { 1.5 };
            let values = (0..dim)
                .map(|_| shift + rng.random_range(-1.0..1.0))
                .collect();
            EmbeddingVector::new(label, values)
        })
        .collect()
}

#[test]
fn separable_blobs_are_learned() {
    let data = blobs(200, 20, 3);
    let mut model = Mlp::new(MlpConfig::sentiment(20, 2), RngSeed::new(4, 0)).unwrap();
    let history = model.train(&data, RngSeed::new(5, 0)).unwrap();
    assert_eq!(history.len(), 50);
    assert!(*history.accuracy.last().unwrap() >= 0.95);
    assert!(model.evaluate(&data).unwrap() >= 0.95);

    let first: f64 = history.loss[..5].iter().sum::<f64>() / 5.0;
    let last: f64 = history.loss[45..].iter().sum::<f64>() / 5.0;
    assert!(last < first, "loss went from {first} to {last}");
}

#[test]
fn training_is_deterministic() {
    let data = blobs(64, 6, 9);
    let mut c = MlpConfig::sentiment(6, 2);
    c.epochs = 3;
    let run = || {
        let mut m = Mlp::new(c.clone(), RngSeed::new(1, 0)).unwrap();
        let h = m.train(&data, RngSeed::new(2, 0)).unwrap();
        (m, h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a.params(), b.params());
    assert_eq!(ha, hb);
}

#[test]
fn memorizes_a_tiny_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<_> = (0..10)
        .map(|i| {
            let values = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            EmbeddingVector::new(i % 2, values)
        })
        .collect();
    let c = MlpConfig {
        input_dim: 5,
        hidden_units: 32,
        num_classes: 2,
        dropout_rate: 0.0,
        learning_rate: 0.1,
        decay: 0.0,
        momentum: 0.9,
        batch_size: 10,
        epochs: 2000,
    };
    let mut model = Mlp::new(c, RngSeed::new(0, 0)).unwrap();
    model.train(&data, RngSeed::new(0, 0)).unwrap();
    assert_eq!(model.evaluate(&data).unwrap(), 1.0);
}

fn balanced_noise(n: usize, dim: usize, classes: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let values = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            EmbeddingVector::new(i % classes, values)
        })
        .collect()
}

#[test]
fn untrained_model_is_at_chance() {
    let data = balanced_noise(2000, 20, 2, 1);
    let model = Mlp::new(MlpConfig::sentiment(20, 2), RngSeed::new(1, 0)).unwrap();
    let acc = model.evaluate(&data).unwrap();
    assert!((acc - 0.5).abs() <= 0.05, "{acc}");

    let data = balanced_noise(2100, 20, 7, 2);
    let model = Mlp::new(MlpConfig::sentiment(20, 7), RngSeed::new(2, 0)).unwrap();
    let acc = model.evaluate(&data).unwrap();
    assert!((acc - 1.0 / 7.0).abs() <= 0.05, "{acc}");
}

#[test]
fn inverted_dropout_preserves_expected_pre_activation() {
    let rate = 0.5;
    let mut c = MlpConfig::sentiment(30, 2);
    c.hidden_units = 8;
    c.dropout_rate = rate;
    let mut model = Mlp::new(c, RngSeed::new(3, 0)).unwrap();
    let x = balanced_noise(1, 30, 2, 5).remove(0);
    let clean = model.hidden_pre_activation(&x, false).unwrap();

    let masks = 20_000;
    let mut mean = [0.0; 8];
    for _ in 0..masks {
        for (m, v) in mean
            .iter_mut()
            .zip(model.hidden_pre_activation(&x, true).unwrap())
        {
            *m += v / masks as f64;
        }
    }
    let Params { w1, .. } = model.params().clone();
    for j in 0..8 {
        // Var of one masked sample: sum_i (x_i w_ij)^2 * rate / (1 - rate).
        let var: f64 = (0..30)
            .map(|i| (x.values[i] * w1[i * 8 + j]).powi(2) * rate / (1.0 - rate))
            .sum();
        let sigma = (var / masks as f64).sqrt();
        assert!(
            (mean[j] - clean[j]).abs() <= 3.0 * sigma,
            "unit {j}: {} vs {} (sigma {sigma})",
            mean[j],
            clean[j]
        );
    }
}
