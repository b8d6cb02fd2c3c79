use anomaly_forecast::lstm::{l1_loss, train, LstmModel, LstmShape, TrainConfig};
use anomaly_forecast::series::AnomalyWindow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::window;

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = common::gradient_check(seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn head_bias_gradient_includes_feedback() {
    let model = LstmModel::init(LstmShape::default(), 9);
    let r = [0.01, 0.02, -0.01, 0.03];
    let s = [0.2, 0.1, -0.3, 0.5];
    let pred = model.forward(&r, &s).unwrap();
    let actual = [pred[0] + 0.1, pred[1] - 0.1, pred[2] + 0.1];
    let (_, grad) = model.backward(&r, &s, &actual).unwrap();
    let bias = *grad.last().unwrap();
    // Without the fed-back predictions this would be exactly (-1 + 1 - 1) / 3.
    let direct = -1.0 / 3.0;
    let h = 1e-6;
    let mut up = model.clone();
    *up.params_mut().last_mut().unwrap() += h;
    let mut down = model.clone();
    *down.params_mut().last_mut().unwrap() -= h;
    let numeric = (l1_loss(&up.forward(&r, &s).unwrap(), &actual).unwrap()
        - l1_loss(&down.forward(&r, &s).unwrap(), &actual).unwrap())
        / (2.0 * h);
    assert!((bias - numeric).abs() < 1e-8);
    assert!((bias - direct).abs() > 1e-6);
}

#[test]
fn forward_is_pure_and_bounded() {
    let model = LstmModel::init(LstmShape::default(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let r: [f64; 4] = std::array::from_fn(|_| rng.random_range(-0.2..=0.2));
        let s: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        let a = model.forward(&r, &s).unwrap();
        let b = model.forward(&r, &s).unwrap();
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        assert!(a.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn memorises_a_constant_window() {
    let w = window([0.01; 7], [0.3; 7]);
    let cfg = TrainConfig {
        epochs: 500,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(LstmModel::init(LstmShape::default(), 1), &[w], &cfg).unwrap();
    let last = *out.loss_trace.last().unwrap();
    assert!(last < 0.001, "final loss {last}");
}

#[test]
fn zero_epochs_leaves_model_unchanged() {
    let w = window([0.01; 7], [0.3; 7]);
    let model = LstmModel::init(LstmShape::default(), 2);
    let cfg = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let out = train(model.clone(), &[w], &cfg).unwrap();
    assert_eq!(out.model, model);
    assert!(out.loss_trace.is_empty());
    assert!(train(model, &[], &cfg).is_err());
}

#[test]
fn loss_trends_down_and_training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let windows: Vec<AnomalyWindow> = (0..30)
        .map(|_| {
            let s: [f64; 7] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let r = std::array::from_fn(|k| 0.02 * s[k] + rng.random_range(-0.005..0.005));
            window(r, s)
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 60,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = train(LstmModel::init(LstmShape::default(), 5), &windows, &cfg).unwrap();
    let head: f64 = a.loss_trace[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = a.loss_trace[50..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "first {head}, last {tail}");
    let b = train(LstmModel::init(LstmShape::default(), 5), &windows, &cfg).unwrap();
    let bits = |m: &LstmModel| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.model), bits(&b.model));
}
