//! Seeded generators and oracles shared by the integration tests.
#![allow(dead_code)]

use anomaly_forecast::arima::{
    auto_fit, fit_arima, forecast, one_step_residuals, residual_offset, studentize, ArimaModel, ArimaOrder,
};
use anomaly_forecast::lstm::{l1_loss, LstmModel};
use anomaly_forecast::sarimax::{sarimax_one_step, SarimaxModel};
use anomaly_forecast::outlier::{flag_outliers, DEFAULT_THRESHOLD};
use anomaly_forecast::series::{AnomalyWindow, TradingDay};
use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Unit-variance AR(1) after a 100-step burn-in.
pub fn ar1(seed: u64, n: usize, phi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut y = Vec::with_capacity(n);
    let mut prev = 0.0;
    for _ in 0..n + 100 {
        prev = phi * prev + noise.sample(&mut rng);
        y.push(prev);
    }
    y.split_off(100)
}

pub fn random_walk(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut level = 100.0;
    (0..n)
        .map(|_| {
            level += noise.sample(&mut rng);
            level
        })
        .collect()
}

pub fn days(n: usize) -> Vec<TradingDay> {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    (0..n)
        .map(|i| TradingDay {
            date: start + chrono::Days::new(i as u64),
            ordinal: i,
        })
        .collect()
}

/// Fit on a clean training stretch, roll one-step residuals over the rest,
/// studentize and flag. Returns the flagged positions within `detect`.
pub fn detect(train: &[f64], detect: &[f64]) -> Vec<usize> {
    let model = auto_fit(train, 3).unwrap();
    let mut all = train.to_vec();
    all.extend_from_slice(detect);
    let res = one_step_residuals(&model, &all).unwrap();
    let start = train.len() - residual_offset(model.order);
    let z = studentize(&res[start..]).unwrap();
    let input: Vec<_> = days(z.len()).into_iter().zip(z).collect();
    flag_outliers(&input, DEFAULT_THRESHOLD)
        .iter()
        .enumerate()
        .filter(|(_, f)| f.flagged)
        .map(|(i, _)| i)
        .collect()
}

/// Ten 6-sd shocks added to a seeded AR(1) stretch. Returns how many shocked
/// positions were flagged, and the flagged-day rate on the unshocked control.
pub fn injection_run(seed: u64) -> (usize, f64) {
    let y = ar1(seed, 750, 0.6);
    let (train, test) = y.split_at(250);
    let sd = {
        let m = test.iter().sum::<f64>() / test.len() as f64;
        (test.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (test.len() - 1) as f64).sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut shocked = test.to_vec();
    let positions: Vec<usize> = sample(&mut rng, test.len() - 2, 10).into_iter().map(|i| i + 1).collect();
    for &p in &positions {
        shocked[p] += 6.0 * sd;
    }
    let flagged = detect(train, &shocked);
    let hits = positions.iter().filter(|p| flagged.contains(p)).count();
    let control = detect(train, test);
    (hits, control.len() as f64 / test.len() as f64)
}

pub fn window(returns: [f64; 7], sentiments: [f64; 7]) -> AnomalyWindow {
    let start = NaiveDate::from_ymd_opt(2018, 3, 5).unwrap();
    let days = std::array::from_fn(|k| TradingDay {
        date: start + chrono::Days::new(k as u64),
        ordinal: 40 + k,
    });
    let mut price = 100.0;
    let prices = std::array::from_fn(|k| {
        price *= 1.0 + returns[k];
        price
    });
    AnomalyWindow::new("TEST", days, returns, sentiments, prices).unwrap()
}

pub fn random_window(rng: &mut ChaCha8Rng) -> AnomalyWindow {
    let r = std::array::from_fn(|_| rng.random_range(-0.05..0.05));
    let s = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    window(r, s)
}

/// Windows from `y_t = phi y_{t-1} + beta x_t + e_t`, each started from rest.
/// With `exog_drives_y` false, y is driven by an unrelated draw instead of x.
pub fn exog_windows(seed: u64, n: usize, phi: f64, beta: f64, exog_drives_y: bool) -> Vec<AnomalyWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    (0..n)
        .map(|_| {
            let x: [f64; 7] = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
            let unrelated: [f64; 7] = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
            let driver = if exog_drives_y { x } else { unrelated };
            let mut y = [0.0; 7];
            let mut prev = 0.0;
            for t in 0..7 {
                y[t] = phi * prev + beta * driver[t] + noise.sample(&mut rng);
                prev = y[t];
            }
            window(y, x)
        })
        .collect()
}

/// Largest relative error between analytic and central-difference gradients.
#[allow(clippy::needless_range_loop)]
pub fn max_relative_error(model: &LstmModel, r: &[f64; 4], s: &[f64; 4], actual: &[f64; 3]) -> f64 {
    let (_, grad) = model.backward(r, s, actual).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..grad.len() {
        let mut plus = model.clone();
        plus.params_mut()[k] += h;
        let mut minus = model.clone();
        minus.params_mut()[k] -= h;
        let lp = l1_loss(&plus.forward(r, s).unwrap(), actual).unwrap();
        let lm = l1_loss(&minus.forward(r, s).unwrap(), actual).unwrap();
        let numeric = (lp - lm) / (2.0 * h);
        let denom = grad[k].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((grad[k] - numeric).abs() / denom);
    }
    worst
}

/// Gradient-check target for seed `seed`: a random window with targets 0.05
/// either side of the prediction, away from the L1 kink.
pub fn gradient_check(seed: u64) -> f64 {
    use anomaly_forecast::lstm::LstmShape;
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let model = LstmModel::init(LstmShape::default(), seed);
    let w = random_window(&mut rng);
    let (r, s) = (w.context_returns(), w.context_sentiments());
    let pred = model.forward(&r, &s).unwrap();
    let actual: [f64; 3] = std::array::from_fn(|k| pred[k] + if k % 2 == 0 { 0.05 } else { -0.05 });
    max_relative_error(&model, &r, &s, &actual)
}

/// Largest gap between the ARIMA one-step forecast and the non-seasonal
/// SARIMAX recursion over three models, one of them fitted, on every prefix.
/// The exogenous value is arbitrary since the converted models have no beta.
pub fn one_step_gap() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut y = vec![0.0f64; 200];
    for t in 2..y.len() {
        y[t] = 0.5 * y[t - 1] - 0.2 * y[t - 2] + noise.sample(&mut rng) + 0.1;
    }
    let cum: Vec<f64> = y
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    let cases: Vec<(ArimaModel, &[f64])> = vec![
        (fit_arima(&y, ArimaOrder::new(2, 0, 1)).unwrap(), &y),
        (ArimaModel::with_coefficients(ArimaOrder::new(1, 1, 1), vec![0.3], vec![0.4], 0.05).unwrap(), &cum),
        (ArimaModel::with_coefficients(ArimaOrder::new(0, 2, 1), vec![], vec![-0.3], 0.0).unwrap(), &cum),
    ];
    let mut worst: f64 = 0.0;
    for (arima, series) in cases {
        let sx = SarimaxModel::from_arima(&arima);
        let eps = arima.innovations(series);
        for t in arima.order.sum()..series.len() {
            let a = forecast(&arima, &series[..t], 1).unwrap()[0];
            let b = sarimax_one_step(&sx, &series[..t], &eps[..t], 0.37).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    worst
}
