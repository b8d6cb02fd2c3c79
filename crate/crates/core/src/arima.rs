//! Univariate ARIMA(p, d, q) estimated by conditional sum of squares.
//!
//! The model on the `d`-times differenced series `w` is
//!
//! ```text
//! w_t = c + phi_1 w_{t-1} + ... + phi_p w_{t-p} + e_t + theta_1 e_{t-1} + ... + theta_q e_{t-q}
//! ```
//!
//! with pre-sample innovations fixed at zero. Coefficients are found with a
//! three-start Nelder-Mead search on the standardised differenced series.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lagpoly;
use crate::optim::{is_invertible, is_stationary, standard_starts, NelderMead};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    pub fn sum(&self) -> usize {
        self.p + self.d + self.q
    }

    /// Estimated parameters: AR, MA and the intercept.
    pub fn n_params(&self) -> usize {
        self.p + self.q + 1
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArimaError {
    #[error("series too short: need {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("optimizer did not converge for ARIMA{}", best.order)]
    NonConvergence { best: Box<ArimaModel> },
    #[error("no candidate order could be fitted: {}", summarize(.0))]
    NoCandidate(Vec<(ArimaOrder, String)>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn summarize(failures: &[(ArimaOrder, String)]) -> String {
    failures
        .iter()
        .map(|(o, e)| format!("{o}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}

/// A fitted ARIMA model. Serialises as `{order, ar, ma, intercept, sigma2, aic}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ArimaDoc", into = "ArimaDoc")]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar_coeffs: Vec<f64>,
    pub ma_coeffs: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
}

#[derive(Serialize, Deserialize)]
struct ArimaDoc {
    order: ArimaOrder,
    ar: Vec<f64>,
    ma: Vec<f64>,
    intercept: f64,
    sigma2: f64,
    aic: f64,
}

impl From<ArimaModel> for ArimaDoc {
    fn from(m: ArimaModel) -> Self {
        Self {
            order: m.order,
            ar: m.ar_coeffs,
            ma: m.ma_coeffs,
            intercept: m.intercept,
            sigma2: m.sigma2,
            aic: m.aic,
        }
    }
}

impl From<ArimaDoc> for ArimaModel {
    fn from(d: ArimaDoc) -> Self {
        let k = d.order.n_params() as f64;
        Self {
            order: d.order,
            ar_coeffs: d.ar,
            ma_coeffs: d.ma,
            intercept: d.intercept,
            sigma2: d.sigma2,
            loglik: k - d.aic / 2.0,
            aic: d.aic,
        }
    }
}

impl ArimaModel {
    /// A model with fixed coefficients, for forecasting and residual work
    /// without estimation. `sigma2`, `loglik` and `aic` are left at neutral values.
    pub fn with_coefficients(
        order: ArimaOrder,
        ar_coeffs: Vec<f64>,
        ma_coeffs: Vec<f64>,
        intercept: f64,
    ) -> Result<Self, ArimaError> {
        if ar_coeffs.len() != order.p || ma_coeffs.len() != order.q {
            return Err(ArimaError::InvalidInput(format!(
                "ARIMA{order} needs {} AR and {} MA coefficients",
                order.p, order.q
            )));
        }
        Ok(Self {
            order,
            ar_coeffs,
            ma_coeffs,
            intercept,
            sigma2: 1.0,
            loglik: 0.0,
            aic: 0.0,
        })
    }

    fn warmup(&self) -> usize {
        self.order.p + self.order.d
    }

    /// One-step prediction of `y[n]` from `y[..n]` and the innovations `eps[..n]`.
    fn predict_next(&self, diff_op: &[f64], y: &[f64], eps: &[f64]) -> f64 {
        let n = y.len();
        let d = self.order.d;
        // w_{t} = sum_k diff_op[k] y_{t-k}
        let w_at = |t: usize| -> f64 { (0..=d).map(|k| diff_op[k] * y[t - k]).sum() };
        let mut w_hat = self.intercept;
        for (i, phi) in self.ar_coeffs.iter().enumerate() {
            w_hat += phi * w_at(n - 1 - i);
        }
        for (j, theta) in self.ma_coeffs.iter().enumerate() {
            if let Some(t) = n.checked_sub(j + 1) {
                w_hat += theta * eps[t];
            }
        }
        let carry: f64 = (1..=d).map(|k| diff_op[k] * y[n - k]).sum();
        w_hat - carry
    }

    /// Innovations aligned with `series`: zero through the warm-up, then
    /// `y_t` minus its one-step prediction.
    pub fn innovations(&self, series: &[f64]) -> Vec<f64> {
        let diff_op = lagpoly::difference_operator(self.order.d, 1);
        let mut eps = vec![0.0; series.len()];
        for t in self.warmup()..series.len() {
            eps[t] = series[t] - self.predict_next(&diff_op, &series[..t], &eps[..t]);
        }
        eps
    }
}

/// Applies the first-difference operator `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if series.len() <= d {
        return Err(ArimaError::TooShort {
            needed: d + 1,
            got: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// CSS innovations of the ARMA recursion on `w`; zero for `t < p`.
fn css_residuals(w: &[f64], intercept: f64, ar: &[f64], ma: &[f64], eps: &mut Vec<f64>) {
    let p = ar.len();
    eps.clear();
    eps.resize(w.len(), 0.0);
    for t in p..w.len() {
        let mut pred = intercept;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                pred += theta * eps[t - 1 - j];
            }
        }
        eps[t] = w[t] - pred;
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Spread too small to divide by, relative to the magnitude of the data.
fn negligible_spread(sd: f64, xs: &[f64]) -> bool {
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    !sd.is_finite() || !(sd > 1e-12 * scale)
}

/// Fits ARIMA(p, d, q) by conditional sum of squares.
pub fn fit_arima(series: &[f64], order: ArimaOrder) -> Result<ArimaModel, ArimaError> {
    if series.iter().any(|x| !x.is_finite()) {
        return Err(ArimaError::InvalidInput("non-finite value in series".into()));
    }
    let w = difference(series, order.d)?;
    let p = order.p;
    let n_eff = w.len().saturating_sub(p);
    if n_eff < order.n_params() + 1 || w.len() < 2 {
        return Err(ArimaError::TooShort {
            needed: order.d + p + order.n_params() + 1,
            got: series.len(),
        });
    }
    let (mean, sd) = mean_std(&w);
    if negligible_spread(sd, &w) {
        return Err(ArimaError::Degenerate(format!(
            "differenced series (d={}) has zero variance",
            order.d
        )));
    }
    let z: Vec<f64> = w.iter().map(|x| (x - mean) / sd).collect();

    let mut eps = Vec::with_capacity(z.len());
    let objective = |theta: &[f64]| -> f64 {
        css_residuals(&z, theta[0], &theta[1..1 + p], &theta[1 + p..], &mut eps);
        eps[p..].iter().map(|e| e * e).sum::<f64>() / n_eff as f64
    };
    let nm = NelderMead::default();
    let best = nm.minimize_multi(objective, &standard_starts(order.n_params()));

    let ar_coeffs = best.x[1..1 + p].to_vec();
    let ma_coeffs = best.x[1 + p..].to_vec();
    let intercept = mean * (1.0 - ar_coeffs.iter().sum::<f64>()) + sd * best.x[0];
    let sigma2 = best.f * sd * sd;
    let n = n_eff as f64;
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let model = ArimaModel {
        order,
        ar_coeffs,
        ma_coeffs,
        intercept,
        sigma2,
        loglik,
        aic: -2.0 * loglik + 2.0 * order.n_params() as f64,
    };
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(ArimaError::Degenerate("zero residual variance".into()));
    }
    if !best.converged || !is_stationary(&model.ar_coeffs) || !is_invertible(&model.ma_coeffs) {
        return Err(ArimaError::NonConvergence {
            best: Box::new(model),
        });
    }
    Ok(model)
}

/// All orders with `1 <= p + d + q <= max_sum`, in search order. Only the
/// white-noise order (0,0,0) is excluded.
pub fn candidate_orders(max_sum: usize) -> Vec<ArimaOrder> {
    let mut out = Vec::new();
    for total in 1..=max_sum {
        for d in 0..=total {
            for p in 0..=total - d {
                out.push(ArimaOrder::new(p, d, total - d - p));
            }
        }
    }
    out
}

/// Fits every candidate order and returns the minimum-AIC converged fit.
///
/// Ties go to the smaller `p + d + q`, then smaller `d`, then smaller `p`.
pub fn auto_fit(series: &[f64], max_sum: usize) -> Result<ArimaModel, ArimaError> {
    const MIN_LEN: usize = 30;
    if series.len() < MIN_LEN {
        return Err(ArimaError::TooShort {
            needed: MIN_LEN,
            got: series.len(),
        });
    }
    let (_, sd) = mean_std(series);
    if negligible_spread(sd, series) {
        return Err(ArimaError::Degenerate("series is constant".into()));
    }
    let mut best: Option<ArimaModel> = None;
    let mut failures = Vec::new();
    for order in candidate_orders(max_sum) {
        match fit_arima(series, order) {
            Ok(m) => {
                let key = |m: &ArimaModel| (m.aic, m.order.sum(), m.order.d, m.order.p);
                if best
                    .as_ref()
                    .is_none_or(|b| key(&m).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less))
                {
                    best = Some(m);
                }
            }
            Err(e) => failures.push((order, e.to_string())),
        }
    }
    match best {
        Some(m) => Ok(m),
        None if !failures.is_empty()
            && failures.iter().all(|(_, e)| e.starts_with("degenerate")) =>
        {
            Err(ArimaError::Degenerate(summarize(&failures)))
        }
        None => Err(ArimaError::NoCandidate(failures)),
    }
}

pub fn select_order(series: &[f64], max_sum: usize) -> Result<ArimaOrder, ArimaError> {
    auto_fit(series, max_sum).map(|m| m.order)
}

/// Recursive `h`-step forecast with future innovations set to zero.
pub fn forecast(model: &ArimaModel, history: &[f64], h: usize) -> Result<Vec<f64>, ArimaError> {
    let needed = model.order.sum();
    if history.len() < needed {
        return Err(ArimaError::TooShort {
            needed,
            got: history.len(),
        });
    }
    let diff_op = lagpoly::difference_operator(model.order.d, 1);
    let mut y = history.to_vec();
    let mut eps = model.innovations(history);
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        let next = model.predict_next(&diff_op, &y, &eps);
        y.push(next);
        eps.push(0.0);
        out.push(next);
    }
    Ok(out)
}

/// Residuals of one-step predictions made with fixed coefficients, starting
/// after the `p + d` warm-up. `out[k]` belongs to `series[p + d + k]`.
pub fn one_step_residuals(model: &ArimaModel, series: &[f64]) -> Result<Vec<f64>, ArimaError> {
    let needed = model.order.sum() + 1;
    if series.len() < needed {
        return Err(ArimaError::TooShort {
            needed,
            got: series.len(),
        });
    }
    let eps = model.innovations(series);
    Ok(eps[model.warmup()..].to_vec())
}

/// Number of leading observations that get no residual.
pub fn residual_offset(order: ArimaOrder) -> usize {
    order.p + order.d
}

/// `residual / sample_std(residuals)` with the `n - 1` denominator.
pub fn studentize(residuals: &[f64]) -> Result<Vec<f64>, ArimaError> {
    if residuals.len() < 3 {
        return Err(ArimaError::TooShort {
            needed: 3,
            got: residuals.len(),
        });
    }
    let (_, sd) = mean_std(residuals);
    if negligible_spread(sd, residuals) {
        return Err(ArimaError::Degenerate("residuals have zero standard deviation".into()));
    }
    Ok(residuals.iter().map(|r| r / sd).collect())
}
