//! Seasonal ARIMA with one exogenous sentiment regressor:
//!
//! ```text
//! phi(B) Phi(B^s) (1-B)^d (1-B^s)^D y_t = c + beta x_t + theta(B) Theta(B^s) e_t
//! ```
//!
//! with `s = 7`. Training data is a stack of anomaly windows that are not
//! contiguous in time, so every window is its own segment: lags never reach
//! across a segment boundary and innovations restart at zero in each one.
//! Estimation is conditional sum of squares over all segments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arima::ArimaModel;
use crate::lagpoly;
use crate::optim::{is_invertible, is_stationary, standard_starts, NelderMead};
use crate::series::{AnomalyWindow, CONTEXT_LEN, HORIZON};

pub const SEASONAL_PERIOD: usize = 7;
pub const MIN_TRAINING_WINDOWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SarimaxOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    pub s: usize,
}

impl SarimaxOrder {
    pub const fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: sp,
            seasonal_d: sd,
            seasonal_q: sq,
            s: SEASONAL_PERIOD,
        }
    }

    pub const fn non_seasonal(p: usize, d: usize, q: usize) -> Self {
        Self::new(p, d, q, 0, 0, 0)
    }

    pub fn nonseasonal_sum(&self) -> usize {
        self.p + self.d + self.q
    }

    pub fn seasonal_sum(&self) -> usize {
        self.seasonal_p + self.seasonal_d + self.seasonal_q
    }

    /// Observations consumed before the first innovation: `p + sP + d + sD`.
    pub fn max_lag(&self) -> usize {
        self.p + self.s * self.seasonal_p + self.d + self.s * self.seasonal_d
    }

    fn tie_key(&self) -> (usize, usize, usize, usize, usize, usize) {
        (
            self.nonseasonal_sum(),
            self.d,
            self.p,
            self.seasonal_sum(),
            self.seasonal_d,
            self.seasonal_p,
        )
    }
}

impl fmt::Display for SarimaxOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})_{}",
            self.p, self.d, self.q, self.seasonal_p, self.seasonal_d, self.seasonal_q, self.s
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SarimaxError {
    #[error("not enough data: need {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("parameters cannot be identified: {0}")]
    Unidentifiable(String),
    #[error("optimizer did not converge for SARIMAX{}", best.order)]
    NonConvergence { best: Box<SarimaxModel> },
    #[error("no SARIMAX candidate could be fitted ({} tried)", .0.len())]
    NoCandidate(Vec<(SarimaxOrder, String)>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaxModel {
    pub order: SarimaxOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    #[serde(rename = "sar")]
    pub seasonal_ar: Vec<f64>,
    #[serde(rename = "sma")]
    pub seasonal_ma: Vec<f64>,
    pub beta: f64,
    pub intercept: f64,
    pub sigma2: f64,
    pub aic: f64,
}

/// How forecasts obtain the sentiment value on days they cannot observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExogPolicy {
    Zero,
    #[default]
    HoldLast,
    /// Use the realised future sentiment (sensitivity runs only).
    Oracle,
}

impl FromStr for ExogPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(Self::Zero),
            "hold-last" => Ok(Self::HoldLast),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!("unknown exogenous policy {other:?}")),
        }
    }
}

impl fmt::Display for ExogPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::HoldLast => "hold-last",
            Self::Oracle => "oracle",
        })
    }
}

/// One contiguous stretch of returns `y` with its sentiment `x`.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub y: &'a [f64],
    pub x: &'a [f64],
}

impl<'a> Segment<'a> {
    pub fn from_window(w: &'a AnomalyWindow) -> Self {
        Self {
            y: &w.returns,
            x: &w.sentiments,
        }
    }
}

/// Lag operators multiplied out.
struct Operators {
    /// `a_k` in `w_t = ... + sum_k a_k w_{t-k}`, index 0 is lag 1.
    ar: Vec<f64>,
    /// `b_k` in `... + sum_k b_k e_{t-k}`, index 0 is lag 1.
    ma: Vec<f64>,
    /// `(1-B)^d (1-B^s)^D`, constant term first.
    diff: Vec<f64>,
}

impl Operators {
    fn new(order: &SarimaxOrder, ar: &[f64], ma: &[f64], sar: &[f64], sma: &[f64]) -> Self {
        let ar_poly = lagpoly::mul(&lagpoly::ar_operator(ar, 1), &lagpoly::ar_operator(sar, order.s));
        let ma_poly = lagpoly::mul(&lagpoly::ma_operator(ma, 1), &lagpoly::ma_operator(sma, order.s));
        let diff = lagpoly::mul(
            &lagpoly::difference_operator(order.d, 1),
            &lagpoly::difference_operator(order.seasonal_d, order.s),
        );
        Self {
            ar: ar_poly[1..].iter().map(|c| -c).collect(),
            ma: ma_poly[1..].to_vec(),
            diff,
        }
    }

    fn warmup(&self) -> usize {
        self.diff.len() - 1 + self.ar.len()
    }

    /// Conditional mean of `y[n]` given `y[..n]`, `eps[..n]` and `x_t`.
    /// Caller guarantees `y.len() >= warmup()`.
    fn predict_next(&self, intercept: f64, beta: f64, y: &[f64], eps: &[f64], x_t: f64) -> f64 {
        let n = y.len();
        let diff = &self.diff;
        let w_at = |t: usize| -> f64 { diff.iter().enumerate().map(|(k, c)| c * y[t - k]).sum() };
        let mut w_hat = intercept + beta * x_t;
        for (k, a) in self.ar.iter().enumerate() {
            if *a != 0.0 {
                w_hat += a * w_at(n - 1 - k);
            }
        }
        for (k, b) in self.ma.iter().enumerate() {
            if *b != 0.0 {
                if let Some(t) = n.checked_sub(k + 1) {
                    w_hat += b * eps[t];
                }
            }
        }
        let carry: f64 = diff
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * y[n - k])
            .sum();
        w_hat - carry
    }

    /// Innovations over one segment; zero through the warm-up.
    fn innovations(&self, intercept: f64, beta: f64, y: &[f64], x: &[f64], eps: &mut Vec<f64>) {
        eps.clear();
        eps.resize(y.len(), 0.0);
        for t in self.warmup()..y.len() {
            eps[t] = y[t] - self.predict_next(intercept, beta, &y[..t], &eps[..t], x[t]);
        }
    }
}

impl SarimaxModel {
    fn operators(&self) -> Operators {
        Operators::new(&self.order, &self.ar, &self.ma, &self.seasonal_ar, &self.seasonal_ma)
    }

    /// Fixed-coefficient model, e.g. for hand-built forecasts.
    #[allow(clippy::too_many_arguments)]
    pub fn with_coefficients(
        order: SarimaxOrder,
        ar: Vec<f64>,
        ma: Vec<f64>,
        seasonal_ar: Vec<f64>,
        seasonal_ma: Vec<f64>,
        beta: f64,
        intercept: f64,
    ) -> Result<Self, SarimaxError> {
        if ar.len() != order.p
            || ma.len() != order.q
            || seasonal_ar.len() != order.seasonal_p
            || seasonal_ma.len() != order.seasonal_q
        {
            return Err(SarimaxError::InvalidInput(format!(
                "coefficient counts do not match SARIMAX{order}"
            )));
        }
        Ok(Self {
            order,
            ar,
            ma,
            seasonal_ar,
            seasonal_ma,
            beta,
            intercept,
            sigma2: 1.0,
            aic: 0.0,
        })
    }

    /// The non-seasonal model carrying an ARIMA model's coefficients and no exogenous term.
    pub fn from_arima(m: &ArimaModel) -> Self {
        Self {
            order: SarimaxOrder::non_seasonal(m.order.p, m.order.d, m.order.q),
            ar: m.ar_coeffs.clone(),
            ma: m.ma_coeffs.clone(),
            seasonal_ar: Vec::new(),
            seasonal_ma: Vec::new(),
            beta: 0.0,
            intercept: m.intercept,
            sigma2: m.sigma2,
            aic: m.aic,
        }
    }

    /// Innovations of a single segment under this model.
    pub fn innovations(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut eps = Vec::new();
        self.operators()
            .innovations(self.intercept, self.beta, y, x, &mut eps);
        eps
    }

    /// Total conditional sum of squares over `segments`.
    pub fn css(&self, segments: &[Segment<'_>]) -> f64 {
        let ops = self.operators();
        let warm = ops.warmup();
        let mut eps = Vec::new();
        segments
            .iter()
            .map(|s| {
                ops.innovations(self.intercept, self.beta, s.y, s.x, &mut eps);
                eps.iter().skip(warm).map(|e| e * e).sum::<f64>()
            })
            .sum()
    }
}

/// Conditional expectation of `y_t` with `e_t = 0`, given the history of
/// returns and innovations up to `t - 1` and today's exogenous value.
pub fn sarimax_one_step(
    model: &SarimaxModel,
    history_y: &[f64],
    history_eps: &[f64],
    x_t: f64,
) -> Result<f64, SarimaxError> {
    let ops = model.operators();
    if history_y.len() < ops.warmup() {
        return Err(SarimaxError::InsufficientData {
            needed: ops.warmup(),
            got: history_y.len(),
        });
    }
    if history_eps.len() != history_y.len() {
        return Err(SarimaxError::InvalidInput(
            "innovation history must align with the return history".into(),
        ));
    }
    Ok(ops.predict_next(model.intercept, model.beta, history_y, history_eps, x_t))
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Parameter layout used by the optimiser: `[c, (beta), ar.., ma.., sar.., sma..]`.
struct Layout {
    order: SarimaxOrder,
    has_beta: bool,
}

impl Layout {
    fn dim(&self) -> usize {
        let o = &self.order;
        1 + usize::from(self.has_beta) + o.p + o.q + o.seasonal_p + o.seasonal_q
    }

    #[allow(clippy::type_complexity)]
    fn split<'v>(&self, v: &'v [f64]) -> (f64, f64, &'v [f64], &'v [f64], &'v [f64], &'v [f64]) {
        let o = &self.order;
        let mut at = 1;
        let beta = if self.has_beta {
            at += 1;
            v[1]
        } else {
            0.0
        };
        let ar = &v[at..at + o.p];
        at += o.p;
        let ma = &v[at..at + o.q];
        at += o.q;
        let sar = &v[at..at + o.seasonal_p];
        at += o.seasonal_p;
        let sma = &v[at..at + o.seasonal_q];
        (v[0], beta, ar, ma, sar, sma)
    }
}

/// Fits one order by CSS over `segments`.
///
/// `warm_start`, when given, must have the same order; the search then starts
/// from its coefficients with a smaller initial simplex instead of the three
/// standard starts.
pub fn fit_segments(
    segments: &[Segment<'_>],
    order: SarimaxOrder,
    warm_start: Option<&SarimaxModel>,
) -> Result<SarimaxModel, SarimaxError> {
    if order.s != SEASONAL_PERIOD {
        return Err(SarimaxError::InvalidInput(format!(
            "seasonal period must be {SEASONAL_PERIOD}"
        )));
    }
    for s in segments {
        if s.y.len() != s.x.len() {
            return Err(SarimaxError::InvalidInput("segment y/x length mismatch".into()));
        }
        if s.y.iter().chain(s.x).any(|v| !v.is_finite()) {
            return Err(SarimaxError::InvalidInput("non-finite value in segment".into()));
        }
    }
    let scale_y = rms(segments.iter().flat_map(|s| s.y.iter().copied()));
    if !(scale_y > 0.0) {
        return Err(SarimaxError::Degenerate("all returns are zero".into()));
    }
    let scale_x = rms(segments.iter().flat_map(|s| s.x.iter().copied()));
    let layout = Layout {
        order,
        has_beta: scale_x > 0.0,
    };

    let warm = order.max_lag();
    let n_eff: usize = segments.iter().map(|s| s.y.len().saturating_sub(warm)).sum();
    let n_params = layout.dim();
    if n_eff < n_params + 1 {
        return Err(SarimaxError::InsufficientData {
            needed: n_params + 1,
            got: n_eff,
        });
    }
    let longest = segments.iter().map(|s| s.y.len()).max().unwrap_or(0);
    // The highest MA lag must be able to see a nonzero innovation somewhere.
    let top_ma_lag = order.q.max(order.s * order.seasonal_q);
    if order.q + order.seasonal_q > 0 && longest <= warm + top_ma_lag {
        return Err(SarimaxError::Unidentifiable(format!(
            "MA lag {top_ma_lag} never reaches an innovation in segments of length {longest}"
        )));
    }

    let scaled: Vec<(Vec<f64>, Vec<f64>)> = segments
        .iter()
        .map(|s| {
            let sx = if layout.has_beta { scale_x } else { 1.0 };
            (
                s.y.iter().map(|v| v / scale_y).collect(),
                s.x.iter().map(|v| v / sx).collect(),
            )
        })
        .collect();

    let mut eps = Vec::new();
    let objective = |v: &[f64]| -> f64 {
        let (c, beta, ar, ma, sar, sma) = layout.split(v);
        let ops = Operators::new(&order, ar, ma, sar, sma);
        let mut sse = 0.0;
        for (y, x) in &scaled {
            ops.innovations(c, beta, y, x, &mut eps);
            sse += eps.iter().skip(warm).map(|e| e * e).sum::<f64>();
        }
        sse / n_eff as f64
    };

    let nm = NelderMead::default();
    let best = match warm_start {
        Some(m) if m.order == order => {
            let mut start = vec![m.intercept / scale_y];
            if layout.has_beta {
                start.push(m.beta * scale_x / scale_y);
            }
            start.extend(m.ar.iter().chain(&m.ma).chain(&m.seasonal_ar).chain(&m.seasonal_ma));
            nm.with_step(0.02).minimize(objective, &start)
        }
        _ => nm.minimize_multi(objective, &standard_starts(n_params)),
    };

    let (c, beta, ar, ma, sar, sma) = layout.split(&best.x);
    let sigma2 = best.f * scale_y * scale_y;
    let n = n_eff as f64;
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let model = SarimaxModel {
        order,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        seasonal_ar: sar.to_vec(),
        seasonal_ma: sma.to_vec(),
        beta: if layout.has_beta {
            beta * scale_y / scale_x
        } else {
            0.0
        },
        intercept: c * scale_y,
        sigma2,
        aic: -2.0 * loglik + 2.0 * n_params as f64,
    };
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(SarimaxError::Degenerate("zero residual variance".into()));
    }
    let stable = is_stationary(&model.ar)
        && is_stationary(&model.seasonal_ar)
        && is_invertible(&model.ma)
        && is_invertible(&model.seasonal_ma);
    if !best.converged || !stable {
        return Err(SarimaxError::NonConvergence {
            best: Box::new(model),
        });
    }
    Ok(model)
}

/// Fits `order` on the full 7-day windows, each window a separate segment.
pub fn fit_sarimax(windows: &[AnomalyWindow], order: SarimaxOrder) -> Result<SarimaxModel, SarimaxError> {
    if windows.len() < MIN_TRAINING_WINDOWS {
        return Err(SarimaxError::InsufficientData {
            needed: MIN_TRAINING_WINDOWS,
            got: windows.len(),
        });
    }
    let segments: Vec<Segment<'_>> = windows.iter().map(Segment::from_window).collect();
    fit_segments(&segments, order, None)
}

/// Bounds of the order search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SarimaxGrid {
    pub max_nonseasonal_sum: usize,
    pub max_seasonal_sum: usize,
}

impl Default for SarimaxGrid {
    fn default() -> Self {
        Self {
            max_nonseasonal_sum: 3,
            max_seasonal_sum: 2,
        }
    }
}

fn triples(max_sum: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=max_sum {
        for d in 0..=total {
            for p in 0..=total - d {
                out.push((p, d, total - d - p));
            }
        }
    }
    out
}

impl SarimaxGrid {
    pub fn candidates(&self) -> Vec<SarimaxOrder> {
        let seasonal = triples(self.max_seasonal_sum);
        triples(self.max_nonseasonal_sum)
            .into_iter()
            .flat_map(|(p, d, q)| {
                seasonal
                    .iter()
                    .map(move |&(sp, sd, sq)| SarimaxOrder::new(p, d, q, sp, sd, sq))
            })
            .collect()
    }
}

/// Minimum-AIC converged fit over the grid. Candidates that cannot be fitted
/// (too few observations after differencing, unidentifiable lags,
/// non-convergence) are skipped.
pub fn auto_fit_segments(
    segments: &[Segment<'_>],
    grid: SarimaxGrid,
) -> Result<SarimaxModel, SarimaxError> {
    let mut best: Option<SarimaxModel> = None;
    let mut failures = Vec::new();
    for order in grid.candidates() {
        match fit_segments(segments, order, None) {
            Ok(m) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        m.aic < b.aic || (m.aic == b.aic && m.order.tie_key() < b.order.tie_key())
                    }
                };
                if better {
                    best = Some(m);
                }
            }
            Err(SarimaxError::Degenerate(msg)) => return Err(SarimaxError::Degenerate(msg)),
            Err(e) => failures.push((order, e.to_string())),
        }
    }
    best.ok_or(SarimaxError::NoCandidate(failures))
}

pub fn auto_fit_sarimax(windows: &[AnomalyWindow], grid: SarimaxGrid) -> Result<SarimaxModel, SarimaxError> {
    if windows.len() < MIN_TRAINING_WINDOWS {
        return Err(SarimaxError::InsufficientData {
            needed: MIN_TRAINING_WINDOWS,
            got: windows.len(),
        });
    }
    let segments: Vec<Segment<'_>> = windows.iter().map(Segment::from_window).collect();
    auto_fit_segments(&segments, grid)
}

pub fn select_sarimax_order(
    windows: &[AnomalyWindow],
    grid: SarimaxGrid,
) -> Result<SarimaxOrder, SarimaxError> {
    auto_fit_sarimax(windows, grid).map(|m| m.order)
}

/// Forecasts the three days after the conditioning days.
///
/// Innovations over the observed days are rebuilt from a zero state; future
/// innovations are zero. `future_exog` is only read under [`ExogPolicy::Oracle`].
pub fn forecast_window(
    model: &SarimaxModel,
    returns: &[f64; CONTEXT_LEN],
    sentiments: &[f64; CONTEXT_LEN],
    policy: ExogPolicy,
    future_exog: Option<&[f64; HORIZON]>,
) -> Result<[f64; HORIZON], SarimaxError> {
    let ops = model.operators();
    if ops.warmup() > CONTEXT_LEN {
        return Err(SarimaxError::InsufficientData {
            needed: ops.warmup(),
            got: CONTEXT_LEN,
        });
    }
    let future_x: [f64; HORIZON] = match policy {
        ExogPolicy::Zero => [0.0; HORIZON],
        ExogPolicy::HoldLast => [sentiments[CONTEXT_LEN - 1]; HORIZON],
        ExogPolicy::Oracle => *future_exog.ok_or_else(|| {
            SarimaxError::InvalidInput("oracle policy needs the realised future sentiment".into())
        })?,
    };
    let mut y = returns.to_vec();
    let mut eps = Vec::new();
    ops.innovations(model.intercept, model.beta, returns, sentiments, &mut eps);
    let mut out = [0.0; HORIZON];
    for (k, x_t) in future_x.into_iter().enumerate() {
        let next = ops.predict_next(model.intercept, model.beta, &y, &eps, x_t);
        y.push(next);
        eps.push(0.0);
        out[k] = next;
    }
    Ok(out)
}
