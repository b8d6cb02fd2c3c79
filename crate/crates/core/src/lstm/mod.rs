//! Sequence forecaster: an LSTM whose cell carries a second, sentiment state.
//!
//! Each step projects `[return, sentiment]` to the input vector, runs the four
//! usual gates on `[x; h]`, and mixes the day's sentiment into `s` through a
//! fifth gate:
//!
//! ```text
//! c = f*c_prev + i*g
//! s = gs*s_prev + (1 - gs)*sentiment
//! h = o * tanh(c + s)
//! ```
//!
//! Four observed days are encoded, then three decode steps each feed back the
//! previous predicted return (the first one feeds the last observed return)
//! with sentiment 0. Gradients are computed by hand through all seven steps.

mod adam;
mod train;

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::series::{CONTEXT_LEN, HORIZON};

pub use adam::{AdamState, TrainConfig};
pub use train::{train, TrainOutcome};

/// Features per day: return and sentiment.
pub const FEATURES: usize = 2;
pub const HIDDEN_SIZE: usize = 8;
pub const INPUT_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmShape {
    pub input_size: usize,
    pub hidden_size: usize,
}

impl Default for LstmShape {
    fn default() -> Self {
        Self {
            input_size: INPUT_SIZE,
            hidden_size: HIDDEN_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gate {
    Input,
    Forget,
    Output,
    Candidate,
    Sentiment,
}

const GATES: [Gate; 5] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate, Gate::Sentiment];

impl Gate {
    fn name(self) -> &'static str {
        match self {
            Gate::Input => "input_gate",
            Gate::Forget => "forget_gate",
            Gate::Output => "output_gate",
            Gate::Candidate => "candidate_gate",
            Gate::Sentiment => "sentiment_gate",
        }
    }
}

impl LstmShape {
    fn concat(&self) -> usize {
        self.input_size + self.hidden_size
    }

    /// Names and shapes of every tensor, in storage order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>)> {
        let (i, h) = (self.input_size, self.hidden_size);
        let mut out = vec![
            ("input_proj.weight".to_owned(), vec![i, FEATURES]),
            ("input_proj.bias".to_owned(), vec![i]),
        ];
        for g in GATES {
            out.push((format!("{}.weight", g.name()), vec![h, self.concat()]));
            out.push((format!("{}.bias", g.name()), vec![h]));
        }
        out.push(("output_head.weight".to_owned(), vec![1, h]));
        out.push(("output_head.bias".to_owned(), vec![1]));
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }

    fn offsets(&self) -> Offsets {
        let (i, h, z) = (self.input_size, self.hidden_size, self.concat());
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let in_w = take(i * FEATURES);
        let in_b = take(i);
        let mut gate_w = [0; 5];
        let mut gate_b = [0; 5];
        for k in 0..5 {
            gate_w[k] = take(h * z);
            gate_b[k] = take(h);
        }
        let out_w = take(h);
        let out_b = take(1);
        Offsets {
            in_w,
            in_b,
            gate_w,
            gate_b,
            out_w,
            out_b,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    in_w: usize,
    in_b: usize,
    gate_w: [usize; 5],
    gate_b: [usize; 5],
    out_w: usize,
    out_b: usize,
}

/// All parameters live in one flat vector, laid out as [`LstmShape::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    shape: LstmShape,
    params: Vec<f64>,
}

/// One cell step's state.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
            s: vec![0.0; hidden],
        }
    }
}

/// Everything a step needs to be differentiated later.
#[derive(Debug, Clone)]
struct StepCache {
    feat: [f64; FEATURES],
    z: Vec<f64>,
    /// Activated gates in [`GATES`] order.
    gates: [Vec<f64>; 5],
    c_prev: Vec<f64>,
    s_prev: Vec<f64>,
    sentiment: f64,
    tanh_u: Vec<f64>,
    out: CellState,
}

#[derive(Debug, Clone)]
struct Trace {
    steps: Vec<StepCache>,
    preds: [f64; HORIZON],
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), LstmError> {
    if expected == got {
        Ok(())
    } else {
        Err(LstmError::LengthMismatch { expected, got })
    }
}

/// Mean absolute error.
pub fn l1_loss(pred: &[f64], actual: &[f64]) -> Result<f64, LstmError> {
    check_len(pred.len(), actual.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

/// Subgradient of |x| with 0 at the kink.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl LstmModel {
    pub fn zeros(shape: LstmShape) -> Self {
        Self {
            shape,
            params: vec![0.0; shape.n_params()],
        }
    }

    /// Uniform in `[-1/sqrt(hidden), 1/sqrt(hidden)]`.
    pub fn init(shape: LstmShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (shape.hidden_size as f64).sqrt();
        let params = (0..shape.n_params())
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self { shape, params }
    }

    pub fn from_params(shape: LstmShape, params: Vec<f64>) -> Result<Self, LstmError> {
        check_len(shape.n_params(), params.len())?;
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> LstmShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable view of one named tensor.
    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let mut at = 0;
        for (n, s) in self.shape.tensors() {
            let len: usize = s.iter().product();
            if n == name {
                return Some(&mut self.params[at..at + len]);
            }
            at += len;
        }
        None
    }

    fn affine(&self, w: usize, b: usize, rows: usize, z: &[f64]) -> Vec<f64> {
        let cols = z.len();
        (0..rows)
            .map(|r| {
                let row = &self.params[w + r * cols..w + (r + 1) * cols];
                self.params[b + r] + row.iter().zip(z).map(|(a, x)| a * x).sum::<f64>()
            })
            .collect()
    }

    fn project(&self, off: &Offsets, feat: &[f64; FEATURES]) -> Vec<f64> {
        self.affine(off.in_w, off.in_b, self.shape.input_size, feat)
    }

    fn step(&self, off: &Offsets, x: &[f64], prev: &CellState, sentiment: f64, feat: [f64; FEATURES]) -> StepCache {
        let hs = self.shape.hidden_size;
        let mut z = Vec::with_capacity(self.shape.concat());
        z.extend_from_slice(x);
        z.extend_from_slice(&prev.h);
        let gates: [Vec<f64>; 5] = std::array::from_fn(|k| {
            let pre = self.affine(off.gate_w[k], off.gate_b[k], hs, &z);
            if GATES[k] == Gate::Candidate {
                pre.into_iter().map(f64::tanh).collect()
            } else {
                pre.into_iter().map(sigmoid).collect()
            }
        });
        let [i, f, o, g, gs] = &gates;
        let c: Vec<f64> = (0..hs).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
        let s: Vec<f64> = (0..hs)
            .map(|k| gs[k] * prev.s[k] + (1.0 - gs[k]) * sentiment)
            .collect();
        let tanh_u: Vec<f64> = (0..hs).map(|k| (c[k] + s[k]).tanh()).collect();
        let h: Vec<f64> = (0..hs).map(|k| o[k] * tanh_u[k]).collect();
        StepCache {
            feat,
            z,
            c_prev: prev.c.clone(),
            s_prev: prev.s.clone(),
            sentiment,
            gates,
            tanh_u,
            out: CellState { h, c, s },
        }
    }

    /// One cell update on an already projected input vector.
    pub fn cell_step(&self, x: &[f64], prev: &CellState, sentiment: f64) -> Result<CellState, LstmError> {
        let hs = self.shape.hidden_size;
        if x.len() != self.shape.input_size || prev.h.len() != hs || prev.c.len() != hs || prev.s.len() != hs {
            return Err(LstmError::Shape(format!(
                "cell expects input {} and state {hs}",
                self.shape.input_size
            )));
        }
        Ok(self.step(&self.shape.offsets(), x, prev, sentiment, [0.0; FEATURES]).out)
    }

    fn head(&self, off: &Offsets, h: &[f64]) -> f64 {
        self.params[off.out_b] + h.iter().zip(&self.params[off.out_w..]).map(|(a, b)| a * b).sum::<f64>()
    }

    fn trace(&self, returns: &[f64], sentiments: &[f64]) -> Result<Trace, LstmError> {
        check_len(CONTEXT_LEN, returns.len())?;
        check_len(CONTEXT_LEN, sentiments.len())?;
        let off = self.shape.offsets();
        let mut state = CellState::zeros(self.shape.hidden_size);
        let mut steps = Vec::with_capacity(CONTEXT_LEN + HORIZON);
        for (r, s) in returns.iter().zip(sentiments) {
            let feat = [*r, *s];
            let cache = self.step(&off, &self.project(&off, &feat), &state, *s, feat);
            state = cache.out.clone();
            steps.push(cache);
        }
        let mut preds = [0.0; HORIZON];
        let mut fed = returns[CONTEXT_LEN - 1];
        for p in preds.iter_mut() {
            let feat = [fed, 0.0];
            let cache = self.step(&off, &self.project(&off, &feat), &state, 0.0, feat);
            *p = self.head(&off, &cache.out.h);
            fed = *p;
            state = cache.out.clone();
            steps.push(cache);
        }
        Ok(Trace { steps, preds })
    }

    /// Predicted returns for the three days after four observed days.
    pub fn forward(&self, returns: &[f64], sentiments: &[f64]) -> Result<[f64; HORIZON], LstmError> {
        Ok(self.trace(returns, sentiments)?.preds)
    }

    /// L1 loss of one window and its gradient with respect to every parameter.
    pub fn backward(
        &self,
        returns: &[f64],
        sentiments: &[f64],
        actual: &[f64],
    ) -> Result<(f64, Vec<f64>), LstmError> {
        check_len(HORIZON, actual.len())?;
        let trace = self.trace(returns, sentiments)?;
        let loss = l1_loss(&trace.preds, actual)?;
        let off = self.shape.offsets();
        let (is, hs) = (self.shape.input_size, self.shape.hidden_size);
        let zs = self.shape.concat();
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];

        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let mut ds_next = vec![0.0; hs];
        // Gradient flowing into the next decode step's fed-back return.
        let mut d_fed = 0.0;
        let n = HORIZON as f64;

        for (t, step) in trace.steps.iter().enumerate().rev() {
            let mut dh = dh_next.clone();
            if let Some(k) = t.checked_sub(CONTEXT_LEN) {
                let dy = sign(trace.preds[k] - actual[k]) / n + d_fed;
                grad[off.out_b] += dy;
                for j in 0..hs {
                    grad[off.out_w + j] += dy * step.out.h[j];
                    dh[j] += dy * p[off.out_w + j];
                }
            }
            let [i, f, o, g, gs] = &step.gates;
            let mut pre: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; hs]);
            for j in 0..hs {
                let tu = step.tanh_u[j];
                let du = dh[j] * o[j] * (1.0 - tu * tu);
                let dc = du + dc_next[j];
                let ds = du + ds_next[j];
                pre[0][j] = dc * g[j] * i[j] * (1.0 - i[j]);
                pre[1][j] = dc * step.c_prev[j] * f[j] * (1.0 - f[j]);
                pre[2][j] = dh[j] * tu * o[j] * (1.0 - o[j]);
                pre[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
                pre[4][j] = ds * (step.s_prev[j] - step.sentiment) * gs[j] * (1.0 - gs[j]);
                dc_next[j] = dc * f[j];
                ds_next[j] = ds * gs[j];
            }
            let mut dz = vec![0.0; zs];
            for (k, d) in pre.iter().enumerate() {
                for r in 0..hs {
                    if d[r] == 0.0 {
                        continue;
                    }
                    grad[off.gate_b[k] + r] += d[r];
                    let w = off.gate_w[k] + r * zs;
                    for c in 0..zs {
                        grad[w + c] += d[r] * step.z[c];
                        dz[c] += d[r] * p[w + c];
                    }
                }
            }
            dh_next = dz[is..].to_vec();
            let dx = &dz[..is];
            let mut d_feat = [0.0; FEATURES];
            for r in 0..is {
                grad[off.in_b + r] += dx[r];
                for c in 0..FEATURES {
                    grad[off.in_w + r * FEATURES + c] += dx[r] * step.feat[c];
                    d_feat[c] += dx[r] * p[off.in_w + r * FEATURES + c];
                }
            }
            // Decode steps after the first were fed the previous prediction.
            d_fed = if t > CONTEXT_LEN { d_feat[0] } else { 0.0 };
        }
        Ok((loss, grad))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorDoc {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LstmDoc {
    config: LstmShape,
    tensors: Vec<TensorDoc>,
}

impl Serialize for LstmModel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut at = 0;
        let tensors = self
            .shape
            .tensors()
            .into_iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let data = self.params[at..at + len].to_vec();
                at += len;
                TensorDoc { name, shape, data }
            })
            .collect();
        LstmDoc {
            config: self.shape,
            tensors,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LstmModel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = LstmDoc::deserialize(de)?;
        let expected = doc.config.tensors();
        if expected.len() != doc.tensors.len() {
            return Err(D::Error::custom("unexpected tensor count"));
        }
        let mut params = Vec::with_capacity(doc.config.n_params());
        for ((name, shape), t) in expected.iter().zip(&doc.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(D::Error::custom(format!("tensor {} does not match the config", t.name)));
            }
            params.extend_from_slice(&t.data);
        }
        Ok(Self {
            shape: doc.config,
            params,
        })
    }
}
