use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdamState, LstmError, LstmModel, TrainConfig};
use crate::series::AnomalyWindow;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LstmModel,
    /// Mean per-window loss of each epoch, measured before each update.
    pub loss_trace: Vec<f64>,
}

/// Per-window Adam training in a seeded shuffled order each epoch.
pub fn train(model: LstmModel, windows: &[AnomalyWindow], cfg: &TrainConfig) -> Result<TrainOutcome, LstmError> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(LstmError::LengthMismatch { expected: 1, got: 0 });
    }
    let mut model = model;
    let mut adam = AdamState::new(model.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let w = &windows[i];
            let (loss, grad) =
                model.backward(&w.context_returns(), &w.context_sentiments(), &w.target_returns())?;
            if !loss.is_finite() {
                return Err(LstmError::NonFinite(format!(
                    "loss at epoch {epoch}, window {i}; trace so far {loss_trace:?}"
                )));
            }
            total += loss;
            adam.update(model.params_mut(), &grad, cfg)?;
        }
        loss_trace.push(total / windows.len() as f64);
    }
    Ok(TrainOutcome { model, loss_trace })
}
