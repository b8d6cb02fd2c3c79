//! Forecasting stock returns around anomalous trading days.
//!
//! Outlier days are found from studentized one-step ARIMA residuals, the
//! seven trading days around each one form an anomaly window, and two model
//! families (SARIMAX with a sentiment regressor, and an LSTM with a sentiment
//! cell) predict the last three days of a window from its first four.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arima;
pub mod error;
pub mod io;
pub mod lagpoly;
pub mod lstm;
pub mod optim;
pub mod pipeline;
pub mod outlier;
pub mod sample;
pub mod sarimax;
pub mod sentiment;
pub mod series;

pub use error::{Error, Result};
