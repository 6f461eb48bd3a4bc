//! Trading research pipeline built around image-encoded candlestick windows.
//!
//! Minute bars are aggregated into N-minute bars, every 10-bar window becomes
//! a volume-extended candlestick image, HOG descriptors at two scales feed a
//! deep fuzzy self-organizing map that clusters fluctuation patterns, one GRU
//! per cluster predicts the next close, and a threshold rule with flat fees
//! turns the predictions into a walk-forward backtest.
//!
//! Modules follow that flow: [`market_data`] -> [`chart`] -> [`hog`] ->
//! [`fsom`]/[`dfsom`] -> [`gru`] -> [`trading`], orchestrated by
//! [`pipeline`]. [`synth`] generates deterministic sample data.

pub mod chart;
pub mod dfsom;
pub mod fsom;
pub mod gru;
pub mod hog;
pub mod market_data;
pub mod matrix;
pub mod pipeline;
pub mod synth;
pub mod trading;

pub use matrix::Matrix;
