//! Homogeneously saturated asset-price model with heavy-tailed noise.
//!
//! The terminal price `S` for an accumulated input `x = αt + W(t)` solves
//! `β·S + ln S = β·S₀ + ln S₀ + x`; `β = 0` recovers geometric motion
//! `S = S₀·eˣ`. Around that solver the crate provides:
//!
//! * [`distributions`]: normal, Student's t and truncated Student's t noise.
//! * [`market_data`]: price series ingestion, per-mille linear returns,
//!   descriptive statistics and adaptive histograms.
//! * [`fitting`]: maximum-likelihood fits of t and normal distributions.
//! * [`montecarlo`]: input-scale calibration and terminal-price simulation.
//! * [`pricing`]: European calls by quantile quadrature, Black-Scholes,
//!   historical returns and truncated log-t quadrature.
//! * [`convolution`]: n-fold self-convolution of gridded densities.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod convolution;
pub mod distributions;
pub mod error;
pub mod fitting;
pub mod market_data;
pub mod montecarlo;
pub mod optimize;
pub mod presets;
pub mod pricing;
pub mod quadrature;
pub mod saturated_model;
pub mod stats;

pub use error::{Error, Result};
