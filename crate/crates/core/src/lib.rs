//! Daily ETF price and financial-news sentiment forecasting.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`ingestion`]: price and news source clients, raw stores, sector map
//! - [`sentiment`]: constrained article scoring, sector linking, daily
//!   aggregation, price/sentiment panels and coverage
//! - [`features`]: delta series, windows, lagged matrices, labels, scaling
//! - [`models`]: regression (magnitude) and classification (direction)
//!   families behind uniform fit/predict interfaces, plus checkpoints
//! - [`evaluation`]: walk-forward plans, grid search, metrics, two-stage
//!   combination and the sentiment ablation
//! - [`pipeline`]: run configuration, resumable orchestration, reports and
//!   plots

pub mod evaluation;
pub mod features;
pub mod hashing;
pub mod ingestion;
pub mod models;
pub mod pipeline;
pub mod sentiment;
