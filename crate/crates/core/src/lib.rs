//! Smoothing-graphon models for exchangeable relational data.
//!
//! A binary directed relation matrix is modelled through a graphon: each node
//! carries a pair of latent unit-interval coordinates, and an intensity
//! function on the unit square maps coordinate pairs to edge probabilities.
//! Four model families are provided:
//!
//! - `sbm`  — piecewise-constant graphon (regular-grid stochastic block model)
//! - `isg`  — integrated smoothing graphon: every block contributes to every
//!   relation through Laplace-kernel weights, giving a continuous intensity
//! - `lfsg` — latent-feature smoothing graphon: pairwise hidden labels
//!   decompose the ISG intensity and restore conjugate block updates
//! - `mmsb` — mixed-membership stochastic blockmodel baseline
//!
//! The crate covers data ingestion and row-wise train/test splitting, the
//! weight and intensity mathematics, synthetic generation, MCMC posterior
//! samplers, link-prediction metrics, and grid export for visualisation.
//! The `smoothgraph` binary ties these together into reproducible runs.

pub mod cli;
pub mod error;
pub mod graphon;
pub mod inference;
pub mod metrics;
pub mod models;
pub mod relational;
pub mod rng;

pub use error::{Error, Result};
