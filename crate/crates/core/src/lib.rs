//! A priori power analysis for subgroup analyses.
//!
//! Subgroup effect size is the distance between subgroup centroids in
//! standardised space. It accumulates over measured features, so the number
//! of features matters as much as the sample size. This crate provides:
//!
//! * closed-form effect-size arithmetic ([`effect_size`]),
//! * seeded synthetic data generation ([`datagen`]),
//! * PCA and MDS embeddings ([`reduce`]),
//! * six subgroup analyses ([`cluster`]),
//! * silhouette / Bayes-factor evaluation ([`evaluate`]),
//! * Monte-Carlo power estimation and sample-size search ([`power`]),
//! * CSV/JSON persistence ([`io`]).

pub mod cluster;
pub mod datagen;
pub mod effect_size;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod power;
pub mod reduce;
pub mod rng;

pub use error::{Error, Result};

/// Row-observation matrix type used throughout the crate (N rows, p columns).
pub type Matrix = nalgebra::DMatrix<f64>;
