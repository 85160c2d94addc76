//! Closed-form effect-size arithmetic.
//!
//! Per-feature effects are standardised mean differences (Cohen's d). Their
//! population across features is modelled as exponential with rate `lambda`,
//! and the subgroup effect size is the Euclidean distance between the two
//! subgroup centroids.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Named effect-size environments and the exponential rate that models each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EffectContext {
    /// Many substantial effects expected, e.g. entirely different species.
    WildlyOptimistic,
    /// Effect sizes as published in psychology journals.
    PublishedPsychology,
    /// No effects up to very large effects.
    UpToVeryLarge,
    /// No effects up to large effects.
    UpToLarge,
    /// No effects up to medium effects.
    UpToMedium,
    Custom(f64),
}

impl EffectContext {
    pub const NAMED: [EffectContext; 5] = [
        EffectContext::WildlyOptimistic,
        EffectContext::PublishedPsychology,
        EffectContext::UpToVeryLarge,
        EffectContext::UpToLarge,
        EffectContext::UpToMedium,
    ];

    /// Builds a custom context, rejecting non-positive rates.
    pub fn custom(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(EffectContext::Custom(lambda))
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            EffectContext::WildlyOptimistic => 0.75,
            EffectContext::PublishedPsychology => 1.5,
            EffectContext::UpToVeryLarge => 3.0,
            EffectContext::UpToLarge => 6.0,
            EffectContext::UpToMedium => 12.0,
            EffectContext::Custom(l) => l,
        }
    }

    /// Returns the named context whose rate equals `lambda`, or `Custom`.
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self::NAMED
            .iter()
            .copied()
            .find(|c| c.lambda() == lambda)
            .unwrap_or(EffectContext::Custom(lambda)))
    }

    pub fn label(&self) -> &'static str {
        match self {
            EffectContext::WildlyOptimistic => "wildly optimistic",
            EffectContext::PublishedPsychology => "published in psychology",
            EffectContext::UpToVeryLarge => "no to very large effects",
            EffectContext::UpToLarge => "no to large effects",
            EffectContext::UpToMedium => "no to medium effects",
            EffectContext::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for EffectContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (lambda={})", self.label(), self.lambda())
    }
}

/// Per-feature effect magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectVector(Vec<f64>);

impl EffectVector {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::NoFeatures);
        }
        if let Some(bad) = deltas.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(domain(format!(
                "effect sizes must be finite and >= 0, got {bad}"
            )));
        }
        Ok(EffectVector(deltas))
    }

    /// `p` copies of the same effect.
    pub fn uniform(p: usize, delta: f64) -> Result<Self> {
        Self::new(vec![delta; p])
    }

    pub fn zeros(p: usize) -> Result<Self> {
        Self::uniform(p, 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Centroid distance implied by these effects.
    pub fn centroid_distance(&self) -> f64 {
        norm(&self.0)
    }
}

/// Estimated subgroup effect size for `p` features under rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeEstimate {
    pub delta_hat: f64,
    pub p: usize,
    pub lambda: f64,
}

impl EffectSizeEstimate {
    pub fn new(p: usize, lambda: f64) -> Result<Self> {
        Ok(EffectSizeEstimate {
            delta_hat: expected_delta(p, lambda)?,
            p,
            lambda,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Rounding {
    #[default]
    Nearest,
    Ceil,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )))
    }
}

fn norm(xs: &[f64]) -> f64 {
    // scaled to avoid overflow for very large effects
    let scale = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * xs.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean distance between subgroup centroids given per-feature effects.
pub fn centroid_distance(deltas: &[f64]) -> Result<f64> {
    if deltas.is_empty() {
        return Err(Error::NoFeatures);
    }
    Ok(norm(deltas))
}

/// Expected centroid distance when every feature contributes the mean
/// effect `1/lambda`: `sqrt(p) / lambda`.
pub fn expected_delta(p: usize, lambda: f64) -> Result<f64> {
    if p == 0 {
        return Err(domain("p must be at least 1"));
    }
    check_lambda(lambda)?;
    Ok((p as f64).sqrt() / lambda)
}

/// Number of features needed to reach centroid distance `delta_target`.
pub fn min_features(delta_target: f64, lambda: f64, rounding: Rounding) -> Result<usize> {
    if !(delta_target.is_finite() && delta_target > 0.0) {
        return Err(domain(format!(
            "target delta must be positive, got {delta_target}"
        )));
    }
    check_lambda(lambda)?;
    let exact = (delta_target * lambda).powi(2);
    let p = match rounding {
        Rounding::Nearest => exact.round(),
        Rounding::Ceil => snap_ceil(exact),
    };
    Ok((p as usize).max(1))
}

/// Ceiling that ignores floating-point dust just above an integer.
fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Exponential density of per-feature effect sizes.
pub fn effect_density(delta: f64, lambda: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(domain(format!("effect size must be >= 0, got {delta}")));
    }
    check_lambda(lambda)?;
    Ok(lambda * (-lambda * delta).exp())
}

/// Mean per-feature effect size, `1/lambda`.
pub fn mean_effect(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(1.0 / lambda)
}

/// Rate of an exponential with the given mean. Not snapped to a named context.
pub fn lambda_from_mean(mean_delta: f64) -> Result<f64> {
    if !(mean_delta.is_finite() && mean_delta > 0.0) {
        return Err(domain(format!(
            "mean effect must be positive, got {mean_delta}"
        )));
    }
    Ok(1.0 / mean_delta)
}

/// Conventional magnitude labels, lower bounds inclusive.
const LABELS: [(f64, &str); 6] = [
    (2.0, "huge"),
    (1.2, "very large"),
    (0.8, "large"),
    (0.5, "medium"),
    (0.2, "small"),
    (0.01, "very small"),
];

/// Verbal label for a standardised difference.
pub fn interpret_delta(delta: f64) -> &'static str {
    LABELS
        .iter()
        .find(|(t, _)| delta >= *t)
        .map(|(_, l)| *l)
        .unwrap_or("negligible")
}

/// Older rules of thumb for total sample size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegacySampleRules {
    /// 70 observations per feature.
    pub dolnicar: u64,
    /// 2^p observations.
    pub formann: BigUint,
}

pub fn legacy_sample_rules(p: u32) -> Result<LegacySampleRules> {
    if p == 0 {
        return Err(domain("p must be at least 1"));
    }
    Ok(LegacySampleRules {
        dolnicar: 70 * u64::from(p),
        formann: BigUint::from(1u8) << p,
    })
}

/// Total sample size so that the smallest subgroup still has `n_per_group`.
pub fn total_sample(n_per_group: u64, proportions: &[f64]) -> Result<u64> {
    if n_per_group == 0 {
        return Err(domain("n per group must be at least 1"));
    }
    if proportions.is_empty() {
        return Err(Error::InvalidProportions("empty".into()));
    }
    if let Some(bad) = proportions.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
        return Err(Error::InvalidProportions(format!("{bad} is not positive")));
    }
    let sum: f64 = proportions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProportions(format!("sum to {sum}, not 1")));
    }
    let smallest = proportions.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(snap_ceil(n_per_group as f64 / smallest) as u64)
}
