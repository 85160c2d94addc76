use serde::{Deserialize, Serialize};

use crate::effect_size::{expected_delta, interpret_delta, min_features, Rounding};
use crate::error::Result;

/// Expected separation k-means needs to be well powered.
pub const KMEANS_DELTA: f64 = 4.0;
/// Expected separation fuzzy c-means and Gaussian mixtures need.
pub const SOFT_DELTA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuidelineStatus {
    Pass,
    /// Exactly at the threshold, which is not enough.
    Borderline,
    Fail,
}

impl GuidelineStatus {
    fn against(delta_hat: f64, threshold: f64) -> Self {
        if (delta_hat - threshold).abs() <= 1e-9 * threshold {
            GuidelineStatus::Borderline
        } else if delta_hat > threshold {
            GuidelineStatus::Pass
        } else {
            GuidelineStatus::Fail
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            GuidelineStatus::Pass => "pass",
            GuidelineStatus::Borderline => "borderline",
            GuidelineStatus::Fail => "fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub p: usize,
    pub lambda: f64,
    pub delta_hat: f64,
    pub interpretation: &'static str,
    pub kmeans: GuidelineStatus,
    pub cmeans_gmm: GuidelineStatus,
    /// Features needed for each guideline at this `lambda`.
    pub features_for_kmeans: usize,
    pub features_for_cmeans_gmm: usize,
    pub verdict: String,
}

/// Checks whether `p` available features at effect rate `lambda` give
/// enough expected separation for cluster analysis.
pub fn sensitivity(p: usize, lambda: f64) -> Result<SensitivityReport> {
    let delta_hat = expected_delta(p, lambda)?;
    let kmeans = GuidelineStatus::against(delta_hat, KMEANS_DELTA);
    let cmeans_gmm = GuidelineStatus::against(delta_hat, SOFT_DELTA);
    let verdict = match (kmeans, cmeans_gmm) {
        (GuidelineStatus::Pass, _) => {
            "sufficient separation for k-means, c-means and GMM".to_string()
        }
        (k, GuidelineStatus::Pass) => {
            format!("sufficient separation for c-means and GMM; k-means {} (needs more than {KMEANS_DELTA})", k.label())
        }
        _ => "subgroup analysis might not be a suitable approach".to_string(),
    };
    Ok(SensitivityReport {
        p,
        lambda,
        delta_hat,
        interpretation: interpret_delta(delta_hat),
        kmeans,
        cmeans_gmm,
        features_for_kmeans: min_features(KMEANS_DELTA, lambda, Rounding::Ceil)?,
        features_for_cmeans_gmm: min_features(SOFT_DELTA, lambda, Rounding::Ceil)?,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_four_is_borderline_for_kmeans() {
        let r = sensitivity(36, 1.5).unwrap();
        assert!((r.delta_hat - 4.0).abs() < 1e-12);
        assert_eq!(r.kmeans, GuidelineStatus::Borderline);
        assert_eq!(r.cmeans_gmm, GuidelineStatus::Pass);
        assert!(r.verdict.contains("borderline"));
    }

    #[test]
    fn weak_effects_fail_both() {
        let r = sensitivity(9, 3.0).unwrap();
        assert!((r.delta_hat - 1.0).abs() < 1e-12);
        assert_eq!(r.kmeans, GuidelineStatus::Fail);
        assert_eq!(r.cmeans_gmm, GuidelineStatus::Fail);
        assert!(r.verdict.contains("might not be a suitable approach"));
    }

    #[test]
    fn strong_effects_pass_both() {
        let r = sensitivity(100, 1.5).unwrap();
        assert_eq!(
            (r.kmeans, r.cmeans_gmm),
            (GuidelineStatus::Pass, GuidelineStatus::Pass)
        );
        assert_eq!(r.features_for_kmeans, 36);
        assert_eq!(r.features_for_cmeans_gmm, 21);
    }

    #[test]
    fn invalid_inputs() {
        assert!(sensitivity(0, 1.0).is_err());
        assert!(sensitivity(10, 0.0).is_err());
    }
}
