//! Solution evaluation and the single-group-null decision.
//!
//! Distance-based and continuous mixture solutions are scored by (fuzzy)
//! silhouette in the space the clustering ran in; binary mixtures compare a
//! one-class and a two-class model through a BIC-derived Bayes factor.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cluster::harden;
use crate::error::{domain, Error, Result};
use crate::Matrix;

/// Per-observation silhouette values. Singleton clusters score 0.
pub fn silhouette_samples(data: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    let n = data.nrows();
    if labels.len() != n {
        return Err(domain(format!(
            "{} labels for {n} observations",
            labels.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let points: Vec<Vec<f64>> = data
        .row_iter()
        .map(|r| r.iter().copied().collect())
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                let d = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                sums[labels[j]] += d;
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        out.push(if m > 0.0 { (b - a) / m } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette over all observations (Euclidean distances).
pub fn silhouette(data: &Matrix, labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(data, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Fuzzy silhouette: crisp silhouettes of the hardened partition, weighted
/// by `(top membership - second membership)^alpha`.
pub fn fuzzy_silhouette(data: &Matrix, memberships: &Matrix, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if memberships.nrows() != data.nrows() {
        return Err(domain("membership rows do not match observations"));
    }
    let labels = harden(memberships);
    let s = silhouette_samples(data, &labels)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, si) in memberships.row_iter().zip(&s) {
        let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &u in row.iter() {
            if u > top {
                second = top;
                top = u;
            } else if u > second {
                second = u;
            }
        }
        let w = (top - second.max(0.0)).max(0.0).powf(alpha);
        num += w * si;
        den += w;
    }
    if den == 0.0 {
        warn!("fuzzy silhouette: all membership margins are zero");
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Bayesian information criterion, `-2 logL + params ln(n)`.
pub fn bic(log_likelihood: f64, n_params: usize, n_obs: usize) -> Result<f64> {
    if n_obs == 0 {
        return Err(domain("BIC needs at least one observation"));
    }
    Ok(-2.0 * log_likelihood + n_params as f64 * (n_obs as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub value: f64,
    /// The exact value over- or underflowed and was clamped.
    pub clamped: bool,
}

/// Evidence for the alternative over the null, `exp((BIC_null - BIC_alt)/2)`.
pub fn bayes_factor(bic_null: f64, bic_alt: f64) -> Result<BayesFactor> {
    if !(bic_null.is_finite() && bic_alt.is_finite()) {
        return Err(domain("BIC values must be finite"));
    }
    let v = ((bic_null - bic_alt) / 2.0).exp();
    Ok(if v.is_infinite() {
        BayesFactor {
            value: f64::MAX,
            clamped: true,
        }
    } else if v == 0.0 {
        BayesFactor {
            value: f64::MIN_POSITIVE,
            clamped: true,
        }
    } else {
        BayesFactor {
            value: v,
            clamped: false,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecisionRule {
    /// Reject the null when the score is at least the threshold.
    SilhouetteThreshold(f64),
    /// Reject the null when the Bayes factor is strictly above the threshold.
    BayesFactorThreshold(f64),
}

impl DecisionRule {
    pub const SILHOUETTE: DecisionRule = DecisionRule::SilhouetteThreshold(0.5);
    pub const BAYES_FACTOR: DecisionRule = DecisionRule::BayesFactorThreshold(3.0);
}

/// Scores gathered for one solution before a decision is made.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub silhouette: Option<f64>,
    pub fuzzy_silhouette: Option<f64>,
    pub bic_null: Option<f64>,
    pub bic_alt: Option<f64>,
    pub bayes_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub silhouette: Option<f64>,
    pub fuzzy_silhouette: Option<f64>,
    pub bic_null: Option<f64>,
    pub bic_alt: Option<f64>,
    pub bayes_factor: Option<f64>,
    pub rejected_null: bool,
    pub rule: DecisionRule,
}

impl EvaluationResult {
    /// The score the rule was applied to.
    pub fn decisive_score(&self) -> Option<f64> {
        match self.rule {
            DecisionRule::SilhouetteThreshold(_) => self.fuzzy_silhouette.or(self.silhouette),
            DecisionRule::BayesFactorThreshold(_) => self.bayes_factor,
        }
    }
}

/// Applies `rule`. The silhouette rule uses the fuzzy silhouette when one is
/// present and the crisp silhouette otherwise.
pub fn decide(metrics: Metrics, rule: DecisionRule) -> Result<EvaluationResult> {
    let rejected_null = match rule {
        DecisionRule::SilhouetteThreshold(t) => {
            let s = metrics
                .fuzzy_silhouette
                .or(metrics.silhouette)
                .ok_or(Error::MissingMetric("silhouette"))?;
            s >= t
        }
        DecisionRule::BayesFactorThreshold(t) => {
            let bf = match metrics.bayes_factor {
                Some(bf) => bf,
                None => match (metrics.bic_null, metrics.bic_alt) {
                    (Some(a), Some(b)) => bayes_factor(a, b)?.value,
                    _ => return Err(Error::MissingMetric("bayes factor")),
                },
            };
            bf > t
        }
    };
    let bayes_factor = match (metrics.bayes_factor, metrics.bic_null, metrics.bic_alt) {
        (Some(bf), _, _) => Some(bf),
        (None, Some(a), Some(b)) => Some(bayes_factor(a, b)?.value),
        _ => None,
    };
    Ok(EvaluationResult {
        silhouette: metrics.silhouette,
        fuzzy_silhouette: metrics.fuzzy_silhouette,
        bic_null: metrics.bic_null,
        bic_alt: metrics.bic_alt,
        bayes_factor,
        rejected_null,
        rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Textbook double loop, written independently of `silhouette_samples`.
    fn naive_silhouette(data: &Matrix, labels: &[usize]) -> f64 {
        let n = data.nrows();
        let dist = |i: usize, j: usize| (data.row(i) - data.row(j)).norm();
        let clusters: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        let mut total = 0.0;
        for i in 0..n {
            let same: Vec<usize> = (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .collect();
            if same.is_empty() {
                continue;
            }
            let a = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
            let mut b = f64::INFINITY;
            for &c in &clusters {
                if c == labels[i] {
                    continue;
                }
                let other: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                b = b.min(other.iter().map(|&j| dist(i, j)).sum::<f64>() / other.len() as f64);
            }
            total += (b - a) / a.max(b);
        }
        total / n as f64
    }

    fn random_instance(n: usize, d: usize, k: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut s = rng::from_seed(seed);
        let data = Matrix::from_fn(n, d, |_, _| s.random::<f64>() * 10.0);
        let mut labels: Vec<usize> = (0..n).map(|_| s.random_range(0..k)).collect();
        labels[0] = 0;
        labels[1] = 1;
        (data, labels)
    }

    #[test]
    fn hand_computed_line() {
        let x = Matrix::from_column_slice(4, 1, &[0.0, 1.0, 5.0, 6.0]);
        let s = silhouette_samples(&x, &[0, 0, 1, 1]).unwrap();
        let expected = [9.0 / 11.0, 7.0 / 9.0, 7.0 / 9.0, 9.0 / 11.0];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean = silhouette(&x, &[0, 0, 1, 1]).unwrap();
        assert!((mean - 0.7980).abs() < 1e-4);
    }

    #[test]
    fn zero_diameter_clusters_score_one() {
        let x = Matrix::from_column_slice(4, 1, &[0.0, 0.0, 10.0, 10.0]);
        assert_eq!(silhouette(&x, &[0, 0, 1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let x = Matrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert!(matches!(
            silhouette(&x, &[0, 0, 0]),
            Err(Error::SingleCluster)
        ));
        assert!(matches!(
            silhouette(&x, &[2, 2, 2]),
            Err(Error::SingleCluster)
        ));
    }

    #[test]
    fn singletons_score_zero() {
        let x = Matrix::from_column_slice(3, 1, &[0.0, 1.0, 9.0]);
        let s = silhouette_samples(&x, &[0, 0, 1]).unwrap();
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn agrees_with_naive_oracle() {
        for seed in 0..200 {
            let n = 3 + (seed as usize % 48);
            let k = 2 + (seed as usize % 4).min(n - 2);
            let (x, labels) = random_instance(n, 1 + seed as usize % 3, k, seed);
            let fast = silhouette(&x, &labels).unwrap();
            let slow = naive_silhouette(&x, &labels);
            assert!((fast - slow).abs() < 1e-12, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn random_labels_score_near_zero() {
        let mut small = 0;
        for seed in 0..100 {
            let mut s = rng::from_seed(5000 + seed);
            let x = Matrix::from_fn(200, 2, |_, _| {
                s.sample::<f64, _>(rand_distr::StandardNormal)
            });
            let labels: Vec<usize> = (0..200).map(|_| s.random_range(0..2)).collect();
            if silhouette(&x, &labels).unwrap().abs() < 0.2 {
                small += 1;
            }
        }
        assert!(small >= 95);
    }

    #[test]
    fn fuzzy_reduces_to_crisp() {
        let (x, labels) = random_instance(20, 2, 3, 1);
        let crisp = silhouette(&x, &labels).unwrap();
        let u = Matrix::from_fn(20, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
        assert_eq!(fuzzy_silhouette(&x, &u, 1.0).unwrap(), crisp);
        let soft = Matrix::from_fn(20, 3, |i, j| if labels[i] == j { 0.5 } else { 0.25 });
        assert!((fuzzy_silhouette(&x, &soft, 0.0).unwrap() - crisp).abs() < 1e-15);
    }

    #[test]
    fn fuzzy_hand_computed() {
        // crisp silhouettes of the hardened line partition are
        // {9/11, 7/9, 7/9, 9/11}; margins are {0.8, 0.2, 0.6, 0.4}
        let x = Matrix::from_column_slice(4, 1, &[0.0, 1.0, 5.0, 6.0]);
        let u = Matrix::from_row_slice(4, 2, &[0.9, 0.1, 0.6, 0.4, 0.2, 0.8, 0.3, 0.7]);
        let s = [9.0 / 11.0, 7.0 / 9.0, 7.0 / 9.0, 9.0 / 11.0];
        let w = [0.8, 0.2, 0.6, 0.4];
        let expected = s.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((fuzzy_silhouette(&x, &u, 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.802_02).abs() < 1e-5);
    }

    #[test]
    fn fuzzy_uniform_memberships_give_zero() {
        // ties between the top two memberships everywhere, yet two hardened
        // clusters so the crisp silhouette is defined
        let x = Matrix::from_column_slice(4, 1, &[0.0, 1.0, 5.0, 6.0]);
        let u = Matrix::from_row_slice(
            4,
            3,
            &[0.4, 0.4, 0.2, 0.4, 0.4, 0.2, 0.2, 0.4, 0.4, 0.2, 0.4, 0.4],
        );
        assert_eq!(fuzzy_silhouette(&x, &u, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bic_values() {
        assert_eq!(bic(0.0, 0, 10).unwrap(), 0.0);
        assert!((bic(-100.0, 5, 100).unwrap() - 223.0259).abs() < 1e-4);
        assert!(bic(0.0, 1, 0).is_err());
    }

    #[test]
    fn bayes_factor_values() {
        assert_eq!(bayes_factor(10.0, 10.0).unwrap().value, 1.0);
        let ln3 = 3f64.ln();
        assert!((bayes_factor(2.0 * ln3, 0.0).unwrap().value - 3.0).abs() < 1e-12);
        assert!((bayes_factor(0.0, 2.0 * ln3).unwrap().value - 1.0 / 3.0).abs() < 1e-12);
        let big = bayes_factor(1e6, 0.0).unwrap();
        assert!(big.clamped && big.value == f64::MAX);
        assert!(bayes_factor(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn decision_boundaries() {
        let at = |s: f64| {
            decide(
                Metrics {
                    silhouette: Some(s),
                    ..Metrics::default()
                },
                DecisionRule::SILHOUETTE,
            )
        };
        assert!(at(0.50).unwrap().rejected_null);
        assert!(!at(0.49).unwrap().rejected_null);
        let bf = |v: f64| {
            decide(
                Metrics {
                    bayes_factor: Some(v),
                    ..Metrics::default()
                },
                DecisionRule::BAYES_FACTOR,
            )
        };
        assert!(!bf(3.0).unwrap().rejected_null);
        assert!(bf(3.0 + 1e-9).unwrap().rejected_null);
        assert!(decide(Metrics::default(), DecisionRule::SILHOUETTE).is_err());
        assert!(decide(Metrics::default(), DecisionRule::BAYES_FACTOR).is_err());
        let from_bics = decide(
            Metrics {
                bic_null: Some(100.0),
                bic_alt: Some(90.0),
                ..Metrics::default()
            },
            DecisionRule::BAYES_FACTOR,
        )
        .unwrap();
        assert!(from_bics.rejected_null);
        assert!((from_bics.bayes_factor.unwrap() - 5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn fuzzy_score_takes_precedence() {
        let r = decide(
            Metrics {
                silhouette: Some(0.9),
                fuzzy_silhouette: Some(0.3),
                ..Metrics::default()
            },
            DecisionRule::SILHOUETTE,
        )
        .unwrap();
        assert!(!r.rejected_null);
        assert_eq!(r.decisive_score(), Some(0.3));
    }

    proptest! {
        #[test]
        fn bounded_and_similarity_invariant(
            seed in 0u64..10_000,
            shift in -50.0f64..50.0,
            scale in 0.01f64..100.0,
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let (x, labels) = random_instance(15, 2, 3, seed);
            let s = silhouette(&x, &labels).unwrap();
            prop_assert!((-1.0..=1.0).contains(&s));
            let (c, sn) = (angle.cos(), angle.sin());
            let y = Matrix::from_fn(15, 2, |i, j| {
                let (a, b) = (x[(i, 0)], x[(i, 1)]);
                let r = if j == 0 { c * a - sn * b } else { sn * a + c * b };
                scale * r + shift
            });
            prop_assert!((silhouette(&y, &labels).unwrap() - s).abs() < 1e-9);
        }

        #[test]
        fn bayes_factor_reciprocity(a in -600f64..600.0, b in -600f64..600.0) {
            let ab = bayes_factor(a, b).unwrap().value;
            let ba = bayes_factor(b, a).unwrap().value;
            prop_assert!((ab * ba - 1.0).abs() < 1e-12);
        }
    }
}
