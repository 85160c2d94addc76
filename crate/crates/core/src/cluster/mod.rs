//! Subgroup analyses.
//!
//! Distance-based: [`kmeans`], [`ward`], [`cmeans`]. Model-based:
//! [`gmm`] (full covariances), [`lpa`] (diagonal covariances) and [`lca`]
//! (Bernoulli mixture on binary features).

mod cmeans;
mod kmeans;
mod lca;
mod mixture;
mod ward;

pub use cmeans::{cmeans, fuzzy_memberships};
pub use kmeans::{kmeans, kmeans_pp, wcss};
pub use lca::lca;
pub use mixture::{gaussian_log_likelihood, gmm, lpa};
pub use ward::{ward, ward_first_merge};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::Matrix;

/// Fitting knobs shared by every method. Methods ignore what they do not use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Relative objective change treated as converged.
    pub tol: f64,
    pub restarts: usize,
    /// c-means fuzzifier.
    pub fuzzifier_m: f64,
    /// Lower bound on covariance eigenvalues for Gaussian mixtures.
    pub covariance_floor: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 2,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
            fuzzifier_m: 2.0,
            covariance_floor: 1e-6,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_k(self, k: usize) -> Self {
        FitConfig { k, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        FitConfig { seed, ..self }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(domain("k must be at least 1"));
        }
        if n < self.k {
            return Err(Error::TooManyClusters { k: self.k, n });
        }
        if self.max_iter == 0 || self.restarts == 0 {
            return Err(domain("max_iter and restarts must be positive"));
        }
        if !(self.tol > 0.0) || !(self.covariance_floor > 0.0) {
            return Err(domain("tol and covariance_floor must be positive"));
        }
        if !(self.fuzzifier_m > 1.0) {
            return Err(domain(format!(
                "fuzzifier must be > 1, got {}",
                self.fuzzifier_m
            )));
        }
        Ok(())
    }
}

/// Method-specific fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterParams {
    /// k×d centroid matrix.
    Centroids(Matrix),
    Gaussian {
        weights: Vec<f64>,
        means: Matrix,
        covariances: Vec<Matrix>,
    },
    Bernoulli {
        weights: Vec<f64>,
        /// k×p success probabilities.
        probabilities: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSolution {
    pub hard_labels: Vec<usize>,
    /// N×k row-stochastic memberships (fuzzy or posterior).
    pub soft_memberships: Option<Matrix>,
    pub k: usize,
    pub params: ClusterParams,
    pub log_likelihood: Option<f64>,
    pub n_params: Option<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective minimised by the method (WCSS, fuzzy objective, negative
    /// log-likelihood, or total Ward merge cost).
    pub objective: f64,
    /// Observed-data log-likelihood after each E-step (model-based only).
    pub log_likelihood_trace: Vec<f64>,
}

/// Row-argmax with ties going to the lowest index.
pub fn harden(memberships: &Matrix) -> Vec<usize> {
    memberships
        .row_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}

pub(crate) fn rows(data: &Matrix) -> Vec<Vec<f64>> {
    data.row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// The six analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    KMeans,
    Ward,
    CMeans,
    Lca,
    Lpa,
    Gmm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::KMeans,
        Method::Ward,
        Method::CMeans,
        Method::Lca,
        Method::Lpa,
        Method::Gmm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Ward => "ward",
            Method::CMeans => "cmeans",
            Method::Lca => "lca",
            Method::Lpa => "lpa",
            Method::Gmm => "gmm",
        }
    }

    /// Fuzzy silhouette applies to methods with soft memberships.
    pub fn is_soft(&self) -> bool {
        matches!(self, Method::CMeans | Method::Lpa | Method::Gmm)
    }

    pub fn fit(&self, data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
        match self {
            Method::KMeans => kmeans(data, cfg),
            Method::Ward => ward(data, cfg.k),
            Method::CMeans => cmeans(data, cfg),
            Method::Lca => lca(data, cfg),
            Method::Lpa => lpa(data, cfg),
            Method::Gmm => gmm(data, cfg),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "kmeans" => Method::KMeans,
            "ward" | "hierarchical" | "agglomerative" => Method::Ward,
            "cmeans" | "fuzzy" | "fuzzycmeans" => Method::CMeans,
            "lca" => Method::Lca,
            "lpa" => Method::Lpa,
            "gmm" => Method::Gmm,
            other => return Err(domain(format!("unknown method '{other}'"))),
        };
        Ok(m)
    }
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Two spherical Gaussian blobs in `d` dimensions, first coordinate
    /// offset by ±sep/2.
    pub fn blobs(n: usize, d: usize, sep: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut s = rng::from_seed(seed);
        let labels: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
        let data = Matrix::from_fn(2 * n, d, |i, j| {
            let z: f64 = StandardNormal.sample(&mut s);
            if j == 0 {
                z + if labels[i] == 0 {
                    -sep / 2.0
                } else {
                    sep / 2.0
                }
            } else {
                z
            }
        });
        (data, labels)
    }

    pub fn random(n: usize, d: usize, seed: u64) -> Matrix {
        let mut s = rng::from_seed(seed);
        Matrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut s))
    }

    /// Partitions equal up to relabelling.
    pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
        a.len() == b.len()
            && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    pub fn assert_row_stochastic(m: &Matrix) {
        for r in m.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-9, "row sums to {}", r.sum());
            assert!(r.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }
    }
}
