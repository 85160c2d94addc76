//! Monte-Carlo power estimation.
//!
//! A [`PowerCell`] fixes a method, a per-group sample size, a feature count
//! and an effect-size distribution. Each replicate draws an effect vector,
//! simulates two equally sized subgroups, runs the analysis pipeline and
//! records whether the single-group null was rejected. Power is the
//! rejection proportion.
//!
//! Replicates use streams derived from `(master_seed, cell, index)`:
//! effect vectors do not depend on `n` and data do not depend on the method,
//! so neighbouring cells and different methods see paired datasets.

mod search;
mod sensitivity;
mod shift;

pub use search::{
    build_reference_table, min_sample_search, ReferenceRow, ReferenceTable, RowOption, RowStatus,
    SearchOptions, SearchResult, DEFAULT_N_GRID,
};
pub use sensitivity::{sensitivity, GuidelineStatus, SensitivityReport};
pub use shift::{centroid_shift_experiment, ShiftOptions, ShiftRow};

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterSolution, FitConfig, Method};
use crate::datagen::{
    draw_effect_vector, generate_categorical, generate_continuous, Correlation, DatasetSpec,
    EffectSource, FeatureKind,
};
use crate::error::{domain, Error, Result};
use crate::evaluate::{
    bayes_factor, bic, decide, fuzzy_silhouette, silhouette, DecisionRule, EvaluationResult,
    Metrics,
};
use crate::reduce::Reducer;
use crate::rng;
use crate::Matrix;

pub const DEFAULT_SEED: u64 = 20_240_101;
pub const DEFAULT_REPS: usize = 50;
pub const DEFAULT_TARGET_POWER: f64 = 0.9;

/// One (method, n, p, effect distribution) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub method: Method,
    pub n_per_group: usize,
    pub p: usize,
    pub effects: EffectSource,
    pub reps: usize,
    pub reducer: Reducer,
    /// Embedding dimensionality for the reducer.
    pub dims: usize,
    pub correlation: Correlation,
    pub master_seed: u64,
    /// Fitting knobs; `k` and `seed` are set per replicate.
    pub fit: FitConfig,
}

impl PowerCell {
    /// Cell with the default protocol: 50 replicates, PCA to two dimensions
    /// (raw features for LCA), independent features.
    pub fn new(method: Method, n_per_group: usize, p: usize, lambda: f64) -> Self {
        PowerCell {
            method,
            n_per_group,
            p,
            effects: EffectSource::Exponential { lambda },
            reps: DEFAULT_REPS,
            reducer: if method == Method::Lca {
                Reducer::None
            } else {
                Reducer::Pca
            },
            dims: 2,
            correlation: Correlation::Independent,
            master_seed: DEFAULT_SEED,
            fit: FitConfig::default(),
        }
    }

    /// Cell in which both groups come from the same distribution.
    pub fn null(method: Method, n_per_group: usize, p: usize) -> Result<Self> {
        let mut cell = PowerCell::new(method, n_per_group, p, 1.0);
        cell.effects = EffectSource::Fixed(crate::effect_size::EffectVector::zeros(p)?);
        Ok(cell)
    }

    pub fn with_reps(self, reps: usize) -> Self {
        PowerCell { reps, ..self }
    }

    pub fn with_seed(self, master_seed: u64) -> Self {
        PowerCell {
            master_seed,
            ..self
        }
    }

    pub fn with_reducer(self, reducer: Reducer) -> Self {
        PowerCell { reducer, ..self }
    }

    pub fn feature_kind(&self) -> FeatureKind {
        if self.method == Method::Lca {
            FeatureKind::Binary
        } else {
            FeatureKind::Continuous
        }
    }

    /// `lambda` for exponential cells, `None` for fixed effects.
    pub fn lambda(&self) -> Option<f64> {
        match self.effects {
            EffectSource::Exponential { lambda } => Some(lambda),
            EffectSource::Fixed(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(domain("reps must be at least 1"));
        }
        if self.n_per_group < 2 {
            return Err(domain("need at least 2 observations per group"));
        }
        if self.p == 0 {
            return Err(Error::NoFeatures);
        }
        if let EffectSource::Exponential { lambda } = self.effects {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(domain(format!(
                    "lambda must be positive and finite, got {lambda}"
                )));
            }
        }
        if let EffectSource::Fixed(v) = &self.effects {
            if v.len() != self.p {
                return Err(domain("fixed effect vector length differs from p"));
            }
        }
        if self.method == Method::Lca && self.reducer != Reducer::None {
            return Err(domain("latent class analysis runs on raw binary features"));
        }
        if self.reducer != Reducer::None && (self.dims == 0 || self.dims > self.p) {
            return Err(domain(format!(
                "cannot reduce {} features to {} dimensions",
                self.p, self.dims
            )));
        }
        let spec = self.dataset_spec(crate::effect_size::EffectVector::zeros(self.p)?);
        spec.validate()
    }

    fn dataset_spec(&self, effects: crate::effect_size::EffectVector) -> DatasetSpec {
        DatasetSpec {
            n_per_group: vec![self.n_per_group, self.n_per_group],
            p: self.p,
            effects: EffectSource::Fixed(effects),
            feature_kind: self.feature_kind(),
            correlation: self.correlation,
            seed: self.master_seed,
        }
    }

    /// Stream-key components shared by every method at this `p`.
    fn effect_key(&self) -> Vec<u64> {
        let mut key = vec![self.p as u64, self.feature_kind() as u64];
        match &self.effects {
            EffectSource::Exponential { lambda } => key.push(lambda.to_bits()),
            EffectSource::Fixed(v) => {
                key.push(u64::MAX);
                key.extend(v.as_slice().iter().map(|d| d.to_bits()));
            }
        }
        if let Correlation::Random { strength } = self.correlation {
            key.push(strength.to_bits());
        }
        key
    }

    fn method_index(&self) -> u64 {
        Method::ALL
            .iter()
            .position(|m| *m == self.method)
            .unwrap_or(0) as u64
    }
}

/// Outcome of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub evaluation: Option<EvaluationResult>,
    pub rejected_null: bool,
    pub converged: bool,
    /// Why the replicate was counted as a non-rejection without a score.
    pub flag: Option<String>,
    /// Population centroid distance of the drawn effects.
    pub realized_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub cell: PowerCell,
    pub rejections: usize,
    pub power: f64,
    pub wilson_ci95: (f64, f64),
    /// Mean silhouette (silhouette rule) or mean log10 Bayes factor.
    pub mean_score: f64,
    pub runtime_seconds: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = p + z2 / (2.0 * n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let denom = 1.0 + z2 / n;
    let low = if successes == 0 {
        0.0
    } else {
        ((centre - half) / denom).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        ((centre + half) / denom).min(1.0)
    };
    (low.min(p), high.max(p))
}

/// Outcome of analysing one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub evaluation: Option<EvaluationResult>,
    pub rejected_null: bool,
    pub converged: bool,
    /// Why the dataset was counted as a non-rejection, or a numerical caveat.
    pub flag: Option<String>,
}

impl Analysis {
    fn failed(converged: bool, flag: String) -> Self {
        Analysis {
            evaluation: None,
            rejected_null: false,
            converged,
            flag: Some(flag),
        }
    }
}

/// Runs the decision pipeline for `method` on `data`.
///
/// LCA compares one- and two-class fits on the raw 0/1 data by Bayes
/// factor. Every other method clusters the `dims`-dimensional embedding
/// into two groups and is judged by silhouette (fuzzy silhouette for soft
/// methods). A failed or non-converged fit counts as a non-rejection.
pub fn analyze(
    data: &Matrix,
    method: Method,
    reducer: Reducer,
    dims: usize,
    fit: FitConfig,
    reducer_seed: u64,
) -> Result<Analysis> {
    if method == Method::Lca {
        if reducer != Reducer::None {
            return Err(domain("latent class analysis runs on raw binary features"));
        }
        let n_obs = data.nrows();
        let (null_fit, alt_fit) = match (
            method.fit(data, &fit.with_k(1)),
            method.fit(data, &fit.with_k(2)),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e @ Error::InvalidData(_)), _) => return Err(e),
            (Err(e), _) | (_, Err(e)) => {
                return Ok(Analysis::failed(false, format!("fit failed: {e}")))
            }
        };
        let ll = |s: &ClusterSolution| s.log_likelihood.expect("mixture log-likelihood");
        let np = |s: &ClusterSolution| s.n_params.expect("mixture parameter count");
        let bic_null = bic(ll(&null_fit), np(&null_fit), n_obs)?;
        let bic_alt = bic(ll(&alt_fit), np(&alt_fit), n_obs)?;
        let bf = bayes_factor(bic_null, bic_alt)?;
        let evaluation = decide(
            Metrics {
                bic_null: Some(bic_null),
                bic_alt: Some(bic_alt),
                bayes_factor: Some(bf.value),
                ..Metrics::default()
            },
            DecisionRule::BAYES_FACTOR,
        )?;
        let converged = null_fit.converged && alt_fit.converged;
        let flag = if !converged {
            Some("not converged".to_string())
        } else if bf.clamped {
            Some("bayes factor clamped".to_string())
        } else {
            None
        };
        return Ok(Analysis {
            rejected_null: evaluation.rejected_null && converged,
            evaluation: Some(evaluation),
            converged,
            flag,
        });
    }

    let embedding = reducer.apply(data, dims, reducer_seed)?;
    let space = &embedding.coords;
    let solution = match method.fit(space, &fit.with_k(2)) {
        Ok(s) => s,
        Err(e) => return Ok(Analysis::failed(false, format!("fit failed: {e}"))),
    };
    let crisp = match silhouette(space, &solution.hard_labels) {
        Ok(s) => s,
        Err(e) => return Ok(Analysis::failed(solution.converged, e.to_string())),
    };
    let fuzzy = match (&solution.soft_memberships, method.is_soft()) {
        (Some(u), true) => Some(fuzzy_silhouette(space, u, 1.0)?),
        _ => None,
    };
    let evaluation = decide(
        Metrics {
            silhouette: Some(crisp),
            fuzzy_silhouette: fuzzy,
            ..Metrics::default()
        },
        DecisionRule::SILHOUETTE,
    )?;
    Ok(Analysis {
        rejected_null: evaluation.rejected_null && solution.converged,
        evaluation: Some(evaluation),
        converged: solution.converged,
        flag: (!solution.converged).then(|| "not converged".to_string()),
    })
}

/// Silhouette of a `k`-cluster solution for each `k` in `ks`, in the
/// space the clustering ran in, plus the `k` with the highest score.
/// Uses the fuzzy silhouette for soft methods. Not part of power cells,
/// which always fit two clusters.
pub fn select_k(
    data: &Matrix,
    method: Method,
    reducer: Reducer,
    dims: usize,
    ks: &[usize],
    fit: FitConfig,
    reducer_seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if method == Method::Lca {
        return Err(domain(
            "latent class analysis is compared by Bayes factor, not silhouette",
        ));
    }
    if ks.iter().any(|&k| k < 2) || ks.is_empty() {
        return Err(domain("candidate k values must be at least 2"));
    }
    let embedding = reducer.apply(data, dims, reducer_seed)?;
    let space = &embedding.coords;
    let mut scores = Vec::with_capacity(ks.len());
    for &k in ks {
        let sol = method.fit(space, &fit.with_k(k))?;
        let score = match (&sol.soft_memberships, method.is_soft()) {
            (Some(u), true) => fuzzy_silhouette(space, u, 1.0)?,
            _ => silhouette(space, &sol.hard_labels)?,
        };
        scores.push((k, score));
    }
    // ties go to the smaller k
    let best = scores
        .iter()
        .fold(scores[0], |b, &s| if s.1 > b.1 { s } else { b })
        .0;
    Ok((best, scores))
}

/// Simulates and analyses replicate `index` of `cell`.
pub fn run_replicate(cell: &PowerCell, index: usize) -> Result<ReplicateOutcome> {
    cell.validate()?;
    let idx = index as u64;
    let effect_key = cell.effect_key();
    let effects = match &cell.effects {
        EffectSource::Exponential { lambda } => draw_effect_vector(
            cell.p,
            *lambda,
            &mut rng::derive(cell.master_seed, "effects", &effect_key, idx),
        )?,
        EffectSource::Fixed(v) => v.clone(),
    };
    let mut data_key = effect_key.clone();
    data_key.push(cell.n_per_group as u64);
    let mut data_stream = rng::derive(cell.master_seed, "data", &data_key, idx);
    let mut fit_key = data_key;
    fit_key.push(cell.method_index());
    fit_key.push(cell.reducer as u64);
    let mut fit_stream = rng::derive(cell.master_seed, "fit", &fit_key, idx);

    let spec = cell.dataset_spec(effects);
    let fit = FitConfig {
        seed: fit_stream.random(),
        ..cell.fit
    };
    let reducer_seed = fit_stream.random();
    let ds = match cell.feature_kind() {
        FeatureKind::Binary => generate_categorical(&spec, &mut data_stream)?,
        FeatureKind::Continuous => generate_continuous(&spec, &mut data_stream)?,
    };
    let a = analyze(
        &ds.data,
        cell.method,
        cell.reducer,
        cell.dims,
        fit,
        reducer_seed,
    )?;
    Ok(ReplicateOutcome {
        index,
        evaluation: a.evaluation,
        rejected_null: a.rejected_null,
        converged: a.converged,
        flag: a.flag,
        realized_delta: ds.realized_delta,
    })
}

/// Runs every replicate of `cell` on `workers` threads (all cores when
/// `None`). The result does not depend on the worker count.
pub fn estimate_power(cell: &PowerCell, workers: Option<usize>) -> Result<PowerEstimate> {
    cell.validate()?;
    let start = Instant::now();
    let run = || {
        (0..cell.reps)
            .into_par_iter()
            .map(|i| run_replicate(cell, i))
            .collect::<Result<Vec<_>>>()
    };
    log::info!(
        "{} n={} p={}: {} replicates",
        cell.method,
        cell.n_per_group,
        cell.p,
        cell.reps
    );
    let replicates = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(summarize(
        cell.clone(),
        replicates,
        start.elapsed().as_secs_f64(),
    ))
}

pub(crate) fn summarize(
    cell: PowerCell,
    replicates: Vec<ReplicateOutcome>,
    runtime_seconds: f64,
) -> PowerEstimate {
    let rejections = replicates.iter().filter(|r| r.rejected_null).count();
    let reps = replicates.len();
    let scores: Vec<f64> = replicates
        .iter()
        .filter_map(|r| r.evaluation.as_ref())
        .filter_map(|e| match e.rule {
            DecisionRule::BayesFactorThreshold(_) => e.bayes_factor.map(f64::log10),
            DecisionRule::SilhouetteThreshold(_) => e.decisive_score(),
        })
        .collect();
    let mean_score = if scores.is_empty() {
        f64::NAN
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    };
    PowerEstimate {
        cell,
        rejections,
        power: rejections as f64 / reps.max(1) as f64,
        wilson_ci95: wilson_interval(rejections, reps),
        mean_score,
        runtime_seconds,
        replicates,
    }
}
