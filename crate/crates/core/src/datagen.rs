//! Seeded synthetic datasets with known subgroup structure.
//!
//! Continuous data: each subgroup is multivariate normal with unit marginal
//! variances; feature `i` differs between adjacent subgroups by `delta_i`.
//! Binary data: each feature is Bernoulli with success probability
//! `Phi(mean)`, where `mean` is the continuous group mean for that feature.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::effect_size::EffectVector;
use crate::error::{domain, Error, Result};
use crate::rng::{self, Stream};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Correlation {
    Independent,
    /// Random factor-model correlation; `strength` in `[0, 1)` is the share
    /// of each feature's variance carried by common factors.
    Random {
        strength: f64,
    },
}

/// Where per-feature effects come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EffectSource {
    /// Drawn from `Exp(lambda)`.
    Exponential {
        lambda: f64,
    },
    Fixed(EffectVector),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_per_group: Vec<usize>,
    pub p: usize,
    pub effects: EffectSource,
    pub feature_kind: FeatureKind,
    pub correlation: Correlation,
    pub seed: u64,
}

impl DatasetSpec {
    /// Two equally sized groups of independent continuous features.
    pub fn two_groups(n: usize, p: usize, effects: EffectSource, seed: u64) -> Self {
        DatasetSpec {
            n_per_group: vec![n, n],
            p,
            effects,
            feature_kind: FeatureKind::Continuous,
            correlation: Correlation::Independent,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_per_group.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_group.is_empty() || self.n_per_group.contains(&0) {
            return Err(domain("every group needs at least one observation"));
        }
        if self.total() < 2 {
            return Err(domain("need at least 2 observations in total"));
        }
        if self.p == 0 {
            return Err(Error::NoFeatures);
        }
        match &self.effects {
            EffectSource::Exponential { lambda } if !(lambda.is_finite() && *lambda > 0.0) => {
                return Err(domain(format!("lambda must be positive, got {lambda}")));
            }
            EffectSource::Fixed(v) if v.len() != self.p => {
                return Err(domain(format!(
                    "effect vector has {} entries, p = {}",
                    v.len(),
                    self.p
                )));
            }
            _ => {}
        }
        if let Correlation::Random { strength } = self.correlation {
            if !(0.0..1.0).contains(&strength) {
                return Err(domain(format!(
                    "correlation strength must be in [0, 1), got {strength}"
                )));
            }
            if self.feature_kind == FeatureKind::Binary && strength > 0.0 {
                return Err(domain("binary features must be independent"));
            }
        }
        Ok(())
    }
}

/// Observations with their true group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Matrix,
    pub labels: Vec<usize>,
    pub effect_vector: EffectVector,
    /// Population centroid distance between adjacent groups.
    pub realized_delta: f64,
}

impl LabeledDataset {
    pub fn n_groups(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

/// `p` independent draws from `Exp(lambda)`.
pub fn draw_effect_vector(p: usize, lambda: f64, stream: &mut Stream) -> Result<EffectVector> {
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    let exp =
        Exp::new(lambda).map_err(|_| domain(format!("lambda must be positive, got {lambda}")))?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    EffectVector::new((0..p).map(|_| exp.sample(stream)).collect())
}

/// Random positive-definite correlation matrix with unit diagonal.
///
/// `C = D (A Aᵀ + εI) D` with `A` a `p×k` standard normal matrix,
/// `k = max(1, ⌈strength·p⌉)`, `ε = k(1 − strength)/strength` and `D` the
/// normaliser to unit diagonal. `strength = 0` gives the identity.
pub fn random_correlation(p: usize, strength: f64, stream: &mut Stream) -> Result<Matrix> {
    if p == 0 {
        return Err(Error::NoFeatures);
    }
    if !(0.0..1.0).contains(&strength) {
        return Err(domain(format!(
            "correlation strength must be in [0, 1), got {strength}"
        )));
    }
    if strength == 0.0 || p == 1 {
        return Ok(Matrix::identity(p, p));
    }
    let k = ((strength * p as f64).ceil() as usize).max(1);
    let eps = k as f64 * (1.0 - strength) / strength;
    let a = Matrix::from_fn(p, k, |_, _| stream.sample::<f64, _>(StandardNormal));
    let mut c = &a * a.transpose();
    for i in 0..p {
        c[(i, i)] += eps;
    }
    let d: Vec<f64> = (0..p).map(|i| 1.0 / c[(i, i)].sqrt()).collect();
    for i in 0..p {
        for j in 0..p {
            c[(i, j)] *= d[i] * d[j];
        }
        c[(i, i)] = 1.0;
    }
    Ok(c)
}

/// Mean of group `g` on a feature with effect `delta`; adjacent groups are
/// `delta` apart and the group means are centred on zero.
fn group_offset(g: usize, n_groups: usize) -> f64 {
    g as f64 - (n_groups as f64 - 1.0) / 2.0
}

fn resolve_effects(spec: &DatasetSpec, stream: &mut Stream) -> Result<EffectVector> {
    match &spec.effects {
        EffectSource::Exponential { lambda } => draw_effect_vector(spec.p, *lambda, stream),
        EffectSource::Fixed(v) => Ok(v.clone()),
    }
}

fn labels_for(spec: &DatasetSpec) -> Vec<usize> {
    spec.n_per_group
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat_n(g, n))
        .collect()
}

/// Multivariate normal subgroups.
///
/// Correlation acts on the noise only, so each feature keeps its marginal
/// standardised difference.
pub fn generate_continuous(spec: &DatasetSpec, stream: &mut Stream) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.feature_kind != FeatureKind::Continuous {
        return Err(domain("generate_continuous needs continuous features"));
    }
    let effects = resolve_effects(spec, stream)?;
    let chol = match spec.correlation {
        Correlation::Random { strength } if strength > 0.0 => {
            let c = random_correlation(spec.p, strength, stream)?;
            let l = nalgebra::Cholesky::new(c).ok_or_else(|| {
                Error::Numerical("correlation matrix is not positive-definite".into())
            })?;
            Some(l.l())
        }
        _ => None,
    };
    let labels = labels_for(spec);
    let n_groups = spec.n_per_group.len();
    let n = labels.len();
    let p = spec.p;
    let mut data = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for (row, &g) in labels.iter().enumerate() {
        for zi in z.iter_mut() {
            *zi = stream.sample(StandardNormal);
        }
        let off = group_offset(g, n_groups);
        for j in 0..p {
            let noise = match &chol {
                Some(l) => (0..=j).map(|m| l[(j, m)] * z[m]).sum::<f64>(),
                None => z[j],
            };
            data[(row, j)] = off * effects.as_slice()[j] + noise;
        }
    }
    let realized_delta = effects.centroid_distance();
    Ok(LabeledDataset {
        data,
        labels,
        effect_vector: effects,
        realized_delta,
    })
}

/// Binary subgroups via the probit mapping `P(x=1) = Phi(group mean)`.
pub fn generate_categorical(spec: &DatasetSpec, stream: &mut Stream) -> Result<LabeledDataset> {
    spec.validate()?;
    if spec.feature_kind != FeatureKind::Binary {
        return Err(domain("generate_categorical needs binary features"));
    }
    let effects = resolve_effects(spec, stream)?;
    let probs = group_probabilities(&effects, spec.n_per_group.len());
    let labels = labels_for(spec);
    let mut data = Matrix::zeros(labels.len(), spec.p);
    for (row, &g) in labels.iter().enumerate() {
        for j in 0..spec.p {
            let u: f64 = stream.random();
            data[(row, j)] = if u < probs[(g, j)] { 1.0 } else { 0.0 };
        }
    }
    let realized_delta = effects.centroid_distance();
    Ok(LabeledDataset {
        data,
        labels,
        effect_vector: effects,
        realized_delta,
    })
}

/// Success probability per (group, feature).
pub fn group_probabilities(effects: &EffectVector, n_groups: usize) -> DMatrix<f64> {
    let phi = Normal::standard();
    let d = effects.as_slice();
    DMatrix::from_fn(n_groups, d.len(), |g, j| {
        phi.cdf(group_offset(g, n_groups) * d[j])
    })
}

/// Generates according to `spec.feature_kind`, seeding from `spec.seed`.
pub fn generate(spec: &DatasetSpec) -> Result<LabeledDataset> {
    let mut stream = rng::from_seed(spec.seed);
    match spec.feature_kind {
        FeatureKind::Continuous => generate_continuous(spec, &mut stream),
        FeatureKind::Binary => generate_categorical(spec, &mut stream),
    }
}

/// Euclidean distance between the first two group centroids of `data`.
pub fn sample_centroid_distance(data: &Matrix, labels: &[usize]) -> f64 {
    let d = data.ncols();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let mut counts = [0usize; 2];
    for (i, &g) in labels.iter().enumerate() {
        if g < 2 {
            counts[g] += 1;
            for j in 0..d {
                sums[g][j] += data[(i, j)];
            }
        }
    }
    if counts[0] == 0 || counts[1] == 0 {
        return 0.0;
    }
    (0..d)
        .map(|j| (sums[0][j] / counts[0] as f64 - sums[1][j] / counts[1] as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}
