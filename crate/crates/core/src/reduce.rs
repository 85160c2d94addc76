//! Standardisation and low-dimensional embeddings.
//!
//! * [`pca`]: projection onto the leading eigenvectors of the sample
//!   covariance.
//! * [`mds`]: classical (Torgerson) metric MDS. On Euclidean input this is
//!   the same configuration as PCA up to sign.
//! * [`smacof`]: metric MDS by stress majorisation from a random start. This
//!   is what [`Reducer::Mds`] runs; unlike the two spectral methods it does
//!   not concentrate on high-variance (correlated) directions.

use log::warn;
use nalgebra::SymmetricEigen;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng;
use crate::Matrix;

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReductionMethod {
    None,
    Pca,
    Mds,
    ClassicalMds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// N×d coordinates.
    pub coords: Matrix,
    pub method: ReductionMethod,
    /// Share of total variance per principal component (all components, not
    /// only the retained ones). Empty for MDS.
    pub explained: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: Matrix,
    /// Columns with zero variance; these are centred and left at zero.
    pub constant_columns: Vec<usize>,
}

/// Centres every column and scales it to unit sample standard deviation.
pub fn standardize(data: &Matrix) -> Result<Standardized> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(domain("standardisation needs at least 2 rows"));
    }
    let mut out = data.clone();
    let mut constant_columns = Vec::new();
    for j in 0..p {
        let mut col = out.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
        if sd > f64::EPSILON * mean.abs().max(1.0) {
            col /= sd;
        } else {
            col.fill(0.0);
            constant_columns.push(j);
        }
    }
    if !constant_columns.is_empty() {
        warn!("constant columns {constant_columns:?} left at zero after standardisation");
    }
    Ok(Standardized {
        data: out,
        constant_columns,
    })
}

fn center_columns(data: &Matrix) -> Matrix {
    let mut c = data.clone();
    for mut col in c.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    c
}

/// Eigen-pairs sorted by decreasing eigenvalue.
fn sorted_eigen(m: Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i))
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Index of the entry with the largest magnitude (first on ties).
fn argmax_abs(v: impl Iterator<Item = f64>) -> (usize, f64) {
    v.enumerate().fold(
        (0, 0.0),
        |(bi, bv), (i, x)| if x.abs() > bv.abs() { (i, x) } else { (bi, bv) },
    )
}

fn clean_eigenvalues(values: &mut [f64]) {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    for v in values.iter_mut() {
        if *v <= EIGEN_RTOL * top {
            *v = 0.0;
        }
    }
}

/// Principal component scores on the top `d` components.
///
/// Each component's loading vector is oriented so its largest-magnitude
/// entry is positive.
pub fn pca(data: &Matrix, d: usize) -> Result<Embedding> {
    let (n, p) = data.shape();
    if d == 0 || d > n.min(p) {
        return Err(domain(format!(
            "PCA target dimension {d} must be in 1..={}",
            n.min(p)
        )));
    }
    if n < 2 {
        return Err(domain("PCA needs at least 2 rows"));
    }
    let xc = center_columns(data);
    let denom = (n - 1) as f64;
    let (mut values, loadings) = if p <= n {
        let cov = xc.transpose() * &xc / denom;
        let (values, vectors) = sorted_eigen(cov);
        (values, vectors.columns(0, d).into_owned())
    } else {
        // Gram route: same non-zero spectrum, N×N instead of p×p.
        let gram = &xc * xc.transpose() / denom;
        let (values, vectors) = sorted_eigen(gram);
        let mut loadings = Matrix::zeros(p, d);
        for j in 0..d {
            let scale = (denom * values[j].max(0.0)).sqrt();
            if scale > 0.0 {
                loadings.set_column(j, &(xc.transpose() * vectors.column(j) / scale));
            }
        }
        (values, loadings)
    };
    clean_eigenvalues(&mut values);
    let mut loadings = loadings;
    for j in 0..d {
        if values[j] == 0.0 {
            loadings.column_mut(j).fill(0.0);
            continue;
        }
        let (_, v) = argmax_abs(loadings.column(j).iter().copied());
        if v < 0.0 {
            loadings.column_mut(j).neg_mut();
        }
    }
    let coords = &xc * loadings;
    let total: f64 = values.iter().sum();
    let explained = values
        .iter()
        .take(n.min(p))
        .map(|v| if total > 0.0 { v / total } else { 0.0 })
        .collect();
    Ok(Embedding {
        coords,
        method: ReductionMethod::Pca,
        explained,
    })
}

/// Eigenvalues of the sample covariance, largest first. Used for the
/// total-variance check.
pub fn covariance_spectrum(data: &Matrix) -> Vec<f64> {
    let n = data.nrows();
    let xc = center_columns(data);
    sorted_eigen(xc.transpose() * &xc / (n.max(2) - 1) as f64).0
}

/// Squared Euclidean distances between rows.
pub fn squared_distances(data: &Matrix) -> Matrix {
    let n = data.nrows();
    let mut d2 = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (data.row(i) - data.row(j)).norm_squared();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

/// Classical metric MDS of the Euclidean distances between rows.
///
/// Coordinates beyond the numerical rank are zero-filled.
pub fn mds(data: &Matrix, d: usize) -> Result<Embedding> {
    let n = data.nrows();
    if n < 2 || d == 0 || d > n - 1 {
        return Err(domain(format!(
            "MDS target dimension {d} must be in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let d2 = squared_distances(data);
    let row_means: Vec<f64> = (0..n).map(|i| d2.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = Matrix::from_fn(n, n, |i, j| {
        -0.5 * (d2[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let (mut values, vectors) = sorted_eigen(b);
    clean_eigenvalues(&mut values);
    let mut coords = Matrix::zeros(n, d);
    let mut zero_filled = 0;
    for j in 0..d {
        if values[j] <= 0.0 {
            zero_filled += 1;
            continue;
        }
        let mut col = vectors.column(j) * values[j].sqrt();
        let (_, v) = argmax_abs(col.iter().copied());
        if v < 0.0 {
            col.neg_mut();
        }
        coords.set_column(j, &col);
    }
    if zero_filled > 0 {
        warn!(
            "MDS: {zero_filled} of {d} requested dimensions exceed the rank and were zero-filled"
        );
    }
    Ok(Embedding {
        coords,
        method: ReductionMethod::ClassicalMds,
        explained: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmacofConfig {
    pub max_iter: usize,
    /// Stop when the relative decrease in raw stress falls below this.
    pub eps: f64,
    pub seed: u64,
}

impl Default for SmacofConfig {
    fn default() -> Self {
        SmacofConfig {
            max_iter: 300,
            eps: 1e-3,
            seed: 0,
        }
    }
}

/// Raw stress of `coords` against target distances.
fn raw_stress(coords: &Matrix, target: &Matrix) -> f64 {
    let n = coords.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += ((coords.row(i) - coords.row(j)).norm() - target[(i, j)]).powi(2);
        }
    }
    s
}

/// Metric MDS by stress majorisation (Guttman transform) from a uniform
/// random start in the unit cube. The result is centred.
pub fn smacof(data: &Matrix, d: usize, cfg: &SmacofConfig) -> Result<Embedding> {
    let n = data.nrows();
    if n < 2 || d == 0 || d > n - 1 {
        return Err(domain(format!(
            "MDS target dimension {d} must be in 1..={}",
            n.saturating_sub(1)
        )));
    }
    let target = squared_distances(data).map(f64::sqrt);
    let mut stream = rng::from_seed(cfg.seed);
    let mut x = Matrix::from_fn(n, d, |_, _| stream.random::<f64>());
    let mut stress = raw_stress(&x, &target);
    let mut b = Matrix::zeros(n, n);
    for _ in 0..cfg.max_iter {
        b.fill(0.0);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dij = (x.row(i) - x.row(j)).norm();
                if dij > 1e-12 {
                    let v = -target[(i, j)] / dij;
                    b[(i, j)] = v;
                    diag -= v;
                }
            }
            b[(i, i)] = diag;
        }
        x = &b * &x / n as f64;
        let next = raw_stress(&x, &target);
        let done = stress - next < cfg.eps * stress.max(f64::MIN_POSITIVE);
        stress = next;
        if done {
            break;
        }
    }
    Ok(Embedding {
        coords: center_columns(&x),
        method: ReductionMethod::Mds,
        explained: Vec::new(),
    })
}

/// Dimensionality reduction step of an analysis pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reducer {
    None,
    Pca,
    /// Stress-majorisation metric MDS.
    Mds,
    ClassicalMds,
}

impl Reducer {
    pub fn name(&self) -> &'static str {
        match self {
            Reducer::None => "none",
            Reducer::Pca => "pca",
            Reducer::Mds => "mds",
            Reducer::ClassicalMds => "cmds",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(Reducer::None),
            "pca" => Some(Reducer::Pca),
            "mds" | "smacof" => Some(Reducer::Mds),
            "cmds" | "classical-mds" | "classical" => Some(Reducer::ClassicalMds),
            _ => None,
        }
    }

    /// Embeds `data` into `d` dimensions; `seed` only matters for
    /// stochastic reducers.
    pub fn apply(&self, data: &Matrix, d: usize, seed: u64) -> Result<Embedding> {
        match self {
            Reducer::None => Ok(Embedding {
                coords: data.clone(),
                method: ReductionMethod::None,
                explained: Vec::new(),
            }),
            Reducer::Pca => pca(data, d),
            Reducer::Mds => smacof(
                data,
                d,
                &SmacofConfig {
                    seed,
                    ..SmacofConfig::default()
                },
            ),
            Reducer::ClassicalMds => mds(data, d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, p: usize, seed: u64) -> Matrix {
        let mut s = rng::from_seed(seed);
        Matrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut s))
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn standardize_column() {
        let x = Matrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let s = standardize(&x).unwrap();
        let col = s.data.column(0);
        assert!(col.mean().abs() < 1e-15);
        assert!((col.norm_squared() / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_is_idempotent() {
        let once = standardize(&random(40, 5, 1)).unwrap().data;
        let twice = standardize(&once).unwrap().data;
        assert!(max_abs_diff(&once, &twice) < 1e-9);
    }

    #[test]
    fn standardize_constant_column() {
        let x = Matrix::from_row_slice(3, 2, &[5.0, 1.0, 5.0, 2.0, 5.0, 4.0]);
        let s = standardize(&x).unwrap();
        assert_eq!(s.constant_columns, vec![0]);
        assert!(s.data.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pca_on_a_line() {
        let x = Matrix::from_fn(10, 2, |i, j| i as f64 * if j == 0 { 1.0 } else { 2.0 });
        let e = pca(&x, 1).unwrap();
        assert!((e.explained[0] - 1.0).abs() < 1e-12);
        assert!(e.explained[1].abs() < 1e-12);
    }

    #[test]
    fn pca_full_rank_is_isometry() {
        let x = random(30, 4, 2);
        let e = pca(&x, 4).unwrap();
        assert!(max_abs_diff(&squared_distances(&x), &squared_distances(&e.coords)) < 1e-9);
    }

    #[test]
    fn pca_preserves_total_variance() {
        for (n, p) in [(50, 5), (10, 30)] {
            let x = random(n, p, 3);
            let xc = center_columns(&x);
            let trace = (xc.transpose() * &xc).trace() / (n - 1) as f64;
            let spectrum: f64 = covariance_spectrum(&x).iter().sum();
            assert!((spectrum - trace).abs() < 1e-9 * trace);
            let e = pca(&x, 2).unwrap();
            assert!((e.explained.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_columns_ordered_and_contractive() {
        let x = random(25, 6, 4);
        let e = pca(&x, 3).unwrap();
        assert!(e.explained.windows(2).all(|w| w[0] >= w[1]));
        let vars: Vec<f64> = e.coords.column_iter().map(|c| c.norm_squared()).collect();
        assert!(vars.windows(2).all(|w| w[0] >= w[1] - 1e-9));
        let orig = squared_distances(&x);
        let emb = squared_distances(&e.coords);
        assert!(emb.iter().zip(orig.iter()).all(|(a, b)| *a <= *b + 1e-9));
    }

    #[test]
    fn pca_wide_matches_tall_route() {
        // p > N exercises the Gram-matrix path; compare distances with the
        // covariance route on the transposed problem size.
        let x = random(8, 20, 5);
        let e = pca(&x, 7).unwrap();
        assert!(max_abs_diff(&squared_distances(&x), &squared_distances(&e.coords)) < 1e-8);
    }

    #[test]
    fn pca_rejects_bad_dimension() {
        assert!(pca(&random(5, 3, 1), 4).is_err());
        assert!(pca(&random(5, 3, 1), 0).is_err());
    }

    #[test]
    fn pca_sign_convention_is_deterministic() {
        let x = random(20, 3, 6);
        let a = pca(&x, 2).unwrap();
        let flipped = -x.clone();
        let b = pca(&flipped, 2).unwrap();
        // loadings are normalised, so negating the data negates the scores
        assert!(max_abs_diff(&a.coords, &-b.coords) < 1e-9);
        assert_eq!(a, pca(&x, 2).unwrap());
    }

    #[test]
    fn mds_matches_pca_distances() {
        for seed in 0..5 {
            let x = random(30, 6, seed);
            let a = pca(&x, 2).unwrap();
            let b = mds(&x, 2).unwrap();
            assert!(
                max_abs_diff(&squared_distances(&a.coords), &squared_distances(&b.coords)) < 1e-6
            );
        }
    }

    #[test]
    fn mds_equilateral_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let x = Matrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.5, h]);
        let e = mds(&x, 2).unwrap();
        let d = squared_distances(&e.coords);
        assert!((d[(0, 1)] - 1.0).abs() < 1e-9);
        assert!((d[(0, 2)] - 1.0).abs() < 1e-9);
        assert!((d[(1, 2)] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mds_zero_fills_beyond_rank() {
        let x = Matrix::from_fn(6, 1, |i, _| i as f64);
        let e = mds(&x, 3).unwrap();
        assert!(e.coords.column(1).iter().all(|&v| v == 0.0));
        assert!(e.coords.column(2).iter().all(|&v| v == 0.0));
        assert!(mds(&x, 6).is_err());
    }

    #[test]
    fn smacof_reduces_stress_and_is_seeded() {
        let x = random(40, 5, 7);
        let target = squared_distances(&x).map(f64::sqrt);
        let cfg = SmacofConfig {
            seed: 3,
            ..SmacofConfig::default()
        };
        let e = smacof(&x, 2, &cfg).unwrap();
        let start = {
            let mut s = rng::from_seed(3);
            Matrix::from_fn(40, 2, |_, _| s.random::<f64>())
        };
        assert!(raw_stress(&e.coords, &target) < raw_stress(&start, &target));
        assert_eq!(e, smacof(&x, 2, &cfg).unwrap());
    }

    #[test]
    fn smacof_recovers_planar_configuration() {
        // points already in 2D: the stress minimum is zero
        let x = random(15, 2, 8);
        let e = smacof(
            &x,
            2,
            &SmacofConfig {
                max_iter: 3000,
                eps: 1e-12,
                seed: 1,
            },
        )
        .unwrap();
        let target = squared_distances(&x).map(f64::sqrt);
        assert!(raw_stress(&e.coords, &target) < 1e-3);
    }
}
