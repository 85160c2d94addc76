//! Gaussian mixtures fitted by EM: full covariances (GMM) and diagonal
//! covariances (latent profile analysis). Both start from k-means labels.

use nalgebra::{Cholesky, DVector, Dyn, SymmetricEigen};

use super::{harden, kmeans, log_sum_exp, ClusterParams, ClusterSolution, FitConfig};
use crate::error::{Error, Result};
use crate::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CovKind {
    Full,
    Diagonal,
}

struct Component {
    weight: f64,
    mean: DVector<f64>,
    cov: Matrix,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl Component {
    fn new(
        weight: f64,
        mean: DVector<f64>,
        cov: Matrix,
        floor: f64,
        kind: CovKind,
    ) -> Result<Self> {
        let cov = floor_covariance(cov, floor, kind);
        let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
            Error::Numerical("covariance not positive-definite after flooring".into())
        })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(Component {
            weight,
            mean,
            cov,
            chol,
            log_det,
        })
    }

    fn log_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("non-singular factor");
        -0.5 * (self.mean.len() as f64 * LN_2PI + self.log_det + z.norm_squared())
    }
}

/// Clamps covariance eigenvalues from below; diagonal models drop the
/// off-diagonal terms first.
fn floor_covariance(cov: Matrix, floor: f64, kind: CovKind) -> Matrix {
    match kind {
        CovKind::Diagonal => Matrix::from_diagonal(&cov.diagonal().map(|v| v.max(floor))),
        CovKind::Full => {
            let sym = (&cov + cov.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym.clone());
            if eig.eigenvalues.iter().all(|&v| v >= floor) {
                return sym;
            }
            let clamped = eig.eigenvalues.map(|v| v.max(floor));
            let v = &eig.eigenvectors;
            let out = v * Matrix::from_diagonal(&clamped) * v.transpose();
            (&out + out.transpose()) * 0.5
        }
    }
}

fn m_step(
    points: &[DVector<f64>],
    resp: &Matrix,
    previous: Option<&[Component]>,
    floor: f64,
    kind: CovKind,
) -> Result<Vec<Component>> {
    let n = points.len();
    let d = points[0].len();
    let k = resp.ncols();
    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp.column(j).sum();
        if nk < 1e-10 {
            // collapsed component keeps its old shape with (near) zero weight
            let (mean, cov) = match previous {
                Some(prev) => (prev[j].mean.clone(), prev[j].cov.clone()),
                None => (points[j % n].clone(), Matrix::identity(d, d)),
            };
            comps.push(Component::new(nk / n as f64, mean, cov, floor, kind)?);
            continue;
        }
        let mut mean = DVector::zeros(d);
        for (i, x) in points.iter().enumerate() {
            mean.axpy(resp[(i, j)], x, 1.0);
        }
        mean /= nk;
        let mut cov = Matrix::zeros(d, d);
        for (i, x) in points.iter().enumerate() {
            let diff = x - &mean;
            cov.ger(resp[(i, j)], &diff, &diff, 1.0);
        }
        cov /= nk;
        comps.push(Component::new(nk / n as f64, mean, cov, floor, kind)?);
    }
    Ok(comps)
}

fn e_step(points: &[DVector<f64>], comps: &[Component], resp: &mut Matrix) -> f64 {
    let k = comps.len();
    let mut logp = vec![0.0; k];
    let mut ll = 0.0;
    for (i, x) in points.iter().enumerate() {
        for (j, c) in comps.iter().enumerate() {
            logp[j] = c.weight.ln() + c.log_density(x);
        }
        let lse = log_sum_exp(&logp);
        ll += lse;
        for j in 0..k {
            resp[(i, j)] = (logp[j] - lse).exp();
        }
    }
    ll
}

fn fit_mixture(data: &Matrix, cfg: &FitConfig, kind: CovKind) -> Result<ClusterSolution> {
    cfg.validate(data.nrows())?;
    let (n, d) = data.shape();
    let k = cfg.k;
    let points: Vec<DVector<f64>> = data.row_iter().map(|r| r.transpose()).collect();

    let init = kmeans(data, cfg)?;
    let mut resp = Matrix::zeros(n, k);
    for (i, &l) in init.hard_labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let mut comps = m_step(&points, &resp, None, cfg.covariance_floor, kind)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let ll = e_step(&points, &comps, &mut resp);
        if !ll.is_finite() {
            return Err(Error::Numerical("non-finite log-likelihood".into()));
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if iterations >= cfg.max_iter {
            break;
        }
        comps = m_step(&points, &resp, Some(&comps), cfg.covariance_floor, kind)?;
    }

    let ll = *trace.last().expect("at least one E-step");
    let cov_params = match kind {
        CovKind::Full => k * d * (d + 1) / 2,
        CovKind::Diagonal => k * d,
    };
    let means = Matrix::from_fn(k, d, |j, c| comps[j].mean[c]);
    Ok(ClusterSolution {
        hard_labels: harden(&resp),
        soft_memberships: Some(resp),
        k,
        params: ClusterParams::Gaussian {
            weights: comps.iter().map(|c| c.weight).collect(),
            means,
            covariances: comps.into_iter().map(|c| c.cov).collect(),
        },
        log_likelihood: Some(ll),
        n_params: Some(k * d + cov_params + (k - 1)),
        converged,
        iterations,
        objective: -ll,
        log_likelihood_trace: trace,
    })
}

/// Gaussian mixture with a full covariance matrix per component.
pub fn gmm(data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
    fit_mixture(data, cfg, CovKind::Full)
}

/// Latent profile analysis: Gaussian mixture with diagonal covariances.
pub fn lpa(data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
    fit_mixture(data, cfg, CovKind::Diagonal)
}

/// Mixture log-likelihood evaluated with explicit inverses and
/// determinants. Independent of the Cholesky path used while fitting.
pub fn gaussian_log_likelihood(
    data: &Matrix,
    weights: &[f64],
    means: &Matrix,
    covariances: &[Matrix],
) -> Result<f64> {
    let d = data.ncols();
    let mut inverses = Vec::new();
    for c in covariances {
        let inv = c
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular covariance".into()))?;
        inverses.push((inv, c.determinant()));
    }
    let mut total = 0.0;
    for row in data.row_iter() {
        let mut density = 0.0;
        for (j, (inv, det)) in inverses.iter().enumerate() {
            let diff = row.transpose() - means.row(j).transpose();
            let q = (diff.transpose() * inv * &diff)[(0, 0)];
            density += weights[j] * (-0.5 * q).exp()
                / ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt();
        }
        total += density.ln();
    }
    Ok(total)
}
