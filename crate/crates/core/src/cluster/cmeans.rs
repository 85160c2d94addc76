use super::{harden, kmeans_pp, rows, sq_dist, ClusterParams, ClusterSolution, FitConfig};
use crate::error::{domain, Result};
use crate::rng;
use crate::Matrix;

fn memberships_into(points: &[Vec<f64>], centres: &[Vec<f64>], m: f64, u: &mut Matrix) {
    let k = centres.len();
    let power = 1.0 / (m - 1.0);
    let mut d2 = vec![0.0; k];
    for (i, x) in points.iter().enumerate() {
        for (j, c) in centres.iter().enumerate() {
            d2[j] = sq_dist(x, c);
        }
        if let Some(hit) = d2.iter().position(|&d| d == 0.0) {
            for j in 0..k {
                u[(i, j)] = if j == hit { 1.0 } else { 0.0 };
            }
            continue;
        }
        // u_ij = 1 / sum_l (d_ij / d_il)^(2/(m-1)), computed relative to the
        // closest centre for stability
        let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = d2.iter().map(|&d| (dmin / d).powf(power)).collect();
        let total: f64 = w.iter().sum();
        for j in 0..k {
            u[(i, j)] = w[j] / total;
        }
    }
}

/// Fuzzy memberships of each row to fixed centres (rows of `centroids`).
pub fn fuzzy_memberships(data: &Matrix, centroids: &Matrix, m: f64) -> Result<Matrix> {
    if !(m > 1.0) {
        return Err(domain(format!("fuzzifier must be > 1, got {m}")));
    }
    if data.ncols() != centroids.ncols() {
        return Err(domain("centroid dimension does not match data"));
    }
    let mut u = Matrix::zeros(data.nrows(), centroids.nrows());
    memberships_into(&rows(data), &rows(centroids), m, &mut u);
    Ok(u)
}

fn objective(points: &[Vec<f64>], centres: &[Vec<f64>], u: &Matrix, m: f64) -> f64 {
    let mut j_m = 0.0;
    for (i, x) in points.iter().enumerate() {
        for (j, c) in centres.iter().enumerate() {
            j_m += u[(i, j)].powf(m) * sq_dist(x, c);
        }
    }
    j_m
}

fn update_centres(points: &[Vec<f64>], u: &Matrix, m: f64, centres: &mut [Vec<f64>]) {
    let d = points[0].len();
    for (j, c) in centres.iter_mut().enumerate() {
        let mut acc = vec![0.0; d];
        let mut w_total = 0.0;
        for (i, x) in points.iter().enumerate() {
            let w = u[(i, j)].powf(m);
            w_total += w;
            for (a, v) in acc.iter_mut().zip(x) {
                *a += w * v;
            }
        }
        if w_total > 0.0 {
            for (cv, a) in c.iter_mut().zip(acc) {
                *cv = a / w_total;
            }
        }
    }
}

/// Fuzzy c-means with fuzzifier `cfg.fuzzifier_m`, best of `cfg.restarts`
/// k-means++ starts by objective.
pub fn cmeans(data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
    cfg.validate(data.nrows())?;
    let points = rows(data);
    let m = cfg.fuzzifier_m;
    let mut stream = rng::from_seed(cfg.seed);
    let mut best: Option<(f64, Vec<Vec<f64>>, Matrix, usize, bool)> = None;
    for _ in 0..cfg.restarts {
        let mut centres = kmeans_pp(&points, cfg.k, &mut stream);
        let mut u = Matrix::zeros(points.len(), cfg.k);
        let mut prev = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        let mut obj = f64::INFINITY;
        while iterations < cfg.max_iter {
            iterations += 1;
            memberships_into(&points, &centres, m, &mut u);
            update_centres(&points, &u, m, &mut centres);
            memberships_into(&points, &centres, m, &mut u);
            obj = objective(&points, &centres, &u, m);
            if prev.is_finite() && (prev - obj).abs() <= cfg.tol * prev.abs().max(f64::MIN_POSITIVE)
            {
                converged = true;
                break;
            }
            prev = obj;
        }
        if best.as_ref().is_none_or(|b| obj < b.0) {
            best = Some((obj, centres, u, iterations, converged));
        }
    }
    let (obj, centres, u, iterations, converged) = best.expect("at least one restart");
    let centroids = Matrix::from_fn(cfg.k, data.ncols(), |j, c| centres[j][c]);
    Ok(ClusterSolution {
        hard_labels: harden(&u),
        soft_memberships: Some(u),
        k: cfg.k,
        params: ClusterParams::Centroids(centroids),
        log_likelihood: None,
        n_params: None,
        converged,
        iterations,
        objective: obj,
        log_likelihood_trace: Vec::new(),
    })
}
