use rand::Rng;

use super::{rows, sq_dist, ClusterParams, ClusterSolution, FitConfig};
use crate::error::Result;
use crate::rng::{self, Stream};
use crate::Matrix;

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest chosen centre.
pub fn kmeans_pp(points: &[Vec<f64>], k: usize, stream: &mut Stream) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centres = vec![points[stream.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|x| sq_dist(x, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = nearest.iter().sum();
        let idx = if total > 0.0 {
            let mut target = stream.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            stream.random_range(0..n)
        };
        centres.push(points[idx].clone());
        for (i, x) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(x, &centres[centres.len() - 1]));
        }
    }
    centres
}

/// Within-cluster sum of squared distances to cluster means.
pub fn wcss(data: &Matrix, labels: &[usize]) -> f64 {
    let points = rows(data);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let centres = means(&points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(x, &l)| centres[l].as_ref().map_or(0.0, |c| sq_dist(x, c)))
        .sum()
}

fn means(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Option<Vec<f64>>> {
    let d = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (x, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(x) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
        .collect()
}

fn nearest(x: &[f64], centres: &[Vec<f64>]) -> (usize, f64) {
    centres
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(x, c)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

struct Run {
    labels: Vec<usize>,
    centres: Vec<Vec<f64>>,
    wcss: f64,
    iterations: usize,
    converged: bool,
}

fn lloyd(points: &[Vec<f64>], mut centres: Vec<Vec<f64>>, cfg: &FitConfig) -> Run {
    let n = points.len();
    let k = centres.len();
    let mut labels = vec![usize::MAX; n];
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, x) in points.iter().enumerate() {
            let (j, d) = nearest(x, &centres);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
            dists[i] = d;
        }
        // reseed empty clusters on the points farthest from their centre
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] == 0 {
                let (far, _) = dists
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| counts[labels[*i]] > 1)
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |b, (i, &d)| if d > b.1 { (i, d) } else { b },
                    );
                counts[labels[far]] -= 1;
                labels[far] = j;
                counts[j] = 1;
                dists[far] = 0.0;
                changed = true;
            }
        }
        for (j, m) in means(points, &labels, k).into_iter().enumerate() {
            if let Some(m) = m {
                centres[j] = m;
            }
        }
        let obj: f64 = points
            .iter()
            .zip(&labels)
            .map(|(x, &l)| sq_dist(x, &centres[l]))
            .sum();
        let small_change = prev.is_finite() && (prev - obj).abs() <= cfg.tol * prev.abs();
        prev = obj;
        if !changed || small_change {
            converged = true;
            break;
        }
    }
    Run {
        labels,
        centres,
        wcss: prev,
        iterations,
        converged,
    }
}

/// Lloyd's algorithm from k-means++ starts; the restart with the lowest
/// WCSS wins (earliest on ties).
pub fn kmeans(data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
    cfg.validate(data.nrows())?;
    let points = rows(data);
    let mut stream = rng::from_seed(cfg.seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.restarts {
        let init = kmeans_pp(&points, cfg.k, &mut stream);
        let run = lloyd(&points, init, cfg);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let d = data.ncols();
    let centroids = Matrix::from_fn(cfg.k, d, |j, c| best.centres[j][c]);
    Ok(ClusterSolution {
        hard_labels: best.labels,
        soft_memberships: None,
        k: cfg.k,
        params: ClusterParams::Centroids(centroids),
        log_likelihood: None,
        n_params: None,
        converged: best.converged,
        iterations: best.iterations,
        objective: best.wcss,
        log_likelihood_trace: Vec::new(),
    })
}
