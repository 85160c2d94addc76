//! Agglomerative clustering with Ward linkage.
//!
//! Cluster dissimilarities follow the Lance–Williams recurrence on squared
//! Euclidean distances, under which `d(I, J) / 2` is exactly the increase in
//! within-cluster sum of squares caused by merging `I` and `J`.

use super::{rows, sq_dist, ClusterParams, ClusterSolution};
use crate::error::{domain, Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    /// Surviving slot (the lower id).
    a: usize,
    b: usize,
    /// Increase in within-cluster sum of squares.
    cost: f64,
}

struct Linkage {
    merges: Vec<Merge>,
    assignment: Vec<usize>,
}

fn linkage(points: &[Vec<f64>], stop_at: usize) -> Linkage {
    let n = points.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut assignment: Vec<usize> = (0..n).collect();

    // nearest active partner with a higher id; lowest id wins ties
    let row_min = |a: usize, dist: &[f64], active: &[bool]| -> (usize, f64) {
        ((a + 1)..n)
            .filter(|&j| active[j])
            .fold((usize::MAX, f64::INFINITY), |b, j| {
                if dist[a * n + j] < b.1 {
                    (j, dist[a * n + j])
                } else {
                    b
                }
            })
    };
    let mut nn: Vec<(usize, f64)> = (0..n).map(|a| row_min(a, &dist, &active)).collect();

    let mut merges = Vec::new();
    let mut clusters = n;
    while clusters > stop_at {
        let (a, (b, d_ab)) = (0..n)
            .filter(|&a| active[a] && nn[a].0 != usize::MAX)
            .map(|a| (a, nn[a]))
            .fold((usize::MAX, (usize::MAX, f64::INFINITY)), |best, cur| {
                if cur.1 .1 < best.1 .1 {
                    cur
                } else {
                    best
                }
            });
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let nk = size[k] as f64;
            let d = ((na + nk) * dist[a * n + k] + (nb + nk) * dist[b * n + k] - nk * d_ab)
                / (na + nb + nk);
            dist[a * n + k] = d;
            dist[k * n + a] = d;
        }
        active[b] = false;
        size[a] += size[b];
        for s in assignment.iter_mut() {
            if *s == b {
                *s = a;
            }
        }
        merges.push(Merge {
            a,
            b,
            cost: d_ab / 2.0,
        });
        clusters -= 1;

        for r in 0..n {
            if !active[r] {
                continue;
            }
            if r == a || nn[r].0 == a || nn[r].0 == b {
                nn[r] = row_min(r, &dist, &active);
            } else if r < a {
                let d = dist[r * n + a];
                if d < nn[r].1 || (d == nn[r].1 && a < nn[r].0) {
                    nn[r] = (a, d);
                }
            }
        }
    }
    Linkage { merges, assignment }
}

/// Ward clustering cut at `k` clusters. Labels are numbered in order of
/// first appearance.
pub fn ward(data: &Matrix, k: usize) -> Result<ClusterSolution> {
    let n = data.nrows();
    if k == 0 {
        return Err(domain("k must be at least 1"));
    }
    if n < k {
        return Err(Error::TooManyClusters { k, n });
    }
    let points = rows(data);
    let link = linkage(&points, k);
    let mut slot_label = vec![usize::MAX; n];
    let mut next = 0;
    let labels: Vec<usize> = link
        .assignment
        .iter()
        .map(|&s| {
            if slot_label[s] == usize::MAX {
                slot_label[s] = next;
                next += 1;
            }
            slot_label[s]
        })
        .collect();
    let d = data.ncols();
    let mut centroids = Matrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (x, &l) in points.iter().zip(&labels) {
        counts[l] += 1;
        for j in 0..d {
            centroids[(l, j)] += x[j];
        }
    }
    for l in 0..k {
        for j in 0..d {
            centroids[(l, j)] /= counts[l] as f64;
        }
    }
    Ok(ClusterSolution {
        hard_labels: labels,
        soft_memberships: None,
        k,
        params: ClusterParams::Centroids(centroids),
        log_likelihood: None,
        n_params: None,
        converged: true,
        iterations: link.merges.len(),
        objective: link.merges.iter().map(|m| m.cost).sum(),
        log_likelihood_trace: Vec::new(),
    })
}

/// The pair of observations joined first, with its variance increase.
pub fn ward_first_merge(data: &Matrix) -> Result<(usize, usize, f64)> {
    if data.nrows() < 2 {
        return Err(domain("need at least 2 observations"));
    }
    let link = linkage(&rows(data), data.nrows() - 1);
    let m = link.merges[0];
    Ok((m.a, m.b, m.cost))
}
