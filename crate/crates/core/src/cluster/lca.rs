//! Latent class analysis: a mixture of independent Bernoulli items.

use rand::Rng;

use super::{harden, log_sum_exp, ClusterParams, ClusterSolution, FitConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::Matrix;

const PROB_CLAMP: f64 = 1e-6;

struct Params {
    weights: Vec<f64>,
    /// k×p item probabilities.
    probs: Matrix,
}

fn m_step(data: &Matrix, resp: &Matrix) -> Params {
    let (n, p) = data.shape();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut probs = Matrix::zeros(k, p);
    for j in 0..k {
        let nk: f64 = resp.column(j).sum();
        weights.push(nk / n as f64);
        for f in 0..p {
            let hits: f64 = (0..n).map(|i| resp[(i, j)] * data[(i, f)]).sum();
            let q = if nk > 0.0 { hits / nk } else { 0.5 };
            probs[(j, f)] = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        }
    }
    Params { weights, probs }
}

fn e_step(data: &Matrix, params: &Params, resp: &mut Matrix) -> f64 {
    let (n, p) = data.shape();
    let k = params.weights.len();
    let log_q = params.probs.map(f64::ln);
    let log_1q = params.probs.map(|q| (1.0 - q).ln());
    let mut logp = vec![0.0; k];
    let mut ll = 0.0;
    for i in 0..n {
        for j in 0..k {
            let mut s = params.weights[j].ln();
            for f in 0..p {
                s += if data[(i, f)] > 0.5 {
                    log_q[(j, f)]
                } else {
                    log_1q[(j, f)]
                };
            }
            logp[j] = s;
        }
        let lse = log_sum_exp(&logp);
        ll += lse;
        for j in 0..k {
            resp[(i, j)] = (logp[j] - lse).exp();
        }
    }
    ll
}

struct Run {
    params: Params,
    resp: Matrix,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn run_em(data: &Matrix, mut resp: Matrix, cfg: &FitConfig) -> Run {
    let mut params = m_step(data, &resp);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let ll = e_step(data, &params, &mut resp);
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() <= cfg.tol * f64::abs(prev).max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if iterations >= cfg.max_iter {
            break;
        }
        params = m_step(data, &resp);
    }
    Run {
        params,
        resp,
        trace,
        converged,
        iterations,
    }
}

/// Bernoulli mixture fitted by EM from random responsibilities; best of
/// `cfg.restarts` by log-likelihood. Entries must be 0 or 1.
pub fn lca(data: &Matrix, cfg: &FitConfig) -> Result<ClusterSolution> {
    cfg.validate(data.nrows())?;
    if data.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidData(
            "latent class analysis needs 0/1 data".into(),
        ));
    }
    let (n, p) = data.shape();
    let k = cfg.k;
    let mut stream = rng::from_seed(cfg.seed);
    // a single class has a closed-form optimum; one run is enough
    let restarts = if k == 1 { 1 } else { cfg.restarts };
    let mut best: Option<Run> = None;
    for _ in 0..restarts {
        let mut resp = Matrix::from_fn(n, k, |_, _| stream.random::<f64>() + 1e-3);
        for mut row in resp.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        let run = run_em(data, resp, cfg);
        let ll = *run.trace.last().expect("at least one E-step");
        if best
            .as_ref()
            .is_none_or(|b| ll > *b.trace.last().expect("non-empty"))
        {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let ll = *best.trace.last().expect("non-empty");
    Ok(ClusterSolution {
        hard_labels: harden(&best.resp),
        soft_memberships: Some(best.resp),
        k,
        params: ClusterParams::Bernoulli {
            weights: best.params.weights,
            probabilities: best.params.probs,
        },
        log_likelihood: Some(ll),
        n_params: Some(k * p + (k - 1)),
        converged: best.converged,
        iterations: best.iterations,
        objective: -ll,
        log_likelihood_trace: best.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_util::assert_row_stochastic;
    use super::*;

    fn bernoulli_classes(n: usize, p: usize, lo: f64, hi: f64, seed: u64) -> (Matrix, Vec<usize>) {
        let mut s = rng::from_seed(seed);
        let labels: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
        let data = Matrix::from_fn(2 * n, p, |i, _| {
            let q = if labels[i] == 0 { lo } else { hi };
            if s.random::<f64>() < q {
                1.0
            } else {
                0.0
            }
        });
        (data, labels)
    }

    #[test]
    fn single_class_is_column_means() {
        let (x, _) = bernoulli_classes(50, 6, 0.3, 0.7, 1);
        let s = lca(&x, &FitConfig::default().with_k(1)).unwrap();
        let ClusterParams::Bernoulli { probabilities, .. } = &s.params else {
            panic!()
        };
        let mut direct = 0.0;
        for f in 0..6 {
            let q = x.column(f).mean();
            assert!((probabilities[(0, f)] - q).abs() < 1e-12);
            for i in 0..x.nrows() {
                direct += if x[(i, f)] == 1.0 {
                    q.ln()
                } else {
                    (1.0 - q).ln()
                };
            }
        }
        assert!((s.log_likelihood.unwrap() - direct).abs() < 1e-9 * direct.abs());
        assert_eq!(s.n_params, Some(6));
    }

    #[test]
    fn log_likelihood_never_decreases() {
        for seed in 0..100 {
            let (x, _) = bernoulli_classes(30, 8, 0.3, 0.6, 200 + seed);
            let s = lca(
                &x,
                &FitConfig {
                    restarts: 2,
                    ..FitConfig::default()
                }
                .with_seed(seed),
            )
            .unwrap();
            for w in s.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
            }
        }
    }

    #[test]
    fn recovers_distinct_classes() {
        let (x, truth) = bernoulli_classes(500, 10, 0.1, 0.9, 3);
        let s = lca(&x, &FitConfig::default()).unwrap();
        let agree = s
            .hard_labels
            .iter()
            .zip(&truth)
            .filter(|(a, b)| a == b)
            .count();
        let accuracy = agree.max(1000 - agree) as f64 / 1000.0;
        assert!(accuracy >= 0.99, "accuracy {accuracy}");
        assert_row_stochastic(s.soft_memberships.as_ref().unwrap());
        assert_eq!(s.n_params, Some(21));
    }

    #[test]
    fn probabilities_are_clamped() {
        let x = Matrix::from_fn(10, 3, |i, _| if i < 5 { 1.0 } else { 0.0 });
        let s = lca(&x, &FitConfig::default()).unwrap();
        let ClusterParams::Bernoulli { probabilities, .. } = &s.params else {
            panic!()
        };
        assert!(probabilities
            .iter()
            .all(|&q| (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&q)));
    }

    #[test]
    fn rejects_non_binary() {
        let x = Matrix::from_element(4, 2, 0.5);
        assert!(lca(&x, &FitConfig::default()).is_err());
    }
}
