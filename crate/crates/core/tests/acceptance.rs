//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use subgroup_power::cluster::{FitConfig, Method};
use subgroup_power::datagen::Correlation;
use subgroup_power::effect_size::{expected_delta, lambda_from_mean, min_features, Rounding};
use subgroup_power::evaluate::silhouette;
use subgroup_power::io::{write_results, ResultRow};
use subgroup_power::power::{
    centroid_shift_experiment, estimate_power, min_sample_search, PowerCell, SearchOptions,
    ShiftOptions,
};
use subgroup_power::reduce::{mds, pca, squared_distances, Reducer};
use subgroup_power::{rng, Matrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: u32, name: &str, o: &Outcome) {
    println!(
        "criterion {id} [{}] {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn equations() -> Outcome {
    let expected: [[usize; 5]; 3] = [
        [5, 20, 81, 324, 1296],
        [9, 36, 144, 576, 2304],
        [14, 56, 225, 900, 3600],
    ];
    let lambdas = [0.75, 1.5, 3.0, 6.0, 12.0];
    let mut ok = true;
    let mut produced = std::collections::BTreeSet::new();
    for (i, delta) in [3.0, 4.0, 5.0].into_iter().enumerate() {
        for (j, &lambda) in lambdas.iter().enumerate() {
            let p = min_features(delta, lambda, Rounding::Nearest).unwrap();
            ok &= p == expected[i][j];
            produced.insert(p);
            let back = expected_delta(p, lambda).unwrap();
            ok &= (min_features(back, lambda, Rounding::Nearest).unwrap() == p)
                && (back - (p as f64).sqrt() / lambda).abs() < 1e-9;
        }
    }
    let paper = [9, 14, 20, 36, 56, 81, 144, 225, 324, 576, 900, 1296, 2304];
    ok &= paper.iter().all(|p| produced.contains(p));
    let lam = lambda_from_mean(0.683).unwrap();
    ok &= (lam - 1.464).abs() <= 1e-3;
    Outcome {
        pass: ok,
        detail: format!("feature counts {produced:?}, lambda_from_mean(0.683)={lam:.4}"),
    }
}

fn desk_cells() -> Outcome {
    let cells = [
        (Method::KMeans, 30, 36, 1.5),
        (Method::Gmm, 30, 36, 1.5),
        (Method::Ward, 30, 36, 1.5),
        (Method::CMeans, 100, 20, 1.5),
        (Method::Lpa, 30, 36, 1.5),
        (Method::KMeans, 75, 9, 0.75),
        (Method::Lca, 50, 9, 0.75),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (m, n, p, lambda) in cells {
        let est = estimate_power(&PowerCell::new(m, n, p, lambda), None).unwrap();
        ok &= est.power >= 0.80;
        detail.push(format!("{m}(n={n},p={p},l={lambda})={:.2}", est.power));
    }
    Outcome {
        pass: ok,
        detail: detail.join(" "),
    }
}

fn underpowered_cells() -> Outcome {
    let km = estimate_power(&PowerCell::new(Method::KMeans, 30, 9, 12.0), None).unwrap();
    let opts = SearchOptions {
        grid: vec![30, 100],
        ..SearchOptions::default()
    };
    let lca = min_sample_search(Method::Lca, 81, 3.0, &opts).unwrap();
    let lca_powers: Vec<String> = lca
        .estimates
        .iter()
        .map(|e| format!("n={}:{:.2}", e.cell.n_per_group, e.power))
        .collect();
    let ok = km.power <= 0.2
        && lca.n.is_none()
        && lca.estimates.len() == 2
        && lca.estimates.iter().all(|e| e.power < 0.9);
    Outcome {
        pass: ok,
        detail: format!(
            "kmeans(n=30,p=9,l=12)={:.2}; lca(p=81,l=3) {}",
            km.power,
            lca_powers.join(" ")
        ),
    }
}

fn null_calibration() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in Method::ALL {
        let cell = PowerCell::null(m, 100, 20).unwrap().with_reps(100);
        let est = estimate_power(&cell, None).unwrap();
        let limit = if m == Method::Lca { 0.10 } else { 0.05 };
        ok &= est.power <= limit;
        detail.push(format!("{m}={:.2}", est.power));
    }
    Outcome {
        pass: ok,
        detail: detail.join(" "),
    }
}

fn reduction_ordering() -> Outcome {
    let opts = ShiftOptions {
        reps: 10,
        n_per_group: 200,
        ..ShiftOptions::default()
    };
    let rows = centroid_shift_experiment(
        &[12.0],
        &[100],
        &[
            Correlation::Random { strength: 0.5 },
            Correlation::Independent,
        ],
        &[Reducer::Pca, Reducer::Mds],
        &opts,
    )
    .unwrap();
    let (cp, cm, ip, im) = (&rows[0], &rows[1], &rows[2], &rows[3]);
    let sd = ip.sd.unwrap().min(im.sd.unwrap());
    let ok = cp.mean < cm.mean && (ip.mean - im.mean).abs() <= sd;
    Outcome {
        pass: ok,
        detail: format!(
            "correlated pca {:.3} vs mds {:.3}; independent pca {:.3}±{:.3} vs mds {:.3}±{:.3}",
            cp.mean,
            cm.mean,
            ip.mean,
            ip.sd.unwrap(),
            im.mean,
            im.sd.unwrap()
        ),
    }
}

fn random_matrix(n: usize, d: usize, s: &mut rng::Stream) -> Matrix {
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(s))
}

fn dist(x: &Matrix, i: usize, j: usize) -> f64 {
    (x.row(i) - x.row(j)).norm()
}

fn naive_silhouette(x: &Matrix, labels: &[usize]) -> f64 {
    let n = x.nrows();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist(x, i, j);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

fn wcss(x: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in 0..2 {
        let idx: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == c).collect();
        if idx.is_empty() {
            continue;
        }
        let mut centre = vec![0.0; x.ncols()];
        for &i in &idx {
            for (j, v) in centre.iter_mut().enumerate() {
                *v += x[(i, j)] / idx.len() as f64;
            }
        }
        for &i in &idx {
            total += (0..x.ncols())
                .map(|j| (x[(i, j)] - centre[j]).powi(2))
                .sum::<f64>();
        }
    }
    total
}

fn oracles() -> Outcome {
    let mut s = rng::from_seed(99);
    let mut fails = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = s.random_range(4..=50);
        let x = random_matrix(n, 3, &mut s);
        let mut labels: Vec<usize> = (0..n).map(|_| s.random_range(0..3)).collect();
        labels[0] = 0;
        labels[1] = 1;
        worst = worst.max((silhouette(&x, &labels).unwrap() - naive_silhouette(&x, &labels)).abs());
    }
    if worst > 1e-12 {
        fails.push(format!("silhouette off by {worst:e}"));
    }

    for t in 0..50u64 {
        let n = 4 + (t as usize % 5);
        let x = random_matrix(n, 2, &mut s);
        let best = (1..(1u32 << n) - 1)
            .map(|mask| {
                wcss(
                    &x,
                    &(0..n)
                        .map(|i| ((mask >> i) & 1) as usize)
                        .collect::<Vec<_>>(),
                )
            })
            .fold(f64::INFINITY, f64::min);
        let fit = Method::KMeans
            .fit(
                &x,
                &FitConfig {
                    restarts: 20,
                    ..FitConfig::default()
                }
                .with_seed(t),
            )
            .unwrap();
        if wcss(&x, &fit.hard_labels) > best + 1e-9 {
            fails.push(format!("k-means not optimal on instance {t}"));
        }
    }

    for _ in 0..50 {
        let n = s.random_range(3..=20);
        let x = random_matrix(n, 3, &mut s);
        let (a, b, cost) = subgroup_power::cluster::ward_first_merge(&x).unwrap();
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let c = dist(&x, i, j).powi(2) / 2.0;
                if c < best.0 {
                    best = (c, i, j);
                }
            }
        }
        if (a, b) != (best.1, best.2) || (cost - best.0).abs() > 1e-12 * best.0.max(1.0) {
            fails.push("ward first merge differs from direct scan".into());
        }
    }

    let mut drops = 0;
    for t in 0..100u64 {
        let x = random_matrix(40, 2, &mut s);
        let bin = x.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let cfg = FitConfig {
            restarts: 1,
            ..FitConfig::default()
        }
        .with_seed(t);
        for (m, data) in [(Method::Gmm, &x), (Method::Lpa, &x), (Method::Lca, &bin)] {
            let fit = m.fit(data, &cfg).unwrap();
            drops += fit
                .log_likelihood_trace
                .windows(2)
                .filter(|w| w[1] < w[0] - 1e-9 * w[0].abs())
                .count();
        }
    }
    if drops > 0 {
        fails.push(format!("{drops} log-likelihood decreases"));
    }

    let mut worst_mds = 0.0f64;
    for _ in 0..20 {
        let x = random_matrix(30, 6, &mut s);
        let a = squared_distances(&mds(&x, 6).unwrap().coords);
        let b = squared_distances(&pca(&x, 6).unwrap().coords);
        let c = squared_distances(&x);
        worst_mds = worst_mds.max((&a - &b).amax()).max((&a - &c).amax());
    }
    if worst_mds > 1e-6 {
        fails.push(format!(
            "classical MDS and PCA distances differ by {worst_mds:e}"
        ));
    }

    Outcome {
        pass: fails.is_empty(),
        detail: if fails.is_empty() {
            format!("silhouette max err {worst:.1e}, mds/pca max err {worst_mds:.1e}")
        } else {
            fails.join("; ")
        },
    }
}

fn csv_bytes(cell: &PowerCell, workers: usize) -> Vec<u8> {
    let est = estimate_power(cell, Some(workers)).unwrap();
    let mut out = Vec::new();
    write_results(&mut out, &[ResultRow::from_estimate(&est, false)]).unwrap();
    out
}

fn determinism() -> Outcome {
    let cells = [
        PowerCell::new(Method::KMeans, 30, 36, 1.5).with_seed(7),
        PowerCell::new(Method::Gmm, 30, 20, 1.5).with_reps(20),
        PowerCell::new(Method::Lca, 50, 9, 0.75).with_reps(20),
    ];
    let same = cells.iter().all(|c| csv_bytes(c, 1) == csv_bytes(c, 4));
    Outcome {
        pass: same,
        detail: format!("{} cells compared at 1 and 4 workers", cells.len()),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("equation suite", equations),
        ("desk-scale cells reach power 0.80", desk_cells),
        ("underpowered cells stay underpowered", underpowered_cells),
        ("null calibration", null_calibration),
        (
            "PCA shrinks correlated separation more than MDS",
            reduction_ordering,
        ),
        ("oracle equivalence", oracles),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        report(i as u32 + 1, name, &o);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
