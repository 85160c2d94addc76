use serde::{Deserialize, Serialize};

use super::{
    estimate_power, PowerCell, PowerEstimate, DEFAULT_REPS, DEFAULT_SEED, DEFAULT_TARGET_POWER,
};
use crate::cluster::Method;
use crate::effect_size::{min_features, Rounding};
use crate::error::{domain, Result};

/// Per-group sample sizes searched by default.
pub const DEFAULT_N_GRID: [usize; 12] =
    [30, 50, 75, 100, 150, 200, 500, 750, 1000, 1500, 2000, 5000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub grid: Vec<usize>,
    pub target_power: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub workers: Option<usize>,
    /// Upper bound on simulated replicates; `None` is unlimited.
    pub budget: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grid: DEFAULT_N_GRID.to_vec(),
            target_power: DEFAULT_TARGET_POWER,
            reps: DEFAULT_REPS,
            master_seed: DEFAULT_SEED,
            workers: None,
            budget: None,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(domain("sample-size grid is empty"));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("sample-size grid must be strictly increasing"));
        }
        if !(0.0..=1.0).contains(&self.target_power) {
            return Err(domain(format!(
                "target power must lie in [0, 1], got {}",
                self.target_power
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Smallest grid value reaching the target, if any.
    pub n: Option<usize>,
    /// Every cell evaluated, in grid order.
    pub estimates: Vec<PowerEstimate>,
    /// The budget ran out before the search finished.
    pub exhausted: bool,
}

impl SearchResult {
    pub fn found(&self) -> Option<&PowerEstimate> {
        let n = self.n?;
        self.estimates.iter().find(|e| e.cell.n_per_group == n)
    }
}

/// Scans `opts.grid` in increasing order and stops at the first sample size
/// whose estimated power reaches the target.
pub fn min_sample_search(
    method: Method,
    p: usize,
    lambda: f64,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    let mut used = 0;
    search_with_budget(method, p, lambda, opts, &mut used)
}

fn search_with_budget(
    method: Method,
    p: usize,
    lambda: f64,
    opts: &SearchOptions,
    used: &mut usize,
) -> Result<SearchResult> {
    opts.validate()?;
    let mut estimates = Vec::new();
    for &n in &opts.grid {
        if opts.budget.is_some_and(|b| *used + opts.reps > b) {
            return Ok(SearchResult {
                n: None,
                estimates,
                exhausted: true,
            });
        }
        let cell = PowerCell::new(method, n, p, lambda)
            .with_reps(opts.reps)
            .with_seed(opts.master_seed);
        let est = estimate_power(&cell, opts.workers)?;
        *used += opts.reps;
        log::info!(
            "{method} n={n} p={p} lambda={lambda}: power {:.2}",
            est.power
        );
        let hit = est.power >= opts.target_power;
        estimates.push(est);
        if hit {
            return Ok(SearchResult {
                n: Some(n),
                estimates,
                exhausted: false,
            });
        }
    }
    Ok(SearchResult {
        n: None,
        estimates,
        exhausted: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Found,
    /// No grid value reached the target.
    NoDetection,
    /// Not evaluated within the replicate budget.
    Skipped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowOption {
    FewerFeatures,
    FewerObservations,
    /// Fewest features and fewest observations at once.
    Both,
    /// Another row needs no more features and no more observations.
    Dominated,
    None,
}

impl RowOption {
    pub fn label(&self) -> &'static str {
        match self {
            RowOption::FewerFeatures => "fewer-features",
            RowOption::FewerObservations => "fewer-observations",
            RowOption::Both => "both",
            RowOption::Dominated => "dominated",
            RowOption::None => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub method: Method,
    pub lambda: f64,
    pub delta_target: f64,
    pub p: usize,
    pub n: Option<usize>,
    pub power: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub status: RowStatus,
    pub option: RowOption,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
    pub replicates_used: usize,
}

/// For each method and `lambda`, converts every target centroid distance to
/// a feature count and searches for the smallest sample size with enough
/// power. Among found rows, the one with fewest features and the one with
/// fewest observations are labelled; rows no better on either axis are
/// marked dominated.
pub fn build_reference_table(
    methods: &[Method],
    lambdas: &[f64],
    delta_targets: &[f64],
    opts: &SearchOptions,
) -> Result<ReferenceTable> {
    opts.validate()?;
    let mut rows = Vec::new();
    let mut used = 0;
    let total = methods.len() * lambdas.len();
    let mut done = 0;
    for &method in methods {
        for &lambda in lambdas {
            let mut family = Vec::new();
            let mut ps: Vec<(f64, usize)> = Vec::new();
            for &delta in delta_targets {
                let p = min_features(delta, lambda, Rounding::Nearest)?;
                if ps.iter().any(|&(_, q)| q == p) {
                    continue;
                }
                ps.push((delta, p));
            }
            for (delta, p) in ps {
                let res = search_with_budget(method, p, lambda, opts, &mut used)?;
                let found = res.found();
                let status = if res.exhausted {
                    RowStatus::Skipped
                } else if found.is_some() {
                    RowStatus::Found
                } else {
                    RowStatus::NoDetection
                };
                family.push(ReferenceRow {
                    method,
                    lambda,
                    delta_target: delta,
                    p,
                    n: res.n,
                    power: found.map(|e| e.power),
                    ci95: found.map(|e| e.wilson_ci95),
                    status,
                    option: RowOption::None,
                });
            }
            label_options(&mut family);
            rows.extend(family);
            done += 1;
            log::info!("[{done}/{total}] {method} lambda={lambda} done ({used} replicates so far)");
        }
    }
    Ok(ReferenceTable {
        rows,
        replicates_used: used,
    })
}

fn label_options(rows: &mut [ReferenceRow]) {
    let found: Vec<(usize, usize, usize)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.n.map(|n| (i, r.p, n)))
        .collect();
    if found.is_empty() {
        return;
    }
    let min_p = found.iter().map(|f| f.1).min().expect("non-empty");
    let min_n = found.iter().map(|f| f.2).min().expect("non-empty");
    // ties on one axis are broken by the other
    let best_p = found
        .iter()
        .filter(|f| f.1 == min_p)
        .min_by_key(|f| f.2)
        .expect("non-empty")
        .0;
    let best_n = found
        .iter()
        .filter(|f| f.2 == min_n)
        .min_by_key(|f| f.1)
        .expect("non-empty")
        .0;
    for &(i, _, _) in &found {
        rows[i].option = match (i == best_p, i == best_n) {
            (true, true) => RowOption::Both,
            (true, false) => RowOption::FewerFeatures,
            (false, true) => RowOption::FewerObservations,
            (false, false) => RowOption::Dominated,
        };
    }
}
