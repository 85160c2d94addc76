use std::collections::BTreeSet;
use std::fmt;
use std::hash::{BuildHasher, Hasher};
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use subgroup_power::cluster::{FitConfig, Method};
use subgroup_power::datagen::{generate, Correlation, DatasetSpec, EffectSource, FeatureKind};
use subgroup_power::effect_size::{
    expected_delta, interpret_delta, min_features, EffectVector, Rounding,
};
use subgroup_power::io::{
    fmt_sig, read_dataset_file, results_json, upsert_results, write_dataset, write_results,
    ResultRow,
};
use subgroup_power::power::{
    analyze, build_reference_table, centroid_shift_experiment, estimate_power, min_sample_search,
    select_k, sensitivity, PowerCell, PowerEstimate, SearchOptions, ShiftOptions,
};
use subgroup_power::reduce::Reducer;

use crate::{Cli, Command, Figure, Format, SimArgs};

/// Invalid combination of arguments that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = std::collections::hash_map::RandomState::new()
            .build_hasher()
            .finish();
        eprintln!("seed={s}");
        s
    })
}

fn correlation(strength: f64) -> Correlation {
    if strength == 0.0 {
        Correlation::Independent
    } else {
        Correlation::Random { strength }
    }
}

fn correlation_label(c: &Correlation) -> String {
    match c {
        Correlation::Independent => "0".into(),
        Correlation::Random { strength } => fmt_sig(*strength),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn csv_bytes<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// JSON for estimates; wall time is dropped unless requested so that
/// identical runs give identical files.
fn estimates_json(
    config: Value,
    estimates: &[PowerEstimate],
    record_runtime: bool,
) -> Result<Value> {
    let mut v = results_json(config, estimates)?;
    if !record_runtime {
        for r in v["results"].as_array_mut().into_iter().flatten() {
            r.as_object_mut().map(|o| o.remove("runtime_seconds"));
        }
    }
    Ok(v)
}

fn summary(est: &PowerEstimate) -> String {
    let c = &est.cell;
    format!(
        "{} n={} p={} lambda={}: power={} ci95=[{}, {}] rejections={}/{} seed={}",
        c.method,
        c.n_per_group,
        c.p,
        c.lambda().map_or_else(|| "fixed".to_string(), fmt_sig),
        fmt_sig(est.power),
        fmt_sig(est.wilson_ci95.0),
        fmt_sig(est.wilson_ci95.1),
        est.rejections,
        c.reps,
        c.master_seed
    )
}

fn write_estimates(
    format: Format,
    out: Option<&Path>,
    config: Value,
    estimates: &[PowerEstimate],
    record_runtime: bool,
) -> Result<()> {
    match format {
        Format::Json => emit_json(out, &estimates_json(config, estimates, record_runtime)?),
        Format::Csv => {
            let rows: Vec<ResultRow> = estimates
                .iter()
                .map(|e| ResultRow::from_estimate(e, record_runtime))
                .collect();
            match out {
                Some(path) => Ok(upsert_results(path, &rows)
                    .with_context(|| format!("writing {}", path.display()))?),
                None => Ok(write_results(std::io::stdout().lock(), &rows)?),
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    if workers == Some(0) {
        return Err(usage("--workers must be at least 1"));
    }
    match cli.command {
        Command::Delta { features, lambda } => {
            let d = expected_delta(features, lambda)?;
            if cli.format == Format::Json {
                return emit_json(
                    None,
                    &json!({"p": features, "lambda": lambda, "delta_hat": d, "interpretation": interpret_delta(d)}),
                );
            }
            println!(
                "delta_hat={} interpretation={}",
                fmt_sig(d),
                interpret_delta(d)
            );
        }
        Command::Features {
            delta,
            lambda,
            ceil,
        } => {
            let rounding = if ceil {
                Rounding::Ceil
            } else {
                Rounding::Nearest
            };
            let p = min_features(delta, lambda, rounding)?;
            if cli.format == Format::Json {
                return emit_json(None, &json!({"delta": delta, "lambda": lambda, "p": p}));
            }
            println!("{p}");
        }
        Command::Power {
            method,
            n,
            p,
            lambda,
            null,
            reducer,
            correlation: strength,
            record_runtime,
            sim,
        } => {
            let SimArgs { reps, seed, out } = sim;
            let seed = resolve_seed(seed);
            let mut cell = match lambda {
                Some(l) => PowerCell::new(method, n, p, l),
                None if null => PowerCell::null(method, n, p)?,
                None => return Err(usage("--lambda or --null is required")),
            };
            cell = cell.with_reps(reps).with_seed(seed);
            if let Some(r) = reducer {
                cell = cell.with_reducer(r);
            }
            cell.correlation = correlation(strength);
            let est = estimate_power(&cell, workers)?;
            let line = summary(&est);
            let config = json!({"command": "power", "seed": seed, "reps": reps});
            write_estimates(
                cli.format,
                out.as_deref(),
                config,
                std::slice::from_ref(&est),
                record_runtime,
            )?;
            if out.is_some() {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
        }
        Command::Search {
            method,
            p,
            lambda,
            power,
            grid,
            sim,
        } => {
            let seed = resolve_seed(sim.seed);
            let opts = SearchOptions {
                grid,
                target_power: power,
                reps: sim.reps,
                master_seed: seed,
                workers,
                budget: None,
            };
            let res = min_sample_search(method, p, lambda, &opts)?;
            let answer = match res.found() {
                Some(e) => format!("n={} power={}", e.cell.n_per_group, fmt_sig(e.power)),
                None => "no detection".to_string(),
            };
            match cli.format {
                Format::Json => {
                    let config = json!({"command": "search", "seed": seed, "reps": sim.reps, "target_power": power});
                    let mut v = estimates_json(config, &res.estimates, false)?;
                    v["n"] = json!(res.n);
                    emit_json(sim.out.as_deref(), &v)?;
                }
                Format::Csv => {
                    if let Some(path) = sim.out.as_deref() {
                        write_estimates(
                            Format::Csv,
                            Some(path),
                            Value::Null,
                            &res.estimates,
                            false,
                        )?;
                    }
                    println!("{answer}");
                }
            }
        }
        Command::Table {
            methods,
            lambdas,
            deltas,
            power,
            grid,
            budget,
            sim,
        } => {
            if methods.is_empty() || lambdas.is_empty() || deltas.is_empty() {
                return Err(usage("methods, lambdas and deltas must be non-empty"));
            }
            let seed = resolve_seed(sim.seed);
            let opts = SearchOptions {
                grid,
                target_power: power,
                reps: sim.reps,
                master_seed: seed,
                workers,
                budget,
            };
            let table = build_reference_table(&methods, &lambdas, &deltas, &opts)?;
            eprintln!("{} replicates simulated", table.replicates_used);
            match cli.format {
                Format::Json => emit_json(
                    sim.out.as_deref(),
                    &json!({"config": {"command": "table", "seed": seed, "reps": sim.reps, "budget": budget},
                            "results": serde_json::to_value(&table.rows)?}),
                )?,
                Format::Csv => {
                    let rows = table.rows.iter().map(|r| {
                        vec![
                            r.method.name().to_string(),
                            fmt_sig(r.lambda),
                            fmt_sig(r.delta_target),
                            r.p.to_string(),
                            r.n.map(|n| n.to_string()).unwrap_or_default(),
                            r.power.map(fmt_sig).unwrap_or_default(),
                            r.ci95.map(|c| fmt_sig(c.0)).unwrap_or_default(),
                            r.ci95.map(|c| fmt_sig(c.1)).unwrap_or_default(),
                            match r.status {
                                subgroup_power::power::RowStatus::Found => "found",
                                subgroup_power::power::RowStatus::NoDetection => "no detection",
                                subgroup_power::power::RowStatus::Skipped => "skipped",
                            }
                            .to_string(),
                            r.option.label().to_string(),
                            seed.to_string(),
                        ]
                    });
                    let header = [
                        "method", "lambda", "delta", "p", "n", "power", "ci_low", "ci_high",
                        "status", "option", "seed",
                    ];
                    emit(sim.out.as_deref(), &csv_bytes(&header, rows)?)?;
                }
            }
        }
        Command::Figure {
            which,
            lambdas,
            points,
            max_features,
            features,
            strengths,
            reducers,
            n,
            reps,
            seed,
            out,
        } => {
            if lambdas.is_empty() {
                return Err(usage("--lambdas must list at least one value"));
            }
            match which {
                Figure::EffectCurves => {
                    effect_curves(cli.format, out.as_deref(), &lambdas, points, max_features)?
                }
                Figure::CentroidShift => {
                    if features.is_empty() || strengths.is_empty() || reducers.is_empty() {
                        return Err(usage(
                            "--features, --strengths and --reducers must be non-empty",
                        ));
                    }
                    let seed = resolve_seed(seed);
                    let correlations: Vec<Correlation> =
                        strengths.iter().map(|&s| correlation(s)).collect();
                    let opts = ShiftOptions {
                        reps,
                        n_per_group: n,
                        dims: 2,
                        master_seed: seed,
                    };
                    let rows = centroid_shift_experiment(
                        &lambdas,
                        &features,
                        &correlations,
                        &reducers,
                        &opts,
                    )?;
                    match cli.format {
                        Format::Json => emit_json(
                            out.as_deref(),
                            &json!({"config": {"command": "figure", "which": "centroid-shift", "seed": seed},
                                    "results": serde_json::to_value(&rows)?}),
                        )?,
                        Format::Csv => {
                            let header = [
                                "lambda",
                                "p",
                                "correlation",
                                "reducer",
                                "reps",
                                "mean",
                                "sd",
                                "expected",
                                "seed",
                            ];
                            let body = rows.iter().map(|r| {
                                vec![
                                    fmt_sig(r.lambda),
                                    r.p.to_string(),
                                    correlation_label(&r.correlation),
                                    r.reducer.name().to_string(),
                                    r.reps.to_string(),
                                    fmt_sig(r.mean),
                                    r.sd.map(fmt_sig).unwrap_or_default(),
                                    fmt_sig(r.expected),
                                    seed.to_string(),
                                ]
                            });
                            emit(out.as_deref(), &csv_bytes(&header, body)?)?;
                        }
                    }
                }
            }
        }
        Command::Sensitivity { features, lambda } => {
            let r = sensitivity(features, lambda)?;
            if cli.format == Format::Json {
                return emit_json(None, &serde_json::to_value(&r)?);
            }
            println!(
                "delta_hat={} interpretation={}",
                fmt_sig(r.delta_hat),
                r.interpretation
            );
            println!("kmeans (needs delta_hat > 4): {}", r.kmeans.label());
            println!("cmeans/gmm (needs delta_hat > 3): {}", r.cmeans_gmm.label());
            println!(
                "features needed at lambda={}: kmeans {}, cmeans/gmm {}",
                fmt_sig(lambda),
                r.features_for_kmeans,
                r.features_for_cmeans_gmm
            );
            println!("verdict: {}", r.verdict);
        }
        Command::Generate {
            n,
            p,
            lambda,
            null,
            binary,
            correlation: strength,
            seed,
            out,
        } => {
            let seed = resolve_seed(seed);
            let effects = match lambda {
                Some(l) => EffectSource::Exponential { lambda: l },
                None if null => EffectSource::Fixed(EffectVector::zeros(p)?),
                None => return Err(usage("--lambda or --null is required")),
            };
            let spec = DatasetSpec {
                feature_kind: if binary {
                    FeatureKind::Binary
                } else {
                    FeatureKind::Continuous
                },
                correlation: correlation(strength),
                ..DatasetSpec::two_groups(n, p, effects, seed)
            };
            let ds = generate(&spec)?;
            let mut buf = Vec::new();
            write_dataset(&mut buf, &ds.data, &ds.labels)?;
            emit(out.as_deref(), &buf)?;
            eprintln!(
                "generated {} rows, centroid distance {} (seed {seed})",
                ds.data.nrows(),
                fmt_sig(ds.realized_delta)
            );
        }
        Command::Analyze {
            data,
            method,
            reducer,
            choose_k,
            seed,
        } => {
            let (x, _) =
                read_dataset_file(&data).with_context(|| format!("reading {}", data.display()))?;
            let seed = resolve_seed(seed);
            let reducer = reducer.unwrap_or(if method == Method::Lca {
                Reducer::None
            } else {
                Reducer::Pca
            });
            let fit = FitConfig::default().with_seed(seed);
            let a = analyze(&x, method, reducer, 2, fit, seed)?;
            let chosen = if choose_k.is_empty() {
                None
            } else {
                Some(select_k(&x, method, reducer, 2, &choose_k, fit, seed)?)
            };
            if cli.format == Format::Json {
                let mut v = serde_json::to_value(&a)?;
                if let Some((best, scores)) = &chosen {
                    v["best_k"] = json!(best);
                    v["silhouette_by_k"] = json!(scores);
                }
                return emit_json(None, &v);
            }
            if let Some((best, scores)) = &chosen {
                for (k, s) in scores {
                    println!("k={k} silhouette={}", fmt_sig(*s));
                }
                println!("best_k={best}");
            }
            if let Some(e) = &a.evaluation {
                let fields = [
                    ("silhouette", e.silhouette),
                    ("fuzzy_silhouette", e.fuzzy_silhouette),
                    ("bic_one_class", e.bic_null),
                    ("bic_two_class", e.bic_alt),
                    ("bayes_factor", e.bayes_factor),
                ];
                for (name, v) in fields {
                    if let Some(v) = v {
                        println!("{name}={}", fmt_sig(v));
                    }
                }
            }
            if let Some(flag) = &a.flag {
                println!("note={flag}");
            }
            println!("subgroups_detected={}", a.rejected_null);
        }
    }
    Ok(())
}

fn effect_curves(
    format: Format,
    out: Option<&Path>,
    lambdas: &[f64],
    points: usize,
    max_p: usize,
) -> Result<()> {
    if points < 2 || max_p < 2 {
        return Err(usage("--points and --max-features must be at least 2"));
    }
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let mut ps: BTreeSet<usize> = (0..points)
            .map(|i| {
                (i as f64 / (points - 1) as f64 * (max_p as f64).ln())
                    .exp()
                    .round() as usize
            })
            .collect();
        for target in [3.0, 4.0, 5.0] {
            let p = min_features(target, lambda, Rounding::Nearest)?;
            if p <= max_p {
                ps.insert(p);
            }
        }
        for p in ps {
            rows.push((lambda, p, expected_delta(p, lambda)?));
        }
    }
    match format {
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|&(l, p, d)| json!({"lambda": l, "p": p, "delta_hat": d}))
                .collect();
            emit_json(
                out,
                &json!({"config": {"command": "figure", "which": "effect-curves"}, "results": v}),
            )
        }
        Format::Csv => {
            let body = rows
                .iter()
                .map(|&(l, p, d)| vec![fmt_sig(l), p.to_string(), fmt_sig(d)]);
            emit(out, &csv_bytes(&["lambda", "p", "delta_hat"], body)?)
        }
    }
}
