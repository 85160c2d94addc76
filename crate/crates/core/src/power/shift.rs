use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    draw_effect_vector, generate_continuous, sample_centroid_distance, Correlation, DatasetSpec,
    EffectSource,
};
use crate::effect_size::expected_delta;
use crate::error::{domain, Result};
use crate::reduce::Reducer;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftOptions {
    pub reps: usize,
    pub n_per_group: usize,
    pub dims: usize,
    pub master_seed: u64,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        ShiftOptions {
            reps: 10,
            n_per_group: 200,
            dims: 2,
            master_seed: super::DEFAULT_SEED,
        }
    }
}

/// Measured centroid distance for one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub lambda: f64,
    pub p: usize,
    pub correlation: Correlation,
    pub reducer: Reducer,
    pub reps: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single replicate.
    pub sd: Option<f64>,
    /// Expected distance in the raw feature space.
    pub expected: f64,
    pub values: Vec<f64>,
}

fn correlation_key(c: &Correlation) -> u64 {
    match c {
        Correlation::Independent => u64::MAX,
        Correlation::Random { strength } => strength.to_bits(),
    }
}

/// Measures the distance between the two subgroup centroids after each
/// reduction. Every reducer sees the same datasets, so differences between
/// reducers are paired.
pub fn centroid_shift_experiment(
    lambdas: &[f64],
    p_values: &[usize],
    correlations: &[Correlation],
    reducers: &[Reducer],
    opts: &ShiftOptions,
) -> Result<Vec<ShiftRow>> {
    if opts.reps == 0 {
        return Err(domain("reps must be at least 1"));
    }
    let mut rows = Vec::new();
    let total = lambdas.len() * p_values.len() * correlations.len();
    let mut done = 0;
    for &lambda in lambdas {
        for &p in p_values {
            let expected = expected_delta(p, lambda)?;
            for correlation in correlations {
                let key = [
                    p as u64,
                    lambda.to_bits(),
                    correlation_key(correlation),
                    opts.n_per_group as u64,
                ];
                let per_rep: Vec<Vec<f64>> = (0..opts.reps)
                    .into_par_iter()
                    .map(|rep| -> Result<Vec<f64>> {
                        let idx = rep as u64;
                        let mut s = rng::derive(opts.master_seed, "shift", &key, idx);
                        let effects = draw_effect_vector(p, lambda, &mut s)?;
                        let spec = DatasetSpec {
                            correlation: *correlation,
                            ..DatasetSpec::two_groups(
                                opts.n_per_group,
                                p,
                                EffectSource::Fixed(effects),
                                0,
                            )
                        };
                        let ds = generate_continuous(&spec, &mut s)?;
                        reducers
                            .iter()
                            .map(|r| {
                                let emb = r.apply(&ds.data, opts.dims, s.random())?;
                                Ok(sample_centroid_distance(&emb.coords, &ds.labels))
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                done += 1;
                log::info!("[{done}/{total}] lambda={lambda} p={p} {correlation:?}");
                for (j, &reducer) in reducers.iter().enumerate() {
                    let values: Vec<f64> = per_rep.iter().map(|v| v[j]).collect();
                    let (mean, sd) = mean_sd(&values);
                    rows.push(ShiftRow {
                        lambda,
                        p,
                        correlation: *correlation,
                        reducer,
                        reps: opts.reps,
                        mean,
                        sd,
                        expected,
                        values,
                    });
                }
            }
        }
    }
    Ok(rows)
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rep_has_no_sd() {
        let opts = ShiftOptions {
            reps: 1,
            n_per_group: 30,
            ..ShiftOptions::default()
        };
        let rows = centroid_shift_experiment(
            &[1.0],
            &[10],
            &[Correlation::Independent],
            &[Reducer::None],
            &opts,
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].sd.is_none());
    }

    #[test]
    fn projection_never_increases_distance() {
        let opts = ShiftOptions {
            reps: 5,
            n_per_group: 50,
            ..ShiftOptions::default()
        };
        let rows = centroid_shift_experiment(
            &[1.0],
            &[20],
            &[
                Correlation::Independent,
                Correlation::Random { strength: 0.5 },
            ],
            &[Reducer::None, Reducer::Pca],
            &opts,
        )
        .unwrap();
        for pair in rows.chunks(2) {
            for (raw, pca) in pair[0].values.iter().zip(&pair[1].values) {
                assert!(*pca <= raw + 1e-9);
            }
        }
    }

    #[test]
    fn mean_sd_matches_hand_values() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s.unwrap() - 1.290_994_448_735_805_6).abs() < 1e-15);
    }

    #[test]
    fn zero_reps_rejected() {
        let opts = ShiftOptions {
            reps: 0,
            ..ShiftOptions::default()
        };
        assert!(centroid_shift_experiment(
            &[1.0],
            &[5],
            &[Correlation::Independent],
            &[Reducer::None],
            &opts
        )
        .is_err());
    }
}
