//! Monte Carlo estimation of recall sizes and analytic-vs-simulated grids.
//!
//! Trials run in parallel on the rayon pool. Each trial's seed is derived
//! from the base seed and its index, and recalled quantities are reduced as
//! exact integers (sum and sum of squares), so results are bit-identical for
//! any pool size or scheduling.

use rayon::prelude::*;

use crate::error::ModelError;
use crate::model::{expected_recall_size, ModelParams};
use crate::rng::{cell_seed, derive_seed};
use crate::sim::{run_trial, TrialConfig};

/// Default number of trials per parameter set.
pub const DEFAULT_TRIALS: u64 = 10_000;

const Z_95: f64 = 1.960;
const Z_98: f64 = 2.326;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    params: ModelParams,
    n_trials: u64,
    base_seed: u64,
}

impl EstimateConfig {
    pub fn new(params: ModelParams, n_trials: u64, base_seed: u64) -> Result<Self, ModelError> {
        params.ensure_bounded()?;
        if n_trials == 0 {
            return Err(ModelError::ZeroTrials);
        }
        Ok(Self {
            params,
            n_trials,
            base_seed,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    /// Configuration of trial `index`.
    pub fn trial(&self, index: u64) -> TrialConfig {
        TrialConfig::sampled(self.params, derive_seed(self.base_seed, index))
            .expect("estimate config holds bounded params")
    }
}

/// Monte Carlo estimate of the recalled quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialEstimate {
    pub params: ModelParams,
    pub base_seed: u64,
    pub n_trials: u64,
    /// Exact sum of recalled units over all trials.
    pub total_recalled: u64,
    pub sum_of_squares: u128,
    pub mean_recall: f64,
    /// Sample standard deviation of a single trial.
    pub std_dev: f64,
    pub std_error: f64,
    pub ci95_half_width: f64,
    pub ci98_half_width: f64,
}

impl TrialEstimate {
    fn from_sums(config: &EstimateConfig, total: u64, sum_sq: u128) -> Self {
        let n = config.n_trials;
        let variance = if n > 1 {
            // n * sum(x^2) - (sum x)^2 is exact and nonnegative in integers
            let numerator = u128::from(n) * sum_sq - u128::from(total) * u128::from(total);
            numerator as f64 / (n as f64 * (n - 1) as f64)
        } else {
            0.0
        };
        let std_dev = variance.sqrt();
        let std_error = std_dev / (n as f64).sqrt();
        Self {
            params: config.params,
            base_seed: config.base_seed,
            n_trials: n,
            total_recalled: total,
            sum_of_squares: sum_sq,
            mean_recall: total as f64 / n as f64,
            std_dev,
            std_error,
            ci95_half_width: Z_95 * std_error,
            ci98_half_width: Z_98 * std_error,
        }
    }

    /// Smallest nonzero change of the mean one trial can cause, `Q / n`.
    pub fn resolution(&self) -> f64 {
        self.params.total_quantity() as f64 / self.n_trials as f64
    }

    /// True when `target` lies within `k` standard errors of the mean.
    ///
    /// The standard error is floored at [`TrialEstimate::resolution`]: a
    /// sample where every trial recalled the same amount has zero spread but
    /// still cannot resolve the mean more finely than one trial's weight.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.mean_recall - target).abs() <= k * self.std_error.max(self.resolution())
    }
}

pub fn estimate_recall(config: &EstimateConfig) -> TrialEstimate {
    let (total, sum_sq) = (0..config.n_trials)
        .into_par_iter()
        .map(|i| {
            let r = run_trial(&config.trial(i));
            (r, u128::from(r) * u128::from(r))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    TrialEstimate::from_sums(config, total, sum_sq)
}

/// Grid sweep over order sizes and batch sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub total_quantity: u64,
    pub crisis_prob: f64,
    pub order_sizes: Vec<u64>,
    pub batch_sizes: Vec<u64>,
    pub n_trials: u64,
    pub base_seed: u64,
    pub include_simulation: bool,
}

impl SweepConfig {
    /// Analytic-only sweep.
    pub fn analytic(
        total_quantity: u64,
        crisis_prob: f64,
        order_sizes: Vec<u64>,
        batch_sizes: Vec<u64>,
    ) -> Self {
        Self {
            total_quantity,
            crisis_prob,
            order_sizes,
            batch_sizes,
            n_trials: 0,
            base_seed: 0,
            include_simulation: false,
        }
    }

    pub fn simulated(
        total_quantity: u64,
        crisis_prob: f64,
        order_sizes: Vec<u64>,
        batch_sizes: Vec<u64>,
        n_trials: u64,
        base_seed: u64,
    ) -> Self {
        Self {
            total_quantity,
            crisis_prob,
            order_sizes,
            batch_sizes,
            n_trials,
            base_seed,
            include_simulation: true,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        check_axis("order size", &self.order_sizes)?;
        check_axis("batch size", &self.batch_sizes)?;
        if self.include_simulation && self.n_trials == 0 {
            return Err(ModelError::ZeroTrials);
        }
        // the extreme corners cover every other cell's constraints
        let last_order = *self.order_sizes.last().unwrap_or(&1);
        ModelParams::new(
            last_order,
            self.batch_sizes[0],
            self.total_quantity,
            self.crisis_prob,
        )?;
        ModelParams::new(
            self.order_sizes[0],
            self.batch_sizes[0],
            self.total_quantity,
            self.crisis_prob,
        )?;
        Ok(())
    }
}

fn check_axis(name: &'static str, axis: &[u64]) -> Result<(), ModelError> {
    if axis.is_empty() {
        return Err(ModelError::EmptyAxis(name));
    }
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::UnsortedAxis(name));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedCell {
    pub mean: f64,
    pub std_error: f64,
    pub ci95_half_width: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub order_size: u64,
    pub batch_size: u64,
    pub analytic_recall: f64,
    pub simulated: Option<SimulatedCell>,
}

/// Analytic and simulated recall sizes over an order size x batch size grid.
///
/// Cells are stored order-size-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub total_quantity: u64,
    pub crisis_prob: f64,
    pub order_sizes: Vec<u64>,
    pub batch_sizes: Vec<u64>,
    /// Zero for analytic-only grids.
    pub n_trials: u64,
    pub base_seed: u64,
    pub cells: Vec<SweepCell>,
    /// Mean absolute error over simulated cells, as a percentage of `Q`.
    pub mean_abs_error_pct: Option<f64>,
}

impl SweepGrid {
    pub fn cell(&self, order_index: usize, batch_index: usize) -> &SweepCell {
        &self.cells[order_index * self.batch_sizes.len() + batch_index]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[SweepCell]> {
        self.cells.chunks(self.batch_sizes.len())
    }

    pub fn is_simulated(&self) -> bool {
        self.mean_abs_error_pct.is_some()
    }
}

pub fn sweep(config: &SweepConfig) -> Result<SweepGrid, ModelError> {
    config.validate()?;
    let coords: Vec<(u64, u64)> = config
        .order_sizes
        .iter()
        .flat_map(|&o| config.batch_sizes.iter().map(move |&b| (o, b)))
        .collect();

    let cells: Vec<SweepCell> = coords
        .par_iter()
        .map(|&(o, b)| {
            let params = ModelParams::new(o, b, config.total_quantity, config.crisis_prob)?;
            let analytic_recall = expected_recall_size(&params);
            let simulated = if config.include_simulation {
                let est_config = EstimateConfig::new(
                    params,
                    config.n_trials,
                    cell_seed(config.base_seed, o, b),
                )?;
                let est = estimate_recall(&est_config);
                Some(SimulatedCell {
                    mean: est.mean_recall,
                    std_error: est.std_error,
                    ci95_half_width: est.ci95_half_width,
                    abs_error: (analytic_recall - est.mean_recall).abs(),
                })
            } else {
                None
            };
            Ok(SweepCell {
                order_size: o,
                batch_size: b,
                analytic_recall,
                simulated,
            })
        })
        .collect::<Result<_, ModelError>>()?;

    let mean_abs_error_pct = config.include_simulation.then(|| {
        let sum: f64 = cells
            .iter()
            .filter_map(|c| c.simulated)
            .map(|s| s.abs_error)
            .sum();
        100.0 * (sum / cells.len() as f64) / config.total_quantity as f64
    });

    Ok(SweepGrid {
        total_quantity: config.total_quantity,
        crisis_prob: config.crisis_prob,
        order_sizes: config.order_sizes.clone(),
        batch_sizes: config.batch_sizes.clone(),
        n_trials: if config.include_simulation {
            config.n_trials
        } else {
            0
        },
        base_seed: config.base_seed,
        cells,
        mean_abs_error_pct,
    })
}

/// One analytic grid per crisis probability.
pub fn crisis_prob_family(
    total_quantity: u64,
    crisis_probs: &[f64],
    order_sizes: &[u64],
    batch_sizes: &[u64],
) -> Result<Vec<SweepGrid>, ModelError> {
    crisis_probs
        .iter()
        .map(|&p| {
            sweep(&SweepConfig::analytic(
                total_quantity,
                p,
                order_sizes.to_vec(),
                batch_sizes.to_vec(),
            ))
        })
        .collect()
}

/// The entries of `sizes` that divide `total_quantity`, which avoids
/// remainder orders.
pub fn divisor_sizes(total_quantity: u64, sizes: &[u64]) -> Vec<u64> {
    sizes
        .iter()
        .copied()
        .filter(|&s| s > 0 && total_quantity.is_multiple_of(s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(o: u64, b: u64, q: u64, p: f64) -> ModelParams {
        ModelParams::new(o, b, q, p).unwrap()
    }

    #[test]
    fn zero_probability_estimate() {
        let est = estimate_recall(&EstimateConfig::new(params(5, 3, 50, 0.0), 500, 1).unwrap());
        assert_eq!(est.mean_recall, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.total_recalled, 0);
    }

    #[test]
    fn certain_crisis_estimate() {
        let est = estimate_recall(&EstimateConfig::new(params(5, 3, 50, 1.0), 100, 1).unwrap());
        assert_eq!(est.mean_recall, 50.0);
        assert_eq!(est.std_dev, 0.0);
    }

    #[test]
    fn estimate_statistics_match_per_trial_values() {
        let cfg = EstimateConfig::new(params(7, 5, 30, 0.2), 400, 11).unwrap();
        let values: Vec<f64> = (0..400).map(|i| run_trial(&cfg.trial(i)) as f64).collect();
        let mean = values.iter().sum::<f64>() / 400.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 399.0;
        let est = estimate_recall(&cfg);
        assert_eq!(est.total_recalled as f64, values.iter().sum::<f64>());
        assert!((est.mean_recall - mean).abs() < 1e-12);
        assert!((est.std_dev - var.sqrt()).abs() < 1e-9);
        assert!((est.ci95_half_width - 1.96 * var.sqrt() / 20.0).abs() < 1e-9);
        assert!((est.ci98_half_width - 2.326 * var.sqrt() / 20.0).abs() < 1e-9);
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let est = estimate_recall(&EstimateConfig::new(params(7, 5, 30, 0.5), 1, 3).unwrap());
        assert_eq!(est.std_dev, 0.0);
        assert_eq!(est.resolution(), 30.0);
    }

    #[test]
    fn config_rejects_zero_trials() {
        assert_eq!(
            EstimateConfig::new(params(1, 1, 1, 0.1), 0, 0),
            Err(ModelError::ZeroTrials)
        );
    }

    #[test]
    fn covers_uses_resolution_floor() {
        let mut est = estimate_recall(&EstimateConfig::new(params(5, 3, 50, 1.0), 100, 1).unwrap());
        assert!(est.covers(50.0, 3.0));
        assert!(est.covers(49.0, 3.0));
        assert!(!est.covers(48.0, 3.0));
        est.std_error = 2.0;
        assert!(est.covers(45.0, 3.0));
    }

    #[test]
    fn analytic_sweep_shape() {
        let grid = sweep(&SweepConfig::analytic(
            50,
            0.15,
            vec![1, 10, 50],
            vec![1, 4, 100],
        ))
        .unwrap();
        assert_eq!(grid.cells.len(), 9);
        assert!(!grid.is_simulated());
        assert!(grid.cells.iter().all(|c| c.simulated.is_none()));
        assert_eq!(grid.cell(0, 2).analytic_recall, 7.5);
        assert_eq!(grid.cell(1, 1).order_size, 10);
        assert_eq!(grid.cell(1, 1).batch_size, 4);
        assert_eq!(grid.rows().count(), 3);
    }

    #[test]
    fn simulated_sweep_error_metric() {
        let grid = sweep(&SweepConfig::simulated(
            20,
            0.2,
            vec![1, 4, 20],
            vec![1, 3],
            200,
            9,
        ))
        .unwrap();
        let sum: f64 = grid
            .cells
            .iter()
            .map(|c| {
                let s = c.simulated.unwrap();
                assert_eq!(s.abs_error, (c.analytic_recall - s.mean).abs());
                s.abs_error
            })
            .sum();
        let expected = 100.0 * sum / 6.0 / 20.0;
        assert!((grid.mean_abs_error_pct.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn sweep_cell_matches_standalone_estimate() {
        let grid = sweep(&SweepConfig::simulated(
            20,
            0.2,
            vec![2, 5],
            vec![3, 4],
            300,
            77,
        ))
        .unwrap();
        let cell = grid.cell(1, 0);
        let est = estimate_recall(
            &EstimateConfig::new(params(5, 3, 20, 0.2), 300, cell_seed(77, 5, 3)).unwrap(),
        );
        assert_eq!(cell.simulated.unwrap().mean, est.mean_recall);
    }

    #[test]
    fn sweep_validation() {
        let bad =
            |o: Vec<u64>, b: Vec<u64>| sweep(&SweepConfig::analytic(50, 0.15, o, b)).unwrap_err();
        assert_eq!(bad(vec![], vec![1]), ModelError::EmptyAxis("order size"));
        assert_eq!(bad(vec![1], vec![]), ModelError::EmptyAxis("batch size"));
        assert_eq!(
            bad(vec![2, 1], vec![1]),
            ModelError::UnsortedAxis("order size")
        );
        assert!(matches!(
            bad(vec![1, 60], vec![1]),
            ModelError::OrderExceedsQuantity { .. }
        ));
        assert_eq!(bad(vec![0, 1], vec![1]), ModelError::ZeroOrderSize);
        assert_eq!(bad(vec![1], vec![0, 2]), ModelError::ZeroBatchSize);
        let zero_trials = SweepConfig::simulated(50, 0.15, vec![1], vec![1], 0, 0);
        assert_eq!(sweep(&zero_trials).unwrap_err(), ModelError::ZeroTrials);
    }

    #[test]
    fn family_zero_probability_grid() {
        let grids = crisis_prob_family(50, &[0.0, 0.05, 0.5], &[1, 2, 25], &[1, 7]).unwrap();
        assert_eq!(grids.len(), 3);
        assert!(grids[0].cells.iter().all(|c| c.analytic_recall == 0.0));
        for g in &grids {
            assert!(g
                .rows()
                .next()
                .unwrap()
                .iter()
                .all(|c| c.analytic_recall == 50.0 * g.crisis_prob));
        }
        assert!(crisis_prob_family(50, &[1.2], &[1], &[1]).is_err());
    }

    #[test]
    fn divisors() {
        let all: Vec<u64> = (1..=50).collect();
        assert_eq!(divisor_sizes(50, &all), vec![1, 2, 5, 10, 25, 50]);
    }
}
