//! Monte Carlo estimate of path-blocking rates under random invalid boundaries.
//!
//! A trial is *blocked* when the planner leaves at least one unit unreached
//! that the breadth-first oracle shows to be connected to the origin.
//! Trials carry their own seed derived from the batch seed, so results do not
//! depend on how rayon schedules them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{oracle, plan_paths, plan_with_retry, PathPlan};
use crate::boundary_logic::InvalidBoundaryMaps;
use crate::error::{invalid, Result};
use crate::{derive_seed, Unit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockingStats {
    pub sigma: f64,
    pub trials: usize,
    pub single_pass_block_rate: f64,
    pub retry_block_rate: f64,
}

/// Each boundary independently invalid with probability `sigma`.
pub fn random_invalid_maps(rows: usize, cols: usize, sigma: f64, seed: u64) -> InvalidBoundaryMaps {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inv = InvalidBoundaryMaps::clear(rows, cols);
    for b in inv.matrix_a.iter_mut().chain(inv.matrix_b.iter_mut()) {
        *b = rng.random_bool(sigma);
    }
    inv
}

fn blocked(plan: &PathPlan, connected: &ndarray::Array2<bool>) -> bool {
    connected
        .indexed_iter()
        .any(|((r, c), &conn)| conn && !plan.is_reachable((r, c)))
}

/// Blocking rates on a `rows x cols` grid planned from `(0, 0)`.
pub fn blocking_montecarlo(
    (rows, cols): (usize, usize),
    sigmas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<BlockingStats>> {
    if trials < 100 {
        return Err(invalid(format!("at least 100 trials are required, got {trials}")));
    }
    if rows == 0 || cols == 0 {
        return Err(invalid("grid must be non-empty"));
    }
    if let Some(s) = sigmas.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(invalid(format!("sigma must lie in [0, 1], got {s}")));
    }
    let origin: Unit = (0, 0);
    sigmas
        .iter()
        .enumerate()
        .map(|(batch, &sigma)| {
            let outcomes = (0..trials)
                .into_par_iter()
                .map(|t| -> Result<(bool, bool)> {
                    let inv = random_invalid_maps(rows, cols, sigma, derive_seed(seed, &[batch as u64, t as u64]));
                    let connected = oracle::reachable(&inv, origin);
                    let single = blocked(&plan_paths(&inv, origin)?, &connected);
                    let retry = single && blocked(&plan_with_retry(&inv, &[origin])?, &connected);
                    Ok((single, retry))
                })
                .collect::<Result<Vec<_>>>()?;
            let single = outcomes.iter().filter(|o| o.0).count();
            let retry = outcomes.iter().filter(|o| o.1).count();
            Ok(BlockingStats {
                sigma,
                trials,
                single_pass_block_rate: single as f64 / trials as f64,
                retry_block_rate: retry as f64 / trials as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(rate)` against `ln(sigma)` over entries with a
/// positive rate; `None` with fewer than two such entries.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(s, r)| *s > 0.0 && *r > 0.0)
        .map(|(s, r)| (s.ln(), r.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_never_blocks() {
        let stats = blocking_montecarlo((8, 8), &[0.0], 100, 1).unwrap();
        assert_eq!(stats[0].single_pass_block_rate, 0.0);
        assert_eq!(stats[0].retry_block_rate, 0.0);
    }

    #[test]
    fn too_few_trials_rejected() {
        assert!(blocking_montecarlo((8, 8), &[0.1], 99, 1).is_err());
        assert!(blocking_montecarlo((8, 8), &[1.5], 100, 1).is_err());
    }

    #[test]
    fn results_are_reproducible() {
        let a = blocking_montecarlo((10, 10), &[0.1, 0.2], 200, 42).unwrap();
        let b = blocking_montecarlo((10, 10), &[0.1, 0.2], 200, 42).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(s.retry_block_rate <= s.single_pass_block_rate);
        }
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.2].iter().map(|&s| (s, 7.0 * s * s * s)).collect();
        assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(0.1, 0.0), (0.2, 0.5)]), None);
    }
}
