use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Settings for comparing analytic gradients with central differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    /// Central-difference step.
    pub h: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
    /// Coordinates to probe; all of them when the parameter vector is shorter.
    pub coordinates: usize,
    /// Lower bound on the relative-error denominator, so components that are
    /// zero up to round-off are compared absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            h: 1e-5,
            tolerance: 1e-3,
            coordinates: 200,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Coordinate with the largest error, with its analytic and numeric values.
    pub worst: Option<(usize, f64, f64)>,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}

/// Probes a random subset of coordinates of `params` with central
/// differences of `f` and compares against `analytic`.
pub fn finite_diff_check<F>(f: F, params: &[f64], analytic: &[f64], cfg: &FdConfig) -> FdReport
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length must match parameters");
    let n = params.len();
    let coords: Vec<usize> = if cfg.coordinates >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut c = sample(&mut rng, n, cfg.coordinates).into_vec();
        c.sort_unstable();
        c
    };
    let mut x = params.to_vec();
    let mut max = 0.0f64;
    let mut worst = None;
    let mut finite = true;
    for &i in &coords {
        let orig = x[i];
        x[i] = orig + cfg.h;
        let fp = f(&x);
        x[i] = orig - cfg.h;
        let fm = f(&x);
        x[i] = orig;
        let numeric = (fp - fm) / (2.0 * cfg.h);
        let err = relative_error(analytic[i], numeric, cfg.floor);
        if !err.is_finite() {
            finite = false;
        }
        if err > max || worst.is_none() || !err.is_finite() {
            max = if err.is_finite() { err.max(max) } else { f64::INFINITY };
            worst = Some((i, analytic[i], numeric));
        }
    }
    FdReport {
        checked: coords.len(),
        max_relative_error: max,
        worst,
        passed: finite && max < cfg.tolerance,
    }
}
