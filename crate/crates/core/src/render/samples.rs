use rand::Rng;

use crate::{Error, Result};

/// Depths along one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct RaySamples {
    /// Strictly ascending depths.
    pub t: Vec<f64>,
    /// `t[i+1] - t[i]`, with [`last_delta`](Self::last_delta) closing the list.
    pub delta: Vec<f64>,
    pub near: f64,
    pub far: f64,
    /// Width given to the final sample: one coarse stratum.
    pub last_delta: f64,
}

impl RaySamples {
    pub fn from_depths(mut t: Vec<f64>, near: f64, far: f64, last_delta: f64) -> Self {
        t.sort_by(f64::total_cmp);
        t.dedup();
        let delta = deltas(&t, last_delta);
        RaySamples { t, delta, near, far, last_delta }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn positions(&self, origin: &nalgebra::Vector3<f64>, dir: &nalgebra::Vector3<f64>) -> Vec<nalgebra::Vector3<f64>> {
        self.t.iter().map(|&t| origin + dir * t).collect()
    }
}

pub fn deltas(t: &[f64], last: f64) -> Vec<f64> {
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    if !t.is_empty() {
        d.push(last);
    }
    d
}

/// One depth per equal stratum of `[near, far]`: a uniform draw inside it
/// when `jitter` is set, its midpoint otherwise.
pub fn sample_stratified<R: Rng + ?Sized>(bounds: (f64, f64), n: usize, jitter: bool, rng: &mut R) -> Result<RaySamples> {
    let (near, far) = bounds;
    if !(near < far) || !near.is_finite() || !far.is_finite() {
        return Err(Error::Argument(format!("invalid depth bounds ({near}, {far})")));
    }
    if n < 2 {
        return Err(Error::Argument("at least two samples per ray are required".into()));
    }
    let width = (far - near) / n as f64;
    let t: Vec<f64> = (0..n)
        .map(|i| {
            let offset = if jitter { rng.random::<f64>() } else { 0.5 };
            near + (i as f64 + offset) * width
        })
        .collect();
    Ok(RaySamples::from_depths(t, near, far, width))
}

/// Draws `n_fine` depths from the piecewise-constant distribution that puts
/// mass `weights[i]` uniformly over the cell of coarse sample `i` (cells are
/// split at midpoints between neighboring samples and closed by the bounds),
/// then merges them with the coarse depths.
///
/// With no positive weight the fine depths are a jittered stratified draw.
pub fn sample_importance<R: Rng + ?Sized>(coarse: &RaySamples, weights: &[f64], n_fine: usize, rng: &mut R) -> RaySamples {
    let mut t = coarse.t.clone();
    t.extend(importance_depths(coarse, weights, n_fine, rng));
    RaySamples::from_depths(t, coarse.near, coarse.far, coarse.last_delta)
}

/// The fine depths of [`sample_importance`] alone, in ascending order.
pub fn importance_depths<R: Rng + ?Sized>(coarse: &RaySamples, weights: &[f64], n_fine: usize, rng: &mut R) -> Vec<f64> {
    assert_eq!(weights.len(), coarse.len(), "one weight per coarse sample");
    if n_fine == 0 {
        return Vec::new();
    }
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if !(total > 0.0) || !total.is_finite() {
        let extra = sample_stratified((coarse.near, coarse.far), n_fine.max(2), true, rng)
            .expect("coarse bounds are valid");
        return extra.t.into_iter().take(n_fine).collect();
    }
    let n = coarse.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(coarse.near);
    for w in coarse.t.windows(2) {
        edges.push(0.5 * (w[0] + w[1]));
    }
    edges.push(coarse.far);
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in weights {
        acc += w.max(0.0) / total;
        cdf.push(acc);
    }
    let mut u: Vec<f64> = (0..n_fine).map(|_| rng.random::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    u.iter()
        .map(|&ui| {
            // First cell whose upper cdf exceeds ui; round-off near 1 may land
            // on an empty cell, so step to the nearest one with mass.
            let mut i = cdf[1..].partition_point(|&c| c <= ui).min(n - 1);
            while weights[i] <= 0.0 && i + 1 < n {
                i += 1;
            }
            while weights[i] <= 0.0 && i > 0 {
                i -= 1;
            }
            let mass = cdf[i + 1] - cdf[i];
            let frac = if mass > 0.0 { ((ui - cdf[i]) / mass).clamp(0.0, 1.0) } else { 0.5 };
            edges[i] + frac * (edges[i + 1] - edges[i])
        })
        .collect()
}
