//! The sample-average absolute deviation `g(t) = n⁻¹ Σ |ξᵢ − t|` and its
//! subdifferential, evaluated on a grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::noise::NoiseSpec;
use super::NOISE_STREAM;
use crate::error::{Error, Result};
use crate::loss::sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingRow {
    pub t: f64,
    pub g: f64,
    /// `n⁻¹ Σ sign(t − ξᵢ)`, with `sign(0) = 0`.
    pub dg: f64,
}

/// Evaluates `g` and its subdifferential at each grid point for a fixed
/// sample of `n` noise draws.
pub fn smoothing_demo(noise: &NoiseSpec, n: usize, grid: &[f64], seed: u64) -> Result<Vec<SmoothingRow>> {
    if grid.is_empty() {
        return Err(Error::param("smoothing grid is empty"));
    }
    if n == 0 {
        return Err(Error::param("smoothing demo needs at least one draw"));
    }
    noise.kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    let xi: Vec<f64> = (0..n).map(|_| noise.kind.sample(&mut rng)).collect();
    Ok(smoothing_table(&xi, grid))
}

/// Same table for an explicit sample.
pub fn smoothing_table(xi: &[f64], grid: &[f64]) -> Vec<SmoothingRow> {
    let n = xi.len() as f64;
    grid.iter()
        .map(|&t| {
            let g = xi.iter().map(|x| (x - t).abs()).sum::<f64>() / n;
            let dg = xi.iter().map(|x| sign(t - x)).sum::<f64>() / n;
            SmoothingRow { t, g, dg }
        })
        .collect()
}

/// `m` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect(),
    }
}

/// Largest `|dg[k+1] − dg[k]|` along the table.
pub fn max_subgradient_jump(rows: &[SmoothingRow]) -> f64 {
    rows.windows(2)
        .map(|w| (w[1].dg - w[0].dg).abs())
        .fold(0.0, f64::max)
}

/// Smallest discrete second difference of `g`, scaled by the local spacing.
pub fn min_second_difference(rows: &[SmoothingRow]) -> f64 {
    rows.windows(3)
        .map(|w| {
            let left = (w[1].g - w[0].g) / (w[1].t - w[0].t);
            let right = (w[2].g - w[1].g) / (w[2].t - w[1].t);
            right - left
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::noise::NoiseKind;

    #[test]
    fn single_draw_at_zero() {
        let rows = smoothing_table(&[0.0], &[-1.0, 0.0, 1.0]);
        let g: Vec<f64> = rows.iter().map(|r| r.g).collect();
        let dg: Vec<f64> = rows.iter().map(|r| r.dg).collect();
        assert_eq!(g, vec![1.0, 0.0, 1.0]);
        assert_eq!(dg, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn gaussian_minimum_near_mean_abs() {
        let noise = NoiseSpec::new(NoiseKind::Gaussian { sigma: 1.0 }).unwrap();
        let rows = smoothing_demo(&noise, 1000, &linspace(-0.5, 0.5, 41), 3).unwrap();
        let min = rows.iter().map(|r| r.g).fold(f64::INFINITY, f64::min);
        assert!((0.7..=0.9).contains(&min), "min g = {min}");
        assert!(min_second_difference(&rows) >= -1e-12);
    }

    #[test]
    fn empty_grid_rejected() {
        let noise = NoiseSpec::new(NoiseKind::Gaussian { sigma: 1.0 }).unwrap();
        assert!(smoothing_demo(&noise, 10, &[], 0).is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-1.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(linspace(2.0, 5.0, 1), vec![2.0]);
    }
}
