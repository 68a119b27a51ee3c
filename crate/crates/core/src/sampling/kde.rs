//! Gaussian kernel density estimate of the predicted density.
//!
//! The kernel is a product of independent Gaussians with one bandwidth per
//! output dimension. Evaluation is done in log space: the nearest support
//! point (in bandwidth units) is located first and every other kernel is
//! summed relative to it, so densities far below `f64::MIN_POSITIVE` still
//! produce a finite log value.
//!
//! One-dimensional estimates with many support points additionally carry a
//! linearly binned grid that is convolved once with the kernel; queries that
//! land on the grid are answered by interpolation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::LogDensity;
use crate::error::{PopInferError, Result};

/// Kernels further than this many bandwidths beyond the nearest support
/// point are dropped; each contributes less than `exp(-32)` of the nearest.
const CUTOFF: f64 = 8.0;
const GRID_MIN_POINTS: usize = 2_000;
const GRID_NODES_PER_BANDWIDTH: f64 = 64.0;
const GRID_PAD_BANDWIDTHS: f64 = 10.0;
const GRID_MAX_NODES: usize = 1 << 20;
/// Grid values below this are recomputed exactly.
const GRID_FLOOR: f64 = 1e-250;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// `h_k = N^(-1/(m+4)) σ̂_k`.
    #[default]
    Scott,
    /// `h_k = (4/(m+2))^(1/(m+4)) N^(-1/(m+4)) σ̂_k`.
    Silverman,
}

impl BandwidthRule {
    pub fn factor(self, n: usize, m: usize) -> f64 {
        let exponent = -1.0 / (m as f64 + 4.0);
        let scott = (n as f64).powf(exponent);
        match self {
            BandwidthRule::Scott => scott,
            BandwidthRule::Silverman => (4.0 / (m as f64 + 2.0)).powf(1.0 / (m as f64 + 4.0)) * scott,
        }
    }
}

#[derive(Debug, Clone)]
struct BinnedGrid {
    origin: f64,
    spacing: f64,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KernelDensityEstimate {
    dim: usize,
    n: usize,
    /// Row-major support points sorted by their first coordinate.
    sorted: Vec<f64>,
    bandwidths: Vec<f64>,
    inv_bandwidths: Vec<f64>,
    log_norm: f64,
    grid: Option<BinnedGrid>,
}

/// Fits a Gaussian KDE with Scott's rule to the rows of `outputs`.
pub fn fit_kde(outputs: &DMatrix<f64>) -> Result<KernelDensityEstimate> {
    KernelDensityEstimate::fit(outputs, BandwidthRule::Scott)
}

impl KernelDensityEstimate {
    pub fn fit(outputs: &DMatrix<f64>, rule: BandwidthRule) -> Result<Self> {
        let (n, m) = outputs.shape();
        if n < 2 {
            return Err(PopInferError::InvalidArgument(format!(
                "kernel density estimate needs at least 2 points, got {n}"
            )));
        }
        if m == 0 {
            return Err(PopInferError::InvalidArgument("kernel density estimate needs m >= 1".into()));
        }
        let factor = rule.factor(n, m);
        let mut bandwidths = Vec::with_capacity(m);
        for k in 0..m {
            let col = outputs.column(k);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(PopInferError::DegenerateSamples { dim: k });
            }
            bandwidths.push(factor * sd);
        }
        Self::with_bandwidths(outputs, bandwidths)
    }

    /// KDE with explicitly supplied per-dimension bandwidths.
    pub fn with_bandwidths(outputs: &DMatrix<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        let (n, m) = outputs.shape();
        if bandwidths.len() != m {
            return Err(PopInferError::dims("kde bandwidths", m, bandwidths.len()));
        }
        if n == 0 || bandwidths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(PopInferError::InvalidArgument("bandwidths must be positive and finite".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| outputs[(a, 0)].total_cmp(&outputs[(b, 0)]));
        let mut sorted = Vec::with_capacity(n * m);
        for &i in &order {
            sorted.extend(outputs.row(i).iter().copied());
        }
        let log_norm = -(n as f64).ln()
            - bandwidths.iter().map(|h| h.ln()).sum::<f64>()
            - 0.5 * m as f64 * (2.0 * PI).ln();
        let inv_bandwidths = bandwidths.iter().map(|h| 1.0 / h).collect();
        let mut kde = Self {
            dim: m,
            n,
            sorted,
            bandwidths,
            inv_bandwidths,
            log_norm,
            grid: None,
        };
        if m == 1 && n >= GRID_MIN_POINTS {
            kde.grid = kde.build_grid();
        }
        Ok(kde)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// Diagonal bandwidth matrix `diag(h_k²)`.
    pub fn bandwidth_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim,
            self.bandwidths.iter().map(|h| h * h),
        ))
    }

    /// Support points, sorted by first coordinate.
    pub fn support_points(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.dim, &self.sorted)
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.sorted[i * self.dim..(i + 1) * self.dim]
    }

    fn scaled_dist_sq(&self, i: usize, x: &[f64]) -> f64 {
        self.point(i)
            .iter()
            .zip(x)
            .zip(&self.inv_bandwidths)
            .map(|((p, q), ih)| ((p - q) * ih).powi(2))
            .sum()
    }

    fn first_coord(&self, i: usize) -> f64 {
        self.sorted[i * self.dim]
    }

    /// Log density by direct kernel summation.
    pub fn ln_pdf_exact(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return f64::NAN;
        }
        let ih0 = self.inv_bandwidths[0];
        let start = self.sorted_partition(x[0]);

        // Nearest support point in bandwidth units.
        let mut best = f64::INFINITY;
        for i in start..self.n {
            let d0 = (self.first_coord(i) - x[0]) * ih0;
            if d0 * d0 > best {
                break;
            }
            best = best.min(self.scaled_dist_sq(i, x));
        }
        for i in (0..start).rev() {
            let d0 = (x[0] - self.first_coord(i)) * ih0;
            if d0 * d0 > best {
                break;
            }
            best = best.min(self.scaled_dist_sq(i, x));
        }

        let radius = best.sqrt() + CUTOFF;
        let radius_sq = radius * radius;
        let mut sum = 0.0;
        for i in start..self.n {
            let d0 = (self.first_coord(i) - x[0]) * ih0;
            if d0 > radius {
                break;
            }
            let d2 = self.scaled_dist_sq(i, x);
            if d2 <= radius_sq {
                sum += (-0.5 * (d2 - best)).exp();
            }
        }
        for i in (0..start).rev() {
            let d0 = (x[0] - self.first_coord(i)) * ih0;
            if d0 > radius {
                break;
            }
            let d2 = self.scaled_dist_sq(i, x);
            if d2 <= radius_sq {
                sum += (-0.5 * (d2 - best)).exp();
            }
        }
        self.log_norm - 0.5 * best + sum.ln()
    }

    fn sorted_partition(&self, x0: f64) -> usize {
        let (mut lo, mut hi) = (0, self.n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.first_coord(mid) < x0 {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn build_grid(&self) -> Option<BinnedGrid> {
        let h = self.bandwidths[0];
        let spacing = h / GRID_NODES_PER_BANDWIDTH;
        let lo = self.sorted[0] - GRID_PAD_BANDWIDTHS * h;
        let hi = self.sorted[self.n - 1] + GRID_PAD_BANDWIDTHS * h;
        let nodes = ((hi - lo) / spacing).ceil() as usize + 2;
        if nodes > GRID_MAX_NODES {
            return None;
        }
        let mut counts = vec![0.0; nodes];
        for &v in &self.sorted {
            let pos = (v - lo) / spacing;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            counts[i] += 1.0 - frac;
            counts[i + 1] += frac;
        }
        let half = (GRID_PAD_BANDWIDTHS * GRID_NODES_PER_BANDWIDTH) as usize;
        let kernel: Vec<f64> = (0..=half)
            .map(|k| {
                let z = k as f64 / GRID_NODES_PER_BANDWIDTH;
                (-0.5 * z * z).exp()
            })
            .collect();
        let scale = self.log_norm.exp();
        let values = (0..nodes)
            .into_par_iter()
            .map(|g| {
                let from = g.saturating_sub(half);
                let to = (g + half).min(nodes - 1);
                let mut acc = 0.0;
                for (b, c) in counts.iter().enumerate().take(to + 1).skip(from) {
                    if *c != 0.0 {
                        acc += c * kernel[g.abs_diff(b)];
                    }
                }
                acc * scale
            })
            .collect();
        Some(BinnedGrid {
            origin: lo,
            spacing,
            values,
        })
    }

    fn ln_pdf_grid(&self, grid: &BinnedGrid, x: f64) -> Option<f64> {
        let pos = (x - grid.origin) / grid.spacing;
        if !(pos >= 0.0) {
            return None;
        }
        let i = pos.floor() as usize;
        if i + 1 >= grid.values.len() {
            return None;
        }
        let (a, b) = (grid.values[i], grid.values[i + 1]);
        if a < GRID_FLOOR || b < GRID_FLOOR {
            return None;
        }
        // log-linear: exact for a single Gaussian tail up to O(spacing²/h²)
        let frac = pos - i as f64;
        Some(a.ln() + frac * (b.ln() - a.ln()))
    }

    /// Log density, using the binned grid where available.
    pub fn ln_pdf_at(&self, x: &[f64]) -> f64 {
        if let (Some(grid), [x0]) = (&self.grid, x) {
            if let Some(v) = self.ln_pdf_grid(grid, *x0) {
                return v;
            }
        }
        self.ln_pdf_exact(x)
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf_at(x).exp()
    }

    /// Log density at every row of `points`.
    pub fn ln_pdf_rows(&self, points: &DMatrix<f64>) -> Vec<f64> {
        (0..points.nrows())
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = points.row(i).iter().copied().collect();
                self.ln_pdf_at(&row)
            })
            .collect()
    }

    /// Log density at each support point (in sorted order).
    pub fn ln_pdf_at_support(&self) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| self.ln_pdf_at(self.point(i)))
            .collect()
    }
}

impl LogDensity for KernelDensityEstimate {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ln_pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf_at(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::gaussian::GaussianDensity;

    #[test]
    fn two_identical_points_are_degenerate() {
        let pts = DMatrix::from_row_slice(2, 1, &[0.5, 0.5]);
        assert_eq!(fit_kde(&pts).unwrap_err(), PopInferError::DegenerateSamples { dim: 0 });
        assert!(fit_kde(&DMatrix::from_row_slice(1, 1, &[0.5])).is_err());
    }

    #[test]
    fn scott_bandwidth() {
        let pts = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let kde = fit_kde(&pts).unwrap();
        let sd = (5.0_f64 / 3.0).sqrt();
        assert!((kde.bandwidths()[0] - 4f64.powf(-0.2) * sd).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_naive_sum() {
        let g = GaussianDensity::isotropic(&[0.0, 1.0], 0.5).unwrap();
        let pts = g.sample(&mut ChaCha8Rng::seed_from_u64(3), 300);
        let kde = fit_kde(&pts).unwrap();
        let h = kde.bandwidths().to_vec();
        for x in [[0.0, 1.0], [0.7, -0.2], [3.0, 3.0], [40.0, 0.0]] {
            let naive: f64 = pts
                .row_iter()
                .map(|r| {
                    (0..2)
                        .map(|k| {
                            let z = (x[k] - r[k]) / h[k];
                            (-0.5 * z * z).exp() / (h[k] * (2.0 * PI).sqrt())
                        })
                        .product::<f64>()
                })
                .sum::<f64>()
                / 300.0;
            let exact = kde.ln_pdf_exact(&x);
            if naive > 0.0 {
                assert!((exact - naive.ln()).abs() < 1e-9, "{x:?}: {exact} vs {}", naive.ln());
            } else {
                // far outside: finite log value where the naive sum underflows
                assert!(exact.is_finite() && exact < -700.0);
            }
        }
    }

    #[test]
    fn grid_agrees_with_exact() {
        let g = GaussianDensity::isotropic(&[0.8], 0.75).unwrap();
        let pts = g.sample(&mut ChaCha8Rng::seed_from_u64(11), 20_000);
        let kde = fit_kde(&pts).unwrap();
        assert!(kde.grid.is_some());
        for i in 0..200 {
            let x = -3.0 + 0.0371 * i as f64;
            let grid = kde.ln_pdf_at(&[x]);
            let exact = kde.ln_pdf_exact(&[x]);
            assert!((grid - exact).abs() < 1e-3, "x={x}: {grid} vs {exact}");
        }
        // beyond the grid the exact path takes over
        assert_eq!(kde.ln_pdf_at(&[25.0]), kde.ln_pdf_exact(&[25.0]));
    }

    #[test]
    fn positive_at_support_points() {
        let g = GaussianDensity::isotropic(&[0.0], 1.0).unwrap();
        let pts = g.sample(&mut ChaCha8Rng::seed_from_u64(5), 5_000);
        let kde = fit_kde(&pts).unwrap();
        assert!(kde.ln_pdf_at_support().iter().all(|v| v.is_finite()));
    }
}
