//! Parity-signed noise residuals of a stego image.
//!
//! Each pixel is compared against the mean of its neighbourhood with the
//! centre pixel left out. The difference is signed by the pixel's parity
//! (`s - s̄` when odd, `s̄ - s` when even), which maps both directions of an
//! LSB replacement onto a `+1` shift. Unmodified pixels then average zero
//! and modified pixels average one.
//!
//! Leaving the centre out matters: with it included the shift for a
//! modified pixel drops to `8/9` and the planned sample sizes change.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const DEFAULT_RADIUS: usize = 1;

/// Floor applied when the second moment is smaller than `r / 2`.
pub const SIGMA2_FLOOR: f64 = 1e-6;

/// Neighbourhood mean excluding the centre pixel, row-major, full precision.
/// Border neighbourhoods are truncated to the image.
pub fn spatial_average_filter(image: &GrayImage, radius: usize) -> Result<Vec<f64>> {
    let (width, height) = image.dimensions();
    let side = 2 * radius + 1;
    if radius == 0 || width < side || height < side {
        return Err(Error::DegenerateImage {
            width,
            height,
            radius,
        });
    }

    // (width + 1) x (height + 1) summed-area table
    let stride = width + 1;
    let mut table = vec![0i64; stride * (height + 1)];
    for y in 0..height {
        let mut row = 0i64;
        for x in 0..width {
            row += i64::from(image.get(x, y));
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }

    let mut out = vec![0.0f64; width * height];
    out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let y0 = y.saturating_sub(radius);
        let y1 = (y + radius + 1).min(height);
        for (x, slot) in row.iter_mut().enumerate() {
            let x0 = x.saturating_sub(radius);
            let x1 = (x + radius + 1).min(width);
            let sum = table[y1 * stride + x1] - table[y0 * stride + x1] - table[y1 * stride + x0]
                + table[y0 * stride + x0];
            let cells = ((x1 - x0) * (y1 - y0)) as i64;
            let neighbours = sum - i64::from(image.get(x, y));
            *slot = neighbours as f64 / (cells - 1) as f64;
        }
    });
    Ok(out)
}

/// Spacing of the residual lattice for interior pixels: residuals are
/// integer multiples of `1 / neighbour_count`.
pub fn residual_lattice(radius: usize) -> f64 {
    let side = 2 * radius + 1;
    1.0 / (side * side - 1) as f64
}

/// Continuous cut equivalent to counting residuals strictly above
/// `threshold` on the interior lattice.
pub fn continuity_corrected_threshold(threshold: f64, radius: usize) -> f64 {
    let step = residual_lattice(radius);
    step * ((threshold / step).floor() + 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    values: Vec<f64>,
    skip: usize,
    mean: f64,
    second_moment: f64,
}

impl NoiseField {
    /// Wraps residuals directly; the first `skip` entries are kept for
    /// indexing but left out of every statistic.
    pub fn from_values(values: Vec<f64>, skip: usize) -> Result<Self> {
        if skip >= values.len() {
            return Err(Error::Capacity {
                required: skip + 1,
                available: values.len(),
            });
        }
        let counted = &values[skip..];
        let n = counted.len() as f64;
        let mean = counted.iter().sum::<f64>() / n;
        let second_moment = counted.iter().map(|w| w * w).sum::<f64>() / n;
        Ok(Self {
            values,
            skip,
            mean,
            second_moment,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.skip
    }

    /// Residuals that enter the statistics.
    pub fn counted(&self) -> &[f64] {
        &self.values[self.skip..]
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `(1/N) Σ w²` over the counted residuals.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn sample_variance(&self) -> f64 {
        let n = self.counted().len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        (self.second_moment - self.mean * self.mean) * n / (n - 1.0)
    }

    /// One byte per pixel, 1 where the residual exceeds `threshold`.
    pub fn exceedance_mask(&self, threshold: f64) -> Vec<u8> {
        self.values.iter().map(|&w| (w > threshold) as u8).collect()
    }
}

pub fn compute_noise(stego: &GrayImage, radius: usize, skip_header: usize) -> Result<NoiseField> {
    let smoothed = spatial_average_filter(stego, radius)?;
    let values = stego
        .pixels()
        .par_iter()
        .zip(smoothed.par_iter())
        .map(|(&s, &avg)| {
            let s = f64::from(s);
            if s as u8 & 1 == 1 {
                s - avg
            } else {
                avg - s
            }
        })
        .collect();
    NoiseField::from_values(values, skip_header)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub sigma2: f64,
    /// Set when the second moment fell below `r / 2` and the floor was used.
    pub clamped: bool,
}

impl SigmaEstimate {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// `ā₂ - r/2`, floored at [`SIGMA2_FLOOR`].
pub fn estimate_sigma2(noise: &NoiseField, rate: f64) -> SigmaEstimate {
    let raw = noise.second_moment() - rate / 2.0;
    if raw < SIGMA2_FLOOR {
        log::warn!(
            "second moment {} below r/2 = {}; residual model does not fit",
            noise.second_moment(),
            rate / 2.0
        );
        SigmaEstimate {
            sigma2: SIGMA2_FLOOR,
            clamped: true,
        }
    } else {
        SigmaEstimate {
            sigma2: raw,
            clamped: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// Approximate 95% half-width.
    pub half_width: f64,
}

pub trait RateEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn estimate(&self, noise: &NoiseField) -> RateEstimate;
}

/// `r̂ = 2 · mean(W)`, using `E[W] = r/2` under the residual mixture.
#[derive(Debug, Clone, Copy, Default)]
pub struct MixtureMeanEstimator;

impl RateEstimator for MixtureMeanEstimator {
    fn name(&self) -> &'static str {
        "mixture_mean"
    }

    fn estimate(&self, noise: &NoiseField) -> RateEstimate {
        let n = noise.counted().len() as f64;
        let se = (noise.sample_variance() / n).sqrt();
        RateEstimate {
            rate: (2.0 * noise.mean()).clamp(0.0, 1.0),
            half_width: 2.0 * 1.96 * se,
        }
    }
}

pub fn estimate_rate(noise: &NoiseField) -> RateEstimate {
    MixtureMeanEstimator.estimate(noise)
}
