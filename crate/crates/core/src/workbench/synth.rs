//! Synthetic grayscale covers: a slowly varying shading field plus i.i.d.
//! Gaussian texture.
//!
//! The shading spans wavelengths of 80 pixels and more, so the local
//! averaging filter removes almost all of it and the measured residual
//! spread tracks `texture_sigma`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::GrayImage;

const WAVES: usize = 3;
/// Shading amplitude per unit of texture spread.
const SHADING_GAIN: f64 = 3.0;

pub fn synth_cover(
    width: usize,
    height: usize,
    base: f64,
    texture_sigma: f64,
    gen_seed: u64,
) -> GrayImage {
    try_synth_cover(width, height, base, texture_sigma, gen_seed)
        .expect("texture_sigma must be finite and non-negative")
}

pub fn try_synth_cover(
    width: usize,
    height: usize,
    base: f64,
    texture_sigma: f64,
    gen_seed: u64,
) -> Result<GrayImage> {
    if !(texture_sigma >= 0.0 && texture_sigma.is_finite()) {
        return Err(Error::domain("texture_sigma", texture_sigma, ">= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(gen_seed);
    if texture_sigma == 0.0 {
        let v = base.round().clamp(0.0, 255.0) as u8;
        return Ok(GrayImage::filled(width, height, v));
    }

    let waves: Vec<(f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let wavelength = rng.gen_range(80.0..240.0);
            let angle = rng.gen_range(0.0..TAU);
            let phase = rng.gen_range(0.0..TAU);
            let k = TAU / wavelength;
            (k * angle.cos(), k * angle.sin(), phase)
        })
        .collect();
    let amplitude = SHADING_GAIN * texture_sigma / WAVES as f64;
    let texture = Normal::new(0.0, texture_sigma).expect("finite sigma");

    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let shade: f64 = waves
                .iter()
                .map(|&(kx, ky, phase)| (kx * x as f64 + ky * y as f64 + phase).sin())
                .sum();
            let v = base + amplitude * shade + texture.sample(&mut rng);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(width, height, pixels)
}
