//! Keyed random-path LSB embedding over grayscale images.
//!
//! A key `(seed, message length)` seeds a PRNG whose output drives a
//! partial Fisher-Yates shuffle of the eligible pixel range. The first
//! `8 * message_len_bytes` positions of that shuffle form the embedding
//! path. The same [`PathSampler`] is used by embedding, extraction and the
//! key search, so all three always agree on the path.
//!
//! How the seed and length are combined into PRNG state is a stand-in:
//! the original tool's composition rule is not public.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{BorlandLcg, PathRng, RngKind, SplitMix64};

/// Pixels reserved for the (encrypted) header in Hide-and-Seek style tools.
pub const DEFAULT_HEADER_PIXELS: usize = 64;

const LENGTH_MIX: u32 = 0x9E37_79B1;
const SPLITMIX_KEY_MIX: u64 = 0x5851_F42D_4C95_7F2D;
const FILLER_DOMAIN: u64 = 0x6865_6164_6572_2121;
const DIRECTION_DOMAIN: u64 = 0x706D_6F6E_6531_2121;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KeyCandidate {
    pub seed: u16,
    pub message_len_bytes: u32,
}

impl KeyCandidate {
    pub fn new(seed: u16, message_len_bytes: u32) -> Self {
        Self {
            seed,
            message_len_bytes,
        }
    }

    pub fn message_bits(&self) -> usize {
        self.message_len_bytes as usize * 8
    }

    fn key_word(&self) -> u64 {
        (u64::from(self.seed) << 32) | u64::from(self.message_len_bytes)
    }

    fn side_stream(&self, domain: u64) -> SplitMix64 {
        let mut mixer = SplitMix64::new(self.key_word() ^ domain);
        SplitMix64::new(mixer.next_u64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedOperation {
    /// Overwrite the LSB.
    #[default]
    Replace,
    /// Add or subtract one when the parity has to change.
    PlusMinusOne,
}

impl std::str::FromStr for EmbedOperation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "replace" => Ok(EmbedOperation::Replace),
            "plus_minus_one" | "pm1" => Ok(EmbedOperation::PlusMinusOne),
            other => Err(format!("unknown embedding operation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub operation: EmbedOperation,
    pub reserve_header: bool,
    pub header_pixels: usize,
    pub rng: RngKind,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            operation: EmbedOperation::Replace,
            reserve_header: true,
            header_pixels: DEFAULT_HEADER_PIXELS,
            rng: RngKind::BorlandLcg,
        }
    }
}

impl EmbedConfig {
    pub fn with_rng(mut self, rng: RngKind) -> Self {
        self.rng = rng;
        self
    }

    pub fn with_operation(mut self, operation: EmbedOperation) -> Self {
        self.operation = operation;
        self
    }

    pub fn without_header(mut self) -> Self {
        self.reserve_header = false;
        self
    }

    /// Pixels at the start of the image that never carry message bits.
    pub fn reserved_pixels(&self) -> usize {
        if self.reserve_header {
            self.header_pixels
        } else {
            0
        }
    }

    /// Number of message bits an image of `image_size` pixels can carry.
    pub fn capacity_bits(&self, image_size: usize) -> usize {
        image_size.saturating_sub(self.reserved_pixels())
    }
}

/// Replays keyed embedding paths for a fixed image size.
///
/// Holds a scratch permutation that is restored after each walk, so one
/// sampler can replay any number of keys in `O(path length)` each.
#[derive(Debug, Clone)]
pub struct PathSampler {
    rng: RngKind,
    offset: usize,
    eligible: usize,
    perm: Vec<u32>,
    swaps: Vec<u32>,
}

impl PathSampler {
    pub fn new(config: &EmbedConfig, image_size: usize) -> Result<Self> {
        let offset = config.reserved_pixels();
        if offset >= image_size {
            return Err(Error::Capacity {
                required: offset + 1,
                available: image_size,
            });
        }
        let eligible = image_size - offset;
        if eligible > u32::MAX as usize {
            return Err(Error::Capacity {
                required: eligible,
                available: u32::MAX as usize,
            });
        }
        Ok(Self {
            rng: config.rng,
            offset,
            eligible,
            perm: Vec::new(),
            swaps: Vec::new(),
        })
    }

    pub fn eligible(&self) -> usize {
        self.eligible
    }

    pub fn check_capacity(&self, key: KeyCandidate) -> Result<()> {
        let required = key.message_bits();
        if required > self.eligible {
            return Err(Error::Capacity {
                required,
                available: self.eligible,
            });
        }
        Ok(())
    }

    /// Calls `visit` with the first `count` absolute pixel indices of the
    /// key's path, in path order.
    pub fn walk(
        &mut self,
        key: KeyCandidate,
        count: usize,
        visit: impl FnMut(usize),
    ) -> Result<()> {
        self.check_capacity(key)?;
        if count > key.message_bits() {
            return Err(Error::Capacity {
                required: count,
                available: key.message_bits(),
            });
        }
        if self.perm.len() != self.eligible {
            self.perm = (0..self.eligible as u32).collect();
        }
        match self.rng {
            RngKind::BorlandLcg => {
                let seed = u32::from(key.seed) ^ key.message_len_bytes.wrapping_mul(LENGTH_MIX);
                let mut rng = BorlandLcg::new(seed);
                self.walk_with(&mut rng, count, visit);
            }
            RngKind::SplitMix => {
                let mut rng = SplitMix64::new(key.key_word() ^ SPLITMIX_KEY_MIX);
                self.walk_with(&mut rng, count, visit);
            }
        }
        Ok(())
    }

    #[inline]
    fn walk_with<R: PathRng>(&mut self, rng: &mut R, count: usize, mut visit: impl FnMut(usize)) {
        let perm = &mut self.perm;
        let swaps = &mut self.swaps;
        swaps.clear();
        let n = self.eligible;
        for i in 0..count {
            let j = i + rng.below((n - i) as u32) as usize;
            perm.swap(i, j);
            swaps.push(j as u32);
            visit(self.offset + perm[i] as usize);
        }
        for (i, &j) in swaps.iter().enumerate().rev() {
            perm.swap(i, j as usize);
        }
    }

    pub fn path(&mut self, key: KeyCandidate) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(key.message_bits());
        self.walk(key, key.message_bits(), |i| out.push(i))?;
        Ok(out)
    }
}

/// The full embedding path for `key`: `8 * message_len_bytes` distinct
/// pixel indices, none of them inside the reserved header.
pub fn keyed_path(key: KeyCandidate, config: &EmbedConfig, image_size: usize) -> Result<Vec<usize>> {
    PathSampler::new(config, image_size)?.path(key)
}

/// Hides `message` (one `bool` per bit) along the key's path.
pub fn embed(
    cover: &GrayImage,
    message: &[bool],
    key: KeyCandidate,
    config: &EmbedConfig,
) -> Result<GrayImage> {
    if message.len() != key.message_bits() {
        return Err(Error::LengthMismatch {
            expected: key.message_bits(),
            actual: message.len(),
        });
    }
    let path = keyed_path(key, config, cover.len())?;
    let mut stego = cover.clone();
    let pixels = stego.pixels_mut();

    if config.reserve_header {
        let mut filler = key.side_stream(FILLER_DOMAIN);
        for p in &mut pixels[..config.header_pixels] {
            *p = (*p & !1) | filler.next_bit() as u8;
        }
    }

    match config.operation {
        EmbedOperation::Replace => {
            for (&idx, &bit) in path.iter().zip(message) {
                pixels[idx] = (pixels[idx] & !1) | bit as u8;
            }
        }
        EmbedOperation::PlusMinusOne => {
            let mut direction = key.side_stream(DIRECTION_DOMAIN);
            for (&idx, &bit) in path.iter().zip(message) {
                let value = pixels[idx];
                if (value & 1 == 1) == bit {
                    continue;
                }
                pixels[idx] = match value {
                    0 => 1,
                    255 => 254,
                    v if direction.next_bit() => v + 1,
                    v => v - 1,
                };
            }
        }
    }
    Ok(stego)
}

/// Reads the LSBs along the key's path.
pub fn extract(stego: &GrayImage, key: KeyCandidate, config: &EmbedConfig) -> Result<Vec<bool>> {
    let pixels = stego.pixels();
    Ok(keyed_path(key, config, stego.len())?
        .into_iter()
        .map(|i| pixels[i] & 1 == 1)
        .collect())
}

/// Fraction of pixels that differ between the two images.
pub fn hamming_distortion(cover: &GrayImage, stego: &GrayImage) -> Result<f64> {
    if cover.dimensions() != stego.dimensions() {
        return Err(Error::DimensionMismatch {
            left: cover.dimensions(),
            right: stego.dimensions(),
        });
    }
    if cover.is_empty() {
        return Ok(0.0);
    }
    let changed = cover
        .pixels()
        .iter()
        .zip(stego.pixels())
        .filter(|(a, b)| a != b)
        .count();
    Ok(changed as f64 / cover.len() as f64)
}

/// MSB-first bit expansion.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect()
}

/// Inverse of [`bytes_to_bits`]; a trailing partial byte is zero-padded.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
        GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
    }

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
        (0..n).map(|_| rng.gen()).collect()
    }

    #[test]
    fn full_occupancy_path_is_permutation() {
        for rng in [RngKind::BorlandLcg, RngKind::SplitMix] {
            let config = EmbedConfig::default().with_rng(rng);
            let size = 64 + 8 * 50;
            let path = keyed_path(KeyCandidate::new(7, 50), &config, size).unwrap();
            let mut sorted = path.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (64..size).collect::<Vec<_>>());
        }
    }

    #[test]
    fn path_is_deterministic_and_injective() {
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(4242, 2000);
        let a = keyed_path(key, &config, 320 * 480).unwrap();
        let b = keyed_path(key, &config, 320 * 480).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16_000);
        let set: HashSet<_> = a.iter().collect();
        assert_eq!(set.len(), a.len());
        assert!(a.iter().all(|&i| (64..320 * 480).contains(&i)));
    }

    #[test]
    fn sampler_reuse_matches_fresh_paths() {
        let config = EmbedConfig::default();
        let mut sampler = PathSampler::new(&config, 10_000).unwrap();
        for seed in 0..20 {
            let key = KeyCandidate::new(seed, 100 + seed as u32);
            assert_eq!(sampler.path(key).unwrap(), keyed_path(key, &config, 10_000).unwrap());
        }
    }

    #[test]
    fn path_prefix_is_consistent() {
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(9, 300);
        let full = keyed_path(key, &config, 50_000).unwrap();
        let mut sampler = PathSampler::new(&config, 50_000).unwrap();
        let mut prefix = Vec::new();
        sampler.walk(key, 100, |i| prefix.push(i)).unwrap();
        assert_eq!(prefix, full[..100]);
    }

    #[test]
    fn capacity_error_reports_counts() {
        let config = EmbedConfig::default();
        match keyed_path(KeyCandidate::new(1, 10), &config, 64 + 79) {
            Err(Error::Capacity {
                required,
                available,
            }) => {
                assert_eq!(required, 80);
                assert_eq!(available, 79);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(keyed_path(KeyCandidate::new(1, 10), &config.without_header(), 80).is_ok());
    }

    #[test]
    fn distinct_seed_overlap_matches_birthday_estimate() {
        // Mean |I(k1) ∩ I(k2)| over 1000 seed pairs vs L^2 / N.
        let n = 153_600;
        let l = 1000;
        let config = EmbedConfig::default().without_header();
        let mut sampler = PathSampler::new(&config, n).unwrap();
        let mut marks = vec![u32::MAX; n];
        let mut total = 0usize;
        let mut pairs = 0u32;
        // 8 * 125 bytes = 1000 path positions
        for pair in 0..1000u16 {
            let a = KeyCandidate::new(2 * pair, 125);
            let b = KeyCandidate::new(2 * pair + 1, 125);
            sampler.walk(a, l, |i| marks[i] = pair as u32).unwrap();
            sampler
                .walk(b, l, |i| total += (marks[i] == pair as u32) as usize)
                .unwrap();
            pairs += 1;
        }
        let mean = total as f64 / f64::from(pairs);
        let expected = (l * l) as f64 / n as f64;
        assert!(
            (mean - expected).abs() < 0.2 * expected,
            "mean overlap {mean}, expected {expected}"
        );
    }

    #[test]
    fn replace_table_values() {
        let config = EmbedConfig::default().without_header();
        let key = KeyCandidate::new(3, 1);
        let path = keyed_path(key, &config, 8).unwrap();
        let cover = GrayImage::new(4, 2, vec![10, 11, 10, 11, 10, 11, 10, 11]).unwrap();
        let bits = vec![true; 8];
        let stego = embed(&cover, &bits, key, &config).unwrap();
        for &i in &path {
            // 2i -> 2i+1 for bit 1, 2i+1 unchanged
            assert_eq!(stego.pixels()[i], 11);
        }
        let bits = vec![false; 8];
        let stego = embed(&cover, &bits, key, &config).unwrap();
        assert!(stego.pixels().iter().all(|&p| p == 10));
    }

    #[test]
    fn matching_message_leaves_cover_unchanged_outside_header() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cover = random_image(&mut rng, 64, 64);
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(77, 100);
        let path = keyed_path(key, &config, cover.len()).unwrap();
        let bits: Vec<bool> = path.iter().map(|&i| cover.pixels()[i] & 1 == 1).collect();
        for op in [EmbedOperation::Replace, EmbedOperation::PlusMinusOne] {
            let stego = embed(&cover, &bits, key, &config.with_operation(op)).unwrap();
            assert_eq!(&stego.pixels()[64..], &cover.pixels()[64..]);
        }
    }

    #[test]
    fn header_gets_filler_and_nothing_else_changes_there() {
        let cover = GrayImage::filled(32, 32, 100);
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(5, 10);
        let stego = embed(&cover, &[false; 80], key, &config).unwrap();
        let header = &stego.pixels()[..64];
        assert!(header.iter().all(|&p| p == 100 || p == 101));
        assert!(header.iter().any(|&p| p == 101));
        let other = embed(&cover, &[false; 80], KeyCandidate::new(6, 10), &config).unwrap();
        assert_ne!(header, &other.pixels()[..64]);
    }

    #[test]
    fn plus_minus_one_saturates_inward() {
        let config = EmbedConfig::default()
            .without_header()
            .with_operation(EmbedOperation::PlusMinusOne);
        let key = KeyCandidate::new(0, 1);
        let cover = GrayImage::new(4, 2, vec![0, 255, 0, 255, 0, 255, 0, 255]).unwrap();
        let flip: Vec<bool> = vec![true; 8];
        let stego = embed(&cover, &flip, key, &config).unwrap();
        // 0 needs odd parity -> 1, 255 already odd
        for (c, s) in cover.pixels().iter().zip(stego.pixels()) {
            assert_eq!(*s, if *c == 0 { 1 } else { 255 });
        }
        let stego = embed(&cover, &[false; 8], key, &config).unwrap();
        for (c, s) in cover.pixels().iter().zip(stego.pixels()) {
            assert_eq!(*s, if *c == 0 { 0 } else { 254 });
        }
    }

    #[test]
    fn plus_minus_one_uses_both_directions() {
        let config = EmbedConfig::default()
            .without_header()
            .with_operation(EmbedOperation::PlusMinusOne);
        let cover = GrayImage::filled(100, 100, 100);
        let key = KeyCandidate::new(11, 1000);
        let stego = embed(&cover, &vec![true; 8000], key, &config).unwrap();
        let up = stego.pixels().iter().filter(|&&p| p == 101).count();
        let down = stego.pixels().iter().filter(|&&p| p == 99).count();
        assert_eq!(up + down, 8000);
        assert!((up as f64 / 8000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn round_trip_both_operations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for op in [EmbedOperation::Replace, EmbedOperation::PlusMinusOne] {
            for _ in 0..10 {
                let cover = random_image(&mut rng, 80, 60);
                let config = EmbedConfig::default().with_operation(op);
                let len = rng.gen_range(1..=(80 * 60 - 64) / 8) as u32;
                let key = KeyCandidate::new(rng.gen(), len);
                let msg = random_bits(&mut rng, key.message_bits());
                let stego = embed(&cover, &msg, key, &config).unwrap();
                assert_eq!(extract(&stego, key, &config).unwrap(), msg);
                for (c, s) in cover.pixels().iter().zip(stego.pixels()) {
                    assert!((*c as i16 - *s as i16).abs() <= 1);
                }
            }
        }
    }

    #[test]
    fn wrong_key_agreement_is_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cover = random_image(&mut rng, 320, 480);
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(1234, 1000);
        let msg = random_bits(&mut rng, key.message_bits());
        let stego = embed(&cover, &msg, key, &config).unwrap();
        let mut sampler = PathSampler::new(&config, stego.len()).unwrap();
        let pixels = stego.pixels();
        for seed in (0..u16::MAX).step_by(65).take(1000) {
            if seed == key.seed {
                continue;
            }
            let mut agree = 0usize;
            let mut pos = 0usize;
            sampler
                .walk(KeyCandidate::new(seed, 1000), 8000, |i| {
                    agree += ((pixels[i] & 1 == 1) == msg[pos]) as usize;
                    pos += 1;
                })
                .unwrap();
            let frac = agree as f64 / 8000.0;
            assert!((0.45..=0.55).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn all_zero_round_trip() {
        let cover = GrayImage::filled(40, 40, 0);
        let config = EmbedConfig::default();
        let key = KeyCandidate::new(8, 100);
        let stego = embed(&cover, &[false; 800], key, &config).unwrap();
        assert!(extract(&stego, key, &config).unwrap().iter().all(|b| !b));
    }

    #[test]
    fn modified_fraction_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = EmbedConfig::default();
        for _ in 0..10 {
            let cover = random_image(&mut rng, 320, 480);
            let key = KeyCandidate::new(rng.gen(), 7680); // r = 0.4
            let msg = random_bits(&mut rng, key.message_bits());
            let stego = embed(&cover, &msg, key, &config).unwrap();
            let path = keyed_path(key, &config, cover.len()).unwrap();
            let changed = path
                .iter()
                .filter(|&&i| cover.pixels()[i] != stego.pixels()[i])
                .count();
            let frac = changed as f64 / path.len() as f64;
            assert!((frac - 0.5).abs() <= 0.02, "{frac}");
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let cover = GrayImage::filled(20, 20, 0);
        let err = embed(&cover, &[true; 7], KeyCandidate::new(1, 1), &EmbedConfig::default());
        assert!(matches!(err, Err(Error::LengthMismatch { expected: 8, actual: 7 })));
    }

    #[test]
    fn distortion_basics() {
        let a = GrayImage::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(hamming_distortion(&a, &a).unwrap(), 0.0);
        let flipped = GrayImage::new(2, 2, vec![1, 0, 3, 2]).unwrap();
        assert_eq!(hamming_distortion(&a, &flipped).unwrap(), 1.0);
        let b = GrayImage::filled(1, 4, 0);
        assert!(hamming_distortion(&a, &b).is_err());
    }

    #[test]
    fn bit_order_is_msb_first() {
        assert_eq!(
            bytes_to_bits(&[0b1000_0001]),
            vec![true, false, false, false, false, false, false, true]
        );
        assert_eq!(bits_to_bytes(&bytes_to_bits(b"stego")), b"stego");
    }
}
