//! Pseudorandom generators that drive embedding paths.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RngKind {
    /// 32-bit LCG in the style of Borland C++ `random()`.
    #[default]
    BorlandLcg,
    SplitMix,
}

impl std::str::FromStr for RngKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "borland_lcg" | "borland" => Ok(RngKind::BorlandLcg),
            "splitmix" => Ok(RngKind::SplitMix),
            other => Err(format!("unknown rng kind `{other}`")),
        }
    }
}

/// Uniform draws on `0..n`.
pub trait PathRng {
    fn below(&mut self, n: u32) -> u32;
}

const BORLAND_MULTIPLIER: u32 = 0x015A_4E35;
const BORLAND_RAND_MAX: u32 = 0x7FFF;

#[derive(Debug, Clone)]
pub struct BorlandLcg {
    state: u32,
}

impl BorlandLcg {
    pub fn new(seed: u32) -> Self {
        Self { state: seed }
    }

    /// One 15-bit output, as `rand()` returns it.
    #[inline]
    pub fn next_raw(&mut self) -> u32 {
        self.state = self.state.wrapping_mul(BORLAND_MULTIPLIER).wrapping_add(1);
        (self.state >> 16) & BORLAND_RAND_MAX
    }
}

impl PathRng for BorlandLcg {
    /// `rand() % n` when `n` fits in 15 bits. Larger ranges (every image
    /// bigger than 32768 pixels) concatenate two outputs into 30 bits.
    #[inline]
    fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        if n <= BORLAND_RAND_MAX + 1 {
            self.next_raw() % n
        } else {
            let hi = self.next_raw();
            let lo = self.next_raw();
            ((hi << 15) | lo) % n
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    #[inline]
    pub fn next_bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

impl PathRng for SplitMix64 {
    #[inline]
    fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        ((u128::from(self.next_u64()) * u128::from(n)) >> 64) as u32
    }
}
