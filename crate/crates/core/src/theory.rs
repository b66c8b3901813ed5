//! Information-theoretic bounds for keyed LSB hiding.
//!
//! Cover LSBs are modelled as Bernoulli(1/2) symbols under Hamming
//! distortion, where the hiding capacity has the closed form `H(D)`.
//! Everything here is in bits.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default slack added to the redundancy term, in bits per sign.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Shannon entropy of a Bernoulli(p) source, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain("p", p, "0 <= p <= 1"));
    }
    Ok(plogp(p) + plogp(1.0 - p))
}

fn plogp(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Capacity of the binary Hamming cover channel at distortion `d`.
pub fn hiding_capacity(d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::domain("D", d, "D >= 0"));
    }
    if d > 0.5 {
        Ok(1.0)
    } else {
        binary_entropy(d)
    }
}

/// `H(r/2) - r`: the slack left when embedding at rate `r`.
pub fn hiding_redundancy(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::domain("r", r, "0 <= r <= 1"));
    }
    Ok(binary_entropy(r / 2.0)? - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Samples per cover object.
    pub samples_per_object: f64,
    /// Key entropy `H(K)` in bits.
    pub key_entropy: f64,
    /// Message entropy per object `H(M)` in bits.
    pub message_entropy: f64,
    /// Hamming distortion level.
    pub distortion: f64,
    pub epsilon: f64,
}

impl TheoryParams {
    /// Parameters for LSB replacement at embedding rate `r` on `n` pixels
    /// with a key of `key_bits` bits: `R_m = r` and `D = r / 2`.
    pub fn lsb_replacement(pixels: usize, rate: f64, key_bits: f64) -> Self {
        let n = pixels as f64;
        Self {
            samples_per_object: n,
            key_entropy: key_bits,
            message_entropy: rate * n,
            distortion: rate / 2.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.samples_per_object >= 1.0) {
            return Err(Error::domain("N", self.samples_per_object, "N >= 1"));
        }
        if !(self.key_entropy >= 0.0) {
            return Err(Error::domain("H(K)", self.key_entropy, "H(K) >= 0"));
        }
        if !(self.message_entropy >= 0.0) {
            return Err(Error::domain("H(M)", self.message_entropy, "H(M) >= 0"));
        }
        if !(self.distortion >= 0.0) {
            return Err(Error::domain("D", self.distortion, "D >= 0"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::domain("epsilon", self.epsilon, "epsilon > 0"));
        }
        Ok(())
    }

    pub fn message_rate(&self) -> f64 {
        self.message_entropy / self.samples_per_object
    }

    pub fn key_rate(&self) -> f64 {
        self.key_entropy / self.samples_per_object
    }

    /// `C(D) - R_m + epsilon`, the exponent rate of the spurious-key bound.
    pub fn redundancy_gap(&self) -> Result<f64> {
        Ok(hiding_capacity(self.distortion)? - self.message_rate() + self.epsilon)
    }
}

/// Lower bound on the expected number of spurious keys after observing `n`
/// cover/stego pairs, clamped at zero.
pub fn spurious_key_bound(params: &TheoryParams, n: u64) -> Result<f64> {
    params.validate()?;
    if n == 0 {
        return Err(Error::domain("n", 0.0, "n >= 1"));
    }
    let exponent = n as f64 * params.samples_per_object * params.redundancy_gap()?;
    Ok(spurious_key_bound_raw(params.key_entropy, exponent).max(0.0))
}

/// `2^key_bits / 2^exponent - 1` evaluated without overflowing either power.
pub fn spurious_key_bound_raw(key_bits: f64, exponent: f64) -> f64 {
    (key_bits - exponent).exp2() - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum UnicityBound {
    Finite(f64),
    /// The redundancy gap is not positive, so the bound says nothing.
    Unbounded,
}

impl UnicityBound {
    pub fn as_f64(self) -> f64 {
        match self {
            UnicityBound::Finite(v) => v,
            UnicityBound::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for UnicityBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnicityBound::Finite(v) => write!(f, "{v:.6}"),
            UnicityBound::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Lower bound on the unicity distance (in cover objects) for a
/// known-cover attacker; it also bounds the stego-only attacker.
pub fn unicity_lower_bound(params: &TheoryParams) -> Result<UnicityBound> {
    params.validate()?;
    let gap = params.redundancy_gap()?;
    if gap <= 0.0 {
        return Ok(UnicityBound::Unbounded);
    }
    Ok(UnicityBound::Finite(params.key_rate() / gap))
}
