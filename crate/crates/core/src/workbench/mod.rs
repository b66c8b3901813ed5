//! Image I/O, synthetic covers and experiment sweeps.

pub mod pgm;
pub mod sweep;
pub mod synth;
