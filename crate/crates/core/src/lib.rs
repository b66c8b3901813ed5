pub mod attack;
pub mod codec;
pub mod error;
pub mod image;
pub mod noise;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod workbench;
