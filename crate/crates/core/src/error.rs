use std::io;

use thiserror::Error;

use crate::workbench::pgm::PgmError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("path needs {required} pixels but only {available} are available")]
    Capacity { required: usize, available: usize },

    #[error("message has {actual} bits, key expects {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("image {width}x{height} is too small for a radius-{radius} filter")]
    DegenerateImage {
        width: usize,
        height: usize,
        radius: usize,
    },

    #[error("pixel buffer has {actual} values, expected {expected}")]
    PixelCount { expected: usize, actual: usize },

    #[error("attack infeasible: {0}")]
    Infeasible(String),

    #[error("empty keyspace")]
    EmptyKeyspace,

    #[error(transparent)]
    Pgm(#[from] PgmError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }
}
