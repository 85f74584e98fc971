//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    GridMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("group {group} requires a square grid, got {height}x{width}")]
    NonSquareGrid {
        group: &'static str,
        height: usize,
        width: usize,
    },

    #[error("unknown group name {0:?} (expected trivial | flip_h | klein4 | d4)")]
    UnknownGroup(String),

    #[error("invalid permutation: not a bijection on 0..{len}")]
    InvalidPermutation { len: usize },

    #[error("orbitope resolution must be >= 1")]
    ZeroResolution,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has {samples} samples but {labels} labels")]
    LabelCountMismatch { samples: usize, labels: usize },

    #[error("label {0} is not a valid class byte (0..=9)")]
    InvalidClassLabel(u8),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("reconstruction objective became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("bad magic in {file_kind}: expected {expected:#010x}, got {got:#010x}")]
    BadMagic {
        file_kind: &'static str,
        expected: u32,
        got: u32,
    },

    #[error("{file_kind} is truncated: needed {needed} bytes, had {had}")]
    Truncated {
        file_kind: &'static str,
        needed: usize,
        had: usize,
    },

    #[error("image file has {images} items but label file has {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("CIFAR-10 file size {size} is not a multiple of the 3073-byte record")]
    BadRecordSize { size: usize },

    #[error("downscale ratio {src}->{dst} is not an integer factor")]
    NonIntegerRatio { src: usize, dst: usize },

    #[error("unsupported {what}: {detail}")]
    Unsupported { what: &'static str, detail: String },

    #[error("checkpoint format version {0} is not supported")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
