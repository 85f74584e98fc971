//! Group-invariant ReLU networks and the reconstruction attacks that target
//! them.
//!
//! The crate trains small symmetrized (Reynolds-averaged) ReLU classifiers
//! that are exactly invariant under a finite group of pixel permutations,
//! then attacks them with training-data reconstruction methods — activation
//! maximization, stationarity-based (KKT) reconstruction, the symmetry-aware
//! SAME-GD variant, and a deep-image-prior parameterization — and evaluates
//! the results with group-invariant metrics.
//!
//! Modules:
//!
//! * [`group`] — finite groups acting on pixel grids: orbits, stabilizers,
//!   orbit averages, orbitope discretization, invariant distance.
//! * [`diff`] — exact derivatives of the fixed bias-free two-hidden-layer
//!   ReLU MLP, including the mixed second derivative the KKT objective needs.
//! * [`model`] — Reynolds symmetrization, the invariant model, checkpoints.
//! * [`train`] — full-batch GD with binary cross-entropy; KKT residual
//!   diagnostics.
//! * [`recon`] — the four attacks over candidate images.
//! * [`eval`] — DSSIM, group-matched nearest neighbors, orbitope histograms,
//!   symmetry collapse scores.
//! * [`data`] — IDX/CIFAR-10 readers, synthetic data, downscaling, PGM/CSV
//!   emission.
//! * [`verify`] — the numerical property suite behind `girn verify`.
//!
//! The narrative guide in `book/` walks through the same pipeline; its code
//! snippets compile and run as doc-tests via the [`guide`] module.

pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod group;
pub mod guide;
pub mod image;
pub mod model;
pub mod recon;
pub mod train;
pub mod verify;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use image::{Grid, ImageTensor};
