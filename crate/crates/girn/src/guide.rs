//! The book chapters, compiled as doc-tests.
//!
//! The narrative guide lives in `book/` at the repository root and is built
//! with `mdbook build book`. Each chapter is also included here verbatim, so
//! every Rust snippet in the book compiles and runs under
//! `cargo test --doc -p girn` — the book cannot drift from the library.

#[doc = include_str!("../../../book/src/groups.md")]
pub mod groups {}

#[doc = include_str!("../../../book/src/invariant-models.md")]
pub mod invariant_models {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/reconstruction.md")]
pub mod reconstruction {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
