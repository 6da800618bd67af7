//! The user guide, compiled from the book chapters in `book/src/`.
//!
//! Each chapter is included verbatim as a module's documentation, so every
//! code block in the book runs under `cargo test --doc` and cannot drift out
//! of sync with the library.

#[doc = include_str!("../../../book/src/mixtures.md")]
pub mod mixtures {}

#[doc = include_str!("../../../book/src/taylor.md")]
pub mod taylor {}

#[doc = include_str!("../../../book/src/splitting.md")]
pub mod splitting {}

#[doc = include_str!("../../../book/src/bounds.md")]
pub mod bounds {}

#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}

#[doc = include_str!("../../../book/src/mi-pipeline.md")]
pub mod mi_pipeline {}

#[doc = include_str!("../../../book/src/bootstrap.md")]
pub mod bootstrap {}
