//! File formats and the parallel experiment runner behind the `gne` binary.

pub mod format;
pub mod sweep;

pub use format::FormatError;
