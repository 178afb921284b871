//! File formats, CSV reports, scenario runs and the parallel Monte-Carlo
//! driver on top of `gasjitter-core`.

pub mod ensemble;
pub mod format;
pub mod quantity;
pub mod report;
pub mod scenario;

pub use format::{parse_network, read_network, serialize_network, FormatError, Parsed};
