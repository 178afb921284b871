//! Stationary gas flow, compressor dispatch and diffusive pressure jitter on
//! tree-structured natural gas pipeline networks.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: file formats, CSV output and the command-line
//! front end live in the `gasjitter` crate.
//!
//! The pipeline is:
//!
//! 1. [`network`]: the data model, validation and load/supply transforms.
//! 2. [`steady`]: unique edge flows on a tree and the stationary pressure
//!    profile for given compression ratios.
//! 3. [`dispatch`]: compression ratios from a greedy operating rule, a
//!    geometric program, or a signomial refinement that forbids decompression.
//! 4. [`jitter`]: the zero-mode profile, edge constants and the diffusion
//!    coefficient of pressure fluctuations driven by stochastic consumption.
//! 5. [`sim`]: a transient Monte-Carlo simulator used as an independent check
//!    of the diffusive law.
#![no_std]

extern crate alloc;

pub mod dispatch;
pub mod error;
pub mod jitter;
pub mod network;
pub mod sim;
pub mod steady;
pub mod transform;
pub mod units;

pub use error::{Error, Result};
pub use network::{
    Compressor, CompressorId, CompressorSpec, End, GasProperties, Network, NetworkBuilder, Node,
    NodeId, Pipe, PipeId, PipeSpec, ValidationReport,
};
pub use steady::{EdgeFlows, SteadyState};
