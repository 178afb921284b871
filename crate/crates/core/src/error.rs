use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown {kind} reference `{name}`")]
    UnknownReference { kind: &'static str, name: String },

    #[error("network is unbalanced: net injection {imbalance} kg/s")]
    Unbalanced { imbalance: f64 },

    #[error("network is not a connected tree: {0}")]
    NotATree(String),

    #[error("pipe `{pipe}`: pressure collapses before x = {x} m (p^2 = {radicand} Pa^2)")]
    PressureCollapse { pipe: String, x: f64, radicand: f64 },

    #[error("compressor `{compressor}`: flow {flow} kg/s runs against its orientation")]
    Orientation { compressor: String, flow: f64 },

    #[error("pressure bound violated: {0}")]
    Bound(String),

    #[error("infeasible: {constraint} (violation {violation})")]
    Infeasible { constraint: String, violation: f64 },

    #[error("no convergence after {iterations} iterations: {detail}")]
    NonConvergence {
        iterations: usize,
        detail: String,
        last_ratios: Vec<f64>,
        trace: Vec<f64>,
    },

    #[error("time step {dt} s exceeds the stability limit {limit} s")]
    Cfl { dt: f64, limit: f64 },

    #[error("simulation blew up in pipe `{pipe}` cell {cell} at t = {t} s")]
    BlowUp { pipe: String, cell: usize, t: f64 },

    #[error("{0}")]
    Domain(String),
}
