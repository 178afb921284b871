//! Compression ratio selection.
//!
//! Three methods are available:
//!
//! * [`greedy_dispatch`]: walk away from the slack node and switch a station
//!   to its maximum ratio only when the segment behind it would otherwise
//!   fall below its lower pressure bound.
//! * [`solve_gp`]: the minimum-power dispatch as a geometric program in
//!   `beta = 2 log p` and `t = log alpha`. The lower ratio bound is dropped,
//!   so stations may decompress.
//! * [`solve_sp`]: a sequence of convex subproblems that keeps `alpha >= 1`.
//!
//! Flow directions are fixed by [`compute_tree_flows`] before any of them
//! runs. A station whose flow enters it from the pipe is bypassed (`alpha =
//! 1`) by every method.
//!
//! [`compute_tree_flows`]: crate::steady::compute_tree_flows

pub mod barrier;
mod gp;
mod greedy;
mod sp;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::network::{CompressorId, Network};
use crate::steady::{check_bounds, BoundCheck, EdgeFlows, SteadyState};

pub use gp::{build_gp, solve_gp, solve_gp_problem, GpCoupling, GpProblem, GpSolution};
pub use greedy::greedy_dispatch;
pub use sp::{solve_sp, SpOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Greedy,
    Gp,
    Sp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Greedy, Method::Gp, Method::Sp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Gp => "gp",
            Method::Sp => "sp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Method::Greedy),
            "gp" => Ok(Method::Gp),
            "sp" => Ok(Method::Sp),
            other => Err(Error::Domain(format!(
                "unknown dispatch method `{other}` (expected greedy, gp or sp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Newton steps for gp, outer iterations for sp, stations visited for greedy.
    pub iterations: usize,
    /// Duality gap bound of the last convex solve.
    pub gap: f64,
    /// Largest constraint value of the last convex solve (log space).
    pub max_constraint: f64,
    /// Objective after each iteration (power, W).
    pub trace: Vec<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchResult {
    pub method: Method,
    pub ratios: Vec<f64>,
    /// Re-simulated stationary state for `ratios`.
    pub steady: SteadyState,
    /// Total compression power, W.
    pub power: f64,
    pub diagnostics: Diagnostics,
}

pub fn dispatch(net: &Network, flows: &EdgeFlows, method: Method) -> Result<DispatchResult> {
    match method {
        Method::Greedy => greedy_dispatch(net, flows),
        Method::Gp => solve_gp(net, flows),
        Method::Sp => solve_sp(net, flows, &SpOptions::default()),
    }
}

/// Flow leaving a station's node into its pipe.
pub fn station_flow(net: &Network, flows: &EdgeFlows, id: CompressorId) -> f64 {
    let c = net.compressor(id);
    let node = net.pipe(c.pipe).node_at(c.at);
    flows.leaving(net, c.pipe, node)
}

/// `c phi / eta` for one station, zero when it does not carry forward flow.
pub(crate) fn power_weight(net: &Network, flows: &EdgeFlows, id: CompressorId) -> f64 {
    let c = net.compressor(id);
    let phi = station_flow(net, flows, id);
    if phi > 0.0 {
        c.cost * phi / c.efficiency
    } else {
        0.0
    }
}

/// Total power `sum c phi / eta (max(alpha^m, 1) - 1)`.
///
/// A station with reversed flow must be bypassed (`alpha = 1`).
pub fn compression_power(net: &Network, flows: &EdgeFlows, ratios: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (k, c) in net.compressors().iter().enumerate() {
        let id = CompressorId(k);
        let phi = station_flow(net, flows, id);
        let alpha = ratios[k];
        if phi < 0.0 && alpha != 1.0 {
            return Err(Error::Orientation {
                compressor: c.id.clone(),
                flow: phi,
            });
        }
        if phi > 0.0 {
            total += c.cost * phi / c.efficiency * (libm::pow(alpha, c.exponent).max(1.0) - 1.0);
        }
    }
    Ok(total)
}

/// `sum c phi / eta alpha^m`, the quantity the geometric program minimises
/// in log form. Unlike [`compression_power`] it rewards ratios below 1.
pub fn ratio_objective(net: &Network, flows: &EdgeFlows, ratios: &[f64]) -> f64 {
    net.compressors()
        .iter()
        .enumerate()
        .map(|(k, c)| power_weight(net, flows, CompressorId(k)) * libm::pow(ratios[k], c.exponent))
        .sum()
}

/// Relative slack allowed when re-checking a dispatch against the bounds.
pub const FEASIBILITY_TOL: f64 = 1e-6;

pub(crate) fn finish(
    net: &Network,
    flows: &EdgeFlows,
    method: Method,
    ratios: Vec<f64>,
    diagnostics: Diagnostics,
) -> Result<DispatchResult> {
    let steady =
        crate::steady::solve_steady_with(net, &ratios, flows.clone(), net.slack_pressure())?;
    let opts = BoundCheck {
        rel_tol: FEASIBILITY_TOL,
        ..BoundCheck::default()
    };
    let violations = check_bounds(&steady, net, &opts);
    if let Some(v) = violations.first() {
        return Err(Error::Bound(format!(
            "{} dispatch leaves {} violation(s); first: {}",
            method,
            violations.len(),
            v.describe(net)
        )));
    }
    let power = compression_power(net, flows, &ratios)?;
    Ok(DispatchResult {
        method,
        ratios,
        steady,
        power,
        diagnostics,
    })
}
