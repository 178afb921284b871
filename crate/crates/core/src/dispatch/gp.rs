//! Minimum-power dispatch as a geometric program.
//!
//! With `beta_i = 2 log p_i` and `t = log alpha` the stationary relation
//! `p_r^2 = alpha^2 p_s^2 - delta` along a pipe from sending node `s` to
//! receiving node `r`, relaxed to `<=`, becomes the convex constraint
//!
//! ```text
//! log( exp(beta_r - beta_s - 2t) + exp(log delta - beta_s - 2t) ) <= 0
//! ```
//!
//! and the power `sum d_k alpha_k^m` becomes `log sum exp(log d_k + m t_k)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::barrier::{self, Affine, Lse, Program};
use super::{finish, power_weight, station_flow, Diagnostics, DispatchResult, Method};
use crate::error::{Error, Result};
use crate::network::{CompressorId, End, Network, NodeId, PipeId};
use crate::steady::EdgeFlows;

/// Pressure-loss constraint of one pipe.
#[derive(Debug, Clone, PartialEq)]
pub struct GpCoupling {
    pub pipe: PipeId,
    pub send: NodeId,
    pub recv: NodeId,
    /// Ratio variable of the station at the sending end, if it is active.
    pub ratio: Option<usize>,
    /// `(beta L / d) (phi / A)^2`, Pa^2.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpProblem {
    pub node_names: Vec<String>,
    pub slack: NodeId,
    /// `2 log p0`, held fixed.
    pub slack_beta: f64,
    /// `2 log p_min` and `2 log p_max` per node.
    pub beta_bounds: Vec<(f64, f64)>,
    /// The compressor behind each ratio variable.
    pub stations: Vec<CompressorId>,
    pub station_names: Vec<String>,
    /// `log alpha_max` per ratio variable.
    pub t_max: Vec<f64>,
    /// `(sending node, log p_cap)`: the discharge pressure stays below the
    /// larger upper bound of the pipe's two nodes.
    pub discharge: Vec<(NodeId, f64)>,
    /// `(c phi / eta, m)` per ratio variable.
    pub weights: Vec<(f64, f64)>,
    pub couplings: Vec<GpCoupling>,
    pub pipe_names: Vec<String>,
}

impl GpProblem {
    pub fn num_beta(&self) -> usize {
        self.beta_bounds.len()
    }

    pub fn num_t(&self) -> usize {
        self.stations.len()
    }

    /// Index of `beta_i` among the reduced variables (the slack is fixed).
    fn beta_index(&self, i: NodeId) -> Option<usize> {
        match i.0.cmp(&self.slack.0) {
            core::cmp::Ordering::Less => Some(i.0),
            core::cmp::Ordering::Equal => None,
            core::cmp::Ordering::Greater => Some(i.0 - 1),
        }
    }

    fn t_index(&self, k: usize) -> usize {
        self.num_beta() - 1 + k
    }

    /// Affine form in the reduced variables from full-space pieces.
    fn affine(&self, betas: &[(NodeId, f64)], ts: &[(usize, f64)], constant: f64) -> Affine {
        let mut coeffs = Vec::new();
        let mut c = constant;
        for &(i, a) in betas {
            match self.beta_index(i) {
                Some(idx) => coeffs.push((idx, a)),
                None => c += a * self.slack_beta,
            }
        }
        for &(k, a) in ts {
            coeffs.push((self.t_index(k), a));
        }
        Affine::new(coeffs, c)
    }

    pub fn to_program(&self) -> Program {
        let mut constraints = Vec::new();
        let mut labels = Vec::new();
        for (k, &(lo, hi)) in self.beta_bounds.iter().enumerate() {
            let node = NodeId(k);
            if node == self.slack {
                continue;
            }
            constraints.push(Lse::linear(self.affine(&[(node, -1.0)], &[], lo)));
            labels.push(format!(
                "lower pressure bound at node `{}`",
                self.node_names[k]
            ));
            constraints.push(Lse::linear(self.affine(&[(node, 1.0)], &[], -hi)));
            labels.push(format!(
                "upper pressure bound at node `{}`",
                self.node_names[k]
            ));
        }
        for (k, &tmax) in self.t_max.iter().enumerate() {
            constraints.push(Lse::linear(self.affine(&[], &[(k, 1.0)], -tmax)));
            labels.push(format!("maximum ratio of `{}`", self.station_names[k]));
            let (s, cap) = self.discharge[k];
            constraints.push(Lse::linear(self.affine(&[(s, 0.5)], &[(k, 1.0)], -cap)));
            labels.push(format!("discharge pressure of `{}`", self.station_names[k]));
        }
        for c in &self.couplings {
            let ts: Vec<(usize, f64)> = c.ratio.map(|k| (k, -2.0)).into_iter().collect();
            let mut terms = vec![self.affine(&[(c.recv, 1.0), (c.send, -1.0)], &ts, 0.0)];
            if c.delta > 0.0 {
                terms.push(self.affine(&[(c.send, -1.0)], &ts, libm::log(c.delta)));
            }
            constraints.push(Lse::new(terms));
            labels.push(format!(
                "pressure loss along pipe `{}`",
                self.pipe_names[c.pipe.0]
            ));
        }
        let objective_terms: Vec<Affine> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &(d, _))| d > 0.0)
            .map(|(k, &(d, m))| self.affine(&[], &[(k, m)], libm::log(d)))
            .collect();
        Program {
            dim: self.num_beta() - 1 + self.num_t(),
            objective: (!objective_terms.is_empty()).then(|| Lse::new(objective_terms)),
            constraints,
            labels,
        }
    }

    fn start_point(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_beta() - 1 + self.num_t());
        for (k, &(lo, hi)) in self.beta_bounds.iter().enumerate() {
            if k != self.slack.0 {
                x.push(0.5 * (lo + hi));
            }
        }
        x.extend(self.t_max.iter().map(|&t| 0.5 * t));
        x
    }
}

/// Sending end of a pipe: where the flow enters it. A zero-flow pipe is
/// oriented from its station if it has exactly one, else `from -> to`.
pub(crate) fn sending_end(net: &Network, flows: &EdgeFlows, pipe: PipeId) -> End {
    let phi = flows.get(pipe);
    if phi > 0.0 {
        End::From
    } else if phi < 0.0 {
        End::To
    } else if net.station(pipe, End::To).is_some() && net.station(pipe, End::From).is_none() {
        End::To
    } else {
        End::From
    }
}

/// Stations that may compress: at the sending end with non-negative flow.
/// Every other station is bypassed.
pub(crate) fn active_stations(net: &Network, flows: &EdgeFlows) -> Vec<CompressorId> {
    (0..net.compressors().len())
        .map(CompressorId)
        .filter(|&id| {
            let c = net.compressor(id);
            c.at == sending_end(net, flows, c.pipe) && station_flow(net, flows, id) >= 0.0
        })
        .collect()
}

pub fn build_gp(net: &Network, flows: &EdgeFlows) -> Result<GpProblem> {
    net.require_solvable()?;
    let gas = net.gas();
    let mut beta_bounds = Vec::with_capacity(net.nodes().len());
    for n in net.nodes() {
        if !(n.p_min > 0.0 && n.p_max.is_finite()) {
            return Err(Error::Domain(format!(
                "node `{}` needs finite positive pressure bounds for the geometric program",
                n.id
            )));
        }
        beta_bounds.push((2.0 * libm::log(n.p_min), 2.0 * libm::log(n.p_max)));
    }
    let stations = active_stations(net, flows);
    let mut var_of = vec![None; net.compressors().len()];
    for (k, id) in stations.iter().enumerate() {
        var_of[id.0] = Some(k);
    }
    let mut t_max = Vec::new();
    let mut discharge = Vec::new();
    let mut weights = Vec::new();
    for &id in &stations {
        let c = net.compressor(id);
        let pipe = net.pipe(c.pipe);
        t_max.push(libm::log(c.alpha_max));
        let cap = net.node(pipe.from).p_max.max(net.node(pipe.to).p_max);
        discharge.push((pipe.node_at(c.at), libm::log(cap)));
        weights.push((power_weight(net, flows, id), c.exponent));
    }
    let couplings = net
        .pipes()
        .iter()
        .enumerate()
        .map(|(k, pipe)| {
            let id = PipeId(k);
            let send = sending_end(net, flows, id);
            GpCoupling {
                pipe: id,
                send: pipe.node_at(send),
                recv: pipe.node_at(send.opposite()),
                ratio: net.station(id, send).and_then(|c| var_of[c.0]),
                delta: pipe.squared_drop(gas, flows.get(id)).abs(),
            }
        })
        .collect();
    Ok(GpProblem {
        node_names: net.nodes().iter().map(|n| n.id.clone()).collect(),
        slack: net.slack(),
        slack_beta: 2.0 * libm::log(net.slack_pressure()),
        beta_bounds,
        station_names: stations
            .iter()
            .map(|&id| net.compressor(id).id.clone())
            .collect(),
        stations,
        t_max,
        discharge,
        weights,
        couplings,
        pipe_names: net.pipes().iter().map(|p| p.id.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpSolution {
    /// `2 log p_i` per node.
    pub beta_hat: Vec<f64>,
    /// `log alpha` per ratio variable.
    pub t_hat: Vec<f64>,
    /// `log sum d_k alpha_k^m` (negative infinity when nothing costs).
    pub objective: f64,
    pub iterations: usize,
    pub gap: f64,
    pub max_constraint: f64,
}

pub fn solve_gp_problem(problem: &GpProblem) -> Result<GpSolution> {
    let (lo, hi) = problem.beta_bounds[problem.slack.0];
    if problem.slack_beta < lo || problem.slack_beta > hi {
        return Err(Error::Infeasible {
            constraint: format!(
                "slack pressure outside the bounds of node `{}`",
                problem.node_names[problem.slack.0]
            ),
            violation: (problem.slack_beta - lo).min(0.0).abs()
                + (problem.slack_beta - hi).max(0.0),
        });
    }
    let prog = problem.to_program();
    let sol = barrier::solve(&prog, &problem.start_point(), &barrier::Options::default())?;
    let mut beta_hat = Vec::with_capacity(problem.num_beta());
    for k in 0..problem.num_beta() {
        beta_hat.push(match problem.beta_index(NodeId(k)) {
            Some(i) => sol.x[i],
            None => problem.slack_beta,
        });
    }
    let t_hat = sol.x[problem.num_beta() - 1..].to_vec();
    let objective = if prog.objective.is_some() {
        sol.objective
    } else {
        f64::NEG_INFINITY
    };
    Ok(GpSolution {
        beta_hat,
        t_hat,
        objective,
        iterations: sol.iterations,
        gap: sol.gap,
        max_constraint: sol.max_constraint,
    })
}

/// Solve the geometric program and re-simulate its ratios.
pub fn solve_gp(net: &Network, flows: &EdgeFlows) -> Result<DispatchResult> {
    let problem = build_gp(net, flows)?;
    let sol = solve_gp_problem(&problem)?;
    let mut ratios = vec![1.0; net.compressors().len()];
    for (k, id) in problem.stations.iter().enumerate() {
        ratios[id.0] = libm::exp(sol.t_hat[k]);
    }
    let diagnostics = Diagnostics {
        iterations: sol.iterations,
        gap: sol.gap,
        max_constraint: sol.max_constraint,
        trace: Vec::new(),
        notes: Vec::new(),
    };
    let mut result = finish(net, flows, Method::Gp, ratios, diagnostics)?;
    result.diagnostics.trace.push(result.power);
    Ok(result)
}
