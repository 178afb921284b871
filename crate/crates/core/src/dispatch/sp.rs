//! Dispatch without decompression by successive convexification.
//!
//! Each pipe's exact relation `exp(beta_r) + delta = exp(beta_s + 2t)` is
//! condensed into a monomial around the current physical state, which makes
//! it affine in log space. Every nodal `beta` then becomes an affine function
//! of the ratio variables, found by walking the tree from the slack node, and
//! the subproblem is a small convex program in the ratios alone. A step
//! toward its solution is halved until the re-simulated state satisfies every
//! bound and does not cost more than the current one.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::barrier::{self, Affine, Lse, Program};
use super::gp::{active_stations, sending_end, solve_gp};
use super::greedy::greedy_dispatch;
use super::{
    compression_power, finish, power_weight, Diagnostics, DispatchResult, Method, FEASIBILITY_TOL,
};
use crate::error::{Error, Result};
use crate::network::{CompressorId, Network};
use crate::steady::{check_bounds, solve_steady_with, BoundCheck, EdgeFlows};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpOptions {
    pub max_iters: usize,
    /// Stop once successive objectives differ by less than this, relatively.
    pub rel_tol: f64,
    /// Halvings tried in the step search.
    pub max_halvings: usize,
}

impl Default for SpOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            rel_tol: 1e-7,
            max_halvings: 40,
        }
    }
}

struct Vars {
    stations: Vec<CompressorId>,
    /// Free variable index per active station, `None` when its bounds pin it.
    var: Vec<Option<usize>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Vars {
    fn new(net: &Network, flows: &EdgeFlows) -> Self {
        let stations = active_stations(net, flows);
        let mut var = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut n = 0;
        for &id in &stations {
            let c = net.compressor(id);
            let l = libm::log(c.alpha_min.max(1.0));
            let h = libm::log(c.alpha_max);
            if h - l > 1e-12 {
                var.push(Some(n));
                n += 1;
            } else {
                var.push(None);
            }
            lo.push(l);
            hi.push(h.max(l));
        }
        Self {
            stations,
            var,
            lo,
            hi,
        }
    }

    fn dim(&self) -> usize {
        self.var.iter().flatten().count()
    }

    /// Free-variable vector from a full ratio vector.
    fn pack(&self, ratios: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (k, id) in self.stations.iter().enumerate() {
            if let Some(i) = self.var[k] {
                x[i] = libm::log(ratios[id.0]).clamp(self.lo[k], self.hi[k]);
            }
        }
        x
    }

    fn unpack(&self, x: &[f64], n_comp: usize) -> Vec<f64> {
        let mut ratios = vec![1.0; n_comp];
        for (k, id) in self.stations.iter().enumerate() {
            let t = match self.var[k] {
                Some(i) => x[i].clamp(self.lo[k], self.hi[k]),
                None => self.lo[k],
            };
            ratios[id.0] = libm::exp(t);
        }
        ratios
    }
}

/// Bounds-satisfying dispatch with every ratio at least 1.
pub fn solve_sp(net: &Network, flows: &EdgeFlows, opts: &SpOptions) -> Result<DispatchResult> {
    let tree = net.require_solvable()?;
    let vars = Vars::new(net, flows);
    let n_comp = net.compressors().len();
    let check = BoundCheck {
        rel_tol: FEASIBILITY_TOL,
        ..BoundCheck::default()
    };
    let feasible = |ratios: &[f64]| -> Option<f64> {
        let ss = solve_steady_with(net, ratios, flows.clone(), net.slack_pressure()).ok()?;
        if !check_bounds(&ss, net, &check).is_empty() {
            return None;
        }
        compression_power(net, flows, ratios).ok()
    };

    let mut notes = Vec::new();
    let mut start = None;
    let clipped = solve_gp(net, flows)
        .ok()
        .map(|gp| vars.unpack(&vars.pack(&gp.ratios), n_comp));
    if let Some(r) = &clipped {
        if feasible(r).is_some() {
            notes.push("started from the clipped geometric-program ratios".into());
            start = Some(r.clone());
        }
    }
    if start.is_none() {
        if let Ok(g) = greedy_dispatch(net, flows) {
            notes.push("started from the greedy ratios".into());
            start = Some(g.ratios);
        }
    }
    if start.is_none() {
        let from = clipped.unwrap_or_else(|| vec![1.0; n_comp]);
        if let Some(r) = restore(net, flows, &tree, &vars, from, &feasible) {
            notes.push("started from ratios restored to feasibility".into());
            start = Some(r);
        }
    }
    let mut x = match start {
        Some(r) => vars.pack(&r),
        None => {
            let r = vars.unpack(&vars.pack(&vec![f64::INFINITY; n_comp]), n_comp);
            if feasible(&r).is_none() {
                return Err(Error::Infeasible {
                    constraint: "no bounds-satisfying start: geometric program, greedy, restoration and maximum ratios all fail".into(),
                    violation: f64::NAN,
                });
            }
            notes.push("started from the maximum ratios".into());
            vars.pack(&r)
        }
    };
    let mut ratios = vars.unpack(&x, n_comp);
    let mut power = feasible(&ratios).expect("start point is feasible");
    let mut trace = vec![power];
    let mut last = barrier::Solution {
        x: Vec::new(),
        objective: 0.0,
        iterations: 0,
        gap: 0.0,
        max_constraint: 0.0,
    };

    for iter in 1..=opts.max_iters {
        let ss = solve_steady_with(net, &ratios, flows.clone(), net.slack_pressure())?;
        let prog = condensed_program(net, flows, &tree, &vars, &ss.node_pressure)?;
        last = barrier::solve(&prog, &x, &barrier::Options::default())?;
        let target = last.x.clone();

        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..opts.max_halvings {
            let cand: Vec<f64> = x
                .iter()
                .zip(&target)
                .map(|(a, b)| a + step * (b - a))
                .collect();
            let r = vars.unpack(&cand, n_comp);
            if let Some(p) = feasible(&r) {
                if p <= power {
                    x = cand;
                    ratios = r;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        let previous = power;
        if moved {
            power = compression_power(net, flows, &ratios)?;
        }
        trace.push(power);
        let change = (previous - power).abs();
        if !moved || change <= opts.rel_tol * previous.abs().max(f64::MIN_POSITIVE) {
            if !moved {
                notes.push("no improving feasible step; stopped at the current iterate".into());
            }
            let diagnostics = Diagnostics {
                iterations: iter,
                gap: last.gap,
                max_constraint: last.max_constraint,
                trace,
                notes,
            };
            return finish(net, flows, Method::Sp, ratios, diagnostics);
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        detail: format!(
            "signomial iteration did not settle (last gap {}, last power {power} W)",
            last.gap
        ),
        last_ratios: ratios,
        trace,
    })
}

/// Jump to the solution of the condensed program around the current state
/// until the re-simulated state satisfies the bounds.
fn restore(
    net: &Network,
    flows: &EdgeFlows,
    tree: &crate::network::Tree,
    vars: &Vars,
    mut ratios: Vec<f64>,
    feasible: &dyn Fn(&[f64]) -> Option<f64>,
) -> Option<Vec<f64>> {
    let n_comp = net.compressors().len();
    for _ in 0..20 {
        let ss = solve_steady_with(net, &ratios, flows.clone(), net.slack_pressure()).ok()?;
        let prog = condensed_program(net, flows, tree, vars, &ss.node_pressure).ok()?;
        let sol = barrier::solve(&prog, &vars.pack(&ratios), &barrier::Options::default()).ok()?;
        ratios = vars.unpack(&sol.x, n_comp);
        if feasible(&ratios).is_some() {
            return Some(ratios);
        }
    }
    None
}

/// The convex subproblem around the state with nodal pressures `p`.
fn condensed_program(
    net: &Network,
    flows: &EdgeFlows,
    tree: &crate::network::Tree,
    vars: &Vars,
    p: &[f64],
) -> Result<Program> {
    let dim = vars.dim();
    let gas = net.gas();
    let mut t_of = vec![None; net.compressors().len()];
    for (k, id) in vars.stations.iter().enumerate() {
        t_of[id.0] = Some(k);
    }
    // 2t at a station as (coefficients, constant).
    let two_t = |station: Option<CompressorId>| -> (Vec<f64>, f64) {
        let mut g = vec![0.0; dim];
        let mut h = 0.0;
        if let Some(k) = station.and_then(|c| t_of[c.0]) {
            match vars.var[k] {
                Some(i) => g[i] = 2.0,
                None => h = 2.0 * vars.lo[k],
            }
        }
        (g, h)
    };

    // beta_i = g_i . x + h_i
    let mut beta: Vec<(Vec<f64>, f64)> = vec![(vec![0.0; dim], 0.0); net.nodes().len()];
    beta[tree.root.0].1 = 2.0 * libm::log(net.slack_pressure());
    for e in &tree.edges {
        let pipe = net.pipe(e.pipe);
        let send = sending_end(net, flows, e.pipe);
        let s = pipe.node_at(send);
        let r = pipe.node_at(send.opposite());
        let delta = pipe.squared_drop(gas, flows.get(e.pipe)).abs();
        let br = 2.0 * libm::log(p[r.0]);
        let er = p[r.0] * p[r.0];
        let w = er / (er + delta);
        let c = libm::log(er + delta) - w * br;
        let (tg, th) = two_t(net.station(e.pipe, send));
        let (pg, ph) = beta[e.parent.0].clone();
        beta[e.child.0] = if e.parent == s {
            // beta_r = (beta_s + 2t - C) / w
            (
                pg.iter().zip(&tg).map(|(a, b)| (a + b) / w).collect(),
                (ph + th - c) / w,
            )
        } else {
            // beta_s = w beta_r + C - 2t
            (
                pg.iter().zip(&tg).map(|(a, b)| w * a - b).collect(),
                w * ph + c - th,
            )
        };
    }

    let sparse = |g: &[f64], scale: f64| -> Vec<(usize, f64)> {
        g.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, scale * v))
            .collect()
    };
    let mut constraints = Vec::new();
    let mut labels = Vec::new();
    let mut push =
        |coeffs: Vec<(usize, f64)>, constant: f64, label: alloc::string::String| -> Result<()> {
            if coeffs.is_empty() {
                if constant > 1e-9 {
                    return Err(Error::Infeasible {
                        constraint: label,
                        violation: constant,
                    });
                }
                return Ok(());
            }
            constraints.push(Lse::linear(Affine::new(coeffs, constant)));
            labels.push(label);
            Ok(())
        };
    for (k, n) in net.nodes().iter().enumerate() {
        if k == tree.root.0 {
            continue;
        }
        let (g, h) = &beta[k];
        if n.p_min > 0.0 {
            push(
                sparse(g, -1.0),
                2.0 * libm::log(n.p_min) - h,
                format!("lower pressure bound at node `{}`", n.id),
            )?;
        }
        if n.p_max.is_finite() {
            push(
                sparse(g, 1.0),
                h - 2.0 * libm::log(n.p_max),
                format!("upper pressure bound at node `{}`", n.id),
            )?;
        }
    }
    let mut objective = Vec::new();
    for (k, &id) in vars.stations.iter().enumerate() {
        let Some(i) = vars.var[k] else { continue };
        let comp = net.compressor(id);
        let name = &comp.id;
        push(
            vec![(i, -1.0)],
            vars.lo[k],
            format!("minimum ratio of `{name}`"),
        )?;
        push(
            vec![(i, 1.0)],
            -vars.hi[k],
            format!("maximum ratio of `{name}`"),
        )?;
        let pipe = net.pipe(comp.pipe);
        let cap = net.node(pipe.from).p_max.max(net.node(pipe.to).p_max);
        if cap.is_finite() {
            let (g, h) = &beta[pipe.node_at(comp.at).0];
            let mut coeffs = sparse(g, 0.5);
            match coeffs.iter_mut().find(|(j, _)| *j == i) {
                Some(c) => c.1 += 1.0,
                None => coeffs.push((i, 1.0)),
            }
            push(
                coeffs,
                0.5 * h - libm::log(cap),
                format!("discharge pressure of `{name}`"),
            )?;
        }
        let d = power_weight(net, flows, id);
        if d > 0.0 {
            objective.push(Affine::new(vec![(i, comp.exponent)], libm::log(d)));
        }
    }
    Ok(Program {
        dim,
        objective: (!objective.is_empty()).then(|| Lse::new(objective)),
        constraints,
        labels,
    })
}
