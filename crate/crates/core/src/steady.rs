//! Stationary gas flow on a tree.
//!
//! On a tree the edge flows follow from nodal balance alone. Given the
//! compression ratios, pressures then propagate outward from the slack node
//! through the closed-form stationary profile
//! `p(x)^2 = p(0)^2 - (beta x / d) (phi/A) |phi/A|`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{CompressorId, End, GasProperties, Network, NodeId, Pipe, PipeId};
use crate::units;

/// Per-pipe signed mass flow, kg/s, positive along `from -> to`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFlows(Vec<f64>);

impl EdgeFlows {
    pub fn new(flows: Vec<f64>) -> Self {
        Self(flows)
    }

    pub fn get(&self, pipe: PipeId) -> f64 {
        self.0[pipe.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Net flow leaving `node` through its pipes.
    pub fn outflow(&self, net: &Network, node: NodeId) -> f64 {
        net.neighbors(node)
            .iter()
            .map(|&(pipe, _)| self.leaving(net, pipe, node))
            .sum()
    }

    /// Flow leaving `node` into `pipe`.
    pub fn leaving(&self, net: &Network, pipe: PipeId, node: NodeId) -> f64 {
        if net.pipe(pipe).from == node {
            self.0[pipe.0]
        } else {
            -self.0[pipe.0]
        }
    }
}

/// Unique stationary flows on a balanced tree.
///
/// The flow on each pipe is the total injection on its `from` side once the
/// pipe is removed.
pub fn compute_tree_flows(net: &Network) -> Result<EdgeFlows> {
    let tree = net.require_solvable()?;
    let mut subtree: Vec<f64> = net.nodes().iter().map(|n| n.injection).collect();
    let mut flows = vec![0.0; net.pipes().len()];
    for edge in tree.edges.iter().rev() {
        let s = subtree[edge.child.0];
        subtree[edge.parent.0] += s;
        // The child's subtree sends `s` toward the parent.
        flows[edge.pipe.0] = if net.pipe(edge.pipe).from == edge.child {
            s
        } else {
            -s
        };
    }
    Ok(EdgeFlows(flows))
}

/// Stationary pressure at `x` along a pipe entered at `p_in` (just after any
/// compression) carrying `flow` in the `from -> to` direction.
pub fn pressure_after(
    p_in: f64,
    pipe: &Pipe,
    flow: f64,
    x: f64,
    gas: &GasProperties,
) -> Result<f64> {
    if !(p_in > 0.0) {
        return Err(Error::Domain(format!(
            "inlet pressure must be positive, got {p_in}"
        )));
    }
    if !(0.0..=pipe.length).contains(&x) {
        return Err(Error::Domain(format!(
            "position {x} m lies outside pipe `{}` of length {} m",
            pipe.id, pipe.length
        )));
    }
    let radicand = p_in * p_in - pipe.squared_drop_at(gas, flow, x);
    if radicand <= 0.0 {
        return Err(Error::PressureCollapse {
            pipe: pipe.id.clone(),
            x,
            radicand,
        });
    }
    Ok(libm::sqrt(radicand))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub flows: EdgeFlows,
    /// Nodal pressure p_i.
    pub node_pressure: Vec<f64>,
    /// Pressure inside each pipe at `x = 0` and `x = L`, i.e. after the
    /// station at that end if there is one.
    pub end_pressure: Vec<[f64; 2]>,
    /// Ratio per compressor.
    pub ratios: Vec<f64>,
    gas: GasProperties,
    pipes: Vec<Pipe>,
}

impl SteadyState {
    pub fn pressure(&self, node: NodeId) -> f64 {
        self.node_pressure[node.0]
    }

    /// p_{i->j}: pressure at a pipe end on the pipe side of any station.
    pub fn boosted(&self, pipe: PipeId, end: End) -> f64 {
        self.end_pressure[pipe.0][end.index()]
    }

    pub fn length(&self, pipe: PipeId) -> f64 {
        self.pipes[pipe.0].length
    }

    pub fn flow(&self, pipe: PipeId) -> f64 {
        self.flows.get(pipe)
    }

    /// Stationary pressure at `x` along `pipe`.
    pub fn pressure_at(&self, pipe: PipeId, x: f64) -> f64 {
        let p = &self.pipes[pipe.0];
        let x = x.clamp(0.0, p.length);
        let p0 = self.end_pressure[pipe.0][0];
        libm::sqrt((p0 * p0 - p.squared_drop_at(&self.gas, self.flows.get(pipe), x)).max(0.0))
    }

    /// `samples` uniformly spaced `(x, p)` pairs from `x = 0` to `x = L`.
    pub fn profile(&self, pipe: PipeId, samples: usize) -> Vec<(f64, f64)> {
        let length = self.pipes[pipe.0].length;
        sample_grid(length, samples)
            .map(|x| (x, self.pressure_at(pipe, x)))
            .collect()
    }
}

/// Uniform grid of `samples` points on `[0, length]` (at least two).
pub fn sample_grid(length: f64, samples: usize) -> impl Iterator<Item = f64> {
    let n = samples.max(2);
    (0..n).map(move |k| {
        if k + 1 == n {
            length
        } else {
            length * k as f64 / (n - 1) as f64
        }
    })
}

/// Stationary solution for given compression ratios, anchored at the
/// network's slack pressure.
///
/// Ratios are not checked against the stations' bounds so that relaxed
/// dispatch results can be re-simulated; they only need to be positive.
pub fn solve_steady(net: &Network, ratios: &[f64]) -> Result<SteadyState> {
    let flows = compute_tree_flows(net)?;
    solve_steady_with(net, ratios, flows, net.slack_pressure())
}

/// As [`solve_steady`] with precomputed flows and an explicit slack pressure.
pub fn solve_steady_with(
    net: &Network,
    ratios: &[f64],
    flows: EdgeFlows,
    slack_pressure: f64,
) -> Result<SteadyState> {
    if ratios.len() != net.compressors().len() {
        return Err(Error::Domain(format!(
            "expected {} compression ratios, got {}",
            net.compressors().len(),
            ratios.len()
        )));
    }
    if let Some(k) = ratios.iter().position(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::Domain(format!(
            "compression ratio of `{}` must be positive, got {}",
            net.compressor(CompressorId(k)).id,
            ratios[k]
        )));
    }
    let tree = net.tree()?;
    let gas = *net.gas();
    let mut node_pressure = vec![0.0; net.nodes().len()];
    let mut end_pressure = vec![[0.0; 2]; net.pipes().len()];
    node_pressure[tree.root.0] = slack_pressure;

    for edge in &tree.edges {
        let pipe = net.pipe(edge.pipe);
        let near = pipe
            .end_at(edge.parent)
            .expect("tree edge touches its parent");
        let far = near.opposite();
        let drop = pipe.squared_drop(&gas, flows.get(edge.pipe));
        let p_near = node_pressure[edge.parent.0] * net.end_ratio(ratios, edge.pipe, near);
        // p(L)^2 = p(0)^2 - drop.
        let far_sq = match near {
            End::From => p_near * p_near - drop,
            End::To => p_near * p_near + drop,
        };
        if far_sq <= 0.0 {
            return Err(Error::PressureCollapse {
                pipe: pipe.id.clone(),
                x: match near {
                    End::From => pipe.length,
                    End::To => 0.0,
                },
                radicand: far_sq,
            });
        }
        let p_far = libm::sqrt(far_sq);
        end_pressure[edge.pipe.0][near.index()] = p_near;
        end_pressure[edge.pipe.0][far.index()] = p_far;
        node_pressure[edge.child.0] = p_far / net.end_ratio(ratios, edge.pipe, far);
    }

    Ok(SteadyState {
        flows,
        node_pressure,
        end_pressure,
        ratios: ratios.to_vec(),
        gas,
        pipes: net.pipes().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Node(NodeId),
    /// Discharge side of a compressor station.
    Station(CompressorId),
    /// An interior sample of a pipe profile.
    Pipe {
        pipe: PipeId,
        x: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub location: Location,
    pub kind: BoundKind,
    pub pressure: f64,
    pub limit: f64,
}

impl Violation {
    /// Distance to the violated bound, Pa.
    pub fn deficit(&self) -> f64 {
        (self.pressure - self.limit).abs()
    }

    pub fn describe(&self, net: &Network) -> String {
        let place = match self.location {
            Location::Node(n) => format!("node `{}`", net.node(n).id),
            Location::Station(c) => format!("discharge of `{}`", net.compressor(c).id),
            Location::Pipe { pipe, x } => format!("pipe `{}` at x = {x} m", net.pipe(pipe).id),
        };
        let side = match self.kind {
            BoundKind::Lower => "below",
            BoundKind::Upper => "above",
        };
        format!(
            "{place}: {} Pa is {side} the bound {} Pa",
            self.pressure, self.limit
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    /// Profile samples per pipe.
    pub samples: usize,
    /// Relative slack granted before a value counts as a violation.
    pub rel_tol: f64,
}

impl Default for BoundCheck {
    fn default() -> Self {
        Self {
            samples: units::DEFAULT_SAMPLES,
            rel_tol: 0.0,
        }
    }
}

/// Every pressure outside its bounds.
///
/// Nodes are checked against their own bounds. Station discharge pressures
/// and interior profile extrema are checked against the envelope of the two
/// end nodes' bounds.
pub fn check_bounds(ss: &SteadyState, net: &Network, opts: &BoundCheck) -> Vec<Violation> {
    let mut out = Vec::new();
    let tol = opts.rel_tol;
    let mut test = |location, p: f64, lo: f64, hi: f64| {
        if p < lo * (1.0 - tol) {
            out.push(Violation {
                location,
                kind: BoundKind::Lower,
                pressure: p,
                limit: lo,
            });
        } else if p > hi * (1.0 + tol) {
            out.push(Violation {
                location,
                kind: BoundKind::Upper,
                pressure: p,
                limit: hi,
            });
        }
    };
    for (k, n) in net.nodes().iter().enumerate() {
        test(
            Location::Node(NodeId(k)),
            ss.node_pressure[k],
            n.p_min,
            n.p_max,
        );
    }
    let envelope = |pipe: &Pipe| {
        let (a, b) = (net.node(pipe.from), net.node(pipe.to));
        (a.p_min.min(b.p_min), a.p_max.max(b.p_max))
    };
    for (k, c) in net.compressors().iter().enumerate() {
        let (lo, hi) = envelope(net.pipe(c.pipe));
        test(
            Location::Station(CompressorId(k)),
            ss.boosted(c.pipe, c.at),
            lo,
            hi,
        );
    }
    for (k, pipe) in net.pipes().iter().enumerate() {
        let id = PipeId(k);
        let (lo, hi) = envelope(pipe);
        let profile = ss.profile(id, opts.samples);
        let last = profile.len() - 1;
        let argmin = (0..profile.len())
            .min_by(|&a, &b| profile[a].1.total_cmp(&profile[b].1))
            .unwrap_or(0);
        let argmax = (0..profile.len())
            .max_by(|&a, &b| profile[a].1.total_cmp(&profile[b].1))
            .unwrap_or(0);
        for idx in [argmin, argmax] {
            if idx != 0 && idx != last {
                let (x, p) = profile[idx];
                test(Location::Pipe { pipe: id, x }, p, lo, hi);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CompressorSpec, NetworkBuilder, Node, PipeSpec};

    fn gas() -> GasProperties {
        GasProperties::new(366.0, 0.01).unwrap()
    }

    fn long_pipe(flow: f64) -> NetworkBuilder {
        NetworkBuilder::new(gas())
            .node(Node::new("A", flow))
            .node(Node::new("B", -flow))
            .pipe(PipeSpec::new("P", "A", "B", 100.0e3, 0.9144))
            .slack("A", 5.5e6)
    }

    #[test]
    fn path_flows_in_series() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 10.0))
            .node(Node::new("B", 0.0))
            .node(Node::new("C", -10.0))
            .pipe(PipeSpec::new("AB", "A", "B", 1.0e3, 0.5))
            .pipe(PipeSpec::new("BC", "B", "C", 1.0e3, 0.5))
            .slack("A", 5.0e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        assert_eq!(flows.as_slice(), &[10.0, 10.0]);
    }

    #[test]
    fn star_leaves_feed_center() {
        let mut b = NetworkBuilder::new(gas()).node(Node::new("C", -30.0));
        for leaf in ["L1", "L2", "L3"] {
            b = b
                .node(Node::new(leaf, 10.0))
                .pipe(PipeSpec::new(leaf, leaf, "C", 1.0e3, 0.5));
        }
        let net = b.slack("C", 5.0e6).build().unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        assert_eq!(flows.as_slice(), &[10.0, 10.0, 10.0]);
    }

    #[test]
    fn flow_reversal_at_central_load() {
        // Brute force: unknowns f1 (A->B) and f2 (B->C); balance at A gives
        // f1 = 10, at C gives -f2 = 10.
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 10.0))
            .node(Node::new("B", -20.0))
            .node(Node::new("C", 10.0))
            .pipe(PipeSpec::new("AB", "A", "B", 1.0e3, 0.5))
            .pipe(PipeSpec::new("BC", "B", "C", 1.0e3, 0.5))
            .slack("A", 5.0e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        assert_eq!(flows.as_slice(), &[10.0, -10.0]);
        for k in 0..3 {
            let node = NodeId(k);
            assert_eq!(flows.outflow(&net, node), net.node(node).injection);
        }
    }

    #[test]
    fn unbalanced_is_refused() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 10.0))
            .node(Node::new("B", -9.0))
            .pipe(PipeSpec::new("AB", "A", "B", 1.0e3, 0.5))
            .slack("A", 5.0e6)
            .build()
            .unwrap();
        assert!(matches!(
            compute_tree_flows(&net),
            Err(Error::Unbalanced { .. })
        ));
    }

    #[test]
    fn zero_flow_profile_is_flat() {
        let net = long_pipe(0.0).build().unwrap();
        let pipe = net.pipe(PipeId(0));
        for x in [0.0, 1.0e3, 5.0e4, 1.0e5] {
            assert_eq!(
                pressure_after(5.5e6, pipe, 0.0, x, net.gas()).unwrap(),
                5.5e6
            );
        }
    }

    #[test]
    fn overloaded_pipe_collapses() {
        let net = long_pipe(300.0).build().unwrap();
        let err = pressure_after(5.5e6, net.pipe(PipeId(0)), 300.0, 1.0e5, net.gas());
        assert!(matches!(err, Err(Error::PressureCollapse { .. })));
        assert!(matches!(
            solve_steady(&net, &[]),
            Err(Error::PressureCollapse { .. })
        ));
    }

    #[test]
    fn pressure_after_rejects_bad_input() {
        let net = long_pipe(1.0).build().unwrap();
        let pipe = net.pipe(PipeId(0));
        assert!(pressure_after(0.0, pipe, 1.0, 0.0, net.gas()).is_err());
        assert!(pressure_after(1.0e6, pipe, 1.0, 2.0e5, net.gas()).is_err());
    }

    #[test]
    fn zero_flow_gives_uniform_pressure() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 0.0))
            .node(Node::new("B", 0.0))
            .node(Node::new("C", 0.0))
            .pipe(PipeSpec::new("AB", "A", "B", 1.0e4, 0.5))
            .pipe(PipeSpec::new("CB", "C", "B", 1.0e4, 0.5))
            .slack("A", 4.0e6)
            .build()
            .unwrap();
        let ss = solve_steady(&net, &[]).unwrap();
        assert!(ss.node_pressure.iter().all(|&p| p == 4.0e6));
    }

    #[test]
    fn compressor_boosts_inlet() {
        let net = long_pipe(150.0)
            .compressor(CompressorSpec::new("C", "P", "A").ratio_bounds(1.0, 1.2))
            .build()
            .unwrap();
        let ss = solve_steady(&net, &[1.1]).unwrap();
        let p0 = 5.5e6;
        assert_eq!(ss.boosted(PipeId(0), End::From), 1.1 * p0);
        let drop = net.pipe(PipeId(0)).squared_drop(net.gas(), 150.0);
        let expected = libm::sqrt((1.1 * p0) * (1.1 * p0) - drop);
        assert!((ss.pressure(NodeId(1)) - expected).abs() / expected < 1e-14);
    }

    #[test]
    fn receiving_station_divides() {
        // Station at the far node of a pipe traversed from the slack: the
        // node sees p(L) / alpha.
        let net = long_pipe(150.0)
            .compressor(CompressorSpec::new("C", "P", "B").ratio_bounds(0.5, 2.0))
            .build()
            .unwrap();
        let plain = solve_steady(&net, &[1.0]).unwrap();
        let ss = solve_steady(&net, &[1.25]).unwrap();
        assert!((ss.pressure(NodeId(1)) * 1.25 - plain.pressure(NodeId(1))).abs() < 1e-6);
    }

    #[test]
    fn bound_deficit_is_reported() {
        let net = long_pipe(150.0).build().unwrap();
        let mut nodes = net.nodes().to_vec();
        nodes[1].p_min = 5.0e6;
        let net = Network::from_parts(
            *net.gas(),
            nodes,
            net.pipes().to_vec(),
            Vec::new(),
            NodeId(0),
            5.5e6,
            None,
        )
        .unwrap();
        let ss = solve_steady(&net, &[]).unwrap();
        let v = check_bounds(&ss, &net, &BoundCheck::default());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].location, Location::Node(NodeId(1)));
        assert_eq!(v[0].kind, BoundKind::Lower);
        assert!((v[0].deficit() - (5.0e6 - ss.pressure(NodeId(1)))).abs() < 1e-6);
        assert!((v[0].deficit() - 0.245e6).abs() < 1.0e3);
    }

    #[test]
    fn inside_bounds_is_clean() {
        let net = long_pipe(150.0).build().unwrap();
        let ss = solve_steady(&net, &[]).unwrap();
        assert!(check_bounds(&ss, &net, &BoundCheck::default()).is_empty());
    }

    #[test]
    fn sample_grid_hits_both_ends() {
        let xs: Vec<f64> = sample_grid(3.0, 4).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(sample_grid(5.0, 101).count(), 101);
    }
}
