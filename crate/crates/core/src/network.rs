//! Network data model.
//!
//! A [`Network`] is built through [`NetworkBuilder`], which resolves node and
//! pipe names into dense indices and checks every per-item invariant. Graph
//! level properties (balance, connectivity, acyclicity) are not build errors;
//! [`Network::validate`] reports them and the solvers refuse inputs that fail.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PipeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompressorId(pub usize);

/// One of the two ends of a pipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    /// `x = 0`, at the pipe's `from` node.
    From,
    /// `x = L`, at the pipe's `to` node.
    To,
}

impl End {
    pub fn index(self) -> usize {
        match self {
            End::From => 0,
            End::To => 1,
        }
    }

    pub fn opposite(self) -> End {
        match self {
            End::From => End::To,
            End::To => End::From,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasProperties {
    /// Isothermal sound speed c_s = sqrt(ZRT), m/s.
    pub sound_speed: f64,
    /// Default friction factor; pipes may override it.
    pub friction: f64,
}

impl GasProperties {
    pub fn new(sound_speed: f64, friction: f64) -> Result<Self> {
        if !(sound_speed > 0.0 && sound_speed.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "sound speed must be positive, got {sound_speed}"
            )));
        }
        if !(friction > 0.0 && friction.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "friction factor must be positive, got {friction}"
            )));
        }
        Ok(Self {
            sound_speed,
            friction,
        })
    }

    /// beta = f * c_s^2, m^2/s^2.
    pub fn beta(&self) -> f64 {
        self.friction * self.sound_speed * self.sound_speed
    }
}

impl Default for GasProperties {
    fn default() -> Self {
        Self {
            sound_speed: units::DEFAULT_SOUND_SPEED,
            friction: units::DEFAULT_FRICTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    /// Stationary injection, kg/s. Positive injects, negative consumes.
    pub injection: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Standard deviation of the consumption fluctuation, kg/s.
    pub noise_sigma: f64,
    /// Correlation time of the consumption fluctuation, s.
    pub noise_tau: f64,
}

impl Node {
    /// A node with open pressure bounds and the default noise model
    /// (sigma = |q| / 3, tau = 15 min).
    pub fn new(id: impl Into<String>, injection: f64) -> Self {
        Self {
            id: id.into(),
            injection,
            p_min: 0.0,
            p_max: f64::INFINITY,
            noise_sigma: injection.abs() * units::DEFAULT_SIGMA_FRACTION,
            noise_tau: units::DEFAULT_NOISE_TAU,
        }
    }

    pub fn with_bounds(mut self, p_min: f64, p_max: f64) -> Self {
        self.p_min = p_min;
        self.p_max = p_max;
        self
    }

    pub fn with_noise(mut self, sigma: f64, tau: f64) -> Self {
        self.noise_sigma = sigma;
        self.noise_tau = tau;
        self
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidNetwork(format!("node `{}`: {what}", self.id)));
        if self.id.is_empty() {
            return Err(Error::InvalidNetwork("node with empty id".into()));
        }
        if !self.injection.is_finite() {
            return bad("injection must be finite");
        }
        if !(self.p_min >= 0.0 && self.p_min <= self.p_max) || self.p_min.is_infinite() {
            return bad("pressure bounds must satisfy 0 <= p_min <= p_max");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise sigma must be non-negative");
        }
        if self.noise_sigma > 0.0 && !(self.noise_tau > 0.0 && self.noise_tau.is_finite()) {
            return bad("noise tau must be positive when sigma > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
    pub diameter: f64,
    pub friction: Option<f64>,
}

impl Pipe {
    pub fn area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    pub fn friction_factor(&self, gas: &GasProperties) -> f64 {
        self.friction.unwrap_or(gas.friction)
    }

    /// f * c_s^2 with the pipe's own friction factor.
    pub fn beta(&self, gas: &GasProperties) -> f64 {
        self.friction_factor(gas) * gas.sound_speed * gas.sound_speed
    }

    /// Geometric volume A * L.
    pub fn volume(&self) -> f64 {
        self.area() * self.length
    }

    pub fn node_at(&self, end: End) -> NodeId {
        match end {
            End::From => self.from,
            End::To => self.to,
        }
    }

    /// Which end of this pipe touches `node`, if any.
    pub fn end_at(&self, node: NodeId) -> Option<End> {
        if self.from == node {
            Some(End::From)
        } else if self.to == node {
            Some(End::To)
        } else {
            None
        }
    }

    pub fn other(&self, node: NodeId) -> NodeId {
        if self.from == node {
            self.to
        } else {
            self.from
        }
    }

    /// Pressure-squared drop over the full length for a given mass flow:
    /// (beta L / d) (phi/A) |phi/A|.
    pub fn squared_drop(&self, gas: &GasProperties, flow: f64) -> f64 {
        self.squared_drop_at(gas, flow, self.length)
    }

    pub fn squared_drop_at(&self, gas: &GasProperties, flow: f64, x: f64) -> f64 {
        let flux = flow / self.area();
        self.beta(gas) * x / self.diameter * flux * flux.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressor {
    pub id: String,
    pub pipe: PipeId,
    /// The end the station sits at; it boosts flow leaving that node into the pipe.
    pub at: End,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub efficiency: f64,
    /// Cost coefficient c in the power formula, W s/kg.
    pub cost: f64,
    /// (gamma - 1) / gamma.
    pub exponent: f64,
}

/// Name-based description of a pipe, resolved by [`NetworkBuilder::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
    pub diameter: f64,
    pub friction: Option<f64>,
}

impl PipeSpec {
    pub fn new(
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        length: f64,
        diameter: f64,
    ) -> Self {
        Self {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length,
            diameter,
            friction: None,
        }
    }

    pub fn friction(mut self, f: f64) -> Self {
        self.friction = Some(f);
        self
    }
}

/// Name-based description of a compressor station.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorSpec {
    pub id: String,
    pub pipe: String,
    /// Node the station sits at.
    pub at: String,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub efficiency: f64,
    pub cost: f64,
    pub exponent: f64,
}

impl CompressorSpec {
    pub fn new(id: impl Into<String>, pipe: impl Into<String>, at: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            pipe: pipe.into(),
            at: at.into(),
            alpha_min: units::DEFAULT_ALPHA_MIN,
            alpha_max: units::DEFAULT_ALPHA_MAX,
            efficiency: 1.0,
            cost: 1.0,
            exponent: units::DEFAULT_COMPRESSOR_EXPONENT,
        }
    }

    pub fn ratio_bounds(mut self, alpha_min: f64, alpha_max: f64) -> Self {
        self.alpha_min = alpha_min;
        self.alpha_max = alpha_max;
        self
    }

    pub fn efficiency(mut self, eta: f64) -> Self {
        self.efficiency = eta;
        self
    }

    pub fn cost(mut self, c: f64) -> Self {
        self.cost = c;
        self
    }

    pub fn exponent(mut self, m: f64) -> Self {
        self.exponent = m;
        self
    }
}

#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    gas: GasProperties,
    nodes: Vec<Node>,
    pipes: Vec<PipeSpec>,
    compressors: Vec<CompressorSpec>,
    slack: Option<(String, f64)>,
    mainline: Option<(String, String)>,
}

impl NetworkBuilder {
    pub fn new(gas: GasProperties) -> Self {
        Self {
            gas,
            nodes: Vec::new(),
            pipes: Vec::new(),
            compressors: Vec::new(),
            slack: None,
            mainline: None,
        }
    }

    pub fn node(mut self, node: Node) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn pipe(mut self, pipe: PipeSpec) -> Self {
        self.pipes.push(pipe);
        self
    }

    pub fn compressor(mut self, c: CompressorSpec) -> Self {
        self.compressors.push(c);
        self
    }

    pub fn slack(mut self, node: impl Into<String>, pressure: f64) -> Self {
        self.slack = Some((node.into(), pressure));
        self
    }

    pub fn mainline(mut self, start: impl Into<String>, end: impl Into<String>) -> Self {
        self.mainline = Some((start.into(), end.into()));
        self
    }

    pub fn build(self) -> Result<Network> {
        let mut index = BTreeMap::new();
        for (k, n) in self.nodes.iter().enumerate() {
            n.check()?;
            if index.insert(n.id.clone(), NodeId(k)).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate node id `{}`",
                    n.id
                )));
            }
        }
        let node_ref = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownReference {
                    kind: "node",
                    name: name.to_string(),
                })
        };

        let mut pipe_index = BTreeMap::new();
        let mut pipes = Vec::with_capacity(self.pipes.len());
        for (k, spec) in self.pipes.into_iter().enumerate() {
            let from = node_ref(&spec.from)?;
            let to = node_ref(&spec.to)?;
            if pipe_index.insert(spec.id.clone(), PipeId(k)).is_some() {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate pipe id `{}`",
                    spec.id
                )));
            }
            pipes.push(Pipe {
                id: spec.id,
                from,
                to,
                length: spec.length,
                diameter: spec.diameter,
                friction: spec.friction,
            });
        }

        let mut compressors = Vec::with_capacity(self.compressors.len());
        for spec in self.compressors {
            let pipe =
                pipe_index
                    .get(&spec.pipe)
                    .copied()
                    .ok_or_else(|| Error::UnknownReference {
                        kind: "pipe",
                        name: spec.pipe.clone(),
                    })?;
            let at_node = node_ref(&spec.at)?;
            let at = pipes[pipe.0].end_at(at_node).ok_or_else(|| {
                Error::InvalidNetwork(format!(
                    "compressor `{}`: node `{}` is not an end of pipe `{}`",
                    spec.id, spec.at, spec.pipe
                ))
            })?;
            compressors.push(Compressor {
                id: spec.id,
                pipe,
                at,
                alpha_min: spec.alpha_min,
                alpha_max: spec.alpha_max,
                efficiency: spec.efficiency,
                cost: spec.cost,
                exponent: spec.exponent,
            });
        }

        let (slack_name, slack_pressure) = self
            .slack
            .ok_or_else(|| Error::InvalidNetwork("no slack node declared".into()))?;
        let slack = node_ref(&slack_name)?;
        let mainline = match self.mainline {
            Some((a, b)) => Some((node_ref(&a)?, node_ref(&b)?)),
            None => None,
        };

        Network::from_parts(
            self.gas,
            self.nodes,
            pipes,
            compressors,
            slack,
            slack_pressure,
            mainline,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    gas: GasProperties,
    nodes: Vec<Node>,
    pipes: Vec<Pipe>,
    compressors: Vec<Compressor>,
    slack: NodeId,
    slack_pressure: f64,
    mainline: Option<(NodeId, NodeId)>,
    // Derived.
    adjacency: Vec<Vec<(PipeId, NodeId)>>,
    stations: Vec<[Option<CompressorId>; 2]>,
}

impl Network {
    /// Assemble a network from already-resolved parts, checking every
    /// per-item invariant.
    pub fn from_parts(
        gas: GasProperties,
        nodes: Vec<Node>,
        pipes: Vec<Pipe>,
        compressors: Vec<Compressor>,
        slack: NodeId,
        slack_pressure: f64,
        mainline: Option<(NodeId, NodeId)>,
    ) -> Result<Self> {
        GasProperties::new(gas.sound_speed, gas.friction)?;
        let n = nodes.len();
        for node in &nodes {
            node.check()?;
        }
        let mut adjacency = vec![Vec::new(); n];
        for (k, p) in pipes.iter().enumerate() {
            let bad = |what: &str| Err(Error::InvalidNetwork(format!("pipe `{}`: {what}", p.id)));
            if p.from.0 >= n || p.to.0 >= n {
                return bad("endpoint out of range");
            }
            if p.from == p.to {
                return bad("from and to must differ");
            }
            if !(p.length > 0.0 && p.length.is_finite()) {
                return bad("length must be positive");
            }
            if !(p.diameter > 0.0 && p.diameter.is_finite()) {
                return bad("diameter must be positive");
            }
            if let Some(f) = p.friction {
                if !(f > 0.0 && f.is_finite()) {
                    return bad("friction override must be positive");
                }
            }
            adjacency[p.from.0].push((PipeId(k), p.to));
            adjacency[p.to.0].push((PipeId(k), p.from));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(pipe, other)| (other, pipe));
        }

        let mut stations = vec![[None, None]; pipes.len()];
        for (k, c) in compressors.iter().enumerate() {
            let bad = |what: &str| {
                Err(Error::InvalidNetwork(format!(
                    "compressor `{}`: {what}",
                    c.id
                )))
            };
            if c.pipe.0 >= pipes.len() {
                return bad("pipe out of range");
            }
            if !(c.alpha_min > 0.0 && c.alpha_min <= c.alpha_max && c.alpha_max.is_finite()) {
                return bad("ratio bounds must satisfy 0 < alpha_min <= alpha_max");
            }
            if !(c.efficiency > 0.0 && c.efficiency <= 1.0) {
                return bad("efficiency must lie in (0, 1]");
            }
            if !(c.exponent > 0.0 && c.exponent < 1.0) {
                return bad("exponent must lie in (0, 1)");
            }
            if !(c.cost >= 0.0 && c.cost.is_finite()) {
                return bad("cost coefficient must be non-negative");
            }
            let slot = &mut stations[c.pipe.0][c.at.index()];
            if slot.is_some() {
                return bad("another compressor already sits at this pipe end");
            }
            *slot = Some(CompressorId(k));
        }

        if slack.0 >= n {
            return Err(Error::InvalidNetwork("slack node out of range".into()));
        }
        if !(slack_pressure > 0.0 && slack_pressure.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "slack pressure must be positive, got {slack_pressure}"
            )));
        }
        if let Some((a, b)) = mainline {
            if a.0 >= n || b.0 >= n {
                return Err(Error::InvalidNetwork(
                    "mainline endpoint out of range".into(),
                ));
            }
        }

        Ok(Self {
            gas,
            nodes,
            pipes,
            compressors,
            slack,
            slack_pressure,
            mainline,
            adjacency,
            stations,
        })
    }

    pub fn gas(&self) -> &GasProperties {
        &self.gas
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn compressors(&self) -> &[Compressor] {
        &self.compressors
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn pipe(&self, id: PipeId) -> &Pipe {
        &self.pipes[id.0]
    }

    pub fn compressor(&self, id: CompressorId) -> &Compressor {
        &self.compressors[id.0]
    }

    pub fn slack(&self) -> NodeId {
        self.slack
    }

    pub fn slack_pressure(&self) -> f64 {
        self.slack_pressure
    }

    pub fn mainline(&self) -> Option<(NodeId, NodeId)> {
        self.mainline
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.id == name).map(NodeId)
    }

    pub fn pipe_id(&self, name: &str) -> Option<PipeId> {
        self.pipes.iter().position(|p| p.id == name).map(PipeId)
    }

    pub fn compressor_id(&self, name: &str) -> Option<CompressorId> {
        self.compressors
            .iter()
            .position(|c| c.id == name)
            .map(CompressorId)
    }

    /// Incident `(pipe, neighbour)` pairs, sorted by neighbour index.
    pub fn neighbors(&self, node: NodeId) -> &[(PipeId, NodeId)] {
        &self.adjacency[node.0]
    }

    /// The compressor sitting at one end of a pipe, if any.
    pub fn station(&self, pipe: PipeId, end: End) -> Option<CompressorId> {
        self.stations[pipe.0][end.index()]
    }

    /// Ratio at a pipe end for a given per-compressor ratio vector (1 if no station).
    pub fn end_ratio(&self, ratios: &[f64], pipe: PipeId, end: End) -> f64 {
        self.station(pipe, end).map_or(1.0, |c| ratios[c.0])
    }

    /// Net stationary injection; zero for a balanced network.
    pub fn imbalance(&self) -> f64 {
        self.nodes.iter().map(|n| n.injection).sum()
    }

    pub fn balance_tolerance(&self) -> f64 {
        let scale = self
            .nodes
            .iter()
            .fold(0.0_f64, |m, n| m.max(n.injection.abs()));
        1e-9 * scale.max(f64::MIN_POSITIVE)
    }

    pub fn total_volume(&self) -> f64 {
        self.pipes.iter().map(Pipe::volume).sum()
    }

    pub fn set_slack(&mut self, node: NodeId, pressure: f64) -> Result<()> {
        if node.0 >= self.nodes.len() || !(pressure > 0.0 && pressure.is_finite()) {
            return Err(Error::InvalidNetwork("invalid slack specification".into()));
        }
        self.slack = node;
        self.slack_pressure = pressure;
        Ok(())
    }

    pub fn set_mainline(&mut self, mainline: Option<(NodeId, NodeId)>) -> Result<()> {
        if let Some((a, b)) = mainline {
            if a.0 >= self.nodes.len() || b.0 >= self.nodes.len() {
                return Err(Error::InvalidNetwork(
                    "mainline endpoint out of range".into(),
                ));
            }
        }
        self.mainline = mainline;
        Ok(())
    }

    /// Non-fatal remarks about the model, e.g. pipes carrying two stations.
    pub fn warnings(&self) -> Vec<String> {
        self.stations
            .iter()
            .zip(&self.pipes)
            .filter(|(s, _)| s[0].is_some() && s[1].is_some())
            .map(|(_, p)| format!("pipe `{}` carries a compressor at both ends", p.id))
            .collect()
    }

    /// Breadth-first spanning order from the slack node.
    ///
    /// Fails if the pipe graph is disconnected or contains a cycle.
    pub fn tree(&self) -> Result<Tree> {
        self.tree_from(self.slack)
    }

    pub fn tree_from(&self, root: NodeId) -> Result<Tree> {
        let n = self.nodes.len();
        if self.pipes.len() + 1 != n {
            let why = if self.pipes.len() + 1 > n {
                "graph contains a cycle"
            } else {
                "graph is disconnected"
            };
            return Err(Error::NotATree(why.into()));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(self.pipes.len());
        let mut queue = VecDeque::new();
        seen[root.0] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(pipe, v) in self.neighbors(u) {
                if parent[u.0].map(|(p, _)| p) == Some(pipe) {
                    continue;
                }
                if seen[v.0] {
                    return Err(Error::NotATree("graph contains a cycle".into()));
                }
                seen[v.0] = true;
                parent[v.0] = Some((pipe, u));
                edges.push(TreeEdge {
                    pipe,
                    parent: u,
                    child: v,
                });
                queue.push_back(v);
            }
        }
        if order.len() != n {
            return Err(Error::NotATree("graph is disconnected".into()));
        }
        Ok(Tree {
            root,
            order,
            parent,
            edges,
        })
    }

    /// Graph-level checks. Never fails; the report carries the findings.
    pub fn validate(&self) -> ValidationReport {
        let imbalance = self.imbalance();
        let tolerance = self.balance_tolerance();
        let (connected, acyclic) = self.graph_shape();
        let mut bound_issues = Vec::new();
        for n in &self.nodes {
            if n.p_max.is_infinite() {
                bound_issues.push(format!("node `{}` has no upper pressure bound", n.id));
            }
        }
        let slack = &self.nodes[self.slack.0];
        if self.slack_pressure < slack.p_min || self.slack_pressure > slack.p_max {
            bound_issues.push(format!(
                "slack pressure {} Pa lies outside the bounds of node `{}`",
                self.slack_pressure, slack.id
            ));
        }
        ValidationReport {
            imbalance,
            tolerance,
            balanced: imbalance.abs() <= tolerance,
            connected,
            acyclic,
            bound_issues,
        }
    }

    fn graph_shape(&self) -> (bool, bool) {
        // Union-find over pipes.
        let n = self.nodes.len();
        let mut root: Vec<usize> = (0..n).collect();
        fn find(root: &mut [usize], mut a: usize) -> usize {
            while root[a] != a {
                root[a] = root[root[a]];
                a = root[a];
            }
            a
        }
        let mut acyclic = true;
        let mut components = n;
        for p in &self.pipes {
            let (a, b) = (find(&mut root, p.from.0), find(&mut root, p.to.0));
            if a == b {
                acyclic = false;
            } else {
                root[a] = b;
                components -= 1;
            }
        }
        (components <= 1, acyclic)
    }

    /// Refuse anything the tree solvers cannot handle.
    pub fn require_solvable(&self) -> Result<Tree> {
        let tree = self.tree()?;
        let report = self.validate();
        if !report.balanced {
            return Err(Error::Unbalanced {
                imbalance: report.imbalance,
            });
        }
        Ok(tree)
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Sum of stationary injections, kg/s.
    pub imbalance: f64,
    pub tolerance: f64,
    pub balanced: bool,
    pub connected: bool,
    pub acyclic: bool,
    pub bound_issues: Vec<String>,
}

impl ValidationReport {
    /// Balanced and a connected tree. Bound remarks are advisory.
    pub fn passed(&self) -> bool {
        self.balanced && self.connected && self.acyclic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeEdge {
    pub pipe: PipeId,
    pub parent: NodeId,
    pub child: NodeId,
}

/// Breadth-first spanning structure of a tree network.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub root: NodeId,
    /// Nodes in visiting order, root first.
    pub order: Vec<NodeId>,
    /// `(pipe, parent)` for every node except the root.
    pub parent: Vec<Option<(PipeId, NodeId)>>,
    /// Pipes in visiting order.
    pub edges: Vec<TreeEdge>,
}

impl Tree {
    /// Children of `node` in visiting order.
    pub fn children(&self, node: NodeId) -> impl Iterator<Item = &TreeEdge> + '_ {
        self.edges.iter().filter(move |e| e.parent == node)
    }

    /// Node path between two nodes, inclusive.
    pub fn path(&self, a: NodeId, b: NodeId) -> Vec<NodeId> {
        let up = |mut x: NodeId| {
            let mut v = vec![x];
            while let Some((_, p)) = self.parent[x.0] {
                v.push(p);
                x = p;
            }
            v
        };
        let (pa, pb) = (up(a), up(b));
        let mut i = pa.len();
        let mut j = pb.len();
        while i > 0 && j > 0 && pa[i - 1] == pb[j - 1] {
            i -= 1;
            j -= 1;
        }
        // pa[i] == pb[j] is the lowest common ancestor.
        let mut path: Vec<NodeId> = pa[..=i].to_vec();
        path.extend(pb[..j].iter().rev());
        path
    }
}
