//! Scenario transforms on stationary loads and supplies.
//!
//! None of these touch the graph except [`aggregate_branches`], which
//! collapses off-mainline subtrees into their attachment nodes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{Compressor, CompressorId, Network, NodeId, Pipe, PipeId};

/// Multiply every stationary injection by `factor`.
pub fn scale_loads(net: &Network, factor: f64) -> Result<Network> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Domain(format!(
            "scale factor must be positive, got {factor}"
        )));
    }
    let mut out = net.clone();
    for n in out.nodes_mut() {
        n.injection *= factor;
    }
    Ok(out)
}

/// Move `fraction` of the total injection at `from` over to the injections
/// at `to`.
///
/// The amount is taken from each `from` node in proportion to its injection
/// and credited to each `to` node in proportion to its injection (evenly when
/// none of them injects). Net balance is unchanged.
pub fn shift_supply(
    net: &Network,
    from: &[NodeId],
    to: &[NodeId],
    fraction: f64,
) -> Result<Network> {
    if !(fraction >= 0.0 && fraction.is_finite()) {
        return Err(Error::Domain(format!(
            "shift fraction must be non-negative, got {fraction}"
        )));
    }
    if from.is_empty() || to.is_empty() {
        return Err(Error::Domain(
            "supply shift needs source and target nodes".into(),
        ));
    }
    let supply = |id: &NodeId| net.node(*id).injection.max(0.0);
    let available: f64 = from.iter().map(supply).sum();
    let amount = fraction * available;
    if fraction > 1.0 {
        return Err(Error::Domain(format!(
            "shifting {amount} kg/s exceeds the {available} kg/s injected at the source nodes"
        )));
    }
    let mut out = net.clone();
    if amount == 0.0 {
        return Ok(out);
    }
    let receiving: f64 = to.iter().map(supply).sum();
    let nodes = out.nodes_mut();
    for id in from {
        nodes[id.0].injection -= amount * supply(id) / available;
    }
    for id in to {
        let share = if receiving > 0.0 {
            supply(id) / receiving
        } else {
            1.0 / to.len() as f64
        };
        nodes[id.0].injection += amount * share;
    }
    Ok(out)
}

/// Move `fraction` of the consumption at `from` to the nodes in `to`, split
/// evenly.
pub fn redistribute_load(
    net: &Network,
    from: NodeId,
    to: &[NodeId],
    fraction: f64,
) -> Result<Network> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Domain(format!(
            "redistribution fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if to.is_empty() {
        return Err(Error::Domain(
            "load redistribution needs target nodes".into(),
        ));
    }
    let load = (-net.node(from).injection).max(0.0);
    if load == 0.0 {
        return Err(Error::Domain(format!(
            "node `{}` has no load to redistribute",
            net.node(from).id
        )));
    }
    let moved = fraction * load;
    let mut out = net.clone();
    let nodes = out.nodes_mut();
    nodes[from.0].injection += moved;
    for id in to {
        nodes[id.0].injection -= moved / to.len() as f64;
    }
    Ok(out)
}

/// Index maps from a network to its branch-aggregated form.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub network: Network,
    /// Old node index to new node index, `None` for removed nodes.
    pub nodes: Vec<Option<NodeId>>,
    pub pipes: Vec<Option<PipeId>>,
    pub compressors: Vec<Option<CompressorId>>,
}

impl Aggregation {
    /// Carry a per-compressor ratio vector over to the aggregated network.
    pub fn map_ratios(&self, ratios: &[f64]) -> Vec<f64> {
        let mut out = vec![1.0; self.network.compressors().len()];
        for (old, new) in self.compressors.iter().enumerate() {
            if let Some(new) = new {
                out[new.0] = ratios[old];
            }
        }
        out
    }
}

/// Collapse every subtree hanging off the mainline into the node it attaches
/// to, leaving a path graph.
///
/// Injections add up. Noise variances add up (the nodes are independent) and
/// the correlation time becomes the variance-weighted mean.
pub fn aggregate_branches(net: &Network) -> Result<Aggregation> {
    let (start, end) = net
        .mainline()
        .ok_or_else(|| Error::Domain("no mainline designated".into()))?;
    let tree = net.tree_from(start)?;
    let path = tree.path(start, end);
    let mut on_path = vec![false; net.nodes().len()];
    for id in &path {
        on_path[id.0] = true;
    }
    if !on_path[net.slack().0] {
        return Err(Error::Domain(format!(
            "slack node `{}` lies off the mainline",
            net.node(net.slack()).id
        )));
    }

    // Attachment point of every node: itself if on the path, else the
    // attachment of its parent (the tree is rooted on the path).
    let mut attach = vec![NodeId(usize::MAX); net.nodes().len()];
    for &u in &tree.order {
        attach[u.0] = match (on_path[u.0], tree.parent[u.0]) {
            (true, _) | (false, None) => u,
            (false, Some((_, p))) => attach[p.0],
        };
    }

    let mut node_map = vec![None; net.nodes().len()];
    let mut nodes = Vec::with_capacity(path.len());
    for (k, n) in net.nodes().iter().enumerate() {
        if on_path[k] {
            node_map[k] = Some(NodeId(nodes.len()));
            nodes.push(n.clone());
        }
    }
    // (variance, variance * tau) accumulators per kept node.
    let mut noise: Vec<(f64, f64)> = nodes
        .iter()
        .map(|n| {
            let v = n.noise_sigma * n.noise_sigma;
            (v, v * n.noise_tau)
        })
        .collect();
    for (k, n) in net.nodes().iter().enumerate() {
        if on_path[k] {
            continue;
        }
        let target = node_map[attach[k].0].expect("attachment lies on the path");
        nodes[target.0].injection += n.injection;
        let v = n.noise_sigma * n.noise_sigma;
        noise[target.0].0 += v;
        noise[target.0].1 += v * n.noise_tau;
    }
    for (n, (var, weighted)) in nodes.iter_mut().zip(noise) {
        n.noise_sigma = libm::sqrt(var);
        if var > 0.0 {
            n.noise_tau = weighted / var;
        }
    }

    let mut pipe_map = vec![None; net.pipes().len()];
    let mut pipes = Vec::new();
    for (k, p) in net.pipes().iter().enumerate() {
        if let (Some(a), Some(b)) = (node_map[p.from.0], node_map[p.to.0]) {
            pipe_map[k] = Some(PipeId(pipes.len()));
            pipes.push(Pipe {
                from: a,
                to: b,
                ..p.clone()
            });
        }
    }
    let mut comp_map = vec![None; net.compressors().len()];
    let mut compressors = Vec::new();
    for (k, c) in net.compressors().iter().enumerate() {
        if let Some(pipe) = pipe_map[c.pipe.0] {
            comp_map[k] = Some(CompressorId(compressors.len()));
            compressors.push(Compressor { pipe, ..c.clone() });
        }
    }

    let network = Network::from_parts(
        *net.gas(),
        nodes,
        pipes,
        compressors,
        node_map[net.slack().0].expect("slack is on the path"),
        net.slack_pressure(),
        Some((
            node_map[start.0].expect("start is on the path"),
            node_map[end.0].expect("end is on the path"),
        )),
    )?;
    Ok(Aggregation {
        network,
        nodes: node_map,
        pipes: pipe_map,
        compressors: comp_map,
    })
}
