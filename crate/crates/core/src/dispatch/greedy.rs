//! Operator-style dispatch: a station runs at its maximum ratio only when
//! the pipes behind it would otherwise drop below their lower bound.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::gp::{active_stations, sending_end};
use super::{finish, Diagnostics, DispatchResult, Method};
use crate::error::{Error, Result};
use crate::network::{Network, NodeId, PipeId};
use crate::steady::EdgeFlows;

/// Greedy dispatch in breadth-first order from the slack node.
///
/// For a station at the parent end of a pipe carrying flow away from the
/// slack, the segment behind it (down to the next station or a leaf) is
/// simulated unboosted; the station is switched on to `alpha_max` only if a
/// node in that segment would fall below `p_min`. A station at the child end
/// of a pipe carrying flow toward the slack follows the mirrored rule: it is
/// switched on only if its suction pressure would otherwise exceed `p_max`.
pub fn greedy_dispatch(net: &Network, flows: &EdgeFlows) -> Result<DispatchResult> {
    let tree = net.require_solvable()?;
    let gas = *net.gas();
    let mut active = vec![false; net.compressors().len()];
    for id in active_stations(net, flows) {
        active[id.0] = true;
    }
    let mut children: Vec<Vec<(PipeId, NodeId)>> = vec![Vec::new(); net.nodes().len()];
    for e in &tree.edges {
        children[e.parent.0].push((e.pipe, e.child));
    }
    let has_active = |pipe: PipeId| {
        [crate::End::From, crate::End::To]
            .iter()
            .any(|&end| net.station(pipe, end).is_some_and(|c| active[c.0]))
    };

    let mut ratios = vec![1.0; net.compressors().len()];
    let mut pressure = vec![0.0; net.nodes().len()];
    pressure[tree.root.0] = net.slack_pressure();
    let mut decided = 0;

    for e in &tree.edges {
        let pipe = net.pipe(e.pipe);
        let near = pipe.end_at(e.parent).expect("tree edge touches its parent");
        let far = near.opposite();
        let drop = pipe.squared_drop(&gas, flows.get(e.pipe)).abs();
        let p_parent = pressure[e.parent.0];

        if sending_end(net, flows, e.pipe) == near {
            if let Some(c) = net.station(e.pipe, near).filter(|c| active[c.0]) {
                decided += 1;
                let station = net.compressor(c);
                let ok = segment_holds(
                    net,
                    flows,
                    &children,
                    &has_active,
                    e.pipe,
                    e.child,
                    p_parent,
                );
                if !ok {
                    ratios[c.0] = station.alpha_max;
                    let boosted = p_parent * station.alpha_max;
                    let cap = net.node(pipe.from).p_max.max(net.node(pipe.to).p_max);
                    if boosted > cap {
                        return Err(Error::Bound(format!(
                            "greedy: `{}` at its maximum ratio discharges {boosted} Pa above the bound {cap} Pa",
                            station.id
                        )));
                    }
                }
            }
            let p_in = p_parent * net.end_ratio(&ratios, e.pipe, near);
            let sq = p_in * p_in - drop;
            if sq <= 0.0 {
                return Err(Error::Infeasible {
                    constraint: format!("greedy: pressure collapses along pipe `{}`", pipe.id),
                    violation: -sq,
                });
            }
            pressure[e.child.0] = libm::sqrt(sq) / net.end_ratio(&ratios, e.pipe, far);
        } else {
            // Flow runs toward the parent; the child is the sending node.
            let p_recv = p_parent * net.end_ratio(&ratios, e.pipe, near);
            let unboosted = libm::sqrt(p_recv * p_recv + drop);
            if let Some(c) = net.station(e.pipe, far).filter(|c| active[c.0]) {
                decided += 1;
                let station = net.compressor(c);
                let child = net.node(e.child);
                if unboosted > child.p_max {
                    ratios[c.0] = station.alpha_max;
                    let suction = unboosted / station.alpha_max;
                    if suction < child.p_min {
                        return Err(Error::Bound(format!(
                            "greedy: `{}` at its maximum ratio draws node `{}` down to {suction} Pa",
                            station.id, child.id
                        )));
                    }
                }
            }
            pressure[e.child.0] = unboosted / net.end_ratio(&ratios, e.pipe, far);
        }
    }

    let diagnostics = Diagnostics {
        iterations: decided,
        ..Diagnostics::default()
    };
    let mut result = finish(net, flows, Method::Greedy, ratios, diagnostics)?;
    result.diagnostics.trace.push(result.power);
    Ok(result)
}

/// Whether the nodes from `child` down to the next station (or the leaves)
/// stay at or above `p_min` when the station feeding `pipe` is idle.
fn segment_holds(
    net: &Network,
    flows: &EdgeFlows,
    children: &[Vec<(PipeId, NodeId)>],
    has_active: &dyn Fn(PipeId) -> bool,
    pipe: PipeId,
    child: NodeId,
    p_parent: f64,
) -> bool {
    let gas = *net.gas();
    let mut stack = vec![(pipe, child, p_parent)];
    while let Some((pid, node, p_up)) = stack.pop() {
        let p = net.pipe(pid);
        let near = p.end_at(p.other(node)).expect("edge endpoints");
        let drop = p.squared_drop(&gas, flows.get(pid));
        // Signed: positive when the flow runs away from the upstream node.
        let signed = if near == crate::End::From {
            drop
        } else {
            -drop
        };
        let sq = p_up * p_up - signed;
        if sq <= 0.0 {
            return false;
        }
        let here = libm::sqrt(sq);
        if here < net.node(node).p_min {
            return false;
        }
        for &(next, grandchild) in &children[node.0] {
            if !has_active(next) {
                stack.push((next, grandchild, here));
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CompressorSpec, GasProperties, NetworkBuilder, Node, PipeSpec};
    use crate::steady::compute_tree_flows;

    fn gas() -> GasProperties {
        GasProperties::new(366.0, 0.01).unwrap()
    }

    #[test]
    fn short_line_needs_no_boost() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 50.0).with_bounds(4.0e6, 7.0e6))
            .node(Node::new("B", -50.0).with_bounds(4.0e6, 7.0e6))
            .pipe(PipeSpec::new("P", "A", "B", 10.0e3, 0.9144))
            .compressor(CompressorSpec::new("C", "P", "A").ratio_bounds(1.0, 1.2))
            .slack("A", 5.5e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        let res = greedy_dispatch(&net, &flows).unwrap();
        assert_eq!(res.ratios, vec![1.0]);
        assert_eq!(res.power, 0.0);
    }

    #[test]
    fn long_line_runs_station_flat_out() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 150.0).with_bounds(4.0e6, 7.0e6))
            .node(Node::new("B", -150.0).with_bounds(4.8e6, 7.0e6))
            .pipe(PipeSpec::new("P", "A", "B", 100.0e3, 0.9144))
            .compressor(CompressorSpec::new("C", "P", "A").ratio_bounds(1.0, 1.2))
            .slack("A", 5.5e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        let res = greedy_dispatch(&net, &flows).unwrap();
        assert_eq!(res.ratios, vec![1.2]);
        assert!(res.steady.pressure(NodeId(1)) >= 4.8e6);
    }

    #[test]
    fn overshoot_is_a_bound_error() {
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", 150.0).with_bounds(4.0e6, 6.0e6))
            .node(Node::new("B", -150.0).with_bounds(4.8e6, 6.0e6))
            .pipe(PipeSpec::new("P", "A", "B", 100.0e3, 0.9144))
            .compressor(CompressorSpec::new("C", "P", "A").ratio_bounds(1.0, 1.2))
            .slack("A", 5.5e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        assert!(matches!(
            greedy_dispatch(&net, &flows),
            Err(Error::Bound(_))
        ));
    }

    #[test]
    fn upstream_station_relieves_suction() {
        // Supply at B flows toward the slack at A through a station at B.
        let net = NetworkBuilder::new(gas())
            .node(Node::new("A", -150.0).with_bounds(4.0e6, 7.0e6))
            .node(Node::new("B", 150.0).with_bounds(4.0e6, 6.0e6))
            .pipe(PipeSpec::new("P", "A", "B", 100.0e3, 0.9144))
            .compressor(CompressorSpec::new("C", "P", "B").ratio_bounds(1.0, 1.2))
            .slack("A", 5.5e6)
            .build()
            .unwrap();
        let flows = compute_tree_flows(&net).unwrap();
        let res = greedy_dispatch(&net, &flows).unwrap();
        assert_eq!(res.ratios, vec![1.2]);
        assert!(res.steady.pressure(NodeId(1)) <= 6.0e6);
    }
}
