use approx::assert_relative_eq;
use proptest::prelude::*;

use gasjitter_core::jitter::{diffusion_coefficient, edge_constants, FluctuationStrength};
use gasjitter_core::steady::{compute_tree_flows, solve_steady};
use gasjitter_core::transform::{scale_loads, shift_supply};
use gasjitter_core::{GasProperties, Network, NetworkBuilder, Node, NodeId, PipeSpec};

/// A random tree: node `i > 0` hangs off an earlier node and consumes; node
/// 0 supplies the rest.
#[derive(Debug, Clone)]
struct Tree {
    parents: Vec<usize>,
    loads: Vec<f64>,
    lengths: Vec<f64>,
    diameters: Vec<f64>,
    flipped: Vec<bool>,
}

fn tree() -> impl Strategy<Value = Tree> {
    (2usize..10).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
        (
            parents,
            prop::collection::vec(-15.0f64..5.0, n - 1),
            prop::collection::vec(10.0e3f64..60.0e3, n - 1),
            prop::collection::vec(0.6f64..1.0, n - 1),
            prop::collection::vec(any::<bool>(), n - 1),
        )
            .prop_map(|(parents, loads, lengths, diameters, flipped)| Tree {
                parents,
                loads,
                lengths,
                diameters,
                flipped,
            })
    })
}

fn build(t: &Tree, flip: Option<usize>) -> Network {
    let gas = GasProperties::new(370.0, 0.01).unwrap();
    let total: f64 = t.loads.iter().sum();
    let mut b = NetworkBuilder::new(gas).node(Node::new("n0", -total));
    for (i, q) in t.loads.iter().enumerate() {
        b = b.node(Node::new(format!("n{}", i + 1), *q));
    }
    for (i, &p) in t.parents.iter().enumerate() {
        let (mut a, mut c) = (format!("n{p}"), format!("n{}", i + 1));
        if t.flipped[i] ^ (flip == Some(i)) {
            std::mem::swap(&mut a, &mut c);
        }
        b = b.pipe(PipeSpec::new(
            format!("e{i}"),
            a,
            c,
            t.lengths[i],
            t.diameters[i],
        ));
    }
    b.slack("n0", 7.0e6).build().unwrap()
}

proptest! {
    #[test]
    fn tree_flows_balance_every_node(t in tree()) {
        let net = build(&t, None);
        let flows = compute_tree_flows(&net).unwrap();
        let scale = net.nodes().iter().map(|n| n.injection.abs()).fold(1.0, f64::max);
        for k in 0..net.nodes().len() {
            let out = flows.outflow(&net, NodeId(k));
            prop_assert!((out - net.nodes()[k].injection).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn reversing_a_pipe_negates_its_flow_only(t in tree(), pick in any::<prop::sample::Index>()) {
        let k = pick.index(t.parents.len());
        let a = build(&t, None);
        let b = build(&t, Some(k));
        let (sa, sb) = (solve_steady(&a, &[]), solve_steady(&b, &[]));
        prop_assume!(sa.is_ok());
        let (sa, sb) = (sa.unwrap(), sb.unwrap());
        for i in 0..a.pipes().len() {
            let sign = if i == k { -1.0 } else { 1.0 };
            let (fa, fb) = (sa.flows.as_slice()[i], sb.flows.as_slice()[i]);
            prop_assert!((fa - sign * fb).abs() <= 1e-12 * fa.abs().max(1.0));
        }
        for (pa, pb) in sa.node_pressure.iter().zip(&sb.node_pressure) {
            assert_relative_eq!(*pa, *pb, max_relative = 1e-12);
        }
    }

    #[test]
    fn diffusion_ignores_the_edge_constant_scale(t in tree(), lambda in 1e-4f64..1e4) {
        let net = build(&t, None);
        let ss = solve_steady(&net, &[]);
        prop_assume!(ss.is_ok());
        let ss = ss.unwrap();
        let consts = edge_constants(&net, &ss).unwrap();
        let strength = FluctuationStrength::from_network(&net);
        let a = diffusion_coefficient(&net, &ss, &consts, strength, 11);
        let b = diffusion_coefficient(&net, &ss, &consts.scaled(lambda), strength, 11);
        for (pa, pb) in a.pipes.iter().zip(&b.pipes) {
            for (x, y) in pa.d.iter().zip(&pb.d) {
                assert_relative_eq!(*x, *y, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn load_transforms_keep_topology_and_balance(t in tree(), factor in 0.5f64..2.0, frac in 0.0f64..1.0) {
        let net = build(&t, None);
        let scaled = scale_loads(&net, factor).unwrap();
        prop_assert_eq!(scaled.pipes(), net.pipes());
        prop_assert!(scaled.imbalance().abs() <= scaled.balance_tolerance());
        for (a, b) in net.nodes().iter().zip(scaled.nodes()) {
            assert_relative_eq!(a.injection * factor, b.injection, max_relative = 1e-12);
        }
        let last = NodeId(net.nodes().len() - 1);
        let shifted = shift_supply(&net, &[NodeId(0)], &[last], frac).unwrap();
        prop_assert_eq!(shifted.pipes(), net.pipes());
        prop_assert!(shifted.imbalance().abs() <= shifted.balance_tolerance());
    }
}
