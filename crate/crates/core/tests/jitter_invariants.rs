mod oracle;

use gasjitter_core::jitter::{
    diffusion_coefficient, edge_constants, jitter_profile, mainline_pipes, milepost,
    node_mileposts, zeta_profile, FluctuationStrength,
};
use gasjitter_core::steady::solve_steady;
use gasjitter_core::{Network, NetworkBuilder, Node, NodeId, PipeId, PipeSpec, SteadyState};

/// Supplies at both ends, the largest load in the middle: flow reverses at M.
fn two_supply_path() -> Network {
    let mut b = NetworkBuilder::new(oracle::gas());
    let nodes = [
        ("W", 90.0),
        ("A", -20.0),
        ("M", -80.0),
        ("B", -20.0),
        ("E", 30.0),
    ];
    for (name, q) in nodes {
        b = b.node(Node::new(name, q).with_noise(3.0, 900.0));
    }
    for w in nodes.windows(2) {
        let id = format!("{}-{}", w[0].0, w[1].0);
        b = b.pipe(PipeSpec::new(id, w[0].0, w[1].0, 70.0e3, 0.7));
    }
    b.slack("W", 6.0e6).mainline("W", "E").build().unwrap()
}

fn cases() -> Vec<(&'static str, Network, SteadyState)> {
    let mut out: Vec<(&'static str, Network, SteadyState)> = oracle::steady_fixtures()
        .into_iter()
        .map(|(name, net, ratios)| {
            let ss = solve_steady(&net, &ratios).unwrap();
            (name, net, ss)
        })
        .collect();
    let net = two_supply_path();
    let ss = solve_steady(&net, &[]).unwrap();
    out.push(("two-supply path", net, ss));
    out
}

#[test]
fn zero_mode_solves_its_ode() {
    for (name, net, ss) in cases() {
        for (k, pipe) in net.pipes().iter().enumerate() {
            let prof = zeta_profile(&ss, PipeId(k), 101);
            let h = prof.x[1] - prof.x[0];
            let flux = ss.flow(PipeId(k)) / pipe.area();
            let kappa = pipe.beta(net.gas()) / (2.0 * pipe.diameter) * flux * flux.abs();
            let zmax = prof.z.iter().cloned().fold(0.0, f64::max);
            let z = &prof.z;
            for i in 2..z.len() - 2 {
                // Five-point stencil, fourth order.
                let dz = (z[i - 2] - 8.0 * z[i - 1] + 8.0 * z[i + 1] - z[i + 2]) / (12.0 * h);
                let p = ss.pressure_at(PipeId(k), prof.x[i]);
                let r = dz - kappa / (p * p) * z[i];
                assert!(
                    r.abs() * pipe.length <= 1e-6 * zmax,
                    "{name}/{}: residual {r:e}",
                    pipe.id
                );
            }
        }
    }
}

#[test]
fn zero_mode_averages_to_one() {
    for (name, net, ss) in cases() {
        for (k, pipe) in net.pipes().iter().enumerate() {
            let prof = zeta_profile(&ss, PipeId(k), 101);
            let h = prof.x[1] - prof.x[0];
            let mean = oracle::simpson(&prof.z, h) / pipe.length;
            assert!(
                (mean - 1.0).abs() <= 1e-6,
                "{name}/{}: mean {mean}",
                pipe.id
            );
        }
    }
}

#[test]
fn zero_mode_follows_the_flow() {
    for (name, net, ss) in cases() {
        for k in 0..net.pipes().len() {
            let prof = zeta_profile(&ss, PipeId(k), 101);
            let phi = ss.flow(PipeId(k));
            for w in prof.z.windows(2) {
                let dz = w[1] - w[0];
                if phi == 0.0 {
                    assert_eq!(dz, 0.0, "{name}");
                } else {
                    assert_eq!(dz.signum(), phi.signum(), "{name}: pipe {k}");
                }
            }
        }
    }
}

#[test]
fn diffusion_is_invariant_under_edge_constant_scaling() {
    for (name, net, ss) in cases() {
        let consts = edge_constants(&net, &ss).unwrap();
        let strength = FluctuationStrength::new(25.0, 900.0).unwrap();
        let base = diffusion_coefficient(&net, &ss, &consts, strength, 101);
        for lambda in [1e-3, 0.37, 7.3, 1e5] {
            let scaled = diffusion_coefficient(&net, &ss, &consts.scaled(lambda), strength, 101);
            for (a, b) in base.pipes.iter().zip(&scaled.pipes) {
                for (x, y) in a.d.iter().zip(&b.d) {
                    assert!(
                        (x - y).abs() <= 1e-12 * x.abs(),
                        "{name}: lambda {lambda}: {x} vs {y}"
                    );
                }
            }
        }
    }
}

#[test]
fn diffusion_jumps_by_ratio_squared_at_stations() {
    let net = oracle::compressor_cascade(1.3);
    let ratios = [1.1, 1.2, 1.05];
    let ss = solve_steady(&net, &ratios).unwrap();
    let jp = jitter_profile(&net, &ss, 101).unwrap();
    let consts = &jp.constants;
    for (k, c) in net.compressors().iter().enumerate().skip(1) {
        // Station k sits at the head of pipe k, the tail of pipe k - 1.
        assert_eq!(c.pipe, PipeId(k));
        let downstream = jp.d_at(PipeId(k), 0);
        let upstream = jp.d_at(PipeId(k - 1), 100);
        let want = ratios[k] * ratios[k];
        let got = downstream / upstream;
        assert!(
            (got - want).abs() <= 1e-9 * want,
            "station {k}: {got} vs {want}"
        );
    }
    // The nodal coefficient is continuous: every incident pipe agrees.
    for (k, pipe) in net.pipes().iter().enumerate() {
        let prof = zeta_profile(&ss, PipeId(k), 101);
        for (end, z) in [
            (gasjitter_core::End::From, prof.start()),
            (gasjitter_core::End::To, prof.end()),
        ] {
            let node = pipe.node_at(end);
            let alpha = net.end_ratio(&ratios, PipeId(k), end);
            let implied = consts.pipe[k] * z / alpha;
            let stored = consts.node[node.0];
            assert!(
                (implied - stored).abs() <= 1e-12 * stored.abs(),
                "pipe {k} {end:?}"
            );
        }
    }
}

#[test]
fn diffusion_peaks_at_the_flow_reversal() {
    let net = two_supply_path();
    let ss = solve_steady(&net, &[]).unwrap();
    let jp = jitter_profile(&net, &ss, 101).unwrap();
    let m = net.node_id("M").unwrap();
    let (pipe, x, d) = jp.peak().unwrap();
    let at = net.pipe(pipe).node_at(if x == 0.0 {
        gasjitter_core::End::From
    } else {
        gasjitter_core::End::To
    });
    assert!(x == 0.0 || x == net.pipe(pipe).length);
    assert_eq!(at, m);
    assert!((jp.node_diffusion(m) - d).abs() <= 1e-12 * d);
    for k in 0..net.nodes().len() {
        if NodeId(k) != m {
            assert!(jp.node_diffusion(NodeId(k)) < d);
        }
    }
}

#[test]
fn mileposts_are_monotone_along_the_mainline() {
    let net = two_supply_path();
    let nodes = node_mileposts(&net).unwrap();
    let mut last = -1.0;
    let mut total = 0.0;
    for (pipe, entered) in mainline_pipes(&net).unwrap() {
        let p = net.pipe(pipe);
        let xs: Vec<f64> = if entered == gasjitter_core::End::From {
            vec![0.0, p.length / 2.0, p.length]
        } else {
            vec![p.length, p.length / 2.0, 0.0]
        };
        for x in xs {
            let mp = milepost(&net, &nodes, pipe, x);
            assert!(mp >= last);
            last = mp;
        }
        total += p.length;
    }
    assert!((last - total).abs() <= 1e-9 * total);
}

#[test]
fn network_strength_sums_node_variances() {
    let net = two_supply_path();
    let s = FluctuationStrength::from_network(&net);
    assert!((s.s - 5.0 * 9.0).abs() < 1e-12);
    assert!((s.tau_eff - 1800.0).abs() < 1e-9);
}
