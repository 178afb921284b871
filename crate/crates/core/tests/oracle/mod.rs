//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the solvers under test: flows come from leaf peeling,
//! pressures from Runge-Kutta integration of the stationary momentum balance
//! or a separately written closed form.
#![allow(dead_code)]

use gasjitter_core::{CompressorSpec, End, GasProperties, Network, NetworkBuilder, Node, PipeSpec};

/// dp/dx = -(f c^2 / 2d) (phi/A)|phi/A| / p, integrated with classical RK4
/// from `x = 0`. `None` if the pressure collapses.
pub fn rk4_end_pressure(
    p_in: f64,
    length: f64,
    diameter: f64,
    friction: f64,
    sound_speed: f64,
    flow: f64,
    steps: usize,
) -> Option<f64> {
    let area = std::f64::consts::PI * diameter * diameter / 4.0;
    let flux = flow / area;
    let k = friction * sound_speed * sound_speed / (2.0 * diameter) * flux * flux.abs();
    let rhs = |p: f64| -k / p;
    let h = length / steps as f64;
    let mut p = p_in;
    for _ in 0..steps {
        let k1 = rhs(p);
        let k2 = rhs(p + 0.5 * h * k1);
        let k3 = rhs(p + 0.5 * h * k2);
        let k4 = rhs(p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(p > 0.0) || !p.is_finite() {
            return None;
        }
    }
    Some(p)
}

/// Edge flows by repeatedly removing leaves: a leaf's residual injection
/// must leave through its only pipe.
pub fn leaf_peeling_flows(net: &Network) -> Vec<f64> {
    let n = net.nodes().len();
    let mut residual: Vec<f64> = net.nodes().iter().map(|x| x.injection).collect();
    let mut alive = vec![true; net.pipes().len()];
    let mut flows = vec![0.0; net.pipes().len()];
    let degree = |alive: &[bool], v: usize| {
        net.pipes()
            .iter()
            .enumerate()
            .filter(|(k, p)| alive[*k] && (p.from.0 == v || p.to.0 == v))
            .count()
    };
    let mut removed = vec![false; n];
    for _ in 0..net.pipes().len() {
        let leaf = (0..n)
            .find(|&v| !removed[v] && degree(&alive, v) == 1)
            .expect("a tree always has a leaf");
        let (k, p) = net
            .pipes()
            .iter()
            .enumerate()
            .find(|(k, p)| alive[*k] && (p.from.0 == leaf || p.to.0 == leaf))
            .unwrap();
        let out = residual[leaf];
        let other = if p.from.0 == leaf { p.to.0 } else { p.from.0 };
        flows[k] = if p.from.0 == leaf { out } else { -out };
        residual[other] += out;
        residual[leaf] = 0.0;
        alive[k] = false;
        removed[leaf] = true;
    }
    flows
}

fn station_ratio(net: &Network, ratios: &[f64], pipe: usize, end: End) -> f64 {
    net.compressors()
        .iter()
        .enumerate()
        .find(|(_, c)| c.pipe.0 == pipe && c.at == end)
        .map_or(1.0, |(k, _)| ratios[k])
}

/// Node pressures by depth-first propagation from the slack, integrating each
/// pipe with `steps` RK4 steps (or the closed form when `steps == 0`).
pub fn oracle_pressures(
    net: &Network,
    ratios: &[f64],
    flows: &[f64],
    steps: usize,
) -> Option<Vec<f64>> {
    let gas = net.gas();
    let n = net.nodes().len();
    let mut p = vec![f64::NAN; n];
    p[net.slack().0] = net.slack_pressure();
    let mut stack = vec![net.slack().0];
    let mut seen = vec![false; n];
    seen[net.slack().0] = true;
    while let Some(u) = stack.pop() {
        for (k, pipe) in net.pipes().iter().enumerate() {
            let (v, u_end) = if pipe.from.0 == u {
                (pipe.to.0, End::From)
            } else if pipe.to.0 == u {
                (pipe.from.0, End::To)
            } else {
                continue;
            };
            if seen[v] {
                continue;
            }
            let f = pipe.friction.unwrap_or(gas.friction);
            let area = std::f64::consts::PI * pipe.diameter * pipe.diameter / 4.0;
            let p_u = p[u] * station_ratio(net, ratios, k, u_end);
            // Walking from the `to` end reverses x, which flips the flow.
            let walk_flow = if u_end == End::From {
                flows[k]
            } else {
                -flows[k]
            };
            let p_v_side = if steps == 0 {
                let flux = walk_flow / area;
                let sq = p_u * p_u
                    - f * gas.sound_speed * gas.sound_speed * pipe.length / pipe.diameter
                        * flux
                        * flux.abs();
                if sq <= 0.0 {
                    return None;
                }
                sq.sqrt()
            } else {
                rk4_end_pressure(
                    p_u,
                    pipe.length,
                    pipe.diameter,
                    f,
                    gas.sound_speed,
                    walk_flow,
                    steps,
                )?
            };
            let v_end = if u_end == End::From {
                End::To
            } else {
                End::From
            };
            p[v] = p_v_side / station_ratio(net, ratios, k, v_end);
            seen[v] = true;
            stack.push(v);
        }
    }
    Some(p)
}

pub fn gas() -> GasProperties {
    GasProperties::new(366.0, 0.01).unwrap()
}

pub fn single_pipe() -> Network {
    NetworkBuilder::new(gas())
        .node(Node::new("A", 150.0))
        .node(Node::new("B", -150.0))
        .pipe(PipeSpec::new("P", "A", "B", 100.0e3, 0.9144))
        .slack("A", 5.5e6)
        .build()
        .unwrap()
}

pub fn three_pipe_path() -> Network {
    NetworkBuilder::new(gas())
        .node(Node::new("A", 120.0))
        .node(Node::new("B", -30.0))
        .node(Node::new("C", -40.0))
        .node(Node::new("D", -50.0))
        .pipe(PipeSpec::new("AB", "A", "B", 60.0e3, 0.8))
        .pipe(PipeSpec::new("CB", "C", "B", 40.0e3, 0.7))
        .pipe(PipeSpec::new("CD", "C", "D", 50.0e3, 0.6).friction(0.012))
        .slack("A", 5.5e6)
        .build()
        .unwrap()
}

pub fn five_leaf_star() -> Network {
    let mut b = NetworkBuilder::new(gas()).node(Node::new("hub", -100.0));
    let leaves = [
        ("L1", 30.0),
        ("L2", 30.0),
        ("L3", 25.0),
        ("L4", 25.0),
        ("L5", -10.0),
    ];
    for (i, (name, q)) in leaves.iter().enumerate() {
        b = b.node(Node::new(*name, *q)).pipe(PipeSpec::new(
            *name,
            *name,
            "hub",
            20.0e3 + 5.0e3 * i as f64,
            0.5,
        ));
    }
    b.slack("L1", 5.0e6).build().unwrap()
}

pub fn branched_tree() -> Network {
    NetworkBuilder::new(gas())
        .node(Node::new("S", 200.0))
        .node(Node::new("J1", 0.0))
        .node(Node::new("J2", -20.0))
        .node(Node::new("X", -60.0))
        .node(Node::new("Y", -40.0))
        .node(Node::new("Z", 30.0))
        .node(Node::new("W", -110.0))
        .pipe(PipeSpec::new("S-J1", "S", "J1", 80.0e3, 0.9))
        .pipe(PipeSpec::new("J1-J2", "J1", "J2", 50.0e3, 0.8))
        .pipe(PipeSpec::new("X-J1", "X", "J1", 30.0e3, 0.5))
        .pipe(PipeSpec::new("J2-Y", "J2", "Y", 25.0e3, 0.4))
        .pipe(PipeSpec::new("Z-J2", "Z", "J2", 35.0e3, 0.4))
        .pipe(PipeSpec::new("J2-W", "J2", "W", 60.0e3, 0.7))
        .slack("S", 6.0e6)
        .build()
        .unwrap()
}

/// Three equal pipes in series with a station at the head of each.
pub fn compressor_cascade(alpha_max: f64) -> Network {
    let mut b = NetworkBuilder::new(gas());
    let names = ["N0", "N1", "N2", "N3"];
    for (i, name) in names.iter().enumerate() {
        let q = match i {
            0 => 150.0,
            3 => -150.0,
            _ => 0.0,
        };
        b = b.node(Node::new(*name, q).with_bounds(4.6e6, 6.5e6));
    }
    for i in 0..3 {
        let pipe = format!("P{i}");
        b = b
            .pipe(PipeSpec::new(&pipe, names[i], names[i + 1], 80.0e3, 0.9144))
            .compressor(
                CompressorSpec::new(format!("K{i}"), &pipe, names[i]).ratio_bounds(1.0, alpha_max),
            );
    }
    b.slack("N0", 5.5e6).build().unwrap()
}

pub fn steady_fixtures() -> Vec<(&'static str, Network, Vec<f64>)> {
    vec![
        ("single pipe", single_pipe(), vec![]),
        ("three-pipe path", three_pipe_path(), vec![]),
        ("five-leaf star", five_leaf_star(), vec![]),
        ("branched tree", branched_tree(), vec![]),
        (
            "compressor cascade",
            compressor_cascade(1.3),
            vec![1.0, 1.15, 1.07],
        ),
    ]
}

/// Exhaustive search over ratio grids for the smallest `log sum d alpha^m`
/// whose closed-form pressures satisfy every node bound and station
/// discharge cap. `grids[k]` lists ascending candidate ratios for compressor
/// `k`; branches that cannot beat the incumbent are cut.
pub fn grid_search_log_power(
    net: &Network,
    flows: &[f64],
    grids: &[Vec<f64>],
) -> Option<(f64, Vec<f64>)> {
    let weights: Vec<(f64, f64)> = net
        .compressors()
        .iter()
        .map(|c| {
            let leaving = if c.at == End::From {
                flows[c.pipe.0]
            } else {
                -flows[c.pipe.0]
            };
            (c.cost * leaving.max(0.0) / c.efficiency, c.exponent)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut current = vec![1.0; grids.len()];
    search(net, flows, grids, &weights, 0, &mut current, &mut best);
    best
}

fn search(
    net: &Network,
    flows: &[f64],
    grids: &[Vec<f64>],
    weights: &[(f64, f64)],
    depth: usize,
    current: &mut Vec<f64>,
    best: &mut Option<(f64, Vec<f64>)>,
) {
    let log_obj = |r: &[f64], depth: usize| -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, (d, m))| {
                // Later stations at their cheapest grid ratio.
                let a = if k <= depth { r[k] } else { grids[k][0] };
                d * a.powf(*m)
            })
            .sum::<f64>()
            .ln()
    };
    if depth + 1 == grids.len() {
        // Downstream pressures and the discharge grow with the last ratio,
        // so the feasible ratios form an interval: find its lower end.
        let g = &grids[depth];
        let (mut lo, mut hi) = (0, g.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            current[depth] = g[mid];
            if check(net, flows, current).is_some_and(|(low, _)| low) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == g.len() {
            return;
        }
        current[depth] = g[lo];
        if feasible(net, flows, current) {
            let obj = log_obj(current, depth);
            if best.as_ref().map_or(true, |b| obj < b.0) {
                *best = Some((obj, current.clone()));
            }
        }
        return;
    }
    for &a in &grids[depth] {
        current[depth] = a;
        if best
            .as_ref()
            .is_some_and(|b| b.0 <= log_obj(current, depth))
        {
            if weights[depth].0 > 0.0 {
                // Ascending grid and a costly station: no later value helps.
                break;
            }
            continue;
        }
        search(net, flows, grids, weights, depth + 1, current, best);
    }
}

/// Ascending grid `lo, lo + step, ...` up to and including `hi`.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

pub fn feasible(net: &Network, flows: &[f64], ratios: &[f64]) -> bool {
    check(net, flows, ratios).is_some_and(|(low, high)| low && high)
}

/// Whether the lower bounds and the upper bounds (including discharge caps)
/// hold, or `None` when some pressure collapses.
fn check(net: &Network, flows: &[f64], ratios: &[f64]) -> Option<(bool, bool)> {
    let p = oracle_pressures(net, ratios, flows, 0)?;
    let low = net
        .nodes()
        .iter()
        .zip(&p)
        .all(|(n, &v)| v >= n.p_min * (1.0 - 1e-12));
    let nodes_high = net
        .nodes()
        .iter()
        .zip(&p)
        .all(|(n, &v)| v <= n.p_max * (1.0 + 1e-12));
    let caps_high = net.compressors().iter().enumerate().all(|(k, c)| {
        let pipe = &net.pipes()[c.pipe.0];
        let node = if c.at == End::From {
            pipe.from
        } else {
            pipe.to
        };
        let cap = net.nodes()[pipe.from.0]
            .p_max
            .max(net.nodes()[pipe.to.0].p_max);
        p[node.0] * ratios[k] <= cap * (1.0 + 1e-12)
    });
    Some((low, nodes_high && caps_high))
}

/// Composite Simpson's rule on an odd number of uniform samples.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    assert!(values.len() % 2 == 1 && values.len() >= 3);
    let n = values.len() - 1;
    let mut s = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}
