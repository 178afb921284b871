//! CSV tables with `# key: value` metadata lines above the header.
//!
//! Output depends only on the inputs: no timestamps, no hash-map ordering.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use gasjitter_core::dispatch::{station_flow, DispatchResult};
use gasjitter_core::jitter::{
    exceedance_probability, mainline_pipes, milepost, node_mileposts, normalize_d, JitterProfile,
};
use gasjitter_core::sim::{Ensemble, Probe, VarianceFit, Window};
use gasjitter_core::steady::sample_grid;
use gasjitter_core::units::MILE;
use gasjitter_core::{CompressorId, End, Network, NodeId, PipeId, SteadyState};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_csv_string())
    }
}

/// Shortest round-trip form, switching to exponent notation for very large
/// or small magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn end_name(end: End) -> &'static str {
    match end {
        End::From => "from",
        End::To => "to",
    }
}

pub fn steady_nodes(net: &Network, ss: &SteadyState) -> Table {
    let mut t = Table::new(&["node_id", "injection_kg_s", "p_Pa", "p_min_Pa", "p_max_Pa"])
        .meta("table", "steady nodes")
        .meta("slack", &net.node(net.slack()).id)
        .meta("slack_pressure_Pa", num(net.slack_pressure()));
    for (k, n) in net.nodes().iter().enumerate() {
        t.push(vec![
            n.id.clone(),
            num(n.injection),
            num(ss.pressure(NodeId(k))),
            num(n.p_min),
            num(n.p_max),
        ]);
    }
    t
}

pub fn steady_profile(net: &Network, ss: &SteadyState, samples: usize) -> Table {
    let mut t = Table::new(&["pipe_id", "x_m", "p_Pa", "phi_kg_s"])
        .meta("table", "steady pipe profiles")
        .meta("samples_per_pipe", samples);
    for (k, p) in net.pipes().iter().enumerate() {
        let flow = ss.flow(PipeId(k));
        for (x, pr) in ss.profile(PipeId(k), samples) {
            t.push(vec![p.id.clone(), num(x), num(pr), num(flow)]);
        }
    }
    t
}

pub fn dispatch_compressors(net: &Network, res: &DispatchResult) -> Table {
    let mut t = Table::new(&[
        "compressor_id",
        "pipe_id",
        "at",
        "alpha",
        "alpha_min",
        "alpha_max",
        "flow_kg_s",
        "suction_Pa",
        "discharge_Pa",
    ])
    .meta("table", "dispatch compressors")
    .meta("method", res.method);
    for (k, c) in net.compressors().iter().enumerate() {
        let pipe = net.pipe(c.pipe);
        let node = pipe.node_at(c.at);
        t.push(vec![
            c.id.clone(),
            pipe.id.clone(),
            format!("{} ({})", net.node(node).id, end_name(c.at)),
            num(res.ratios[k]),
            num(c.alpha_min),
            num(c.alpha_max),
            num(station_flow(net, &res.steady.flows, CompressorId(k))),
            num(res.steady.pressure(node)),
            num(res.steady.boosted(c.pipe, c.at)),
        ]);
    }
    t
}

pub fn dispatch_summary(res: &DispatchResult) -> Table {
    let d = &res.diagnostics;
    let mut t = Table::new(&["method", "power_W", "iterations", "gap", "max_constraint"])
        .meta("table", "dispatch summary");
    for note in &d.notes {
        t = t.meta("note", note);
    }
    t.push(vec![
        res.method.to_string(),
        num(res.power),
        d.iterations.to_string(),
        num(d.gap),
        num(d.max_constraint),
    ]);
    t
}

pub fn dispatch_trace(res: &DispatchResult) -> Table {
    let mut t = Table::new(&["iteration", "value"])
        .meta("table", "dispatch solver trace")
        .meta("method", res.method);
    for (i, v) in res.diagnostics.trace.iter().enumerate() {
        t.push(vec![i.to_string(), num(*v)]);
    }
    t
}

/// Per-sample `Z` and `D` on every pipe, keyed by distance from the
/// milepost origin.
pub fn jitter_table(
    net: &Network,
    jp: &JitterProfile,
    p0: f64,
    t0: f64,
) -> gasjitter_core::Result<Table> {
    let posts = node_mileposts(net)?;
    let on_main: Vec<bool> = match net.mainline() {
        Some(_) => {
            let mut v = vec![false; net.pipes().len()];
            for (p, _) in mainline_pipes(net)? {
                v[p.0] = true;
            }
            v
        }
        None => vec![false; net.pipes().len()],
    };
    let mut t = Table::new(&[
        "pipe_id",
        "x_m",
        "milepost_equivalent",
        "Z",
        "D_Pa2_per_s",
        "D_over_D0",
        "mainline",
    ])
    .meta("table", "jitter profile")
    .meta("milepost_unit", "mi")
    .meta("p0_Pa", num(p0))
    .meta("t0_s", num(t0))
    .meta("S_kg2_per_s2", num(jp.strength.s))
    .meta("tau_eff_s", num(jp.strength.tau_eff));
    for pj in &jp.pipes {
        let id = &net.pipe(pj.pipe).id;
        for i in 0..pj.x.len() {
            t.push(vec![
                id.clone(),
                num(pj.x[i]),
                num(milepost(net, &posts, pj.pipe, pj.x[i]) / MILE),
                num(pj.z[i]),
                num(pj.d[i]),
                num(normalize_d(pj.d[i], p0, t0)?),
                on_main[pj.pipe.0].to_string(),
            ]);
        }
    }
    Ok(t)
}

/// Mainline samples only, in milepost order. Shared pipe ends appear once
/// per pipe, so a station shows as two rows at the same milepost.
pub fn jitter_mainline(
    net: &Network,
    jp: &JitterProfile,
    p0: f64,
    t0: f64,
) -> gasjitter_core::Result<Table> {
    let posts = node_mileposts(net)?;
    let mut t = Table::new(&[
        "milepost_equivalent",
        "pipe_id",
        "x_m",
        "Z",
        "D_Pa2_per_s",
        "D_over_D0",
    ])
    .meta("table", "jitter along the mainline")
    .meta("milepost_unit", "mi")
    .meta("p0_Pa", num(p0))
    .meta("t0_s", num(t0));
    for (pipe, entered) in mainline_pipes(net)? {
        let pj = &jp.pipes[pipe.0];
        let order: Vec<usize> = match entered {
            End::From => (0..pj.x.len()).collect(),
            End::To => (0..pj.x.len()).rev().collect(),
        };
        for i in order {
            t.push(vec![
                num(milepost(net, &posts, pipe, pj.x[i]) / MILE),
                net.pipe(pipe).id.clone(),
                num(pj.x[i]),
                num(pj.z[i]),
                num(pj.d[i]),
                num(normalize_d(pj.d[i], p0, t0)?),
            ]);
        }
    }
    Ok(t)
}

pub fn exceedance_table(
    net: &Network,
    jp: &JitterProfile,
    t_s: f64,
    margin: f64,
) -> gasjitter_core::Result<Table> {
    let mut t = Table::new(&["node_id", "D_Pa2_per_s", "std_Pa", "probability"])
        .meta("table", "exceedance probability P(|dp(t)| >= margin)")
        .meta("t_s", num(t_s))
        .meta("margin_Pa", num(margin));
    for (k, n) in net.nodes().iter().enumerate() {
        let d = jp.node_diffusion(NodeId(k));
        let p = if d > 0.0 {
            exceedance_probability(d, t_s, margin)?
        } else if margin > 0.0 {
            0.0
        } else {
            1.0
        };
        t.push(vec![n.id.clone(), num(d), num((d * t_s).sqrt()), num(p)]);
    }
    Ok(t)
}

/// Long format: one row per trajectory, time and probe.
pub fn trajectory_table(net: &Network, ens: &Ensemble, seed: u64) -> Table {
    let labels = probe_labels(net, ens);
    let mut t = Table::new(&["trajectory", "t_s", "probe", "p_Pa", "dp_Pa"])
        .meta("table", "simulated trajectories")
        .meta("seed", seed)
        .meta("trajectories", ens.trajectories.len());
    for (i, tr) in ens.trajectories.iter().enumerate() {
        for (k, row) in tr.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    num(ens.times[k]),
                    labels[j].clone(),
                    num(*p),
                    num(p - ens.baseline[j]),
                ]);
            }
        }
    }
    t
}

pub fn probe_labels(net: &Network, ens: &Ensemble) -> Vec<String> {
    ens.probes
        .iter()
        .zip(&ens.probe_x)
        .map(|(p, x)| match *p {
            Probe::Node(n) => net.node(n).id.clone(),
            Probe::Pipe { pipe, .. } => format!("{}@{}", net.pipe(pipe).id, num(*x)),
        })
        .collect()
}

/// One fitted probe for [`variance_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeFit {
    pub label: String,
    pub fit: VarianceFit,
    pub analytic: f64,
}

pub fn variance_table(fits: &[ProbeFit], window: Window, trajectories: usize, seed: u64) -> Table {
    let mut t = Table::new(&[
        "probe",
        "slope_Pa2_per_s",
        "stderr",
        "r2",
        "points",
        "D_analytic_Pa2_per_s",
        "ratio",
    ])
    .meta("table", "variance growth")
    .meta(
        "window_s",
        format!("{} .. {}", num(window.t_min), num(window.t_max)),
    )
    .meta("trajectories", trajectories)
    .meta("seed", seed);
    for f in fits {
        t.push(vec![
            f.label.clone(),
            num(f.fit.slope),
            num(f.fit.stderr),
            num(f.fit.r2),
            f.fit.points.to_string(),
            num(f.analytic),
            num(f.fit.slope / f.analytic),
        ]);
    }
    t
}

/// Greedy and optimised dispatch side by side, on the shared sample grid.
pub fn comparison_table(
    net: &Network,
    a: (&DispatchResult, &JitterProfile),
    b: (&DispatchResult, &JitterProfile),
    samples: usize,
) -> gasjitter_core::Result<Table> {
    let posts = node_mileposts(net)?;
    let (ma, mb) = (a.0.method.name(), b.0.method.name());
    let h = |s: &str, m: &str| format!("{s}_{m}");
    let cols = [
        "pipe_id".to_string(),
        "x_m".into(),
        "milepost_equivalent".into(),
        h("D", ma),
        h("D", mb),
        h("power_W", ma),
        h("power_W", mb),
    ];
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs)
        .meta("table", "dispatch comparison")
        .meta("milepost_unit", "mi");
    for (k, p) in net.pipes().iter().enumerate() {
        for (i, x) in sample_grid(p.length, samples).enumerate() {
            t.push(vec![
                p.id.clone(),
                num(x),
                num(milepost(net, &posts, PipeId(k), x) / MILE),
                num(a.1.d_at(PipeId(k), i)),
                num(b.1.d_at(PipeId(k), i)),
                num(a.0.power),
                num(b.0.power),
            ]);
        }
    }
    Ok(t)
}
