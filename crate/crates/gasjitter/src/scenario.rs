//! Declarative scenario runs: load a network, apply load and supply
//! transforms in order, dispatch the compressors, compute the jitter profile
//! and optionally check it by simulation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use gasjitter_core::dispatch::{dispatch, DispatchResult, Method, FEASIBILITY_TOL};
use gasjitter_core::jitter::{
    diffusion_coefficient, edge_constants, mainline_pipes, milepost, node_mileposts,
    FluctuationStrength, JitterProfile,
};
use gasjitter_core::sim::{Probe, SimConfig, Window};
use gasjitter_core::steady::{check_bounds, compute_tree_flows, BoundCheck};
use gasjitter_core::transform::{aggregate_branches, redistribute_load, scale_loads, shift_supply};
use gasjitter_core::units::{
    DEFAULT_NOISE_TAU, DEFAULT_P0, DEFAULT_SAMPLES, DEFAULT_T0, KILOMETRE, MILE,
};
use gasjitter_core::{End, Network, NodeId, PipeId};
use serde::{Deserialize, Serialize};

use crate::ensemble::{fit_probes, parse_probe, run_parallel, stable_dt};
use crate::format::{position, read_network, serialize_network};
use crate::quantity::{Dimension, Quantity};
use crate::report::{self, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Greedy,
    Gp,
    Sp,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Greedy => Method::Greedy,
            MethodName::Gp => Method::Gp,
            MethodName::Sp => Method::Sp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    /// Multiply every injection and consumption.
    Scale { factor: f64 },
    /// Move a fraction of the injection at `from` to the injections at `to`.
    ShiftSupply {
        from: Vec<String>,
        to: Vec<String>,
        fraction: f64,
    },
    /// Move a fraction of the consumption at `from` to the nodes in `to`.
    RedistributeLoad {
        from: String,
        to: Vec<String>,
        fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StrengthSource {
    /// Sum over the nodes' own noise parameters.
    #[default]
    Network,
    /// `S = N (phi0 / 3)^2` with the given `phi0`, `N` and `tau_eff`.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exceedance {
    pub t: Quantity,
    pub margin: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterSettings {
    pub p0: Quantity,
    pub t0: Quantity,
    pub strength: StrengthSource,
    pub phi0: Quantity,
    pub nodes: usize,
    pub tau_eff: Quantity,
    pub exceedance: Vec<Exceedance>,
}

impl Default for JitterSettings {
    fn default() -> Self {
        Self {
            p0: DEFAULT_P0.into(),
            t0: DEFAULT_T0.into(),
            strength: StrengthSource::Network,
            phi0: 20.0.into(),
            nodes: 70,
            tau_eff: DEFAULT_NOISE_TAU.into(),
            exceedance: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Defaults to `100 t0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Quantity>,
    /// Defaults to the CFL limit of the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<Quantity>,
    pub dx: Quantity,
    pub trajectories: usize,
    pub seed: u64,
    pub stride: usize,
    /// `node:<id>` or `pipe:<id>@<x>`; the jitter peak when empty.
    pub probes: Vec<String>,
    /// Fit window `[t_min, t_max]`; see the simulator's default otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[Quantity; 2]>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            horizon: None,
            dt: None,
            dx: (5.0 * KILOMETRE).into(),
            trajectories: 200,
            seed: 0,
            stride: 10,
            probes: Vec::new(),
            window: None,
        }
    }
}

fn default_method() -> MethodName {
    MethodName::Gp
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Relative paths are taken from the scenario file's directory.
    pub network: PathBuf,
    #[serde(default = "default_method")]
    pub method: MethodName,
    /// Two methods to run side by side, e.g. `["greedy", "gp"]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare: Vec<MethodName>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Collapse off-mainline branches into their attachment nodes before
    /// the steady solve.
    #[serde(default)]
    pub aggregate: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<Transform>,
    #[serde(default)]
    pub jitter: JitterSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Transform,
    Steady,
    Dispatch,
    Jitter,
    Compare,
    Simulate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::Transform => "transform",
            Stage::Steady => "steady",
            Stage::Dispatch => "dispatch",
            Stage::Jitter => "jitter",
            Stage::Compare => "compare",
            Stage::Simulate => "simulate",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> StageError {
    move |e| StageError {
        stage,
        message: e.to_string(),
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, StageError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| position(text, s.start));
            StageError {
                stage: Stage::Load,
                message: format!("scenario line {line}, column {column}: {}", e.message()),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario values are all representable in TOML")
    }
}

/// A scenario together with the directory its relative paths refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl ScenarioFile {
    pub fn read(path: &Path) -> Result<Self, StageError> {
        let text = fs::read_to_string(path).map_err(|e| StageError {
            stage: Stage::Load,
            message: format!("cannot read `{}`: {e}", path.display()),
        })?;
        Ok(Self {
            scenario: Scenario::parse(&text)?,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn network_path(&self) -> PathBuf {
        self.base_dir.join(&self.scenario.network)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Overrides the simulation seed.
    pub seed: Option<u64>,
    /// Emit solver traces.
    pub diagnostics: bool,
    /// Skip the Monte-Carlo stage even when the scenario configures one.
    pub skip_simulation: bool,
}

/// Where `D` is largest.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub pipe: PipeId,
    pub x: f64,
    /// Miles from the milepost origin.
    pub milepost: f64,
    pub d: f64,
    /// Set when the peak sits at a pipe end.
    pub node: Option<NodeId>,
}

/// A mainline node where the stationary flow changes direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reversal {
    pub node: NodeId,
    /// Flows meet at the node (a pressure minimum) rather than leave it.
    pub converging: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub results: [DispatchResult; 2],
    pub profiles: [JitterProfile; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    /// The analysed network, after transforms and aggregation.
    pub network: Network,
    pub dispatch: DispatchResult,
    pub jitter: JitterProfile,
    pub peak: Peak,
    pub reversals: Vec<Reversal>,
    pub comparison: Option<Comparison>,
    pub warnings: Vec<String>,
    /// File name and table, in output order.
    pub tables: Vec<(String, Table)>,
}

impl ScenarioReport {
    /// Write every table plus the analysed network into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), StageError> {
        fs::create_dir_all(dir).map_err(at(Stage::Write))?;
        for (name, table) in &self.tables {
            table.write(&dir.join(name)).map_err(at(Stage::Write))?;
        }
        fs::write(dir.join("network.toml"), serialize_network(&self.network))
            .map_err(at(Stage::Write))
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn node_ids(net: &Network, names: &[String]) -> Result<Vec<NodeId>, String> {
    names
        .iter()
        .map(|n| net.node_id(n).ok_or_else(|| format!("unknown node `{n}`")))
        .collect()
}

pub fn apply_transform(net: &Network, t: &Transform) -> Result<Network, String> {
    let out = match t {
        Transform::Scale { factor } => scale_loads(net, *factor),
        Transform::ShiftSupply { from, to, fraction } => {
            shift_supply(net, &node_ids(net, from)?, &node_ids(net, to)?, *fraction)
        }
        Transform::RedistributeLoad { from, to, fraction } => {
            let from = net
                .node_id(from)
                .ok_or_else(|| format!("unknown node `{from}`"))?;
            redistribute_load(net, from, &node_ids(net, to)?, *fraction)
        }
    };
    out.map_err(|e| e.to_string())
}

/// Jitter profile on a dispatched state with the configured noise strength.
pub fn scenario_jitter(
    net: &Network,
    res: &DispatchResult,
    settings: &JitterSettings,
    samples: usize,
) -> Result<JitterProfile, String> {
    let strength = match settings.strength {
        StrengthSource::Network => FluctuationStrength::from_network(net),
        StrengthSource::Estimate => FluctuationStrength::estimate(
            settings.phi0.to_si(Dimension::MassFlow)?,
            settings.nodes,
            settings.tau_eff.to_si(Dimension::Time)?,
        )
        .map_err(|e| e.to_string())?,
    };
    let consts = edge_constants(net, &res.steady).map_err(|e| e.to_string())?;
    Ok(diffusion_coefficient(
        net,
        &res.steady,
        &consts,
        strength,
        samples,
    ))
}

pub fn find_peak(net: &Network, jp: &JitterProfile) -> Result<Peak, String> {
    let (pipe, x, d) = jp.peak().ok_or("network has no pipes")?;
    let posts = node_mileposts(net).map_err(|e| e.to_string())?;
    let p = net.pipe(pipe);
    let node = if x == 0.0 {
        Some(p.from)
    } else if x == p.length {
        Some(p.to)
    } else {
        None
    };
    Ok(Peak {
        pipe,
        x,
        milepost: milepost(net, &posts, pipe, x) / MILE,
        d,
        node,
    })
}

/// Nodes along the mainline where the flow, oriented from start to end,
/// changes sign.
pub fn flow_reversals(net: &Network, res: &DispatchResult) -> Vec<Reversal> {
    let Ok(path) = mainline_pipes(net) else {
        return Vec::new();
    };
    let directed: Vec<(PipeId, End, f64)> = path
        .iter()
        .map(|&(pipe, entered)| {
            let f = res.steady.flow(pipe);
            (pipe, entered, if entered == End::From { f } else { -f })
        })
        .filter(|(_, _, f)| *f != 0.0)
        .collect();
    directed
        .windows(2)
        .filter(|w| w[0].2.signum() != w[1].2.signum())
        .map(|w| {
            let (pipe, entered, f) = w[0];
            Reversal {
                node: net.pipe(pipe).node_at(entered.opposite()),
                converging: f > 0.0,
            }
        })
        .collect()
}

fn simulation_config(
    net: &Network,
    sim: &SimulationSettings,
    t0: f64,
    peak: &Peak,
    seed: Option<u64>,
) -> Result<(SimConfig, Option<Window>), String> {
    let dx = sim.dx.to_si(Dimension::Length)?;
    let dt = match &sim.dt {
        Some(q) => q.to_si(Dimension::Time)?,
        None => stable_dt(net, dx).map_err(|e| e.to_string())?,
    };
    let horizon = match &sim.horizon {
        Some(q) => q.to_si(Dimension::Time)?,
        None => 100.0 * t0,
    };
    let probes = if sim.probes.is_empty() {
        vec![Probe::Pipe {
            pipe: peak.pipe,
            x: peak.x,
        }]
    } else {
        sim.probes
            .iter()
            .map(|p| parse_probe(net, p))
            .collect::<Result<_, _>>()?
    };
    let window = match &sim.window {
        Some([a, b]) => Some(Window {
            t_min: a.to_si(Dimension::Time)?,
            t_max: b.to_si(Dimension::Time)?,
        }),
        None => None,
    };
    Ok((
        SimConfig {
            horizon,
            dt,
            dx,
            trajectories: sim.trajectories,
            seed: seed.unwrap_or(sim.seed),
            stride: sim.stride,
            probes,
        },
        window,
    ))
}

pub fn run_scenario(file: &ScenarioFile, opts: &RunOptions) -> Result<ScenarioReport, StageError> {
    let parsed = read_network(&file.network_path()).map_err(at(Stage::Load))?;
    run_on_network(parsed.network, parsed.warnings, &file.scenario, opts)
}

/// Everything after loading: the scenario's `network` path is ignored.
pub fn run_on_network(
    mut net: Network,
    mut warnings: Vec<String>,
    sc: &Scenario,
    opts: &RunOptions,
) -> Result<ScenarioReport, StageError> {
    for t in &sc.transforms {
        net = apply_transform(&net, t).map_err(at(Stage::Transform))?;
    }
    if sc.aggregate {
        net = aggregate_branches(&net)
            .map_err(at(Stage::Transform))?
            .network;
    }

    let flows = compute_tree_flows(&net).map_err(at(Stage::Steady))?;
    let run =
        |method: MethodName| dispatch(&net, &flows, method.into()).map_err(at(Stage::Dispatch));
    // Solvers already refuse infeasible answers; this only reports what the
    // sampled check sees beyond the nodes.
    let bound_notes = |res: &DispatchResult| -> Vec<String> {
        let check = BoundCheck {
            rel_tol: FEASIBILITY_TOL,
            ..BoundCheck::default()
        };
        check_bounds(&res.steady, &net, &check)
            .iter()
            .map(|v| format!("{} dispatch: {}", res.method, v.describe(&net)))
            .collect()
    };
    let res = run(sc.method)?;
    warnings.extend(bound_notes(&res));

    let js = &sc.jitter;
    let p0 = js
        .p0
        .to_si(Dimension::Pressure)
        .map_err(at(Stage::Jitter))?;
    let t0 = js.t0.to_si(Dimension::Time).map_err(at(Stage::Jitter))?;
    let jp = scenario_jitter(&net, &res, js, sc.samples).map_err(at(Stage::Jitter))?;
    let peak = find_peak(&net, &jp).map_err(at(Stage::Jitter))?;
    let reversals = flow_reversals(&net, &res);

    let d0 = gasjitter_core::jitter::d0(p0, t0).map_err(at(Stage::Jitter))?;
    let mut tables = vec![
        (
            "summary.csv".to_string(),
            summary_table(&sc.name, &net, &res, &peak, d0, &reversals),
        ),
        (
            "steady_nodes.csv".to_string(),
            report::steady_nodes(&net, &res.steady),
        ),
        (
            "steady_profile.csv".to_string(),
            report::steady_profile(&net, &res.steady, sc.samples),
        ),
        (
            "dispatch_compressors.csv".to_string(),
            report::dispatch_compressors(&net, &res),
        ),
        (
            "dispatch_nodes.csv".to_string(),
            report::steady_nodes(&net, &res.steady),
        ),
        (
            "dispatch_summary.csv".to_string(),
            report::dispatch_summary(&res),
        ),
    ];
    if opts.diagnostics {
        tables.push((
            "dispatch_trace.csv".to_string(),
            report::dispatch_trace(&res),
        ));
    }
    let mut jt = report::jitter_table(&net, &jp, p0, t0).map_err(at(Stage::Jitter))?;
    jt = jt
        .meta("scenario", &sc.name)
        .meta("method", res.method)
        .meta("peak_milepost", report::num(peak.milepost))
        .meta("peak_D_Pa2_per_s", report::num(peak.d));
    tables.push(("jitter.csv".to_string(), jt));
    if net.mainline().is_some() {
        let t = report::jitter_mainline(&net, &jp, p0, t0).map_err(at(Stage::Jitter))?;
        tables.push(("jitter_mainline.csv".to_string(), t));
    }
    for (i, e) in js.exceedance.iter().enumerate() {
        let t = e.t.to_si(Dimension::Time).map_err(at(Stage::Jitter))?;
        let margin = e
            .margin
            .to_si(Dimension::Pressure)
            .map_err(at(Stage::Jitter))?;
        let table = report::exceedance_table(&net, &jp, t, margin).map_err(at(Stage::Jitter))?;
        tables.push((format!("exceedance_{i}.csv"), table));
    }

    let comparison = match sc.compare.as_slice() {
        [] => None,
        [a, b] => {
            let results = [run(*a)?, run(*b)?];
            for r in &results {
                warnings.extend(bound_notes(r));
            }
            let profiles = [
                scenario_jitter(&net, &results[0], js, sc.samples).map_err(at(Stage::Compare))?,
                scenario_jitter(&net, &results[1], js, sc.samples).map_err(at(Stage::Compare))?,
            ];
            let table = report::comparison_table(
                &net,
                (&results[0], &profiles[0]),
                (&results[1], &profiles[1]),
                sc.samples,
            )
            .map_err(at(Stage::Compare))?;
            tables.push(("comparison.csv".to_string(), table));
            Some(Comparison { results, profiles })
        }
        other => {
            return Err(StageError {
                stage: Stage::Compare,
                message: format!("`compare` takes exactly two methods, got {}", other.len()),
            })
        }
    };

    if let (Some(sim), false) = (&sc.simulation, opts.skip_simulation) {
        let (config, window) =
            simulation_config(&net, sim, t0, &peak, opts.seed).map_err(at(Stage::Simulate))?;
        let seed = config.seed;
        let ens = run_parallel(&net, &res.steady, config).map_err(at(Stage::Simulate))?;
        let (window, fits) =
            fit_probes(&net, &res.steady, &ens, window).map_err(at(Stage::Simulate))?;
        tables.push((
            "trajectories.csv".to_string(),
            report::trajectory_table(&net, &ens, seed),
        ));
        tables.push((
            "variance.csv".to_string(),
            report::variance_table(&fits, window, ens.trajectories.len(), seed)
                .meta("analytic_strength", "node noise parameters"),
        ));
    }

    Ok(ScenarioReport {
        name: sc.name.clone(),
        network: net,
        dispatch: res,
        jitter: jp,
        peak,
        reversals,
        comparison,
        warnings,
        tables,
    })
}

fn summary_table(
    name: &str,
    net: &Network,
    res: &DispatchResult,
    peak: &Peak,
    d0: f64,
    reversals: &[Reversal],
) -> Table {
    let mut t = Table::new(&[
        "scenario",
        "method",
        "power_W",
        "peak_pipe",
        "peak_x_m",
        "peak_milepost",
        "peak_node",
        "peak_D_Pa2_per_s",
        "peak_D_over_D0",
        "reversal_nodes",
    ])
    .meta("table", "scenario summary")
    .meta("milepost_unit", "mi")
    .meta(
        "reversal_nodes",
        "mainline nodes where the flow changes sign; * marks flows meeting",
    );
    let reversals: Vec<String> = reversals
        .iter()
        .map(|r| {
            let id = &net.node(r.node).id;
            if r.converging {
                format!("{id}*")
            } else {
                id.clone()
            }
        })
        .collect();
    t.push(vec![
        name.to_string(),
        res.method.to_string(),
        report::num(res.power),
        net.pipe(peak.pipe).id.clone(),
        report::num(peak.x),
        report::num(peak.milepost),
        peak.node.map_or(String::new(), |n| net.node(n).id.clone()),
        report::num(peak.d),
        report::num(peak.d / d0),
        reversals.join(";"),
    ]);
    t
}
