//! Parallel Monte-Carlo runs and variance-growth fits against the analytic
//! diffusion coefficient.

use gasjitter_core::jitter::jitter_profile;
use gasjitter_core::sim::{
    default_window, discretize, variance_growth, Ensemble, Experiment, Probe, SimConfig, Window,
    CFL_SAFETY,
};
use gasjitter_core::units::DEFAULT_SAMPLES;
use gasjitter_core::{Network, SteadyState};
use rayon::prelude::*;

use crate::quantity::{parse, Dimension};
use crate::report::{probe_labels, ProbeFit};

/// `node:<id>` or `pipe:<id>@<x>`, with `x` a length such as `35 km`.
pub fn parse_probe(net: &Network, text: &str) -> Result<Probe, String> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| format!("probe `{text}` is not `node:<id>` or `pipe:<id>@<x>`"))?;
    match kind.trim() {
        "node" => net
            .node_id(rest.trim())
            .map(Probe::Node)
            .ok_or_else(|| format!("probe names unknown node `{}`", rest.trim())),
        "pipe" => {
            let (id, x) = rest.rsplit_once('@').ok_or_else(|| {
                format!("pipe probe `{text}` needs a position, e.g. `pipe:P1@10 km`")
            })?;
            let pipe = net
                .pipe_id(id.trim())
                .ok_or_else(|| format!("probe names unknown pipe `{}`", id.trim()))?;
            let x = parse(x, Dimension::Length)?;
            let length = net.pipe(pipe).length;
            if !(0.0..=length).contains(&x) {
                return Err(format!(
                    "probe position {x} m lies outside pipe `{}` ({length} m)",
                    id.trim()
                ));
            }
            Ok(Probe::Pipe { pipe, x })
        }
        other => Err(format!(
            "unknown probe kind `{other}` (expected node or pipe)"
        )),
    }
}

/// Largest stable step for a grid spacing, the default when none is given.
pub fn stable_dt(net: &Network, dx: f64) -> gasjitter_core::Result<f64> {
    Ok(discretize(net, dx)?.cfl_limit(net.gas().sound_speed, CFL_SAFETY))
}

/// Every trajectory of the experiment, run on the rayon pool. The result
/// does not depend on the number of threads.
pub fn run_parallel(
    net: &Network,
    ss: &SteadyState,
    config: SimConfig,
) -> gasjitter_core::Result<Ensemble> {
    let exp = Experiment::new(net, ss, config)?;
    let runs = (0..exp.config.trajectories)
        .into_par_iter()
        .map(|i| exp.run(i))
        .collect::<gasjitter_core::Result<Vec<_>>>()?;
    Ok(exp.assemble(runs))
}

/// Variance slope at every probe next to `D` from the network's own noise.
pub fn fit_probes(
    net: &Network,
    ss: &SteadyState,
    ens: &Ensemble,
    window: Option<Window>,
) -> gasjitter_core::Result<(Window, Vec<ProbeFit>)> {
    let window = window.unwrap_or_else(|| default_window(ens));
    let jp = jitter_profile(net, ss, DEFAULT_SAMPLES)?;
    let labels = probe_labels(net, ens);
    let mut fits = Vec::new();
    for (k, probe) in ens.probes.iter().enumerate() {
        let analytic = match *probe {
            Probe::Node(n) => jp.node_diffusion(n),
            Probe::Pipe { pipe, .. } => jp.d_at_x(ss, pipe, ens.probe_x[k]),
        };
        fits.push(ProbeFit {
            label: labels[k].clone(),
            fit: variance_growth(ens, k, window)?,
            analytic,
        });
    }
    Ok((window, fits))
}
