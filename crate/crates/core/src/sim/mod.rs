//! Transient Monte-Carlo simulator for the isothermal pipe equations
//!
//! ```text
//! c_s^-2 dp/dt + (1/A) dPhi/dx = 0
//! dPhi/dt + A dp/dx = -(beta / 2d) Phi |Phi| / (A p)
//! ```
//!
//! on a staggered grid: pressures at cell centres, mass flows on faces. The
//! outermost faces of a pipe sit at its ends and couple to a node across a
//! half cell. Nodes hold no gas; each step their pressures follow from
//! nodal balance with the current injection, which includes an
//! Ornstein-Uhlenbeck fluctuation per node. No pressure is pinned, so the
//! zero mode is free to wander.
//!
//! Friction is semi-implicit with the face pressure taken as the mean of its
//! two neighbours. That makes the stationary profile sampled at cell centres
//! an exact fixed point of the scheme.

mod noise;
mod stats;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{End, Network, NodeId, PipeId};
use crate::steady::SteadyState;

pub use noise::{ou_step, NoiseRealization};
pub use stats::{default_window, variance_growth, variance_series, VarianceFit, Window};

/// Default Courant safety factor.
pub const CFL_SAFETY: f64 = 0.5;
/// Fewest cells allowed in a pipe.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cells: Vec<usize>,
    pub dx: Vec<f64>,
    cell_offset: Vec<usize>,
    face_offset: Vec<usize>,
}

/// `ceil(L / dx_target)` cells per pipe, at least [`MIN_CELLS`].
pub fn discretize(net: &Network, dx_target: f64) -> Result<Grid> {
    if !(dx_target > 0.0 && dx_target.is_finite()) {
        return Err(Error::Domain(format!(
            "cell size must be positive, got {dx_target}"
        )));
    }
    let mut cells = Vec::with_capacity(net.pipes().len());
    let mut dx = Vec::with_capacity(net.pipes().len());
    let mut cell_offset = Vec::with_capacity(net.pipes().len());
    let mut face_offset = Vec::with_capacity(net.pipes().len());
    let (mut co, mut fo) = (0, 0);
    for p in net.pipes() {
        // Guard against L / dx landing a hair above an integer.
        let ratio = p.length / dx_target;
        let rounded = libm::round(ratio);
        let n = if (ratio - rounded).abs() < 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            libm::ceil(ratio) as usize
        };
        let n = n.max(MIN_CELLS);
        cells.push(n);
        dx.push(p.length / n as f64);
        cell_offset.push(co);
        face_offset.push(fo);
        co += n;
        fo += n + 1;
    }
    Ok(Grid {
        cells,
        dx,
        cell_offset,
        face_offset,
    })
}

impl Grid {
    pub fn total_cells(&self) -> usize {
        self.cells.iter().sum()
    }

    pub fn total_faces(&self) -> usize {
        self.cells.iter().map(|n| n + 1).sum()
    }

    /// Flat index of cell `i` of `pipe`.
    pub fn cell(&self, pipe: PipeId, i: usize) -> usize {
        self.cell_offset[pipe.0] + i
    }

    /// Flat index of face `i` of `pipe`; face 0 is at `x = 0`.
    pub fn face(&self, pipe: PipeId, i: usize) -> usize {
        self.face_offset[pipe.0] + i
    }

    pub fn cell_centre(&self, pipe: PipeId, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx[pipe.0]
    }

    /// Cell whose centre lies nearest to `x`.
    pub fn nearest_cell(&self, pipe: PipeId, x: f64) -> usize {
        let n = self.cells[pipe.0];
        let i = libm::floor(x / self.dx[pipe.0]).max(0.0) as usize;
        i.min(n - 1)
    }

    /// Largest stable time step for sound speed `c` and a Courant factor.
    pub fn cfl_limit(&self, c: f64, safety: f64) -> f64 {
        let dx = self.dx.iter().copied().fold(f64::INFINITY, f64::min);
        safety * dx / c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Cell-centre pressures, Pa, flat over pipes.
    pub cell_p: Vec<f64>,
    /// Face mass flows, kg/s, positive along `from -> to`.
    pub face_flow: Vec<f64>,
    pub node_p: Vec<f64>,
    pub noise: NoiseRealization,
}

#[derive(Debug, Clone, PartialEq)]
struct PipeCoeffs {
    area: f64,
    /// beta / 2d
    kf: f64,
    ends: [NodeId; 2],
    ratio: [f64; 2],
}

/// One explicit stepper for a fixed network, grid, ratios and time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    pub grid: Grid,
    pub dt: f64,
    /// Stationary injections per node, kg/s. Public so that tests can drive
    /// unbalanced inputs.
    pub injections: Vec<f64>,
    c2: f64,
    pipes: Vec<PipeCoeffs>,
    pipe_names: Vec<String>,
    node_names: Vec<String>,
}

impl Simulator {
    pub fn new(net: &Network, grid: Grid, ratios: &[f64], dt: f64) -> Result<Self> {
        Self::with_safety(net, grid, ratios, dt, CFL_SAFETY)
    }

    pub fn with_safety(
        net: &Network,
        grid: Grid,
        ratios: &[f64],
        dt: f64,
        safety: f64,
    ) -> Result<Self> {
        let limit = grid.cfl_limit(net.gas().sound_speed, safety);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::Cfl { dt, limit });
        }
        if ratios.len() != net.compressors().len() {
            return Err(Error::Domain(format!(
                "expected {} compression ratios, got {}",
                net.compressors().len(),
                ratios.len()
            )));
        }
        let pipes = net
            .pipes()
            .iter()
            .enumerate()
            .map(|(k, p)| PipeCoeffs {
                area: p.area(),
                kf: p.beta(net.gas()) / (2.0 * p.diameter),
                ends: [p.from, p.to],
                ratio: [
                    net.end_ratio(ratios, PipeId(k), End::From),
                    net.end_ratio(ratios, PipeId(k), End::To),
                ],
            })
            .collect();
        Ok(Self {
            grid,
            dt,
            injections: net.nodes().iter().map(|n| n.injection).collect(),
            c2: net.gas().sound_speed * net.gas().sound_speed,
            pipes,
            pipe_names: net.pipes().iter().map(|p| p.id.clone()).collect(),
            node_names: net.nodes().iter().map(|n| n.id.clone()).collect(),
        })
    }

    /// The stationary solution sampled onto the grid.
    pub fn steady_state(&self, ss: &SteadyState, noise: NoiseRealization) -> SimState {
        let mut cell_p = vec![0.0; self.grid.total_cells()];
        let mut face_flow = vec![0.0; self.grid.total_faces()];
        for k in 0..self.pipes.len() {
            let id = PipeId(k);
            for i in 0..self.grid.cells[k] {
                cell_p[self.grid.cell(id, i)] = ss.pressure_at(id, self.grid.cell_centre(id, i));
            }
            for i in 0..=self.grid.cells[k] {
                face_flow[self.grid.face(id, i)] = ss.flow(id);
            }
        }
        SimState {
            t: 0.0,
            cell_p,
            face_flow,
            node_p: ss.node_pressure.clone(),
            noise,
        }
    }

    /// Every cell and node at pressure `p`, no flow.
    pub fn uniform_state(&self, p: f64, noise: NoiseRealization) -> SimState {
        SimState {
            t: 0.0,
            cell_p: vec![p; self.grid.total_cells()],
            face_flow: vec![0.0; self.grid.total_faces()],
            node_p: vec![p; self.injections.len()],
            noise,
        }
    }

    /// Gas mass held in the pipes, kg.
    pub fn linepack(&self, state: &SimState) -> f64 {
        let mut m = 0.0;
        for (k, pc) in self.pipes.iter().enumerate() {
            let id = PipeId(k);
            let vol = pc.area * self.grid.dx[k];
            for i in 0..self.grid.cells[k] {
                m += state.cell_p[self.grid.cell(id, i)] * vol;
            }
        }
        m / self.c2
    }

    /// Total injection including noise, kg/s, as used by the last step.
    pub fn net_injection(&self, state: &SimState) -> f64 {
        self.injections
            .iter()
            .zip(&state.noise.xi)
            .map(|(q, x)| q + x)
            .sum()
    }

    pub fn step(&self, state: &mut SimState) -> Result<()> {
        let dt = self.dt;
        state.noise.advance(dt);
        let n_nodes = self.injections.len();
        let mut sum_a = vec![0.0; n_nodes];
        let mut sum_g = vec![0.0; n_nodes];
        // Leaving flow at each pipe end is a + g * p_node.
        let mut ends: Vec<[(f64, f64); 2]> = Vec::with_capacity(self.pipes.len());
        for (k, pc) in self.pipes.iter().enumerate() {
            let id = PipeId(k);
            let n = self.grid.cells[k];
            let coef = dt * pc.area / (0.5 * self.grid.dx[k]);
            let mut pair = [(0.0, 0.0); 2];
            for (e, slot) in pair.iter_mut().enumerate() {
                let (face, cell) = if e == 0 {
                    (self.grid.face(id, 0), self.grid.cell(id, 0))
                } else {
                    (self.grid.face(id, n), self.grid.cell(id, n - 1))
                };
                let node = pc.ends[e];
                let alpha = pc.ratio[e];
                let phi = state.face_flow[face];
                let p_cell = state.cell_p[cell];
                let pbar = 0.5 * (alpha * state.node_p[node.0] + p_cell);
                let den = 1.0 + dt * pc.kf * phi.abs() / (pc.area * pbar);
                let g = coef * alpha / den;
                let a = if e == 0 {
                    (phi - coef * p_cell) / den
                } else {
                    (-phi - coef * p_cell) / den
                };
                sum_a[node.0] += a;
                sum_g[node.0] += g;
                *slot = (a, g);
            }
            ends.push(pair);
        }
        for i in 0..n_nodes {
            if sum_g[i] > 0.0 {
                let p = (self.injections[i] + state.noise.xi[i] - sum_a[i]) / sum_g[i];
                if !(p > 0.0 && p.is_finite()) {
                    return Err(Error::BlowUp {
                        pipe: format!("node {}", self.node_names[i]),
                        cell: 0,
                        t: state.t + dt,
                    });
                }
                state.node_p[i] = p;
            }
        }

        for (k, pc) in self.pipes.iter().enumerate() {
            let id = PipeId(k);
            let n = self.grid.cells[k];
            let dx = self.grid.dx[k];
            let [(a0, g0), (a1, g1)] = ends[k];
            let f0 = self.grid.face(id, 0);
            let c0 = self.grid.cell(id, 0);
            state.face_flow[f0] = a0 + g0 * state.node_p[pc.ends[0].0];
            state.face_flow[f0 + n] = -(a1 + g1 * state.node_p[pc.ends[1].0]);
            for i in 1..n {
                let (pl, pr) = (state.cell_p[c0 + i - 1], state.cell_p[c0 + i]);
                let phi = state.face_flow[f0 + i];
                let den = 1.0 + dt * pc.kf * phi.abs() / (pc.area * 0.5 * (pl + pr));
                state.face_flow[f0 + i] = (phi - dt * pc.area * (pr - pl) / dx) / den;
            }
            let gain = dt * self.c2 / (pc.area * dx);
            for i in 0..n {
                let p = &mut state.cell_p[c0 + i];
                *p += gain * (state.face_flow[f0 + i] - state.face_flow[f0 + i + 1]);
                if !(*p > 0.0 && p.is_finite()) {
                    return Err(Error::BlowUp {
                        pipe: self.pipe_names[k].clone(),
                        cell: i,
                        t: state.t + dt,
                    });
                }
            }
        }
        state.t += dt;
        Ok(())
    }
}

/// Where a pressure is recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Probe {
    Node(NodeId),
    /// The cell centre nearest to `x`.
    Pipe {
        pipe: PipeId,
        x: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub dx: f64,
    pub trajectories: usize,
    pub seed: u64,
    /// Record every `stride` steps.
    pub stride: usize,
    pub probes: Vec<Probe>,
}

/// A prepared Monte-Carlo run: the stepper, the initial state and the probe
/// layout. Trajectories can be run in any order or in parallel.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub sim: Simulator,
    pub config: SimConfig,
    /// Stationary pressure at each probe.
    pub baseline: Vec<f64>,
    /// Actual position of each probe (cell centre), m; 0 for nodes.
    pub probe_x: Vec<f64>,
    pub times: Vec<f64>,
    pub max_tau: f64,
    initial: SimState,
    sigma: Vec<f64>,
    tau: Vec<f64>,
    steps: usize,
}

impl Experiment {
    pub fn new(net: &Network, ss: &SteadyState, config: SimConfig) -> Result<Self> {
        if !(config.horizon > 0.0) || config.stride == 0 {
            return Err(Error::Domain("horizon and stride must be positive".into()));
        }
        let grid = discretize(net, config.dx)?;
        let sim = Simulator::new(net, grid, &ss.ratios, config.dt)?;
        let sigma: Vec<f64> = net.nodes().iter().map(|n| n.noise_sigma).collect();
        let tau: Vec<f64> = net.nodes().iter().map(|n| n.noise_tau).collect();
        let max_tau = net
            .nodes()
            .iter()
            .filter(|n| n.noise_sigma > 0.0)
            .map(|n| n.noise_tau)
            .fold(0.0, f64::max);
        let initial = sim.steady_state(ss, NoiseRealization::quiet(sigma.len()));
        let mut baseline = Vec::new();
        let mut probe_x = Vec::new();
        for probe in &config.probes {
            match *probe {
                Probe::Node(n) => {
                    if n.0 >= net.nodes().len() {
                        return Err(Error::Domain(format!("probe node {} out of range", n.0)));
                    }
                    baseline.push(ss.pressure(n));
                    probe_x.push(0.0);
                }
                Probe::Pipe { pipe, x } => {
                    if pipe.0 >= net.pipes().len() {
                        return Err(Error::Domain(format!("probe pipe {} out of range", pipe.0)));
                    }
                    let i = sim.grid.nearest_cell(pipe, x);
                    baseline.push(initial.cell_p[sim.grid.cell(pipe, i)]);
                    probe_x.push(sim.grid.cell_centre(pipe, i));
                }
            }
        }
        let steps = libm::round(config.horizon / config.dt) as usize;
        let times = (0..=steps)
            .step_by(config.stride)
            .map(|s| s as f64 * config.dt)
            .collect();
        Ok(Self {
            sim,
            config,
            baseline,
            probe_x,
            times,
            max_tau,
            initial,
            sigma,
            tau,
            steps,
        })
    }

    fn read(&self, state: &SimState) -> Vec<f64> {
        self.config
            .probes
            .iter()
            .map(|probe| match *probe {
                Probe::Node(n) => state.node_p[n.0],
                Probe::Pipe { pipe, x } => {
                    state.cell_p[self
                        .sim
                        .grid
                        .cell(pipe, self.sim.grid.nearest_cell(pipe, x))]
                }
            })
            .collect()
    }

    /// Trajectory `index`, seeded with `seed + index`. Returns the probe
    /// pressures at every recorded time.
    pub fn run(&self, index: usize) -> Result<Vec<Vec<f64>>> {
        let mut state = self.initial.clone();
        state.noise = NoiseRealization::new(
            self.sigma.clone(),
            self.tau.clone(),
            self.config.seed.wrapping_add(index as u64),
        );
        let mut out = Vec::with_capacity(self.times.len());
        out.push(self.read(&state));
        for s in 1..=self.steps {
            self.sim.step(&mut state)?;
            if s % self.config.stride == 0 {
                out.push(self.read(&state));
            }
        }
        Ok(out)
    }

    pub fn assemble(&self, trajectories: Vec<Vec<Vec<f64>>>) -> Ensemble {
        Ensemble {
            times: self.times.clone(),
            probes: self.config.probes.clone(),
            probe_x: self.probe_x.clone(),
            baseline: self.baseline.clone(),
            max_tau: self.max_tau,
            trajectories,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    pub probes: Vec<Probe>,
    pub probe_x: Vec<f64>,
    pub baseline: Vec<f64>,
    /// Largest correlation time among fluctuating nodes.
    pub max_tau: f64,
    /// `[trajectory][time][probe]` pressures, Pa.
    pub trajectories: Vec<Vec<Vec<f64>>>,
}

impl Ensemble {
    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// Run every trajectory in sequence.
pub fn simulate(net: &Network, ss: &SteadyState, config: SimConfig) -> Result<Ensemble> {
    let exp = Experiment::new(net, ss, config)?;
    let runs = (0..exp.config.trajectories)
        .map(|i| exp.run(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(exp.assemble(runs))
}
