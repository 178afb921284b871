//! Diffusive growth of pressure fluctuations.
//!
//! Zero-mean consumption noise adds gas to the network at a rate whose time
//! integral `Xi(t)` behaves like a random walk. To leading order at long
//! times every pipe responds with the same time factor and a fixed spatial
//! shape,
//!
//! ```text
//! dp_ij(t, x) ~ c_s^2 Xi(t) c_ij Z_ij(x) / sum_kl c_kl V_kl
//! ```
//!
//! where `Z_ij` is the zero mode of the linearised pipe equations, `c_ij`
//! matches the modes across nodes and stations, and `V_kl = A_kl L_kl` is the
//! pipe volume. With `Var Xi(t) ~ S tau_eff t` the pressure variance grows as
//! `D_ij(x) t`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::network::{Network, NodeId, PipeId};
use crate::steady::{sample_grid, SteadyState};
use crate::units;

/// Zero mode `Z(x) = (p(0) + p(L)) / (2 p(x))`; its mean over the pipe is 1.
pub fn zeta(ss: &SteadyState, pipe: PipeId, x: f64) -> f64 {
    let [a, b] = ss.end_pressure[pipe.0];
    (a + b) / (2.0 * ss.pressure_at(pipe, x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaProfile {
    pub pipe: PipeId,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl ZetaProfile {
    pub fn start(&self) -> f64 {
        self.z[0]
    }

    pub fn end(&self) -> f64 {
        self.z[self.z.len() - 1]
    }
}

pub fn zeta_profile(ss: &SteadyState, pipe: PipeId, samples: usize) -> ZetaProfile {
    let xs: Vec<f64> = sample_grid(ss.length(pipe), samples).collect();
    let z = xs.iter().map(|&x| zeta(ss, pipe, x)).collect();
    ZetaProfile { pipe, x: xs, z }
}

/// Edge constants `c_ij` and the nodal mode coefficients they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConstants {
    pub pipe: Vec<f64>,
    /// `c_ij Z_ij(i-end) / alpha_(i->j)`, equal for every pipe at node `i`.
    pub node: Vec<f64>,
}

impl EdgeConstants {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            pipe: self.pipe.iter().map(|c| c * factor).collect(),
            node: self.node.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Edge constants by breadth-first matching from the slack node, scaled so
/// the first pipe out of the slack node has `c = 1`.
///
/// At a node `i` every incident pipe's mode, divided by the ratio of any
/// station at `i`, takes the same value. `Z` is evaluated at the end of each
/// pipe that touches `i`.
pub fn edge_constants(net: &Network, ss: &SteadyState) -> Result<EdgeConstants> {
    let tree = net
        .tree()
        .map_err(|e| Error::Domain(format!("edge constants need a tree: {e}")))?;
    let mut node = vec![0.0; net.nodes().len()];
    let mut pipe = vec![0.0; net.pipes().len()];
    node[tree.root.0] = 1.0;
    for e in &tree.edges {
        let p = net.pipe(e.pipe);
        let near = p.end_at(e.parent).expect("tree edge touches its parent");
        let far = near.opposite();
        let z_end = |end: crate::End| {
            zeta(
                ss,
                e.pipe,
                if end == crate::End::From {
                    0.0
                } else {
                    p.length
                },
            )
        };
        let c = node[e.parent.0] * net.end_ratio(&ss.ratios, e.pipe, near) / z_end(near);
        pipe[e.pipe.0] = c;
        node[e.child.0] = c * z_end(far) / net.end_ratio(&ss.ratios, e.pipe, far);
    }
    let consts = EdgeConstants { pipe, node };
    Ok(match tree.edges.first() {
        Some(first) => {
            let c0 = consts.pipe[first.pipe.0];
            consts.scaled(1.0 / c0)
        }
        None => consts,
    })
}

/// Strength of the aggregate consumption noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationStrength {
    /// `S = <(sum_n xi_n)^2>`, (kg/s)^2.
    pub s: f64,
    /// Effective correlation time, s: `Var(int sum xi dt) ~ S tau_eff t`.
    pub tau_eff: f64,
}

impl FluctuationStrength {
    pub fn new(s: f64, tau_eff: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) || !(tau_eff > 0.0 && tau_eff.is_finite()) {
            return Err(Error::Domain(format!(
                "fluctuation strength needs S >= 0 and tau_eff > 0, got S = {s}, tau_eff = {tau_eff}"
            )));
        }
        Ok(Self { s, tau_eff })
    }

    /// Independent Ornstein-Uhlenbeck nodes: `S = sum sigma^2` and
    /// `tau_eff = 2 sum sigma^2 tau / S`, the area under the summed
    /// autocovariance divided by its peak.
    pub fn from_network(net: &Network) -> Self {
        let s: f64 = net
            .nodes()
            .iter()
            .map(|n| n.noise_sigma * n.noise_sigma)
            .sum();
        let weighted: f64 = net
            .nodes()
            .iter()
            .map(|n| n.noise_sigma * n.noise_sigma * n.noise_tau)
            .sum();
        let tau_eff = if s > 0.0 {
            2.0 * weighted / s
        } else {
            units::DEFAULT_NOISE_TAU
        };
        Self { s, tau_eff }
    }

    /// `N` nodes each fluctuating with standard deviation `phi0 / 3`.
    pub fn estimate(phi0: f64, nodes: usize, tau_eff: f64) -> Result<Self> {
        let sigma = phi0 / 3.0;
        Self::new(nodes as f64 * sigma * sigma, tau_eff)
    }

    /// Zero-frequency spectral weight `S tau_eff`, (kg/s)^2 s.
    pub fn intensity(&self) -> f64 {
        self.s * self.tau_eff
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeJitter {
    pub pipe: PipeId,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// Pa^2/s at each sample.
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JitterProfile {
    pub pipes: Vec<PipeJitter>,
    pub constants: EdgeConstants,
    pub strength: FluctuationStrength,
    /// `c_s^2 / sum c_kl V_kl`, Pa/kg.
    pub gain: f64,
}

impl JitterProfile {
    /// `D` at a node, from the nodal mode coefficient.
    pub fn node_diffusion(&self, node: NodeId) -> f64 {
        let k = self.gain * self.constants.node[node.0];
        k * k * self.strength.intensity()
    }

    /// Largest sampled `D` as `(pipe, x, D)`.
    pub fn peak(&self) -> Option<(PipeId, f64, f64)> {
        let mut best: Option<(PipeId, f64, f64)> = None;
        for pj in &self.pipes {
            for (&x, &d) in pj.x.iter().zip(&pj.d) {
                if best.map_or(true, |b| d > b.2) {
                    best = Some((pj.pipe, x, d));
                }
            }
        }
        best
    }

    /// `D` at any position on a pipe, not only at the samples.
    pub fn d_at_x(&self, ss: &SteadyState, pipe: PipeId, x: f64) -> f64 {
        let k = self.gain * self.constants.pipe[pipe.0] * zeta(ss, pipe, x);
        k * k * self.strength.intensity()
    }

    pub fn d_at(&self, pipe: PipeId, sample: usize) -> f64 {
        self.pipes[pipe.0].d[sample]
    }
}

/// `D_ij(x) = (c_s^2 c_ij Z_ij(x) / sum c_kl V_kl)^2 S tau_eff`.
pub fn diffusion_coefficient(
    net: &Network,
    ss: &SteadyState,
    constants: &EdgeConstants,
    strength: FluctuationStrength,
    samples: usize,
) -> JitterProfile {
    let cs2 = net.gas().sound_speed * net.gas().sound_speed;
    let weighted_volume: f64 = net
        .pipes()
        .iter()
        .zip(&constants.pipe)
        .map(|(p, c)| c * p.volume())
        .sum();
    let gain = cs2 / weighted_volume;
    let intensity = strength.intensity();
    let pipes = (0..net.pipes().len())
        .map(|k| {
            let id = PipeId(k);
            let prof = zeta_profile(ss, id, samples);
            let d = prof
                .z
                .iter()
                .map(|z| {
                    let a = gain * constants.pipe[k] * z;
                    a * a * intensity
                })
                .collect();
            PipeJitter {
                pipe: id,
                x: prof.x,
                z: prof.z,
                d,
            }
        })
        .collect();
    JitterProfile {
        pipes,
        constants: constants.clone(),
        strength,
        gain,
    }
}

/// Edge constants, noise strength from the nodes, and `D` in one call.
pub fn jitter_profile(net: &Network, ss: &SteadyState, samples: usize) -> Result<JitterProfile> {
    let constants = edge_constants(net, ss)?;
    Ok(diffusion_coefficient(
        net,
        ss,
        &constants,
        FluctuationStrength::from_network(net),
        samples,
    ))
}

/// Reference rate `D0 = (p0 / 3)^2 / t0`.
pub fn d0(p0: f64, t0: f64) -> Result<f64> {
    if !(p0 > 0.0 && t0 > 0.0) {
        return Err(Error::Domain(format!(
            "normalisation needs p0 > 0 and t0 > 0, got p0 = {p0}, t0 = {t0}"
        )));
    }
    Ok((p0 / 3.0) * (p0 / 3.0) / t0)
}

pub fn normalize_d(d: f64, p0: f64, t0: f64) -> Result<f64> {
    Ok(d / d0(p0, t0)?)
}

fn check_gaussian(d: f64, t: f64) -> Result<()> {
    if !(d > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!(
            "Gaussian spread needs D > 0 and t > 0, got D = {d}, t = {t}"
        )));
    }
    Ok(())
}

/// Density of `dp` at time `t`: a centred Gaussian with variance `t D`.
pub fn pressure_pdf(d: f64, t: f64, delta: f64) -> Result<f64> {
    check_gaussian(d, t)?;
    let var = t * d;
    Ok(libm::exp(-delta * delta / (2.0 * var)) / libm::sqrt(2.0 * core::f64::consts::PI * var))
}

/// `P(|dp(t)| >= margin)`.
pub fn exceedance_probability(d: f64, t: f64, margin: f64) -> Result<f64> {
    check_gaussian(d, t)?;
    if !(margin >= 0.0) {
        return Err(Error::Domain(format!(
            "margin must be non-negative, got {margin}"
        )));
    }
    Ok(libm::erfc(margin / libm::sqrt(2.0 * t * d)))
}

/// Distance of every node from the milepost origin along the tree: the
/// mainline start if one is designated, else the slack node.
pub fn node_mileposts(net: &Network) -> Result<Vec<f64>> {
    let origin = net.mainline().map_or(net.slack(), |(a, _)| a);
    let tree = net.tree_from(origin)?;
    let mut dist = vec![0.0; net.nodes().len()];
    for e in &tree.edges {
        dist[e.child.0] = dist[e.parent.0] + net.pipe(e.pipe).length;
    }
    Ok(dist)
}

/// Milepost (m) of position `x` on `pipe`, given [`node_mileposts`].
pub fn milepost(net: &Network, nodes: &[f64], pipe: PipeId, x: f64) -> f64 {
    let p = net.pipe(pipe);
    if nodes[p.from.0] <= nodes[p.to.0] {
        nodes[p.from.0] + x
    } else {
        nodes[p.to.0] + (p.length - x)
    }
}

/// Mainline pipes in order from the start node, with the end each is
/// entered from.
pub fn mainline_pipes(net: &Network) -> Result<Vec<(PipeId, crate::End)>> {
    let (a, b) = net
        .mainline()
        .ok_or_else(|| Error::Domain("no mainline designated".into()))?;
    let tree = net.tree_from(a)?;
    let path = tree.path(a, b);
    Ok(path
        .windows(2)
        .map(|w| {
            let (pipe, _) = tree.parent[w[1].0].expect("path node below the start has a parent");
            let end = net
                .pipe(pipe)
                .end_at(w[0])
                .expect("consecutive path nodes share the pipe");
            (pipe, end)
        })
        .collect())
}
