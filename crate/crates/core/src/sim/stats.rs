//! Ensemble statistics: variance of the pressure deviation and its growth
//! rate.

use alloc::format;
use alloc::vec::Vec;

use super::Ensemble;
use crate::error::{Error, Result};

/// Fewest trajectories accepted by [`variance_growth`].
pub const MIN_TRAJECTORIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceFit {
    /// Pa^2/s
    pub slope: f64,
    /// Ordinary least-squares standard error of the slope. Successive
    /// variances are correlated, so treat this as a lower bound.
    pub stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Sample variance across trajectories of the deviation from the stationary
/// value, at every recorded time.
pub fn variance_series(ens: &Ensemble, probe: usize) -> Vec<f64> {
    let n = ens.trajectories.len() as f64;
    (0..ens.times.len())
        .map(|k| {
            let base = ens.baseline[probe];
            let mean = ens
                .trajectories
                .iter()
                .map(|tr| tr[k][probe] - base)
                .sum::<f64>()
                / n;
            ens.trajectories
                .iter()
                .map(|tr| {
                    let d = tr[k][probe] - base - mean;
                    d * d
                })
                .sum::<f64>()
                / (n - 1.0)
        })
        .collect()
}

/// Fit window from `5 max tau` up to the last time at which every recorded
/// deviation is still within 10% of its stationary pressure.
pub fn default_window(ens: &Ensemble) -> Window {
    let mut t_max = ens.horizon();
    'outer: for k in 0..ens.times.len() {
        for tr in &ens.trajectories {
            for (p, base) in tr[k].iter().zip(&ens.baseline) {
                if (p - base).abs() > 0.1 * base {
                    t_max = if k > 0 { ens.times[k - 1] } else { 0.0 };
                    break 'outer;
                }
            }
        }
    }
    Window {
        t_min: 5.0 * ens.max_tau,
        t_max,
    }
}

/// Least-squares slope of `Var(dp(t))` against `t` over the window.
pub fn variance_growth(ens: &Ensemble, probe: usize, window: Window) -> Result<VarianceFit> {
    if ens.trajectories.len() < MIN_TRAJECTORIES {
        return Err(Error::Domain(format!(
            "variance growth needs at least {MIN_TRAJECTORIES} trajectories, got {}",
            ens.trajectories.len()
        )));
    }
    if probe >= ens.probes.len() {
        return Err(Error::Domain(format!("probe {probe} out of range")));
    }
    if window.t_min < 5.0 * ens.max_tau * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "fit window must start at least 5 correlation times in ({} s), got {} s",
            5.0 * ens.max_tau,
            window.t_min
        )));
    }
    if !(window.t_min < window.t_max) || window.t_max > ens.horizon() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "fit window [{}, {}] s lies outside the simulated horizon {} s",
            window.t_min,
            window.t_max,
            ens.horizon()
        )));
    }
    let var = variance_series(ens, probe);
    let pts: Vec<(f64, f64)> = ens
        .times
        .iter()
        .zip(&var)
        .filter(|(t, _)| **t >= window.t_min && **t <= window.t_max)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Domain(format!(
            "fit window holds {} samples; at least 3 are needed",
            pts.len()
        )));
    }
    Ok(fit_line(&pts))
}

fn fit_line(pts: &[(f64, f64)]) -> VarianceFit {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - mv) * (p.1 - mv)).sum();
    let slope = sxy / sxx;
    let intercept = mv - slope * mt;
    let sse: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    VarianceFit {
        slope,
        stderr: libm::sqrt(sse / (n - 2.0) / sxx),
        intercept,
        r2,
        points: pts.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        let fit = fit_line(&pts);
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }
}
