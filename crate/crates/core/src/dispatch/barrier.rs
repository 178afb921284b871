//! Log-barrier interior-point method for small convex programs whose
//! objective and constraints are log-sum-exp functions of affine forms.
//!
//! A linear function is a log-sum-exp with a single term, so box and
//! half-space constraints need no special case.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Affine form `sum_k a_k x_k + b` with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn new(coeffs: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { coeffs, constant }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum::<f64>() + self.constant
    }
}

/// `log sum_k exp(a_k . x + b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lse {
    pub terms: Vec<Affine>,
}

impl Lse {
    pub fn new(terms: Vec<Affine>) -> Self {
        Self { terms }
    }

    pub fn linear(a: Affine) -> Self {
        Self { terms: vec![a] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.terms.iter().map(|t| t.eval(x)).collect();
        log_sum_exp(&vals)
    }

    /// Value, sparse gradient and the softmax weights of the terms.
    fn derivatives(&self, x: &[f64]) -> (f64, Vec<(usize, f64)>, Vec<f64>) {
        let vals: Vec<f64> = self.terms.iter().map(|t| t.eval(x)).collect();
        let f = log_sum_exp(&vals);
        let w: Vec<f64> = vals.iter().map(|v| libm::exp(v - f)).collect();
        let mut grad: Vec<(usize, f64)> = Vec::new();
        for (t, &wk) in self.terms.iter().zip(&w) {
            for &(i, a) in &t.coeffs {
                match grad.iter_mut().find(|(j, _)| *j == i) {
                    Some(g) => g.1 += wk * a,
                    None => grad.push((i, wk * a)),
                }
            }
        }
        (f, grad, w)
    }

    /// Add `scale * hessian` to `h`.
    fn add_hessian(&self, w: &[f64], grad: &[(usize, f64)], scale: f64, h: &mut DMatrix<f64>) {
        if self.terms.len() < 2 {
            return;
        }
        for (t, &wk) in self.terms.iter().zip(w) {
            for &(i, a) in &t.coeffs {
                for &(j, b) in &t.coeffs {
                    h[(i, j)] += scale * wk * a * b;
                }
            }
        }
        for &(i, gi) in grad {
            for &(j, gj) in grad {
                h[(i, j)] -= scale * gi * gj;
            }
        }
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(vals.iter().map(|v| libm::exp(v - m)).sum())
}

/// minimize `objective(x)` subject to `constraints[i](x) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub dim: usize,
    /// `None` for a pure feasibility problem.
    pub objective: Option<Lse>,
    pub constraints: Vec<Lse>,
    /// One label per constraint, used in infeasibility reports.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Stop once the duality gap bound `m / t` falls below this.
    pub gap: f64,
    pub mu: f64,
    pub t0: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            gap: 1e-10,
            mu: 20.0,
            t0: 1.0,
            newton_tol: 1e-12,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Total Newton steps over both phases.
    pub iterations: usize,
    pub gap: f64,
    /// Largest constraint value at `x` (negative when strictly feasible).
    pub max_constraint: f64,
}

pub fn solve(prog: &Program, x0: &[f64], opts: &Options) -> Result<Solution> {
    let mut iterations = 0;
    let start = if max_constraint(prog, x0).0 < 0.0 {
        x0.to_vec()
    } else {
        phase_one(prog, x0, opts, &mut iterations)?
    };
    let x = centre_path(prog, start, opts, &mut iterations)?;
    let objective = prog.objective.as_ref().map_or(0.0, |f| f.eval(&x));
    let max_constraint = max_constraint(prog, &x).0;
    Ok(Solution {
        x,
        objective,
        iterations,
        gap: prog.constraints.len() as f64 / final_t(prog, opts),
        max_constraint,
    })
}

fn final_t(prog: &Program, opts: &Options) -> f64 {
    let m = prog.constraints.len().max(1) as f64;
    let mut t = opts.t0;
    while m / t > opts.gap {
        t *= opts.mu;
    }
    t
}

fn max_constraint(prog: &Program, x: &[f64]) -> (f64, usize) {
    prog.constraints
        .iter()
        .enumerate()
        .map(|(i, c)| (c.eval(x), i))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Minimise `s` subject to `f_i(x) <= s` and `s >= -1`, stopping as soon as
/// `s` is negative.
fn phase_one(
    prog: &Program,
    x0: &[f64],
    opts: &Options,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let n = prog.dim;
    let s_idx = n;
    let shifted = |c: &Lse| Lse {
        terms: c
            .terms
            .iter()
            .map(|t| {
                let mut coeffs = t.coeffs.clone();
                coeffs.push((s_idx, -1.0));
                Affine::new(coeffs, t.constant)
            })
            .collect(),
    };
    let mut constraints: Vec<Lse> = prog.constraints.iter().map(shifted).collect();
    constraints.push(Lse::linear(Affine::new(vec![(s_idx, -1.0)], -1.0)));
    let aux = Program {
        dim: n + 1,
        objective: Some(Lse::linear(Affine::new(vec![(s_idx, 1.0)], 0.0))),
        constraints,
        labels: Vec::new(),
    };
    let (worst, _) = max_constraint(prog, x0);
    let mut z = x0.to_vec();
    z.push(worst.max(-1.0) + 1.0);

    let m = aux.constraints.len() as f64;
    let mut t = opts.t0;
    loop {
        z = centre(&aux, z, t, opts, iterations)?;
        if z[s_idx] < 0.0 && max_constraint(prog, &z[..n]).0 < 0.0 {
            z.truncate(n);
            return Ok(z);
        }
        if m / t < opts.gap {
            break;
        }
        t *= opts.mu;
    }
    z.truncate(n);
    let (violation, idx) = max_constraint(prog, &z);
    Err(Error::Infeasible {
        constraint: prog
            .labels
            .get(idx)
            .cloned()
            .unwrap_or_else(|| format!("constraint {idx}")),
        violation,
    })
}

fn centre_path(
    prog: &Program,
    mut x: Vec<f64>,
    opts: &Options,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let m = prog.constraints.len() as f64;
    if m == 0.0 {
        return Err(Error::Domain(
            "barrier method needs at least one constraint".into(),
        ));
    }
    let mut t = opts.t0;
    loop {
        x = centre(prog, x, t, opts, iterations)?;
        if m / t <= opts.gap {
            return Ok(x);
        }
        t *= opts.mu;
    }
}

/// Barrier value `t f0(x) - sum log(-f_i(x))`, or `None` outside the domain.
fn barrier_value(prog: &Program, x: &[f64], t: f64) -> Option<f64> {
    let mut v = prog.objective.as_ref().map_or(0.0, |f| t * f.eval(x));
    for c in &prog.constraints {
        let fi = c.eval(x);
        if !(fi < 0.0) {
            return None;
        }
        v -= libm::log(-fi);
    }
    Some(v)
}

/// Newton's method on the barrier function for a fixed `t`.
fn centre(
    prog: &Program,
    mut x: Vec<f64>,
    t: f64,
    opts: &Options,
    iterations: &mut usize,
) -> Result<Vec<f64>> {
    let n = prog.dim;
    for _ in 0..opts.max_newton {
        *iterations += 1;
        let mut g = DVector::<f64>::zeros(n);
        let mut h = DMatrix::<f64>::zeros(n, n);
        if let Some(f0) = &prog.objective {
            let (_, grad, w) = f0.derivatives(&x);
            for &(i, gi) in &grad {
                g[i] += t * gi;
            }
            f0.add_hessian(&w, &grad, t, &mut h);
        }
        for c in &prog.constraints {
            let (fi, grad, w) = c.derivatives(&x);
            let inv = -1.0 / fi;
            for &(i, gi) in &grad {
                g[i] += inv * gi;
            }
            c.add_hessian(&w, &grad, inv, &mut h);
            for &(i, gi) in &grad {
                for &(j, gj) in &grad {
                    h[(i, j)] += inv * inv * gi * gj;
                }
            }
        }
        let dx = newton_direction(h, &g)?;
        let decrement = -g.dot(&dx);
        let f_here = barrier_value(prog, &x, t).expect("iterate stays strictly feasible");
        // At large t the predicted decrease can fall below the rounding
        // error of the barrier value itself.
        let resolution = 64.0 * f64::EPSILON * f_here.abs();
        if decrement / 2.0 <= opts.newton_tol.max(resolution) {
            return Ok(x);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
            if let Some(f_trial) = barrier_value(prog, &trial, t) {
                if f_trial <= f_here - 0.25 * step * decrement {
                    // Steps below the resolution of x mean the centre is
                    // as accurate as floating point allows.
                    let negligible = x
                        .iter()
                        .zip(&trial)
                        .all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs()));
                    x = trial;
                    if negligible {
                        return Ok(x);
                    }
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No further progress is representable; accept the current point.
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        iterations: *iterations,
        detail: format!("Newton centring did not converge at t = {t}"),
        last_ratios: Vec::new(),
        trace: Vec::new(),
    })
}

fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n)
        .map(|i| h[(i, i)].abs())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let mut reg = 0.0;
    for _ in 0..30 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            return Ok(-ch.solve(g));
        }
        reg = if reg == 0.0 {
            1e-14 * scale
        } else {
            reg * 10.0
        };
    }
    Err(Error::NonConvergence {
        iterations: 0,
        detail: "barrier Hessian is not positive definite".into(),
        last_ratios: Vec::new(),
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn lin(coeffs: &[(usize, f64)], b: f64) -> Lse {
        Lse::linear(Affine::new(coeffs.to_vec(), b))
    }

    #[test]
    fn box_constrained_linear_program() {
        // min x + y on [1, 3] x [2, 5].
        let prog = Program {
            dim: 2,
            objective: Some(lin(&[(0, 1.0), (1, 1.0)], 0.0)),
            constraints: vec![
                lin(&[(0, -1.0)], 1.0),
                lin(&[(0, 1.0)], -3.0),
                lin(&[(1, -1.0)], 2.0),
                lin(&[(1, 1.0)], -5.0),
            ],
            labels: (0..4).map(|i| i.to_string()).collect(),
        };
        let sol = solve(&prog, &[0.0, 0.0], &Options::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-8);
        assert!((sol.x[1] - 2.0).abs() < 1e-8);
        assert!(sol.max_constraint < 0.0);
    }

    #[test]
    fn lse_objective_matches_closed_form() {
        // min log(e^x + e^-x) on x in [-1, 2]: optimum 0, value log 2.
        let prog = Program {
            dim: 1,
            objective: Some(Lse::new(vec![
                Affine::new(vec![(0, 1.0)], 0.0),
                Affine::new(vec![(0, -1.0)], 0.0),
            ])),
            constraints: vec![lin(&[(0, -1.0)], -1.0), lin(&[(0, 1.0)], -2.0)],
            labels: vec!["lo".into(), "hi".into()],
        };
        let sol = solve(&prog, &[1.5], &Options::default()).unwrap();
        assert!(sol.x[0].abs() < 1e-6);
        assert!((sol.objective - libm::log(2.0)).abs() < 1e-10);
    }

    #[test]
    fn infeasible_reports_a_constraint() {
        // x <= 0 and x >= 1.
        let prog = Program {
            dim: 1,
            objective: None,
            constraints: vec![lin(&[(0, 1.0)], 0.0), lin(&[(0, -1.0)], 1.0)],
            labels: vec!["upper".into(), "lower".into()],
        };
        match solve(&prog, &[5.0], &Options::default()) {
            Err(Error::Infeasible { violation, .. }) => assert!((violation - 0.5).abs() < 1e-3),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + libm::log(2.0))).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
