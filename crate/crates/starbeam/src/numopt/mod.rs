//! Reusable numerical kernels: golden-section scalar minimization, BFGS
//! quasi-Newton minimization, finite-difference gradient checks, and the
//! structured barrier solver for the rate subproblem.

pub mod rate;

pub use rate::{
    block1_objective, rate_bits, sinr, solve_rate_subproblem, RateBlock, RateSolution,
    RateSubproblem,
};

use crate::{Error, RVec, Result};

/// Scalar minimization problem on a closed interval.
pub struct ScalarProblem<F: Fn(f64) -> f64> {
    pub objective: F,
    pub lo: f64,
    pub hi: f64,
}

/// Golden-section search for the minimum of a scalar function on
/// `[lo, hi]`. Assumes unimodality; multimodal objectives yield the local
/// minimum the shrinking bracket happens to keep. Endpoints are always
/// considered as candidates, so boundary minima are exact.
pub fn golden_section<F: Fn(f64) -> f64>(p: &ScalarProblem<F>, tol: f64) -> Result<(f64, f64)> {
    if !(p.lo < p.hi) {
        return Err(Error::InvalidArgument(format!(
            "golden_section needs lo < hi, got [{}, {}]",
            p.lo, p.hi
        )));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = &p.objective;
    let (mut lo, mut hi) = (p.lo, p.hi);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut best = (mid, f(mid));
    for cand in [p.lo, p.hi, x1, x2] {
        let fc = f(cand);
        if fc < best.1 {
            best = (cand, fc);
        }
    }
    Ok(best)
}

/// Smooth unconstrained minimization problem with an analytic gradient.
pub struct SmoothProblem<F, G>
where
    F: Fn(&RVec) -> f64,
    G: Fn(&RVec) -> RVec,
{
    pub objective: F,
    pub gradient: G,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct QuasiNewtonResult {
    pub x: RVec,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// BFGS with backtracking Armijo line search. Accepted iterates never
/// increase the objective; returns when the gradient sup-norm drops below
/// `tol` or after `max_iter` iterations (`converged` reports which).
pub fn quasi_newton<F, G>(
    p: &SmoothProblem<F, G>,
    x0: &RVec,
    tol: f64,
    max_iter: usize,
) -> Result<QuasiNewtonResult>
where
    F: Fn(&RVec) -> f64,
    G: Fn(&RVec) -> RVec,
{
    let n = p.dim;
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "quasi_newton x0 has length {}, problem dim {}",
            x0.len(),
            n
        )));
    }
    let mut x = x0.clone();
    let mut fx = (p.objective)(&x);
    let mut g = (p.gradient)(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "quasi_newton objective or gradient not finite at x0".into(),
        ));
    }
    let mut h = crate::RMat::identity(n, n);
    let mut converged = g.amax() <= tol;
    let mut iterations = 0usize;
    while !converged && iterations < max_iter {
        iterations += 1;
        let mut d = -(&h * &g);
        let mut slope = d.dot(&g);
        if !(slope < 0.0) {
            h = crate::RMat::identity(n, n);
            d = -g.clone();
            slope = d.dot(&g);
            if !(slope < 0.0) {
                break;
            }
        }
        // Backtracking Armijo line search.
        let mut alpha = 1.0f64;
        let c1 = 1e-4;
        let mut accepted = None;
        for _ in 0..60 {
            let x_new = &x + alpha * &d;
            let f_new = (p.objective)(&x_new);
            if f_new.is_finite() && f_new <= fx + c1 * alpha * slope {
                accepted = Some((x_new, f_new));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        let g_new = (p.gradient)(&x_new);
        if g_new.iter().any(|v| !v.is_finite()) {
            break;
        }
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // Expanded form avoids building the rank-1 factors twice.
            let s_col = &s;
            h = &h - rho * (&hy * s_col.transpose() + s_col * hy.transpose())
                + (rho * rho * yhy + rho) * (s_col * s_col.transpose());
        }
        debug_assert!(f_new <= fx + 1e-12 * (1.0 + fx.abs()));
        x = x_new;
        fx = f_new;
        g = g_new;
        converged = g.amax() <= tol;
    }
    Ok(QuasiNewtonResult { x, f: fx, converged, iterations })
}

/// Central finite-difference gradient, for validating analytic gradients.
pub fn finite_diff_gradient<F: Fn(&RVec) -> f64>(f: F, x: &RVec) -> RVec {
    let n = x.len();
    let mut g = RVec::zeros(n);
    for i in 0..n {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Largest relative disagreement between an analytic gradient and central
/// finite differences at `x`.
pub fn max_grad_rel_error<F, G>(p: &SmoothProblem<F, G>, x: &RVec) -> f64
where
    F: Fn(&RVec) -> f64,
    G: Fn(&RVec) -> RVec,
{
    let ga = (p.gradient)(x);
    let gn = finite_diff_gradient(&p.objective, x);
    let scale = ga.amax().max(gn.amax()).max(1.0);
    (&ga - &gn).amax() / scale
}
