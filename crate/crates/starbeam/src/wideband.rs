//! Wideband OFDM beamforming with true time delays.
//!
//! The analog stage is split: per RF chain, `n_ttd` delay lines each feed a
//! phase-shifter block of `n / n_ttd` antennas, so the analog beamformer at
//! subcarrier frequency `f` is `F_PS * T(f)` with a frequency-independent
//! unit-modulus `F_PS` and a diagonal-per-chain delay matrix `T(f)`. The
//! delays give the array a frequency-dependent steering direction, which is
//! what counters beam split across a wide band.
//!
//! This module holds the beamformer structure, its path-matched
//! initialization, the normalized array-gain probe used for beam-split
//! analysis, the delay subproblem (smooth unconstrained least squares solved
//! with BFGS), and the OFDM optimizer driver.

use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;

use crate::channel::{ula_response, PathSet, WideChannel};
use crate::config::{AlgoParams, ScenarioConfig, Side, StarsMode};
use crate::metrics::{self, Metrics};
use crate::narrowband::{
    coupled_theta_solve, f_weight, least_squares_fit, max_mod_mat, max_mod_vec, side_theta,
    stars_sweeps, unit_modulus_sweeps, vartheta_project_step, CoupledVars, OptimizerReport,
};
use crate::numopt::{
    block1_objective, quasi_newton, rate_bits, solve_rate_subproblem, RateBlock, RateSubproblem,
    SmoothProblem,
};
use crate::stars::{project_coupled, StarsCoefficients};
use crate::{C64, CMat, CVec, RMat, RVec, Result};

/// TTD-based hybrid beamformer. `f_ps` is `n x (n_rf * n_ttd)`; the column
/// for (chain `n`, delay line `i`) is supported on antenna rows
/// `i*delta .. (i+1)*delta` with unit-modulus entries there, `delta = n/n_ttd`.
#[derive(Debug, Clone, PartialEq)]
pub struct TtdBeamformer {
    pub f_ps: CMat,
    /// Delays in seconds, `n_rf x n_ttd`. Stored unconstrained; wrap for
    /// reporting only.
    pub delays: RMat,
    /// Per-subcarrier digital beamformers, each `n_rf x k`.
    pub f_bb: Vec<CMat>,
}

impl TtdBeamformer {
    pub fn n(&self) -> usize {
        self.f_ps.nrows()
    }

    pub fn n_rf(&self) -> usize {
        self.delays.nrows()
    }

    pub fn n_ttd(&self) -> usize {
        self.delays.ncols()
    }

    /// Analog beamformer `F_PS * T(f)` at one frequency, `n x n_rf`.
    pub fn analog(&self, f_hz: f64) -> CMat {
        &self.f_ps * assemble_tm(&self.delays, f_hz)
    }

    /// Effective end-to-end beamformer `F_PS * T(f_m) * F_BB[m]`, `n x k`.
    pub fn effective(&self, m: usize, f_hz: f64) -> CMat {
        self.analog(f_hz) * &self.f_bb[m]
    }

    /// Delays folded into `[0, 1/f_wrap_hz)`. Telemetry only: the objective
    /// is periodic in each delay, the optimizer never needs the fold.
    pub fn wrapped_delays(&self, f_wrap_hz: f64) -> RMat {
        let period = 1.0 / f_wrap_hz;
        RMat::from_fn(self.delays.nrows(), self.delays.ncols(), |n, i| {
            self.delays[(n, i)].rem_euclid(period)
        })
    }
}

/// Delay phase matrix at one frequency: `(n_rf * n_ttd) x n_rf`,
/// block-diagonal, block `n` holding `exp(-j 2 pi f t_{n,i})`.
pub fn assemble_tm(delays: &RMat, f_hz: f64) -> CMat {
    let (n_rf, n_ttd) = (delays.nrows(), delays.ncols());
    let mut t = CMat::zeros(n_rf * n_ttd, n_rf);
    for n in 0..n_rf {
        for i in 0..n_ttd {
            let ph = -2.0 * PI * f_hz * delays[(n, i)];
            t[(n * n_ttd + i, n)] = C64::new(ph.cos(), ph.sin());
        }
    }
    t
}

/// Path-matched initialization: chain `n` targets the `n`-th strongest
/// BS-hop direction. Per delay line `i` (0-based), the phase-shifter block
/// is the matching slice of the carrier steering vector advanced by
/// `exp(j pi i delta sin phi)`, and the delay grows linearly in `i` so the
/// inter-block phase tracks frequency; a constant offset keeps all delays
/// nonnegative when `sin phi < 0`. Digital beamformers start at zero, the
/// caller owns their initialization.
pub fn init_ttd(paths: &PathSet, cfg: &ScenarioConfig) -> TtdBeamformer {
    let (n, n_rf, n_ttd) = (cfg.n, cfg.n_rf, cfg.n_ttd);
    let delta = n / n_ttd;
    let dirs = paths.strongest_bs_directions(n_rf);
    let mut f_ps = CMat::zeros(n, n_rf * n_ttd);
    let mut delays = RMat::zeros(n_rf, n_ttd);
    for (chain, &phi) in dirs.iter().enumerate() {
        let b = ula_response(cfg.f_c_hz, phi, n, cfg.spacing_m());
        let s = phi.sin();
        let step = delta as f64 * s / (2.0 * cfg.f_c_hz);
        let offset = if s >= 0.0 { 0.0 } else { (n_ttd - 1) as f64 * step.abs() };
        for i in 0..n_ttd {
            let ph = PI * (i * delta) as f64 * s;
            let advance = C64::new(ph.cos(), ph.sin());
            for l in 0..delta {
                f_ps[(i * delta + l, chain * n_ttd + i)] = advance * b[i * delta + l];
            }
            delays[(chain, i)] = i as f64 * step + offset;
        }
    }
    TtdBeamformer { f_ps, delays, f_bb: vec![CMat::zeros(n_rf, cfg.k); cfg.subcarriers] }
}

/// Normalized array gain of a beamforming column at one frequency and
/// physical direction: `|b(f, angle)^H w| / n`, which is 1 exactly when `w`
/// matches the steering vector.
pub fn array_gain(w: &crate::CVec, f_hz: f64, angle_rad: f64, cfg: &ScenarioConfig) -> f64 {
    let b = ula_response(f_hz, angle_rad, w.len(), cfg.spacing_m());
    b.dotc(w).norm() / w.len() as f64
}

/// Value and gradient of the delay objective
/// `sum_m ||d[m] - F_PS T(f_m) F_BB[m]||_F^2` with respect to the delays.
pub fn ttd_objective(
    delays: &RMat,
    f_ps: &CMat,
    f_bb: &[CMat],
    d: &[CMat],
    f_hz: &[f64],
) -> (f64, RMat) {
    let (n_rf, n_ttd) = (delays.nrows(), delays.ncols());
    let delta = f_ps.nrows() / n_ttd;
    let mut value = 0.0;
    let mut grad = RMat::zeros(n_rf, n_ttd);
    for (m, dm) in d.iter().enumerate() {
        let res = dm - f_ps * assemble_tm(delays, f_hz[m]) * &f_bb[m];
        value += res.norm_squared();
        // W = res * F_BB^H; column n picks out chain n's share of the residual.
        let w = &res * f_bb[m].adjoint();
        let omega = 2.0 * PI * f_hz[m];
        for n in 0..n_rf {
            for i in 0..n_ttd {
                let col = n * n_ttd + i;
                let mut u = C64::new(0.0, 0.0);
                for l in 0..delta {
                    let row = i * delta + l;
                    u += f_ps[(row, col)].conj() * w[(row, n)];
                }
                let ph = -omega * delays[(n, i)];
                let e = C64::new(ph.cos(), ph.sin());
                grad[(n, i)] -= 2.0 * omega * (e * u.conj()).im;
            }
        }
    }
    (value, grad)
}

/// Minimize the delay objective from the current delays with BFGS. The
/// nonnegativity of physical delays is dropped on purpose: the objective is
/// periodic in every delay, so any minimizer has a nonnegative twin. Returns
/// the final objective value; never increases it.
///
/// Internally the solver works on the dimensionless variable `x = t * f_top`
/// (delays in units of the shortest subcarrier period); raw delays at the
/// 1e-10 s scale against gradients at the 1e10 scale would make the
/// identity-seeded BFGS take hopeless first steps.
pub fn update_delays(
    ttd: &mut TtdBeamformer,
    d: &[CMat],
    f_hz: &[f64],
    algo: &AlgoParams,
) -> Result<f64> {
    let (n_rf, n_ttd) = (ttd.delays.nrows(), ttd.delays.ncols());
    let f_ps = ttd.f_ps.clone();
    let f_bb = ttd.f_bb.clone();
    let d = d.to_vec();
    let f_hz = f_hz.to_vec();
    let f_top = f_hz.iter().cloned().fold(f64::MIN, f64::max);
    let period = 1.0 / f_top;
    let unflatten =
        move |x: &RVec| RMat::from_fn(n_rf, n_ttd, |n, i| period * x[n * n_ttd + i]);
    let (v0, _) = ttd_objective(&ttd.delays, &f_ps, &f_bb, &d, &f_hz);
    let tol = algo.bfgs_tol * (1.0 + v0);
    let x0 = RVec::from_fn(n_rf * n_ttd, |j, _| f_top * ttd.delays[(j / n_ttd, j % n_ttd)]);
    let problem = {
        let unflatten2 = unflatten;
        let (f_ps2, f_bb2, d2, f2) = (f_ps.clone(), f_bb.clone(), d.clone(), f_hz.clone());
        SmoothProblem {
            dim: n_rf * n_ttd,
            objective: move |x: &RVec| ttd_objective(&unflatten(x), &f_ps, &f_bb, &d, &f_hz).0,
            gradient: move |x: &RVec| {
                let g = ttd_objective(&unflatten2(x), &f_ps2, &f_bb2, &d2, &f2).1;
                RVec::from_fn(n_rf * n_ttd, |j, _| period * g[(j / n_ttd, j % n_ttd)])
            },
        }
    };
    let sol = quasi_newton(&problem, &x0, tol, algo.bfgs_max_iter)?;
    if sol.f <= v0 {
        for n in 0..n_rf {
            for i in 0..n_ttd {
                ttd.delays[(n, i)] = period * sol.x[n * n_ttd + i];
            }
        }
        Ok(sol.f)
    } else {
        Ok(v0)
    }
}

/// Wideband optimizer state: the narrowband primal and dual blocks replicated
/// per subcarrier with a shared surface and shared (eta, a, b), and the TTD
/// beamformer in place of the single analog matrix. Receive rows and their
/// duals are kept in noise-std units exactly as in the narrowband state.
#[derive(Debug, Clone)]
pub struct WidePddState {
    /// Per-subcarrier auxiliary beamformers, each `n x k`.
    pub f: Vec<CMat>,
    /// `p[m][k]`: effective receive row of user k at subcarrier m.
    pub p: Vec<Vec<CVec>>,
    /// `r[m]`: per-user rates at subcarrier m (bit/s/Hz).
    pub r: Vec<RVec>,
    pub eta: f64,
    pub a: f64,
    pub b: f64,
    pub ttd: TtdBeamformer,
    pub theta: StarsCoefficients,
    /// Duals of `F_m = F_PS T(f_m) F_BB[m]`.
    pub psi: Vec<CMat>,
    /// Duals of the receive-row couplings.
    pub lambda: Vec<Vec<CVec>>,
    pub coupled: Option<CoupledVars>,
    pub rho: f64,
    pub epsilon: f64,
    /// Per-subcarrier barrier warm starts.
    pub t_hint: Vec<Option<f64>>,
    /// Noise standard deviation per subcarrier; the unit of `p` and `lambda`.
    pub sigma: f64,
}

/// Result of one wideband run.
#[derive(Debug, Clone)]
pub struct WideOutcome {
    pub ttd: TtdBeamformer,
    /// Reported surface coefficients; in coupled mode the exactly feasible
    /// auxiliary copy.
    pub theta: StarsCoefficients,
    pub eta: f64,
    pub metrics: Metrics,
    pub report: OptimizerReport,
    pub state: WidePddState,
}

/// OFDM rate prefactor per subcarrier.
fn ofdm_mu(cfg: &ScenarioConfig) -> f64 {
    1.0 / (cfg.subcarriers + cfg.cp_len) as f64
}

/// Coupling target of user k at subcarrier m in noise-std units.
fn wide_target_row(st: &WidePddState, ch: &WideChannel, side: Side, m: usize, k: usize) -> CVec {
    metrics::receive_row(side_theta(&st.theta, side), &ch.h[m][k], &st.f[m]).unscale(st.sigma)
}

/// Initial wideband state: the path-matched TTD initializer for the analog
/// stage, random per-subcarrier digital parts scaled to 90% of the power
/// budget, a random feasible surface, and every auxiliary at its exact
/// coupling value. Duals start at zero.
pub fn init_wide_state<R: Rng>(
    ch: &WideChannel,
    paths: &PathSet,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> WidePddState {
    let mc = cfg.subcarriers;
    let mut ttd = init_ttd(paths, cfg);
    let p_t = ScenarioConfig::p_t_w(cfg.p_t_dbm[0]);
    for m in 0..mc {
        let mut f_bb = CMat::from_fn(cfg.n_rf, cfg.k, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let norm2 = (ttd.analog(ch.f_hz[m]) * &f_bb).norm_squared();
        if norm2 > 0.0 {
            f_bb.scale_mut((0.9 * p_t / norm2).sqrt());
        }
        ttd.f_bb[m] = f_bb;
    }
    let theta = StarsCoefficients::random(cfg.mode, cfg.m(), rng);
    let coupled = match cfg.mode {
        StarsMode::Independent => None,
        StarsMode::Coupled => Some(CoupledVars {
            vartheta: theta.clone(),
            mu_t: CVec::zeros(cfg.m()),
            mu_r: CVec::zeros(cfg.m()),
        }),
    };
    let f: Vec<CMat> = (0..mc).map(|m| ttd.effective(m, ch.f_hz[m])).collect();
    let mut st = WidePddState {
        f,
        p: vec![vec![CVec::zeros(cfg.k); cfg.k]; mc],
        r: vec![RVec::zeros(cfg.k); mc],
        eta: 0.0,
        a: 0.0,
        b: 1.0,
        ttd,
        theta,
        psi: vec![CMat::zeros(cfg.n, cfg.k); mc],
        lambda: vec![vec![CVec::zeros(cfg.k); cfg.k]; mc],
        coupled,
        rho: cfg.algo.rho0,
        epsilon: cfg.algo.eps0,
        t_hint: vec![None; mc],
        sigma: cfg.sigma2_wide().sqrt(),
    };
    rebuild_wide_auxiliaries(&mut st, ch, cfg);
    st
}

/// Recompute p, r, a, b, eta exactly from (theta, per-subcarrier F) so all
/// couplings hold with zero residual.
fn rebuild_wide_auxiliaries(st: &mut WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) {
    let sides = cfg.user_sides();
    for m in 0..cfg.subcarriers {
        for k in 0..cfg.k {
            let tgt = wide_target_row(st, ch, sides[k], m, k);
            st.p[m][k] = tgt;
        }
        for k in 0..cfg.k {
            st.r[m][k] = rate_bits(&st.p[m][k], k, 1.0);
        }
    }
    let mu = ofdm_mu(cfg);
    let sum_r: f64 = st.r.iter().map(|rm| rm.iter().sum::<f64>()).sum();
    st.a = (mu * sum_r).max(0.0).sqrt();
    let avg_f2: f64 = st.f.iter().map(|f| f.norm_squared()).sum::<f64>() / cfg.subcarriers as f64;
    st.b = cfg.w * (avg_f2 + cfg.power.xi * mu * sum_r) + metrics::p_c_wide(cfg);
    st.eta = st.a * st.a / st.b;
}

/// Augmented Lagrangian of the penalized wideband problem at the current
/// state (larger is better).
pub fn al_objective_wide(st: &WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) -> f64 {
    let sides = cfg.user_sides();
    let s = 1.0 / (2.0 * st.rho);
    let wf = f_weight(cfg);
    let mut val = st.eta;
    for m in 0..cfg.subcarriers {
        let eff = st.ttd.effective(m, ch.f_hz[m]);
        val -= s * wf * (&st.f[m] - eff + st.psi[m].scale(st.rho)).norm_squared();
        for k in 0..cfg.k {
            let tgt = wide_target_row(st, ch, sides[k], m, k);
            val -= s * (&st.p[m][k] - tgt + st.lambda[m][k].scale(st.rho)).norm_squared();
        }
    }
    if let Some(cv) = &st.coupled {
        val -= s * (&cv.vartheta.theta_t - &st.theta.theta_t + cv.mu_t.scale(st.rho)).norm_squared();
        val -= s * (&cv.vartheta.theta_r - &st.theta.theta_r + cv.mu_r.scale(st.rho)).norm_squared();
    }
    val
}

/// Block 1: sweep the subcarriers, each solving one barrier subproblem over
/// {F_m, p_m, r_m, a, b, eta} with every other subcarrier's rates and powers
/// frozen at their current values, keeping the previous block whenever the
/// solver's answer is not an improvement.
pub fn update_wide_block1(
    st: &mut WidePddState,
    ch: &WideChannel,
    cfg: &ScenarioConfig,
) -> Result<()> {
    let sides = cfg.user_sides();
    let k = cfg.k;
    let mc = cfg.subcarriers;
    let mu = ofdm_mu(cfg);
    let p_t = ScenarioConfig::p_t_w(cfg.p_t_dbm[0]);
    let sigma2 = vec![1.0; k];
    for m in 0..mc {
        let sum_r_other: f64 = (0..mc)
            .filter(|&mm| mm != m)
            .map(|mm| st.r[mm].iter().sum::<f64>())
            .sum();
        let sum_f2_other: f64 = (0..mc)
            .filter(|&mm| mm != m)
            .map(|mm| st.f[mm].norm_squared())
            .sum();
        let c_f = st.ttd.effective(m, ch.f_hz[m]) - st.psi[m].scale(st.rho);
        let h_eff: Vec<CVec> = (0..k)
            .map(|i| {
                ch.h[m][i]
                    .tr_mul(side_theta(&st.theta, sides[i]))
                    .unscale(st.sigma)
            })
            .collect();
        let lam_off: Vec<CVec> = st.lambda[m].iter().map(|l| l.scale(st.rho)).collect();
        let anchor = RateBlock {
            f: st.f[m].clone(),
            p: st.p[m].clone(),
            r: st.r[m].clone(),
            a: st.a,
            b: st.b,
            eta: st.eta,
        };
        let prob = RateSubproblem {
            rho: st.rho,
            f_penalty: true,
            f_weight: f_weight(cfg),
            c_f: &c_f,
            h_eff: &h_eff,
            lam_off: &lam_off,
            sigma2: &sigma2,
            p_t,
            rs_coeff: mu,
            rs_const: mu * sum_r_other,
            pf_coeff: cfg.w / mc as f64,
            pr_coeff: cfg.w * cfg.power.xi * mu,
            pow_const: cfg.w * (sum_f2_other / mc as f64 + cfg.power.xi * mu * sum_r_other)
                + metrics::p_c_wide(cfg),
            anchor: &anchor,
            t0_hint: st.t_hint[m],
            gap_tol: cfg.algo.barrier_gap,
            max_newton: cfg.algo.barrier_max_newton,
        };
        let sol = solve_rate_subproblem(&prob)?;
        st.t_hint[m] = Some((sol.t_final / 30.0).clamp(1.0, 1e3));
        if sol.objective >= block1_objective(&anchor, &prob) {
            st.f[m] = sol.block.f;
            st.p[m] = sol.block.p;
            st.r[m] = sol.block.r;
            st.a = sol.block.a;
            st.b = sol.block.b;
            st.eta = sol.block.eta;
        }
    }
    Ok(())
}

/// Quadratic form of one surface side accumulated over every (subcarrier,
/// user) pair assigned to that side.
fn wide_side_quadratic(
    st: &WidePddState,
    ch: &WideChannel,
    sides: &[Side],
    transmit: bool,
) -> (CMat, CVec) {
    let m_el = st.theta.m();
    let mut phi = CMat::zeros(m_el, m_el);
    let mut ups = CVec::zeros(m_el);
    for m in 0..st.f.len() {
        for (k, side) in sides.iter().enumerate() {
            if matches!(side, Side::Transmit) != transmit {
                continue;
            }
            let g = (&ch.h[m][k] * &st.f[m]).unscale(st.sigma);
            let g_conj = g.conjugate();
            phi += &g_conj * g.transpose();
            ups += g_conj * (&st.p[m][k] + st.lambda[m][k].scale(st.rho));
        }
    }
    (phi, ups)
}

/// Element-wise surface update (independent mode), on the quadratic summed
/// over all subcarriers.
pub fn update_wide_stars(st: &mut WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) {
    let sides = cfg.user_sides();
    let (phi_t, ups_t) = wide_side_quadratic(st, ch, &sides, true);
    let (phi_r, ups_r) = wide_side_quadratic(st, ch, &sides, false);
    stars_sweeps(&mut st.theta, &phi_t, &ups_t, &phi_r, &ups_r, &cfg.algo);
}

/// Coupled mode only: exact per-side solve of the theta-dependent penalty
/// terms summed over all subcarriers.
pub fn update_wide_theta_coupled(st: &mut WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) {
    let sides = cfg.user_sides();
    let quad_t = wide_side_quadratic(st, ch, &sides, true);
    let quad_r = wide_side_quadratic(st, ch, &sides, false);
    let cv = st.coupled.as_ref().expect("coupled mode state");
    coupled_theta_solve(&mut st.theta, cv, st.rho, quad_t, quad_r);
}

/// Coupled mode only: auxiliary-surface projection step.
pub fn update_wide_vartheta(st: &mut WidePddState, _cfg: &ScenarioConfig) {
    let cv = st.coupled.as_mut().expect("coupled mode state");
    vartheta_project_step(cv, &st.theta, st.rho);
}

/// Phase-shifter network block: unit-modulus element sweeps on the fitting
/// quadratic summed over subcarriers, restricted to the block support
/// (delay line i of every chain feeds antenna rows i*delta..(i+1)*delta).
pub fn update_phase_network(st: &mut WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) {
    let n_ttd = cfg.n_ttd;
    let delta = cfg.n / n_ttd;
    let cols = cfg.n_rf * n_ttd;
    let mut a = CMat::zeros(cols, cols);
    let mut b = CMat::zeros(cfg.n, cols);
    for m in 0..cfg.subcarriers {
        let bm = assemble_tm(&st.ttd.delays, ch.f_hz[m]) * &st.ttd.f_bb[m];
        a += &bm * bm.adjoint();
        b += (&st.f[m] + st.psi[m].scale(st.rho)) * bm.adjoint();
    }
    unit_modulus_sweeps(
        &mut st.ttd.f_ps,
        &a,
        &b,
        cfg.algo.elementwise_tol,
        cfg.algo.elementwise_max_sweeps,
        |row, col| row / delta == col % n_ttd,
    );
}

/// Digital block: per-subcarrier least-squares fit of F_m + rho Psi_m in the
/// range of the analog stage at that subcarrier's frequency, accepted only
/// when it does not increase the residual.
pub fn update_wide_digital(st: &mut WidePddState, ch: &WideChannel, _cfg: &ScenarioConfig) {
    for m in 0..st.f.len() {
        let basis = st.ttd.analog(ch.f_hz[m]);
        let c = &st.f[m] + st.psi[m].scale(st.rho);
        let before = (&c - &basis * &st.ttd.f_bb[m]).norm_squared();
        if let Some(f_bb) = least_squares_fit(&basis, &c) {
            if (&c - &basis * &f_bb).norm_squared() <= before {
                st.ttd.f_bb[m] = f_bb;
            }
        }
    }
}

/// Delay block: quasi-Newton descent on the summed fitting objective with
/// the current penalty-shifted targets.
pub fn update_wide_delays(
    st: &mut WidePddState,
    ch: &WideChannel,
    cfg: &ScenarioConfig,
) -> Result<()> {
    let d: Vec<CMat> = (0..st.f.len())
        .map(|m| &st.f[m] + st.psi[m].scale(st.rho))
        .collect();
    update_delays(&mut st.ttd, &d, &ch.f_hz, &cfg.algo)?;
    Ok(())
}

/// Constraint violation h over all per-subcarrier equality families, in the
/// same per-family natural units as the narrowband driver.
pub fn violation_wide(st: &WidePddState, ch: &WideChannel, cfg: &ScenarioConfig) -> f64 {
    let sides = cfg.user_sides();
    let wf = f_weight(cfg).sqrt();
    let mut h = 0.0f64;
    for m in 0..cfg.subcarriers {
        let eff = st.ttd.effective(m, ch.f_hz[m]);
        h = h.max(max_mod_mat(&(&st.f[m] - eff)) * wf);
        for k in 0..cfg.k {
            let tgt = wide_target_row(st, ch, sides[k], m, k);
            h = h.max(max_mod_vec(&(&st.p[m][k] - tgt)));
        }
    }
    if let Some(cv) = &st.coupled {
        h = h.max(max_mod_vec(&(&cv.vartheta.theta_t - &st.theta.theta_t)));
        h = h.max(max_mod_vec(&(&cv.vartheta.theta_r - &st.theta.theta_r)));
    }
    h
}

/// Outer-iteration bookkeeping, identical in structure to the narrowband
/// driver: dual ascent when the violation cleared the threshold, penalty
/// tightening otherwise, threshold tracking 0.9 of the achieved violation.
pub fn outer_update_wide(st: &mut WidePddState, ch: &WideChannel, h: f64, cfg: &ScenarioConfig) {
    if h <= st.epsilon {
        let sides = cfg.user_sides();
        let inv = 1.0 / st.rho;
        for m in 0..cfg.subcarriers {
            let eff = st.ttd.effective(m, ch.f_hz[m]);
            let dpsi = (&st.f[m] - eff).scale(inv);
            st.psi[m] += dpsi;
            for k in 0..cfg.k {
                let tgt = wide_target_row(st, ch, sides[k], m, k);
                let dlam = (&st.p[m][k] - tgt).scale(inv);
                st.lambda[m][k] += dlam;
            }
        }
        if let Some(cv) = st.coupled.as_mut() {
            cv.mu_t += (&cv.vartheta.theta_t - &st.theta.theta_t).scale(inv);
            cv.mu_r += (&cv.vartheta.theta_r - &st.theta.theta_r).scale(inv);
        }
    } else {
        st.rho = (st.rho * cfg.algo.penalty_shrink).max(cfg.algo.rho_floor);
    }
    st.epsilon = 0.9 * h;
}

fn wide_inner_loop(
    st: &mut WidePddState,
    ch: &WideChannel,
    cfg: &ScenarioConfig,
    coupled: bool,
) -> Result<Vec<f64>> {
    let mut trace = vec![al_objective_wide(st, ch, cfg)];
    for _ in 0..cfg.algo.max_inner_sweeps {
        update_wide_block1(st, ch, cfg)?;
        if coupled {
            update_wide_theta_coupled(st, ch, cfg);
            update_wide_vartheta(st, cfg);
        } else {
            update_wide_stars(st, ch, cfg);
        }
        update_phase_network(st, ch, cfg);
        update_wide_digital(st, ch, cfg);
        update_wide_delays(st, ch, cfg)?;
        let prev = *trace.last().unwrap();
        let cur = al_objective_wide(st, ch, cfg);
        trace.push(cur);
        if (cur - prev).abs() <= cfg.algo.inner_tol * (1.0 + prev.abs()) {
            break;
        }
    }
    Ok(trace)
}

/// Coupled warm start from an independent wideband solution: project the
/// surface, rebuild every auxiliary exactly, reset duals and the penalty
/// schedule.
fn warm_start_wide_coupled(
    ch: &WideChannel,
    cfg: &ScenarioConfig,
    indep: &WidePddState,
) -> WidePddState {
    let proj = project_coupled(&indep.theta.theta_t, &indep.theta.theta_r);
    let mut st = indep.clone();
    for m in 0..cfg.subcarriers {
        st.f[m] = st.ttd.effective(m, ch.f_hz[m]);
    }
    st.theta = proj.clone();
    st.coupled = Some(CoupledVars {
        vartheta: proj,
        mu_t: CVec::zeros(cfg.m()),
        mu_r: CVec::zeros(cfg.m()),
    });
    st.psi = vec![CMat::zeros(cfg.n, cfg.k); cfg.subcarriers];
    st.lambda = vec![vec![CVec::zeros(cfg.k); cfg.k]; cfg.subcarriers];
    st.rho = cfg.algo.rho0;
    st.epsilon = cfg.algo.eps0;
    st.t_hint = vec![None; cfg.subcarriers];
    rebuild_wide_auxiliaries(&mut st, ch, cfg);
    st
}

/// Full wideband PDD run. Mirrors the narrowband driver: coupled mode warm
/// starts from the projected independent solution, the best iterate by
/// violation is kept when the outer cap is reached, and the reported digital
/// parts are rescaled per subcarrier if the implementable product slightly
/// overshoots the power budget.
pub fn run_wideband<R: Rng>(
    ch: &WideChannel,
    paths: &PathSet,
    cfg: &ScenarioConfig,
    mode: StarsMode,
    rng: &mut R,
) -> Result<WideOutcome> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.mode = mode;
    let mut st = match mode {
        StarsMode::Independent => init_wide_state(ch, paths, &cfg, rng),
        StarsMode::Coupled => {
            let mut icfg = cfg.clone();
            icfg.mode = StarsMode::Independent;
            let indep = run_wideband(ch, paths, &icfg, StarsMode::Independent, rng)?;
            warm_start_wide_coupled(ch, &cfg, &indep.state)
        }
    };
    let coupled = matches!(mode, StarsMode::Coupled);
    let mut report = OptimizerReport::default();
    let mut best: Option<(f64, WidePddState)> = None;
    for _ in 0..cfg.algo.max_outer {
        let trace = wide_inner_loop(&mut st, ch, &cfg, coupled)?;
        report.inner_trace.push(trace);
        let h = violation_wide(&st, ch, &cfg);
        report.h_trace.push(h);
        report.eta_trace.push(st.eta);
        report.rho_trace.push(st.rho);
        if best.as_ref().map_or(true, |(bh, _)| h < *bh) {
            best = Some((h, st.clone()));
        }
        if h <= cfg.algo.h_threshold {
            report.converged = true;
            break;
        }
        outer_update_wide(&mut st, ch, h, &cfg);
    }
    if !report.converged {
        if let Some((_, bst)) = best {
            st = bst;
        }
    }

    let theta = match &st.coupled {
        Some(cv) => cv.vartheta.clone(),
        None => st.theta.clone(),
    };
    let mut ttd = st.ttd.clone();
    let p_t = ScenarioConfig::p_t_w(cfg.p_t_dbm[0]);
    for m in 0..cfg.subcarriers {
        let norm2 = ttd.effective(m, ch.f_hz[m]).norm_squared();
        if norm2 > p_t {
            ttd.f_bb[m].scale_mut((p_t / norm2).sqrt());
        }
    }
    let metrics = metrics::se_ee_wide(&theta, &cfg.user_sides(), &ch.h, &ttd, &cfg);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(WideOutcome {
        ttd,
        theta,
        eta: st.eta,
        metrics,
        report,
        state: st,
    })
}
