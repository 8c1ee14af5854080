//! Barrier solver for the rate/beamformer block of the penalized problem.
//!
//! The block maximizes
//! `varpi(a,b) - (1/2rho)||F - C_F||^2 - sum_k (1/2rho)||p_k - F^T c_k + d_k||^2`
//! over `(F, p, r, a, b)` subject to
//!   a^2 <= rs_coeff * sum_k r_k + rs_const,
//!   pf * ||F||^2 + pr * sum_k r_k + pow_const <= b,
//!   ||F||^2 <= P_t,
//!   r_k <= log2(1 + gamma_k(p_k)),
//! where `varpi` is the first-order minorant of `a^2/b` at the anchor and
//! `gamma_k` is the concave SINR minorant at the anchor. Every constraint is
//! convex, so a damped-Newton log-barrier path gives the exact block optimum;
//! iterates stay strictly feasible throughout. The generalized coefficients
//! cover the narrowband block, one subcarrier of the wideband block, and the
//! full-digital variant (no F penalty).

use crate::{C64, CMat, CVec, Error, RMat, RVec, Result};

/// First-order minorant of `a^2/b` at `(a0, b0)`: tight at the anchor and a
/// global lower bound for `b > 0`.
pub fn varpi_breve(a0: f64, b0: f64, a: f64, b: f64) -> f64 {
    (2.0 * a0 / b0) * a - (a0 / b0) * (a0 / b0) * b
}

/// SINR of user `k` given its effective receive row `p` (entry `i` is the
/// user-`k` response to stream `i`).
pub fn sinr(p: &CVec, k: usize, sigma2: f64) -> f64 {
    let mut interf = sigma2;
    for i in 0..p.len() {
        if i != k {
            interf += p[i].norm_sqr();
        }
    }
    p[k].norm_sqr() / interf
}

/// Achievable rate `log2(1 + sinr)` in bit/s/Hz.
pub fn rate_bits(p: &CVec, k: usize, sigma2: f64) -> f64 {
    (1.0 + sinr(p, k, sigma2)).log2()
}

/// Concave minorant of the SINR of user `k`, anchored at `p0`: linear in the
/// desired entry, concave quadratic in the interferers; equals the true SINR
/// at the anchor and never exceeds it elsewhere.
pub fn gamma_breve(p0: &CVec, k: usize, sigma2: f64, p: &CVec) -> f64 {
    let mut i0 = sigma2;
    for i in 0..p0.len() {
        if i != k {
            i0 += p0[i].norm_sqr();
        }
    }
    let alpha = 2.0 / i0;
    let beta = p0[k].norm_sqr() / (i0 * i0);
    let mut interf = sigma2;
    for i in 0..p.len() {
        if i != k {
            interf += p[i].norm_sqr();
        }
    }
    alpha * (p0[k].conj() * p[k]).re - beta * interf
}

/// One value of the block's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBlock {
    /// N x K effective beamformer.
    pub f: CMat,
    /// Per-user effective receive rows, each length K.
    pub p: Vec<CVec>,
    pub r: RVec,
    pub a: f64,
    pub b: f64,
    pub eta: f64,
}

/// Problem data for one solve. All references stay fixed during the solve.
pub struct RateSubproblem<'a> {
    pub rho: f64,
    /// Include the `||F - c_f||^2` penalty (off for the full-digital case).
    pub f_penalty: bool,
    /// Relative weight of the F penalty against the receive-row penalties:
    /// the F equality measured in units of the natural beamformer entry
    /// scale, so one penalty schedule serves both couplings.
    pub f_weight: f64,
    /// N x K penalty center for F.
    pub c_f: &'a CMat,
    /// Effective channel rows: `p_k = F^T h_eff[k]` at the coupling point.
    pub h_eff: &'a [CVec],
    /// Dual offsets `rho * lambda_k`, each length K.
    pub lam_off: &'a [CVec],
    pub sigma2: &'a [f64],
    pub p_t: f64,
    /// a^2 <= rs_coeff * sum r + rs_const.
    pub rs_coeff: f64,
    pub rs_const: f64,
    /// pf * ||F||^2 + pr * sum r + pow_const <= b.
    pub pf_coeff: f64,
    pub pr_coeff: f64,
    pub pow_const: f64,
    pub anchor: &'a RateBlock,
    /// Barrier warm start: final `t` of the previous solve on this block.
    pub t0_hint: Option<f64>,
    /// Absolute-per-unit-scale duality-gap target.
    pub gap_tol: f64,
    /// Cap on total Newton steps.
    pub max_newton: usize,
}

#[derive(Debug, Clone)]
pub struct RateSolution {
    pub block: RateBlock,
    /// Block objective with the exact `a^2/b` term (not the minorant).
    pub objective: f64,
    pub t_final: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

/// Block objective with the exact quadratic-over-linear term, used for
/// ascent checks between sweeps.
pub fn block1_objective(blk: &RateBlock, prob: &RateSubproblem) -> f64 {
    let s_f = if prob.f_penalty { prob.f_weight / (2.0 * prob.rho) } else { 0.0 };
    let s_p = 1.0 / (2.0 * prob.rho);
    let mut val = blk.a * blk.a / blk.b;
    if prob.f_penalty {
        val -= s_f * (&blk.f - prob.c_f).norm_squared();
    }
    for k in 0..blk.p.len() {
        let e = residual(&blk.f, &blk.p[k], &prob.h_eff[k], &prob.lam_off[k]);
        val -= s_p * e.norm_squared();
    }
    val
}

fn residual(f: &CMat, p_k: &CVec, c_k: &CVec, d_k: &CVec) -> CVec {
    let k = p_k.len();
    CVec::from_fn(k, |i, _| {
        let mut cf = C64::new(0.0, 0.0);
        for n in 0..f.nrows() {
            cf += c_k[n] * f[(n, i)];
        }
        p_k[i] - cf + d_k[i]
    })
}

struct Layout {
    n: usize,
    k: usize,
    dim: usize,
}

impl Layout {
    fn new(n: usize, k: usize) -> Self {
        Layout { n, k, dim: 2 * n * k + 2 * k * k + k + 2 }
    }
    fn f_re(&self, row: usize, col: usize) -> usize {
        2 * (col * self.n + row)
    }
    fn p_re(&self, k: usize, i: usize) -> usize {
        2 * self.n * self.k + 2 * (k * self.k + i)
    }
    fn r(&self, k: usize) -> usize {
        2 * self.n * self.k + 2 * self.k * self.k + k
    }
    fn a(&self) -> usize {
        self.r(self.k)
    }
    fn b(&self) -> usize {
        self.a() + 1
    }
    fn pack(&self, blk: &RateBlock) -> RVec {
        let mut x = RVec::zeros(self.dim);
        for col in 0..self.k {
            for row in 0..self.n {
                x[self.f_re(row, col)] = blk.f[(row, col)].re;
                x[self.f_re(row, col) + 1] = blk.f[(row, col)].im;
            }
        }
        for k in 0..self.k {
            for i in 0..self.k {
                x[self.p_re(k, i)] = blk.p[k][i].re;
                x[self.p_re(k, i) + 1] = blk.p[k][i].im;
            }
        }
        for k in 0..self.k {
            x[self.r(k)] = blk.r[k];
        }
        x[self.a()] = blk.a;
        x[self.b()] = blk.b;
        x
    }
    fn unpack(&self, x: &RVec) -> RateBlock {
        let f = CMat::from_fn(self.n, self.k, |row, col| {
            C64::new(x[self.f_re(row, col)], x[self.f_re(row, col) + 1])
        });
        let p = (0..self.k)
            .map(|k| {
                CVec::from_fn(self.k, |i, _| C64::new(x[self.p_re(k, i)], x[self.p_re(k, i) + 1]))
            })
            .collect();
        let r = RVec::from_fn(self.k, |k, _| x[self.r(k)]);
        RateBlock { f, p, r, a: x[self.a()], b: x[self.b()], eta: 0.0 }
    }
}

/// SCA data derived from the anchor.
struct Sca {
    q_a: f64,
    q_b: f64,
    /// Per user: (alpha, beta, anchor desired entry).
    gamma: Vec<(f64, f64, C64)>,
}

const LN2: f64 = std::f64::consts::LN_2;

struct Solver<'a> {
    prob: &'a RateSubproblem<'a>,
    lay: Layout,
    sca: Sca,
    s_f: f64,
    s_p: f64,
}

impl<'a> Solver<'a> {
    /// gamma_k minorant value and the interference part at x.
    fn gamma_at(&self, x: &RVec, k: usize) -> f64 {
        let (alpha, beta, p0kk) = self.sca.gamma[k];
        let lay = &self.lay;
        let pkk = C64::new(x[lay.p_re(k, k)], x[lay.p_re(k, k) + 1]);
        let mut interf = self.prob.sigma2[k];
        for i in 0..lay.k {
            if i != k {
                let pi = C64::new(x[lay.p_re(k, i)], x[lay.p_re(k, i) + 1]);
                interf += pi.norm_sqr();
            }
        }
        alpha * (p0kk.conj() * pkk).re - beta * interf
    }

    /// Constraint values g <= 0, ordered [g2, g3, g4, g5_0.., domain uses
    /// 1 + gamma > 0 implicitly through g5 being finite.
    fn constraints(&self, x: &RVec) -> Option<RVec> {
        let lay = &self.lay;
        let p = self.prob;
        let sum_r: f64 = (0..lay.k).map(|k| x[lay.r(k)]).sum();
        let a = x[lay.a()];
        let b = x[lay.b()];
        let f_sq: f64 = (0..2 * lay.n * lay.k).map(|i| x[i] * x[i]).sum();
        let mut g = RVec::zeros(3 + lay.k);
        g[0] = a * a - p.rs_coeff * sum_r - p.rs_const;
        g[1] = p.pf_coeff * f_sq + p.pr_coeff * sum_r + p.pow_const - b;
        g[2] = f_sq - p.p_t;
        for k in 0..lay.k {
            let gam = self.gamma_at(x, k);
            if gam <= -1.0 {
                return None;
            }
            g[3 + k] = x[lay.r(k)] - (1.0 + gam).log2();
        }
        Some(g)
    }

    fn f0(&self, x: &RVec) -> f64 {
        let lay = &self.lay;
        let p = self.prob;
        let blk = lay.unpack(x);
        let mut val = self.sca.q_a * blk.a - self.sca.q_b * blk.b;
        if p.f_penalty {
            val -= self.s_f * (&blk.f - p.c_f).norm_squared();
        }
        for k in 0..lay.k {
            let e = residual(&blk.f, &blk.p[k], &p.h_eff[k], &p.lam_off[k]);
            val -= self.s_p * e.norm_squared();
        }
        val
    }

    /// Barrier value, None outside the domain.
    fn phi(&self, x: &RVec, t: f64) -> Option<f64> {
        let g = self.constraints(x)?;
        if g.iter().any(|&v| v >= 0.0) {
            return None;
        }
        let mut val = -t * self.f0(x);
        for &v in g.iter() {
            val -= (-v).ln();
        }
        Some(val)
    }

    /// Gradient and Hessian of the barrier at a strictly feasible x.
    fn derivatives(&self, x: &RVec, t: f64) -> (RVec, RMat) {
        let lay = &self.lay;
        let p = self.prob;
        let d = lay.dim;
        let mut grad = RVec::zeros(d);
        let mut hess = RMat::zeros(d, d);
        let blk = lay.unpack(x);

        // -t * f0 smooth parts.
        grad[lay.a()] -= t * self.sca.q_a;
        grad[lay.b()] += t * self.sca.q_b;
        if p.f_penalty {
            let two = 2.0 * t * self.s_f;
            for col in 0..lay.k {
                for row in 0..lay.n {
                    let diff = blk.f[(row, col)] - p.c_f[(row, col)];
                    grad[lay.f_re(row, col)] += two * diff.re;
                    grad[lay.f_re(row, col) + 1] += two * diff.im;
                    hess[(lay.f_re(row, col), lay.f_re(row, col))] += two;
                    hess[(lay.f_re(row, col) + 1, lay.f_re(row, col) + 1)] += two;
                }
            }
        }
        // Coupling penalties: e_{k,i} = p_{k,i} - c_k^T f_i + d_{k,i}.
        let two_sp = 2.0 * t * self.s_p;
        for k in 0..lay.k {
            let c_k = &p.h_eff[k];
            let e = residual(&blk.f, &blk.p[k], c_k, &p.lam_off[k]);
            for i in 0..lay.k {
                let (pr, pi) = (lay.p_re(k, i), lay.p_re(k, i) + 1);
                grad[pr] += two_sp * e[i].re;
                grad[pi] += two_sp * e[i].im;
                hess[(pr, pr)] += two_sp;
                hess[(pi, pi)] += two_sp;
                for n in 0..lay.n {
                    // d e_{k,i} / d f_{n,i} = -c_k[n]
                    let m = -c_k[n];
                    let (fr, fi) = (lay.f_re(n, i), lay.f_re(n, i) + 1);
                    let ge = (m.conj() * e[i]) * two_sp;
                    grad[fr] += ge.re;
                    grad[fi] += ge.im;
                    // cross block 2 * s_p * realify(conj(m) * 1)
                    let c = m.conj() * two_sp;
                    hess[(fr, pr)] += c.re;
                    hess[(pr, fr)] += c.re;
                    hess[(fi, pi)] += c.re;
                    hess[(pi, fi)] += c.re;
                    hess[(fr, pi)] -= c.im;
                    hess[(pi, fr)] -= c.im;
                    hess[(fi, pr)] += c.im;
                    hess[(pr, fi)] += c.im;
                }
            }
            // F-F block: 2 s_p realify(c* c^T), same for every column.
            for n1 in 0..lay.n {
                for n2 in 0..lay.n {
                    let m = c_k[n1].conj() * c_k[n2] * two_sp;
                    for i in 0..lay.k {
                        let (r1, i1) = (lay.f_re(n1, i), lay.f_re(n1, i) + 1);
                        let (r2, i2) = (lay.f_re(n2, i), lay.f_re(n2, i) + 1);
                        hess[(r1, r2)] += m.re;
                        hess[(i1, i2)] += m.re;
                        hess[(r1, i2)] -= m.im;
                        hess[(i1, r2)] += m.im;
                    }
                }
            }
        }

        // Barrier terms.
        let g = self.constraints(x).expect("derivatives called at feasible x");
        let sum_scope: Vec<usize> = (0..lay.k).map(|k| lay.r(k)).collect();
        // g2 = a^2 - rs_coeff sum r - rs_const
        {
            let inv = 1.0 / (-g[0]);
            let a = x[lay.a()];
            let mut v = RVec::zeros(d);
            v[lay.a()] = 2.0 * a;
            for &idx in &sum_scope {
                v[idx] = -p.rs_coeff;
            }
            grad.axpy(inv, &v, 1.0);
            hess[(lay.a(), lay.a())] += 2.0 * inv;
            rank_one(&mut hess, &v, inv * inv);
        }
        // g3 = pf ||F||^2 + pr sum r + pow_const - b
        {
            let inv = 1.0 / (-g[1]);
            let mut v = RVec::zeros(d);
            for idx in 0..2 * lay.n * lay.k {
                v[idx] = 2.0 * p.pf_coeff * x[idx];
                hess[(idx, idx)] += 2.0 * p.pf_coeff * inv;
            }
            for &idx in &sum_scope {
                v[idx] = p.pr_coeff;
            }
            v[lay.b()] = -1.0;
            grad.axpy(inv, &v, 1.0);
            rank_one(&mut hess, &v, inv * inv);
        }
        // g4 = ||F||^2 - P_t
        {
            let inv = 1.0 / (-g[2]);
            let mut v = RVec::zeros(d);
            for idx in 0..2 * lay.n * lay.k {
                v[idx] = 2.0 * x[idx];
                hess[(idx, idx)] += 2.0 * inv;
            }
            grad.axpy(inv, &v, 1.0);
            rank_one(&mut hess, &v, inv * inv);
        }
        // g5_k = r_k - log2(1 + gamma_k)
        for k in 0..lay.k {
            let inv = 1.0 / (-g[3 + k]);
            let (alpha, beta, p0kk) = self.sca.gamma[k];
            let u = 1.0 + self.gamma_at(x, k);
            let scale = 1.0 / (u * LN2);
            let mut v = RVec::zeros(d);
            v[lay.r(k)] = 1.0;
            // d gamma / d p entries
            let mut dgamma = RVec::zeros(d);
            dgamma[lay.p_re(k, k)] = alpha * p0kk.re;
            dgamma[lay.p_re(k, k) + 1] = alpha * p0kk.im;
            for i in 0..lay.k {
                if i != k {
                    dgamma[lay.p_re(k, i)] = -2.0 * beta * x[lay.p_re(k, i)];
                    dgamma[lay.p_re(k, i) + 1] = -2.0 * beta * x[lay.p_re(k, i) + 1];
                }
            }
            v.axpy(-scale, &dgamma, 1.0);
            grad.axpy(inv, &v, 1.0);
            // hess(g5) = -gamma''/(u ln2) + gamma' gamma'^T/(u^2 ln2)
            for i in 0..lay.k {
                if i != k {
                    let idx = lay.p_re(k, i);
                    hess[(idx, idx)] += 2.0 * beta * scale * inv;
                    hess[(idx + 1, idx + 1)] += 2.0 * beta * scale * inv;
                }
            }
            rank_one(&mut hess, &dgamma, inv / (u * u * LN2));
            rank_one(&mut hess, &v, inv * inv);
        }
        (grad, hess)
    }
}

fn rank_one(h: &mut RMat, v: &RVec, w: f64) {
    // h += w v v^T over the nonzero support of v.
    let idxs: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
    for &i in &idxs {
        for &j in &idxs {
            h[(i, j)] += w * v[i] * v[j];
        }
    }
}

/// Solve the barrier path for the block. The anchor must be feasible within
/// 1e-6 scaled tolerances; the returned point is strictly feasible.
pub fn solve_rate_subproblem(prob: &RateSubproblem) -> Result<RateSolution> {
    let n = prob.c_f.nrows();
    let kk = prob.c_f.ncols();
    if prob.h_eff.len() != kk || prob.lam_off.len() != kk || prob.sigma2.len() != kk {
        return Err(Error::InvalidArgument("rate subproblem: inconsistent user counts".into()));
    }
    if !(prob.rho > 0.0) || !(prob.p_t > 0.0) || !(prob.pow_const > 0.0) {
        return Err(Error::InvalidArgument(
            "rate subproblem: rho, P_t and the constant power must be positive".into(),
        ));
    }
    let anchor = prob.anchor;
    if !(anchor.b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rate subproblem anchor has b = {}, expected > 0",
            anchor.b
        )));
    }
    for k in 0..kk {
        let mut i0 = prob.sigma2[k];
        for i in 0..kk {
            if i != k {
                i0 += anchor.p[k][i].norm_sqr();
            }
        }
        if !(i0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rate subproblem anchor has non-positive interference-plus-noise for user {k}"
            )));
        }
    }
    // Anchor feasibility within loose tolerance.
    let sum_r: f64 = anchor.r.iter().sum();
    let f_sq = anchor.f.norm_squared();
    let tol = 1e-6;
    if anchor.a * anchor.a > prob.rs_coeff * sum_r + prob.rs_const + tol * (1.0 + anchor.a * anchor.a)
        || prob.pf_coeff * f_sq + prob.pr_coeff * sum_r + prob.pow_const
            > anchor.b + tol * (1.0 + anchor.b.abs())
        || f_sq > prob.p_t * (1.0 + tol)
    {
        return Err(Error::InvalidArgument("rate subproblem anchor is infeasible".into()));
    }
    for k in 0..kk {
        let rk_max = rate_bits(&anchor.p[k], k, prob.sigma2[k]);
        if anchor.r[k] > rk_max + tol * (1.0 + rk_max.abs()) {
            return Err(Error::InvalidArgument(format!(
                "rate subproblem anchor rate r[{k}] exceeds its SINR bound"
            )));
        }
    }

    let lay = Layout::new(n, kk);
    // Degenerate branch: essentially no signal at the anchor and no rate
    // mass from elsewhere. The barrier problem has an (almost) empty
    // interior, but the optimum is available in closed form: zero the rate
    // side, match the penalty centers, and bind the power constraint from
    // below.
    let bound_mass: f64 = (0..kk)
        .map(|k| (1.0 + sinr(&anchor.p[k], k, prob.sigma2[k])).log2())
        .sum();
    if prob.rs_const <= 1e-12 && bound_mass <= 3e-6 * kk as f64 {
        let mut f = if prob.f_penalty { prob.c_f.clone() } else { anchor.f.clone() };
        let fn2 = f.norm_squared();
        if fn2 > prob.p_t {
            f.scale_mut(((prob.p_t / fn2).sqrt() * (1.0 - 1e-12)).into());
        }
        let p: Vec<CVec> = (0..kk)
            .map(|k| {
                let mut row = CVec::zeros(kk);
                for i in 0..kk {
                    let mut cf = C64::new(0.0, 0.0);
                    for nn in 0..n {
                        cf += prob.h_eff[k][nn] * f[(nn, i)];
                    }
                    row[i] = cf - prob.lam_off[k][i];
                }
                row
            })
            .collect();
        let b = prob.pf_coeff * f.norm_squared() + prob.pow_const;
        let blk = RateBlock { f, p, r: RVec::zeros(kk), a: 0.0, b, eta: 0.0 };
        let objective = block1_objective(&blk, prob);
        return Ok(RateSolution { block: blk, objective, t_final: 1.0, newton_steps: 0, converged: true });
    }

    // A zero anchor a would zero both SCA coefficients and leave b unbounded
    // above in the barrier; nudge it to keep the path well posed.
    let a_eff = anchor.a.abs().max(1e-9 * (1.0 + sum_r.abs()).sqrt());
    let sca = Sca {
        q_a: 2.0 * a_eff / anchor.b,
        q_b: (a_eff / anchor.b) * (a_eff / anchor.b),
        gamma: (0..kk)
            .map(|k| {
                let mut i0 = prob.sigma2[k];
                for i in 0..kk {
                    if i != k {
                        i0 += anchor.p[k][i].norm_sqr();
                    }
                }
                (2.0 / i0, anchor.p[k][k].norm_sqr() / (i0 * i0), anchor.p[k][k])
            })
            .collect(),
    };
    let solver = Solver {
        prob,
        lay,
        sca,
        s_f: if prob.f_penalty { prob.f_weight / (2.0 * prob.rho) } else { 0.0 },
        s_p: 1.0 / (2.0 * prob.rho),
    };
    let lay = &solver.lay;

    // Strictly feasible start derived from the anchor. Coordinates that are
    // already strictly inside their constraints are kept untouched so that a
    // re-solve from an optimum stays put.
    let mut x = lay.pack(anchor);
    {
        let f_sq = anchor.f.norm_squared();
        if f_sq >= prob.p_t * (1.0 - 1e-9) {
            let shrink = (prob.p_t * (1.0 - 1e-6) / f_sq).sqrt();
            for idx in 0..2 * n * kk {
                x[idx] *= shrink;
            }
        }
        let shifted_rate = |bound: f64| {
            if bound > 1e-7 {
                bound - (1e-6 * (1.0 + bound.abs())).min(0.5 * bound)
            } else {
                bound - 1e-6
            }
        };
        let mut sum_r0 = 0.0;
        for k in 0..kk {
            let bound = (1.0 + solver.gamma_at(&x, k)).log2();
            if x[lay.r(k)] >= bound - 1e-12 * (1.0 + bound.abs()) {
                x[lay.r(k)] = shifted_rate(bound);
            }
            sum_r0 += x[lay.r(k)];
        }
        // If keeping the anchor rates starves the a-constraint, restart the
        // rates near their bounds (optimal for the block anyway).
        let mut cap = prob.rs_coeff * sum_r0 + prob.rs_const;
        if cap <= 0.0 {
            sum_r0 = 0.0;
            for k in 0..kk {
                let bound = (1.0 + solver.gamma_at(&x, k)).log2();
                x[lay.r(k)] = shifted_rate(bound);
                sum_r0 += x[lay.r(k)];
            }
            cap = prob.rs_coeff * sum_r0 + prob.rs_const;
        }
        let mut a0 = x[lay.a()].abs();
        if a0 * a0 >= cap * (1.0 - 1e-12) {
            a0 = if cap > 0.0 { cap.sqrt() * (1.0 - 1e-6) } else { 0.0 };
        }
        x[lay.a()] = a0;
        let f_sq0: f64 = (0..2 * n * kk).map(|i| x[i] * x[i]).sum();
        let need = prob.pf_coeff * f_sq0 + prob.pr_coeff * sum_r0 + prob.pow_const;
        if x[lay.b()] <= need + 1e-12 * (1.0 + need.abs()) {
            x[lay.b()] = need + 1e-6 * (1.0 + need.abs());
        }
    }
    if solver.phi(&x, 1.0).is_none() {
        return Err(Error::InvalidArgument(
            "rate subproblem could not construct a strictly feasible start from the anchor".into(),
        ));
    }

    let m_cons = (3 + kk) as f64;
    let mu = 30.0;
    let mut t = prob.t0_hint.unwrap_or(1.0).max(1e-6);
    let mut steps = 0usize;
    let mut converged = false;
    'stages: loop {
        // Center at the current t. The Newton decrement is affine invariant,
        // so the stop rule must be an absolute one; anything scaled by the
        // barrier value lets a stage at a bad anchor with huge penalty terms
        // exit immediately and poisons the gap certificate below.
        let mut centered = false;
        let mut dead = false;
        for _ in 0..60 {
            if steps >= prob.max_newton {
                break 'stages;
            }
            let (grad, mut hess) = solver.derivatives(&x, t);
            let mut ridge = 0.0;
            let delta = loop {
                let chol = hess.clone().cholesky();
                match chol {
                    Some(c) => break c.solve(&(-&grad)),
                    None => {
                        let mean_diag = hess.diagonal().mean().abs().max(1e-12);
                        let bump = if ridge == 0.0 { 1e-10 * mean_diag } else { ridge * 100.0 };
                        for i in 0..lay.dim {
                            hess[(i, i)] += bump - ridge;
                        }
                        ridge = bump;
                        if ridge > mean_diag {
                            break 'stages;
                        }
                    }
                }
            };
            steps += 1;
            let decrement = -grad.dot(&delta);
            let phi0 = solver.phi(&x, t).expect("iterate feasible");
            if decrement <= 1e-9_f64.max(32.0 * f64::EPSILON * (1.0 + phi0.abs())) {
                centered = true;
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &x + alpha * &delta;
                if let Some(val) = solver.phi(&cand, t) {
                    if val <= phi0 - 1e-4 * alpha * decrement {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                // Line search stalled at the resolution of phi. Inside the
                // quadratic region the unrealized gap is about decrement/2,
                // which costs at most decrement/(2t) in objective units, so
                // accept the point as centered when that is within the gap
                // tolerance being certified anyway.
                let scale = 1.0 + solver.f0(&x).abs();
                centered = decrement <= 0.3
                    && decrement <= 2.0 * t * prob.gap_tol * scale;
                dead = true;
                break;
            }
        }
        // The m/t duality-gap certificate only holds at a centered point.
        if centered {
            let scale = 1.0 + solver.f0(&x).abs();
            if m_cons / t <= prob.gap_tol * scale {
                converged = true;
                break;
            }
        }
        if dead || steps >= prob.max_newton {
            break;
        }
        if centered {
            t *= mu;
        }
    }

    let mut block = lay.unpack(&x);
    block.eta = block.a * block.a / block.b;
    let objective = block1_objective(&block, prob);
    let anchor_obj = block1_objective(anchor, prob);
    if !converged && objective + 1e-12 < anchor_obj {
        return Err(Error::Numerical(format!(
            "rate subproblem stalled after {steps} Newton steps (objective {objective:.6e} \
             below anchor {anchor_obj:.6e}, barrier t {t:.3e})"
        )));
    }
    Ok(RateSolution { block, objective, t_final: t, newton_steps: steps, converged })
}
