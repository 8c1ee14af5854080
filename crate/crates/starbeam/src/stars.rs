//! STARS coefficient domain: energy-conservation and coupled phase-shift
//! constraint sets, feasibility checks, and Euclidean projection onto the
//! coupled set.

use crate::config::StarsMode;
use crate::numopt::{golden_section, ScalarProblem};
use crate::{C64, CVec};
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, TAU};

/// Transmission/reflection coefficients of an M-element surface. Entry m of
/// `theta_t` is `beta_t[m] * exp(j phi_t[m])` and likewise for `theta_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarsCoefficients {
    pub theta_t: CVec,
    pub theta_r: CVec,
    pub mode: StarsMode,
}

/// Feasibility check result with the largest per-element violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_violation: f64,
}

impl StarsCoefficients {
    pub fn m(&self) -> usize {
        self.theta_t.len()
    }

    pub fn theta(&self, transmit: bool) -> &CVec {
        if transmit {
            &self.theta_t
        } else {
            &self.theta_r
        }
    }

    /// Uniform random feasible coefficients: amplitudes from an angle
    /// uniform on [0, pi/2], phases uniform on [0, 2 pi); coupled mode draws
    /// the phase difference from {pi/2, 3 pi/2}.
    pub fn random<R: Rng>(mode: StarsMode, m: usize, rng: &mut R) -> Self {
        let mut theta_t = CVec::zeros(m);
        let mut theta_r = CVec::zeros(m);
        for i in 0..m {
            let amp_angle = rng.random_range(0.0..=FRAC_PI_2);
            let phi_t = rng.random_range(0.0..TAU);
            let phi_r = match mode {
                StarsMode::Independent => rng.random_range(0.0..TAU),
                StarsMode::Coupled => {
                    let delta = if rng.random_range(0..2u32) == 0 {
                        FRAC_PI_2
                    } else {
                        3.0 * FRAC_PI_2
                    };
                    (phi_t - delta).rem_euclid(TAU)
                }
            };
            theta_t[i] = C64::from_polar(amp_angle.sin(), phi_t);
            theta_r[i] = C64::from_polar(amp_angle.cos(), phi_r);
        }
        Self { theta_t, theta_r, mode }
    }
}

/// Check the per-element invariants: `|theta_t|^2 + |theta_r|^2 = 1`, and in
/// coupled mode `|cos(phi_t - phi_r)| = 0`. Elements with an amplitude below
/// 1e-12 have no meaningful phase, so the coupling term is skipped there.
pub fn check_feasible(s: &StarsCoefficients, tol: f64) -> FeasibilityReport {
    let mut max_violation = 0.0f64;
    for m in 0..s.m() {
        let t = s.theta_t[m];
        let r = s.theta_r[m];
        let energy = (t.norm_sqr() + r.norm_sqr() - 1.0).abs();
        max_violation = max_violation.max(energy);
        if s.mode == StarsMode::Coupled && t.norm() > 1e-12 && r.norm() > 1e-12 {
            let coupling = (t.arg() - r.arg()).cos().abs();
            max_violation = max_violation.max(coupling);
        }
    }
    FeasibilityReport { feasible: max_violation <= tol, max_violation }
}

/// Euclidean projection onto the coupled-feasible set, element by element.
///
/// Alternating minimization per element: with amplitudes fixed, the best
/// phases align `beta_t e^{j phi_t}` and `beta_r e^{j(phi_t - delta)}` with
/// the targets for each branch `delta in {pi/2, 3pi/2}` (ties toward pi/2);
/// with phases fixed, the amplitude pair `(sin x, cos x)` comes from a
/// scalar search on [0, pi/2]. Each step is exact for its block, so the
/// distance is monotonically non-increasing and the alternation is run from
/// both branch starts. Zero targets map to the deterministic convention
/// `beta = 1/sqrt(2)`, `phi_t = 0`, `phi_r = 3 pi/2`.
pub fn project_coupled(target_t: &CVec, target_r: &CVec) -> StarsCoefficients {
    assert_eq!(target_t.len(), target_r.len());
    let m = target_t.len();
    let mut theta_t = CVec::zeros(m);
    let mut theta_r = CVec::zeros(m);
    for i in 0..m {
        let (t, r) = project_coupled_element(target_t[i], target_r[i]);
        theta_t[i] = t;
        theta_r[i] = r;
    }
    StarsCoefficients { theta_t, theta_r, mode: StarsMode::Coupled }
}

const BRANCHES: [f64; 2] = [FRAC_PI_2, 3.0 * FRAC_PI_2];

fn project_coupled_element(zt: C64, zr: C64) -> (C64, C64) {
    if zt.norm() < 1e-300 && zr.norm() < 1e-300 {
        let b = FRAC_PI_2.sin() / 2f64.sqrt();
        return (C64::new(b, 0.0), C64::from_polar(b, -FRAC_PI_2));
    }
    let mut best: Option<(f64, C64, C64)> = None;
    for &delta in &BRANCHES {
        let mut amp_angle = std::f64::consts::FRAC_PI_4;
        let mut phi_t;
        for _ in 0..8 {
            phi_t = best_phase(amp_angle, zt, zr, delta);
            let new_angle = best_amplitude(phi_t, phi_t - delta, zt, zr);
            if (new_angle - amp_angle).abs() < 1e-12 {
                amp_angle = new_angle;
                break;
            }
            amp_angle = new_angle;
        }
        phi_t = best_phase(amp_angle, zt, zr, delta);
        let cand_t = C64::from_polar(amp_angle.sin(), phi_t);
        let cand_r = C64::from_polar(amp_angle.cos(), phi_t - delta);
        let dist = (cand_t - zt).norm_sqr() + (cand_r - zr).norm_sqr();
        // Strict inequality keeps the pi/2 branch on ties.
        if best.as_ref().map_or(true, |(d, _, _)| dist < *d) {
            best = Some((dist, cand_t, cand_r));
        }
    }
    let (_, t, r) = best.unwrap();
    (t, r)
}

/// With amplitudes `(sin x, cos x)` and branch `delta` fixed, the distance
/// is minimized by aligning the combined phasor with the targets.
fn best_phase(amp_angle: f64, zt: C64, zr: C64, delta: f64) -> f64 {
    let combined = amp_angle.sin() * zt + amp_angle.cos() * zr * C64::from_polar(1.0, delta);
    if combined.norm() < 1e-300 {
        0.0
    } else {
        combined.arg()
    }
}

/// With phases fixed, minimize over the amplitude angle on [0, pi/2].
fn best_amplitude(phi_t: f64, phi_r: f64, zt: C64, zr: C64) -> f64 {
    let ct = (zt.conj() * C64::from_polar(1.0, phi_t)).re;
    let cr = (zr.conj() * C64::from_polar(1.0, phi_r)).re;
    let p = ScalarProblem {
        objective: move |x: f64| -(x.sin() * ct + x.cos() * cr),
        lo: 0.0,
        hi: FRAC_PI_2,
    };
    golden_section(&p, 1e-9).expect("valid interval").0
}
