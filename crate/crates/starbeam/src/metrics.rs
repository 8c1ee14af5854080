//! Spectral efficiency, energy efficiency, and power accounting.
//!
//! EE is reported in (bit/s/Hz)/W: the SE divided by the sum of transmit
//! power, the rate-dependent decoding term `xi * SE`, and the static circuit
//! power of the selected architecture. All logs are base 2.

use crate::config::{PowerModel, ScenarioConfig, Side};
use crate::numopt::rate_bits;
use crate::stars::StarsCoefficients;
use crate::wideband::TtdBeamformer;
use crate::{CMat, CVec, StarsMode};

/// Consumed power split by origin. `rate_w` is the decoding cost `xi * SE`,
/// `static_w` the architecture-dependent circuit total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub transmit_w: f64,
    pub rate_w: f64,
    pub static_w: f64,
}

impl PowerBreakdown {
    pub fn total_w(&self) -> f64 {
        self.transmit_w + self.rate_w + self.static_w
    }
}

/// Link-level outcome of one beamforming solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Per-user rates, bit/s/Hz.
    pub rates: Vec<f64>,
    pub se: f64,
    /// (bit/s/Hz)/W.
    pub ee: f64,
    pub power: PowerBreakdown,
}

fn ceil_bits(x: f64) -> f64 {
    x.ceil()
}

/// Static power of the reconfigurable surface: PIN-diode switching cost per
/// element plus the shared circuit/oscillator overhead. Independent surfaces
/// quantize one amplitude and two phases per element; coupled surfaces share
/// the phase codebook and add one selection diode.
pub fn stars_power(mode: StarsMode, m: usize, pm: &PowerModel) -> f64 {
    let l_beta = (pm.l_beta as f64).log2();
    let l_phi = (pm.l_phi as f64).log2();
    let bits = match mode {
        StarsMode::Independent => ceil_bits(l_beta + 2.0 * l_phi),
        StarsMode::Coupled => ceil_bits(l_beta + l_phi + 1.0),
    };
    0.5 * bits * m as f64 * pm.p_pin_w + pm.p_circ_w
}

/// Static power of a conventional reflect-only surface: phase quantization
/// only, amplitudes are hard-wired.
pub fn ris_power(m: usize, pm: &PowerModel) -> f64 {
    let bits = ceil_bits((pm.l_phi as f64).log2());
    0.5 * bits * m as f64 * pm.p_pin_w + pm.p_circ_w
}

/// Static circuit power of the narrowband hybrid architecture.
pub fn p_c_narrow(cfg: &ScenarioConfig) -> f64 {
    let pm = &cfg.power;
    pm.p_bs_w
        + pm.p_bb_w
        + cfg.n_rf as f64 * pm.p_rf_w
        + (cfg.n_rf * cfg.n) as f64 * pm.p_ps_w
        + stars_power(cfg.mode, cfg.m(), pm)
        + cfg.k as f64 * pm.p_ue_w
}

/// Wideband variant: the TTD network adds one delay element per
/// (RF chain, delay line) pair on top of the narrowband total.
pub fn p_c_wide(cfg: &ScenarioConfig) -> f64 {
    p_c_narrow(cfg) + (cfg.n_rf * cfg.n_ttd) as f64 * cfg.power.p_ttd_w
}

/// Fully digital BS: one RF chain per antenna and no phase-shifter network.
pub fn p_c_full_digital(cfg: &ScenarioConfig) -> f64 {
    let pm = &cfg.power;
    pm.p_bs_w
        + pm.p_bb_w
        + cfg.n as f64 * pm.p_rf_w
        + stars_power(cfg.mode, cfg.m(), pm)
        + cfg.k as f64 * pm.p_ue_w
}

/// Hybrid BS in front of a conventional reflect/transmit-split surface.
pub fn p_c_conventional_ris(cfg: &ScenarioConfig) -> f64 {
    p_c_narrow(cfg) - stars_power(cfg.mode, cfg.m(), &cfg.power) + ris_power(cfg.m(), &cfg.power)
}

/// Wideband hybrid BS without the delay network.
pub fn p_c_conventional_hybrid_wide(cfg: &ScenarioConfig) -> f64 {
    p_c_narrow(cfg)
}

/// Effective receive row of one user: entry `i` is `theta^T H_k F e_i`, the
/// response of this user to stream `i`. Plain transpose, no conjugation: the
/// surface coefficients multiply the cascade as phase factors.
pub fn receive_row(theta: &CVec, h_k: &CMat, f: &CMat) -> CVec {
    (h_k * f).tr_mul(theta)
}

fn theta_for<'a>(s: &'a StarsCoefficients, side: Side) -> &'a CVec {
    s.theta(matches!(side, Side::Transmit))
}

/// Per-user rates and their sum for a narrowband hybrid solution.
pub fn se_narrow(
    s: &StarsCoefficients,
    sides: &[Side],
    h: &[CMat],
    f_rf: &CMat,
    f_bb: &CMat,
    sigma2: &[f64],
) -> (Vec<f64>, f64) {
    let f = f_rf * f_bb;
    let rates: Vec<f64> = h
        .iter()
        .enumerate()
        .map(|(k, h_k)| {
            let p = receive_row(theta_for(s, sides[k]), h_k, &f);
            rate_bits(&p, k, sigma2[k])
        })
        .collect();
    let se = rates.iter().sum();
    (rates, se)
}

/// EE of a narrowband hybrid solution given its SE.
pub fn ee_narrow(se: f64, f_rf: &CMat, f_bb: &CMat, cfg: &ScenarioConfig) -> (f64, PowerBreakdown) {
    let transmit = (f_rf * f_bb).norm_squared();
    ee_from(se, transmit, p_c_narrow(cfg), cfg.power.xi)
}

/// Assemble EE and the power breakdown from the three power contributions.
pub fn ee_from(se: f64, transmit_w: f64, static_w: f64, xi: f64) -> (f64, PowerBreakdown) {
    let power = PowerBreakdown { transmit_w, rate_w: xi * se, static_w };
    (se / power.total_w(), power)
}

/// Per-user wideband rates (already scaled by the OFDM prefactor
/// `1/(M_c + L_CP)`) and their sum.
pub fn se_wide(
    s: &StarsCoefficients,
    sides: &[Side],
    h: &[Vec<CMat>],
    ttd: &TtdBeamformer,
    cfg: &ScenarioConfig,
) -> (Vec<f64>, f64) {
    let freqs = cfg.subcarrier_hz();
    let mu = 1.0 / (cfg.subcarriers + cfg.cp_len) as f64;
    let sigma2 = cfg.sigma2_wide();
    let mut rates = vec![0.0; cfg.k];
    for (m, h_m) in h.iter().enumerate() {
        let f = ttd.effective(m, freqs[m]);
        for (k, h_mk) in h_m.iter().enumerate() {
            let p = receive_row(theta_for(s, sides[k]), h_mk, &f);
            rates[k] += mu * rate_bits(&p, k, sigma2);
        }
    }
    let se = rates.iter().sum();
    (rates, se)
}

/// Average transmit power over the subcarriers.
pub fn transmit_power_wide(ttd: &TtdBeamformer, cfg: &ScenarioConfig) -> f64 {
    let freqs = cfg.subcarrier_hz();
    (0..cfg.subcarriers).map(|m| ttd.effective(m, freqs[m]).norm_squared()).sum::<f64>()
        / cfg.subcarriers as f64
}

/// Full metric set for a wideband TTD solution.
pub fn se_ee_wide(
    s: &StarsCoefficients,
    sides: &[Side],
    h: &[Vec<CMat>],
    ttd: &TtdBeamformer,
    cfg: &ScenarioConfig,
) -> Metrics {
    let (rates, se) = se_wide(s, sides, h, ttd, cfg);
    let (ee, power) = ee_from(se, transmit_power_wide(ttd, cfg), p_c_wide(cfg), cfg.power.xi);
    Metrics { rates, se, ee, power }
}
