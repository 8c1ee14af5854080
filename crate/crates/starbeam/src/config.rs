//! Scenario description and the flat key-value config loader.
//!
//! A scenario is one downlink: base-station array, surface, users, band and
//! power model, plus the optimizer knobs. Configs are plain text files with
//! `[section]` headers and `key = value` lines; an empty file yields the
//! narrowband defaults used throughout the reference evaluation (128-antenna
//! BS, 4 RF chains, 6x6 surface, 4 users, 0.1 THz / 100 MHz).

use crate::{Error, Result};
use std::path::{Path, PathBuf};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier arrangement of the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Single carrier, frequency-flat inside `bandwidth_hz`.
    Narrow,
    /// OFDM with `subcarriers` carriers across `bandwidth_hz` and TTD-based
    /// hybrid beamforming at the BS.
    Wide,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Narrow => "narrow",
            Band::Wide => "wide",
        }
    }
}

/// Hardware model of the surface element phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarsMode {
    /// Transmission and reflection phases are independent per element.
    Independent,
    /// Lossless coupled elements: the transmission/reflection phase
    /// difference of every element is +-pi/2.
    Coupled,
}

impl StarsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StarsMode::Independent => "independent",
            StarsMode::Coupled => "coupled",
        }
    }
}

/// Which side of the surface a user sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Reflect,
}

/// Transmit pulse used for the delay-tap gains of the wideband channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pulse {
    Sinc,
    /// Raised cosine in time with the given roll-off in [0, 1].
    RaisedCosine(f64),
}

/// Static power draw and quantization constants of the power model.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    pub p_bs_w: f64,
    pub p_bb_w: f64,
    pub p_rf_w: f64,
    pub p_ps_w: f64,
    pub p_ttd_w: f64,
    pub p_ue_w: f64,
    pub p_pin_w: f64,
    pub p_circ_w: f64,
    /// Power-amplifier inefficiency multiplying the spectral efficiency in
    /// the rate-dependent transmit term.
    pub xi: f64,
    /// Amplitude quantization levels of a surface element.
    pub l_beta: u32,
    /// Phase quantization levels of a surface element.
    pub l_phi: u32,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            p_bs_w: 3.0,
            p_bb_w: 0.3,
            p_rf_w: 0.2,
            p_ps_w: 0.03,
            p_ttd_w: 0.1,
            p_ue_w: 0.1,
            p_pin_w: 0.33e-3,
            p_circ_w: 10.0,
            xi: 0.1,
            l_beta: 100,
            l_phi: 180,
        }
    }
}

/// Optimizer knobs. Defaults follow the reference evaluation; every cap is a
/// hard bound, every tolerance is relative unless stated.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoParams {
    /// Initial penalty parameter (the penalty weight is 1/(2 rho), so large
    /// rho means a weak penalty).
    pub rho0: f64,
    /// Multiplicative penalty shrink applied when the violation stalls.
    pub penalty_shrink: f64,
    /// Penalty floor; rho never goes below this.
    pub rho_floor: f64,
    /// Outer termination threshold on the constraint violation.
    pub h_threshold: f64,
    /// Initial dual-update/penalty-update switching level.
    pub eps0: f64,
    pub max_outer: usize,
    /// Inner loop stops when the fractional augmented-Lagrangian change per
    /// sweep falls below this.
    pub inner_tol: f64,
    pub max_inner_sweeps: usize,
    /// Element-wise sweep loops (surface, analog beamformer) stop below this
    /// fractional objective reduction.
    pub elementwise_tol: f64,
    pub elementwise_max_sweeps: usize,
    /// Duality-gap proxy at which the rate-subproblem barrier stops.
    pub barrier_gap: f64,
    /// Total Newton-step budget per rate-subproblem solve.
    pub barrier_max_newton: usize,
    pub bfgs_tol: f64,
    pub bfgs_max_iter: usize,
    pub golden_tol: f64,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self {
            rho0: 1e3,
            penalty_shrink: 0.6,
            rho_floor: 1e-8,
            h_threshold: 1e-3,
            eps0: 1.0,
            max_outer: 30,
            inner_tol: 1e-4,
            max_inner_sweeps: 50,
            elementwise_tol: 1e-6,
            elementwise_max_sweeps: 50,
            barrier_gap: 1e-7,
            barrier_max_newton: 200,
            bfgs_tol: 1e-6,
            bfgs_max_iter: 100,
            golden_tol: 1e-6,
        }
    }
}

/// Full description of one simulated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub band: Band,
    pub mode: StarsMode,
    /// Tradeoff weight: 0 maximizes spectral efficiency, 1 energy efficiency.
    pub w: f64,

    /// BS antennas (ULA).
    pub n: usize,
    /// BS RF chains.
    pub n_rf: usize,
    /// Surface elements per row / column (UPA, m = m_h * m_v).
    pub m_h: usize,
    pub m_v: usize,

    /// Users in total; the first `k_t` sit on the transmission side.
    pub k: usize,
    pub k_t: usize,

    pub f_c_hz: f64,
    pub bandwidth_hz: f64,
    /// OFDM subcarriers (wideband only).
    pub subcarriers: usize,
    /// TTD elements per RF chain (wideband only); must divide `n`.
    pub n_ttd: usize,
    /// Cyclic prefix length in taps (wideband only).
    pub cp_len: usize,

    /// Transmit power budget points, dBm.
    pub p_t_dbm: Vec<f64>,
    pub noise_dbm_per_hz: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,

    pub bs_stars_m: f64,
    pub user_radius_m: f64,
    /// Paths BS -> surface and surface -> each user.
    pub l_paths: usize,
    pub l_k_paths: usize,

    /// Constant molecular absorption coefficient (1/m); overridden per
    /// frequency when `absorption_csv` is set.
    pub k_abs_per_m: f64,
    pub absorption_csv: Option<PathBuf>,
    pub pulse: Pulse,
    /// Maximum excess path length of non-shortest paths (meters).
    pub excess_path_m: f64,
    /// Maximum extra attenuation of non-shortest paths (dB).
    pub nlos_extra_loss_db: f64,

    pub power: PowerModel,
    pub algo: AlgoParams,

    pub seeds: Vec<u64>,
    /// Surface sizes visited by the element sweep (values of m; each must
    /// have an integer square root, the sweep uses sqrt(m) x sqrt(m)).
    pub m_sweep: Vec<usize>,
}

impl ScenarioConfig {
    /// Narrowband reference scenario: 0.1 THz, 100 MHz, 128-antenna BS with
    /// 4 RF chains, 6x6 surface, 4 users split half/half across the sides.
    pub fn narrowband_default() -> Self {
        Self {
            band: Band::Narrow,
            mode: StarsMode::Independent,
            w: 0.0,
            n: 128,
            n_rf: 4,
            m_h: 6,
            m_v: 6,
            k: 4,
            k_t: 2,
            f_c_hz: 1e11,
            bandwidth_hz: 1e8,
            subcarriers: 1,
            n_ttd: 1,
            cp_len: 0,
            p_t_dbm: vec![20.0],
            noise_dbm_per_hz: -174.0,
            g_t_dbi: 25.0,
            g_r_dbi: 20.0,
            bs_stars_m: 10.0,
            user_radius_m: 3.0,
            l_paths: 4,
            l_k_paths: 4,
            k_abs_per_m: 0.0,
            absorption_csv: None,
            pulse: Pulse::RaisedCosine(0.3),
            excess_path_m: 0.1,
            nlos_extra_loss_db: 10.0,
            power: PowerModel::default(),
            algo: AlgoParams::default(),
            seeds: (1..=20).collect(),
            m_sweep: vec![16, 36, 64],
        }
    }

    /// Wideband reference scenario: 10 GHz of bandwidth, 10 subcarriers,
    /// 8 TTDs per RF chain.
    pub fn wideband_default() -> Self {
        Self {
            band: Band::Wide,
            bandwidth_hz: 1e10,
            subcarriers: 10,
            n_ttd: 8,
            cp_len: 4,
            ..Self::narrowband_default()
        }
    }

    /// Small narrowband profile sized for tests and quick runs. The initial
    /// penalty factor is well below the reference default: rho trades the
    /// objective against squared residuals measured on this profile's unit
    /// scale, so a proportionally smaller rho gives the same conditioning
    /// while saving most of the outer-iteration budget.
    pub fn desk_narrow() -> Self {
        Self {
            n: 32,
            m_h: 4,
            m_v: 4,
            algo: AlgoParams { rho0: 50.0, ..AlgoParams::default() },
            ..Self::narrowband_default()
        }
    }

    /// Small wideband profile sized for tests and quick runs.
    pub fn desk_wide() -> Self {
        Self {
            n: 32,
            m_h: 4,
            m_v: 4,
            k: 2,
            k_t: 1,
            subcarriers: 4,
            n_ttd: 8,
            cp_len: 2,
            algo: AlgoParams { rho0: 50.0, ..AlgoParams::default() },
            ..Self::wideband_default()
        }
    }

    /// Total surface elements.
    pub fn m(&self) -> usize {
        self.m_h * self.m_v
    }

    /// Antenna spacing, fixed at half the carrier wavelength.
    pub fn spacing_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.f_c_hz)
    }

    pub fn noise_w_per_hz(&self) -> f64 {
        10f64.powf((self.noise_dbm_per_hz - 30.0) / 10.0)
    }

    /// Noise power per user in the narrowband model (full bandwidth).
    pub fn sigma2_narrow(&self) -> f64 {
        self.noise_w_per_hz() * self.bandwidth_hz
    }

    /// Noise power per user and subcarrier in the wideband model.
    pub fn sigma2_wide(&self) -> f64 {
        self.noise_w_per_hz() * self.bandwidth_hz / self.subcarriers as f64
    }

    pub fn g_t_linear(&self) -> f64 {
        10f64.powf(self.g_t_dbi / 10.0)
    }

    pub fn g_r_linear(&self) -> f64 {
        10f64.powf(self.g_r_dbi / 10.0)
    }

    /// Subcarrier center frequencies; the narrowband scenario has one entry
    /// equal to the carrier.
    pub fn subcarrier_hz(&self) -> Vec<f64> {
        let m_c = self.subcarriers as f64;
        (1..=self.subcarriers)
            .map(|m| self.f_c_hz + self.bandwidth_hz * (2 * m) as f64 / (2.0 * m_c)
                - self.bandwidth_hz * (1.0 + m_c) / (2.0 * m_c))
            .collect()
    }

    /// Rate prefactor of the OFDM frame (data carriers over carriers + CP).
    pub fn mu(&self) -> f64 {
        self.subcarriers as f64 / (self.subcarriers + self.cp_len) as f64
    }

    /// Per-user side assignment: the first `k_t` users transmit-side.
    pub fn user_sides(&self) -> Vec<Side> {
        (0..self.k)
            .map(|k| if k < self.k_t { Side::Transmit } else { Side::Reflect })
            .collect()
    }

    pub fn p_t_w(dbm: f64) -> f64 {
        10f64.powf((dbm - 30.0) / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        fn ensure(ok: bool, field: &str, rule: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("field `{field}` violates: {rule}")))
            }
        }
        ensure(self.n >= 1, "arrays.n", "must be >= 1")?;
        ensure(self.n_rf >= 1 && self.n_rf <= self.n, "arrays.n_rf", "must satisfy 1 <= n_rf <= n")?;
        ensure(self.m_h >= 1 && self.m_v >= 1, "arrays.m_h/m_v", "must be >= 1")?;
        ensure(self.k >= 1, "users.k", "must be >= 1")?;
        ensure(self.k_t <= self.k, "users.k_t", "must satisfy k_t <= k")?;
        ensure(self.f_c_hz > 0.0, "band.f_c_hz", "must be > 0")?;
        ensure(self.bandwidth_hz > 0.0, "band.bandwidth_hz", "must be > 0")?;
        ensure(
            self.bandwidth_hz < 2.0 * self.f_c_hz,
            "band.bandwidth_hz",
            "must be < 2 * f_c_hz so all subcarrier frequencies stay positive",
        )?;
        if self.band == Band::Wide {
            ensure(self.subcarriers >= 1, "band.subcarriers", "must be >= 1")?;
            ensure(self.n_ttd >= 1, "band.n_ttd", "must be >= 1")?;
            ensure(
                self.n % self.n_ttd == 0,
                "band.n_ttd",
                "must divide arrays.n (each TTD feeds an equal antenna block)",
            )?;
        }
        ensure(!self.p_t_dbm.is_empty(), "link.p_t_dbm", "must list at least one point")?;
        ensure(self.bs_stars_m > 0.0, "link.bs_stars_m", "must be > 0")?;
        ensure(self.user_radius_m > 0.0, "link.user_radius_m", "must be > 0")?;
        ensure(self.l_paths >= 1, "link.l_paths", "must be >= 1")?;
        ensure(self.l_k_paths >= 1, "link.l_k_paths", "must be >= 1")?;
        ensure(self.k_abs_per_m >= 0.0, "link.k_abs_per_m", "must be >= 0")?;
        if let Pulse::RaisedCosine(b) = self.pulse {
            ensure((0.0..=1.0).contains(&b), "link.pulse_rolloff", "must lie in [0, 1]")?;
        }
        ensure(self.excess_path_m >= 0.0, "link.excess_path_m", "must be >= 0")?;
        ensure(self.nlos_extra_loss_db >= 0.0, "link.nlos_extra_loss_db", "must be >= 0")?;
        ensure(self.w >= 0.0, "scenario.w", "must be >= 0")?;
        ensure(self.power.l_beta >= 2, "power.l_beta", "must be >= 2")?;
        ensure(self.power.l_phi >= 2, "power.l_phi", "must be >= 2")?;
        ensure(self.power.xi >= 0.0, "power.xi", "must be >= 0")?;
        ensure(self.algo.rho0 > 0.0, "algorithm.rho0", "must be > 0")?;
        ensure(
            self.algo.penalty_shrink > 0.0 && self.algo.penalty_shrink < 1.0,
            "algorithm.c",
            "must lie in (0, 1)",
        )?;
        ensure(self.algo.h_threshold > 0.0, "algorithm.h_threshold", "must be > 0")?;
        ensure(!self.seeds.is_empty(), "sweep.seeds", "must list at least one seed")?;
        for &m in &self.m_sweep {
            let r = (m as f64).sqrt().round() as usize;
            ensure(r * r == m, "sweep.m_list", "every entry must be a perfect square")?;
        }
        Ok(())
    }
}

/// Read and validate a config file. An empty file yields
/// [`ScenarioConfig::narrowband_default`].
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parse config text. Two-pass: `scenario.band` and `scenario.profile`
/// select the defaults, every other key overrides one field.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let entries = lex(text)?;
    let mut band: Option<&str> = None;
    let mut profile: Option<&str> = None;
    for (key, value, lineno) in &entries {
        match key.as_str() {
            "scenario.band" => band = Some(value),
            "scenario.profile" => profile = Some(value),
            _ => {}
        }
        let _ = lineno;
    }
    let mut cfg = match (profile, band) {
        (Some("desk"), Some("wide")) => ScenarioConfig::desk_wide(),
        (Some("desk"), _) => ScenarioConfig::desk_narrow(),
        (Some("paper") | None, Some("wide")) => ScenarioConfig::wideband_default(),
        (Some("paper") | None, _) => ScenarioConfig::narrowband_default(),
        (Some(other), _) => {
            return Err(Error::Config(format!(
                "field `scenario.profile` violates: must be `paper` or `desk`, got `{other}`"
            )))
        }
    };
    for (key, value, lineno) in &entries {
        apply_key(&mut cfg, key, value)
            .map_err(|e| Error::Config(format!("line {lineno}: {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn lex(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| {
                Error::Config(format!("line {lineno}: unterminated section header `{line}`"))
            })?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {lineno}: expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(Error::Config(format!("line {lineno}: empty key")));
        }
        let full = if section.is_empty() { key } else { format!("{section}.{key}") };
        out.push((full, value.trim().to_string(), lineno));
    }
    Ok(out)
}

fn apply_key(cfg: &mut ScenarioConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn f64_of(key: &str, v: &str) -> std::result::Result<f64, String> {
        v.parse::<f64>().map_err(|_| format!("field `{key}`: `{v}` is not a number"))
    }
    fn usize_of(key: &str, v: &str) -> std::result::Result<usize, String> {
        v.parse::<usize>().map_err(|_| format!("field `{key}`: `{v}` is not a non-negative integer"))
    }
    fn f64_list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("field `{key}`: `{s}` is not a number")))
            .collect()
    }
    match key {
        "scenario.band" => {
            cfg.band = match value {
                "narrow" => Band::Narrow,
                "wide" => Band::Wide,
                other => return Err(format!("field `scenario.band`: must be `narrow` or `wide`, got `{other}`")),
            }
        }
        "scenario.profile" => {} // consumed by the first pass
        "scenario.mode" => {
            cfg.mode = match value {
                "independent" => StarsMode::Independent,
                "coupled" => StarsMode::Coupled,
                other => {
                    return Err(format!(
                        "field `scenario.mode`: must be `independent` or `coupled`, got `{other}`"
                    ))
                }
            }
        }
        "scenario.w" => cfg.w = f64_of(key, value)?,
        "arrays.n" => cfg.n = usize_of(key, value)?,
        "arrays.n_rf" => cfg.n_rf = usize_of(key, value)?,
        "arrays.m_h" => cfg.m_h = usize_of(key, value)?,
        "arrays.m_v" => cfg.m_v = usize_of(key, value)?,
        "users.k" => cfg.k = usize_of(key, value)?,
        "users.k_t" => cfg.k_t = usize_of(key, value)?,
        "band.f_c_hz" => cfg.f_c_hz = f64_of(key, value)?,
        "band.bandwidth_hz" => cfg.bandwidth_hz = f64_of(key, value)?,
        "band.subcarriers" => cfg.subcarriers = usize_of(key, value)?,
        "band.n_ttd" => cfg.n_ttd = usize_of(key, value)?,
        "band.cp_len" => cfg.cp_len = usize_of(key, value)?,
        "link.p_t_dbm" => cfg.p_t_dbm = f64_list(key, value)?,
        "link.noise_dbm_hz" => cfg.noise_dbm_per_hz = f64_of(key, value)?,
        "link.g_t_dbi" => cfg.g_t_dbi = f64_of(key, value)?,
        "link.g_r_dbi" => cfg.g_r_dbi = f64_of(key, value)?,
        "link.bs_stars_m" => cfg.bs_stars_m = f64_of(key, value)?,
        "link.user_radius_m" => cfg.user_radius_m = f64_of(key, value)?,
        "link.l_paths" => cfg.l_paths = usize_of(key, value)?,
        "link.l_k_paths" => cfg.l_k_paths = usize_of(key, value)?,
        "link.k_abs_per_m" => cfg.k_abs_per_m = f64_of(key, value)?,
        "link.absorption_csv" => cfg.absorption_csv = Some(PathBuf::from(value)),
        "link.pulse" => {
            cfg.pulse = match value {
                "sinc" => Pulse::Sinc,
                "raised-cosine" => match cfg.pulse {
                    Pulse::RaisedCosine(b) => Pulse::RaisedCosine(b),
                    Pulse::Sinc => Pulse::RaisedCosine(0.3),
                },
                other => {
                    return Err(format!(
                        "field `link.pulse`: must be `sinc` or `raised-cosine`, got `{other}`"
                    ))
                }
            }
        }
        "link.pulse_rolloff" => cfg.pulse = Pulse::RaisedCosine(f64_of(key, value)?),
        "link.excess_path_m" => cfg.excess_path_m = f64_of(key, value)?,
        "link.nlos_extra_loss_db" => cfg.nlos_extra_loss_db = f64_of(key, value)?,
        "power.p_bs_w" => cfg.power.p_bs_w = f64_of(key, value)?,
        "power.p_bb_w" => cfg.power.p_bb_w = f64_of(key, value)?,
        "power.p_rf_w" => cfg.power.p_rf_w = f64_of(key, value)?,
        "power.p_ps_w" => cfg.power.p_ps_w = f64_of(key, value)?,
        "power.p_ttd_w" => cfg.power.p_ttd_w = f64_of(key, value)?,
        "power.p_ue_w" => cfg.power.p_ue_w = f64_of(key, value)?,
        "power.p_pin_w" => cfg.power.p_pin_w = f64_of(key, value)?,
        "power.p_circ_w" => cfg.power.p_circ_w = f64_of(key, value)?,
        "power.xi" => cfg.power.xi = f64_of(key, value)?,
        "power.l_beta" => cfg.power.l_beta = usize_of(key, value)? as u32,
        "power.l_phi" => cfg.power.l_phi = usize_of(key, value)? as u32,
        "algorithm.rho0" => cfg.algo.rho0 = f64_of(key, value)?,
        "algorithm.c" => cfg.algo.penalty_shrink = f64_of(key, value)?,
        "algorithm.rho_floor" => cfg.algo.rho_floor = f64_of(key, value)?,
        "algorithm.h_threshold" => cfg.algo.h_threshold = f64_of(key, value)?,
        "algorithm.eps0" => cfg.algo.eps0 = f64_of(key, value)?,
        "algorithm.max_outer" => cfg.algo.max_outer = usize_of(key, value)?,
        "algorithm.inner_tol" => cfg.algo.inner_tol = f64_of(key, value)?,
        "algorithm.max_inner_sweeps" => cfg.algo.max_inner_sweeps = usize_of(key, value)?,
        "algorithm.elementwise_tol" => cfg.algo.elementwise_tol = f64_of(key, value)?,
        "algorithm.elementwise_max_sweeps" => cfg.algo.elementwise_max_sweeps = usize_of(key, value)?,
        "algorithm.barrier_gap" => cfg.algo.barrier_gap = f64_of(key, value)?,
        "algorithm.barrier_max_newton" => cfg.algo.barrier_max_newton = usize_of(key, value)?,
        "algorithm.bfgs_tol" => cfg.algo.bfgs_tol = f64_of(key, value)?,
        "algorithm.bfgs_max_iter" => cfg.algo.bfgs_max_iter = usize_of(key, value)?,
        "algorithm.golden_tol" => cfg.algo.golden_tol = f64_of(key, value)?,
        "sweep.seeds" => {
            cfg.seeds = value
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|_| format!("field `sweep.seeds`: `{s}` is not a seed"))
                })
                .collect::<std::result::Result<_, _>>()?;
        }
        "sweep.m_list" => {
            cfg.m_sweep = value
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("field `sweep.m_list`: `{s}` is not an integer"))
                })
                .collect::<std::result::Result<_, _>>()?;
        }
        other => return Err(format!("unknown field `{other}`")),
    }
    Ok(())
}
