//! THz channel model: array responses, spreading + molecular absorption
//! pathloss, ray-style path sampling, and channel assembly.
//!
//! The narrowband cascade for user k is `H_k = diag(v_k) G` with `G` the
//! BS-to-surface matrix and `v_k` the surface-to-user row. The wideband model
//! keeps that factorization per subcarrier, with array responses evaluated at
//! each subcarrier frequency and per-hop delay-tap gains turned into
//! frequency-domain weights by an `M_c`-point DFT of the pulse-shaped tap
//! train.

use crate::config::{Pulse, ScenarioConfig, SPEED_OF_LIGHT};
use crate::{C64, CMat, CVec, Error, Result};
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path as FsPath;

// ============================================================
// Array responses
// ============================================================

/// ULA response with entry `i = exp(-j 2 pi f/c * i * d * sin(angle))`;
/// entry 0 is exactly 1.
pub fn ula_response(f_hz: f64, angle_rad: f64, n: usize, spacing_m: f64) -> CVec {
    let k = TAU * f_hz / SPEED_OF_LIGHT * spacing_m * angle_rad.sin();
    CVec::from_fn(n, |i, _| C64::from_polar(1.0, -k * i as f64))
}

/// UPA response as the Kronecker product of a horizontal factor with phase
/// proportional to `sin(azimuth) sin(elevation)` and a vertical factor with
/// phase proportional to `cos(elevation)`. Length `m_h * m_v`, entry 0 is 1.
pub fn upa_response(
    f_hz: f64,
    azimuth_rad: f64,
    elevation_rad: f64,
    m_h: usize,
    m_v: usize,
    spacing_m: f64,
) -> CVec {
    let base = TAU * f_hz / SPEED_OF_LIGHT * spacing_m;
    let kh = base * azimuth_rad.sin() * elevation_rad.sin();
    let kv = base * elevation_rad.cos();
    let h = CVec::from_fn(m_h, |i, _| C64::from_polar(1.0, -kh * i as f64));
    let v = CVec::from_fn(m_v, |i, _| C64::from_polar(1.0, -kv * i as f64));
    h.kronecker(&v)
}

// ============================================================
// Pathloss
// ============================================================

/// Free-space spreading plus molecular absorption, in dB:
/// `20 log10(4 pi f D / c) + k_abs * D * 10 log10(e)`.
pub fn pathloss_db(f_hz: f64, dist_m: f64, k_abs_per_m: f64) -> Result<f64> {
    if !(dist_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pathloss distance must be > 0, got {dist_m}"
        )));
    }
    if !(f_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pathloss frequency must be > 0, got {f_hz}"
        )));
    }
    if k_abs_per_m < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "absorption coefficient must be >= 0, got {k_abs_per_m}"
        )));
    }
    let spread = 20.0 * (4.0 * PI * f_hz * dist_m / SPEED_OF_LIGHT).log10();
    let absorb = k_abs_per_m * dist_m * 10.0 * std::f64::consts::E.log10();
    Ok(spread + absorb)
}

/// Frequency-dependent absorption coefficient table, linearly interpolated
/// and clamped at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    rows: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    /// Load a two-column CSV `frequency_hz,k_per_meter`. The header row is
    /// required.
    pub fn load(path: &FsPath) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        {
            let headers = reader.headers()?;
            if headers.len() < 2
                || headers.get(0) != Some("frequency_hz")
                || headers.get(1) != Some("k_per_meter")
            {
                return Err(Error::InvalidArgument(format!(
                    "absorption CSV must start with a `frequency_hz,k_per_meter` header, got {:?}",
                    headers
                )));
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let f: f64 = record
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidArgument("bad frequency in absorption CSV".into()))?;
            let k: f64 = record
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::InvalidArgument("bad coefficient in absorption CSV".into()))?;
            if k < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "absorption coefficient must be >= 0, got {k}"
                )));
            }
            rows.push((f, k));
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("absorption CSV has no data rows".into()));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { rows })
    }

    pub fn k_at(&self, f_hz: f64) -> f64 {
        let rows = &self.rows;
        if f_hz <= rows[0].0 {
            return rows[0].1;
        }
        if f_hz >= rows[rows.len() - 1].0 {
            return rows[rows.len() - 1].1;
        }
        let idx = rows.partition_point(|(f, _)| *f <= f_hz);
        let (f0, k0) = rows[idx - 1];
        let (f1, k1) = rows[idx];
        if f1 == f0 {
            return k0;
        }
        k0 + (k1 - k0) * (f_hz - f0) / (f1 - f0)
    }
}

/// Absorption model used while sampling and assembling.
#[derive(Debug, Clone, PartialEq)]
pub enum Absorption {
    Constant(f64),
    Table(AbsorptionTable),
}

impl Absorption {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        match &cfg.absorption_csv {
            Some(path) => Ok(Absorption::Table(AbsorptionTable::load(path)?)),
            None => Ok(Absorption::Constant(cfg.k_abs_per_m)),
        }
    }

    pub fn k_at(&self, f_hz: f64) -> f64 {
        match self {
            Absorption::Constant(k) => *k,
            Absorption::Table(t) => t.k_at(f_hz),
        }
    }
}

// ============================================================
// Path sampling
// ============================================================

/// One propagation path of the BS-to-surface hop.
#[derive(Debug, Clone, PartialEq)]
pub struct BsPath {
    /// Departure angle at the BS ULA.
    pub aod_rad: f64,
    /// Arrival azimuth / elevation at the surface UPA.
    pub aoa_azimuth_rad: f64,
    pub aoa_elevation_rad: f64,
    /// Complex path gain, linear, antenna gains not included.
    pub gain: C64,
    pub delay_s: f64,
}

/// One propagation path of a surface-to-user hop.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPath {
    /// Departure azimuth / elevation at the surface UPA.
    pub aod_azimuth_rad: f64,
    pub aod_elevation_rad: f64,
    pub gain: C64,
    pub delay_s: f64,
}

/// Sampled multipath geometry of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub bs_star: Vec<BsPath>,
    /// Outer index: user.
    pub star_user: Vec<Vec<UserPath>>,
}

impl PathSet {
    /// Largest BS-hop delay.
    pub fn max_bs_delay(&self) -> f64 {
        self.bs_star.iter().map(|p| p.delay_s).fold(0.0, f64::max)
    }

    /// Largest user-hop delay for user `k`.
    pub fn max_user_delay(&self, k: usize) -> f64 {
        self.star_user[k].iter().map(|p| p.delay_s).fold(0.0, f64::max)
    }

    /// Departure angles of the `count` strongest BS-hop paths, strongest
    /// first. When `count` exceeds the path count the list repeats from the
    /// strongest again, so every consumer (analog beamformer columns, TTD
    /// chains) always gets `count` directions.
    pub fn strongest_bs_directions(&self, count: usize) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..self.bs_star.len()).collect();
        idx.sort_by(|&a, &b| {
            self.bs_star[b]
                .gain
                .norm()
                .partial_cmp(&self.bs_star[a].gain.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        (0..count).map(|j| self.bs_star[idx[j % idx.len()]].aod_rad).collect()
    }
}

/// Draw a multipath realization. Angles are i.i.d. uniform on
/// [-pi/2, pi/2]; path 1 of each hop takes the geometric distance, later
/// paths add an excess length uniform on (0, `excess_path_m`] and an extra
/// attenuation uniform on [0, `nlos_extra_loss_db`] dB. Gain magnitudes come
/// from [`pathloss_db`] at the carrier, phases are uniform on [0, 2 pi).
/// Delays are shifted so the smallest composite (BS + user hop) delay is 0.
/// The draw order is fixed, so a given RNG state yields identical sets.
pub fn sample_paths<R: Rng>(cfg: &ScenarioConfig, absorption: &Absorption, rng: &mut R) -> Result<PathSet> {
    let k_abs = absorption.k_at(cfg.f_c_hz);
    let mut bs_star = Vec::with_capacity(cfg.l_paths);
    for i in 0..cfg.l_paths {
        let aod = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let aoa_az = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let aoa_el = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
        let phase = rng.random_range(0.0..TAU);
        let (dist, extra_db) = nlos_draw(cfg, cfg.bs_stars_m, i, rng);
        let loss_db = pathloss_db(cfg.f_c_hz, dist, k_abs)? + extra_db;
        bs_star.push(BsPath {
            aod_rad: aod,
            aoa_azimuth_rad: aoa_az,
            aoa_elevation_rad: aoa_el,
            gain: C64::from_polar(10f64.powf(-loss_db / 20.0), phase),
            delay_s: dist / SPEED_OF_LIGHT,
        });
    }
    let mut star_user = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let mut paths = Vec::with_capacity(cfg.l_k_paths);
        for j in 0..cfg.l_k_paths {
            let aod_az = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let aod_el = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            let phase = rng.random_range(0.0..TAU);
            let (dist, extra_db) = nlos_draw(cfg, cfg.user_radius_m, j, rng);
            let loss_db = pathloss_db(cfg.f_c_hz, dist, k_abs)? + extra_db;
            paths.push(UserPath {
                aod_azimuth_rad: aod_az,
                aod_elevation_rad: aod_el,
                gain: C64::from_polar(10f64.powf(-loss_db / 20.0), phase),
                delay_s: dist / SPEED_OF_LIGHT,
            });
        }
        star_user.push(paths);
    }

    let bs_min = bs_star.iter().map(|p| p.delay_s).fold(f64::INFINITY, f64::min);
    for p in &mut bs_star {
        p.delay_s -= bs_min;
    }
    let user_min = star_user
        .iter()
        .flatten()
        .map(|p| p.delay_s)
        .fold(f64::INFINITY, f64::min);
    for paths in &mut star_user {
        for p in paths {
            p.delay_s -= user_min;
        }
    }
    Ok(PathSet { bs_star, star_user })
}

fn nlos_draw<R: Rng>(cfg: &ScenarioConfig, base_m: f64, path_idx: usize, rng: &mut R) -> (f64, f64) {
    if path_idx == 0 {
        // Shortest path; keep the RNG stream identical across path counts by
        // not consuming draws here.
        (base_m, 0.0)
    } else {
        let excess = if cfg.excess_path_m > 0.0 {
            rng.random_range(0.0..=cfg.excess_path_m)
        } else {
            0.0
        };
        let extra_db = if cfg.nlos_extra_loss_db > 0.0 {
            rng.random_range(0.0..=cfg.nlos_extra_loss_db)
        } else {
            0.0
        };
        (base_m + excess, extra_db)
    }
}

// ============================================================
// Narrowband assembly
// ============================================================

/// Narrowband cascaded channel. `h[k] = diag(v[k]) * g` holds exactly by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrowChannel {
    /// BS -> surface matrix, `m x n`.
    pub g: CMat,
    /// Surface -> user rows, stored as length-`m` vectors.
    pub v: Vec<CVec>,
    /// Cascaded per-user channels, `m x n`.
    pub h: Vec<CMat>,
    pub f_hz: f64,
}

/// Assemble the narrowband channel at the carrier:
/// `G = sum_i sqrt(G_t) gain_i a(psi_i, theta_i) b^H(phi_i)` and
/// `v_k = sum_j sqrt(G_r) gain_jk a^H(psi_jk, theta_jk)`.
pub fn assemble_narrow(paths: &PathSet, cfg: &ScenarioConfig) -> NarrowChannel {
    assemble_at(paths, cfg, cfg.f_c_hz, None)
}

fn assemble_at(
    paths: &PathSet,
    cfg: &ScenarioConfig,
    f_hz: f64,
    tap_weights: Option<(&[C64], &[Vec<C64>])>,
) -> NarrowChannel {
    let m = cfg.m();
    let d = cfg.spacing_m();
    let sqrt_gt = cfg.g_t_linear().sqrt();
    let sqrt_gr = cfg.g_r_linear().sqrt();
    let mut g = CMat::zeros(m, cfg.n);
    for (i, p) in paths.bs_star.iter().enumerate() {
        let a = upa_response(f_hz, p.aoa_azimuth_rad, p.aoa_elevation_rad, cfg.m_h, cfg.m_v, d);
        let b = ula_response(f_hz, p.aod_rad, cfg.n, d);
        let weight = match tap_weights {
            Some((bs, _)) => bs[i],
            None => C64::new(1.0, 0.0),
        };
        let scale = p.gain * weight * sqrt_gt;
        // g += scale * a * b^H
        for (col, bc) in b.iter().enumerate() {
            let w = scale * bc.conj();
            for (row, ac) in a.iter().enumerate() {
                g[(row, col)] += w * ac;
            }
        }
    }
    let mut v = Vec::with_capacity(cfg.k);
    let mut h = Vec::with_capacity(cfg.k);
    for (k, user) in paths.star_user.iter().enumerate() {
        let mut vk = CVec::zeros(m);
        for (j, p) in user.iter().enumerate() {
            let a = upa_response(f_hz, p.aod_azimuth_rad, p.aod_elevation_rad, cfg.m_h, cfg.m_v, d);
            let weight = match tap_weights {
                Some((_, users)) => users[k][j],
                None => C64::new(1.0, 0.0),
            };
            let scale = p.gain * weight * sqrt_gr;
            for (row, ac) in a.iter().enumerate() {
                vk[row] += scale * ac.conj();
            }
        }
        let mut hk = g.clone();
        for (row, vc) in vk.iter().enumerate() {
            for col in 0..cfg.n {
                hk[(row, col)] *= *vc;
            }
        }
        v.push(vk);
        h.push(hk);
    }
    NarrowChannel { g, v, h, f_hz }
}

// ============================================================
// Wideband assembly
// ============================================================

/// Per-subcarrier cascaded channels; `h[m][k] = diag(v[m][k]) * g[m]` holds
/// exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WideChannel {
    pub f_hz: Vec<f64>,
    pub g: Vec<CMat>,
    /// `v[m][k]`: surface -> user row at subcarrier m.
    pub v: Vec<Vec<CVec>>,
    /// `h[m][k]`: cascade at subcarrier m.
    pub h: Vec<Vec<CMat>>,
    /// Delay taps spanned by the BS hop.
    pub q_taps_bs: usize,
    /// Delay taps spanned by each user hop.
    pub q_taps_user: Vec<usize>,
}

/// Transmit pulse evaluated at (continuous) tap offset `t`.
pub fn pulse_amplitude(pulse: Pulse, t: f64) -> f64 {
    let sinc = if t.abs() < 1e-12 { 1.0 } else { (PI * t).sin() / (PI * t) };
    match pulse {
        Pulse::Sinc => sinc,
        Pulse::RaisedCosine(beta) => {
            if beta == 0.0 {
                return sinc;
            }
            let den = 1.0 - (2.0 * beta * t) * (2.0 * beta * t);
            if den.abs() < 1e-8 {
                sinc * PI / 4.0
            } else {
                sinc * (PI * beta * t).cos() / den
            }
        }
    }
}

/// Frequency-domain weight of a pulse-shaped delay at subcarrier index
/// `m_idx` (1-based): `sum_{q=0}^{q_taps-1} p(q - W tau) exp(-j 2 pi m q / M_c)`.
pub fn subcarrier_tap_gain(
    tau_s: f64,
    bandwidth_hz: f64,
    m_idx: usize,
    m_c: usize,
    q_taps: usize,
    pulse: Pulse,
) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for q in 0..q_taps {
        let amp = pulse_amplitude(pulse, q as f64 - bandwidth_hz * tau_s);
        let phase = -TAU * (m_idx as f64) * (q as f64) / (m_c as f64);
        acc += C64::from_polar(amp, phase);
    }
    acc
}

/// Assemble the per-subcarrier wideband channel. Array responses are
/// evaluated at each subcarrier frequency (antenna spacing stays matched to
/// the carrier), and each hop's gain is multiplied by the DFT of its
/// pulse-shaped tap train, so the factored `diag(v) G` form is exact.
pub fn assemble_wide(paths: &PathSet, cfg: &ScenarioConfig) -> WideChannel {
    let f_hz = cfg.subcarrier_hz();
    let w = cfg.bandwidth_hz;
    let q_bs = (w * paths.max_bs_delay()).ceil() as usize + 1;
    let q_user: Vec<usize> = (0..cfg.k)
        .map(|k| (w * paths.max_user_delay(k)).ceil() as usize + 1)
        .collect();
    let mut g = Vec::with_capacity(cfg.subcarriers);
    let mut v = Vec::with_capacity(cfg.subcarriers);
    let mut h = Vec::with_capacity(cfg.subcarriers);
    for (m0, &fm) in f_hz.iter().enumerate() {
        let m_idx = m0 + 1;
        let bs_w: Vec<C64> = paths
            .bs_star
            .iter()
            .map(|p| subcarrier_tap_gain(p.delay_s, w, m_idx, cfg.subcarriers, q_bs, cfg.pulse))
            .collect();
        let user_w: Vec<Vec<C64>> = paths
            .star_user
            .iter()
            .enumerate()
            .map(|(k, paths_k)| {
                paths_k
                    .iter()
                    .map(|p| {
                        subcarrier_tap_gain(p.delay_s, w, m_idx, cfg.subcarriers, q_user[k], cfg.pulse)
                    })
                    .collect()
            })
            .collect();
        let nc = assemble_at(paths, cfg, fm, Some((&bs_w, &user_w)));
        g.push(nc.g);
        v.push(nc.v);
        h.push(nc.h);
    }
    WideChannel { f_hz, g, v, h, q_taps_bs: q_bs, q_taps_user: q_user }
}
