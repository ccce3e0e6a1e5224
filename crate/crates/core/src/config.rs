// SPDX-License-Identifier: Apache-2.0

//! Scenario configuration, unit conversions and the config-file format.
//!
//! All optimization runs in normalized units: communication channels have
//! unit-variance entries, noise powers are divided by the corresponding path
//! gain and transmit powers stay in watts. SINR, rate, EE and the CRB are
//! invariant under that joint rescaling.
//!
//! The config file is a flat JSON object whose keys are the [`SystemConfig`]
//! field names, plus raw-unit keys that are converted on load:
//!
//! | raw key              | feeds           |
//! |----------------------|-----------------|
//! | `P_max_dbm`          | `P_max`         |
//! | `P_0_dbm`            | `P_0`           |
//! | `sigma_m_dbm`        | `sigma_m2`      |
//! | `sigma_s_dbm`        | `sigma_s2`      |
//! | `path_loss_comm_db`  | `sigma_m2`      |
//! | `path_loss_sense_db` | `sigma_s2`      |
//! | `radar_gain_db`      | `alpha`         |
//!
//! Unknown keys are rejected, as is giving both a raw key and the normalized
//! field it feeds.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ConfigError;

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// How the outer loop compares consecutive EE values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvergenceRule {
    /// `|EE_j - EE_{j-1}| < p_con * max(1, |EE_j|)`
    Relative,
    /// `|EE_j - EE_{j-1}| < p_con`
    Absolute,
}

/// Every scalar of one ISAC scenario, in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N")]
    pub rx_antennas: usize,
    #[serde(rename = "M_t")]
    pub tx_antennas: usize,
    #[serde(rename = "M_r")]
    pub sensing_antennas: usize,
    /// Per-user EE weights, summing to one.
    #[serde(rename = "f")]
    pub weights: Vec<f64>,
    /// Target azimuth in radians.
    pub theta: f64,
    /// Sensing channel coefficient, stored as `[re, im]`.
    #[serde(with = "complex_pair")]
    pub alpha: Complex64,
    #[serde(rename = "L")]
    pub frame_len: usize,
    /// Per-user transmit power cap (W).
    #[serde(rename = "P_max")]
    pub p_max: f64,
    /// Total fixed circuit power (W).
    #[serde(rename = "P_0")]
    pub p_0: f64,
    /// Linear SINR floors.
    pub zeta: Vec<f64>,
    /// Spectral-norm radius of the channel error ball.
    pub phi: f64,
    /// Optional per-user override of `phi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_per_user: Option<Vec<f64>>,
    /// CRB cap in rad^2; `null` in JSON means unconstrained.
    #[serde(with = "inf_as_null")]
    pub rho: f64,
    pub sigma_m2: f64,
    pub sigma_s2: f64,
    pub bandwidth: f64,
    /// Convergence precision; `null` in JSON means infinite.
    #[serde(with = "inf_as_null")]
    pub p_con: f64,
    pub convergence: ConvergenceRule,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// The three-user, eight-antenna reference scenario.
    fn default() -> Self {
        let template = SystemConfig {
            users: 3,
            rx_antennas: 2,
            tx_antennas: 8,
            sensing_antennas: 10,
            weights: vec![0.3, 0.35, 0.35],
            theta: PI / 3.0,
            alpha: Complex64::new(1.0, 0.0),
            frame_len: 30,
            p_max: 0.0,
            p_0: 0.0,
            zeta: vec![0.01; 3],
            phi: 0.1,
            phi_per_user: None,
            rho: 0.0033 * 0.0033,
            sigma_m2: 0.0,
            sigma_s2: 0.0,
            bandwidth: 1.0,
            p_con: 1e-3,
            convergence: ConvergenceRule::Relative,
            max_iters: 30,
            seed: 0,
        };
        normalize_scenario(&RawScenario::reference(template))
            .expect("reference scenario is valid")
    }
}

impl SystemConfig {
    /// Error radius for user `k`.
    pub fn phi_for(&self, k: usize) -> f64 {
        match &self.phi_per_user {
            Some(v) => v[k],
            None => self.phi,
        }
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.users).map(|k| self.phi_for(k)).collect()
    }

    /// Fixed power share `P_0 / K` attributed to each user.
    pub fn fixed_power_share(&self) -> f64 {
        self.p_0 / self.users as f64
    }

    /// Right-hand side of the Schur-form CRB constraint,
    /// `sigma_s^2 / (2 |alpha|^2 L rho)`. Zero when `rho` is infinite.
    pub fn crb_gamma(&self) -> f64 {
        self.sigma_s2 / (2.0 * self.alpha.norm_sqr() * self.frame_len as f64 * self.rho)
    }

    pub fn has_crb_constraint(&self) -> bool {
        self.rho.is_finite()
    }

    /// Set `M_t` and keep the default `M_r = M_t + 2` sensing aperture.
    pub fn with_tx_antennas(mut self, m_t: usize) -> Self {
        self.tx_antennas = m_t;
        self.sensing_antennas = m_t + 2;
        self
    }

    pub fn with_root_crb(mut self, root_rho: f64) -> Self {
        self.rho = root_rho * root_rho;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self.phi_per_user = None;
        self
    }

    /// Single-user variant with weight one and the same SINR floor.
    pub fn single_user(mut self) -> Self {
        let zeta = self.zeta.first().copied().unwrap_or(0.01);
        self.users = 1;
        self.weights = vec![1.0];
        self.zeta = vec![zeta];
        self.phi_per_user = self.phi_per_user.map(|v| vec![v[0]]);
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.users < 1 {
            return bad("K must be at least 1".into());
        }
        if self.rx_antennas < 1 {
            return bad("N must be at least 1".into());
        }
        if self.tx_antennas < 2 {
            return bad("M_t must be at least 2".into());
        }
        if self.sensing_antennas <= self.tx_antennas {
            return bad(format!(
                "M_r ({}) must exceed M_t ({})",
                self.sensing_antennas, self.tx_antennas
            ));
        }
        if self.weights.len() != self.users {
            return bad(format!("f has {} entries, K = {}", self.weights.len(), self.users));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return bad("all f_k must be positive".into());
        }
        let wsum: f64 = self.weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-12 {
            return bad(format!("f must sum to 1, got {wsum}"));
        }
        if self.zeta.len() != self.users {
            return bad(format!("zeta has {} entries, K = {}", self.zeta.len(), self.users));
        }
        if self.zeta.iter().any(|&z| !(z >= 0.0) || !z.is_finite()) {
            return bad("zeta_k must be finite and nonnegative".into());
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite".into());
        }
        if !(self.alpha.norm() > 0.0) || !self.alpha.norm().is_finite() {
            return bad("alpha must be finite and nonzero".into());
        }
        if self.frame_len < 1 {
            return bad("L must be at least 1".into());
        }
        for (name, v) in [
            ("P_max", self.p_max),
            ("P_0", self.p_0),
            ("sigma_m2", self.sigma_m2),
            ("sigma_s2", self.sigma_s2),
            ("bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.p_con > 0.0) {
            return bad(format!("p_con must be positive, got {}", self.p_con));
        }
        if !(self.phi >= 0.0) || !self.phi.is_finite() {
            return bad(format!("phi must be finite and nonnegative, got {}", self.phi));
        }
        if let Some(v) = &self.phi_per_user {
            if v.len() != self.users {
                return bad(format!("phi_per_user has {} entries, K = {}", v.len(), self.users));
            }
            if v.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return bad("phi_per_user entries must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parse a config document, filling unspecified keys from the defaults.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let doc: Value = serde_json::from_str(text)?;
        let Value::Object(doc) = doc else {
            return Err(ConfigError::Invalid("config must be a JSON object".into()));
        };
        let cfg = merge_document(SystemConfig::default(), &doc)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

const RAW_KEYS: [&str; 7] = [
    "P_max_dbm",
    "P_0_dbm",
    "sigma_m_dbm",
    "sigma_s_dbm",
    "path_loss_comm_db",
    "path_loss_sense_db",
    "radar_gain_db",
];

/// Which normalized field each raw key feeds.
fn raw_target(key: &str) -> &'static str {
    match key {
        "P_max_dbm" => "P_max",
        "P_0_dbm" => "P_0",
        "sigma_m_dbm" | "path_loss_comm_db" => "sigma_m2",
        "sigma_s_dbm" | "path_loss_sense_db" => "sigma_s2",
        "radar_gain_db" => "alpha",
        _ => unreachable!("not a raw key: {key}"),
    }
}

fn merge_document(defaults: SystemConfig, doc: &Map<String, Value>) -> Result<SystemConfig, ConfigError> {
    let Value::Object(mut merged) = serde_json::to_value(&defaults)? else {
        unreachable!("SystemConfig serializes to an object");
    };
    let known: BTreeSet<String> = merged.keys().cloned().chain(["phi_per_user".to_string()]).collect();

    let mut raw = RawScenario::reference(defaults.clone());
    let mut raw_fed = BTreeSet::new();
    for (key, value) in doc {
        if RAW_KEYS.contains(&key.as_str()) {
            let target = raw_target(key);
            if doc.contains_key(target) {
                return Err(ConfigError::Conflict(key.clone(), target.to_string()));
            }
            let x = value
                .as_f64()
                .ok_or_else(|| ConfigError::Invalid(format!("{key} must be a number")))?;
            match key.as_str() {
                "P_max_dbm" => raw.p_max_w = dbm_to_watts(x),
                "P_0_dbm" => raw.p_0_w = dbm_to_watts(x),
                "sigma_m_dbm" => raw.noise_comm_w = dbm_to_watts(x),
                "sigma_s_dbm" => raw.noise_sense_w = dbm_to_watts(x),
                "path_loss_comm_db" => raw.path_gain_comm = db_to_linear(x),
                "path_loss_sense_db" => raw.path_gain_sense = db_to_linear(x),
                "radar_gain_db" => raw.radar_gain = db_to_linear(x),
                _ => unreachable!(),
            }
            raw_fed.insert(target);
        } else if known.contains(key) {
            merged.insert(key.clone(), value.clone());
        } else {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    if !raw_fed.is_empty() {
        let normalized = normalize_scenario(&raw)?;
        let Value::Object(norm) = serde_json::to_value(&normalized)? else {
            unreachable!();
        };
        for target in raw_fed {
            merged.insert(target.to_string(), norm[target].clone());
        }
    }

    // Shape-dependent defaults follow K and M_t when only those are given.
    if doc.contains_key("M_t") && !doc.contains_key("M_r") {
        let m_t = merged["M_t"].as_u64().unwrap_or(0);
        merged.insert("M_r".into(), Value::from(m_t + 2));
    }
    if doc.contains_key("K") {
        let k = merged["K"].as_u64().unwrap_or(0) as usize;
        if !doc.contains_key("f") && k > 0 {
            merged.insert("f".into(), Value::from(vec![1.0 / k as f64; k]));
        }
        if !doc.contains_key("zeta") {
            let z0 = defaults.zeta.first().copied().unwrap_or(0.01);
            merged.insert("zeta".into(), Value::from(vec![z0; k]));
        }
    }
    Ok(serde_json::from_value(Value::Object(merged))?)
}

/// Radio quantities in physical units, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScenario {
    pub p_max_w: f64,
    pub p_0_w: f64,
    /// Communication noise power (W).
    pub noise_comm_w: f64,
    /// Sensing noise power (W).
    pub noise_sense_w: f64,
    /// Linear power gain of the communication channels (1e-12 for -120 dB).
    pub path_gain_comm: f64,
    /// Linear round-trip path gain of the sensing channel.
    pub path_gain_sense: f64,
    /// Target reflection and radar processing gain on top of the path gain.
    pub radar_gain: f64,
    /// Phase of the sensing coefficient; the CRB does not depend on it.
    pub alpha_phase: f64,
    /// Supplies every non-radio field of the normalized config.
    pub template: SystemConfig,
}

impl RawScenario {
    /// Reference radio values: 21 dBm cap, 30 dBm fixed power, -100 dBm and
    /// -90 dBm noise, -120 dB path loss on both links, 15 dB radar gain.
    pub fn reference(template: SystemConfig) -> Self {
        RawScenario {
            p_max_w: dbm_to_watts(21.0),
            p_0_w: dbm_to_watts(30.0),
            noise_comm_w: dbm_to_watts(-100.0),
            noise_sense_w: dbm_to_watts(-90.0),
            path_gain_comm: db_to_linear(-120.0),
            path_gain_sense: db_to_linear(-120.0),
            radar_gain: db_to_linear(15.0),
            alpha_phase: 0.0,
            template,
        }
    }
}

/// Convert a raw scenario into normalized units: unit-gain channels, noise
/// divided by path gain, `|alpha|^2` equal to the radar gain.
pub fn normalize_scenario(raw: &RawScenario) -> Result<SystemConfig, ConfigError> {
    for (name, g) in [
        ("communication path gain", raw.path_gain_comm),
        ("sensing path gain", raw.path_gain_sense),
        ("radar gain", raw.radar_gain),
    ] {
        if !(g > 0.0) || !g.is_finite() {
            return Err(ConfigError::NonPositivePathLoss(format!("{name} = {g}")));
        }
    }
    let mut cfg = raw.template.clone();
    cfg.p_max = raw.p_max_w;
    cfg.p_0 = raw.p_0_w;
    cfg.sigma_m2 = raw.noise_comm_w / raw.path_gain_comm;
    cfg.sigma_s2 = raw.noise_sense_w / raw.path_gain_sense;
    cfg.alpha = Complex64::from_polar(raw.radar_gain.sqrt(), raw.alpha_phase);
    Ok(cfg)
}

mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
