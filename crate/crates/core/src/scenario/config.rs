//! Scenario parameters and their flat key/value file form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    /// Sub-sampling of the raw target-return matrix.
    #[default]
    SchemeI,
    /// Sub-sampling of the matched-filter-bank output.
    SchemeII,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::SchemeI => f.write_str("SchemeI"),
            Scheme::SchemeII => f.write_str("SchemeII"),
        }
    }
}

/// Stationary far-field point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Target {
    pub angle_deg: f64,
    pub beta_re: f64,
    pub beta_im: f64,
}

impl From<[f64; 3]> for Target {
    fn from(v: [f64; 3]) -> Self {
        Self {
            angle_deg: v[0],
            beta_re: v[1],
            beta_im: v[2],
        }
    }
}

impl From<Target> for [f64; 3] {
    fn from(t: Target) -> Self {
        [t.angle_deg, t.beta_re, t.beta_im]
    }
}

/// Every physical and protocol parameter of one coexistence experiment.
///
/// Powers are in units normalized to the radar waveform power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "M_tR")]
    pub m_tr: usize,
    #[serde(rename = "M_rR")]
    pub m_rr: usize,
    #[serde(rename = "M_tC")]
    pub m_tc: usize,
    #[serde(rename = "M_rC")]
    pub m_rc: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "P_t")]
    pub p_t: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "sigma_C2")]
    pub sigma_c2: f64,
    #[serde(rename = "sigma_R2")]
    pub sigma_r2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
    #[serde(rename = "gamma2_dB")]
    pub gamma2_db: f64,
    pub rho2: f64,
    pub sigma_alpha2: f64,
    pub p: f64,
    pub scheme: Scheme,
    pub targets: Vec<Target>,
    pub seed: u64,
    pub radar_rate: f64,
    pub comm_rate: f64,
    /// When set, the radar noise variance is derived from this SNR (dB)
    /// against the noiseless target return and `sigma_R2` is ignored.
    #[serde(rename = "snr_dB", default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::scenario1()
    }
}

impl ScenarioConfig {
    fn with_dims(m_tr: usize, m_rr: usize, m_tc: usize, m_rc: usize) -> Self {
        let l = 32;
        Self {
            m_tr,
            m_rr,
            m_tc,
            m_rc,
            l,
            p_t: l as f64,
            c: 12.0,
            sigma_c2: 0.01,
            sigma_r2: 0.0,
            sigma1_2: 0.1,
            sigma2_2: 0.1,
            gamma2_db: -30.0,
            rho2: 1000.0 * l as f64 / m_tr as f64,
            sigma_alpha2: 1e-3,
            p: 0.5,
            scheme: Scheme::SchemeI,
            targets: vec![Target {
                angle_deg: 30.0,
                beta_re: 0.2,
                beta_im: 0.1,
            }],
            seed: 0,
            radar_rate: 1.0,
            comm_rate: 1.0,
            snr_db: Some(25.0),
        }
    }

    /// Small arrays: 4 radar TX, 8 radar RX, 8 comm TX, 4 comm RX.
    pub fn scenario1() -> Self {
        Self::with_dims(4, 8, 8, 4)
    }

    /// Large radar arrays: 16 radar TX, 32 radar RX, 4x4 comm link.
    pub fn scenario2() -> Self {
        Self::with_dims(16, 32, 4, 4)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("M_tR", self.m_tr),
            ("M_rR", self.m_rr),
            ("M_tC", self.m_tc),
            ("M_rC", self.m_rc),
            ("L", self.l),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("p = {} not in (0, 1]", self.p)));
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(Error::Config("P_t must be > 0".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config("C must be > 0".into()));
        }
        let vars = [
            ("sigma_C2", self.sigma_c2),
            ("sigma_R2", self.sigma_r2),
            ("sigma1_2", self.sigma1_2),
            ("sigma2_2", self.sigma2_2),
            ("sigma_alpha2", self.sigma_alpha2),
            ("rho2", self.rho2),
        ];
        for (name, v) in vars {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0")));
            }
        }
        if !(self.radar_rate > 0.0 && self.comm_rate > 0.0) {
            return Err(Error::Config("symbol rates must be > 0".into()));
        }
        if !self.gamma2_db.is_finite() {
            return Err(Error::Config("gamma2_dB must be finite".into()));
        }
        Ok(())
    }

    /// Path-loss amplitude `gamma` (the configured value is a power in dB).
    pub fn gamma(&self) -> f64 {
        10f64.powf(self.gamma2_db / 20.0)
    }

    pub fn rho(&self) -> f64 {
        self.rho2.sqrt()
    }

    /// Shape of the sampling mask for the configured scheme.
    pub fn mask_shape(&self) -> (usize, usize) {
        match self.scheme {
            Scheme::SchemeI => (self.m_rr, self.l),
            Scheme::SchemeII => (self.m_rr, self.m_tr),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let cfg = file.resolve();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}

/// Partially specified scenario as read from a file; missing keys fall back
/// to the defaults, with `P_t = L` and `rho2 = 1000 L / M_tR` recomputed from
/// whatever `L` and `M_tR` end up being.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ScenarioFile {
    #[serde(rename = "M_tR")]
    pub m_tr: Option<usize>,
    #[serde(rename = "M_rR")]
    pub m_rr: Option<usize>,
    #[serde(rename = "M_tC")]
    pub m_tc: Option<usize>,
    #[serde(rename = "M_rC")]
    pub m_rc: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[serde(rename = "P_t")]
    pub p_t: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "sigma_C2")]
    pub sigma_c2: Option<f64>,
    #[serde(rename = "sigma_R2")]
    pub sigma_r2: Option<f64>,
    pub sigma1_2: Option<f64>,
    pub sigma2_2: Option<f64>,
    #[serde(rename = "gamma2_dB")]
    pub gamma2_db: Option<f64>,
    pub rho2: Option<f64>,
    pub sigma_alpha2: Option<f64>,
    pub p: Option<f64>,
    pub scheme: Option<Scheme>,
    pub targets: Option<Vec<Target>>,
    pub seed: Option<u64>,
    pub radar_rate: Option<f64>,
    pub comm_rate: Option<f64>,
    #[serde(rename = "snr_dB")]
    pub snr_db: Option<f64>,
}

impl ScenarioFile {
    pub fn resolve(self) -> ScenarioConfig {
        let base = ScenarioConfig::default();
        let m_tr = self.m_tr.unwrap_or(base.m_tr);
        let l = self.l.unwrap_or(base.l);
        // an explicit sigma_R2 without snr_dB means "use sigma_R2"
        let snr_db = match (self.snr_db, self.sigma_r2) {
            (Some(s), _) => Some(s),
            (None, Some(_)) => None,
            (None, None) => base.snr_db,
        };
        ScenarioConfig {
            m_tr,
            m_rr: self.m_rr.unwrap_or(base.m_rr),
            m_tc: self.m_tc.unwrap_or(base.m_tc),
            m_rc: self.m_rc.unwrap_or(base.m_rc),
            l,
            p_t: self.p_t.unwrap_or(l as f64),
            c: self.c.unwrap_or(base.c),
            sigma_c2: self.sigma_c2.unwrap_or(base.sigma_c2),
            sigma_r2: self.sigma_r2.unwrap_or(base.sigma_r2),
            sigma1_2: self.sigma1_2.unwrap_or(base.sigma1_2),
            sigma2_2: self.sigma2_2.unwrap_or(base.sigma2_2),
            gamma2_db: self.gamma2_db.unwrap_or(base.gamma2_db),
            rho2: self.rho2.unwrap_or(1000.0 * l as f64 / m_tr.max(1) as f64),
            sigma_alpha2: self.sigma_alpha2.unwrap_or(base.sigma_alpha2),
            p: self.p.unwrap_or(base.p),
            scheme: self.scheme.unwrap_or(base.scheme),
            targets: self.targets.unwrap_or(base.targets),
            seed: self.seed.unwrap_or(base.seed),
            radar_rate: self.radar_rate.unwrap_or(base.radar_rate),
            comm_rate: self.comm_rate.unwrap_or(base.comm_rate),
            snr_db,
        }
    }
}
