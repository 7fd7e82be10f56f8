use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cn::{CnConfig, DetectorKind};
use crate::error::{Error, Result};
use crate::mesh::MeshConfig;
use crate::pn::PnConfig;
use crate::seismic::Algorithm1Params;
use crate::signal::{BeeBuzzSpec, RumbleSpec, DEFAULT_SEISMIC_RATE_HZ};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnSpec {
    pub id: String,
    #[serde(default)]
    pub position: String,
}

/// An elephant (or herd) arriving at some nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElephantEvent {
    pub t_onset_s: f64,
    pub affected: Vec<String>,
    #[serde(default)]
    pub rumble: RumbleSpec,
    /// Whether the animals show up on the thermal cameras.
    #[serde(default = "yes")]
    pub thermal_visible: bool,
    /// How long after onset the animals stay in camera view.
    #[serde(default = "default_visible_s")]
    pub visible_s: f64,
}

fn yes() -> bool {
    true
}

fn default_visible_s() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    pub pns: Vec<PnSpec>,
    #[serde(default)]
    pub events: Vec<ElephantEvent>,
    /// Network config file, relative to the scenario file. Overrides the
    /// mesh section of the sim config.
    #[serde(default)]
    pub network: Option<PathBuf>,
    #[serde(default)]
    pub detector: DetectorKind,
    pub seed: u64,
    #[serde(skip)]
    pub network_config: Option<MeshConfig>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s: Scenario = serde_json::from_slice(&std::fs::read(path)?)?;
        if let Some(net) = &s.network {
            let full = path.parent().unwrap_or(Path::new(".")).join(net);
            s.network_config = Some(MeshConfig::load(&full)?);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid_config("scenario duration must be positive"));
        }
        if self.pns.is_empty() {
            return Err(Error::invalid_config("scenario has no peripheral nodes"));
        }
        let mut ids = BTreeSet::new();
        for pn in &self.pns {
            if pn.id.is_empty() || pn.id.contains('/') || pn.id.contains('+') || pn.id == CN_CLIENT
            {
                return Err(Error::invalid_config(format!(
                    "invalid node id {:?}",
                    pn.id
                )));
            }
            if !ids.insert(pn.id.as_str()) {
                return Err(Error::invalid_config(format!(
                    "duplicate node id {:?}",
                    pn.id
                )));
            }
        }
        for (i, ev) in self.events.iter().enumerate() {
            if !(0.0..self.duration_s).contains(&ev.t_onset_s) {
                return Err(Error::invalid_config(format!(
                    "event {i} onset {} outside [0, {})",
                    ev.t_onset_s, self.duration_s
                )));
            }
            if ev.affected.is_empty() {
                return Err(Error::invalid_config(format!("event {i} affects no node")));
            }
            if let Some(bad) = ev.affected.iter().find(|a| !ids.contains(a.as_str())) {
                return Err(Error::invalid_config(format!(
                    "event {i} names unknown node {bad:?}"
                )));
            }
            ev.rumble.validate(DEFAULT_SEISMIC_RATE_HZ)?;
            if !(ev.visible_s >= 0.0) {
                return Err(Error::invalid_config(format!(
                    "event {i} has negative visible_s"
                )));
            }
        }
        Ok(())
    }

    /// Whether an animal is in view of `pn`'s camera at `t`.
    pub fn thermal_truth(&self, pn: &str, t: f64) -> bool {
        self.events.iter().any(|e| {
            e.thermal_visible
                && e.affected.iter().any(|a| a == pn)
                && e.t_onset_s <= t
                && t <= e.t_onset_s + e.visible_s
        })
    }
}

/// Client id of the central node on the mesh.
pub const CN_CLIENT: &str = "cn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub window_s: f64,
    pub alg1: Algorithm1Params,
    /// Template for every node; `node_id` and `alg1` are filled in per run.
    pub pn: PnConfig,
    pub cn: CnConfig,
    pub mesh: MeshConfig,
    pub output_dir: Option<PathBuf>,
    pub sample_rate_hz: f64,
    /// Standard deviation of the background ground noise; rumble SNRs are
    /// relative to it.
    pub noise_std: f64,
    /// Time from a capture request to the frame being available.
    pub capture_delay_s: f64,
    /// Time the central node's detector takes per frame.
    pub detector_delay_s: f64,
    pub match_horizon_s: f64,
    pub bee: BeeBuzzSpec,
    /// Optional program that receives each warning record on stdin.
    pub warning_command: Option<Vec<String>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            window_s: 4.0,
            alg1: Algorithm1Params::default(),
            pn: PnConfig::default(),
            cn: CnConfig::default(),
            mesh: MeshConfig::default(),
            output_dir: None,
            sample_rate_hz: DEFAULT_SEISMIC_RATE_HZ,
            noise_std: 0.1,
            capture_delay_s: 0.1,
            detector_delay_s: 0.1,
            match_horizon_s: 30.0,
            bee: BeeBuzzSpec::default(),
            warning_command: None,
        }
    }
}

impl SimConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c: SimConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.window_s - self.alg1.window_s).abs() > 1e-12 {
            return Err(Error::invalid_config(format!(
                "window_s ({}) differs from alg1.window_s ({})",
                self.window_s, self.alg1.window_s
            )));
        }
        self.alg1.validate()?;
        let mut pn = self.pn.clone();
        pn.alg1 = self.alg1.clone();
        pn.validate()?;
        self.cn.validate()?;
        self.mesh.validate()?;
        for b in &self.mesh.failover.brokers {
            if b == CN_CLIENT {
                return Err(Error::invalid_config("a broker may not be called \"cn\""));
            }
        }
        if !(self.sample_rate_hz > 0.0 && self.noise_std >= 0.0) {
            return Err(Error::invalid_config(
                "sample rate must be > 0 and noise_std >= 0",
            ));
        }
        if !(self.capture_delay_s >= 0.0
            && self.detector_delay_s >= 0.0
            && self.match_horizon_s > 0.0)
        {
            return Err(Error::invalid_config(
                "delays must be >= 0 and match_horizon_s > 0",
            ));
        }
        if matches!(&self.warning_command, Some(c) if c.is_empty()) {
            return Err(Error::invalid_config("warning_command is empty"));
        }
        Ok(())
    }
}
