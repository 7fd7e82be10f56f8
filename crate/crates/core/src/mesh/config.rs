use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Latency {
    Fixed { s: f64 },
    Uniform { lo_s: f64, hi_s: f64 },
}

impl Latency {
    pub fn max_s(&self) -> f64 {
        match *self {
            Latency::Fixed { s } => s,
            Latency::Uniform { hi_s, .. } => hi_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub latency: Latency,
    #[serde(default)]
    pub loss: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self {
            latency: Latency::Fixed { s: 0.05 },
            loss: 0.0,
        }
    }
}

impl LinkModel {
    pub fn fixed(latency_s: f64, loss: f64) -> Self {
        Self {
            latency: Latency::Fixed { s: latency_s },
            loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.latency {
            Latency::Fixed { s } => s >= 0.0 && s.is_finite(),
            Latency::Uniform { lo_s, hi_s } => 0.0 <= lo_s && lo_s <= hi_s && hi_s.is_finite(),
        };
        if !ok {
            return Err(Error::invalid_config(format!(
                "bad latency {:?}",
                self.latency
            )));
        }
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::invalid_config(format!(
                "loss {} outside [0, 1]",
                self.loss
            )));
        }
        Ok(())
    }
}

/// Directed link override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkOverride {
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub model: LinkModel,
}

/// Nodes in `nodes` cannot reach nodes outside it during `[t_start_s, t_end_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub nodes: Vec<String>,
}

impl Partition {
    pub fn separates(&self, a: &str, b: &str, t: f64) -> bool {
        if !(self.t_start_s <= t && t < self.t_end_s) {
            return false;
        }
        let ina = self.nodes.iter().any(|n| n == a);
        let inb = self.nodes.iter().any(|n| n == b);
        ina != inb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryConfig {
    pub interval_s: f64,
    pub max_retries: u32,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            interval_s: 0.5,
            max_retries: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FailoverConfig {
    pub brokers: Vec<String>,
    pub heartbeat_interval_s: f64,
    pub miss_threshold: u32,
    /// How long a client waits for a connect reply before trying the next
    /// broker.
    pub connect_timeout_s: f64,
}

impl Default for FailoverConfig {
    fn default() -> Self {
        Self {
            brokers: vec!["broker0".into(), "broker1".into()],
            heartbeat_interval_s: 1.0,
            miss_threshold: 3,
            connect_timeout_s: 1.0,
        }
    }
}

/// A scheduled broker crash, optionally followed by a restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokerFailure {
    pub broker: String,
    pub kill_at_s: f64,
    #[serde(default)]
    pub revive_at_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub default_link: LinkModel,
    pub links: Vec<LinkOverride>,
    pub partitions: Vec<Partition>,
    pub retry: RetryConfig,
    pub failover: FailoverConfig,
    /// Messages a disconnected client keeps; the oldest go first.
    pub buffer_cap: usize,
    pub trace_heartbeats: bool,
    pub broker_failures: Vec<BrokerFailure>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            default_link: LinkModel::default(),
            links: Vec::new(),
            partitions: Vec::new(),
            retry: RetryConfig::default(),
            failover: FailoverConfig::default(),
            buffer_cap: 1024,
            trace_heartbeats: false,
            broker_failures: Vec::new(),
        }
    }
}

impl MeshConfig {
    pub fn validate(&self) -> Result<()> {
        self.default_link.validate()?;
        for l in &self.links {
            l.model.validate()?;
        }
        for p in &self.partitions {
            if !(p.t_start_s <= p.t_end_s) {
                return Err(Error::invalid_config(format!(
                    "partition [{}, {}) is reversed",
                    p.t_start_s, p.t_end_s
                )));
            }
        }
        if !(self.retry.interval_s > 0.0) {
            return Err(Error::invalid_config("retry interval must be positive"));
        }
        let f = &self.failover;
        if f.brokers.is_empty() {
            return Err(Error::invalid_config("broker priority list is empty"));
        }
        if !(f.heartbeat_interval_s > 0.0 && f.connect_timeout_s > 0.0) || f.miss_threshold < 1 {
            return Err(Error::invalid_config(
                "heartbeat interval and connect timeout must be positive, miss_threshold >= 1",
            ));
        }
        for b in &self.broker_failures {
            if !f.brokers.contains(&b.broker) {
                return Err(Error::invalid_config(format!(
                    "unknown broker {:?}",
                    b.broker
                )));
            }
            if b.revive_at_s.is_some_and(|r| r < b.kill_at_s) {
                return Err(Error::invalid_config("broker revives before it is killed"));
            }
        }
        Ok(())
    }

    pub fn link(&self, from: &str, to: &str) -> &LinkModel {
        self.links
            .iter()
            .find(|l| l.from == from && l.to == to)
            .map_or(&self.default_link, |l| &l.model)
    }

    pub fn max_latency_s(&self) -> f64 {
        self.links
            .iter()
            .map(|l| l.model.latency.max_s())
            .fold(self.default_link.latency.max_s(), f64::max)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
