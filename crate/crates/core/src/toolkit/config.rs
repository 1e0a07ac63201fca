use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_path_to_error::Segment;

use super::{BenchmarkSpec, Result, ToolkitError};
use crate::epicnet::{ModelConfig, Partition};
use crate::netem::{EnergyModel, NetworkProfile, TransmitMode};
use crate::physics::{AcquisitionGeometry, Family};
use crate::runtime::{ComputeModel, InfraConfig, SocketConfig, Transport};

/// Environment variable that replaces every configured seed.
pub const SEED_ENV: &str = "EPIC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelPreset {
    #[default]
    Standard,
    Compact,
}

impl ModelPreset {
    pub fn config(self, n_devices: usize) -> ModelConfig {
        match self {
            Self::Standard => ModelConfig::standard(n_devices),
            Self::Compact => ModelConfig::compact(n_devices),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    #[default]
    Expected,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub weights: u64,
    pub faults: u64,
    pub link: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub weights: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: "data".into(),
            weights: "weights.epw".into(),
            reports: "reports".into(),
        }
    }
}

fn default_deadline() -> f64 {
    0.5
}

fn default_samples() -> usize {
    8
}

fn default_family() -> Family {
    Family::Layered
}

fn default_transport() -> Transport {
    Transport::Simulated
}

/// JSON run configuration shared by every CLI subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_devices: usize,
    /// `[start, end)` receiver slices; even split when absent.
    #[serde(default)]
    pub partition: Option<Vec<[usize; 2]>>,
    pub network: NetworkProfile,
    #[serde(rename = "T", default = "default_deadline")]
    pub deadline_s: f64,
    /// Decoder time `T_d`; taken from the compute model when absent.
    #[serde(rename = "T_d", default)]
    pub decoder_time_s: Option<f64>,
    #[serde(default = "default_transport")]
    pub transport: Transport,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelPreset,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default)]
    pub link: LinkMode,
    #[serde(default)]
    pub compute: ComputeModel,
    #[serde(default)]
    pub energy: EnergyModel,
    #[serde(default)]
    pub socket: Option<SocketConfig>,
    #[serde(default)]
    pub bench: Option<BenchmarkSpec>,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(format!("/{index}")),
            Segment::Map { key } => Some(format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => Some(format!("/{variant}")),
            Segment::Unknown => None,
        })
        .collect()
}

fn at(pointer: &str, message: impl Into<String>) -> ToolkitError {
    ToolkitError::Config { pointer: pointer.to_string(), message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| at(&pointer(e.path()), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ToolkitError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }

    /// Apply an `EPIC_SEED` value (if any): every seed becomes that value.
    pub fn with_seed_override(mut self, value: Option<&str>) -> Result<Self> {
        if let Some(v) = value {
            let seed: u64 = v
                .trim()
                .parse()
                .map_err(|_| at("/seeds", format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
            self.seeds = Seeds { data: seed, weights: seed, faults: seed, link: seed };
        }
        Ok(self)
    }

    /// [`Self::with_seed_override`] using the process environment.
    pub fn with_env_seed(self) -> Result<Self> {
        let value = std::env::var(SEED_ENV).ok();
        self.with_seed_override(value.as_deref())
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.config(self.n_devices.max(1));
        if self.n_devices == 0 || self.n_devices > model.n_receivers {
            return Err(at("/n_devices", format!("must be in 1..={}", model.n_receivers)));
        }
        let net = &self.network;
        if !(net.b > 0.0 && net.b.is_finite()) {
            return Err(at("/network/b", "bandwidth must be positive"));
        }
        if !(net.l >= 0.0 && net.l.is_finite()) {
            return Err(at("/network/l", "latency must be non-negative"));
        }
        if !(0.0..1.0).contains(&net.p) {
            return Err(at("/network/p", "loss rate must be in [0, 1)"));
        }
        if net.mtu == 0 {
            return Err(at("/network/mtu", "mtu must be positive"));
        }
        if !(self.deadline_s > 0.0 && self.deadline_s.is_finite()) {
            return Err(at("/T", "deadline must be positive"));
        }
        if let Some(td) = self.decoder_time_s {
            if !(td >= 0.0 && td < self.deadline_s) {
                return Err(at("/T_d", format!("must lie in [0, T = {})", self.deadline_s)));
            }
        }
        if self.samples == 0 {
            return Err(at("/samples", "must be at least 1"));
        }
        if self.partition.is_some() {
            self.partition_for(self.n_devices)?;
        }
        if !(self.compute.edge_macs_per_s > 0.0 && self.compute.central_macs_per_s > 0.0) {
            return Err(at("/compute", "throughputs must be positive"));
        }
        if self.energy.validate().is_err() {
            return Err(at("/energy", "energy terms must be non-negative"));
        }
        if let Some(b) = &self.bench {
            b.validate().map_err(|e| match e {
                ToolkitError::Config { pointer, message } => at(&format!("/bench{pointer}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn model_config(&self, n_devices: usize) -> ModelConfig {
        self.model.config(n_devices)
    }

    /// Acquisition geometry matching the model's time axis.
    pub fn geometry(&self) -> AcquisitionGeometry {
        let model = self.model_config(self.n_devices);
        AcquisitionGeometry::standard().with_steps(model.n_timesteps)
    }

    fn partition_for(&self, n_devices: usize) -> Result<Partition> {
        let n_receivers = self.model_config(n_devices).n_receivers;
        match &self.partition {
            Some(slices) if n_devices == self.n_devices => {
                let ranges = slices.iter().map(|[a, b]| *a..*b).collect();
                let p = Partition::new(ranges, n_receivers).map_err(|e| at("/partition", e.to_string()))?;
                if p.len() != n_devices {
                    return Err(at("/partition", format!("{} slices for {n_devices} devices", p.len())));
                }
                Ok(p)
            }
            _ => Partition::even(n_receivers, n_devices).map_err(|e| at("/n_devices", e.to_string())),
        }
    }

    /// Infrastructure for `n_devices` (the configured partition applies only
    /// at the configured device count) on `network`.
    pub fn infra(&self, n_devices: usize, network: NetworkProfile) -> Result<InfraConfig> {
        let model = self.model_config(n_devices);
        let infra = InfraConfig {
            n_devices,
            partition: self.partition_for(n_devices)?,
            network,
            energy: self.energy,
            deadline_s: self.deadline_s,
            decoder_time_s: self.decoder_time_s.unwrap_or_else(|| self.compute.decode_s(&model)),
            transport: self.transport,
            compute: self.compute,
            link_mode: match self.link {
                LinkMode::Expected => TransmitMode::Expected,
                LinkMode::Stochastic => TransmitMode::Stochastic { seed: self.seeds.link, stream: 0 },
            },
            sample_interval_s: None,
            socket: self.socket.clone().unwrap_or_default(),
        };
        infra.validate().map_err(|e| at("", e.to_string()))?;
        Ok(infra)
    }
}
