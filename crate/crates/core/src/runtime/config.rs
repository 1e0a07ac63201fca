use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, RuntimeError};
use crate::epicnet::{cost, ModelConfig, Partition};
use crate::netem::{EnergyModel, NetworkProfile, TransmitMode};

/// Contiguous near-equal receiver slices; the first `n_receivers % n_devices` are one wider.
pub fn partition_receivers(n_receivers: usize, n_devices: usize) -> Result<Partition> {
    if n_devices == 0 || n_devices > n_receivers {
        return Err(RuntimeError::Config(format!(
            "n_devices must be in 1..={n_receivers}, got {n_devices}"
        )));
    }
    Ok(Partition::even(n_receivers, n_devices)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Simulated,
    Socket,
}

/// Declared throughput used to charge compute time on the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComputeModel {
    /// Multiply-accumulates per second on each edge device.
    pub edge_macs_per_s: f64,
    /// Multiply-accumulates per second on the central node.
    pub central_macs_per_s: f64,
}

impl Default for ComputeModel {
    fn default() -> Self {
        Self { edge_macs_per_s: 1e9, central_macs_per_s: 1e10 }
    }
}

impl ComputeModel {
    pub fn edge_s(&self, macs: u64) -> f64 {
        macs as f64 / self.edge_macs_per_s
    }

    pub fn central_s(&self, macs: u64) -> f64 {
        macs as f64 / self.central_macs_per_s
    }

    /// Modeled central reconstruction time with every device present.
    pub fn decode_s(&self, config: &ModelConfig) -> f64 {
        self.central_s(cost::reconstruct_macs(config, config.n_devices))
    }
}

/// Addresses for socket transport.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocketConfig {
    pub central_addr: String,
    /// 0 asks the OS for a free port.
    pub port: u16,
    #[serde(default)]
    pub device_addrs: Vec<String>,
}

impl Default for SocketConfig {
    fn default() -> Self {
        Self { central_addr: "127.0.0.1".into(), port: 0, device_addrs: Vec::new() }
    }
}

/// Deployment description for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct InfraConfig {
    pub n_devices: usize,
    pub partition: Partition,
    pub network: NetworkProfile,
    pub energy: EnergyModel,
    /// End-to-end deadline `T` in seconds.
    pub deadline_s: f64,
    /// Profiled central decode time `T_d` in seconds.
    pub decoder_time_s: f64,
    pub transport: Transport,
    pub compute: ComputeModel,
    /// Per-transfer link behavior in simulated mode.
    pub link_mode: TransmitMode,
    /// Gap between consecutive sample releases; defaults to `T`.
    pub sample_interval_s: Option<f64>,
    pub socket: SocketConfig,
}

impl InfraConfig {
    /// Simulated deployment with an even partition, `T = 0.5 s` and `T_d`
    /// taken from the compute model.
    pub fn simulated(model: &ModelConfig, network: NetworkProfile) -> Result<Self> {
        let compute = ComputeModel::default();
        let infra = Self {
            n_devices: model.n_devices,
            partition: partition_receivers(model.n_receivers, model.n_devices)?,
            network,
            energy: EnergyModel::default(),
            deadline_s: 0.5,
            decoder_time_s: compute.decode_s(model),
            transport: Transport::Simulated,
            compute,
            link_mode: TransmitMode::Expected,
            sample_interval_s: None,
            socket: SocketConfig::default(),
        };
        infra.validate()?;
        Ok(infra)
    }

    pub fn with_deadline(mut self, deadline_s: f64) -> Self {
        self.deadline_s = deadline_s;
        self
    }

    /// Collection deadline relative to a sample's release, `T - T_d`.
    pub fn collect_window_s(&self) -> f64 {
        self.deadline_s - self.decoder_time_s
    }

    pub fn interval_s(&self) -> f64 {
        self.sample_interval_s.unwrap_or(self.deadline_s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RuntimeError::Config(m));
        if self.partition.len() != self.n_devices {
            return bad(format!(
                "partition has {} slices for {} devices",
                self.partition.len(),
                self.n_devices
            ));
        }
        if !(self.deadline_s > 0.0 && self.deadline_s.is_finite()) {
            return bad(format!("deadline T must be positive, got {}", self.deadline_s));
        }
        if !(self.decoder_time_s >= 0.0 && self.decoder_time_s < self.deadline_s) {
            return bad(format!(
                "decoder time T_d = {} must lie in [0, T = {})",
                self.decoder_time_s, self.deadline_s
            ));
        }
        if let Some(i) = self.sample_interval_s {
            if !(i >= 0.0 && i.is_finite()) {
                return bad(format!("sample interval must be non-negative, got {i}"));
            }
        }
        if !(self.compute.edge_macs_per_s > 0.0 && self.compute.central_macs_per_s > 0.0) {
            return bad("compute throughputs must be positive".into());
        }
        self.network.validate().map_err(|e| RuntimeError::Config(e.to_string()))?;
        self.energy.validate().map_err(|e| RuntimeError::Config(e.to_string()))?;
        Ok(())
    }

    pub(crate) fn check_model(&self, model: &ModelConfig) -> Result<()> {
        self.validate()?;
        if model.n_devices != self.n_devices {
            return Err(RuntimeError::Config(format!(
                "weights built for {} devices, infrastructure has {}",
                model.n_devices, self.n_devices
            )));
        }
        if self.partition.n_receivers() != model.n_receivers {
            return Err(RuntimeError::Config(format!(
                "partition covers {} receivers, model expects {}",
                self.partition.n_receivers(),
                model.n_receivers
            )));
        }
        Ok(())
    }
}

/// Injected faults keyed by `(sample_id, device_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultPlan {
    /// Extra seconds before the device's frame reaches the central node.
    pub delays: BTreeMap<(u64, usize), f64>,
    /// Devices that never deliver for a sample.
    pub drops: BTreeSet<(u64, usize)>,
    /// Frames delivered twice, the copy arriving this many seconds later.
    pub duplicates: BTreeMap<(u64, usize), f64>,
    /// Uniform extra arrival delay in `[0, max)`, drawn per frame.
    pub jitter: Option<Jitter>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub max_s: f64,
    pub seed: u64,
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn delay(mut self, sample_id: u64, device_id: usize, extra_s: f64) -> Self {
        self.delays.insert((sample_id, device_id), extra_s);
        self
    }

    pub fn drop_device(mut self, sample_id: u64, device_id: usize) -> Self {
        self.drops.insert((sample_id, device_id));
        self
    }

    pub fn duplicate(mut self, sample_id: u64, device_id: usize, after_s: f64) -> Self {
        self.duplicates.insert((sample_id, device_id), after_s);
        self
    }

    pub fn with_jitter(mut self, max_s: f64, seed: u64) -> Self {
        self.jitter = Some(Jitter { max_s, seed });
        self
    }

    /// Drop `k` distinct seeded-random devices from every sample in `0..n_samples`.
    pub fn random_drops(n_samples: usize, n_devices: usize, k: usize, seed: u64) -> Result<Self> {
        if k > n_devices {
            return Err(RuntimeError::Config(format!("cannot drop {k} of {n_devices} devices")));
        }
        let mut plan = Self::default();
        for s in 0..n_samples as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            for d in sample_indices(&mut rng, n_devices, k) {
                plan.drops.insert((s, d));
            }
        }
        Ok(plan)
    }

    pub fn is_dropped(&self, sample_id: u64, device_id: usize) -> bool {
        self.drops.contains(&(sample_id, device_id))
    }

    /// Injected delay plus jitter for one frame.
    pub fn extra_delay_s(&self, sample_id: u64, device_id: usize) -> f64 {
        let fixed = self.delays.get(&(sample_id, device_id)).copied().unwrap_or(0.0);
        let jitter = self.jitter.map_or(0.0, |j| {
            let mut rng = ChaCha8Rng::seed_from_u64(j.seed);
            rng.set_stream((sample_id << 16) ^ device_id as u64);
            rng.gen_range(0.0..1.0) * j.max_s
        });
        fixed + jitter
    }
}
