use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NetemError, Result};

/// Attempts per packet before a stochastic transfer is declared lost.
pub const MAX_ATTEMPTS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Medium {
    /// Every uplink has its own channel.
    Dedicated,
    /// Uplinks share one channel and serialize in device-id order.
    Shared,
}

/// Uplink characterized by bandwidth `b` (bit/s), one-way latency `l` (s) and
/// packet loss rate `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkProfile {
    pub b: f64,
    pub l: f64,
    pub p: f64,
    #[serde(default = "default_medium")]
    pub medium: Medium,
    #[serde(default = "default_mtu")]
    pub mtu: usize,
}

fn default_medium() -> Medium {
    Medium::Dedicated
}

fn default_mtu() -> usize {
    1500
}

impl NetworkProfile {
    pub fn new(b: f64, l: f64, p: f64, medium: Medium) -> Result<Self> {
        let profile = Self { b, l, p, medium, mtu: default_mtu() };
        profile.validate()?;
        Ok(profile)
    }

    /// 15 Mbit/s uplink, 50 ms latency, 0.5% loss.
    pub fn four_g() -> Self {
        Self { b: 15e6, l: 0.05, p: 0.005, medium: Medium::Dedicated, mtu: 1500 }
    }

    pub fn wifi() -> Self {
        Self { b: 100e6, l: 0.005, p: 0.001, medium: Medium::Dedicated, mtu: 1500 }
    }

    /// Lossless, zero-latency link with effectively unlimited bandwidth.
    pub fn perfect() -> Self {
        Self { b: 1e15, l: 0.0, p: 0.0, medium: Medium::Dedicated, mtu: 1500 }
    }

    pub fn with_medium(mut self, medium: Medium) -> Self {
        self.medium = medium;
        self
    }

    pub fn with_loss(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(NetemError::Profile(format!("bandwidth must be positive, got {}", self.b)));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(NetemError::Profile(format!("latency must be non-negative, got {}", self.l)));
        }
        if !(0.0..1.0).contains(&self.p) {
            return Err(NetemError::Profile(format!("loss rate must be in [0, 1), got {}", self.p)));
        }
        if self.mtu == 0 {
            return Err(NetemError::Profile("mtu must be positive".into()));
        }
        Ok(())
    }

    /// Time to push `bytes` onto the link once.
    pub fn serialization_s(&self, bytes: usize) -> f64 {
        bytes as f64 * 8.0 / self.b
    }
}

/// Radio energy: power while serializing plus an optional per-byte cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyModel {
    pub tx_power_w: f64,
    pub per_byte_j: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { tx_power_w: 0.8, per_byte_j: 0.0 }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power_w >= 0.0 && self.per_byte_j >= 0.0) {
            return Err(NetemError::Profile(format!("energy terms must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmitMode {
    /// Closed form: `l + serialization / (1 - p)`.
    Expected,
    /// Per-MTU Bernoulli loss; each retry re-serializes the packet and waits one RTT.
    Stochastic { seed: u64, stream: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitResult {
    pub latency_s: f64,
    /// Time spent serializing, retransmissions included.
    pub serialization_s: f64,
    pub energy_j: f64,
    pub delivered: bool,
    pub retransmissions: u32,
}

pub fn transmit(size_bytes: usize, profile: &NetworkProfile, energy: &EnergyModel, mode: TransmitMode) -> TransmitResult {
    let per_byte = energy.per_byte_j * size_bytes as f64;
    match mode {
        TransmitMode::Expected => {
            let ser = profile.serialization_s(size_bytes) / (1.0 - profile.p);
            TransmitResult {
                latency_s: profile.l + ser,
                serialization_s: ser,
                energy_j: energy.tx_power_w * ser + per_byte,
                delivered: true,
                retransmissions: 0,
            }
        }
        TransmitMode::Stochastic { seed, stream } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut ser = 0.0;
            let mut retransmissions = 0u32;
            let mut delivered = true;
            let mut remaining = size_bytes;
            while remaining > 0 && delivered {
                let packet = remaining.min(profile.mtu);
                remaining -= packet;
                let cost = profile.serialization_s(packet);
                let mut attempts = 0;
                loop {
                    attempts += 1;
                    ser += cost;
                    if rng.gen::<f64>() >= profile.p {
                        break;
                    }
                    if attempts == MAX_ATTEMPTS {
                        delivered = false;
                        break;
                    }
                    retransmissions += 1;
                }
            }
            TransmitResult {
                latency_s: profile.l + ser + 2.0 * profile.l * retransmissions as f64,
                serialization_s: ser,
                energy_j: energy.tx_power_w * ser + per_byte,
                delivered,
                retransmissions,
            }
        }
    }
}

/// One device's upload: payload size and the time it becomes ready to send.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uplink {
    pub device_id: usize,
    pub ready_s: f64,
    pub bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub device_id: usize,
    /// When the device starts serializing (after waiting for a shared medium).
    pub start_s: f64,
    pub arrival_s: f64,
    pub result: TransmitResult,
}

/// Transmit a batch of uploads under the profile's medium discipline.
///
/// `mode` selects per-transfer behavior; in stochastic mode device `d` uses
/// stream `stream_base + d`. Results come back in device-id order.
pub fn schedule_uplinks(
    uplinks: &[Uplink],
    profile: &NetworkProfile,
    energy: &EnergyModel,
    mode: TransmitMode,
) -> Vec<Delivery> {
    let mut order: Vec<&Uplink> = uplinks.iter().collect();
    order.sort_by_key(|u| u.device_id);
    let mut medium_free = f64::NEG_INFINITY;
    order
        .into_iter()
        .map(|u| {
            let m = match mode {
                TransmitMode::Expected => TransmitMode::Expected,
                TransmitMode::Stochastic { seed, stream } => TransmitMode::Stochastic {
                    seed,
                    stream: stream.wrapping_add(u.device_id as u64),
                },
            };
            let result = transmit(u.bytes, profile, energy, m);
            let start_s = match profile.medium {
                Medium::Dedicated => u.ready_s,
                Medium::Shared => u.ready_s.max(medium_free),
            };
            medium_free = start_s + result.serialization_s;
            Delivery { device_id: u.device_id, start_s, arrival_s: start_s + result.latency_s, result }
        })
        .collect()
}

/// Raw-versus-latent upload comparison for `n_devices` simultaneous senders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommReduction {
    pub payload_ratio: f64,
    pub raw_dedicated_s: f64,
    pub latent_dedicated_s: f64,
    pub dedicated_ratio: f64,
    pub raw_shared_s: f64,
    pub latent_shared_s: f64,
    pub shared_ratio: f64,
}

/// Compare per-device payloads `raw_bytes` and `latent_bytes` using expected-mode latency.
pub fn comm_reduction_report(
    raw_bytes: usize,
    latent_bytes: usize,
    n_devices: usize,
    profile: &NetworkProfile,
) -> Result<CommReduction> {
    if raw_bytes == 0 || latent_bytes == 0 || n_devices == 0 {
        return Err(NetemError::Profile("payload sizes and device count must be positive".into()));
    }
    profile.validate()?;
    let energy = EnergyModel::default();
    let completion = |bytes: usize, medium: Medium| {
        let uplinks: Vec<Uplink> = (0..n_devices).map(|d| Uplink { device_id: d, ready_s: 0.0, bytes }).collect();
        schedule_uplinks(&uplinks, &profile.with_medium(medium), &energy, TransmitMode::Expected)
            .iter()
            .fold(0.0f64, |m, d| m.max(d.arrival_s))
    };
    let raw_dedicated_s = completion(raw_bytes, Medium::Dedicated);
    let latent_dedicated_s = completion(latent_bytes, Medium::Dedicated);
    let raw_shared_s = completion(raw_bytes, Medium::Shared);
    let latent_shared_s = completion(latent_bytes, Medium::Shared);
    Ok(CommReduction {
        payload_ratio: raw_bytes as f64 / latent_bytes as f64,
        raw_dedicated_s,
        latent_dedicated_s,
        dedicated_ratio: raw_dedicated_s / latent_dedicated_s,
        raw_shared_s,
        latent_shared_s,
        shared_ratio: raw_shared_s / latent_shared_s,
    })
}
