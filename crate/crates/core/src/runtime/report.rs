use serde::{Deserialize, Serialize};

use super::BufferStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Centralized,
    Fla,
    Sla,
    Epic,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 4] = [Self::Centralized, Self::Fla, Self::Sla, Self::Epic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Centralized => "centralized",
            Self::Fla => "fla",
            Self::Sla => "sla",
            Self::Epic => "epic",
        }
    }
}

impl std::fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown mode {s:?} (expected centralized, fla, sla or epic)"))
    }
}

/// Timing and outcome of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: u64,
    /// Slowest edge compute among devices that sent.
    pub l_edge_s: f64,
    /// Slowest delivered transfer, injected delay included.
    pub l_comm_s: f64,
    pub l_central_s: f64,
    /// Release of the sample to the end of central decoding.
    pub l_total_s: f64,
    pub energy_j: f64,
    /// Wire bytes sent by all devices for this sample.
    pub comm_bytes: u64,
    pub mask: Vec<bool>,
    /// Collection ended by the deadline, not by a complete set.
    pub timed_out: bool,
    pub deadline_met: bool,
    pub failure: Option<String>,
    pub ssim: Option<f64>,
}

impl SampleReport {
    pub fn received(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: PipelineMode,
    pub n_devices: usize,
    pub deadline_s: f64,
    pub decoder_time_s: f64,
    pub samples: Vec<SampleReport>,
    pub duplicates: u64,
    pub late_frames: u64,
    pub stale_frames: u64,
}

impl RunReport {
    pub(crate) fn new(mode: PipelineMode, n_devices: usize, deadline_s: f64, decoder_time_s: f64) -> Self {
        Self {
            mode,
            n_devices,
            deadline_s,
            decoder_time_s,
            samples: Vec::new(),
            duplicates: 0,
            late_frames: 0,
            stale_frames: 0,
        }
    }

    pub(crate) fn absorb(&mut self, stats: BufferStats) {
        self.duplicates += stats.duplicates;
        self.late_frames += stats.late;
        self.stale_frames += stats.stale;
    }

    pub fn total_energy_j(&self) -> f64 {
        self.samples.iter().map(|s| s.energy_j).sum()
    }

    pub fn failed(&self) -> usize {
        self.samples.iter().filter(|s| s.failed()).count()
    }

    pub fn all_deadlines_met(&self) -> bool {
        self.samples.iter().all(|s| s.deadline_met)
    }
}
