use serde::{Deserialize, Serialize};

use super::{summarize, Result, RunConfig, SsimParams, SummaryRow, ToolkitError};
use crate::epicnet::init_weights;
use crate::netem::NetworkProfile;
use crate::physics::Sample;
use crate::runtime::{attach_fidelity, run_baseline, FaultPlan, PipelineMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedProfile {
    pub name: String,
    pub profile: NetworkProfile,
}

fn default_modes() -> Vec<PipelineMode> {
    PipelineMode::ALL.to_vec()
}

fn default_devices() -> Vec<usize> {
    vec![2, 5, 7, 10]
}

fn default_profiles() -> Vec<NamedProfile> {
    vec![NamedProfile { name: "4g".into(), profile: NetworkProfile::four_g() }]
}

/// Sweep of modes x device counts x network profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    #[serde(default = "default_modes")]
    pub modes: Vec<PipelineMode>,
    #[serde(default = "default_devices")]
    pub devices: Vec<usize>,
    #[serde(default = "default_profiles")]
    pub profiles: Vec<NamedProfile>,
    /// Samples drawn from the dataset; all of them when absent.
    #[serde(default)]
    pub samples: Option<usize>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self { modes: default_modes(), devices: default_devices(), profiles: default_profiles(), samples: None }
    }
}

fn at(pointer: String, message: impl Into<String>) -> ToolkitError {
    ToolkitError::Config { pointer, message: message.into() }
}

impl BenchmarkSpec {
    /// Errors carry JSON pointers relative to the benchmark object.
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(at("/modes".into(), "at least one mode is required"));
        }
        if self.devices.is_empty() {
            return Err(at("/devices".into(), "at least one device count is required"));
        }
        if let Some(i) = self.devices.iter().position(|&n| n == 0) {
            return Err(at(format!("/devices/{i}"), "device count must be positive"));
        }
        if self.profiles.is_empty() {
            return Err(at("/profiles".into(), "at least one network profile is required"));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.profile.validate().map_err(|e| at(format!("/profiles/{i}/profile"), e.to_string()))?;
        }
        if self.samples == Some(0) {
            return Err(at("/samples".into(), "must be at least 1"));
        }
        Ok(())
    }
}

/// Run the sweep on `data`, one summary row per (device count, profile, mode)
/// in that nesting order. Weights for each device count come from the
/// configured weight seed; every run is fault-free on the virtual clock.
pub fn bench(spec: &BenchmarkSpec, config: &RunConfig, data: &[Sample]) -> Result<Vec<SummaryRow>> {
    spec.validate()?;
    let take = spec.samples.unwrap_or(data.len()).min(data.len());
    if take == 0 {
        return Err(at("/bench/samples".into(), "no samples to run"));
    }
    let waveforms: Vec<_> = data[..take].iter().map(|s| s.waveform.data().clone()).collect();
    let truths: Vec<_> = data[..take].iter().map(|s| s.velocity.grid().clone()).collect();
    let mut rows = Vec::new();
    for &n in &spec.devices {
        let model = config.model_config(n);
        let weights = init_weights(&model, config.seeds.weights)?;
        let (lo, hi) = model.velocity_range;
        let params = SsimParams::for_range(lo as f64, hi as f64);
        for named in &spec.profiles {
            let infra = config.infra(n, named.profile)?;
            for &mode in &spec.modes {
                let (maps, mut report) = run_baseline(mode, &waveforms, &weights, &infra, &FaultPlan::none())?;
                attach_fidelity(&mut report, &maps, &truths, &params)?;
                rows.push(summarize(&report, &named.name));
            }
        }
    }
    Ok(rows)
}
