use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Result;
use crate::runtime::{PipelineMode, RunReport};

/// One row per run: mean latencies over samples that produced a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: PipelineMode,
    pub n_devices: usize,
    pub profile: String,
    pub samples: usize,
    pub failed: usize,
    pub l_edge_ms: f64,
    pub l_comm_ms: f64,
    pub l_central_ms: f64,
    pub l_total_ms: f64,
    /// Share of the summed phase latencies spent communicating.
    pub comm_fraction_pct: f64,
    pub energy_mj: f64,
    pub comm_bytes: f64,
    pub mean_received: f64,
    pub deadline_met_pct: f64,
    pub ssim: Option<f64>,
}

/// Per-sample export row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub mode: PipelineMode,
    pub n_devices: usize,
    pub profile: String,
    pub sample_id: u64,
    pub l_edge_ms: f64,
    pub l_comm_ms: f64,
    pub l_central_ms: f64,
    pub l_total_ms: f64,
    pub energy_mj: f64,
    pub comm_bytes: u64,
    /// Received devices as a `0`/`1` string in device order.
    pub mask: String,
    pub timed_out: bool,
    pub deadline_met: bool,
    pub failure: String,
    pub ssim: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn summarize(report: &RunReport, profile: &str) -> SummaryRow {
    let ok: Vec<_> = report.samples.iter().filter(|s| !s.failed()).collect();
    let l_edge = mean(ok.iter().map(|s| s.l_edge_s));
    let l_comm = mean(ok.iter().map(|s| s.l_comm_s));
    let l_central = mean(ok.iter().map(|s| s.l_central_s));
    let phases = l_edge + l_comm + l_central;
    let scores: Vec<f64> = ok.iter().filter_map(|s| s.ssim).collect();
    let n = report.samples.len().max(1) as f64;
    SummaryRow {
        mode: report.mode,
        n_devices: report.n_devices,
        profile: profile.to_string(),
        samples: report.samples.len(),
        failed: report.failed(),
        l_edge_ms: 1e3 * l_edge,
        l_comm_ms: 1e3 * l_comm,
        l_central_ms: 1e3 * l_central,
        l_total_ms: 1e3 * mean(ok.iter().map(|s| s.l_total_s)),
        comm_fraction_pct: if phases > 0.0 { 100.0 * l_comm / phases } else { 0.0 },
        energy_mj: 1e3 * mean(report.samples.iter().map(|s| s.energy_j)),
        comm_bytes: mean(report.samples.iter().map(|s| s.comm_bytes as f64)),
        mean_received: mean(report.samples.iter().map(|s| s.received() as f64)),
        deadline_met_pct: 100.0 * report.samples.iter().filter(|s| s.deadline_met).count() as f64 / n,
        ssim: (!scores.is_empty()).then(|| mean(scores.into_iter())),
    }
}

pub fn sample_rows(report: &RunReport, profile: &str) -> Vec<SampleRow> {
    report
        .samples
        .iter()
        .map(|s| SampleRow {
            mode: report.mode,
            n_devices: report.n_devices,
            profile: profile.to_string(),
            sample_id: s.sample_id,
            l_edge_ms: 1e3 * s.l_edge_s,
            l_comm_ms: 1e3 * s.l_comm_s,
            l_central_ms: 1e3 * s.l_central_s,
            l_total_ms: 1e3 * s.l_total_s,
            energy_mj: 1e3 * s.energy_j,
            comm_bytes: s.comm_bytes,
            mask: s.mask.iter().map(|&m| if m { '1' } else { '0' }).collect(),
            timed_out: s.timed_out,
            deadline_met: s.deadline_met,
            failure: s.failure.clone().unwrap_or_default(),
            ssim: s.ssim,
        })
        .collect()
}

/// RFC 4180 CSV with a header row taken from `T`'s field order.
pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(w: impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub const SUMMARY_HEADER: &str = "mode,n_devices,profile,samples,failed,l_edge_ms,l_comm_ms,l_central_ms,l_total_ms,comm_fraction_pct,energy_mj,comm_bytes,mean_received,deadline_met_pct,ssim";

pub const SAMPLE_HEADER: &str = "mode,n_devices,profile,sample_id,l_edge_ms,l_comm_ms,l_central_ms,l_total_ms,energy_mj,comm_bytes,mask,timed_out,deadline_met,failure,ssim";
