//! Virtual-clock execution. Every timestamp is an integer nanosecond, so
//! deadline comparisons are exact.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::buffer::{Collected, HashBuffer, InsertOutcome, Nanos};
use super::{FaultPlan, InfraConfig, PipelineMode, Result, RunReport, RuntimeError, SampleReport};
use crate::epicnet::{
    centralized_reconstruct, cost, encode, fla_assemble, fla_device_columns, reconstruct,
    slice_receivers, sla_reconstruct, Error as ModelError, LatentSet, LatentVector, ModelWeights,
    VelocityMap,
};
use crate::netem::{decode_frame, schedule_uplinks, Frame, FrameKind, TransmitMode, Uplink};
use crate::numerics::Tensor;

pub(crate) fn ns(seconds: f64) -> Nanos {
    (seconds * 1e9).round().max(0.0) as Nanos
}

pub(crate) fn secs(t: Nanos) -> f64 {
    t as f64 / 1e9
}

pub(crate) fn check_samples(samples: &[Tensor], weights: &ModelWeights) -> Result<()> {
    let c = &weights.config;
    let want = [c.n_sources, c.n_timesteps, c.n_receivers];
    for (i, s) in samples.iter().enumerate() {
        if s.dims() != want {
            return Err(RuntimeError::Config(format!(
                "sample {i} has extents {:?}, model expects {want:?}",
                s.dims()
            )));
        }
    }
    Ok(())
}

/// One device's contribution to a sample after the edge and link phases.
#[derive(Debug, Clone, Copy)]
struct Upload {
    device: usize,
    /// Edge compute finished (queueing behind earlier samples included).
    ready: Nanos,
    arrival: Nanos,
    energy_j: f64,
    wire_bytes: u64,
}

/// Edge compute then uplink for every non-dropped device of one sample.
///
/// `edge_s[d]` is device `d`'s compute time; `device_free` carries each
/// device's busy-until time across samples.
fn edge_and_link(
    sample_id: u64,
    release: Nanos,
    edge_s: &[f64],
    wire_bytes: &[usize],
    infra: &InfraConfig,
    faults: &FaultPlan,
    device_free: &mut [Nanos],
) -> Vec<Upload> {
    let mut uplinks = Vec::new();
    let mut ready = vec![0; edge_s.len()];
    for d in 0..edge_s.len() {
        if faults.is_dropped(sample_id, d) {
            continue;
        }
        let start = release.max(device_free[d]);
        ready[d] = start + ns(edge_s[d]);
        device_free[d] = ready[d];
        uplinks.push(Uplink { device_id: d, ready_s: secs(ready[d]), bytes: wire_bytes[d] });
    }
    let mode = match infra.link_mode {
        TransmitMode::Expected => TransmitMode::Expected,
        TransmitMode::Stochastic { seed, stream } => TransmitMode::Stochastic {
            seed,
            stream: stream.wrapping_add(sample_id << 20),
        },
    };
    schedule_uplinks(&uplinks, &infra.network, &infra.energy, mode)
        .into_iter()
        .filter(|del| del.result.delivered)
        .map(|del| {
            let d = del.device_id;
            let transfer = ns(del.arrival_s - secs(ready[d]));
            Upload {
                device: d,
                ready: ready[d],
                arrival: ready[d] + transfer + ns(faults.extra_delay_s(sample_id, d)),
                energy_j: del.result.energy_j,
                wire_bytes: wire_bytes[d] as u64,
            }
        })
        .collect()
}

fn encoder_time_s(weights: &ModelWeights, infra: &InfraConfig) -> Vec<f64> {
    infra
        .partition
        .slices()
        .iter()
        .map(|cols| infra.compute.edge_s(cost::encoder_macs(&weights.config, cols.len())))
        .collect()
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Arrival { device: usize, copy: u8 },
    Deadline,
    Complete,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    at: Nanos,
    sample: u64,
    kind: EventKind,
}

struct Release {
    collected: Collected,
    at: Nanos,
}

/// EPIC on the virtual clock.
pub(crate) fn run_epic(
    samples: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    faults: &FaultPlan,
) -> Result<(Vec<Option<VelocityMap>>, RunReport)> {
    let c = &weights.config;
    let n = infra.n_devices;
    let slices = infra.partition.slices();

    // Edge encoding is independent of timing, so run it up front.
    let jobs: Vec<(usize, usize)> = (0..samples.len())
        .flat_map(|s| (0..n).map(move |d| (s, d)))
        .filter(|&(s, d)| !faults.is_dropped(s as u64, d))
        .collect();
    let encoded: Vec<((usize, usize), Vec<u8>)> = jobs
        .par_iter()
        .map(|&(s, d)| -> Result<_> {
            let slice = slice_receivers(&samples[s], slices[d].clone())?;
            let latent = encode(&slice, &weights.encoders[d], d, s as u64)?;
            let frame = Frame::new(FrameKind::Latent, s as u64, d as u16, latent.to_payload());
            Ok(((s, d), frame.encode()?))
        })
        .collect::<Result<_>>()?;
    let mut wire: Vec<Vec<Option<Vec<u8>>>> = vec![vec![None; n]; samples.len()];
    for ((s, d), bytes) in encoded {
        wire[s][d] = Some(bytes);
    }

    let edge_s = encoder_time_s(weights, infra);
    let frame_len = vec![c.latent_bytes() + crate::netem::FRAME_OVERHEAD; n];
    let interval = ns(infra.interval_s());
    let window = ns(infra.deadline_s).saturating_sub(ns(infra.decoder_time_s));
    let mut device_free = vec![0; n];
    let mut heap = BinaryHeap::new();
    let mut uploads = Vec::with_capacity(samples.len());
    for s in 0..samples.len() {
        let sid = s as u64;
        let release = sid * interval;
        let ups = edge_and_link(sid, release, &edge_s, &frame_len, infra, faults, &mut device_free);
        for u in &ups {
            heap.push(Reverse(Event { at: u.arrival, sample: sid, kind: EventKind::Arrival { device: u.device, copy: 0 } }));
            if let Some(&after) = faults.duplicates.get(&(sid, u.device)) {
                heap.push(Reverse(Event {
                    at: u.arrival + ns(after),
                    sample: sid,
                    kind: EventKind::Arrival { device: u.device, copy: 1 },
                }));
            }
        }
        heap.push(Reverse(Event { at: release + window, sample: sid, kind: EventKind::Deadline }));
        uploads.push(ups);
    }

    let mut buffer = HashBuffer::new(n, c.latent_dim);
    let mut releases: Vec<Option<Release>> = (0..samples.len()).map(|_| None).collect();
    let mut central_free: Nanos = 0;
    let mut decode_end = vec![0; samples.len()];
    while let Some(Reverse(ev)) = heap.pop() {
        let s = ev.sample as usize;
        let deadline = ev.sample * interval + window;
        let collected = match ev.kind {
            EventKind::Arrival { device, .. } => {
                let bytes = wire[s][device].as_ref().expect("arrivals come from sent frames");
                let (frame, _) = decode_frame(bytes)?;
                match buffer.insert(&frame, ev.at)? {
                    InsertOutcome::Inserted { complete: true } => buffer.try_collect(ev.sample, ev.at, deadline),
                    _ => None,
                }
            }
            EventKind::Deadline => buffer.try_collect(ev.sample, ev.at, deadline),
            EventKind::Complete => {
                buffer.complete(ev.sample);
                None
            }
        };
        if let Some(collected) = collected {
            let present = collected.latents.present();
            let busy = if present == 0 {
                0
            } else {
                ns(infra.compute.central_s(cost::reconstruct_macs(c, present)))
            };
            let start = ev.at.max(central_free);
            central_free = start + busy;
            decode_end[s] = central_free;
            heap.push(Reverse(Event { at: central_free, sample: ev.sample, kind: EventKind::Complete }));
            releases[s] = Some(Release { collected, at: ev.at });
        }
    }

    let outputs: Vec<std::result::Result<VelocityMap, ModelError>> = releases
        .par_iter()
        .map(|r| {
            let r = r.as_ref().expect("every sample has a deadline event");
            if r.collected.latents.is_empty() {
                Err(ModelError::EmptySupport)
            } else {
                reconstruct(&r.collected.latents, weights)
            }
        })
        .collect();

    let mut report = RunReport::new(PipelineMode::Epic, n, infra.deadline_s, infra.decoder_time_s);
    let mut maps = Vec::with_capacity(samples.len());
    for (s, out) in outputs.into_iter().enumerate() {
        let release = s as u64 * interval;
        let r = releases[s].take().unwrap();
        let ups = &uploads[s];
        let received: Vec<&Upload> = ups.iter().filter(|u| r.collected.mask[u.device]).collect();
        let l_total = decode_end[s] - release;
        let failure = out.as_ref().err().map(|e| e.to_string());
        report.samples.push(SampleReport {
            sample_id: s as u64,
            l_edge_s: secs(ups.iter().map(|u| u.ready - release).max().unwrap_or(0)),
            l_comm_s: secs(received.iter().map(|u| u.arrival - u.ready).max().unwrap_or(0)),
            l_central_s: secs(decode_end[s] - r.at),
            l_total_s: secs(l_total),
            energy_j: ups.iter().map(|u| u.energy_j).sum(),
            comm_bytes: ups.iter().map(|u| u.wire_bytes).sum(),
            mask: r.collected.mask,
            timed_out: r.collected.timed_out,
            deadline_met: l_total <= ns(infra.deadline_s),
            failure,
            ssim: None,
        });
        maps.push(out.ok());
    }
    report.absorb(buffer.stats());
    Ok((maps, report))
}

fn f32_payload(t: &Tensor) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn f32_from_payload(bytes: &[u8], dims: Vec<usize>) -> Result<Tensor> {
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Tensor::new(dims, data)?)
}

/// Baseline pipelines: no deadline, the central node waits for every
/// delivering device.
pub(crate) fn run_baseline(
    mode: PipelineMode,
    samples: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    faults: &FaultPlan,
) -> Result<(Vec<Option<VelocityMap>>, RunReport)> {
    let c = &weights.config;
    let n = infra.n_devices;
    let slices = infra.partition.slices();
    let (rows, _) = c.output_dims;
    let (edge_s, payload_len, central_s): (Vec<f64>, Vec<usize>, f64) = match mode {
        PipelineMode::Centralized => {
            let encoders: u64 = slices.iter().map(|s| cost::encoder_macs(c, s.len())).sum();
            let total = encoders + cost::sla_merge_macs(c) + cost::plain_decode_macs(c);
            (
                vec![0.0; n],
                slices.iter().map(|s| 4 * c.n_sources * c.n_timesteps * s.len()).collect(),
                infra.compute.central_s(total),
            )
        }
        PipelineMode::Fla => (
            slices
                .iter()
                .map(|s| infra.compute.edge_s(cost::encoder_macs(c, s.len()) + cost::plain_decode_macs(c)))
                .collect(),
            slices.iter().map(|s| 4 * rows * s.len()).collect(),
            0.0,
        ),
        PipelineMode::Sla => {
            let total = cost::sla_merge_macs(c) + cost::plain_decode_macs(c);
            (
                encoder_time_s(weights, infra),
                vec![c.latent_bytes(); n],
                infra.compute.central_s(total),
            )
        }
        PipelineMode::Epic => return run_epic(samples, weights, infra, faults),
    };
    let wire_len: Vec<usize> = payload_len.iter().map(|p| p + crate::netem::FRAME_OVERHEAD).collect();
    let interval = ns(infra.interval_s());
    let mut device_free = vec![0; n];
    let mut central_free: Nanos = 0;
    let mut timing = Vec::with_capacity(samples.len());
    for s in 0..samples.len() as u64 {
        let release = s * interval;
        let ups = edge_and_link(s, release, &edge_s, &wire_len, infra, faults, &mut device_free);
        let collected = ups.iter().map(|u| u.arrival).max().unwrap_or(release);
        let start = collected.max(central_free);
        let busy = if ups.is_empty() { 0 } else { ns(central_s) };
        central_free = start + busy;
        timing.push((ups, collected, central_free));
    }

    let outputs: Vec<std::result::Result<VelocityMap, ModelError>> = timing
        .par_iter()
        .enumerate()
        .map(|(s, (ups, _, _))| -> std::result::Result<VelocityMap, ModelError> {
            let mut mask = vec![false; n];
            for u in ups {
                mask[u.device] = true;
            }
            // Payloads take the same wire path as EPIC latents.
            let through_wire = |d: usize, kind: FrameKind, payload: Vec<u8>| -> std::result::Result<Vec<u8>, ModelError> {
                let bytes = Frame::new(kind, s as u64, d as u16, payload)
                    .encode()
                    .map_err(|e| ModelError::InvalidInput(e.to_string()))?;
                let (frame, _) = decode_frame(&bytes).map_err(|e| ModelError::InvalidInput(e.to_string()))?;
                Ok(frame.payload)
            };
            match mode {
                PipelineMode::Centralized => {
                    let mut received = Vec::with_capacity(n);
                    for d in 0..n {
                        received.push(if mask[d] {
                            let slice = slice_receivers(&samples[s], slices[d].clone())?;
                            let payload = through_wire(d, FrameKind::Raw, f32_payload(&slice))?;
                            Some(
                                f32_from_payload(&payload, slice.dims().to_vec())
                                    .map_err(|e| ModelError::InvalidInput(e.to_string()))?,
                            )
                        } else {
                            None
                        });
                    }
                    let refs: Vec<Option<&Tensor>> = received.iter().map(Option::as_ref).collect();
                    centralized_reconstruct(&refs, weights, &infra.partition)
                }
                PipelineMode::Fla => {
                    let mut spans = Vec::with_capacity(n);
                    for d in 0..n {
                        spans.push(if mask[d] {
                            let slice = slice_receivers(&samples[s], slices[d].clone())?;
                            let cols = fla_device_columns(&slice, d, weights, &infra.partition)?;
                            let payload = through_wire(d, FrameKind::Raw, f32_payload(&cols))?;
                            Some(
                                f32_from_payload(&payload, cols.dims().to_vec())
                                    .map_err(|e| ModelError::InvalidInput(e.to_string()))?,
                            )
                        } else {
                            None
                        });
                    }
                    fla_assemble(&spans, weights, &infra.partition)
                }
                _ => {
                    let mut set = LatentSet::new(n);
                    for d in (0..n).filter(|&d| mask[d]) {
                        let slice = slice_receivers(&samples[s], slices[d].clone())?;
                        let latent = encode(&slice, &weights.encoders[d], d, s as u64)?;
                        let payload = through_wire(d, FrameKind::Latent, latent.to_payload())?;
                        set.insert(LatentVector::from_payload(&payload, d, s as u64)?)?;
                    }
                    sla_reconstruct(&set, weights)
                }
            }
        })
        .collect();

    let mut report = RunReport::new(mode, n, infra.deadline_s, 0.0);
    let mut maps = Vec::with_capacity(samples.len());
    for (s, (out, (ups, collected, end))) in outputs.into_iter().zip(timing).enumerate() {
        let release = s as u64 * interval;
        let mut mask = vec![false; n];
        for u in &ups {
            mask[u.device] = true;
        }
        let l_total = end - release;
        report.samples.push(SampleReport {
            sample_id: s as u64,
            l_edge_s: secs(ups.iter().map(|u| u.ready - release).max().unwrap_or(0)),
            l_comm_s: secs(ups.iter().map(|u| u.arrival - u.ready).max().unwrap_or(0)),
            l_central_s: secs(end - collected),
            l_total_s: secs(l_total),
            energy_j: ups.iter().map(|u| u.energy_j).sum(),
            comm_bytes: ups.iter().map(|u| u.wire_bytes).sum(),
            mask,
            timed_out: false,
            deadline_met: l_total <= ns(infra.deadline_s),
            failure: out.as_ref().err().map(|e| e.to_string()),
            ssim: None,
        });
        maps.push(out.ok());
    }
    Ok((maps, report))
}
