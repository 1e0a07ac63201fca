//! Wall-clock execution over loopback or LAN stream sockets.

use std::net::TcpListener;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::buffer::{Nanos, SharedBuffer};
use super::sim::{ns, secs};
use super::{FaultPlan, InfraConfig, PipelineMode, Result, RunReport, RuntimeError, SampleReport};
use crate::epicnet::{encode, reconstruct, slice_receivers, ModelWeights, VelocityMap};
use crate::netem::{connect, transmit, Frame, FrameKind, FrameReader, TransmitMode};
use crate::numerics::Tensor;

fn sleep_until(epoch: Instant, at: Nanos) {
    let target = epoch + Duration::from_nanos(at);
    let now = Instant::now();
    if target > now {
        thread::sleep(target - now);
    }
}

struct Sent {
    encode_ns: Nanos,
    wire_bytes: u64,
}

pub(crate) fn run_epic(
    samples: &[Tensor],
    weights: &ModelWeights,
    infra: &InfraConfig,
    faults: &FaultPlan,
) -> Result<(Vec<Option<VelocityMap>>, RunReport)> {
    let n = infra.n_devices;
    let c = &weights.config;
    let listener = TcpListener::bind((infra.socket.central_addr.as_str(), infra.socket.port))?;
    let addr = listener.local_addr()?;
    let interval = ns(infra.interval_s());
    let window = ns(infra.deadline_s).saturating_sub(ns(infra.decoder_time_s));
    let epoch = Instant::now();
    let buffer = SharedBuffer::new(n, c.latent_dim, epoch);
    let reader_errors = Mutex::new(Vec::<String>::new());

    let (maps, mut rows, sent) = thread::scope(|scope| -> Result<_> {
        let buffer = &buffer;
        let reader_errors = &reader_errors;
        let acceptor = scope.spawn(move || -> Result<()> {
            for _ in 0..n {
                let (stream, _) = listener.accept()?;
                scope.spawn(move || {
                    for frame in FrameReader::new(stream) {
                        let result = frame
                            .map_err(RuntimeError::from)
                            .and_then(|f| buffer.insert(&f).map(|_| ()));
                        if let Err(e) = result {
                            reader_errors.lock().unwrap().push(e.to_string());
                        }
                    }
                });
            }
            Ok(())
        });

        let edges: Vec<_> = (0..n)
            .map(|d| {
                let cols = infra.partition.slices()[d].clone();
                scope.spawn(move || -> Result<Vec<Option<Sent>>> {
                    let mut link = connect(addr)?;
                    let mut sent = Vec::with_capacity(samples.len());
                    for (s, wave) in samples.iter().enumerate() {
                        let sid = s as u64;
                        sleep_until(epoch, sid * interval);
                        if faults.is_dropped(sid, d) {
                            sent.push(None);
                            continue;
                        }
                        let t0 = Instant::now();
                        let slice = slice_receivers(wave, cols.clone())?;
                        let latent = encode(&slice, &weights.encoders[d], d, sid)?;
                        let encode_ns = t0.elapsed().as_nanos() as Nanos;
                        let frame = Frame::new(FrameKind::Latent, sid, d as u16, latent.to_payload());
                        let extra = faults.extra_delay_s(sid, d);
                        if extra > 0.0 {
                            thread::sleep(Duration::from_secs_f64(extra));
                        }
                        link.send(&frame)?;
                        if let Some(&after) = faults.duplicates.get(&(sid, d)) {
                            thread::sleep(Duration::from_secs_f64(after));
                            link.send(&frame)?;
                        }
                        sent.push(Some(Sent { encode_ns, wire_bytes: frame.wire_len() as u64 }));
                    }
                    Ok(sent)
                })
            })
            .collect();

        let mut maps = Vec::with_capacity(samples.len());
        let mut rows = Vec::with_capacity(samples.len());
        for s in 0..samples.len() as u64 {
            let release = s * interval;
            let deadline = release + window;
            let collected = buffer
                .collect_blocking(s, deadline)
                .ok_or_else(|| RuntimeError::Config(format!("sample {s} collected twice")))?;
            let at = buffer.now();
            let out = if collected.latents.is_empty() {
                Err(crate::epicnet::Error::EmptySupport)
            } else {
                reconstruct(&collected.latents, weights)
            };
            let end = buffer.now();
            buffer.complete(s);
            rows.push((collected, at, end, out.as_ref().err().map(|e| e.to_string())));
            maps.push(out.ok());
        }

        let mut sent = Vec::with_capacity(n);
        for e in edges {
            sent.push(e.join().map_err(|_| RuntimeError::Config("edge worker panicked".into()))??);
        }
        acceptor.join().map_err(|_| RuntimeError::Config("acceptor panicked".into()))??;
        Ok((maps, rows, sent))
    })?;

    let mut report = RunReport::new(PipelineMode::Epic, n, infra.deadline_s, infra.decoder_time_s);
    for (s, (collected, at, end, failure)) in rows.drain(..).enumerate() {
        let release = s as u64 * interval;
        let per_device: Vec<(usize, &Sent)> =
            (0..n).filter_map(|d| sent[d][s].as_ref().map(|x| (d, x))).collect();
        let l_comm = collected
            .arrivals
            .iter()
            .filter_map(|(&d, &arrived)| {
                sent[d][s].as_ref().map(|x| arrived.saturating_sub(release + x.encode_ns))
            })
            .max()
            .unwrap_or(0);
        let energy = per_device
            .iter()
            .map(|(_, x)| transmit(x.wire_bytes as usize, &infra.network, &infra.energy, TransmitMode::Expected).energy_j)
            .sum();
        let l_total = end.saturating_sub(release);
        report.samples.push(SampleReport {
            sample_id: s as u64,
            l_edge_s: secs(per_device.iter().map(|(_, x)| x.encode_ns).max().unwrap_or(0)),
            l_comm_s: secs(l_comm),
            l_central_s: secs(end - at),
            l_total_s: secs(l_total),
            energy_j: energy,
            comm_bytes: per_device.iter().map(|(_, x)| x.wire_bytes).sum(),
            mask: collected.mask,
            timed_out: collected.timed_out,
            deadline_met: l_total <= ns(infra.deadline_s),
            failure,
            ssim: None,
        });
    }
    report.absorb(buffer.stats());
    if let Some(e) = reader_errors.into_inner().unwrap().into_iter().next() {
        return Err(RuntimeError::Protocol(e));
    }
    Ok((maps, report))
}
