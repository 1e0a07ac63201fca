use std::collections::BTreeMap;
use std::ops::Range;

use super::{Error, Result};
use crate::numerics::Tensor;

/// Feature vector produced by one edge encoder for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    pub values: Tensor,
    pub device_id: usize,
    pub sample_id: u64,
}

impl LatentVector {
    pub fn new(values: Tensor, device_id: usize, sample_id: u64) -> Result<Self> {
        if values.ndim() != 1 {
            return Err(Error::InvalidInput(format!(
                "latent must be a vector, got extents {:?}",
                values.dims()
            )));
        }
        if !values.is_finite() {
            return Err(Error::InvalidInput("latent contains non-finite values".into()));
        }
        Ok(Self {
            values,
            device_id,
            sample_id,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Little-endian `f32` wire payload.
    pub fn to_payload(&self) -> Vec<u8> {
        self.values.data().iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_payload(payload: &[u8], device_id: usize, sample_id: u64) -> Result<Self> {
        if payload.is_empty() || !payload.len().is_multiple_of(4) {
            return Err(Error::InvalidInput(format!(
                "latent payload of {} bytes is not a whole number of f32 values",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        Self::new(Tensor::new(vec![data.len()], data)?, device_id, sample_id)
    }
}

/// Latents received for one sample, keyed by device.
///
/// The presence mask is derived from the entries, so it can never disagree
/// with them.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSet {
    n_devices: usize,
    entries: BTreeMap<usize, LatentVector>,
}

impl LatentSet {
    pub fn new(n_devices: usize) -> Self {
        Self {
            n_devices,
            entries: BTreeMap::new(),
        }
    }

    pub fn from_latents(n_devices: usize, latents: impl IntoIterator<Item = LatentVector>) -> Result<Self> {
        let mut set = Self::new(n_devices);
        for l in latents {
            set.insert(l)?;
        }
        Ok(set)
    }

    /// Adds a latent; rejects out-of-range devices, duplicates and length changes.
    pub fn insert(&mut self, latent: LatentVector) -> Result<()> {
        if latent.device_id >= self.n_devices {
            return Err(Error::InvalidInput(format!(
                "device {} outside [0, {})",
                latent.device_id, self.n_devices
            )));
        }
        if let Some(first) = self.entries.values().next() {
            if first.len() != latent.len() {
                return Err(Error::InvalidInput(format!(
                    "latent length {} differs from {}",
                    latent.len(),
                    first.len()
                )));
            }
        }
        if self.entries.contains_key(&latent.device_id) {
            return Err(Error::InvalidInput(format!(
                "device {} already present",
                latent.device_id
            )));
        }
        self.entries.insert(latent.device_id, latent);
        Ok(())
    }

    pub fn remove(&mut self, device_id: usize) -> Option<LatentVector> {
        self.entries.remove(&device_id)
    }

    pub fn n_devices(&self) -> usize {
        self.n_devices
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.n_devices).map(|d| self.entries.contains_key(&d)).collect()
    }

    pub fn present(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, device_id: usize) -> Option<&LatentVector> {
        self.entries.get(&device_id)
    }

    /// Present latents in device order.
    pub fn iter(&self) -> impl Iterator<Item = &LatentVector> {
        self.entries.values()
    }

    /// Keep only devices whose `keep` flag is set.
    pub fn restricted(&self, keep: &[bool]) -> Self {
        Self {
            n_devices: self.n_devices,
            entries: self
                .entries
                .iter()
                .filter(|(d, _)| keep.get(**d).copied().unwrap_or(false))
                .map(|(d, l)| (*d, l.clone()))
                .collect(),
        }
    }
}

/// Reconstructed subsurface velocities in m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMap {
    values: Tensor,
}

impl VelocityMap {
    pub fn new(values: Tensor, range: (f32, f32)) -> Result<Self> {
        if values.ndim() != 2 {
            return Err(Error::InvalidInput(format!(
                "velocity map must be 2-D, got {:?}",
                values.dims()
            )));
        }
        if let Some(v) = values.data().iter().find(|v| !(range.0..=range.1).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "velocity {v} outside [{}, {}]",
                range.0, range.1
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_tensor(self) -> Tensor {
        self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.values.dims()[0], self.values.dims()[1])
    }

    /// Columns `cols` of this map as a `[rows, cols.len()]` tensor.
    pub fn columns(&self, cols: Range<usize>) -> Tensor {
        let (h, w) = self.dims();
        let mut out = Vec::with_capacity(h * cols.len());
        for r in 0..h {
            out.extend_from_slice(&self.values.data()[r * w + cols.start..r * w + cols.end]);
        }
        Tensor::new(vec![h, cols.len()], out).expect("non-empty column range")
    }
}

/// Contiguous, disjoint receiver slices covering `[0, n_receivers)`, one per device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    slices: Vec<Range<usize>>,
}

impl Partition {
    pub fn new(slices: Vec<Range<usize>>, n_receivers: usize) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::Partition("partition has no slices".into()));
        }
        let mut next = 0;
        for (i, s) in slices.iter().enumerate() {
            if s.start != next {
                return Err(Error::Partition(format!(
                    "slice {i} starts at {} but previous ended at {next}",
                    s.start
                )));
            }
            if s.end <= s.start {
                return Err(Error::Partition(format!("slice {i} ({s:?}) is empty")));
            }
            next = s.end;
        }
        if next != n_receivers {
            return Err(Error::Partition(format!(
                "slices end at {next}, expected {n_receivers}"
            )));
        }
        Ok(Self { slices })
    }

    /// Near-equal contiguous slices; the first `n_receivers % n_devices` are one wider.
    pub fn even(n_receivers: usize, n_devices: usize) -> Result<Self> {
        if n_devices == 0 || n_devices > n_receivers {
            return Err(Error::Partition(format!(
                "cannot split {n_receivers} receivers over {n_devices} devices"
            )));
        }
        let base = n_receivers / n_devices;
        let extra = n_receivers % n_devices;
        let mut start = 0;
        let slices = (0..n_devices)
            .map(|i| {
                let w = base + usize::from(i < extra);
                let r = start..start + w;
                start += w;
                r
            })
            .collect();
        Self::new(slices, n_receivers)
    }

    pub fn slices(&self) -> &[Range<usize>] {
        &self.slices
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn n_receivers(&self) -> usize {
        self.slices.last().map_or(0, |s| s.end)
    }
}

/// Receiver columns `cols` of a `[sources, time, receivers]` waveform.
pub fn slice_receivers(waveform: &Tensor, cols: Range<usize>) -> Result<Tensor> {
    if waveform.ndim() != 3 || cols.end > waveform.dims()[2] || cols.is_empty() {
        return Err(Error::Partition(format!(
            "cannot take receivers {cols:?} of waveform {:?}",
            waveform.dims()
        )));
    }
    let (s, t, r) = (waveform.dims()[0], waveform.dims()[1], waveform.dims()[2]);
    let mut out = Vec::with_capacity(s * t * cols.len());
    for row in waveform.data().chunks_exact(r) {
        out.extend_from_slice(&row[cols.clone()]);
    }
    Ok(Tensor::new(vec![s, t, cols.len()], out)?)
}

/// Inverse of [`slice_receivers`] over a whole partition; `None` slices become zeros.
pub fn assemble_receivers(slices: &[Option<&Tensor>], partition: &Partition, sources: usize, timesteps: usize) -> Result<Tensor> {
    let r = partition.n_receivers();
    let mut out = vec![0.0f32; sources * timesteps * r];
    for (slice, cols) in slices.iter().zip(partition.slices()) {
        let Some(slice) = slice else { continue };
        if slice.dims() != [sources, timesteps, cols.len()] {
            return Err(Error::Partition(format!(
                "slice extents {:?} do not fit receivers {cols:?}",
                slice.dims()
            )));
        }
        for (row, src) in slice.data().chunks_exact(cols.len()).enumerate() {
            out[row * r + cols.start..row * r + cols.end].copy_from_slice(src);
        }
    }
    Ok(Tensor::new(vec![sources, timesteps, r], out)?)
}
