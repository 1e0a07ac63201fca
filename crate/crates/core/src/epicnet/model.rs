use super::attention::{cross_attention, fuse, AttentionMap};
use super::{
    assemble_receivers, slice_receivers, Conv, EncoderWeights, Error, LatentSet, LatentVector,
    ModelWeights, Partition, Result, VelocityMap,
};
use crate::numerics::{self, Tensor, LEAKY_SLOPE};

fn conv_block(x: &Tensor, conv: &Conv, stride: (usize, usize)) -> Result<Tensor> {
    let mut y = numerics::conv2d(x, &conv.kernel, &conv.bias, stride, (1, 1))?;
    numerics::leaky_relu_inplace(&mut y, LEAKY_SLOPE)?;
    Ok(y)
}

/// Run one device's encoder over its `[sources, time, receivers]` slice.
///
/// Every block is a 3x3 convolution with time stride 2 (receiver stride 2
/// while the slice is wider than 4) and leaky ReLU; a global average pool
/// reduces the final map to the latent vector.
pub fn encode(slice: &Tensor, encoder: &EncoderWeights, device_id: usize, sample_id: u64) -> Result<LatentVector> {
    if slice.ndim() != 3 || slice.dims()[2] == 0 {
        return Err(Error::InvalidInput(format!(
            "encoder input must be [sources, time, receivers], got {:?}",
            slice.dims()
        )));
    }
    let first = encoder.blocks.first().ok_or_else(|| Error::Config("encoder has no blocks".into()))?;
    if first.kernel.dims()[1] != slice.dims()[0] {
        return Err(Error::InvalidInput(format!(
            "slice has {} sources, encoder expects {}",
            slice.dims()[0],
            first.kernel.dims()[1]
        )));
    }
    if !slice.is_finite() {
        return Err(Error::InvalidInput("waveform slice contains non-finite values".into()));
    }
    let mut x = conv_block(slice, first, (2, if slice.dims()[2] > 4 { 2 } else { 1 }))?;
    for block in &encoder.blocks[1..] {
        let sw = if x.dims()[2] > 4 { 2 } else { 1 };
        x = conv_block(&x, block, (2, sw))?;
    }
    let pooled = numerics::global_avg_pool(&x)?;
    let d = pooled.dims()[0];
    LatentVector::new(pooled.reshape(vec![d])?, device_id, sample_id)
}

/// Encode every slice of `partition` in device order.
pub fn encode_all(waveform: &Tensor, weights: &ModelWeights, partition: &Partition, sample_id: u64) -> Result<LatentSet> {
    check_partition(weights, partition)?;
    let mut set = LatentSet::new(partition.len());
    for (i, cols) in partition.slices().iter().enumerate() {
        let slice = slice_receivers(waveform, cols.clone())?;
        set.insert(encode(&slice, &weights.encoders[i], i, sample_id)?)?;
    }
    Ok(set)
}

fn check_partition(weights: &ModelWeights, partition: &Partition) -> Result<()> {
    let c = &weights.config;
    if partition.len() != c.n_devices || partition.n_receivers() != c.n_receivers {
        return Err(Error::Partition(format!(
            "partition of {} slices over {} receivers does not match model ({} devices, {} receivers)",
            partition.len(),
            partition.n_receivers(),
            c.n_devices,
            c.n_receivers
        )));
    }
    Ok(())
}

fn seed_map(vector: &Tensor, weights: &ModelWeights) -> Result<Tensor> {
    let c = &weights.config;
    let (h0, w0) = c.decoder_resolutions[0];
    let mut x = weights
        .decoder
        .seed
        .apply(vector)?
        .reshape(vec![c.decoder_channels[0], h0, w0])?;
    numerics::leaky_relu_inplace(&mut x, LEAKY_SLOPE)?;
    Ok(x)
}

/// `v_min + (tanh(x) + 1) / 2 * (v_max - v_min)` over the single-channel head output.
fn squash(x: &Tensor, range: (f32, f32)) -> Result<VelocityMap> {
    let (lo, hi) = (range.0 as f64, range.1 as f64);
    let (h, w) = (x.dims()[1], x.dims()[2]);
    let data = x
        .data()
        .iter()
        .map(|&v| (lo + ((v as f64).tanh() + 1.0) * 0.5 * (hi - lo)).clamp(lo, hi) as f32)
        .collect();
    VelocityMap::new(Tensor::new(vec![h, w], data)?, range)
}

fn run_decoder(vector: &Tensor, weights: &ModelWeights, latents: Option<&LatentSet>) -> Result<(VelocityMap, Vec<AttentionMap>)> {
    let c = &weights.config;
    if vector.len() != c.latent_dim {
        return Err(Error::InvalidInput(format!(
            "decoder input has length {}, expected {}",
            vector.len(),
            c.latent_dim
        )));
    }
    let mut x = seed_map(vector, weights)?;
    let mut maps = Vec::new();
    for (block, &res) in weights.decoder.blocks.iter().zip(&c.decoder_resolutions[1..]) {
        x = conv_block(&numerics::nearest_resize(&x, res)?, &block.conv, (1, 1))?;
        if let Some(set) = latents {
            let (y, map) = cross_attention(&x, &weights.pos_embed, set, &block.attention)?;
            x = y;
            maps.push(map);
        }
    }
    let head = numerics::conv2d(&x, &weights.decoder.head.kernel, &weights.decoder.head.bias, (1, 1), (1, 1))?;
    Ok((squash(&head, c.velocity_range)?, maps))
}

/// Decode the global latent with cross-attention over the received latents.
pub fn decode(gl: &Tensor, latents: &LatentSet, weights: &ModelWeights) -> Result<VelocityMap> {
    decode_traced(gl, latents, weights).map(|(m, _)| m)
}

/// [`decode`] that also returns the attention weights of every block.
pub fn decode_traced(gl: &Tensor, latents: &LatentSet, weights: &ModelWeights) -> Result<(VelocityMap, Vec<AttentionMap>)> {
    if latents.is_empty() {
        return Err(Error::EmptySupport);
    }
    run_decoder(gl, weights, Some(latents))
}

/// Decoder without cross-attention, seeded by a single latent-sized vector.
pub fn decode_plain(vector: &Tensor, weights: &ModelWeights) -> Result<VelocityMap> {
    run_decoder(vector, weights, None).map(|(m, _)| m)
}

/// Central stage: fuse the received latents and decode.
pub fn reconstruct(latents: &LatentSet, weights: &ModelWeights) -> Result<VelocityMap> {
    let gl = fuse(latents, &weights.fusion)?;
    decode(&gl, latents, weights)
}

/// Whole distributed model in one process: encode each slice in device order, fuse, decode.
pub fn forward_full(waveform: &Tensor, weights: &ModelWeights, partition: &Partition) -> Result<VelocityMap> {
    let set = encode_all(waveform, weights, partition, 0)?;
    reconstruct(&set, weights)
}

/// Split-learning baseline: concatenate latents (absent devices as zeros),
/// merge to one latent and decode without cross-attention.
pub fn sla_reconstruct(latents: &LatentSet, weights: &ModelWeights) -> Result<VelocityMap> {
    if latents.is_empty() {
        return Err(Error::EmptySupport);
    }
    let d = weights.config.latent_dim;
    let merged = match &weights.sla_merge {
        None => latents.iter().next().unwrap().values.clone(),
        Some(merge) => {
            let mut cat = vec![0.0f32; latents.n_devices() * d];
            for l in latents.iter() {
                cat[l.device_id * d..][..d].copy_from_slice(l.values.data());
            }
            merge.apply(&Tensor::new(vec![cat.len()], cat)?)?
        }
    };
    decode_plain(&merged, weights)
}

/// Centralized baseline: the central node reassembles the raw slices
/// (missing ones as zeros) and runs the split-learning network itself.
pub fn centralized_reconstruct(slices: &[Option<&Tensor>], weights: &ModelWeights, partition: &Partition) -> Result<VelocityMap> {
    if slices.iter().all(Option::is_none) {
        return Err(Error::EmptySupport);
    }
    let c = &weights.config;
    let full = assemble_receivers(slices, partition, c.n_sources, c.n_timesteps)?;
    let set = encode_all(&full, weights, partition, 0)?;
    sla_reconstruct(&set, weights)
}

/// Federated baseline, edge side: a full encoder-decoder on one slice,
/// returning the map columns that belong to this device.
pub fn fla_device_columns(slice: &Tensor, device_id: usize, weights: &ModelWeights, partition: &Partition) -> Result<Tensor> {
    check_partition(weights, partition)?;
    let enc = weights
        .encoders
        .get(device_id)
        .ok_or_else(|| Error::InvalidInput(format!("no encoder for device {device_id}")))?;
    let latent = encode(slice, enc, device_id, 0)?;
    let map = decode_plain(&latent.values, weights)?;
    let cols = partition.slices()[device_id].clone();
    if cols.end > map.dims().1 {
        return Err(Error::Partition(format!(
            "receiver span {cols:?} exceeds map width {}",
            map.dims().1
        )));
    }
    Ok(map.columns(cols))
}

/// Federated baseline, central side: stitch column spans; missing spans take the mid-range velocity.
pub fn fla_assemble(spans: &[Option<Tensor>], weights: &ModelWeights, partition: &Partition) -> Result<VelocityMap> {
    if spans.iter().all(Option::is_none) {
        return Err(Error::EmptySupport);
    }
    let c = &weights.config;
    let (h, w) = c.output_dims;
    let fill = 0.5 * (c.velocity_range.0 + c.velocity_range.1);
    let mut out = vec![fill; h * w];
    for (span, cols) in spans.iter().zip(partition.slices()) {
        let Some(span) = span else { continue };
        if span.dims() != [h, cols.len()] {
            return Err(Error::InvalidInput(format!(
                "span extents {:?} do not fit columns {cols:?}",
                span.dims()
            )));
        }
        for r in 0..h {
            out[r * w + cols.start..r * w + cols.end].copy_from_slice(&span.data()[r * cols.len()..][..cols.len()]);
        }
    }
    VelocityMap::new(Tensor::new(vec![h, w], out)?, c.velocity_range)
}
