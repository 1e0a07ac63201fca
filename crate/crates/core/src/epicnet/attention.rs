use super::{CrossAttentionWeights, Error, FusionWeights, LatentSet, Result};
use crate::numerics::{self, Tensor};

/// Attention weights of one decoder block, laid out `[head][pixel][device]`.
///
/// Absent devices carry weight exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub height: usize,
    pub width: usize,
    pub n_heads: usize,
    pub n_devices: usize,
    pub weights: Vec<f32>,
}

impl AttentionMap {
    pub fn row(&self, head: usize, pixel: usize) -> &[f32] {
        let o = (head * self.height * self.width + pixel) * self.n_devices;
        &self.weights[o..o + self.n_devices]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.weights.chunks_exact(self.n_devices)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Stack the present latents of `set` as `[m, d]` rows, in device order.
fn token_matrix(set: &LatentSet) -> Result<Tensor> {
    let d = set.iter().next().ok_or(Error::EmptySupport)?.len();
    let mut data = Vec::with_capacity(set.present() * d);
    for l in set.iter() {
        data.extend_from_slice(l.values.data());
    }
    Ok(Tensor::new(vec![set.present(), d], data)?)
}

/// Self-attention across the present latents followed by a mean-pool of the
/// output tokens, giving the global latent.
pub fn fuse(latents: &LatentSet, w: &FusionWeights) -> Result<Tensor> {
    let tokens = token_matrix(latents)?;
    let m = tokens.dims()[0];
    let d = tokens.dims()[1];
    if w.query.d_in() != d {
        return Err(Error::InvalidInput(format!(
            "latent length {d} does not match fusion width {}",
            w.query.d_in()
        )));
    }
    let q = w.query.apply(&tokens)?;
    let k = w.key.apply(&tokens)?;
    let v = w.value.apply(&tokens)?;
    let dh = d / w.n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut ctx = vec![0.0f32; m * d];
    let mut scores = vec![0.0f32; m];
    let mut alpha = vec![0.0f32; m];
    for i in 0..m {
        for h in 0..w.n_heads {
            let hs = h * dh..(h + 1) * dh;
            let qi = &q.data()[i * d..][hs.clone()];
            for (j, s) in scores.iter_mut().enumerate() {
                *s = (dot(qi, &k.data()[j * d..][hs.clone()]) * scale) as f32;
            }
            numerics::softmax_into(&scores, None, &mut alpha)?;
            for (c, out) in ctx[i * d..][hs.clone()].iter_mut().enumerate() {
                let mut acc = 0.0f64;
                for (j, &a) in alpha.iter().enumerate() {
                    acc += a as f64 * v.data()[j * d + h * dh + c] as f64;
                }
                *out = acc as f32;
            }
        }
    }
    let tokens_out = w.output.apply(&Tensor::new(vec![m, d], ctx)?)?;
    let gl: Vec<f32> = (0..d)
        .map(|c| {
            let s: f64 = (0..m).map(|i| tokens_out.data()[i * d + c] as f64).sum();
            (s / m as f64) as f32
        })
        .collect();
    Ok(Tensor::new(vec![d], gl)?)
}

/// Position-aware cross-attention of decoder features over device latents.
///
/// The query of every pixel comes from its features concatenated with the
/// position embedding resized to the feature grid; keys and values come from
/// the latents. One softmax runs over all present devices, and the weighted
/// values are projected back to the feature channels and added to `features`.
pub fn cross_attention(
    features: &Tensor,
    pos_embed: &Tensor,
    latents: &LatentSet,
    w: &CrossAttentionWeights,
) -> Result<(Tensor, AttentionMap)> {
    features.expect_rank("cross_attention", 3)?;
    if !features.is_finite() {
        return Err(Error::InvalidInput("decoder features contain non-finite values".into()));
    }
    if latents.is_empty() {
        return Err(Error::EmptySupport);
    }
    let (c, h, wd) = (features.dims()[0], features.dims()[1], features.dims()[2]);
    let pixels = h * wd;
    let pos = numerics::bilinear_resize(pos_embed, (h, wd))?;
    let x = numerics::channels_last(&numerics::concat_channels(features, &pos)?)?;
    let q = w.query.apply(&x)?;
    let d_k = q.dims()[1];
    let n = latents.n_devices();
    let mask = latents.mask();

    let mut keys = vec![0.0f32; n * d_k];
    let mut values = vec![0.0f32; n * d_k];
    for l in latents.iter() {
        let kv = w.key.apply(&l.values)?;
        keys[l.device_id * d_k..][..d_k].copy_from_slice(kv.data());
        let vv = w.value.apply(&l.values)?;
        values[l.device_id * d_k..][..d_k].copy_from_slice(vv.data());
    }
    let present: Vec<usize> = latents.iter().map(|l| l.device_id).collect();

    let heads = w.n_heads;
    let dh = d_k / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut weights = vec![0.0f32; heads * pixels * n];
    let mut ctx = vec![0.0f32; pixels * d_k];
    let mut scores = vec![0.0f32; n];
    for p in 0..pixels {
        let qp = &q.data()[p * d_k..][..d_k];
        for hd in 0..heads {
            let hs = hd * dh..(hd + 1) * dh;
            for &i in &present {
                scores[i] = (dot(&qp[hs.clone()], &keys[i * d_k..][hs.clone()]) * scale) as f32;
            }
            let alpha = &mut weights[(hd * pixels + p) * n..][..n];
            numerics::softmax_into(&scores, Some(&mask), alpha)?;
            for (j, out) in ctx[p * d_k..][hs.clone()].iter_mut().enumerate() {
                let mut acc = 0.0f64;
                for &i in &present {
                    acc += alpha[i] as f64 * values[i * d_k + hd * dh + j] as f64;
                }
                *out = acc as f32;
            }
        }
    }
    let projected = w.output.apply(&Tensor::new(vec![pixels, d_k], ctx)?)?;
    if projected.dims()[1] != c {
        return Err(Error::InvalidInput(format!(
            "attention output width {} does not match feature channels {c}",
            projected.dims()[1]
        )));
    }
    let mut out = features.clone();
    let src = projected.data();
    for (ch, plane) in out.data_mut().chunks_exact_mut(pixels).enumerate() {
        for (i, v) in plane.iter_mut().enumerate() {
            *v += src[i * c + ch];
        }
    }
    Ok((
        out,
        AttentionMap {
            height: h,
            width: wd,
            n_heads: heads,
            n_devices: n,
            weights,
        },
    ))
}
