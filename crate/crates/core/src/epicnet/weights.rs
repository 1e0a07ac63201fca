use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Result};
use crate::numerics::{self, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn apply(&self, x: &Tensor) -> numerics::Result<Tensor> {
        numerics::linear(x, &self.weight, &self.bias)
    }

    pub fn d_in(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn d_out(&self) -> usize {
        self.weight.dims()[0]
    }
}

/// 3x3 convolution with its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub kernel: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub blocks: Vec<Conv>,
}

/// Self-attention projections over device latents.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub n_heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

/// Position-aware cross-attention of one decoder block.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttentionWeights {
    pub n_heads: usize,
    /// `[F; E_pos]` channels to `d_k`.
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    /// `d_k` back to the block's feature channels.
    pub output: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock {
    pub conv: Conv,
    pub attention: CrossAttentionWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights {
    /// Latent vector to the seed feature map.
    pub seed: Linear,
    pub blocks: Vec<DecoderBlock>,
    pub head: Conv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub encoders: Vec<EncoderWeights>,
    pub fusion: FusionWeights,
    pub decoder: DecoderWeights,
    /// `[d_pos, out_h, out_w]`.
    pub pos_embed: Tensor,
    /// Concatenated latents to one latent, used by the split-learning baseline when n > 1.
    pub sla_merge: Option<Linear>,
}

/// Supplies each parameter tensor in a fixed structural order.
trait Source {
    fn tensor(&mut self, dims: &[usize], fan_in: usize) -> Tensor;
}

/// Uniform `±sqrt(1/fan_in)`; tensor `i` draws from ChaCha stream `i` of the seed.
struct Uniform {
    seed: u64,
    next_stream: u64,
}

impl Source for Uniform {
    fn tensor(&mut self, dims: &[usize], fan_in: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.next_stream);
        self.next_stream += 1;
        let bound = (1.0 / fan_in as f64).sqrt() as f32;
        Tensor::from_fn(dims, |_| rng.gen_range(-bound..=bound))
    }
}

struct Zeros;

impl Source for Zeros {
    fn tensor(&mut self, dims: &[usize], _: usize) -> Tensor {
        Tensor::zeros(dims)
    }
}

fn linear(src: &mut dyn Source, d_in: usize, d_out: usize) -> Linear {
    Linear {
        weight: src.tensor(&[d_out, d_in], d_in),
        bias: src.tensor(&[d_out], d_in),
    }
}

fn conv(src: &mut dyn Source, c_in: usize, c_out: usize) -> Conv {
    let fan_in = c_in * 9;
    Conv {
        kernel: src.tensor(&[c_out, c_in, 3, 3], fan_in),
        bias: src.tensor(&[c_out], fan_in),
    }
}

fn build(config: &ModelConfig, src: &mut dyn Source) -> ModelWeights {
    let c = config;
    let encoders = (0..c.n_devices)
        .map(|_| {
            let mut c_in = c.n_sources;
            EncoderWeights {
                blocks: c
                    .encoder_channels
                    .iter()
                    .map(|&c_out| {
                        let b = conv(src, c_in, c_out);
                        c_in = c_out;
                        b
                    })
                    .collect(),
            }
        })
        .collect();
    let d = c.latent_dim;
    let fusion = FusionWeights {
        n_heads: c.n_heads,
        query: linear(src, d, d),
        key: linear(src, d, d),
        value: linear(src, d, d),
        output: linear(src, d, d),
    };
    let (h0, w0) = c.decoder_resolutions[0];
    let seed = linear(src, d, c.decoder_channels[0] * h0 * w0);
    let blocks = c
        .decoder_channels
        .windows(2)
        .map(|p| DecoderBlock {
            conv: conv(src, p[0], p[1]),
            attention: CrossAttentionWeights {
                n_heads: c.n_heads,
                query: linear(src, p[1] + c.d_pos, c.d_k),
                key: linear(src, d, c.d_k),
                value: linear(src, d, c.d_k),
                output: linear(src, c.d_k, p[1]),
            },
        })
        .collect();
    let head = conv(src, *c.decoder_channels.last().unwrap(), 1);
    let pos_embed = src.tensor(&[c.d_pos, c.output_dims.0, c.output_dims.1], c.d_pos);
    let sla_merge = (c.n_devices > 1).then(|| linear(src, c.n_devices * d, d));
    ModelWeights {
        config: c.clone(),
        encoders,
        fusion,
        decoder: DecoderWeights { seed, blocks, head },
        pos_embed,
        sla_merge,
    }
}

/// Deterministic untrained weights for `config`.
pub fn init_weights(config: &ModelConfig, seed: u64) -> Result<ModelWeights> {
    config.validate()?;
    Ok(build(
        config,
        &mut Uniform {
            seed,
            next_stream: 0,
        },
    ))
}

impl ModelWeights {
    /// Zero-filled weights with the shapes `config` implies.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(build(config, &mut Zeros))
    }

    /// Every parameter tensor under a stable dotted name, in serialization order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        fn lin<'a>(out: &mut Vec<(String, &'a Tensor)>, name: String, l: &'a Linear) {
            out.push((format!("{name}.weight"), &l.weight));
            out.push((format!("{name}.bias"), &l.bias));
        }
        let mut out = Vec::new();
        for (i, e) in self.encoders.iter().enumerate() {
            for (j, b) in e.blocks.iter().enumerate() {
                out.push((format!("encoder.{i}.block.{j}.kernel"), &b.kernel));
                out.push((format!("encoder.{i}.block.{j}.bias"), &b.bias));
            }
        }
        lin(&mut out, "fusion.query".into(), &self.fusion.query);
        lin(&mut out, "fusion.key".into(), &self.fusion.key);
        lin(&mut out, "fusion.value".into(), &self.fusion.value);
        lin(&mut out, "fusion.output".into(), &self.fusion.output);
        lin(&mut out, "decoder.seed".into(), &self.decoder.seed);
        for (i, b) in self.decoder.blocks.iter().enumerate() {
            out.push((format!("decoder.block.{i}.conv.kernel"), &b.conv.kernel));
            out.push((format!("decoder.block.{i}.conv.bias"), &b.conv.bias));
            lin(&mut out, format!("decoder.block.{i}.attn.query"), &b.attention.query);
            lin(&mut out, format!("decoder.block.{i}.attn.key"), &b.attention.key);
            lin(&mut out, format!("decoder.block.{i}.attn.value"), &b.attention.value);
            lin(&mut out, format!("decoder.block.{i}.attn.output"), &b.attention.output);
        }
        out.push(("decoder.head.kernel".into(), &self.decoder.head.kernel));
        out.push(("decoder.head.bias".into(), &self.decoder.head.bias));
        out.push(("pos_embed".into(), &self.pos_embed));
        if let Some(m) = &self.sla_merge {
            lin(&mut out, "sla_merge".into(), m);
        }
        out
    }

    pub(crate) fn tensor_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let parts: Vec<&str> = name.split('.').collect();
        fn lin<'a>(l: &'a mut Linear, field: &str) -> Option<&'a mut Tensor> {
            match field {
                "weight" => Some(&mut l.weight),
                "bias" => Some(&mut l.bias),
                _ => None,
            }
        }
        fn conv<'a>(c: &'a mut Conv, field: &str) -> Option<&'a mut Tensor> {
            match field {
                "kernel" => Some(&mut c.kernel),
                "bias" => Some(&mut c.bias),
                _ => None,
            }
        }
        match parts.as_slice() {
            ["encoder", i, "block", j, f] => {
                let e = self.encoders.get_mut(i.parse::<usize>().ok()?)?;
                conv(e.blocks.get_mut(j.parse::<usize>().ok()?)?, f)
            }
            ["fusion", p, f] => {
                let l = match *p {
                    "query" => &mut self.fusion.query,
                    "key" => &mut self.fusion.key,
                    "value" => &mut self.fusion.value,
                    "output" => &mut self.fusion.output,
                    _ => return None,
                };
                lin(l, f)
            }
            ["decoder", "seed", f] => lin(&mut self.decoder.seed, f),
            ["decoder", "head", f] => conv(&mut self.decoder.head, f),
            ["decoder", "block", i, "conv", f] => {
                conv(&mut self.decoder.blocks.get_mut(i.parse::<usize>().ok()?)?.conv, f)
            }
            ["decoder", "block", i, "attn", p, f] => {
                let a = &mut self.decoder.blocks.get_mut(i.parse::<usize>().ok()?)?.attention;
                let l = match *p {
                    "query" => &mut a.query,
                    "key" => &mut a.key,
                    "value" => &mut a.value,
                    "output" => &mut a.output,
                    _ => return None,
                };
                lin(l, f)
            }
            ["pos_embed"] => Some(&mut self.pos_embed),
            ["sla_merge", f] => lin(self.sla_merge.as_mut()?, f),
            _ => None,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}
