use serde::{Deserialize, Serialize};

use super::{Error, Result};

/// Architecture of one distributed model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of end devices, one encoder each.
    pub n_devices: usize,
    pub latent_dim: usize,
    /// Key dimension of the decoder cross-attention (split across heads).
    pub d_k: usize,
    /// Channels of the learnable position embedding.
    pub d_pos: usize,
    pub n_heads: usize,
    /// Feature-map extents, seed first; every later entry gets an upsampling block.
    pub decoder_resolutions: Vec<(usize, usize)>,
    pub output_dims: (usize, usize),
    /// `(v_min, v_max)` in m/s.
    pub velocity_range: (f32, f32),
    pub n_sources: usize,
    pub n_timesteps: usize,
    pub n_receivers: usize,
    /// Output channels of each encoder block; the last equals `latent_dim`.
    pub encoder_channels: Vec<usize>,
    /// Channels at each decoder resolution.
    pub decoder_channels: Vec<usize>,
}

impl ModelConfig {
    /// Full-size configuration: 5 sources, 1000 timesteps, 70 receivers, 512-d latents.
    pub fn standard(n_devices: usize) -> Self {
        Self {
            n_devices,
            latent_dim: 512,
            d_k: 64,
            d_pos: 64,
            n_heads: 1,
            decoder_resolutions: vec![(5, 5), (9, 9), (18, 18), (35, 35), (70, 70)],
            output_dims: (70, 70),
            velocity_range: (1500.0, 4500.0),
            n_sources: 5,
            n_timesteps: 1000,
            n_receivers: 70,
            encoder_channels: vec![32, 64, 128, 256, 512],
            decoder_channels: vec![128, 64, 32, 32, 16],
        }
    }

    /// Same topology with narrow layers and short records, for fast tests and sweeps.
    pub fn compact(n_devices: usize) -> Self {
        Self {
            latent_dim: 64,
            d_k: 16,
            d_pos: 8,
            n_timesteps: 200,
            encoder_channels: vec![8, 16, 32, 64],
            decoder_channels: vec![16, 16, 8, 8, 8],
            ..Self::standard(n_devices)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_devices == 0 {
            return bad("n_devices must be >= 1".into());
        }
        if self.n_devices > self.n_receivers {
            return bad(format!(
                "n_devices {} exceeds receiver count {}",
                self.n_devices, self.n_receivers
            ));
        }
        if self.d_k == 0 || self.d_pos == 0 || self.latent_dim == 0 {
            return bad("d_k, d_pos and latent_dim must be >= 1".into());
        }
        if self.n_heads == 0 || !self.d_k.is_multiple_of(self.n_heads) || !self.latent_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "n_heads {} must divide d_k {} and latent_dim {}",
                self.n_heads, self.d_k, self.latent_dim
            ));
        }
        if self.n_sources == 0 || self.n_timesteps == 0 {
            return bad("n_sources and n_timesteps must be >= 1".into());
        }
        if self.encoder_channels.is_empty()
            || *self.encoder_channels.last().unwrap() != self.latent_dim
            || self.encoder_channels.contains(&0)
        {
            return bad(format!(
                "encoder_channels {:?} must be non-empty, positive and end at latent_dim {}",
                self.encoder_channels, self.latent_dim
            ));
        }
        let res = &self.decoder_resolutions;
        if res.len() < 2 {
            return bad("decoder_resolutions needs a seed and at least one block".into());
        }
        if res.iter().any(|&(h, w)| h == 0 || w == 0) {
            return bad("decoder resolutions must be positive".into());
        }
        if res.windows(2).any(|p| p[1].0 <= p[0].0 || p[1].1 <= p[0].1) {
            return bad(format!("decoder_resolutions {res:?} must be strictly increasing"));
        }
        if *res.last().unwrap() != self.output_dims {
            return bad(format!(
                "last decoder resolution {:?} must equal output_dims {:?}",
                res.last().unwrap(),
                self.output_dims
            ));
        }
        if self.decoder_channels.len() != res.len() || self.decoder_channels.contains(&0) {
            return bad(format!(
                "decoder_channels {:?} needs one positive entry per resolution ({})",
                self.decoder_channels,
                res.len()
            ));
        }
        let (lo, hi) = self.velocity_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("velocity_range ({lo}, {hi}) must satisfy v_min < v_max"));
        }
        Ok(())
    }

    /// Receiver-axis extent after each encoder block for a slice of `width` receivers.
    pub fn encoder_widths(&self, width: usize) -> Vec<(usize, usize)> {
        let mut h = self.n_timesteps;
        let mut w = width;
        self.encoder_channels
            .iter()
            .map(|_| {
                let sw = if w > 4 { 2 } else { 1 };
                h = (h + 2 - 3) / 2 + 1;
                w = (w + 2 - 3) / sw + 1;
                (h, w)
            })
            .collect()
    }

    pub fn latent_bytes(&self) -> usize {
        self.latent_dim * 4
    }
}
