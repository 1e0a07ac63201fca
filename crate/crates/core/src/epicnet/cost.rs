//! Multiply-accumulate counts for each model stage, used by the simulated
//! clock to charge compute time.

use super::ModelConfig;

fn conv_macs(c_in: usize, c_out: usize, h: usize, w: usize) -> u64 {
    (c_in * c_out * 9 * h * w) as u64
}

/// One device encoder over a slice of `width` receivers.
pub fn encoder_macs(config: &ModelConfig, width: usize) -> u64 {
    let mut c_in = config.n_sources;
    config
        .encoder_widths(width)
        .into_iter()
        .zip(&config.encoder_channels)
        .map(|((h, w), &c_out)| {
            let m = conv_macs(c_in, c_out, h, w);
            c_in = c_out;
            m
        })
        .sum()
}

/// Self-attention fusion over `present` latents.
pub fn fuse_macs(config: &ModelConfig, present: usize) -> u64 {
    let d = config.latent_dim as u64;
    let m = present as u64;
    4 * m * d * d + 2 * m * m * d
}

fn decoder_trunk_macs(config: &ModelConfig) -> u64 {
    let c = config;
    let (h0, w0) = c.decoder_resolutions[0];
    let mut total = (c.latent_dim * c.decoder_channels[0] * h0 * w0) as u64;
    for (i, &(h, w)) in c.decoder_resolutions.iter().enumerate().skip(1) {
        total += conv_macs(c.decoder_channels[i - 1], c.decoder_channels[i], h, w);
    }
    let (ho, wo) = c.output_dims;
    total + conv_macs(*c.decoder_channels.last().unwrap(), 1, ho, wo)
}

/// Decoder with cross-attention over `present` latents.
pub fn decode_macs(config: &ModelConfig, present: usize) -> u64 {
    let c = config;
    let m = present as u64;
    let dk = c.d_k as u64;
    let mut total = decoder_trunk_macs(c);
    for (i, &(h, w)) in c.decoder_resolutions.iter().enumerate().skip(1) {
        let p = (h * w) as u64;
        let ch = c.decoder_channels[i] as u64;
        total += p * (ch + c.d_pos as u64) * dk;
        total += 2 * m * c.latent_dim as u64 * dk;
        total += 2 * p * m * dk;
        total += p * dk * ch;
    }
    total
}

/// Decoder without cross-attention.
pub fn plain_decode_macs(config: &ModelConfig) -> u64 {
    decoder_trunk_macs(config)
}

/// Latent concatenation merge of the split-learning baseline.
pub fn sla_merge_macs(config: &ModelConfig) -> u64 {
    if config.n_devices > 1 {
        (config.n_devices * config.latent_dim * config.latent_dim) as u64
    } else {
        0
    }
}

/// Full central reconstruction (fusion plus cross-attention decoder).
pub fn reconstruct_macs(config: &ModelConfig, present: usize) -> u64 {
    fuse_macs(config, present) + decode_macs(config, present)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_cost_monotone_in_present() {
        let c = ModelConfig::standard(5);
        for m in 1..5 {
            assert!(reconstruct_macs(&c, m) < reconstruct_macs(&c, m + 1));
        }
        assert!(plain_decode_macs(&c) < decode_macs(&c, 1));
    }

    #[test]
    fn encoder_cost_matches_hand_count() {
        let c = ModelConfig::standard(5);
        let hand = 5 * 32 * 9 * 500 * 7
            + 32 * 64 * 9 * 250 * 4
            + 64 * 128 * 9 * 125 * 4
            + 128 * 256 * 9 * 63 * 4
            + 256 * 512 * 9 * 32 * 4;
        assert_eq!(encoder_macs(&c, 14), hand as u64);
    }
}
