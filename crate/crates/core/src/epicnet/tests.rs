use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::{self, Tensor};

fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(dims, |_| rng.gen_range(-1.0..1.0))
}

fn random_linear(d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Linear {
    let bound = 1.0 / (d_in as f32).sqrt();
    Linear {
        weight: Tensor::from_fn(&[d_out, d_in], |_| rng.gen_range(-bound..bound)),
        bias: Tensor::from_fn(&[d_out], |_| rng.gen_range(-bound..bound)),
    }
}

fn latent_set(n: usize, present: &[usize], d: usize, seed: u64) -> LatentSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = LatentSet::new(n);
    for &i in present {
        set.insert(LatentVector::new(random(&[d], &mut rng), i, 0).unwrap()).unwrap();
    }
    set
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn lin(l: &Linear, x: &[f32]) -> Vec<f64> {
    let d_in = l.d_in();
    (0..l.d_out())
        .map(|o| dot(&l.weight.data()[o * d_in..][..d_in], x) + l.bias.data()[o] as f64)
        .collect()
}

fn exp_normalize(s: &[f64]) -> Vec<f64> {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

/// Scalar zero-padded convolution in the same accumulation order as the kernel.
fn conv_reference(x: &Tensor, conv: &Conv, stride: (usize, usize)) -> Tensor {
    let (ci_n, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let co_n = conv.kernel.dims()[0];
    let ho = (h - 1) / stride.0 + 1;
    let wo = (w - 1) / stride.1 + 1;
    let mut out = Tensor::zeros(&[co_n, ho, wo]);
    for co in 0..co_n {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut s = 0.0f64;
                for ci in 0..ci_n {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = (oy * stride.0 + ky) as isize - 1;
                            let ix = (ox * stride.1 + kx) as isize - 1;
                            let v = if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                x.get(&[ci, iy as usize, ix as usize])
                            } else {
                                0.0
                            };
                            s += conv.kernel.get(&[co, ci, ky, kx]) as f64 * v as f64;
                        }
                    }
                }
                let y = (s + conv.bias.data()[co] as f64) as f32;
                out.set(&[co, oy, ox], y.max(0.1 * y));
            }
        }
    }
    out
}

#[test]
fn standard_model_shapes() {
    let w = init_weights(&ModelConfig::standard(5), 3).unwrap();
    assert_eq!(w.encoders.len(), 5);
    assert_eq!(w.pos_embed.dims(), &[64, 70, 70]);
    let slice = Tensor::full(&[5, 1000, 14], 0.01);
    let l = encode(&slice, &w.encoders[2], 2, 9).unwrap();
    assert_eq!(l.len(), 512);
    assert_eq!((l.device_id, l.sample_id), (2, 9));
}

#[test]
fn encode_zero_input_is_bias_driven_and_stable() {
    let w = init_weights(&ModelConfig::compact(2), 1).unwrap();
    let zero = Tensor::zeros(&[5, 200, 35]);
    let a = encode(&zero, &w.encoders[0], 0, 0).unwrap();
    let b = encode(&zero, &w.encoders[0], 0, 0).unwrap();
    assert_eq!(a, b);
    assert!(a.values.data().iter().any(|&v| v != 0.0));
}

#[test]
fn encode_matches_scalar_reference_bit_exactly() {
    let w = init_weights(&ModelConfig::compact(5), 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let slice = random(&[5, 200, 14], &mut rng);
    let got = encode(&slice, &w.encoders[3], 3, 0).unwrap();

    let mut x = slice.clone();
    for conv in &w.encoders[3].blocks {
        let sw = if x.dims()[2] > 4 { 2 } else { 1 };
        x = conv_reference(&x, conv, (2, sw));
    }
    let plane = x.dims()[1] * x.dims()[2];
    let want: Vec<f32> = x
        .data()
        .chunks(plane)
        .map(|p| (p.iter().map(|&v| v as f64).sum::<f64>() / plane as f64) as f32)
        .collect();
    assert_eq!(got.values.data(), &want[..]);
}

#[test]
fn encode_rejects_non_finite() {
    let w = init_weights(&ModelConfig::compact(5), 8).unwrap();
    let mut slice = Tensor::zeros(&[5, 200, 14]);
    slice.set(&[1, 3, 2], f32::NAN);
    assert!(matches!(encode(&slice, &w.encoders[0], 0, 0), Err(Error::InvalidInput(_))));
    assert!(encode(&Tensor::zeros(&[4, 200, 14]), &w.encoders[0], 0, 0).is_err());
}

fn fusion_weights(d: usize, heads: usize, seed: u64) -> FusionWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FusionWeights {
        n_heads: heads,
        query: random_linear(d, d, &mut rng),
        key: random_linear(d, d, &mut rng),
        value: random_linear(d, d, &mut rng),
        output: random_linear(d, d, &mut rng),
    }
}

fn fuse_oracle(set: &LatentSet, w: &FusionWeights) -> Vec<f64> {
    let toks: Vec<&[f32]> = set.iter().map(|l| l.values.data()).collect();
    let d = toks[0].len();
    let dh = d / w.n_heads;
    let q: Vec<Vec<f64>> = toks.iter().map(|t| lin(&w.query, t)).collect();
    let k: Vec<Vec<f64>> = toks.iter().map(|t| lin(&w.key, t)).collect();
    let v: Vec<Vec<f64>> = toks.iter().map(|t| lin(&w.value, t)).collect();
    let mut gl = vec![0.0; d];
    for i in 0..toks.len() {
        let mut ctx = vec![0.0f32; d];
        for h in 0..w.n_heads {
            let s: Vec<f64> = (0..toks.len())
                .map(|j| (h * dh..(h + 1) * dh).map(|c| q[i][c] * k[j][c]).sum::<f64>() / (dh as f64).sqrt())
                .collect();
            let a = exp_normalize(&s);
            for c in h * dh..(h + 1) * dh {
                ctx[c] = (0..toks.len()).map(|j| a[j] * v[j][c]).sum::<f64>() as f32;
            }
        }
        for (g, o) in gl.iter_mut().zip(lin(&w.output, &ctx)) {
            *g += o / toks.len() as f64;
        }
    }
    gl
}

#[test]
fn fuse_single_latent_is_its_token() {
    let w = fusion_weights(16, 1, 2);
    let set = latent_set(4, &[2], 16, 3);
    let gl = fuse(&set, &w).unwrap();
    let x = &set.get(2).unwrap().values;
    let token = w.output.apply(&w.value.apply(x).unwrap()).unwrap();
    assert_eq!(gl.data(), token.data());
}

#[test]
fn fuse_ignores_insertion_order() {
    let w = fusion_weights(16, 2, 2);
    let set = latent_set(5, &[0, 1, 3, 4], 16, 9);
    let mut rev = LatentSet::new(5);
    for d in [4, 1, 3, 0] {
        rev.insert(set.get(d).unwrap().clone()).unwrap();
    }
    assert_eq!(fuse(&set, &w).unwrap(), fuse(&rev, &w).unwrap());
}

#[test]
fn fuse_matches_attention_oracle() {
    for heads in [1, 4] {
        let w = fusion_weights(32, heads, 21);
        let set = latent_set(3, &[0, 1, 2], 32, 22);
        let got = fuse(&set, &w).unwrap();
        for (g, o) in got.data().iter().zip(fuse_oracle(&set, &w)) {
            assert!((*g as f64 - o).abs() <= 1e-6 * o.abs().max(1.0), "{g} vs {o}");
        }
    }
    assert!(matches!(fuse(&LatentSet::new(3), &fusion_weights(8, 1, 0)), Err(Error::EmptySupport)));
}

fn cross_weights(c: usize, d_pos: usize, d_lat: usize, d_k: usize, heads: usize, seed: u64) -> CrossAttentionWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CrossAttentionWeights {
        n_heads: heads,
        query: random_linear(c + d_pos, d_k, &mut rng),
        key: random_linear(d_lat, d_k, &mut rng),
        value: random_linear(d_lat, d_k, &mut rng),
        output: random_linear(d_k, c, &mut rng),
    }
}

#[test]
fn cross_attention_single_key_gets_all_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random(&[4, 5, 5], &mut rng);
    let pos = random(&[3, 70, 70], &mut rng);
    let w = cross_weights(4, 3, 12, 8, 1, 2);
    let set = latent_set(3, &[1], 12, 3);
    let (out, map) = cross_attention(&f, &pos, &set, &w).unwrap();
    assert!(map.rows().all(|r| r == [0.0, 1.0, 0.0]));
    let proj = w.output.apply(&w.value.apply(&set.get(1).unwrap().values).unwrap()).unwrap();
    for ch in 0..4 {
        for p in 0..25 {
            assert_eq!(out.data()[ch * 25 + p], f.data()[ch * 25 + p] + proj.data()[ch]);
        }
    }
}

#[test]
fn cross_attention_identical_keys_split_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random(&[4, 6, 6], &mut rng);
    let pos = random(&[2, 70, 70], &mut rng);
    let w = cross_weights(4, 2, 10, 8, 2, 5);
    let v = random(&[10], &mut rng);
    let mut set = LatentSet::new(3);
    set.insert(LatentVector::new(v.clone(), 0, 0).unwrap()).unwrap();
    set.insert(LatentVector::new(v, 2, 0).unwrap()).unwrap();
    let (_, map) = cross_attention(&f, &pos, &set, &w).unwrap();
    assert!(map.rows().all(|r| r == [0.5, 0.0, 0.5]));
}

#[test]
fn cross_attention_matches_scalar_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let (c, d_pos, d_lat, d_k) = (8, 6, 24, 16);
    let f = random(&[c, 9, 9], &mut rng);
    let pos = random(&[d_pos, 70, 70], &mut rng);
    for heads in [1, 2] {
        let w = cross_weights(c, d_pos, d_lat, d_k, heads, 41);
        let set = latent_set(4, &[0, 1, 2, 3], d_lat, 42);
        let (out, map) = cross_attention(&f, &pos, &set, &w).unwrap();

        let e = numerics::bilinear_resize(&pos, (9, 9)).unwrap();
        let keys: Vec<Vec<f64>> = set.iter().map(|l| lin(&w.key, l.values.data())).collect();
        let vals: Vec<Vec<f64>> = set.iter().map(|l| lin(&w.value, l.values.data())).collect();
        let dh = d_k / heads;
        for p in 0..81 {
            let mut x: Vec<f32> = (0..c).map(|ch| f.data()[ch * 81 + p]).collect();
            x.extend((0..d_pos).map(|ch| e.data()[ch * 81 + p]));
            let q = lin(&w.query, &x);
            let mut ctx = vec![0.0f32; d_k];
            for h in 0..heads {
                let s: Vec<f64> = keys
                    .iter()
                    .map(|k| (h * dh..(h + 1) * dh).map(|j| q[j] * k[j]).sum::<f64>() / (dh as f64).sqrt())
                    .collect();
                let a = exp_normalize(&s);
                let row = map.row(h, p);
                let total: f64 = row.iter().map(|&v| v as f64).sum();
                assert!((total - 1.0).abs() <= 1e-6);
                for (i, &ai) in a.iter().enumerate() {
                    assert!((row[i] as f64 - ai).abs() < 1e-6);
                }
                for j in h * dh..(h + 1) * dh {
                    ctx[j] = a.iter().zip(&vals).map(|(ai, v)| ai * v[j]).sum::<f64>() as f32;
                }
            }
            let o = lin(&w.output, &ctx);
            for ch in 0..c {
                let want = f.data()[ch * 81 + p] as f64 + o[ch];
                let got = out.data()[ch * 81 + p] as f64;
                assert!((got - want).abs() <= 1e-6 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn cross_attention_rejects_empty_support() {
    let w = cross_weights(2, 2, 4, 4, 1, 0);
    let err = cross_attention(&Tensor::zeros(&[2, 3, 3]), &Tensor::zeros(&[2, 70, 70]), &LatentSet::new(2), &w);
    assert!(matches!(err, Err(Error::EmptySupport)));
}

#[test]
fn decode_range_dims_and_order_invariance() {
    let cfg = ModelConfig::compact(4);
    let w = init_weights(&cfg, 6).unwrap();
    let set = latent_set(4, &[0, 1, 2, 3], cfg.latent_dim, 7);
    let mut shuffled = LatentSet::new(4);
    for d in [2, 0, 3, 1] {
        shuffled.insert(set.get(d).unwrap().clone()).unwrap();
    }
    let a = reconstruct(&set, &w).unwrap();
    let b = reconstruct(&shuffled, &w).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.dims(), (70, 70));
    assert!(a.values().data().iter().all(|v| (1500.0..=4500.0).contains(v)));
}

#[test]
fn masked_latent_equals_removed_latent() {
    let cfg = ModelConfig::compact(4);
    let w = init_weights(&cfg, 6).unwrap();
    let full = latent_set(4, &[0, 1, 2, 3], cfg.latent_dim, 7);
    let mut removed = full.clone();
    removed.remove(2);
    let masked = full.restricted(&[true, true, false, true]);
    let gl = fuse(&removed, &w.fusion).unwrap();
    let (a, maps) = decode_traced(&gl, &removed, &w).unwrap();
    let b = decode(&fuse(&masked, &w.fusion).unwrap(), &masked, &w).unwrap();
    assert_eq!(a, b);
    assert_eq!(maps.len(), 4);
    for m in &maps {
        assert!(m.rows().all(|r| r[2] == 0.0));
    }
}

#[test]
fn forward_full_single_device_and_determinism() {
    let cfg = ModelConfig::compact(1);
    let w = init_weights(&cfg, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let wave = random(&[5, 200, 70], &mut rng);
    let p = Partition::even(70, 1).unwrap();
    let a = forward_full(&wave, &w, &p).unwrap();
    assert_eq!(a.dims(), (70, 70));
    assert_eq!(a, forward_full(&wave, &w, &p).unwrap());
    assert!(forward_full(&wave, &w, &Partition::even(70, 2).unwrap()).is_err());
}

#[test]
fn sla_single_device_equals_centralized() {
    let cfg = ModelConfig::compact(1);
    let w = init_weights(&cfg, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let wave = random(&[5, 200, 70], &mut rng);
    let p = Partition::even(70, 1).unwrap();
    let set = encode_all(&wave, &w, &p, 0).unwrap();
    let sla = sla_reconstruct(&set, &w).unwrap();
    let central = centralized_reconstruct(&[Some(&wave)], &w, &p).unwrap();
    assert_eq!(sla, central);
}

#[test]
fn fla_stitches_per_device_columns() {
    let cfg = ModelConfig::compact(2);
    let w = init_weights(&cfg, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let wave = random(&[5, 200, 70], &mut rng);
    let p = Partition::even(70, 2).unwrap();
    let spans: Vec<Option<Tensor>> = p
        .slices()
        .iter()
        .enumerate()
        .map(|(i, cols)| Some(fla_device_columns(&slice_receivers(&wave, cols.clone()).unwrap(), i, &w, &p).unwrap()))
        .collect();
    let map = fla_assemble(&spans, &w, &p).unwrap();
    for (i, cols) in p.slices().iter().enumerate() {
        let slice = slice_receivers(&wave, cols.clone()).unwrap();
        let own = decode_plain(&encode(&slice, &w.encoders[i], i, 0).unwrap().values, &w).unwrap();
        assert_eq!(map.columns(cols.clone()), own.columns(cols.clone()));
    }
}
