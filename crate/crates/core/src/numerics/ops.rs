use super::{Error, Result, Tensor};

/// Activation slope used throughout the encoder and decoder stacks.
pub const LEAKY_SLOPE: f32 = 0.1;

fn shape_err(
    op: &'static str,
    lhs_name: &'static str,
    lhs: &[usize],
    rhs_name: &'static str,
    rhs: &[usize],
) -> Error {
    Error::Shape {
        op,
        lhs_name,
        lhs: lhs.to_vec(),
        rhs_name,
        rhs: rhs.to_vec(),
    }
}

/// 2-D cross-correlation over a `[C_in, H, W]` input with zero padding.
///
/// Each output element is the dot product of the kernel with its padded input
/// window, accumulated in `f64` in `(c_in, ky, kx)` order, plus the bias.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor> {
    input.expect_rank("conv2d", 3)?;
    kernel.expect_rank("conv2d", 4)?;
    let (c_in, h, w) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    let (c_out, k_in, kh, kw) = (
        kernel.dims()[0],
        kernel.dims()[1],
        kernel.dims()[2],
        kernel.dims()[3],
    );
    if k_in != c_in {
        return Err(shape_err("conv2d", "input", input.dims(), "kernel", kernel.dims()));
    }
    if bias.len() != c_out {
        return Err(shape_err("conv2d", "kernel", kernel.dims(), "bias", bias.dims()));
    }
    let (sh, sw) = stride;
    let (ph, pw) = padding;
    if sh == 0 || sw == 0 {
        return Err(Error::InvalidArgument("conv2d: strides must be >= 1".into()));
    }
    if kh > h + 2 * ph || kw > w + 2 * pw {
        return Err(shape_err("conv2d", "input", input.dims(), "kernel", kernel.dims()));
    }
    let ho = (h + 2 * ph - kh) / sh + 1;
    let wo = (w + 2 * pw - kw) / sw + 1;
    let positions = ho * wo;
    let taps = c_in * kh * kw;

    // im2col: one row per kernel tap, one column per output position.
    let src = input.data();
    let mut cols = vec![0.0f32; taps * positions];
    for ci in 0..c_in {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[((ci * kh + ky) * kw + kx) * positions..][..positions];
                for oy in 0..ho {
                    let iy = (oy * sh + ky) as isize - ph as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let in_row = &src[(ci * h + iy as usize) * w..][..w];
                    let out_row = &mut row[oy * wo..][..wo];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * sw + kx) as isize - pw as isize;
                        if ix >= 0 && ix < w as isize {
                            *slot = in_row[ix as usize];
                        }
                    }
                }
            }
        }
    }

    let kdata = kernel.data();
    let bdata = bias.data();
    let mut out = vec![0.0f32; c_out * positions];
    let mut acc = vec![0.0f64; 4 * positions];
    let mut co = 0;
    while co < c_out {
        let block = (c_out - co).min(4);
        acc.iter_mut().for_each(|a| *a = 0.0);
        let (a0, rest) = acc.split_at_mut(positions);
        let (a1, rest) = rest.split_at_mut(positions);
        let (a2, a3) = rest.split_at_mut(positions);
        let wrow = |j: usize, k: usize| -> f64 {
            if j < block {
                kdata[(co + j) * taps + k] as f64
            } else {
                0.0
            }
        };
        for k in 0..taps {
            let (w0, w1, w2, w3) = (wrow(0, k), wrow(1, k), wrow(2, k), wrow(3, k));
            let r = &cols[k * positions..][..positions];
            for p in 0..positions {
                let x = r[p] as f64;
                a0[p] += w0 * x;
                a1[p] += w1 * x;
                a2[p] += w2 * x;
                a3[p] += w3 * x;
            }
        }
        for (j, a) in [&*a0, &*a1, &*a2, &*a3].into_iter().enumerate().take(block) {
            let b = bdata[co + j] as f64;
            let dst = &mut out[(co + j) * positions..][..positions];
            for (d, &s) in dst.iter_mut().zip(a.iter()) {
                *d = (s + b) as f32;
            }
        }
        co += block;
    }
    Tensor::new(vec![c_out, ho, wo], out)
}

/// `y = W x + b` along the trailing axis of `x`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    weight.expect_rank("linear", 2)?;
    let (d_out, d_in) = (weight.dims()[0], weight.dims()[1]);
    if *x.dims().last().unwrap() != d_in {
        return Err(shape_err("linear", "x", x.dims(), "weight", weight.dims()));
    }
    if bias.len() != d_out {
        return Err(shape_err("linear", "weight", weight.dims(), "bias", bias.dims()));
    }
    let rows = x.len() / d_in;
    let mut out = vec![0.0f32; rows * d_out];
    linear_rows(x.data(), weight.data(), bias.data(), d_in, d_out, &mut out);
    let mut dims = x.dims().to_vec();
    *dims.last_mut().unwrap() = d_out;
    Tensor::new(dims, out)
}

/// Slice-level kernel behind [`linear`]; `x` holds `rows * d_in` values.
fn linear_rows(
    x: &[f32],
    weight: &[f32],
    bias: &[f32],
    d_in: usize,
    d_out: usize,
    out: &mut [f32],
) {
    for (xr, yr) in x.chunks_exact(d_in).zip(out.chunks_exact_mut(d_out)) {
        for (o, y) in yr.iter_mut().enumerate() {
            let wr = &weight[o * d_in..][..d_in];
            let mut s = 0.0f64;
            for (&a, &b) in wr.iter().zip(xr) {
                s += a as f64 * b as f64;
            }
            *y = (s + bias[o] as f64) as f32;
        }
    }
}

/// Numerically stable softmax of one row, writing into `out`.
///
/// Masked entries (`mask[i] == false`) receive exactly 0 and take no part in
/// the max or the normalizer, so masking an entry is equivalent to deleting it.
pub fn softmax_into(scores: &[f32], mask: Option<&[bool]>, out: &mut [f32]) -> Result<()> {
    debug_assert_eq!(scores.len(), out.len());
    let live = |i: usize| mask.is_none_or(|m| m[i]);
    if let Some(m) = mask {
        if m.len() != scores.len() {
            return Err(shape_err("softmax", "scores", &[scores.len()], "mask", &[m.len()]));
        }
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &s) in scores.iter().enumerate() {
        if live(i) {
            max = max.max(s as f64);
        }
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptySupport { op: "softmax" });
    }
    let mut sum = 0.0f64;
    let mut exps = [0.0f64; 64];
    let mut heap;
    let buf: &mut [f64] = if scores.len() <= exps.len() {
        &mut exps[..scores.len()]
    } else {
        heap = vec![0.0f64; scores.len()];
        &mut heap
    };
    for (i, &s) in scores.iter().enumerate() {
        if live(i) {
            let e = (s as f64 - max).exp();
            buf[i] = e;
            sum += e;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = if live(i) { (buf[i] / sum) as f32 } else { 0.0 };
    }
    Ok(())
}

/// Softmax along the trailing axis; `mask` applies to every row.
pub fn softmax(scores: &Tensor, mask: Option<&[bool]>) -> Result<Tensor> {
    let k = *scores.dims().last().unwrap();
    let mut out = vec![0.0f32; scores.len()];
    for (row, dst) in scores.data().chunks_exact(k).zip(out.chunks_exact_mut(k)) {
        softmax_into(row, mask, dst)?;
    }
    Tensor::new(scores.dims().to_vec(), out)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Source coordinate and lower index for corner-aligned sampling.
fn corner_aligned(o: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    if dst == 1 || src == 1 {
        return (0, 0, 0.0);
    }
    let pos = (o * (src - 1)) as f64 / (dst - 1) as f64;
    let i0 = (pos.floor() as usize).min(src - 1);
    let i1 = (i0 + 1).min(src - 1);
    let t = if i0 == i1 { 0.0 } else { pos - i0 as f64 };
    (i0, i1, t)
}

/// Corner-aligned bilinear resize of every channel of a `[C, H, W]` grid.
pub fn bilinear_resize(grid: &Tensor, target: (usize, usize)) -> Result<Tensor> {
    grid.expect_rank("bilinear_resize", 3)?;
    let (c, h, w) = (grid.dims()[0], grid.dims()[1], grid.dims()[2]);
    let (ht, wt) = target;
    if ht == 0 || wt == 0 {
        return Err(shape_err("bilinear_resize", "grid", grid.dims(), "target", &[ht, wt]));
    }
    let xs: Vec<_> = (0..wt).map(|o| corner_aligned(o, w, wt)).collect();
    let src = grid.data();
    let mut out = vec![0.0f32; c * ht * wt];
    for ch in 0..c {
        let plane = &src[ch * h * w..][..h * w];
        for oy in 0..ht {
            let (y0, y1, ty) = corner_aligned(oy, h, ht);
            for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                let top = lerp(plane[y0 * w + x0] as f64, plane[y0 * w + x1] as f64, tx);
                let bot = lerp(plane[y1 * w + x0] as f64, plane[y1 * w + x1] as f64, tx);
                out[(ch * ht + oy) * wt + ox] = lerp(top, bot, ty) as f32;
            }
        }
    }
    Tensor::new(vec![c, ht, wt], out)
}

/// Nearest-neighbour resize; output pixel `o` reads source `floor(o * src / dst)`.
pub fn nearest_resize(grid: &Tensor, target: (usize, usize)) -> Result<Tensor> {
    grid.expect_rank("nearest_resize", 3)?;
    let (c, h, w) = (grid.dims()[0], grid.dims()[1], grid.dims()[2]);
    let (ht, wt) = target;
    if ht == 0 || wt == 0 {
        return Err(shape_err("nearest_resize", "grid", grid.dims(), "target", &[ht, wt]));
    }
    let src = grid.data();
    let mut out = Vec::with_capacity(c * ht * wt);
    for ch in 0..c {
        for oy in 0..ht {
            let iy = oy * h / ht;
            for ox in 0..wt {
                out.push(src[(ch * h + iy) * w + ox * w / wt]);
            }
        }
    }
    Tensor::new(vec![c, ht, wt], out)
}

pub fn leaky_relu(x: &Tensor, slope: f32) -> Result<Tensor> {
    let mut y = x.clone();
    leaky_relu_inplace(&mut y, slope)?;
    Ok(y)
}

pub fn leaky_relu_inplace(x: &mut Tensor, slope: f32) -> Result<()> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::InvalidArgument(format!(
            "leaky_relu slope must lie in [0, 1), got {slope}"
        )));
    }
    for v in x.data_mut() {
        *v = v.max(slope * *v);
    }
    Ok(())
}

/// Per-channel arithmetic mean of a `[C, H, W]` tensor, shaped `[C, 1, 1]`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    x.expect_rank("global_avg_pool", 3)?;
    let c = x.dims()[0];
    let plane = x.dims()[1] * x.dims()[2];
    let out = x
        .data()
        .chunks_exact(plane)
        .map(|p| (p.iter().map(|&v| v as f64).sum::<f64>() / plane as f64) as f32)
        .collect();
    Tensor::new(vec![c, 1, 1], out)
}

/// Stack two `[C, H, W]` tensors along the channel axis.
pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.expect_rank("concat_channels", 3)?;
    b.expect_rank("concat_channels", 3)?;
    if a.dims()[1..] != b.dims()[1..] {
        return Err(shape_err("concat_channels", "a", a.dims(), "b", b.dims()));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(vec![a.dims()[0] + b.dims()[0], a.dims()[1], a.dims()[2]], data)
}

/// `[C, H, W]` to `[H*W, C]` (pixel-major rows).
pub fn channels_last(x: &Tensor) -> Result<Tensor> {
    x.expect_rank("channels_last", 3)?;
    let (c, h, w) = (x.dims()[0], x.dims()[1], x.dims()[2]);
    let p = h * w;
    let src = x.data();
    let mut out = vec![0.0f32; c * p];
    for ch in 0..c {
        for i in 0..p {
            out[i * c + ch] = src[ch * p + i];
        }
    }
    Tensor::new(vec![p, c], out)
}

/// Inverse of [`channels_last`] given the spatial extents.
pub fn channels_first(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    x.expect_rank("channels_first", 2)?;
    let (p, c) = (x.dims()[0], x.dims()[1]);
    if p != h * w {
        return Err(shape_err("channels_first", "x", x.dims(), "spatial", &[h, w]));
    }
    let src = x.data();
    let mut out = vec![0.0f32; c * p];
    for i in 0..p {
        for ch in 0..c {
            out[ch * p + i] = src[i * c + ch];
        }
    }
    Tensor::new(vec![c, h, w], out)
}
