use serde::{Deserialize, Serialize};

use super::{Result, ToolkitError};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    /// Odd side length of the uniform window.
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range `L` of the compared values.
    pub dynamic_range: f64,
}

impl SsimParams {
    /// 7x7 window, `K1 = 0.01`, `K2 = 0.03`, `L = hi - lo`.
    pub fn for_range(lo: f64, hi: f64) -> Self {
        Self { window: 7, k1: 0.01, k2: 0.03, dynamic_range: hi - lo }
    }

    pub fn validate(&self, dims: (usize, usize)) -> Result<()> {
        if self.window.is_multiple_of(2) || self.window == 0 || self.window > dims.0.min(dims.1) {
            return Err(ToolkitError::Metric(format!(
                "window {} must be odd and fit the {}x{} map",
                self.window, dims.0, dims.1
            )));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0) {
            return Err(ToolkitError::Metric(format!("K1, K2 and L must be positive: {self:?}")));
        }
        Ok(())
    }
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if a.ndim() != 2 || a.dims() != b.dims() {
        return Err(ToolkitError::Metric(format!(
            "maps must be 2-D with equal extents, got {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok((a.dims()[0], a.dims()[1]))
}

/// Per-window `(luminance, contrast-structure)` terms, row-major over window positions.
fn local_terms(a: &Tensor, b: &Tensor, p: &SsimParams) -> Result<Vec<(f64, f64)>> {
    let (h, w) = check_pair(a, b)?;
    p.validate((h, w))?;
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);
    let k = p.window;
    let n = (k * k) as f64;
    let (xa, xb) = (a.data(), b.data());
    let mut out = Vec::with_capacity((h - k + 1) * (w - k + 1));
    for r in 0..=h - k {
        for c in 0..=w - k {
            let cells = || (r..r + k).flat_map(move |i| (c..c + k).map(move |j| i * w + j));
            let mu_a = cells().map(|i| xa[i] as f64).sum::<f64>() / n;
            let mu_b = cells().map(|i| xb[i] as f64).sum::<f64>() / n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in cells() {
                let (da, db) = (xa[i] as f64 - mu_a, xb[i] as f64 - mu_b);
                va += da * da;
                vb += db * db;
                cov += da * db;
            }
            let (va, vb, cov) = (va / n, vb / n, cov / n);
            let lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
            let cs = (2.0 * cov + c2) / (va + vb + c2);
            out.push((lum, cs));
        }
    }
    Ok(out)
}

/// Mean local SSIM over every fully contained window.
pub fn ssim(a: &Tensor, b: &Tensor, params: &SsimParams) -> Result<f64> {
    let terms = local_terms(a, b, params)?;
    Ok(terms.iter().map(|(l, cs)| l * cs).sum::<f64>() / terms.len() as f64)
}

/// Mean contrast-structure factor of SSIM (the luminance term omitted).
pub fn ssim_contrast_structure(a: &Tensor, b: &Tensor, params: &SsimParams) -> Result<f64> {
    let terms = local_terms(a, b, params)?;
    Ok(terms.iter().map(|(_, cs)| cs).sum::<f64>() / terms.len() as f64)
}

/// `0.5 * MAE + 0.5 * MSE` after mapping `range` onto `[0, 1]`.
pub fn loss_mae_mse(pred: &Tensor, gt: &Tensor, range: (f64, f64)) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(ToolkitError::Metric(format!(
            "prediction {:?} and target {:?} differ in shape",
            pred.dims(),
            gt.dims()
        )));
    }
    let span = range.1 - range.0;
    if span.is_nan() || span <= 0.0 {
        return Err(ToolkitError::Metric(format!("empty normalization range {range:?}")));
    }
    let (mut abs, mut sq) = (0.0f64, 0.0f64);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let d = (p as f64 - range.0) / span - (g as f64 - range.0) / span;
        abs += d.abs();
        sq += d * d;
    }
    let n = pred.len() as f64;
    Ok(0.5 * abs / n + 0.5 * sq / n)
}
