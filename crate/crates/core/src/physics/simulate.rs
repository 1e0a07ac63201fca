use std::f64::consts::PI;

use rayon::prelude::*;

use super::{AcquisitionGeometry, Error, Result, VelocityModel, WaveformRecord};
use crate::numerics::Tensor;

/// Width of the absorbing layer added on every side of the model.
pub const SPONGE_CELLS: usize = 10;

const SPONGE_DECAY: f64 = 0.045;

/// Ricker wavelet with peak frequency `f0`, delayed by `1/f0`.
pub fn ricker(t: f64, f0: f64) -> f64 {
    let a = (PI * f0 * (t - 1.0 / f0)).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

/// Largest time step admitted for `vm`.
pub fn max_stable_dt(vm: &VelocityModel) -> f64 {
    0.5 * vm.dx() / vm.max_velocity() as f64
}

/// Per-cell damping for one axis of the padded grid.
fn sponge_profile(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let depth = SPONGE_CELLS.saturating_sub(i).max((i + SPONGE_CELLS + 1).saturating_sub(n));
            (-(SPONGE_DECAY * depth as f64).powi(2)).exp()
        })
        .collect()
}

struct Grid {
    h: usize,
    w: usize,
    /// `(v dt / dx)^2` per padded cell.
    courant2: Vec<f64>,
    damp: Vec<f64>,
}

impl Grid {
    fn new(vm: &VelocityModel, dt: f64) -> Self {
        let (rows, cols) = vm.dims();
        let (h, w) = (rows + 2 * SPONGE_CELLS, cols + 2 * SPONGE_CELLS);
        let v = vm.grid().data();
        let mut courant2 = vec![0.0; h * w];
        for i in 0..h {
            let r = i.saturating_sub(SPONGE_CELLS).min(rows - 1);
            for j in 0..w {
                let c = j.saturating_sub(SPONGE_CELLS).min(cols - 1);
                let k = v[r * cols + c] as f64 * dt / vm.dx();
                courant2[i * w + j] = k * k;
            }
        }
        let (gz, gx) = (sponge_profile(h), sponge_profile(w));
        let damp = (0..h * w).map(|k| gz[k / w] * gx[k % w]).collect();
        Self { h, w, courant2, damp }
    }

    /// One shot; returns `[n_t, receivers]` traces.
    fn shoot(&self, source: usize, geom: &AcquisitionGeometry) -> Vec<f32> {
        let (h, w) = (self.h, self.w);
        let at = |col: usize| SPONGE_CELLS * w + SPONGE_CELLS + col;
        let src = at(source);
        let mut prev = vec![0.0f64; h * w];
        let mut cur = vec![0.0f64; h * w];
        let mut next = vec![0.0f64; h * w];
        let mut out = Vec::with_capacity(geom.n_t * geom.receivers.len());
        for step in 0..geom.n_t {
            out.extend(geom.receivers.iter().map(|&c| cur[at(c)] as f32));
            for i in 1..h - 1 {
                let row = i * w;
                for k in row + 1..row + w - 1 {
                    let lap = (cur[k - 1] + cur[k + 1]) + (cur[k - w] + cur[k + w]) - 4.0 * cur[k];
                    next[k] = 2.0 * cur[k] - prev[k] + self.courant2[k] * lap;
                }
            }
            let t = step as f64 * geom.dt;
            next[src] += self.courant2[src] * geom.amplitude * ricker(t, geom.f0);
            for k in 0..h * w {
                next[k] *= self.damp[k];
                cur[k] *= self.damp[k];
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        out
    }
}

/// Forward-model every shot of `geom` through `vm`.
///
/// Shots run in parallel and are stacked in source order.
pub fn simulate(vm: &VelocityModel, geom: &AcquisitionGeometry) -> Result<WaveformRecord> {
    geom.validate(vm.dims().1)?;
    let max_dt = max_stable_dt(vm);
    if geom.dt > max_dt {
        return Err(Error::Cfl { dt: geom.dt, max_dt });
    }
    let grid = Grid::new(vm, geom.dt);
    let shots: Vec<Vec<f32>> = geom
        .sources
        .par_iter()
        .map(|&s| grid.shoot(s, geom))
        .collect();
    let data = Tensor::new(
        vec![geom.sources.len(), geom.n_t, geom.receivers.len()],
        shots.concat(),
    )?;
    WaveformRecord::new(data).map_err(|_| Error::Cfl { dt: geom.dt, max_dt })
}

/// `simulate(with_roi) - simulate(background)`, elementwise.
pub fn differential_waveform(
    with_roi: &VelocityModel,
    background: &VelocityModel,
    geom: &AcquisitionGeometry,
) -> Result<WaveformRecord> {
    if with_roi.dims() != background.dims() || with_roi.dx() != background.dx() {
        return Err(Error::Shape(format!(
            "models differ: {:?} at dx={} vs {:?} at dx={}",
            with_roi.dims(),
            with_roi.dx(),
            background.dims(),
            background.dx()
        )));
    }
    let a = simulate(with_roi, geom)?;
    let b = simulate(background, geom)?;
    let dims = a.data().dims().to_vec();
    let diff = a.data().data().iter().zip(b.data().data()).map(|(x, y)| x - y).collect();
    WaveformRecord::new(Tensor::new(dims, diff)?)
}
