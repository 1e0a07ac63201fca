use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{Error, Result};
use crate::numerics::Tensor;

/// Side length of the square velocity grid.
pub const GRID: usize = 70;

/// Admissible velocities in m/s.
pub const VELOCITY_RANGE: (f32, f32) = (1500.0, 4500.0);

/// Subsurface velocity grid, row 0 at the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    grid: Tensor,
    dx: f64,
}

impl VelocityModel {
    pub fn new(grid: Tensor, dx: f64) -> Result<Self> {
        if grid.ndim() != 2 || grid.dims()[0] < 3 || grid.dims()[1] < 3 {
            return Err(Error::Model(format!(
                "grid must be 2-D and at least 3x3, got {:?}",
                grid.dims()
            )));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Model(format!("grid spacing must be positive, got {dx}")));
        }
        let (lo, hi) = VELOCITY_RANGE;
        if let Some(v) = grid.data().iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::Model(format!("velocity {v} outside [{lo}, {hi}]")));
        }
        Ok(Self { grid, dx })
    }

    /// Constant-velocity `GRID`x`GRID` model.
    pub fn homogeneous(velocity: f32, dx: f64) -> Result<Self> {
        Self::new(Tensor::full(&[GRID, GRID], velocity), dx)
    }

    pub fn grid(&self) -> &Tensor {
        &self.grid
    }

    pub fn into_grid(self) -> Tensor {
        self.grid
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `(rows, cols)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.grid.dims()[0], self.grid.dims()[1])
    }

    pub fn max_velocity(&self) -> f32 {
        self.grid.data().iter().fold(f32::MIN, |m, &v| m.max(v))
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        let (h, w) = self.dims();
        let grid = Tensor::from_fn(&[h, w], |i| {
            let (r, c) = (i / w, i % w);
            self.grid.data()[r * w + (w - 1 - c)]
        });
        Self { grid, dx: self.dx }
    }
}

/// Surface acquisition: shot columns, receiver columns and time sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionGeometry {
    pub sources: Vec<usize>,
    pub receivers: Vec<usize>,
    /// Ricker peak frequency in Hz.
    pub f0: f64,
    /// Wavelet scale factor.
    pub amplitude: f64,
    pub n_t: usize,
    pub dt: f64,
}

impl AcquisitionGeometry {
    /// Five evenly spread shots, one receiver per column, 1000 steps.
    pub fn standard() -> Self {
        Self {
            sources: vec![0, 17, 35, 52, 69],
            receivers: (0..GRID).collect(),
            f0: 15.0,
            amplitude: 1.0,
            n_t: 1000,
            dt: 0.4 * 10.0 / VELOCITY_RANGE.1 as f64,
        }
    }

    pub fn with_sources(mut self, sources: Vec<usize>) -> Self {
        self.sources = sources;
        self
    }

    pub fn with_steps(mut self, n_t: usize) -> Self {
        self.n_t = n_t;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Geometry for the mirrored model: every column `c` becomes `cols - 1 - c`.
    pub fn mirrored(&self, cols: usize) -> Self {
        let flip = |v: &[usize]| v.iter().map(|&c| cols - 1 - c).collect();
        Self {
            sources: flip(&self.sources),
            receivers: flip(&self.receivers),
            ..self.clone()
        }
    }

    pub fn validate(&self, cols: usize) -> Result<()> {
        if self.sources.is_empty() || self.receivers.is_empty() {
            return Err(Error::Geometry("need at least one source and one receiver".into()));
        }
        if let Some(c) = self.sources.iter().chain(&self.receivers).find(|&&c| c >= cols) {
            return Err(Error::Geometry(format!("column {c} outside grid of width {cols}")));
        }
        if self.n_t == 0 {
            return Err(Error::Geometry("n_t must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::Geometry(format!(
                "dt and f0 must be positive, got dt={} f0={}",
                self.dt, self.f0
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Geometry("amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Surface pressure traces, `[sources, n_t, receivers]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRecord {
    data: Tensor,
}

impl WaveformRecord {
    pub fn new(data: Tensor) -> Result<Self> {
        if data.ndim() != 3 {
            return Err(Error::Shape(format!("record must be 3-D, got {:?}", data.dims())));
        }
        if !data.is_finite() {
            return Err(Error::Shape("record contains non-finite samples".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    /// `(sources, n_t, receivers)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let d = self.data.dims();
        (d[0], d[1], d[2])
    }

    /// Trace of one source at one receiver index.
    pub fn trace(&self, source: usize, receiver: usize) -> Vec<f32> {
        let (_, n_t, n_r) = self.dims();
        (0..n_t)
            .map(|t| self.data.data()[(source * n_t + t) * n_r + receiver])
            .collect()
    }
}

/// Rectangular region of interest in grid cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// How the ROI is filled when building the reference model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Background {
    /// Velocity of the cell just above the ROI in each column (or just below
    /// when the ROI touches the surface).
    SurroundingLayer,
    Constant(f32),
}

fn check_roi(vm: &VelocityModel, roi: &Roi) -> Result<()> {
    let (h, w) = vm.dims();
    if roi.rows.is_empty() || roi.cols.is_empty() || roi.rows.end > h || roi.cols.end > w {
        return Err(Error::Model(format!(
            "roi {:?}x{:?} is empty or outside the {h}x{w} grid",
            roi.rows, roi.cols
        )));
    }
    Ok(())
}

/// Copy of `vm` with the ROI set to `velocity`.
pub fn insert_roi(vm: &VelocityModel, roi: &Roi, velocity: f32) -> Result<VelocityModel> {
    check_roi(vm, roi)?;
    let w = vm.dims().1;
    let mut grid = vm.grid.clone();
    for r in roi.rows.clone() {
        for c in roi.cols.clone() {
            grid.data_mut()[r * w + c] = velocity;
        }
    }
    VelocityModel::new(grid, vm.dx)
}

/// Copy of `vm` with the ROI replaced according to `background`.
pub fn background_model(vm: &VelocityModel, roi: &Roi, background: Background) -> Result<VelocityModel> {
    check_roi(vm, roi)?;
    let (h, w) = vm.dims();
    let mut grid = vm.grid.clone();
    for c in roi.cols.clone() {
        let fill = match background {
            Background::Constant(v) => v,
            Background::SurroundingLayer if roi.rows.start > 0 => {
                vm.grid.data()[(roi.rows.start - 1) * w + c]
            }
            Background::SurroundingLayer if roi.rows.end < h => vm.grid.data()[roi.rows.end * w + c],
            Background::SurroundingLayer => {
                return Err(Error::Model(
                    "roi spans every row; use a constant background".into(),
                ))
            }
        };
        for r in roi.rows.clone() {
            grid.data_mut()[r * w + c] = fill;
        }
    }
    VelocityModel::new(grid, vm.dx)
}
