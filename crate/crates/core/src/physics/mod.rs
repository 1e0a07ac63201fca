//! 2-D acoustic finite-difference forward modeling: waveform synthesis,
//! differential (ROI) records, receiver energy statistics and synthetic
//! dataset generation.

mod dataset;
mod energy;
mod model;
mod simulate;

pub use dataset::{
    generate_dataset, load_dataset, save_dataset, DatasetManifest, Family, Sample,
    MANIFEST_FILE,
};
pub use energy::{energy_distribution, EnergyDistribution};
pub use model::{
    background_model, insert_roi, AcquisitionGeometry, Background, Roi, VelocityModel,
    WaveformRecord, GRID, VELOCITY_RANGE,
};
pub use simulate::{differential_waveform, max_stable_dt, ricker, simulate, SPONGE_CELLS};

use thiserror::Error;

use crate::numerics;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unstable time step {dt} s: CFL bound requires dt <= {max_dt} s")]
    Cfl { dt: f64, max_dt: f64 },
    #[error("invalid velocity model: {0}")]
    Model(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("record carries zero energy")]
    ZeroEnergy,
    #[error("invalid receiver groups: {0}")]
    Groups(String),
    #[error("bad dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Numerics(#[from] numerics::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
