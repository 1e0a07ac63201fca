use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, AcquisitionGeometry, Error, Result, VelocityModel, WaveformRecord, GRID, VELOCITY_RANGE};
use crate::numerics::{decode_tensor, encode_tensor, Tensor};

pub const MANIFEST_FILE: &str = "manifest.json";

const DX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Layered,
    Faulted,
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "layered" => Ok(Self::Layered),
            "faulted" => Ok(Self::Faulted),
            other => Err(format!("unknown family {other:?} (expected layered or faulted)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub velocity: VelocityModel,
    pub waveform: WaveformRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub family: Family,
    pub n_samples: usize,
    pub dx: f64,
    pub geometry: AcquisitionGeometry,
    pub files: Vec<String>,
}

/// Velocity of each depth row: 2 to 5 layers, velocities increasing with depth.
fn layer_profile(rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n_layers = rng.gen_range(2..=5);
    let mut tops: Vec<usize> = Vec::with_capacity(n_layers - 1);
    while tops.len() < n_layers - 1 {
        let z = rng.gen_range(4..GRID - 4);
        if tops.iter().all(|&t| t.abs_diff(z) >= 3) {
            tops.push(z);
        }
    }
    tops.sort_unstable();
    let (lo, hi) = VELOCITY_RANGE;
    let mut speeds: Vec<f32> = (0..n_layers).map(|_| rng.gen_range(lo..=hi).round()).collect();
    speeds.sort_by(f32::total_cmp);
    (0..GRID)
        .map(|z| speeds[tops.iter().filter(|&&t| z >= t).count()])
        .collect()
}

fn velocity_model(rng: &mut ChaCha8Rng, family: Family) -> VelocityModel {
    let profile = layer_profile(rng);
    let grid = match family {
        Family::Layered => Tensor::from_fn(&[GRID, GRID], |i| profile[i / GRID]),
        Family::Faulted => {
            let x0 = rng.gen_range(15.0..55.0f64);
            let slope = rng.gen_range(-60.0f64..60.0).to_radians().tan();
            let throw = rng.gen_range(3..=12usize);
            Tensor::from_fn(&[GRID, GRID], |i| {
                let (z, x) = (i / GRID, i % GRID);
                if (x as f64) > x0 + slope * z as f64 {
                    profile[z.saturating_sub(throw)]
                } else {
                    profile[z]
                }
            })
        }
    };
    VelocityModel::new(grid, DX).expect("generated velocities lie in range")
}

/// Seeded synthetic models and their simulated records.
///
/// Sample `i` draws from its own generator stream, so a sample does not
/// depend on how many others are generated.
pub fn generate_dataset(
    seed: u64,
    n_samples: usize,
    family: Family,
    geom: &AcquisitionGeometry,
) -> Result<Vec<Sample>> {
    if n_samples == 0 {
        return Err(Error::Dataset("n_samples must be at least 1".into()));
    }
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let velocity = velocity_model(&mut rng, family);
            let waveform = simulate(&velocity, geom)?;
            Ok(Sample { velocity, waveform })
        })
        .collect()
}

fn sample_file(i: usize) -> String {
    format!("sample_{i:05}.tnsr")
}

/// Write one tensor file per sample (velocity record, then waveform record)
/// plus a JSON manifest.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    samples: &[Sample],
    seed: u64,
    family: Family,
    geom: &AcquisitionGeometry,
) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = sample_file(i);
        let mut bytes = encode_tensor(s.velocity.grid());
        bytes.extend(encode_tensor(s.waveform.data()));
        fs::write(dir.join(&name), bytes)?;
        files.push(name);
    }
    let manifest = DatasetManifest {
        seed,
        family,
        n_samples: samples.len(),
        dx: samples.first().map_or(DX, |s| s.velocity.dx()),
        geometry: geom.clone(),
        files,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<Sample>)> {
    let dir = dir.as_ref();
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.files.len() != manifest.n_samples {
        return Err(Error::Dataset(format!(
            "manifest lists {} files for {} samples",
            manifest.files.len(),
            manifest.n_samples
        )));
    }
    let mut samples = Vec::with_capacity(manifest.n_samples);
    for name in &manifest.files {
        let bytes = fs::read(dir.join(name))?;
        let (grid, used) = decode_tensor(&bytes)?;
        let (wave, rest) = decode_tensor(&bytes[used..])?;
        if used + rest != bytes.len() {
            return Err(Error::Dataset(format!("{name}: trailing bytes after records")));
        }
        samples.push(Sample {
            velocity: VelocityModel::new(grid, manifest.dx)?,
            waveform: WaveformRecord::new(wave)?,
        });
    }
    Ok((manifest, samples))
}
