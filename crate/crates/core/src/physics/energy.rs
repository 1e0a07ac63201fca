use std::ops::Range;

use super::{Error, Result, WaveformRecord};

/// Receiver energies and their share per receiver group.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDistribution {
    pub per_receiver: Vec<f64>,
    pub group_fractions: Vec<f64>,
}

/// Sum of squared amplitudes per receiver, over all shots and samples.
pub fn energy_distribution(rec: &WaveformRecord, groups: &[Range<usize>]) -> Result<EnergyDistribution> {
    let (_, _, n_r) = rec.dims();
    let mut next = 0;
    for g in groups {
        if g.start != next || g.end <= g.start {
            return Err(Error::Groups(format!(
                "groups must be contiguous, non-empty and start at 0; found {g:?} after {next}"
            )));
        }
        next = g.end;
    }
    if next != n_r {
        return Err(Error::Groups(format!("groups cover [0, {next}) but record has {n_r} receivers")));
    }
    let mut per_receiver = vec![0.0f64; n_r];
    for row in rec.data().data().chunks_exact(n_r) {
        for (e, &v) in per_receiver.iter_mut().zip(row) {
            *e += v as f64 * v as f64;
        }
    }
    let total: f64 = per_receiver.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let group_fractions = groups
        .iter()
        .map(|g| per_receiver[g.clone()].iter().sum::<f64>() / total)
        .collect();
    Ok(EnergyDistribution { per_receiver, group_fractions })
}
