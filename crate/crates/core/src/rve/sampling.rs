use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::Strain2D;

/// Macroscale strain samples for RVE data generation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub samples: Vec<Strain2D>,
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    eps_xx: f64,
    eps_yy: f64,
    gamma_xy: f64,
}

/// Latin hypercube design in `[-magnitude, magnitude]^3`.
pub fn lhs_sample(n: usize, magnitude: f64, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling magnitude must be positive, got {magnitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = 2.0 * magnitude / n as f64;
    let mut columns = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for col in columns.iter_mut() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (v, s) in col.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            *v = (-magnitude + (s as f64 + u) * width).clamp(-magnitude, magnitude);
        }
    }
    let samples = (0..n)
        .map(|i| Strain2D::new(columns[0][i], columns[1][i], columns[2][i]))
        .collect();
    Ok(SampleSet {
        samples,
        magnitude,
        seed,
    })
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every one of the `n` equal-width strata of each dimension holds exactly one sample.
    pub fn is_stratified(&self) -> bool {
        let n = self.samples.len();
        let width = 2.0 * self.magnitude / n as f64;
        (0..3).all(|d| {
            let mut hit = vec![false; n];
            self.samples.iter().all(|s| {
                let v = s.to_voigt()[d];
                if v < -self.magnitude || v > self.magnitude {
                    return false;
                }
                let k = (((v + self.magnitude) / width).floor() as usize).min(n - 1);
                !std::mem::replace(&mut hit[k], true)
            })
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.samples {
            w.serialize(Row {
                eps_xx: s.eps_xx,
                eps_yy: s.eps_yy,
                gamma_xy: s.gamma_xy,
            })?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        crate::io::write_atomic(path, &bytes)
    }

    /// Reads samples back; `magnitude` and `seed` come from the caller since
    /// the CSV holds only the strain columns.
    pub fn read_csv(path: &Path, magnitude: f64, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let samples = r
            .deserialize::<Row>()
            .map(|row| row.map(|r| Strain2D::new(r.eps_xx, r.eps_yy, r.gamma_xy)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            samples,
            magnitude,
            seed,
        })
    }
}
