use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{self, Header};
use crate::rve::sampling::SampleSet;
use crate::rve::solver::MicroSolver;

const FORMAT: &str = "hyperfe-snapshots-1";
pub const HEADER_FILE: &str = "snapshots.hdr";
pub const DATA_FILE: &str = "snapshots.bin";

/// Column-major `rows x cols` matrix of total displacement fields, one
/// column per converged sample, stacked `[u_x; u_y]` over the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    /// Sample index of every column.
    pub sample_indices: Vec<usize>,
    /// Samples that failed to converge and were left out.
    pub excluded: Vec<usize>,
    pub length: f64,
    pub magnitude: f64,
    pub seed: u64,
    pub mesh_hash: String,
    pub samples_hash: String,
}

pub fn samples_hash(set: &SampleSet) -> String {
    let flat: Vec<f64> = set.samples.iter().flat_map(|s| s.to_voigt()).collect();
    io::hash_f64s("samples", &flat)
}

/// Solves the cell problem for every sample. Columns keep sample order no
/// matter which thread finished first.
pub fn generate_snapshots(
    solver: &MicroSolver,
    set: &SampleSet,
    tol: f64,
    max_iter: usize,
) -> Result<SnapshotMatrix> {
    let solve = |i: usize| {
        let r = solver.solve(&set.samples[i], tol, max_iter);
        (i, r)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = (0..set.len()).into_par_iter().map(solve).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..set.len()).map(solve).collect();

    let mesh = solver.mesh();
    let rows = 2 * mesh.n_nodes();
    let mut data = Vec::with_capacity(rows * set.len());
    let mut sample_indices = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in results {
        match r {
            Ok(sol) if sol.converged => {
                data.extend_from_slice(&sol.u);
                sample_indices.push(i);
            }
            Ok(sol) => {
                log::warn!(
                    "sample {i} {:?} did not converge (residual {:e} after {} iterations); excluded",
                    set.samples[i],
                    sol.residual_norm,
                    sol.newton_iters
                );
                excluded.push(i);
            }
            Err(e) => {
                log::warn!("sample {i} {:?} failed: {e}; excluded", set.samples[i]);
                excluded.push(i);
            }
        }
    }
    if sample_indices.is_empty() {
        return Err(Error::InvalidArgument("no sample converged".into()));
    }
    Ok(SnapshotMatrix {
        rows,
        cols: sample_indices.len(),
        data,
        sample_indices,
        excluded,
        length: mesh.domain.length,
        magnitude: set.magnitude,
        seed: set.seed,
        mesh_hash: mesh.hash().to_string(),
        samples_hash: samples_hash(set),
    })
}

impl SnapshotMatrix {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn data_hash(&self) -> String {
        io::hash_f64s("snapshots", &self.data)
    }

    /// Writes `snapshots.hdr` and `snapshots.bin` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_f64s(&dir.join(DATA_FILE), &self.data)?;
        let mut h = Header::new();
        h.set("format", FORMAT)
            .set("rows", self.rows)
            .set("cols", self.cols)
            .set("L", self.length)
            .set("magnitude", self.magnitude)
            .set("seed", self.seed)
            .set("mesh_hash", &self.mesh_hash)
            .set("samples_hash", &self.samples_hash)
            .set("data_hash", self.data_hash())
            .set("sample_indices", io::join_usizes(&self.sample_indices))
            .set("excluded", io::join_usizes(&self.excluded));
        h.write(&dir.join(HEADER_FILE))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let hpath: PathBuf = dir.join(HEADER_FILE);
        let h = Header::read(&hpath)?;
        let format = h.require("format", &hpath)?;
        if format != FORMAT {
            return Err(Error::Format {
                path: hpath,
                detail: format!("unsupported format '{format}'"),
            });
        }
        let rows: usize = h.parse_value("rows", &hpath)?;
        let cols: usize = h.parse_value("cols", &hpath)?;
        let data = io::read_f64s(&dir.join(DATA_FILE), Some(rows * cols))?;
        let out = Self {
            rows,
            cols,
            data,
            sample_indices: io::split_usizes(h.require("sample_indices", &hpath)?, &hpath)?,
            excluded: io::split_usizes(h.require("excluded", &hpath)?, &hpath)?,
            length: h.parse_value("L", &hpath)?,
            magnitude: h.parse_value("magnitude", &hpath)?,
            seed: h.parse_value("seed", &hpath)?,
            mesh_hash: h.require("mesh_hash", &hpath)?.to_string(),
            samples_hash: h.require("samples_hash", &hpath)?.to_string(),
        };
        let stored = h.require("data_hash", &hpath)?;
        if stored != out.data_hash() {
            return Err(Error::Provenance {
                what: "snapshot data".into(),
                expected: stored.to_string(),
                found: out.data_hash(),
            });
        }
        if out.sample_indices.len() != cols {
            return Err(Error::Format {
                path: hpath,
                detail: "sample_indices length differs from cols".into(),
            });
        }
        Ok(out)
    }
}
