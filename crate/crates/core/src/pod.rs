//! Proper orthogonal decomposition of the snapshot matrix and the mode
//! gradients used for Galerkin strain recovery.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, Header};
use crate::linalg;
use crate::rve::mesh::RveMesh;
use crate::rve::snapshots::SnapshotMatrix;

const FORMAT: &str = "hyperfe-pod-1";
pub const HEADER_FILE: &str = "pod.hdr";
pub const PHI0_FILE: &str = "phi0.bin";
pub const MODES_FILE: &str = "modes.bin";
pub const GRADS_FILE: &str = "grad_modes.bin";
pub const GRAD_PHI0_FILE: &str = "grad_phi0.bin";

/// Relative singular-value threshold below which a mode counts as numerically null.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    pub rows: usize,
    pub p: usize,
    pub phi0: Vec<f64>,
    /// Column-major `rows x p`.
    pub modes: Vec<f64>,
    pub singular_values: Vec<f64>,
    /// Displacement gradients `[k][q][c*2 + d] = d phi_k,c / d x_d`, flat.
    /// Empty until [`mode_gradients`] has run.
    pub grad_modes: Vec<f64>,
    /// Same layout for the mean, `[q][4]`.
    pub grad_phi0: Vec<f64>,
    pub mesh_hash: String,
    /// Hash of the snapshot data the basis was computed from.
    pub source_hash: String,
}

pub fn compute_pod(snap: &SnapshotMatrix, p: usize) -> Result<PodBasis> {
    let (rows, n) = (snap.rows, snap.cols);
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "POD needs at least 2 snapshots, got {n}"
        )));
    }
    if p == 0 || p > rows.min(n) {
        return Err(Error::InvalidArgument(format!(
            "mode count {p} must lie in 1..={}",
            rows.min(n)
        )));
    }
    let mut phi0 = vec![0.0; rows];
    for j in 0..n {
        for (m, v) in phi0.iter_mut().zip(snap.column(j)) {
            *m += v;
        }
    }
    phi0.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = snap.data.clone();
    for j in 0..n {
        for (c, m) in centered[j * rows..(j + 1) * rows].iter_mut().zip(&phi0) {
            *c -= m;
        }
    }
    let (left, sigma) = linalg::thin_svd(&centered, rows, n)?;
    let mut modes = left[..rows * p].to_vec();
    for col in modes.chunks_exact_mut(rows) {
        let peak = col
            .iter()
            .copied()
            .fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if peak < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let rank = effective_rank(&sigma);
    if rank < p {
        log::warn!("snapshot matrix has numerical rank {rank} < requested {p} modes");
    }
    Ok(PodBasis {
        rows,
        p,
        phi0,
        modes,
        singular_values: sigma,
        grad_modes: Vec::new(),
        grad_phi0: Vec::new(),
        mesh_hash: snap.mesh_hash.clone(),
        source_hash: snap.data_hash(),
    })
}

pub fn effective_rank(sigma: &[f64]) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|&&s| s > RANK_TOL * top).count()
}

/// Evaluates the gradient of every mode and of the mean at every
/// quadrature point of `mesh`.
pub fn mode_gradients(basis: &mut PodBasis, mesh: &RveMesh) -> Result<()> {
    check_mesh(basis, mesh)?;
    basis.grad_phi0 = field_gradients(mesh, &basis.phi0);
    let mut grads = Vec::with_capacity(basis.p * mesh.n_quad_points() * 4);
    for k in 0..basis.p {
        grads.extend(field_gradients(mesh, basis.mode(k)));
    }
    basis.grad_modes = grads;
    Ok(())
}

pub fn check_mesh(basis: &PodBasis, mesh: &RveMesh) -> Result<()> {
    if basis.mesh_hash != mesh.hash() {
        return Err(Error::Provenance {
            what: "POD basis mesh".into(),
            expected: mesh.hash().to_string(),
            found: basis.mesh_hash.clone(),
        });
    }
    if basis.rows != 2 * mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: 2 * mesh.n_nodes(),
            got: basis.rows,
        });
    }
    Ok(())
}

/// Gradient `[q][c*2 + d]` of a stacked nodal field at every quadrature point.
pub fn field_gradients(mesh: &RveMesh, field: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mesh.n_quad_points() * 4);
    for e in 0..mesh.n_elements() {
        let ue = mesh.gather(field, e);
        for qp in &mesh.quad_points[e] {
            let g = qp.gradient(&ue);
            out.extend_from_slice(&[g[0][0], g[0][1], g[1][0], g[1][1]]);
        }
    }
    out
}

/// Engineering-shear Voigt strain of a flat 2x2 gradient.
#[inline]
pub fn sym_voigt(g: &[f64]) -> [f64; 3] {
    [g[0], g[3], g[1] + g[2]]
}

impl PodBasis {
    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k * self.rows..(k + 1) * self.rows]
    }

    pub fn has_gradients(&self) -> bool {
        !self.grad_phi0.is_empty()
    }

    pub fn n_quad_points(&self) -> usize {
        self.grad_phi0.len() / 4
    }

    /// `b = Phi^T (u - phi0)`.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: u.len(),
            });
        }
        Ok((0..self.p)
            .map(|k| {
                self.mode(k)
                    .iter()
                    .zip(u.iter().zip(&self.phi0))
                    .map(|(m, (a, b))| m * (a - b))
                    .sum()
            })
            .collect())
    }

    /// `phi0 + Phi b`.
    pub fn reconstruct(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: b.len(),
            });
        }
        let mut u = self.phi0.clone();
        for (k, bk) in b.iter().enumerate() {
            for (ui, m) in u.iter_mut().zip(self.mode(k)) {
                *ui += bk * m;
            }
        }
        Ok(u)
    }

    /// Largest deviation of `Phi^T Phi` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.p {
            for j in 0..=i {
                let d: f64 = self.mode(i).iter().zip(self.mode(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    pub fn hash(&self) -> String {
        let mut all = Vec::with_capacity(self.phi0.len() + self.modes.len());
        all.extend_from_slice(&self.phi0);
        all.extend_from_slice(&self.modes);
        io::hash_f64s(&format!("pod:{}:{}", self.p, self.mesh_hash), &all)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        io::write_f64s(&dir.join(PHI0_FILE), &self.phi0)?;
        io::write_f64s(&dir.join(MODES_FILE), &self.modes)?;
        io::write_f64s(&dir.join(GRADS_FILE), &self.grad_modes)?;
        io::write_f64s(&dir.join(GRAD_PHI0_FILE), &self.grad_phi0)?;
        let mut h = Header::new();
        h.set("format", FORMAT)
            .set("p", self.p)
            .set("rows", self.rows)
            .set("n_quad_points", self.n_quad_points())
            .set("mesh_hash", &self.mesh_hash)
            .set("source_hash", &self.source_hash)
            .set("basis_hash", self.hash())
            .set("singular_values", io::join_f64s(&self.singular_values));
        h.write(&dir.join(HEADER_FILE))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let hpath = dir.join(HEADER_FILE);
        let h = Header::read(&hpath)?;
        let format = h.require("format", &hpath)?;
        if format != FORMAT {
            return Err(Error::Format {
                path: hpath,
                detail: format!("unsupported format '{format}'"),
            });
        }
        let p: usize = h.parse_value("p", &hpath)?;
        let rows: usize = h.parse_value("rows", &hpath)?;
        let nq: usize = h.parse_value("n_quad_points", &hpath)?;
        let basis = Self {
            rows,
            p,
            phi0: io::read_f64s(&dir.join(PHI0_FILE), Some(rows))?,
            modes: io::read_f64s(&dir.join(MODES_FILE), Some(rows * p))?,
            singular_values: io::split_f64s(h.require("singular_values", &hpath)?, &hpath)?,
            grad_modes: io::read_f64s(&dir.join(GRADS_FILE), Some(p * nq * 4))?,
            grad_phi0: io::read_f64s(&dir.join(GRAD_PHI0_FILE), Some(nq * 4))?,
            mesh_hash: h.require("mesh_hash", &hpath)?.to_string(),
            source_hash: h.require("source_hash", &hpath)?.to_string(),
        };
        let stored = h.require("basis_hash", &hpath)?;
        if stored != basis.hash() {
            return Err(Error::Provenance {
                what: "POD basis data".into(),
                expected: stored.to_string(),
                found: basis.hash(),
            });
        }
        Ok(basis)
    }
}
