//! Legacy ASCII VTK (`UNSTRUCTURED_GRID`) output for quad meshes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::macroscale::{MacroCase, MacroSolution};
use crate::mechanics::{Phase, Strain2D, Stress2D};
use crate::rve::RveMesh;

const VTK_QUAD: u8 = 9;

#[derive(Debug, Clone, Default)]
pub struct VtkGrid {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 4]>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
}

impl VtkGrid {
    pub fn new(title: &str, points: Vec<[f64; 2]>, cells: Vec<[usize; 4]>) -> Self {
        Self {
            title: title.replace('\n', " "),
            points,
            cells,
            ..Default::default()
        }
    }

    pub fn add_point_vectors(&mut self, name: &str, v: Vec<[f64; 2]>) -> Result<()> {
        if v.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                got: v.len(),
            });
        }
        self.point_vectors.push((name.to_string(), v));
        Ok(())
    }

    pub fn add_cell_scalars(&mut self, name: &str, v: Vec<f64>) -> Result<()> {
        if v.len() != self.cells.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cells.len(),
                got: v.len(),
            });
        }
        self.cell_scalars.push((name.to_string(), v));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let np = self.points.len();
        let nc = self.cells.len();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{}", truncate(&self.title, 255));
        let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {np} double");
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let _ = writeln!(s, "CELLS {nc} {}", 5 * nc);
        for c in &self.cells {
            let _ = writeln!(s, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        let _ = writeln!(s, "CELL_TYPES {nc}");
        for _ in 0..nc {
            let _ = writeln!(s, "{VTK_QUAD}");
        }
        if !self.point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {np}");
            for (name, v) in &self.point_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
                }
            }
        }
        if !self.cell_scalars.is_empty() {
            let _ = writeln!(s, "CELL_DATA {nc}");
            for (name, v) in &self.cell_scalars {
                let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_text().as_bytes())
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn cell_means<T: Copy>(values: &[T], n_cells: usize, get: impl Fn(T) -> f64) -> Vec<f64> {
    (0..n_cells)
        .map(|e| values[4 * e..4 * e + 4].iter().map(|&v| get(v)).sum::<f64>() / 4.0)
        .collect()
}

fn add_strain_stress(grid: &mut VtkGrid, eps: &[Strain2D], sig: &[Stress2D]) -> Result<()> {
    let n = grid.cells.len();
    let names = ["eps_xx", "eps_yy", "gamma_xy"];
    for (c, name) in names.iter().enumerate() {
        grid.add_cell_scalars(name, cell_means(eps, n, |e| e.to_voigt()[c]))?;
    }
    let names = ["sigma_xx", "sigma_yy", "tau_xy"];
    for (c, name) in names.iter().enumerate() {
        grid.add_cell_scalars(name, cell_means(sig, n, |s| s.to_voigt()[c]))?;
    }
    grid.add_cell_scalars("sigma_zz", cell_means(sig, n, |s| s.sig_zz))
}

/// Nodal displacement and Gauss-point averages of strain and stress per element.
pub fn macro_grid(case: &MacroCase, sol: &MacroSolution, title: &str) -> Result<VtkGrid> {
    let mut g = VtkGrid::new(title, case.nodes.clone(), case.elements.clone());
    if sol.d.len() != case.n_dofs() || sol.gp_stress.len() != case.n_gauss_points() {
        return Err(Error::DimensionMismatch {
            expected: case.n_dofs(),
            got: sol.d.len(),
        });
    }
    g.add_point_vectors("displacement", sol.d.chunks_exact(2).map(|c| [c[0], c[1]]).collect())?;
    add_strain_stress(&mut g, &sol.gp_strain, &sol.gp_stress)?;
    Ok(g)
}

/// Cell fields: stacked nodal displacement `u`, quadrature strain and stress.
pub fn rve_grid(mesh: &RveMesh, u: &[f64], eps_q: &[Strain2D], sig_q: &[Stress2D], title: &str) -> Result<VtkGrid> {
    let m = mesh.n_nodes();
    if u.len() != 2 * m || eps_q.len() != mesh.n_quad_points() || sig_q.len() != eps_q.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * m,
            got: u.len(),
        });
    }
    let mut g = VtkGrid::new(title, mesh.nodes.clone(), mesh.elements.clone());
    g.add_point_vectors("displacement", (0..m).map(|k| [u[k], u[m + k]]).collect())?;
    add_strain_stress(&mut g, eps_q, sig_q)?;
    let phase = mesh
        .phase
        .iter()
        .map(|p| if *p == Phase::Fiber { 1.0 } else { 0.0 })
        .collect();
    g.add_cell_scalars("fiber", phase)?;
    Ok(g)
}
