//! Bilinear quadrilateral with 2x2 Gauss quadrature, shared by the RVE and
//! macroscale meshes.

use crate::error::{Error, Result};

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

/// Reference node coordinates, counter-clockwise.
pub const NODE_XI: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// 2x2 Gauss points (unit weights), ordered like the nodes.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

pub fn shape_functions(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, na) in n.iter_mut().enumerate() {
        *na = 0.25 * (1.0 + NODE_XI[a][0] * xi) * (1.0 + NODE_XI[a][1] * eta);
    }
    n
}

pub fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, da) in d.iter_mut().enumerate() {
        let (xa, ea) = (NODE_XI[a][0], NODE_XI[a][1]);
        da[0] = 0.25 * xa * (1.0 + ea * eta);
        da[1] = 0.25 * ea * (1.0 + xa * xi);
    }
    d
}

/// Physical shape-function gradients and integration weight at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    /// `dN_a/dx`, `dN_a/dy` for each element node.
    pub dndx: [[f64; 2]; 4],
    /// Gauss weight times Jacobian determinant.
    pub weight: f64,
}

impl QuadPoint {
    /// Strain (Voigt, engineering shear) of element nodal displacements
    /// `u = [ux0, uy0, ux1, uy1, ...]`.
    #[inline]
    pub fn strain(&self, u: &[f64; 8]) -> [f64; 3] {
        let mut e = [0.0; 3];
        for a in 0..4 {
            let [dx, dy] = self.dndx[a];
            e[0] += dx * u[2 * a];
            e[1] += dy * u[2 * a + 1];
            e[2] += dy * u[2 * a] + dx * u[2 * a + 1];
        }
        e
    }

    /// Displacement gradient `[[dux/dx, dux/dy], [duy/dx, duy/dy]]`.
    #[inline]
    pub fn gradient(&self, u: &[f64; 8]) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for a in 0..4 {
            for c in 0..2 {
                g[c][0] += self.dndx[a][0] * u[2 * a + c];
                g[c][1] += self.dndx[a][1] * u[2 * a + c];
            }
        }
        g
    }
}

/// Evaluates the four Gauss points of an element with corner coordinates `x`.
pub fn quad_points(x: &[[f64; 2]; 4]) -> Result<[QuadPoint; 4]> {
    let mut out = [QuadPoint {
        dndx: [[0.0; 2]; 4],
        weight: 0.0,
    }; 4];
    for (q, gp) in GAUSS_POINTS.iter().enumerate() {
        let dn = shape_derivatives(gp[0], gp[1]);
        let mut j = [[0.0; 2]; 2];
        for a in 0..4 {
            for r in 0..2 {
                j[r][0] += dn[a][0] * x[a][r];
                j[r][1] += dn[a][1] * x[a][r];
            }
        }
        // j[r][s] = dx_r / dxi_s
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "non-positive element Jacobian {det:.3e}"
            )));
        }
        let inv = [
            [j[1][1] / det, -j[0][1] / det],
            [-j[1][0] / det, j[0][0] / det],
        ];
        let mut dndx = [[0.0; 2]; 4];
        for a in 0..4 {
            // dN/dx_r = dN/dxi_s * dxi_s/dx_r
            dndx[a][0] = dn[a][0] * inv[0][0] + dn[a][1] * inv[1][0];
            dndx[a][1] = dn[a][0] * inv[0][1] + dn[a][1] * inv[1][1];
        }
        out[q] = QuadPoint { dndx, weight: det };
    }
    Ok(out)
}

/// Physical coordinates of the Gauss points.
pub fn gauss_coordinates(x: &[[f64; 2]; 4]) -> [[f64; 2]; 4] {
    let mut out = [[0.0; 2]; 4];
    for (q, gp) in GAUSS_POINTS.iter().enumerate() {
        let n = shape_functions(gp[0], gp[1]);
        for a in 0..4 {
            out[q][0] += n[a] * x[a][0];
            out[q][1] += n[a] * x[a][1];
        }
    }
    out
}
