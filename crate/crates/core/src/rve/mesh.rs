use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mechanics::Phase;
use crate::quad4::{self, QuadPoint};

/// Zero-centered square unit cell `[-L/2, L/2]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RveDomain {
    pub length: f64,
}

impl RveDomain {
    pub const DIM: usize = 2;

    pub fn new(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "edge length must be positive, got {length}"
            )));
        }
        Ok(Self { length })
    }

    pub fn area(&self) -> f64 {
        self.length * self.length
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let h = 0.5 * self.length;
        x.iter().all(|c| (-h..=h).contains(c))
    }
}

/// Structured quad mesh of the RVE with a centered circular fiber.
///
/// Nodes are numbered row by row, `id = j * (n + 1) + i`. Displacement
/// vectors over the mesh use the stacked layout `[u_x(0..m), u_y(0..m)]`.
#[derive(Debug, Clone)]
pub struct RveMesh {
    pub domain: RveDomain,
    pub n_per_side: usize,
    pub target_fraction: f64,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub phase: Vec<Phase>,
    pub quad_points: Vec<[QuadPoint; 4]>,
    /// Independent (master) node of every node under periodicity: opposite
    /// faces share their master and all four corners map to node 0.
    pub periodic_map: Vec<usize>,
    hash: String,
}

pub fn fiber_radius(length: f64, fraction: f64) -> f64 {
    length * (fraction / PI).sqrt()
}

/// Builds the RVE on the unit-length cell.
pub fn build_rve_mesh(n_per_side: usize, fraction: f64) -> Result<RveMesh> {
    build_rve_mesh_with_length(n_per_side, fraction, 1.0)
}

pub fn build_rve_mesh_with_length(n_per_side: usize, fraction: f64, length: f64) -> Result<RveMesh> {
    if n_per_side < 8 {
        return Err(Error::InvalidGeometry(format!(
            "n_per_side must be at least 8, got {n_per_side}"
        )));
    }
    if !(fraction > 0.0 && fraction < PI / 4.0) {
        return Err(Error::InvalidGeometry(format!(
            "fiber fraction must lie in (0, pi/4), got {fraction}"
        )));
    }
    let domain = RveDomain::new(length)?;
    let n = n_per_side;
    let h = length / n as f64;
    let half = 0.5 * length;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([-half + i as f64 * h, -half + j as f64 * h]);
        }
    }
    let radius = fiber_radius(length, fraction);
    let mut elements = Vec::with_capacity(n * n);
    let mut phase = Vec::with_capacity(n * n);
    let mut quad_points = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let a = j * (n + 1) + i;
            let conn = [a, a + 1, a + n + 2, a + n + 1];
            let cx = -half + (i as f64 + 0.5) * h;
            let cy = -half + (j as f64 + 0.5) * h;
            phase.push(if cx * cx + cy * cy < radius * radius {
                Phase::Fiber
            } else {
                Phase::Matrix
            });
            let x = conn.map(|k| nodes[k]);
            quad_points.push(quad4::quad_points(&x)?);
            elements.push(conn);
        }
    }
    let periodic_map = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| (j % n) * (n + 1) + (i % n)))
        .collect();
    let mut mesh = RveMesh {
        domain,
        n_per_side,
        target_fraction: fraction,
        nodes,
        elements,
        phase,
        quad_points,
        periodic_map,
        hash: String::new(),
    };
    mesh.rehash();
    Ok(mesh)
}

impl RveMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_quad_points(&self) -> usize {
        4 * self.elements.len()
    }

    pub fn element_size(&self) -> f64 {
        self.domain.length / self.n_per_side as f64
    }

    pub fn fiber_radius(&self) -> f64 {
        fiber_radius(self.domain.length, self.target_fraction)
    }

    /// Content hash over geometry, connectivity and phase tags.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn rehash(&mut self) {
        let mut h = Sha256::new();
        h.update(b"rve-mesh-v1");
        h.update((self.n_per_side as u64).to_le_bytes());
        h.update(self.domain.length.to_le_bytes());
        for x in &self.nodes {
            h.update(x[0].to_le_bytes());
            h.update(x[1].to_le_bytes());
        }
        for (e, p) in self.elements.iter().zip(&self.phase) {
            for k in e {
                h.update((*k as u64).to_le_bytes());
            }
            h.update([matches!(p, Phase::Fiber) as u8]);
        }
        self.hash = crate::io::hex_digest(h);
    }

    /// Same geometry with every element assigned to `phase`.
    pub fn with_uniform_phase(&self, phase: Phase) -> RveMesh {
        let mut m = self.clone();
        m.phase.iter_mut().for_each(|p| *p = phase);
        m.rehash();
        m
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.quad_points[e].iter().map(|q| q.weight).sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    /// Fiber volume fraction realized by the element tagging.
    pub fn realized_fiber_fraction(&self) -> f64 {
        let fiber: f64 = (0..self.n_elements())
            .filter(|&e| self.phase[e] == Phase::Fiber)
            .map(|e| self.element_area(e))
            .sum();
        fiber / self.volume()
    }

    /// Phase of each quadrature point (element-major, 4 per element).
    pub fn quad_point_phases(&self) -> Vec<Phase> {
        self.phase.iter().flat_map(|&p| [p; 4]).collect()
    }

    /// Integration weight of each quadrature point (element-major).
    pub fn quad_point_weights(&self) -> Vec<f64> {
        self.quad_points
            .iter()
            .flat_map(|qs| qs.map(|q| q.weight))
            .collect()
    }

    pub fn quad_point_coordinates(&self) -> Vec<[f64; 2]> {
        self.elements
            .iter()
            .flat_map(|conn| quad4::gauss_coordinates(&conn.map(|k| self.nodes[k])))
            .collect()
    }

    /// Element nodal values `[ux0, uy0, ux1, uy1, ...]` from a stacked field.
    #[inline]
    pub fn gather(&self, field: &[f64], e: usize) -> [f64; 8] {
        let m = self.n_nodes();
        let mut out = [0.0; 8];
        for (a, &k) in self.elements[e].iter().enumerate() {
            out[2 * a] = field[k];
            out[2 * a + 1] = field[m + k];
        }
        out
    }

    /// Nodal values of the affine field `x -> eps_bar . x` (symmetric, no rotation).
    pub fn affine_field(&self, eps_bar: &crate::mechanics::Strain2D) -> Vec<f64> {
        let m = self.n_nodes();
        let half_g = 0.5 * eps_bar.gamma_xy;
        let mut u = vec![0.0; 2 * m];
        for (k, x) in self.nodes.iter().enumerate() {
            u[k] = eps_bar.eps_xx * x[0] + half_g * x[1];
            u[m + k] = half_g * x[0] + eps_bar.eps_yy * x[1];
        }
        u
    }

    /// Element containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        if !self.domain.contains(x) {
            return None;
        }
        let n = self.n_per_side;
        let h = self.element_size();
        let half = 0.5 * self.domain.length;
        let cell = |c: f64| (((c + half) / h).floor() as usize).min(n - 1);
        let (i, j) = (cell(x[0]), cell(x[1]));
        let x0 = -half + i as f64 * h;
        let y0 = -half + j as f64 * h;
        let xi = 2.0 * (x[0] - x0) / h - 1.0;
        let eta = 2.0 * (x[1] - y0) / h - 1.0;
        Some((j * n + i, [xi, eta]))
    }

    /// Bilinear interpolation of a stacked nodal field at `x`.
    pub fn interpolate(&self, field: &[f64], x: [f64; 2]) -> Option<[f64; 2]> {
        let (e, [xi, eta]) = self.locate(x)?;
        let nvals = quad4::shape_functions(xi, eta);
        let ue = self.gather(field, e);
        let mut out = [0.0; 2];
        for a in 0..4 {
            out[0] += nvals[a] * ue[2 * a];
            out[1] += nvals[a] * ue[2 * a + 1];
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_for_55_percent() {
        assert!((fiber_radius(1.0, 0.55) - 0.41841).abs() < 1e-5);
    }

    #[test]
    fn realized_fraction_at_32() {
        let m = build_rve_mesh(32, 0.55).unwrap();
        let f = m.realized_fiber_fraction();
        assert!((f - 0.55).abs() / 0.55 < 0.02, "realized {f}");
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_fraction_gives_all_matrix() {
        let m = build_rve_mesh(8, 1e-6).unwrap();
        assert!(m.phase.iter().all(|p| *p == Phase::Matrix));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(build_rve_mesh(32, 0.0), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_rve_mesh(32, 0.8), Err(Error::InvalidGeometry(_))));
        assert!(matches!(build_rve_mesh(4, 0.5), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn periodic_pairs_are_translates() {
        let m = build_rve_mesh(10, 0.5).unwrap();
        let l = m.domain.length;
        for (k, &master) in m.periodic_map.iter().enumerate() {
            let d = [m.nodes[k][0] - m.nodes[master][0], m.nodes[k][1] - m.nodes[master][1]];
            for c in d {
                let r = c / l;
                assert!((r - r.round()).abs() < 1e-10 && (r.round() == 0.0 || r.round() == 1.0));
            }
            assert_eq!(m.periodic_map[master], master);
        }
        let n = m.n_per_side;
        for corner in [0, n, n * (n + 1), (n + 1) * (n + 1) - 1] {
            assert_eq!(m.periodic_map[corner], 0);
        }
        let masters: std::collections::BTreeSet<_> = m.periodic_map.iter().collect();
        assert_eq!(masters.len(), n * n);
    }

    #[test]
    fn interpolation_reproduces_affine_field() {
        let m = build_rve_mesh(8, 0.4).unwrap();
        let e = crate::mechanics::Strain2D::new(0.01, -0.02, 0.03);
        let u = m.affine_field(&e);
        for x in [[0.1, -0.37], [0.5, 0.5], [-0.5, -0.5], [0.0, 0.2]] {
            let v = m.interpolate(&u, x).unwrap();
            assert!((v[0] - (0.01 * x[0] + 0.015 * x[1])).abs() < 1e-14);
            assert!((v[1] - (0.015 * x[0] - 0.02 * x[1])).abs() < 1e-14);
        }
        assert!(m.interpolate(&u, [0.6, 0.0]).is_none());
    }

    #[test]
    fn hash_tracks_phase_changes() {
        let m = build_rve_mesh(8, 0.4).unwrap();
        let again = build_rve_mesh(8, 0.4).unwrap();
        assert_eq!(m.hash(), again.hash());
        assert_ne!(m.hash(), m.with_uniform_phase(Phase::Matrix).hash());
    }
}
