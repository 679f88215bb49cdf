use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad4::{self, QuadPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    LProfile,
    CooksMembrane,
}

impl CaseName {
    pub const ALL: [CaseName; 2] = [CaseName::LProfile, CaseName::CooksMembrane];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::LProfile => "l_profile",
            CaseName::CooksMembrane => "cooks_membrane",
        }
    }

    /// Traction magnitude in N/mm that keeps every macro strain component
    /// below 0.04 at the last load step with the default 32x32 RVE, at
    /// the default resolution. Corner strains grow under refinement.
    pub fn default_load(self) -> f64 {
        match self {
            CaseName::LProfile => 9.5,
            CaseName::CooksMembrane => 13.0,
        }
    }

    pub fn default_resolution(self) -> usize {
        match self {
            CaseName::LProfile => 6,
            CaseName::CooksMembrane => 10,
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l_profile" => Ok(CaseName::LProfile),
            "cooks_membrane" => Ok(CaseName::CooksMembrane),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }
}

/// Uniform traction (N/mm) on one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLoad {
    pub nodes: [usize; 2],
    pub traction: [f64; 2],
}

/// Plane-strain macro problem on a bilinear quad mesh. Degrees of freedom
/// are interleaved per node, `[u_x0, u_y0, u_x1, ...]`.
#[derive(Debug, Clone)]
pub struct MacroCase {
    pub name: CaseName,
    pub resolution: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub quad_points: Vec<[QuadPoint; 4]>,
    /// Constrained degrees of freedom (all prescribed to zero).
    pub dirichlet: Vec<usize>,
    /// Tractions at full load.
    pub edge_loads: Vec<EdgeLoad>,
    pub load_steps: usize,
}

/// Cook's membrane corners, counter-clockwise.
pub const COOK_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [48.0, 44.0], [48.0, 60.0], [0.0, 44.0]];
pub const L_PROFILE_SIZE: f64 = 100.0;
pub const L_PROFILE_LEG: f64 = 50.0;

pub fn build_macro_case(name: CaseName, resolution: usize) -> Result<MacroCase> {
    build_macro_case_with_load(name, resolution, name.default_load(), 5)
}

pub fn build_macro_case_with_load(
    name: CaseName,
    resolution: usize,
    load: f64,
    load_steps: usize,
) -> Result<MacroCase> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("resolution must be at least 1".into()));
    }
    if load_steps == 0 {
        return Err(Error::InvalidArgument("at least one load step is required".into()));
    }
    if !load.is_finite() {
        return Err(Error::InvalidArgument(format!("load must be finite, got {load}")));
    }
    let mut case = match name {
        CaseName::CooksMembrane => cooks_membrane(resolution, load),
        CaseName::LProfile => l_profile(resolution, load),
    };
    case.load_steps = load_steps;
    case.quad_points = case
        .elements
        .iter()
        .map(|conn| quad4::quad_points(&conn.map(|k| case.nodes[k])))
        .collect::<Result<_>>()?;
    Ok(case)
}

fn cooks_membrane(r: usize, load: f64) -> MacroCase {
    let [p0, p1, p2, p3] = COOK_CORNERS;
    let id = |i: usize, j: usize| j * (r + 1) + i;
    let mut nodes = Vec::with_capacity((r + 1) * (r + 1));
    for j in 0..=r {
        for i in 0..=r {
            let (s, t) = (i as f64 / r as f64, j as f64 / r as f64);
            let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
            let x = w[0] * p0[0] + w[1] * p1[0] + w[2] * p2[0] + w[3] * p3[0];
            let y = w[0] * p0[1] + w[1] * p1[1] + w[2] * p2[1] + w[3] * p3[1];
            nodes.push([x, y]);
        }
    }
    let mut elements = Vec::with_capacity(r * r);
    for j in 0..r {
        for i in 0..r {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let dirichlet = (0..=r).flat_map(|j| [2 * id(0, j), 2 * id(0, j) + 1]).collect();
    let edge_loads = (0..r)
        .map(|j| EdgeLoad {
            nodes: [id(r, j), id(r, j + 1)],
            traction: [0.0, load],
        })
        .collect();
    MacroCase {
        name: CaseName::CooksMembrane,
        resolution: r,
        nodes,
        elements,
        quad_points: Vec::new(),
        dirichlet,
        edge_loads,
        load_steps: 5,
    }
}

/// L-shaped domain `[0,100]x[0,50] ∪ [0,50]x[50,100]`: three `r x r`
/// blocks. The top of the vertical leg is clamped and the free end of the
/// horizontal leg (`x = 100`) carries a downward traction.
fn l_profile(r: usize, load: f64) -> MacroCase {
    let n = 2 * r;
    let h = L_PROFILE_LEG / r as f64;
    let in_domain = |i: usize, j: usize| i < r || j < r; // element (i, j) of the 2r x 2r lattice
    let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let touches = [(i.wrapping_sub(1), j.wrapping_sub(1)), (i, j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j)]
                .iter()
                .any(|&(a, b)| a < n && b < n && in_domain(a, b));
            if touches {
                index[j * (n + 1) + i] = nodes.len();
                nodes.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    let id = |i: usize, j: usize| index[j * (n + 1) + i];
    let mut elements = Vec::with_capacity(3 * r * r);
    for j in 0..n {
        for i in 0..n {
            if in_domain(i, j) {
                elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    let dirichlet = (0..=r).flat_map(|i| [2 * id(i, n), 2 * id(i, n) + 1]).collect();
    let edge_loads = (0..r)
        .map(|j| EdgeLoad {
            nodes: [id(n, j), id(n, j + 1)],
            traction: [0.0, -load],
        })
        .collect();
    MacroCase {
        name: CaseName::LProfile,
        resolution: r,
        nodes,
        elements,
        quad_points: Vec::new(),
        dirichlet,
        edge_loads,
        load_steps: 5,
    }
}

impl MacroCase {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_gauss_points(&self) -> usize {
        4 * self.elements.len()
    }

    /// Consistent nodal forces of the full-load tractions.
    pub fn external_force(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_dofs()];
        for load in &self.edge_loads {
            let [a, b] = load.nodes;
            let len = ((self.nodes[b][0] - self.nodes[a][0]).powi(2)
                + (self.nodes[b][1] - self.nodes[a][1]).powi(2))
            .sqrt();
            for k in [a, b] {
                f[2 * k] += 0.5 * len * load.traction[0];
                f[2 * k + 1] += 0.5 * len * load.traction[1];
            }
        }
        f
    }

    pub fn area(&self) -> f64 {
        self.quad_points.iter().flatten().map(|q| q.weight).sum()
    }

    /// Element dof indices in local order.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let c = self.elements[e];
        [
            2 * c[0],
            2 * c[0] + 1,
            2 * c[1],
            2 * c[1] + 1,
            2 * c[2],
            2 * c[2] + 1,
            2 * c[3],
            2 * c[3] + 1,
        ]
    }

    pub fn gather(&self, d: &[f64], e: usize) -> [f64; 8] {
        self.element_dofs(e).map(|i| d[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cook_corners_at_any_resolution() {
        for r in [1, 3, 8] {
            let c = build_macro_case(CaseName::CooksMembrane, r).unwrap();
            let corners = [0, r, (r + 1) * (r + 1) - 1, r * (r + 1)];
            for (k, expect) in corners.iter().zip(COOK_CORNERS) {
                assert_eq!(c.nodes[*k], expect);
            }
            assert!((c.area() - 0.5 * 48.0 * (44.0 + 16.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_resolution_quadruples_elements() {
        for name in CaseName::ALL {
            let a = build_macro_case(name, 3).unwrap();
            let b = build_macro_case(name, 6).unwrap();
            assert_eq!(b.n_elements(), 4 * a.n_elements());
        }
    }

    #[test]
    fn l_profile_geometry() {
        let c = build_macro_case(CaseName::LProfile, 4).unwrap();
        assert_eq!(c.n_elements(), 48);
        assert_eq!(c.n_nodes(), 3 * 25 - 2 * 5);
        assert!((c.area() - 7500.0).abs() < 1e-9);
        let fixed: Vec<_> = c.dirichlet.iter().map(|&d| c.nodes[d / 2]).collect();
        assert!(fixed.iter().all(|x| x[1] == 100.0 && x[0] <= 50.0));
    }

    #[test]
    fn external_force_totals_traction_times_length() {
        let c = build_macro_case_with_load(CaseName::CooksMembrane, 4, 2.0, 5).unwrap();
        let f = c.external_force();
        let fy: f64 = f.iter().skip(1).step_by(2).sum();
        assert!((fy - 2.0 * 16.0).abs() < 1e-12);
        let l = build_macro_case_with_load(CaseName::LProfile, 3, 1.5, 5).unwrap();
        let fy: f64 = l.external_force().iter().skip(1).step_by(2).sum();
        assert!((fy + 1.5 * 50.0).abs() < 1e-12);
    }

    #[test]
    fn names_parse() {
        assert_eq!("l_profile".parse::<CaseName>().unwrap(), CaseName::LProfile);
        assert!(matches!("beam".parse::<CaseName>(), Err(Error::UnknownCase(_))));
        assert!(build_macro_case(CaseName::LProfile, 0).is_err());
    }
}
