//! wasm-bindgen bindings for the static demo page in `www/`.

use hyperfe::mechanics::{self, MaterialParams, Phase, Strain2D};
use hyperfe::rve::{build_rve_mesh, lhs_sample, solve_micro, MicroSolution, RveMesh};
use wasm_bindgen::prelude::*;

fn js_err(e: hyperfe::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn phase(name: &str) -> Result<Phase, JsError> {
    match name {
        "fiber" => Ok(Phase::Fiber),
        "matrix" => Ok(Phase::Matrix),
        other => Err(JsError::new(&format!("unknown phase '{other}'"))),
    }
}

/// Stress along a proportional strain path `t * (exx, eyy, gxy)`, `t` in
/// `[0, 1]`. Returns `n` rows of `[t, sigma_xx, sigma_yy, tau_xy]`, flattened.
#[wasm_bindgen]
pub fn stress_path(phase_name: &str, exx: f64, eyy: f64, gxy: f64, n: usize) -> Result<Vec<f64>, JsError> {
    let ph = phase(phase_name)?;
    let p = MaterialParams::default();
    let n = n.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let s = mechanics::stress(&Strain2D::new(t * exx, t * eyy, t * gxy), ph, &p);
        out.extend([t, s.sig_xx, s.sig_yy, s.tau_xy]);
    }
    Ok(out)
}

/// Matrix shear modulus against the deviatoric strain norm, `n` rows of
/// `[norm, G]` for pure shear up to `gamma_max`.
#[wasm_bindgen]
pub fn matrix_shear_curve(gamma_max: f64, n: usize) -> Vec<f64> {
    let p = MaterialParams::default();
    let n = n.max(2);
    (0..n)
        .flat_map(|i| {
            let e = Strain2D::new(0.0, 0.0, gamma_max * i as f64 / (n - 1) as f64);
            [mechanics::dev_norm(&e), mechanics::matrix_shear_modulus(&e, &p)]
        })
        .collect()
}

/// Latin hypercube design, `n` rows of `[eps_xx, eps_yy, gamma_xy]`.
#[wasm_bindgen]
pub fn lhs_points(n: usize, magnitude: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let set = lhs_sample(n, magnitude, seed as u64).map_err(js_err)?;
    Ok(set.samples.iter().flat_map(|s| s.to_voigt()).collect())
}

/// Periodic cell with its most recent solution.
#[wasm_bindgen]
pub struct RveDemo {
    mesh: RveMesh,
    params: MaterialParams,
    last: Option<MicroSolution>,
}

#[wasm_bindgen]
impl RveDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n_per_side: usize, fiber_fraction: f64) -> Result<RveDemo, JsError> {
        Ok(RveDemo {
            mesh: build_rve_mesh(n_per_side, fiber_fraction).map_err(js_err)?,
            params: MaterialParams::default(),
            last: None,
        })
    }

    pub fn n_per_side(&self) -> usize {
        self.mesh.n_per_side
    }

    pub fn realized_fiber_fraction(&self) -> f64 {
        self.mesh.realized_fiber_fraction()
    }

    /// Solves for the macro strain and returns the homogenized stress
    /// `[sigma_xx, sigma_yy, tau_xy, sigma_zz, newton_iterations]`.
    pub fn solve(&mut self, exx: f64, eyy: f64, gxy: f64) -> Result<Vec<f64>, JsError> {
        let sol = solve_micro(&self.mesh, &self.params, &Strain2D::new(exx, eyy, gxy), 1e-9, 30).map_err(js_err)?;
        let s = hyperfe::rve::homogenize_stress(&sol, &self.mesh).map_err(js_err)?;
        let iters = sol.newton_iters as f64;
        self.last = Some(sol);
        Ok(vec![s.sig_xx, s.sig_yy, s.tau_xy, s.sig_zz, iters])
    }

    /// Element averages of a field of the last solution, row-major from the
    /// bottom-left element. Fields: eps_xx, eps_yy, gamma_xy, sigma_xx,
    /// sigma_yy, tau_xy, von_mises, phase.
    pub fn element_field(&self, name: &str) -> Result<Vec<f64>, JsError> {
        if name == "phase" {
            return Ok(self.mesh.phase.iter().map(|p| f64::from(*p == Phase::Fiber)).collect());
        }
        let sol = self.last.as_ref().ok_or_else(|| JsError::new("no solution yet"))?;
        let value = |q: usize| -> Option<f64> {
            let e = sol.eps_q[q].to_voigt();
            let s = &sol.sig_q[q];
            Some(match name {
                "eps_xx" => e[0],
                "eps_yy" => e[1],
                "gamma_xy" => e[2],
                "sigma_xx" => s.sig_xx,
                "sigma_yy" => s.sig_yy,
                "tau_xy" => s.tau_xy,
                "von_mises" => {
                    let (a, b, c) = (s.sig_xx, s.sig_yy, s.sig_zz);
                    (0.5 * ((a - b).powi(2) + (b - c).powi(2) + (c - a).powi(2)) + 3.0 * s.tau_xy.powi(2)).sqrt()
                }
                _ => return None,
            })
        };
        (0..self.mesh.n_elements())
            .map(|e| {
                (0..4)
                    .map(|q| value(4 * e + q))
                    .sum::<Option<f64>>()
                    .map(|v| v / 4.0)
                    .ok_or_else(|| JsError::new(&format!("unknown field '{name}'")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_have_requested_rows() {
        let v = matrix_shear_curve(0.04, 5);
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 0.0);
        assert!(v[2] < v[4] && v[3] > v[5]);
        assert_eq!(lhs_points(7, 0.04, 1).unwrap().len(), 21);
    }

    #[test]
    fn demo_cell_solves() {
        let mut d = RveDemo::new(8, 0.55).unwrap();
        let s = d.solve(0.01, 0.0, 0.0).unwrap();
        assert!(s[0] > 0.0);
        assert_eq!(d.element_field("sigma_xx").unwrap().len(), 64);
        assert_eq!(d.element_field("phase").unwrap().len(), 64);
    }
}
