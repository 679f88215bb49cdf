//! Periodic RVE boundary-value problem.
//!
//! The displacement is split as `u(x) = eps_bar . x + w(x)` with `w` periodic
//! on opposite faces and pinned at the corner node `(-L/2, -L/2)`. Periodicity
//! is imposed by condensing every boundary node onto its master, so the
//! unknowns are the fluctuation components of the `n^2 - 1` free masters and
//! the tangent stays symmetric positive definite.

use crate::error::{Error, Result};
use crate::linalg::{SpdFactor, SpdPattern};
use crate::mechanics::{self, MaterialParams, Strain2D, Stress2D, Tangent3x3};
use crate::rve::mesh::RveMesh;

const NONE: u32 = u32::MAX;
const MAX_BACKTRACKS: usize = 12;

#[derive(Debug, Clone)]
pub struct MicroSolution {
    pub eps_bar: Strain2D,
    /// Total displacement (affine + fluctuation), stacked `[u_x; u_y]`.
    pub u: Vec<f64>,
    /// Periodic fluctuation, stacked like `u`.
    pub fluctuation: Vec<f64>,
    /// Strain at each quadrature point, element-major.
    pub eps_q: Vec<Strain2D>,
    pub sig_q: Vec<Stress2D>,
    pub converged: bool,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

/// Reusable solver for one mesh: equation numbering, sparsity pattern and
/// symbolic factorization are computed once.
#[derive(Debug, Clone)]
pub struct MicroSolver {
    mesh: RveMesh,
    params: MaterialParams,
    n_eq: usize,
    /// Equation index of every element dof (`NONE` for the pinned node).
    elem_eq: Vec<[u32; 8]>,
    /// Position in the lower-CSC value array of each `(a, b)` element entry.
    scatter: Vec<[u32; 64]>,
    pattern: SpdPattern,
}

struct Assembly {
    residual: Vec<f64>,
    values: Vec<f64>,
    eps_q: Vec<Strain2D>,
    sig_q: Vec<Stress2D>,
    /// `sum_q B^T C w` per equation and macro-strain component, column-major `n_eq x 3`.
    coupling: Vec<f64>,
    mean_tangent: Tangent3x3,
}

impl MicroSolver {
    pub fn new(mesh: &RveMesh, params: &MaterialParams) -> Result<Self> {
        params.validate()?;
        let m = mesh.n_nodes();
        let mut master_eq = vec![NONE; m];
        let mut next = 0u32;
        for k in 0..m {
            if mesh.periodic_map[k] == k && k != 0 {
                master_eq[k] = next;
                next += 2;
            }
        }
        let n_eq = next as usize;
        let elem_eq: Vec<[u32; 8]> = mesh
            .elements
            .iter()
            .map(|conn| {
                let mut out = [NONE; 8];
                for (a, &k) in conn.iter().enumerate() {
                    let base = master_eq[mesh.periodic_map[k]];
                    if base != NONE {
                        out[2 * a] = base;
                        out[2 * a + 1] = base + 1;
                    }
                }
                out
            })
            .collect();

        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n_eq];
        for eqs in &elem_eq {
            for &r in eqs.iter().filter(|&&r| r != NONE) {
                for &c in eqs.iter().filter(|&&c| c != NONE && c <= r) {
                    columns[c as usize].push(r as usize);
                }
            }
        }
        for col in columns.iter_mut() {
            col.sort_unstable();
            col.dedup();
        }
        let pattern = SpdPattern::new(&columns)?;
        let scatter = elem_eq
            .iter()
            .map(|eqs| {
                let mut s = [NONE; 64];
                for a in 0..8 {
                    for b in 0..8 {
                        let (r, c) = (eqs[a], eqs[b]);
                        if r != NONE && c != NONE && r >= c {
                            s[8 * a + b] = pattern
                                .position(r as usize, c as usize)
                                .expect("entry in pattern") as u32;
                        }
                    }
                }
                s
            })
            .collect();
        Ok(Self {
            mesh: mesh.clone(),
            params: *params,
            n_eq,
            elem_eq,
            scatter,
            pattern,
        })
    }

    pub fn mesh(&self) -> &RveMesh {
        &self.mesh
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn n_equations(&self) -> usize {
        self.n_eq
    }

    fn assemble(&self, eps_bar: &Strain2D, w: &[f64], with_matrix: bool) -> Assembly {
        let mesh = &self.mesh;
        let nq = mesh.n_quad_points();
        let mut asm = Assembly {
            residual: vec![0.0; self.n_eq],
            values: if with_matrix {
                vec![0.0; self.pattern.nnz()]
            } else {
                Vec::new()
            },
            eps_q: Vec::with_capacity(nq),
            sig_q: Vec::with_capacity(nq),
            coupling: if with_matrix {
                vec![0.0; 3 * self.n_eq]
            } else {
                Vec::new()
            },
            mean_tangent: Tangent3x3::ZERO,
        };
        let ebar = eps_bar.to_voigt();
        for (e, eqs) in self.elem_eq.iter().enumerate() {
            let mut ue = [0.0; 8];
            for l in 0..8 {
                if eqs[l] != NONE {
                    ue[l] = w[eqs[l] as usize];
                }
            }
            let mut re = [0.0; 8];
            let mut ke = [[0.0; 8]; 8];
            let mut le = [[0.0; 3]; 8];
            for qp in &mesh.quad_points[e] {
                let de = qp.strain(&ue);
                let eps = Strain2D::from_voigt([ebar[0] + de[0], ebar[1] + de[1], ebar[2] + de[2]]);
                let (sig, c) = mechanics::stress_and_tangent(&eps, mesh.phase[e], &self.params);
                let s = sig.to_voigt();
                let wt = qp.weight;
                for a in 0..4 {
                    let [dx, dy] = qp.dndx[a];
                    re[2 * a] += wt * (dx * s[0] + dy * s[2]);
                    re[2 * a + 1] += wt * (dy * s[1] + dx * s[2]);
                }
                if with_matrix {
                    let c = &c.0;
                    // CB, 3 x 8
                    let mut cb = [[0.0; 8]; 3];
                    for a in 0..4 {
                        let [dx, dy] = qp.dndx[a];
                        for r in 0..3 {
                            cb[r][2 * a] = c[r][0] * dx + c[r][2] * dy;
                            cb[r][2 * a + 1] = c[r][1] * dy + c[r][2] * dx;
                        }
                    }
                    for a in 0..4 {
                        let [dx, dy] = qp.dndx[a];
                        for col in 0..8 {
                            ke[2 * a][col] += wt * (dx * cb[0][col] + dy * cb[2][col]);
                            ke[2 * a + 1][col] += wt * (dy * cb[1][col] + dx * cb[2][col]);
                        }
                        // B^T C (C symmetric) = (CB)^T
                        for j in 0..3 {
                            le[2 * a][j] += wt * cb[j][2 * a];
                            le[2 * a + 1][j] += wt * cb[j][2 * a + 1];
                        }
                    }
                    let ct = Tangent3x3(*c);
                    asm.mean_tangent.add_scaled(&ct, wt);
                }
                asm.eps_q.push(eps);
                asm.sig_q.push(sig);
            }
            for l in 0..8 {
                if eqs[l] != NONE {
                    asm.residual[eqs[l] as usize] += re[l];
                }
            }
            if with_matrix {
                let sc = &self.scatter[e];
                for a in 0..8 {
                    for b in 0..8 {
                        let pos = sc[8 * a + b];
                        if pos != NONE {
                            asm.values[pos as usize] += ke[a][b];
                        }
                    }
                    if eqs[a] != NONE {
                        for j in 0..3 {
                            asm.coupling[j * self.n_eq + eqs[a] as usize] += le[a][j];
                        }
                    }
                }
            }
        }
        asm
    }

    fn expand(&self, w: &[f64]) -> Vec<f64> {
        let m = self.mesh.n_nodes();
        let mut full = vec![0.0; 2 * m];
        for (e, conn) in self.mesh.elements.iter().enumerate() {
            for (a, &k) in conn.iter().enumerate() {
                for c in 0..2 {
                    let eq = self.elem_eq[e][2 * a + c];
                    if eq != NONE {
                        full[c * m + k] = w[eq as usize];
                    }
                }
            }
        }
        full
    }

    /// Newton solve of the periodic cell problem for the macro strain `eps_bar`.
    pub fn solve(&self, eps_bar: &Strain2D, tol: f64, max_iter: usize) -> Result<MicroSolution> {
        Ok(self.solve_impl(eps_bar, tol, max_iter, false)?.0)
    }

    /// Solves and also returns the homogenized consistent tangent
    /// `d sigma_bar / d eps_bar` from static condensation of the converged
    /// cell stiffness.
    pub fn solve_with_tangent(
        &self,
        eps_bar: &Strain2D,
        tol: f64,
        max_iter: usize,
    ) -> Result<(MicroSolution, Tangent3x3)> {
        let (sol, tangent) = self.solve_impl(eps_bar, tol, max_iter, true)?;
        Ok((sol, tangent.expect("tangent requested")))
    }

    fn solve_impl(
        &self,
        eps_bar: &Strain2D,
        tol: f64,
        max_iter: usize,
        want_tangent: bool,
    ) -> Result<(MicroSolution, Option<Tangent3x3>)> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        if eps_bar.to_voigt().iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("macro strain {eps_bar:?}")));
        }
        let mut w = vec![0.0; self.n_eq];
        let mut asm = self.assemble(eps_bar, &w, true);
        let mut rnorm = inf_norm(&asm.residual);
        let mut iters = 0;
        let mut factor: Option<SpdFactor> = None;
        while rnorm > tol && iters < max_iter {
            let f = self.pattern.factorize(&asm.values)?;
            let mut dw: Vec<f64> = asm.residual.iter().map(|r| -r).collect();
            f.solve_in_place(&mut dw);
            if dw.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular("micro tangent solve produced non-finite update".into()));
            }
            let r0 = l2_norm(&asm.residual);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_BACKTRACKS {
                let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + alpha * b).collect();
                let trial_asm = self.assemble(eps_bar, &trial, true);
                if l2_norm(&trial_asm.residual) < r0 {
                    accepted = Some((trial, trial_asm));
                    break;
                }
                alpha *= 0.5;
            }
            iters += 1;
            let (trial, trial_asm) = match accepted {
                Some(t) => t,
                None => {
                    // no descent in the residual: accept the full step and let the
                    // iteration cap decide
                    let trial: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + b).collect();
                    let trial_asm = self.assemble(eps_bar, &trial, true);
                    (trial, trial_asm)
                }
            };
            w = trial;
            asm = trial_asm;
            rnorm = inf_norm(&asm.residual);
            factor = None;
        }
        let converged = rnorm <= tol;
        let tangent = if want_tangent && converged {
            let f = match factor.take() {
                Some(f) => f,
                None => self.pattern.factorize(&asm.values)?,
            };
            Some(self.condensed_tangent(&asm, &f))
        } else if want_tangent {
            return Err(Error::NotConverged {
                iterations: iters,
                residual: rnorm,
            });
        } else {
            None
        };
        let fluctuation = self.expand(&w);
        let mut u = self.mesh.affine_field(eps_bar);
        for (ui, wi) in u.iter_mut().zip(&fluctuation) {
            *ui += wi;
        }
        Ok((
            MicroSolution {
                eps_bar: *eps_bar,
                u,
                fluctuation,
                eps_q: asm.eps_q,
                sig_q: asm.sig_q,
                converged,
                newton_iters: iters,
                residual_norm: rnorm,
            },
            tangent,
        ))
    }

    fn condensed_tangent(&self, asm: &Assembly, f: &SpdFactor) -> Tangent3x3 {
        let n = self.n_eq;
        let mut x = asm.coupling.clone();
        f.solve_columns(&mut x, 3);
        let vol = self.mesh.volume();
        let mut c = Tangent3x3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let lkl: f64 = (0..n).map(|k| asm.coupling[i * n + k] * x[j * n + k]).sum();
                c.0[i][j] = (asm.mean_tangent.0[i][j] - lkl) / vol;
            }
        }
        c
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot convenience wrapper around [`MicroSolver`].
pub fn solve_micro(
    mesh: &RveMesh,
    params: &MaterialParams,
    eps_bar: &Strain2D,
    tol: f64,
    max_iter: usize,
) -> Result<MicroSolution> {
    MicroSolver::new(mesh, params)?.solve(eps_bar, tol, max_iter)
}

/// Volume average of a quadrature-point stress field over the cell.
pub fn average_stress(mesh: &RveMesh, sig_q: &[Stress2D]) -> Stress2D {
    let mut acc = Stress2D::ZERO;
    let mut vol = 0.0;
    for (e, qps) in mesh.quad_points.iter().enumerate() {
        for (q, qp) in qps.iter().enumerate() {
            acc.add_scaled(&sig_q[4 * e + q], qp.weight);
            vol += qp.weight;
        }
    }
    acc.scaled(1.0 / vol)
}

pub fn average_strain(mesh: &RveMesh, eps_q: &[Strain2D]) -> Strain2D {
    let mut acc = [0.0; 3];
    let mut vol = 0.0;
    for (e, qps) in mesh.quad_points.iter().enumerate() {
        for (q, qp) in qps.iter().enumerate() {
            let v = eps_q[4 * e + q].to_voigt();
            for c in 0..3 {
                acc[c] += qp.weight * v[c];
            }
            vol += qp.weight;
        }
    }
    Strain2D::from_voigt(acc.map(|a| a / vol))
}

/// Homogenized macroscale stress of a converged cell solution.
pub fn homogenize_stress(sol: &MicroSolution, mesh: &RveMesh) -> Result<Stress2D> {
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.newton_iters,
            residual: sol.residual_norm,
        });
    }
    if sol.sig_q.len() != mesh.n_quad_points() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_quad_points(),
            got: sol.sig_q.len(),
        });
    }
    Ok(average_stress(mesh, &sol.sig_q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::{isotropic_tangent, Phase};
    use crate::rve::mesh::build_rve_mesh;

    fn params() -> MaterialParams {
        MaterialParams::default()
    }

    #[test]
    fn zero_strain_gives_zero_fields() {
        let mesh = build_rve_mesh(8, 0.55).unwrap();
        let sol = solve_micro(&mesh, &params(), &Strain2D::ZERO, 1e-10, 10).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.newton_iters, 0);
        assert!(sol.u.iter().all(|&v| v == 0.0));
        let s = homogenize_stress(&sol, &mesh).unwrap();
        assert_eq!(s, Stress2D::ZERO);
    }

    #[test]
    fn homogeneous_cell_has_uniform_strain() {
        let mesh = build_rve_mesh(8, 0.55).unwrap().with_uniform_phase(Phase::Fiber);
        let e = Strain2D::new(0.01, -0.02, 0.015);
        let (sol, c) = MicroSolver::new(&mesh, &params())
            .unwrap()
            .solve_with_tangent(&e, 1e-9, 10)
            .unwrap();
        assert!(sol.converged);
        for eq in &sol.eps_q {
            for (a, b) in eq.to_voigt().iter().zip(e.to_voigt()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(sol.fluctuation.iter().all(|v| v.abs() < 1e-12));
        let p = params();
        let analytic = isotropic_tangent(p.k_f, p.dev_factor * p.g_f);
        assert!(c.rel_diff(&analytic) < 1e-10);
        let sbar = homogenize_stress(&sol, &mesh).unwrap().to_voigt();
        let expect = analytic.mul_vec(e.to_voigt());
        for i in 0..3 {
            assert!((sbar[i] - expect[i]).abs() <= 1e-8 * expect[i].abs().max(1.0));
        }
    }

    #[test]
    fn composite_solution_is_periodic_and_averages_to_macro_strain() {
        let mesh = build_rve_mesh(12, 0.55).unwrap();
        let e = Strain2D::new(-0.011, -0.036, 0.017);
        let sol = solve_micro(&mesh, &params(), &e, 1e-9, 25).unwrap();
        assert!(sol.converged, "residual {}", sol.residual_norm);
        assert!(sol.newton_iters <= 8, "iterations {}", sol.newton_iters);
        let m = mesh.n_nodes();
        let wmax = sol.fluctuation.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        assert!(wmax > 0.0);
        for k in 0..m {
            let master = mesh.periodic_map[k];
            for c in 0..2 {
                let d = sol.fluctuation[c * m + k] - sol.fluctuation[c * m + master];
                assert!(d.abs() <= 1e-10 * wmax);
            }
        }
        let avg = average_strain(&mesh, &sol.eps_q).to_voigt();
        for (a, b) in avg.iter().zip(e.to_voigt()) {
            assert!((a - b).abs() <= 1e-8 * e.max_abs());
        }
    }

    #[test]
    fn condensed_tangent_matches_finite_differences() {
        let mesh = build_rve_mesh(8, 0.55).unwrap();
        let solver = MicroSolver::new(&mesh, &params()).unwrap();
        let e = Strain2D::new(0.012, -0.02, 0.025);
        let (_, c) = solver.solve_with_tangent(&e, 1e-10, 30).unwrap();
        let h = 1e-6;
        let mut fd = Tangent3x3::ZERO;
        for j in 0..3 {
            let mut p = e.to_voigt();
            let mut m = e.to_voigt();
            p[j] += h;
            m[j] -= h;
            let sp = homogenize_stress(&solver.solve(&Strain2D::from_voigt(p), 1e-11, 30).unwrap(), &mesh)
                .unwrap()
                .to_voigt();
            let sm = homogenize_stress(&solver.solve(&Strain2D::from_voigt(m), 1e-11, 30).unwrap(), &mesh)
                .unwrap()
                .to_voigt();
            for i in 0..3 {
                fd.0[i][j] = (sp[i] - sm[i]) / (2.0 * h);
            }
        }
        assert!(c.rel_diff(&fd) < 1e-5, "rel diff {}", c.rel_diff(&fd));
        assert!(c.asymmetry() < 1e-8);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let mesh = build_rve_mesh(8, 0.55).unwrap();
        let e = Strain2D::new(0.03, -0.03, 0.03);
        let sol = solve_micro(&mesh, &params(), &e, 1e-12, 1).unwrap();
        assert!(!sol.converged);
        assert!(homogenize_stress(&sol, &mesh).is_err());
        assert!(solve_micro(&mesh, &params(), &e, 0.0, 1).is_err());
    }
}
