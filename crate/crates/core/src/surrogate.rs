//! POD-DeepONet micro evaluator: the branch network predicts POD
//! coefficients, strains follow from the precomputed mode gradients, and
//! stresses come from the same constitutive laws the reference solver uses.

use crate::error::{Error, Result};
use crate::mechanics::{self, MaterialParams, Phase, Strain2D, Stress2D, Tangent3x3};
use crate::net::BranchNet;
use crate::pod::{self, PodBasis};
use crate::rve::mesh::RveMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMode {
    #[default]
    Analytic,
    /// Central differences of the homogenized stress, step [`FD_STEP`].
    FiniteDifference,
}

pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MicroPrediction {
    pub u_nodes: Vec<f64>,
    pub eps_q: Vec<Strain2D>,
    pub sig_q: Vec<Stress2D>,
    pub sigma_bar: Stress2D,
    pub tangent: Tangent3x3,
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    net: BranchNet,
    basis: PodBasis,
    mesh: RveMesh,
    params: MaterialParams,
    /// Voigt symmetric gradient of mode `k` at point `q`, index `k * nq + q`.
    sym_modes: Vec<[f64; 3]>,
    sym_phi0: Vec<[f64; 3]>,
    weights: Vec<f64>,
    phases: Vec<Phase>,
    volume: f64,
    pub tangent_mode: TangentMode,
}

impl SurrogateModel {
    pub fn new(net: BranchNet, mut basis: PodBasis, mesh: &RveMesh, params: &MaterialParams) -> Result<Self> {
        params.validate()?;
        pod::check_mesh(&basis, mesh)?;
        if net.p() != basis.p {
            return Err(Error::DimensionMismatch {
                expected: basis.p,
                got: net.p(),
            });
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("branch network parameters".into()));
        }
        let nq = mesh.n_quad_points();
        if !basis.has_gradients() || basis.n_quad_points() != nq {
            pod::mode_gradients(&mut basis, mesh)?;
        }
        let sym = |g: &[f64]| -> Vec<[f64; 3]> { g.chunks_exact(4).map(pod::sym_voigt).collect() };
        let sym_modes = sym(&basis.grad_modes);
        let sym_phi0 = sym(&basis.grad_phi0);
        let weights = mesh.quad_point_weights();
        let volume = weights.iter().sum();
        Ok(Self {
            net,
            basis,
            mesh: mesh.clone(),
            params: *params,
            sym_modes,
            sym_phi0,
            weights,
            phases: mesh.quad_point_phases(),
            volume,
            tangent_mode: TangentMode::Analytic,
        })
    }

    pub fn net(&self) -> &BranchNet {
        &self.net
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn mesh(&self) -> &RveMesh {
        &self.mesh
    }

    pub fn params(&self) -> &MaterialParams {
        &self.params
    }

    pub fn p(&self) -> usize {
        self.basis.p
    }

    pub fn coefficients(&self, eps_bar: &Strain2D) -> Result<Vec<f64>> {
        self.net.forward(eps_bar)
    }

    pub fn predict_displacement(&self, eps_bar: &Strain2D) -> Result<Vec<f64>> {
        self.basis.reconstruct(&self.coefficients(eps_bar)?)
    }

    /// Strain at every quadrature point for given POD coefficients.
    pub fn strain_from_coefficients(&self, b: &[f64]) -> Result<Vec<Strain2D>> {
        if b.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: b.len(),
            });
        }
        let nq = self.weights.len();
        Ok((0..nq).map(|q| Strain2D::from_voigt(self.strain_voigt(b, q))).collect())
    }

    #[inline]
    fn strain_voigt(&self, b: &[f64], q: usize) -> [f64; 3] {
        let nq = self.weights.len();
        let mut e = self.sym_phi0[q];
        for (k, bk) in b.iter().enumerate() {
            let g = &self.sym_modes[k * nq + q];
            e[0] += bk * g[0];
            e[1] += bk * g[1];
            e[2] += bk * g[2];
        }
        e
    }

    pub fn galerkin_strain(&self, eps_bar: &Strain2D) -> Result<Vec<Strain2D>> {
        self.strain_from_coefficients(&self.coefficients(eps_bar)?)
    }

    pub fn stress_from_strain(&self, eps_q: &[Strain2D]) -> Vec<Stress2D> {
        eps_q
            .iter()
            .zip(&self.phases)
            .map(|(e, &ph)| mechanics::stress(e, ph, &self.params))
            .collect()
    }

    pub fn surrogate_stress(&self, eps_bar: &Strain2D) -> Result<Vec<Stress2D>> {
        Ok(self.stress_from_strain(&self.galerkin_strain(eps_bar)?))
    }

    pub fn average(&self, sig_q: &[Stress2D]) -> Stress2D {
        let mut acc = Stress2D::ZERO;
        for (s, w) in sig_q.iter().zip(&self.weights) {
            acc.add_scaled(s, *w);
        }
        acc.scaled(1.0 / self.volume)
    }

    pub fn surrogate_homogenize(&self, eps_bar: &Strain2D) -> Result<Stress2D> {
        let b = self.coefficients(eps_bar)?;
        let mut acc = Stress2D::ZERO;
        for q in 0..self.weights.len() {
            let e = Strain2D::from_voigt(self.strain_voigt(&b, q));
            acc.add_scaled(&mechanics::stress(&e, self.phases[q], &self.params), self.weights[q]);
        }
        Ok(acc.scaled(1.0 / self.volume))
    }

    /// Homogenized stress and `d sigma_bar / d eps_bar`.
    pub fn evaluate(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)> {
        match self.tangent_mode {
            TangentMode::Analytic => self.evaluate_analytic(eps_bar),
            TangentMode::FiniteDifference => Ok((
                self.surrogate_homogenize(eps_bar)?,
                self.finite_difference_tangent(eps_bar, FD_STEP)?,
            )),
        }
    }

    fn evaluate_analytic(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)> {
        let (b, jac) = self.net.forward_with_jacobian(eps_bar)?;
        let p = self.p();
        let nq = self.weights.len();
        let mut acc = Stress2D::ZERO;
        // a[i * p + k] = sum_q w C_q G_qk, row i of d sigma_bar / d b
        let mut a = vec![0.0; 3 * p];
        for q in 0..nq {
            let e = Strain2D::from_voigt(self.strain_voigt(&b, q));
            let (s, c) = mechanics::stress_and_tangent(&e, self.phases[q], &self.params);
            let w = self.weights[q];
            acc.add_scaled(&s, w);
            for k in 0..p {
                let g = &self.sym_modes[k * nq + q];
                for i in 0..3 {
                    a[i * p + k] += w * (c.0[i][0] * g[0] + c.0[i][1] * g[1] + c.0[i][2] * g[2]);
                }
            }
        }
        let inv = 1.0 / self.volume;
        let mut t = Tangent3x3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = inv * (0..p).map(|k| a[i * p + k] * jac[k * 3 + j]).sum::<f64>();
            }
        }
        Ok((acc.scaled(inv), t))
    }

    pub fn consistent_tangent(&self, eps_bar: &Strain2D) -> Result<Tangent3x3> {
        Ok(self.evaluate_analytic(eps_bar)?.1)
    }

    pub fn finite_difference_tangent(&self, eps_bar: &Strain2D, h: f64) -> Result<Tangent3x3> {
        let mut t = Tangent3x3::ZERO;
        for j in 0..3 {
            let mut p = eps_bar.to_voigt();
            let mut m = p;
            p[j] += h;
            m[j] -= h;
            let sp = self.surrogate_homogenize(&Strain2D::from_voigt(p))?.to_voigt();
            let sm = self.surrogate_homogenize(&Strain2D::from_voigt(m))?.to_voigt();
            for i in 0..3 {
                t.0[i][j] = (sp[i] - sm[i]) / (2.0 * h);
            }
        }
        Ok(t)
    }

    /// All fields for `eps_bar`.
    pub fn predict(&self, eps_bar: &Strain2D) -> Result<MicroPrediction> {
        let b = self.coefficients(eps_bar)?;
        let u_nodes = self.basis.reconstruct(&b)?;
        let eps_q = self.strain_from_coefficients(&b)?;
        let sig_q = self.stress_from_strain(&eps_q);
        let sigma_bar = self.average(&sig_q);
        let (_, tangent) = self.evaluate(eps_bar)?;
        Ok(MicroPrediction {
            u_nodes,
            eps_q,
            sig_q,
            sigma_bar,
            tangent,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mlp::Normalizer;
    use crate::pod::compute_pod;
    use crate::rve::mesh::build_rve_mesh;
    use crate::rve::sampling::lhs_sample;
    use crate::rve::snapshots::generate_snapshots;
    use crate::rve::solver::MicroSolver;

    fn model() -> SurrogateModel {
        let mesh = build_rve_mesh(8, 0.55).unwrap();
        let params = MaterialParams::default();
        let solver = MicroSolver::new(&mesh, &params).unwrap();
        let set = lhs_sample(12, 0.04, 1).unwrap();
        let snap = generate_snapshots(&solver, &set, 1e-9, 20).unwrap();
        let basis = compute_pod(&snap, 4).unwrap();
        let mut net = BranchNet::initialize(4, 3).unwrap();
        net.input_norm = Normalizer {
            mean: vec![0.0; 3],
            scale: vec![0.023; 3],
        };
        net.output_norm = Normalizer {
            mean: vec![0.0; 4],
            scale: vec![0.05, 0.02, 0.01, 0.005],
        };
        SurrogateModel::new(net, basis, &mesh, &params).unwrap()
    }

    #[test]
    fn zero_branch_output_gives_mean_field() {
        let mut m = model();
        m.net.mlp.params.iter_mut().for_each(|p| *p = 0.0);
        let e = Strain2D::new(0.01, 0.02, 0.0);
        assert_eq!(m.predict_displacement(&e).unwrap(), m.basis.phi0);
        let t = m.consistent_tangent(&e).unwrap();
        assert_eq!(t, Tangent3x3::ZERO);
    }

    #[test]
    fn galerkin_strain_equals_fe_strain_of_reconstruction() {
        let m = model();
        let e = Strain2D::new(-0.011, -0.036, 0.017);
        let u = m.predict_displacement(&e).unwrap();
        let eps = m.galerkin_strain(&e).unwrap();
        let mut q = 0;
        for el in 0..m.mesh.n_elements() {
            let ue = m.mesh.gather(&u, el);
            for qp in &m.mesh.quad_points[el] {
                let direct = qp.strain(&ue);
                for (a, b) in direct.iter().zip(eps[q].to_voigt()) {
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-6));
                }
                q += 1;
            }
        }
    }

    #[test]
    fn analytic_tangent_matches_finite_differences() {
        let m = model();
        for e in [Strain2D::new(0.01, -0.02, 0.03), Strain2D::new(-0.03, 0.0, 0.01)] {
            let t = m.consistent_tangent(&e).unwrap();
            let fd = m.finite_difference_tangent(&e, FD_STEP).unwrap();
            assert!(t.rel_diff(&fd) < 1e-4, "rel diff {}", t.rel_diff(&fd));
        }
    }

    #[test]
    fn evaluate_paths_agree_on_stress() {
        let mut m = model();
        let e = Strain2D::new(0.02, 0.01, -0.01);
        let (s, _) = m.evaluate(&e).unwrap();
        let direct = m.surrogate_homogenize(&e).unwrap();
        let pred = m.predict(&e).unwrap();
        for (a, b) in [s, pred.sigma_bar].iter().flat_map(|x| x.to_voigt()).zip(direct.to_voigt().repeat(2)) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        m.tangent_mode = TangentMode::FiniteDifference;
        let (s2, _) = m.evaluate(&e).unwrap();
        assert_eq!(s2, direct);
    }

    #[test]
    fn mismatched_parts_rejected() {
        let m = model();
        let other = build_rve_mesh(9, 0.55).unwrap();
        assert!(SurrogateModel::new(m.net.clone(), m.basis.clone(), &other, &m.params).is_err());
        let wrong_p = BranchNet::initialize(3, 1).unwrap();
        assert!(SurrogateModel::new(wrong_p, m.basis.clone(), &m.mesh, &m.params).is_err());
    }
}
