use std::time::{Duration, Instant};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::macroscale::case::MacroCase;
use crate::mechanics::{Strain2D, Stress2D, Tangent3x3};

/// Micro response at one macro Gauss point.
pub trait MicroEvaluator: Sync {
    fn evaluate(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)>;

    fn name(&self) -> &str;

    /// Half-width of the strain box the evaluator was built for, if any.
    fn training_range(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Newton stops once the residual ∞-norm drops to `tol` times the
    /// first residual of the load step.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    pub iteration: usize,
    pub residual: f64,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub micro: Duration,
    pub assembly: Duration,
    pub linear_solve: Duration,
    pub total: Duration,
    pub micro_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct MacroSolution {
    /// Interleaved nodal displacements.
    pub d: Vec<f64>,
    pub gp_strain: Vec<Strain2D>,
    pub gp_stress: Vec<Stress2D>,
    pub converged: bool,
    /// Load steps completed (equal to the case's step count on success).
    pub completed_steps: usize,
    pub log: Vec<IterationRecord>,
    pub timings: PhaseTimings,
    /// Largest number of Gauss points outside the evaluator's strain box in
    /// any single iteration.
    pub max_out_of_range: usize,
}

impl MacroSolution {
    pub fn dx(&self) -> Vec<f64> {
        self.d.iter().step_by(2).copied().collect()
    }

    pub fn dy(&self) -> Vec<f64> {
        self.d.iter().skip(1).step_by(2).copied().collect()
    }

    pub fn stress_component(&self, c: usize) -> Vec<f64> {
        self.gp_stress.iter().map(|s| s.to_voigt()[c]).collect()
    }

    pub fn max_abs_strain(&self) -> f64 {
        self.gp_strain.iter().fold(0.0, |m, e| m.max(e.max_abs()))
    }

    pub fn newton_iterations(&self) -> usize {
        self.log.iter().filter(|r| r.iteration > 0).count()
    }
}

/// Macro strains at all Gauss points (element-major) for displacements `d`.
pub fn gauss_point_strains(case: &MacroCase, d: &[f64]) -> Vec<Strain2D> {
    let mut out = Vec::with_capacity(case.n_gauss_points());
    for e in 0..case.n_elements() {
        let de = case.gather(d, e);
        for qp in &case.quad_points[e] {
            out.push(Strain2D::from_voigt(qp.strain(&de)));
        }
    }
    out
}

fn evaluate_all(
    evaluator: &dyn MicroEvaluator,
    strains: &[Strain2D],
) -> Result<Vec<(Stress2D, Tangent3x3)>> {
    let eval = |(j, e): (usize, &Strain2D)| {
        evaluator.evaluate(e).map_err(|source| Error::Evaluator {
            element: j / 4,
            gauss_point: j % 4,
            source: Box::new(source),
        })
    };
    #[cfg(feature = "parallel")]
    let out = strains.par_iter().enumerate().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let out = strains.iter().enumerate().map(eval).collect();
    out
}

/// Internal force and column-major dense stiffness, accumulated in element order.
fn assemble(case: &MacroCase, response: &[(Stress2D, Tangent3x3)]) -> (Vec<f64>, Vec<f64>) {
    let n = case.n_dofs();
    let mut f = vec![0.0; n];
    let mut k = vec![0.0; n * n];
    for e in 0..case.n_elements() {
        let dofs = case.element_dofs(e);
        let mut fe = [0.0; 8];
        let mut ke = [[0.0; 8]; 8];
        for (q, qp) in case.quad_points[e].iter().enumerate() {
            let (sig, c) = &response[4 * e + q];
            let s = sig.to_voigt();
            let c = &c.0;
            let w = qp.weight;
            let mut cb = [[0.0; 8]; 3];
            for a in 0..4 {
                let [dx, dy] = qp.dndx[a];
                fe[2 * a] += w * (dx * s[0] + dy * s[2]);
                fe[2 * a + 1] += w * (dy * s[1] + dx * s[2]);
                for r in 0..3 {
                    cb[r][2 * a] = c[r][0] * dx + c[r][2] * dy;
                    cb[r][2 * a + 1] = c[r][1] * dy + c[r][2] * dx;
                }
            }
            for a in 0..4 {
                let [dx, dy] = qp.dndx[a];
                for col in 0..8 {
                    ke[2 * a][col] += w * (dx * cb[0][col] + dy * cb[2][col]);
                    ke[2 * a + 1][col] += w * (dy * cb[1][col] + dx * cb[2][col]);
                }
            }
        }
        for a in 0..8 {
            f[dofs[a]] += fe[a];
            for b in 0..8 {
                k[dofs[b] * n + dofs[a]] += ke[a][b];
            }
        }
    }
    (f, k)
}

/// Incremental-iterative Newton solve of the macro problem.
pub fn macro_newton_solve(
    case: &MacroCase,
    evaluator: &dyn MicroEvaluator,
    opts: &SolverOptions,
) -> Result<MacroSolution> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument(format!("invalid solver options {opts:?}")));
    }
    let start = Instant::now();
    let n = case.n_dofs();
    let mut fixed = vec![false; n];
    for &i in &case.dirichlet {
        fixed[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let f_ext = case.external_force();

    let mut timings = PhaseTimings::default();
    let mut d = vec![0.0; n];
    let mut log = Vec::new();
    let mut max_out_of_range = 0;
    let mut strains = gauss_point_strains(case, &d);
    let mut stresses = vec![Stress2D::ZERO; case.n_gauss_points()];
    let mut converged = true;
    let mut completed_steps = 0;

    'steps: for step in 1..=case.load_steps {
        let lambda = step as f64 / case.load_steps as f64;
        let mut r0 = None;
        let mut iteration = 0;
        loop {
            strains = gauss_point_strains(case, &d);
            if let Some(range) = evaluator.training_range() {
                let outside = strains.iter().filter(|e| e.max_abs() > range).count();
                if outside > 0 {
                    log::warn!(
                        "{outside} Gauss points outside the strain range ±{range} of the {} evaluator (step {step}, iteration {iteration})",
                        evaluator.name()
                    );
                }
                max_out_of_range = max_out_of_range.max(outside);
            }
            let t = Instant::now();
            let response = evaluate_all(evaluator, &strains)?;
            timings.micro += t.elapsed();
            timings.micro_evaluations += strains.len();
            stresses = response.iter().map(|(s, _)| *s).collect();

            let t = Instant::now();
            let (f_int, k) = assemble(case, &response);
            let residual: Vec<f64> = free.iter().map(|&i| f_int[i] - lambda * f_ext[i]).collect();
            timings.assembly += t.elapsed();

            let rnorm = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if !rnorm.is_finite() {
                return Err(Error::NonFinite(format!("macro residual in step {step}")));
            }
            let reference = *r0.get_or_insert(rnorm);
            let rel = if reference > 0.0 { rnorm / reference } else { 0.0 };
            log.push(IterationRecord {
                step,
                iteration,
                residual: rnorm,
                relative_residual: rel,
            });
            if rnorm == 0.0 || rel <= opts.tol {
                completed_steps = step;
                break;
            }
            if iteration == opts.max_iter {
                log::warn!("macro Newton did not converge in step {step}: residual {rnorm:e}");
                converged = false;
                break 'steps;
            }

            let t = Instant::now();
            let nf = free.len();
            let mut kff = vec![0.0; nf * nf];
            for (jj, &j) in free.iter().enumerate() {
                for (ii, &i) in free.iter().enumerate() {
                    kff[jj * nf + ii] = k[j * n + i];
                }
            }
            let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
            let delta = linalg::dense_solve(&kff, &rhs)?;
            for (ii, &i) in free.iter().enumerate() {
                d[i] += delta[ii];
            }
            timings.linear_solve += t.elapsed();
            iteration += 1;
        }
    }
    timings.total = start.elapsed();
    Ok(MacroSolution {
        d,
        gp_strain: strains,
        gp_stress: stresses,
        converged,
        completed_steps,
        log,
        timings,
        max_out_of_range,
    })
}
