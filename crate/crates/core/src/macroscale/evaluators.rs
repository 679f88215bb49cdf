use crate::error::{Error, Result};
use crate::macroscale::solver::MicroEvaluator;
use crate::mechanics::{isotropic_tangent, Strain2D, Stress2D, Tangent3x3};
use crate::rve::solver::{average_stress, MicroSolver};
use crate::surrogate::SurrogateModel;

/// Closed-form linear elastic response `sigma = C eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearElasticEvaluator {
    pub tangent: Tangent3x3,
}

impl LinearElasticEvaluator {
    pub fn isotropic(bulk: f64, shear: f64) -> Self {
        Self {
            tangent: isotropic_tangent(bulk, shear),
        }
    }
}

impl MicroEvaluator for LinearElasticEvaluator {
    fn evaluate(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)> {
        let [sxx, syy, txy] = self.tangent.mul_vec(eps_bar.to_voigt());
        Ok((
            Stress2D {
                sig_xx: sxx,
                sig_yy: syy,
                tau_xy: txy,
                sig_zz: 0.0,
            },
            self.tangent,
        ))
    }

    fn name(&self) -> &str {
        "linear"
    }
}

/// Reference FE²: a full periodic RVE solve at every Gauss point.
#[derive(Debug, Clone)]
pub struct Fe2Evaluator {
    pub solver: MicroSolver,
    pub tol: f64,
    pub max_iter: usize,
    pub range: Option<f64>,
}

impl Fe2Evaluator {
    pub fn new(solver: MicroSolver, tol: f64, max_iter: usize) -> Self {
        Self {
            solver,
            tol,
            max_iter,
            range: None,
        }
    }
}

impl MicroEvaluator for Fe2Evaluator {
    fn evaluate(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)> {
        let (sol, tangent) = self.solver.solve_with_tangent(eps_bar, self.tol, self.max_iter)?;
        if !sol.converged {
            return Err(Error::NotConverged {
                iterations: sol.newton_iters,
                residual: sol.residual_norm,
            });
        }
        Ok((average_stress(self.solver.mesh(), &sol.sig_q), tangent))
    }

    fn name(&self) -> &str {
        "fe2"
    }

    fn training_range(&self) -> Option<f64> {
        self.range
    }
}

/// Hybrid scheme: the POD-DeepONet surrogate at every Gauss point.
#[derive(Debug, Clone)]
pub struct SurrogateEvaluator {
    pub model: SurrogateModel,
    pub range: Option<f64>,
}

impl MicroEvaluator for SurrogateEvaluator {
    fn evaluate(&self, eps_bar: &Strain2D) -> Result<(Stress2D, Tangent3x3)> {
        self.model.evaluate(eps_bar)
    }

    fn name(&self) -> &str {
        "hybrid"
    }

    fn training_range(&self) -> Option<f64> {
        self.range
    }
}
