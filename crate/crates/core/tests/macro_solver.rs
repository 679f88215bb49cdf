use hyperfe::macroscale::{
    build_macro_case, build_macro_case_with_load, macro_newton_solve, relative_l2_error, CaseName, Fe2Evaluator,
    LinearElasticEvaluator, SolverOptions,
};
use hyperfe::mechanics::{isotropic_tangent, MaterialParams, Phase};
use hyperfe::rve::{build_rve_mesh, homogenize_stress, solve_micro, MicroSolver};

mod common;
use common::direct_linear_solve;

#[test]
fn linear_evaluator_matches_direct_solve_in_one_iteration() {
    let eval = LinearElasticEvaluator::isotropic(1.5e4, 3.7e3);
    for (name, r) in [(CaseName::CooksMembrane, 6), (CaseName::LProfile, 3)] {
        let case = build_macro_case_with_load(name, r, 5.0, 1).unwrap();
        let sol = macro_newton_solve(&case, &eval, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.newton_iterations(), 1, "{name}");
        let expect = direct_linear_solve(&case, eval.tangent.0);
        let err = relative_l2_error(&sol.d, &expect).unwrap();
        assert!(err < 1e-8, "{name}: {err:e}");
    }
}

#[test]
fn load_stepping_is_exact_for_a_linear_material() {
    let eval = LinearElasticEvaluator::isotropic(1.0e4, 2.0e3);
    let one = build_macro_case_with_load(CaseName::CooksMembrane, 4, 3.0, 1).unwrap();
    let five = build_macro_case_with_load(CaseName::CooksMembrane, 4, 3.0, 5).unwrap();
    let opts = SolverOptions::default();
    let a = macro_newton_solve(&one, &eval, &opts).unwrap();
    let b = macro_newton_solve(&five, &eval, &opts).unwrap();
    assert_eq!(b.completed_steps, 5);
    assert!(relative_l2_error(&b.d, &a.d).unwrap() < 1e-10);
}

#[test]
fn zero_load_gives_zero_solution() {
    let eval = LinearElasticEvaluator::isotropic(1.0e4, 2.0e3);
    for name in CaseName::ALL {
        let case = build_macro_case_with_load(name, 2, 0.0, 5).unwrap();
        let sol = macro_newton_solve(&case, &eval, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.newton_iterations() <= 1);
        assert!(sol.d.iter().all(|&v| v == 0.0));
        assert!(sol.gp_stress.iter().all(|s| s.to_voigt() == [0.0; 3]));
    }
}

#[test]
fn fe2_gauss_point_stress_is_the_homogenized_micro_stress() {
    let mesh = build_rve_mesh(8, 0.55).unwrap();
    let params = MaterialParams::default();
    let (tol, max_iter) = (1e-9, 30);
    let eval = Fe2Evaluator::new(MicroSolver::new(&mesh, &params).unwrap(), tol, max_iter);
    let case = build_macro_case_with_load(CaseName::CooksMembrane, 1, 3.0, 2).unwrap();
    let sol = macro_newton_solve(&case, &eval, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    assert!(sol.max_abs_strain() > 1e-3);
    for (eps, sig) in sol.gp_strain.iter().zip(&sol.gp_stress) {
        let micro = solve_micro(&mesh, &params, eps, tol, max_iter).unwrap();
        assert_eq!(homogenize_stress(&micro, &mesh).unwrap(), *sig);
    }
}

#[test]
fn fe2_evaluator_on_homogeneous_cell_reduces_to_linear_law() {
    // An all-fiber cell is linear elastic, so FE² must reproduce the closed form.
    let params = MaterialParams::default();
    let fiber = build_rve_mesh(8, 0.55).unwrap().with_uniform_phase(Phase::Fiber);
    let eval = Fe2Evaluator::new(MicroSolver::new(&fiber, &params).unwrap(), 1e-10, 20);
    let lin = LinearElasticEvaluator {
        tangent: isotropic_tangent(params.k_f, params.g_f),
    };
    let case = build_macro_case_with_load(CaseName::LProfile, 2, 20.0, 1).unwrap();
    let opts = SolverOptions::default();
    let a = macro_newton_solve(&case, &eval, &opts).unwrap();
    let b = macro_newton_solve(&case, &lin, &opts).unwrap();
    assert!(relative_l2_error(&a.d, &b.d).unwrap() < 1e-8);
}

#[test]
fn default_cases_are_constrained() {
    let eval = LinearElasticEvaluator::isotropic(1.0e4, 2.0e3);
    for name in CaseName::ALL {
        let case = build_macro_case(name, name.default_resolution()).unwrap();
        assert!(case.n_elements() <= 200);
        let sol = macro_newton_solve(&case, &eval, &SolverOptions::default()).unwrap();
        assert!(sol.converged && sol.d.iter().all(|v| v.is_finite()));
    }
}
