use hyperfe::macroscale::{
    build_macro_case_with_load, macro_newton_solve, relative_l2_error, CaseName, Fe2Evaluator, LinearElasticEvaluator,
    SolverOptions, SurrogateEvaluator,
};
use hyperfe::mechanics::{MaterialParams, Strain2D};
use hyperfe::net::{train, BranchNet, Checkpoint, TrainConfig};
use hyperfe::pipeline::{initial_branch, rve_field_errors, training_pairs};
use hyperfe::pod::{compute_pod, PodBasis};
use hyperfe::rve::{build_rve_mesh, generate_snapshots, lhs_sample, MicroSolver, SampleSet, SnapshotMatrix};
use hyperfe::surrogate::SurrogateModel;
use hyperfe::Error;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn artifacts_round_trip_to_identical_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = build_rve_mesh(8, 0.55).unwrap();
    let params = MaterialParams::default();
    let solver = MicroSolver::new(&mesh, &params).unwrap();
    let set = lhs_sample(40, 0.04, 5).unwrap();
    let snap = generate_snapshots(&solver, &set, 1e-9, 30).unwrap();
    assert_eq!(snap.cols, 40);

    let csv = dir.path().join("samples.csv");
    set.write_csv(&csv).unwrap();
    snap.write(dir.path()).unwrap();
    let set2 = SampleSet::read_csv(&csv, 0.04, 5).unwrap();
    let snap2 = SnapshotMatrix::read(dir.path()).unwrap();
    assert_eq!(set2, set);
    assert_eq!(snap2, snap);

    let basis = compute_pod(&snap2, 8).unwrap();
    assert!(basis.orthonormality_error() < 1e-10);
    let (x, y) = training_pairs(&set2, &snap2, &basis).unwrap();
    let cfg = TrainConfig {
        epochs: 60,
        ..Default::default()
    };
    let report = train(&x, &y, &cfg, BranchNet::initialize(8, cfg.seed).unwrap()).unwrap();
    let ck = Checkpoint::from_report(&report, &cfg, &basis.hash());
    ck.write(dir.path()).unwrap();
    basis.write(dir.path()).unwrap();

    let model = SurrogateModel::new(ck.net.clone(), basis.clone(), &mesh, &params).unwrap();
    let back = SurrogateModel::new(
        Checkpoint::read(dir.path()).unwrap().net,
        PodBasis::read(dir.path()).unwrap(),
        &mesh,
        &params,
    )
    .unwrap();
    let e = Strain2D::new(-0.011, -0.036, 0.017);
    let (a, b) = (model.predict(&e).unwrap(), back.predict(&e).unwrap());
    assert_eq!(bits(&a.u_nodes), bits(&b.u_nodes));
    assert_eq!(a.sigma_bar, b.sigma_bar);
    assert_eq!(a.tangent, b.tangent);

    // Pairs built against a different sample set must be refused.
    let other = lhs_sample(40, 0.04, 6).unwrap();
    assert!(matches!(training_pairs(&other, &snap2, &basis), Err(Error::Provenance { .. })));
}

#[test]
fn hybrid_macro_solve_tracks_fe2_on_a_coarse_setup() {
    let mesh = build_rve_mesh(8, 0.55).unwrap();
    let params = MaterialParams::default();
    let solver = MicroSolver::new(&mesh, &params).unwrap();
    let set = lhs_sample(150, 0.04, 1).unwrap();
    let snap = generate_snapshots(&solver, &set, 1e-9, 30).unwrap();
    let basis = compute_pod(&snap, 12).unwrap();
    let (x, y) = training_pairs(&set, &snap, &basis).unwrap();
    let cfg = TrainConfig {
        epochs: 400,
        ..Default::default()
    };
    let report = train(&x, &y, &cfg, initial_branch(&basis, &solver, &cfg).unwrap()).unwrap();
    let model = SurrogateModel::new(report.net, basis, &mesh, &params).unwrap();

    let reference = solver.solve(&Strain2D::new(0.02, -0.01, 0.015), 1e-9, 30).unwrap();
    let pred = model.predict(&reference.eps_bar).unwrap();
    let errors = rve_field_errors(&pred, &reference).unwrap();
    assert_eq!(errors[0].field, "u");
    assert!(errors.iter().all(|e| e.relative && e.value < 0.2), "{errors:?}");

    // A one-step linear solve with the zero-strain cell tangent is the
    // baseline the surrogate has to beat by a wide margin.
    let tangent0 = solver.solve_with_tangent(&Strain2D::ZERO, 1e-9, 30).unwrap().1;
    let case = build_macro_case_with_load(CaseName::CooksMembrane, 3, 14.0, 3).unwrap();
    let opts = SolverOptions::default();
    let fe2 = macro_newton_solve(&case, &Fe2Evaluator::new(solver, 1e-9, 30), &opts).unwrap();
    let hybrid = macro_newton_solve(
        &case,
        &SurrogateEvaluator {
            model,
            range: Some(0.04),
        },
        &opts,
    )
    .unwrap();
    let linear = macro_newton_solve(&case, &LinearElasticEvaluator { tangent: tangent0 }, &opts).unwrap();
    assert!(fe2.converged && hybrid.converged);
    let err = relative_l2_error(&hybrid.d, &fe2.d).unwrap();
    let baseline = relative_l2_error(&linear.d, &fe2.d).unwrap();
    assert!(err < 0.1 && err < 0.5 * baseline, "hybrid {err} vs linear {baseline}");
}
