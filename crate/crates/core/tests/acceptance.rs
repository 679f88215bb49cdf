//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs at full scale (32x32 cell, 1000 samples, both macro cases against
//! FE²), which takes several minutes on one core. The process exits 0 even
//! when a criterion fails so that `cargo test` stays usable; set
//! `HYPERFE_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::path::Path;
use std::time::Instant;

use hyperfe::config::RunConfig;
use hyperfe::macroscale::{
    benchmark, build_macro_case, build_macro_case_with_load, field_errors, macro_newton_solve, relative_l2_error,
    CaseName, Fe2Evaluator, LinearElasticEvaluator, SolverOptions, SurrogateEvaluator,
};
use hyperfe::mechanics::{isotropic_tangent, material_tangent, stress, MaterialParams, Phase, Strain2D, Tangent3x3};
use hyperfe::net::{train, Checkpoint, TrainConfig};
use hyperfe::pipeline::{format_field_errors, initial_branch, rve_field_errors, training_pairs};
use hyperfe::pod::{compute_pod, mode_gradients};
use hyperfe::rve::{build_rve_mesh, generate_snapshots, homogenize_stress, lhs_sample, MicroSolver, RveMesh};
use hyperfe::surrogate::SurrogateModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

const REFERENCE_STRAIN: [f64; 3] = [-0.011, -0.036, 0.017];

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, pass: bool, name: &str, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn pct(v: f64) -> String {
    format!("{:.3}%", 100.0 * v)
}

struct Trained {
    mesh: RveMesh,
    params: MaterialParams,
    model: SurrogateModel,
}

fn rve_accuracy(report: &mut Report, cfg: &RunConfig) -> Trained {
    let t0 = Instant::now();
    let mesh = build_rve_mesh(cfg.rve.n_per_side, cfg.rve.fiber_fraction).unwrap();
    let params = cfg.materials;
    let solver = MicroSolver::new(&mesh, &params).unwrap();
    let set = lhs_sample(cfg.sampling.n, cfg.sampling.magnitude, cfg.sampling.seed).unwrap();
    let snap = generate_snapshots(&solver, &set, cfg.rve.tol, cfg.rve.max_iter).unwrap();
    let t_gen = t0.elapsed().as_secs_f64();
    let mut basis = compute_pod(&snap, cfg.pod.p).unwrap();
    mode_gradients(&mut basis, &mesh).unwrap();
    let (x, y) = training_pairs(&set, &snap, &basis).unwrap();
    let net = initial_branch(&basis, &solver, &cfg.training).unwrap();
    let trained = train(&x, &y, &cfg.training, net).unwrap();
    let t_total = t0.elapsed().as_secs_f64();
    let model = SurrogateModel::new(trained.net, basis, &mesh, &params).unwrap();

    let held_out = lhs_sample(50, cfg.sampling.magnitude, 2).unwrap();
    let mut strains = held_out.samples.clone();
    strains.push(Strain2D::from_voigt(REFERENCE_STRAIN));
    // Stacked squared norms for u, eps, sigma over the whole held-out set.
    let (mut diff, mut norm) = ([0.0; 3], [0.0; 3]);
    let (mut mean, mut worst) = ([0.0; 3], [0.0f64; 3]);
    let mut reference_row = [0.0; 3];
    for (i, e) in strains.iter().enumerate() {
        let reference = solver.solve(e, cfg.rve.tol, cfg.rve.max_iter).unwrap();
        let pred = model.predict(e).unwrap();
        let rows = rve_field_errors(&pred, &reference).unwrap();
        let fields: [(Vec<f64>, Vec<f64>); 3] = [
            (pred.u_nodes.clone(), reference.u.clone()),
            (
                pred.eps_q.iter().flat_map(|v| v.to_voigt()).collect(),
                reference.eps_q.iter().flat_map(|v| v.to_voigt()).collect(),
            ),
            (
                pred.sig_q.iter().flat_map(|v| v.to_voigt()).collect(),
                reference.sig_q.iter().flat_map(|v| v.to_voigt()).collect(),
            ),
        ];
        for k in 0..3 {
            let (a, b) = &fields[k];
            diff[k] += a.iter().zip(b).map(|(p, r)| (p - r) * (p - r)).sum::<f64>();
            norm[k] += b.iter().map(|r| r * r).sum::<f64>();
            mean[k] += rows[k].value / strains.len() as f64;
            worst[k] = worst[k].max(rows[k].value);
            if i == strains.len() - 1 {
                reference_row[k] = rows[k].value;
            }
        }
    }
    let stacked: Vec<f64> = (0..3).map(|k| (diff[k] / norm[k]).sqrt()).collect();
    report.line(
        stacked.iter().all(|&v| v < 0.02) && t_total < 3600.0,
        "rve surrogate accuracy",
        format!(
            "held-out u {} eps {} sigma {} (bound 2%); per-sample mean {}/{}/{}, worst {}/{}/{}; \
             reference strain {}/{}/{}; generation {:.1} s, generation+training {:.1} s (bound 3600 s)",
            pct(stacked[0]),
            pct(stacked[1]),
            pct(stacked[2]),
            pct(mean[0]),
            pct(mean[1]),
            pct(mean[2]),
            pct(worst[0]),
            pct(worst[1]),
            pct(worst[2]),
            pct(reference_row[0]),
            pct(reference_row[1]),
            pct(reference_row[2]),
            t_gen,
            t_total
        ),
    );
    Trained { mesh, params, model }
}

fn multiscale(report: &mut Report, cfg: &RunConfig, trained: &Trained) {
    let opts = SolverOptions {
        tol: cfg.macro_.tol,
        max_iter: cfg.macro_.max_iter,
    };
    let fe2 = Fe2Evaluator::new(
        MicroSolver::new(&trained.mesh, &trained.params).unwrap(),
        cfg.rve.tol,
        cfg.rve.max_iter,
    );
    let hybrid = SurrogateEvaluator {
        model: trained.model.clone(),
        range: Some(cfg.sampling.magnitude),
    };
    let t0 = Instant::now();
    let mut rows = Vec::new();
    for name in CaseName::ALL {
        let case = build_macro_case_with_load(name, name.default_resolution(), name.default_load(), cfg.macro_.steps)
            .unwrap();
        let (row, _, _) = benchmark(&case, &fe2, &hybrid, &opts, 1, cfg.sampling.n).unwrap();
        rows.push(row);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    for row in &rows {
        let e = row.errors;
        report.line(
            e[0] < 0.01 && e[1] < 0.01 && e[2..].iter().all(|&v| v < 0.035) && elapsed < 1800.0 && row.n_elements <= 200,
            &format!("multiscale consistency ({})", row.case.as_str()),
            format!(
                "d_x {} d_y {} (bound 1%); sigma_xx {} sigma_yy {} tau_xy {} (bound 3.5%); {} elements, {} steps",
                pct(e[0]),
                pct(e[1]),
                pct(e[2]),
                pct(e[3]),
                pct(e[4]),
                row.n_elements,
                cfg.macro_.steps
            ),
        );
    }
    println!("     both cases including FE² took {elapsed:.1} s (bound 1800 s)");
    for row in &rows {
        report.line(
            row.speedup >= 10.0,
            &format!("speed-up ({})", row.case.as_str()),
            format!(
                "{:.1}x (bound 10x): FE² {:.2} s, hybrid {:.2} s",
                row.speedup,
                row.reference_timings.total.as_secs_f64(),
                row.candidate_timings.total.as_secs_f64()
            ),
        );
    }
}

fn tangents(report: &mut Report, cfg: &RunConfig, trained: &Trained) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = cfg.sampling.magnitude;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let e = Strain2D::new(rng.random_range(-m..m), rng.random_range(-m..m), rng.random_range(-m..m));
        let analytic = trained.model.consistent_tangent(&e).unwrap();
        let fd = trained.model.finite_difference_tangent(&e, 1e-6).unwrap();
        worst = worst.max(analytic.rel_diff(&fd));
    }
    report.line(
        worst < 1e-4,
        "surrogate consistent tangent",
        format!("worst relative deviation from central differences {worst:.2e} over 50 strains (bound 1e-4)"),
    );

    let p = &trained.params;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let e = Strain2D::new(rng.random_range(-m..m), rng.random_range(-m..m), rng.random_range(-m..m));
        for phase in [Phase::Fiber, Phase::Matrix] {
            let analytic = material_tangent(&e, phase, p);
            let h = 1e-7;
            let mut fd = Tangent3x3::ZERO;
            for j in 0..3 {
                let (mut a, mut b) = (e.to_voigt(), e.to_voigt());
                a[j] += h;
                b[j] -= h;
                let sa = stress(&Strain2D::from_voigt(a), phase, p).to_voigt();
                let sb = stress(&Strain2D::from_voigt(b), phase, p).to_voigt();
                for i in 0..3 {
                    fd.0[i][j] = (sa[i] - sb[i]) / (2.0 * h);
                }
            }
            worst = worst.max(analytic.rel_diff(&fd));
        }
    }
    report.line(
        worst < 1e-6,
        "material tangents",
        format!("worst relative deviation from central differences {worst:.2e} (bound 1e-6)"),
    );
}

fn oracles(report: &mut Report, cfg: &RunConfig, trained: &Trained) {
    let t0 = Instant::now();
    let p = &trained.params;

    let fiber_only = trained.mesh.with_uniform_phase(Phase::Fiber);
    let solver = MicroSolver::new(&fiber_only, p).unwrap();
    let e = Strain2D::new(0.012, -0.007, 0.009);
    let sol = solver.solve(&e, cfg.rve.tol, cfg.rve.max_iter).unwrap();
    let strain_dev = sol
        .eps_q
        .iter()
        .flat_map(|q| q.to_voigt().into_iter().zip(e.to_voigt()).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let expect = isotropic_tangent(p.k_f, p.g_f).mul_vec(e.to_voigt());
    let got = homogenize_stress(&sol, &fiber_only).unwrap().to_voigt();
    let stress_dev = relative_l2_error(&got, &expect).unwrap();
    report.line(
        strain_dev < 1e-10 && stress_dev < 1e-8,
        "oracle: homogeneous cell",
        format!("max |eps - eps_bar| {strain_dev:.1e} (bound 1e-10), stress deviation {stress_dev:.1e} (bound 1e-8)"),
    );

    let basis = trained.model.basis();
    let ortho = basis.orthonormality_error();
    report.line(ortho < 1e-10, "oracle: POD orthonormality", format!("{ortho:.1e} (bound 1e-10)"));

    let small = build_rve_mesh(8, cfg.rve.fiber_fraction).unwrap();
    let small_solver = MicroSolver::new(&small, p).unwrap();
    let set = lhs_sample(12, cfg.sampling.magnitude, 3).unwrap();
    let snap = generate_snapshots(&small_solver, &set, cfg.rve.tol, cfg.rve.max_iter).unwrap();
    let full = compute_pod(&snap, 11).unwrap();
    let round_trip = (0..snap.cols)
        .map(|j| {
            let col = snap.column(j);
            relative_l2_error(&full.reconstruct(&full.project(col).unwrap()).unwrap(), col).unwrap()
        })
        .fold(0.0, f64::max);
    report.line(
        round_trip < 1e-9,
        "oracle: full-rank POD round trip",
        format!("{round_trip:.1e} (bound 1e-9)"),
    );

    let lhs = lhs_sample(cfg.sampling.n, cfg.sampling.magnitude, cfg.sampling.seed).unwrap();
    report.line(
        lhs.is_stratified(),
        "oracle: LHS stratification",
        format!("{} samples, one per stratum in every coordinate", lhs.len()),
    );

    let e = Strain2D::from_voigt(REFERENCE_STRAIN);
    let u = trained.model.predict_displacement(&e).unwrap();
    let galerkin = trained.model.galerkin_strain(&e).unwrap();
    let mut q = 0;
    let mut gap = 0.0f64;
    for el in 0..trained.mesh.n_elements() {
        let ue = trained.mesh.gather(&u, el);
        for qp in &trained.mesh.quad_points[el] {
            let direct = qp.strain(&ue);
            for (a, b) in direct.iter().zip(galerkin[q].to_voigt()) {
                gap = gap.max((a - b).abs());
            }
            q += 1;
        }
    }
    report.line(
        gap < 1e-10,
        "oracle: Galerkin strain",
        format!("max deviation from FE strain of the reconstruction {gap:.1e} (bound 1e-10)"),
    );

    let eval = LinearElasticEvaluator::isotropic(1.5e4, 3.7e3);
    let mut worst = 0.0f64;
    for name in CaseName::ALL {
        let case = build_macro_case(name, name.default_resolution()).unwrap();
        let sol = macro_newton_solve(&case, &eval, &SolverOptions::default()).unwrap();
        let direct = common::direct_linear_solve(&case, eval.tangent.0);
        worst = worst.max(relative_l2_error(&sol.d, &direct).unwrap());
    }
    report.line(
        worst < 1e-8,
        "oracle: macro solver vs direct linear solve",
        format!("{worst:.1e} (bound 1e-8)"),
    );
    println!("     oracle suite took {:.2} s (bound 300 s)", t0.elapsed().as_secs_f64());
}

/// Small generate/train/solve pipeline. Returns the sample CSV, the loss
/// history CSV and the error tables, all as bytes.
fn small_pipeline(dir: &Path) -> (Vec<u8>, Vec<u8>, String) {
    let mesh = build_rve_mesh(8, 0.55).unwrap();
    let params = MaterialParams::default();
    let solver = MicroSolver::new(&mesh, &params).unwrap();
    let set = lhs_sample(40, 0.04, 11).unwrap();
    set.write_csv(&dir.join("samples.csv")).unwrap();
    let snap = generate_snapshots(&solver, &set, 1e-9, 30).unwrap();
    let mut basis = compute_pod(&snap, 6).unwrap();
    mode_gradients(&mut basis, &mesh).unwrap();
    let (x, y) = training_pairs(&set, &snap, &basis).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        seed: 11,
        ..Default::default()
    };
    let report = train(&x, &y, &cfg, initial_branch(&basis, &solver, &cfg).unwrap()).unwrap();
    let ck = Checkpoint::from_report(&report, &cfg, &basis.hash());
    ck.write(dir).unwrap();
    let model = SurrogateModel::new(ck.net, basis, &mesh, &params).unwrap();

    let e = Strain2D::from_voigt(REFERENCE_STRAIN);
    let rows = rve_field_errors(&model.predict(&e).unwrap(), &solver.solve(&e, 1e-9, 30).unwrap()).unwrap();
    let mut table = format_field_errors(&rows);
    let case = build_macro_case_with_load(CaseName::CooksMembrane, 2, 4.0, 2).unwrap();
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
    table.push_str(&format!("{:?}\n", field_errors(&hybrid, &fe2).unwrap()));
    (
        std::fs::read(dir.join("samples.csv")).unwrap(),
        std::fs::read(dir.join("loss_history.csv")).unwrap(),
        table,
    )
}

fn determinism(report: &mut Report) {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            small_pipeline(dir.path())
        })
        .collect();
    let same = [runs[0].0 == runs[1].0, runs[0].1 == runs[1].1, runs[0].2 == runs[1].2];
    report.line(
        same.iter().all(|&s| s),
        "determinism",
        format!(
            "samples csv identical: {}, loss history identical: {}, error tables identical: {}",
            same[0], same[1], same[2]
        ),
    );
}

fn main() {
    let cfg = RunConfig::default();
    let mut report = Report { failed: 0 };
    let trained = rve_accuracy(&mut report, &cfg);
    multiscale(&mut report, &cfg, &trained);
    tangents(&mut report, &cfg, &trained);
    oracles(&mut report, &cfg, &trained);
    determinism(&mut report);
    println!("{} criteria failed", report.failed);
    if report.failed > 0 && std::env::var("HYPERFE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
