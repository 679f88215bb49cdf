use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use hyperfe::config::RunConfig;
use hyperfe::io::Header;
use hyperfe::macroscale::benchmark::{format_report, write_error_csv, write_report_csv, write_timing_csv};
use hyperfe::macroscale::{
    benchmark as run_benchmark, build_macro_case_with_load, macro_newton_solve, CaseName, Fe2Evaluator, MacroCase,
    MacroSolution, MicroEvaluator, SolverOptions, SurrogateEvaluator,
};
use hyperfe::mechanics::Strain2D;
use hyperfe::net::{self, Checkpoint};
use hyperfe::pipeline::{format_field_errors, initial_branch, rve_field_errors, training_pairs};
use hyperfe::pod::{compute_pod, PodBasis};
use hyperfe::rve::{build_rve_mesh_with_length, generate_snapshots, lhs_sample, MicroSolver, RveMesh, SampleSet, SnapshotMatrix};
use hyperfe::surrogate::SurrogateModel;
use hyperfe::{vtk, Error};

use crate::EvaluatorKind;

pub const SAMPLES_FILE: &str = "samples.csv";
pub const PROVENANCE_FILE: &str = "provenance.hdr";

/// The command ran but its postcondition does not hold (exit code 3).
#[derive(Debug)]
pub struct Incomplete(pub String);

impl fmt::Display for Incomplete {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Incomplete {}

fn mesh(cfg: &RunConfig) -> Result<RveMesh> {
    Ok(build_rve_mesh_with_length(cfg.rve.n_per_side, cfg.rve.fiber_fraction, cfg.rve.length)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn read_provenance(dir: &Path) -> Result<Header> {
    let path = dir.join(PROVENANCE_FILE);
    Header::read(&path).with_context(|| format!("missing or unreadable {}", path.display()))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    hyperfe::io::write_atomic(path, &bytes)?;
    Ok(())
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let mesh = mesh(cfg)?;
    let solver = MicroSolver::new(&mesh, &cfg.materials)?;
    let s = &cfg.sampling;
    let set = lhs_sample(s.n, s.magnitude, s.seed)?;
    log::info!(
        "solving {} cell problems on a {}x{} mesh ({} equations)",
        set.len(),
        cfg.rve.n_per_side,
        cfg.rve.n_per_side,
        solver.n_equations()
    );
    let t = Instant::now();
    let snap = generate_snapshots(&solver, &set, cfg.rve.tol, cfg.rve.max_iter)?;
    log::info!("{} snapshots in {:.1} s", snap.cols, t.elapsed().as_secs_f64());
    for i in &snap.excluded {
        log::warn!("sample {i} did not converge and was excluded");
    }
    if snap.cols == 0 {
        bail!(Incomplete("no sample converged".into()));
    }
    let dir = cfg.snapshots_dir();
    create_dir(&dir)?;
    set.write_csv(&dir.join(SAMPLES_FILE))?;
    snap.write(&dir)?;
    let mut h = Header::new();
    h.set("stage", "generate")
        .set("config_hash", cfg.hash())
        .set("mesh_hash", mesh.hash())
        .set("samples_hash", &snap.samples_hash)
        .set("snapshots_hash", snap.data_hash())
        .set("n_samples", set.len())
        .set("n_snapshots", snap.cols);
    h.write(&dir.join(PROVENANCE_FILE))?;
    println!("wrote {} snapshots ({} excluded) to {}", snap.cols, snap.excluded.len(), dir.display());
    Ok(())
}

fn load_snapshots(cfg: &RunConfig, mesh: &RveMesh) -> Result<(SampleSet, SnapshotMatrix)> {
    let dir = cfg.snapshots_dir();
    let snap = SnapshotMatrix::read(&dir)
        .with_context(|| format!("cannot read snapshots in {} (run `hyperfe generate` first)", dir.display()))?;
    if snap.mesh_hash != mesh.hash() {
        return Err(Error::Provenance {
            what: format!("snapshots in {} (RVE mesh changed, rerun generate)", dir.display()),
            expected: mesh.hash().to_string(),
            found: snap.mesh_hash.clone(),
        }
        .into());
    }
    let set = SampleSet::read_csv(&dir.join(SAMPLES_FILE), snap.magnitude, snap.seed)?;
    Ok((set, snap))
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let mesh = mesh(cfg)?;
    let (set, snap) = load_snapshots(cfg, &mesh)?;
    let t = Instant::now();
    let mut basis = compute_pod(&snap, cfg.pod.p)?;
    hyperfe::pod::mode_gradients(&mut basis, &mesh)?;
    let captured: f64 = basis.singular_values[..cfg.pod.p].iter().map(|s| s * s).sum::<f64>()
        / basis.singular_values.iter().map(|s| s * s).sum::<f64>().max(f64::MIN_POSITIVE);
    log::info!(
        "POD: {} modes capture {:.6} of the centered energy ({:.2} s)",
        cfg.pod.p,
        captured,
        t.elapsed().as_secs_f64()
    );
    let pod_dir = cfg.pod_dir();
    create_dir(&pod_dir)?;
    basis.write(&pod_dir)?;
    let mut h = Header::new();
    h.set("stage", "pod")
        .set("config_hash", cfg.hash())
        .set("snapshots_hash", snap.data_hash())
        .set("pod_hash", basis.hash());
    h.write(&pod_dir.join(PROVENANCE_FILE))?;

    let (x, y) = training_pairs(&set, &snap, &basis)?;
    let t = Instant::now();
    let solver = MicroSolver::new(&mesh, &cfg.materials)?;
    let report = net::train(&x, &y, &cfg.training, initial_branch(&basis, &solver, &cfg.training)?)?;
    log::info!("trained {} epochs in {:.1} s", cfg.training.epochs, t.elapsed().as_secs_f64());
    let ck = Checkpoint::from_report(&report, &cfg.training, &basis.hash());
    let dir = cfg.checkpoint_dir();
    create_dir(&dir)?;
    ck.write(&dir)?;
    let mut h = Header::new();
    h.set("stage", "train")
        .set("config_hash", cfg.hash())
        .set("pod_hash", basis.hash())
        .set("params_hash", ck.params_hash())
        .set("samples_hash", &snap.samples_hash)
        .set("n_samples", snap.cols)
        .set("magnitude", snap.magnitude);
    h.write(&dir.join(PROVENANCE_FILE))?;
    let last = report.train_loss.len() - 1;
    println!(
        "final train loss {:.6e}, validation loss {:.6e} (best {:.6e} at epoch {})",
        report.train_loss[last],
        report.val_loss.get(last).copied().unwrap_or(f64::NAN),
        report.val_loss.get(report.best_epoch).copied().unwrap_or(f64::NAN),
        report.best_epoch
    );
    println!("checkpoint written to {}", dir.display());
    Ok(())
}

struct Surrogate {
    model: SurrogateModel,
    n_samples: usize,
    magnitude: f64,
    provenance: Header,
}

fn load_surrogate(cfg: &RunConfig, mesh: &RveMesh) -> Result<Surrogate> {
    let dir = cfg.checkpoint_dir();
    let ck = Checkpoint::read(&dir)
        .with_context(|| format!("cannot load checkpoint from {} (run `hyperfe train` first)", dir.display()))?;
    let basis = PodBasis::read(&cfg.pod_dir())
        .with_context(|| format!("cannot load POD basis from {}", cfg.pod_dir().display()))?;
    if ck.pod_hash != basis.hash() {
        return Err(Error::Provenance {
            what: "checkpoint POD basis (basis recomputed since training, rerun train)".into(),
            expected: ck.pod_hash,
            found: basis.hash(),
        }
        .into());
    }
    let provenance = read_provenance(&dir)?;
    let path = dir.join(PROVENANCE_FILE);
    let n_samples = provenance.parse_value("n_samples", &path)?;
    let magnitude = provenance.parse_value("magnitude", &path)?;
    let model = SurrogateModel::new(ck.net, basis, mesh, &cfg.materials)
        .context("surrogate does not fit the configured RVE (rerun generate and train)")?;
    Ok(Surrogate {
        model,
        n_samples,
        magnitude,
        provenance,
    })
}

fn parse_strain(s: &str) -> Result<Strain2D> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("--eps-bar expects three comma-separated numbers, got '{s}'"))?;
    ensure!(v.len() == 3, "--eps-bar expects three components, got {}", v.len());
    ensure!(v.iter().all(|x| x.is_finite()), "--eps-bar components must be finite");
    Ok(Strain2D::new(v[0], v[1], v[2]))
}

pub fn eval_rve(cfg: &RunConfig, eps_bar: &str) -> Result<()> {
    let eps = parse_strain(eps_bar)?;
    let mesh = mesh(cfg)?;
    let sur = load_surrogate(cfg, &mesh)?;
    if eps.max_abs() > sur.magnitude {
        log::warn!("eps_bar {eps_bar} lies outside the sampled box ±{}", sur.magnitude);
    }
    let solver = MicroSolver::new(&mesh, &cfg.materials)?;
    let t = Instant::now();
    let reference = solver.solve(&eps, cfg.rve.tol, cfg.rve.max_iter)?;
    let t_fe = t.elapsed();
    if !reference.converged {
        bail!(Incomplete(format!(
            "reference cell solve did not converge (residual {:e})",
            reference.residual_norm
        )));
    }
    let t = Instant::now();
    let pred = sur.model.predict(&eps)?;
    let t_sur = t.elapsed();
    let errors = rve_field_errors(&pred, &reference)?;

    let dir = cfg.results_dir();
    create_dir(&dir)?;
    let title = format!("rve eps_bar={eps_bar} config={}", cfg.hash());
    vtk::rve_grid(&mesh, &reference.u, &reference.eps_q, &reference.sig_q, &format!("fe {title}"))?
        .write(&dir.join("rve_fe.vtk"))?;
    vtk::rve_grid(&mesh, &pred.u_nodes, &pred.eps_q, &pred.sig_q, &format!("surrogate {title}"))?
        .write(&dir.join("rve_surrogate.vtk"))?;
    let rows: Vec<Vec<String>> = errors
        .iter()
        .map(|e| {
            vec![
                e.field.to_string(),
                format!("{:e}", e.value),
                if e.relative { "relative" } else { "absolute" }.to_string(),
            ]
        })
        .collect();
    write_csv(&dir.join("rve_errors.csv"), &["field", "error", "kind"], &rows)?;
    let mut h = Header::new();
    h.set("stage", "eval-rve")
        .set("config_hash", cfg.hash())
        .set("eps_bar", eps_bar)
        .set("pod_hash", sur.model.basis().hash())
        .set("params_hash", sur.provenance.get("params_hash").unwrap_or("unknown"));
    h.write(&dir.join("rve_errors.hdr"))?;

    let fe_bar = hyperfe::rve::homogenize_stress(&reference, &mesh)?;
    print!("{}", format_field_errors(&errors));
    println!(
        "homogenized stress  fe {:?}  surrogate {:?}",
        fe_bar.to_voigt(),
        pred.sigma_bar.to_voigt()
    );
    println!(
        "time  fe {:.3} ms  surrogate {:.3} ms",
        1e3 * t_fe.as_secs_f64(),
        1e3 * t_sur.as_secs_f64()
    );
    Ok(())
}

fn macro_case(cfg: &RunConfig, name: CaseName) -> Result<MacroCase> {
    let m = &cfg.macro_;
    Ok(build_macro_case_with_load(name, m.resolution_for(name), m.load_for(name), m.steps)?)
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tol: cfg.macro_.tol,
        max_iter: cfg.macro_.max_iter,
    }
}

fn write_macro_outputs(cfg: &RunConfig, case: &MacroCase, sol: &MacroSolution, tag: &str) -> Result<()> {
    let dir = cfg.results_dir();
    create_dir(&dir)?;
    let stem = format!("{}_{tag}", case.name);
    vtk::macro_grid(case, sol, &format!("{stem} config={}", cfg.hash()))?.write(&dir.join(format!("{stem}.vtk")))?;

    let nodes: Vec<Vec<String>> = case
        .nodes
        .iter()
        .enumerate()
        .map(|(k, x)| {
            vec![
                k.to_string(),
                format!("{:e}", x[0]),
                format!("{:e}", x[1]),
                format!("{:e}", sol.d[2 * k]),
                format!("{:e}", sol.d[2 * k + 1]),
            ]
        })
        .collect();
    write_csv(&dir.join(format!("{stem}_nodes.csv")), &["node", "x", "y", "d_x", "d_y"], &nodes)?;

    let gauss: Vec<Vec<String>> = sol
        .gp_strain
        .iter()
        .zip(&sol.gp_stress)
        .enumerate()
        .map(|(j, (e, s))| {
            let mut r = vec![(j / 4).to_string(), (j % 4).to_string()];
            r.extend(e.to_voigt().iter().map(|v| format!("{v:e}")));
            r.extend(s.to_voigt().iter().map(|v| format!("{v:e}")));
            r.push(format!("{:e}", s.sig_zz));
            r
        })
        .collect();
    write_csv(
        &dir.join(format!("{stem}_gauss.csv")),
        &["element", "gauss_point", "eps_xx", "eps_yy", "gamma_xy", "sigma_xx", "sigma_yy", "tau_xy", "sigma_zz"],
        &gauss,
    )?;

    let log: Vec<Vec<String>> = sol
        .log
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                r.iteration.to_string(),
                format!("{:e}", r.residual),
                format!("{:e}", r.relative_residual),
            ]
        })
        .collect();
    write_csv(
        &dir.join(format!("{stem}_newton.csv")),
        &["step", "iteration", "residual", "relative_residual"],
        &log,
    )?;

    let t = &sol.timings;
    let timing = vec![
        vec!["micro".into(), format!("{}", t.micro.as_secs_f64())],
        vec!["assembly".into(), format!("{}", t.assembly.as_secs_f64())],
        vec!["linear_solve".into(), format!("{}", t.linear_solve.as_secs_f64())],
        vec!["total".into(), format!("{}", t.total.as_secs_f64())],
    ];
    write_csv(&dir.join(format!("{stem}_timing.csv")), &["phase", "seconds"], &timing)?;
    Ok(())
}

pub fn solve(cfg: &RunConfig, kind: EvaluatorKind) -> Result<()> {
    let name = cfg.macro_.case;
    let case = macro_case(cfg, name)?;
    let mesh = mesh(cfg)?;
    let (evaluator, mut header): (Box<dyn MicroEvaluator>, Header) = match kind {
        EvaluatorKind::Fe2 => {
            let solver = MicroSolver::new(&mesh, &cfg.materials)?;
            (Box::new(Fe2Evaluator::new(solver, cfg.rve.tol, cfg.rve.max_iter)), Header::new())
        }
        EvaluatorKind::Hybrid => {
            let sur = load_surrogate(cfg, &mesh)?;
            let mut h = Header::new();
            h.set("pod_hash", sur.model.basis().hash())
                .set("params_hash", sur.provenance.get("params_hash").unwrap_or("unknown"));
            let ev = SurrogateEvaluator {
                range: Some(sur.magnitude),
                model: sur.model,
            };
            (Box::new(ev), h)
        }
    };
    log::info!(
        "{name}: {} elements, {} load steps, {} evaluator",
        case.n_elements(),
        case.load_steps,
        evaluator.name()
    );
    let sol = macro_newton_solve(&case, evaluator.as_ref(), &solver_options(cfg))?;
    let tag = evaluator.name().to_string();
    write_macro_outputs(cfg, &case, &sol, &tag)?;
    header
        .set("stage", "solve")
        .set("config_hash", cfg.hash())
        .set("case", name)
        .set("evaluator", &tag)
        .set("converged", sol.converged)
        .set("completed_steps", sol.completed_steps);
    header.write(&cfg.results_dir().join(format!("{name}_{tag}.hdr")))?;
    let t = &sol.timings;
    println!(
        "{name} {tag}: {} Newton iterations, max |eps| {:.4}, max |d| {:.4e} mm",
        sol.newton_iterations(),
        sol.max_abs_strain(),
        sol.d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    );
    println!(
        "time total {:.3} s  micro {:.3} s  assembly {:.3} s  solve {:.3} s",
        t.total.as_secs_f64(),
        t.micro.as_secs_f64(),
        t.assembly.as_secs_f64(),
        t.linear_solve.as_secs_f64()
    );
    if sol.max_out_of_range > 0 {
        println!("warning: up to {} Gauss points left the training range", sol.max_out_of_range);
    }
    if !sol.converged {
        bail!(Incomplete(format!(
            "Newton did not converge; partial solution after {} of {} load steps written",
            sol.completed_steps, case.load_steps
        )));
    }
    Ok(())
}

pub fn benchmark(cfg: &RunConfig, cases: &[CaseName]) -> Result<()> {
    let mesh = mesh(cfg)?;
    let sur = load_surrogate(cfg, &mesh)?;
    let n_samples = sur.n_samples;
    let hybrid = SurrogateEvaluator {
        range: Some(sur.magnitude),
        model: sur.model,
    };
    let fe2 = Fe2Evaluator::new(MicroSolver::new(&mesh, &cfg.materials)?, cfg.rve.tol, cfg.rve.max_iter);
    let mut rows = Vec::new();
    for &name in cases {
        let case = macro_case(cfg, name)?;
        log::info!("benchmark {name}: {} elements", case.n_elements());
        let (row, ref_sol, cand_sol) =
            run_benchmark(&case, &fe2, &hybrid, &solver_options(cfg), cfg.macro_.repetitions, n_samples)?;
        write_macro_outputs(cfg, &case, &ref_sol, "fe2")?;
        write_macro_outputs(cfg, &case, &cand_sol, "hybrid")?;
        rows.push(row);
    }
    let dir = cfg.results_dir();
    write_report_csv(&rows, &dir.join("benchmark.csv"))?;
    write_error_csv(&rows, &dir.join("benchmark_errors.csv"))?;
    write_timing_csv(&rows, &dir.join("benchmark_timing.csv"))?;
    let report = format_report(&rows);
    hyperfe::io::write_atomic(&dir.join("benchmark.txt"), report.as_bytes())?;
    let mut h = Header::new();
    h.set("stage", "benchmark")
        .set("config_hash", cfg.hash())
        .set("pod_hash", hybrid.model.basis().hash())
        .set("params_hash", sur.provenance.get("params_hash").unwrap_or("unknown"));
    h.write(&dir.join("benchmark.hdr"))?;
    print!("{report}");
    Ok(())
}
