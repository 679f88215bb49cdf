use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::macroscale::case::{CaseName, MacroCase};
use crate::macroscale::solver::{macro_newton_solve, MacroSolution, MicroEvaluator, PhaseTimings, SolverOptions};

/// `||a - b|| / ||b||`.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(diff / norm_b)
}

/// Relative errors of the five macro fields, ordered
/// `d_x, d_y, sigma_xx, sigma_yy, tau_xy`.
pub fn field_errors(candidate: &MacroSolution, reference: &MacroSolution) -> Result<[f64; 5]> {
    Ok([
        relative_l2_error(&candidate.dx(), &reference.dx())?,
        relative_l2_error(&candidate.dy(), &reference.dy())?,
        relative_l2_error(&candidate.stress_component(0), &reference.stress_component(0))?,
        relative_l2_error(&candidate.stress_component(1), &reference.stress_component(1))?,
        relative_l2_error(&candidate.stress_component(2), &reference.stress_component(2))?,
    ])
}

pub const ERROR_COLUMNS: [&str; 5] = ["d_x", "d_y", "sigma_xx", "sigma_yy", "tau_xy"];

#[derive(Debug, Clone)]
pub struct BenchmarkRow {
    pub case: CaseName,
    pub n_samples: usize,
    pub n_elements: usize,
    pub errors: [f64; 5],
    pub reference_timings: PhaseTimings,
    pub candidate_timings: PhaseTimings,
    pub speedup: f64,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    case: &'a str,
    n_samples: usize,
    d_x: f64,
    d_y: f64,
    sigma_xx: f64,
    sigma_yy: f64,
    tau_xy: f64,
    speedup: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    case: &'a str,
    evaluator: &'a str,
    total_s: f64,
    micro_s: f64,
    assembly_s: f64,
    linear_solve_s: f64,
    micro_evaluations: usize,
}

/// Runs both evaluators `repetitions` times on `case`; errors come from the
/// first run (solutions are deterministic), times are the fastest run.
pub fn benchmark(
    case: &MacroCase,
    reference: &dyn MicroEvaluator,
    candidate: &dyn MicroEvaluator,
    opts: &SolverOptions,
    repetitions: usize,
    n_samples: usize,
) -> Result<(BenchmarkRow, MacroSolution, MacroSolution)> {
    let reps = repetitions.max(1);
    let run = |ev: &dyn MicroEvaluator| -> Result<(MacroSolution, PhaseTimings)> {
        let mut first: Option<MacroSolution> = None;
        let mut best = PhaseTimings {
            total: Duration::MAX,
            ..Default::default()
        };
        for _ in 0..reps {
            let sol = macro_newton_solve(case, ev, opts)?;
            if !sol.converged {
                return Err(Error::NotConverged {
                    iterations: sol.log.len(),
                    residual: sol.log.last().map_or(f64::NAN, |r| r.residual),
                });
            }
            if sol.timings.total < best.total {
                best = sol.timings;
            }
            first.get_or_insert(sol);
        }
        Ok((first.expect("at least one repetition"), best))
    };
    let (ref_sol, ref_t) = run(reference)?;
    let (cand_sol, cand_t) = run(candidate)?;
    let row = BenchmarkRow {
        case: case.name,
        n_samples,
        n_elements: case.n_elements(),
        errors: field_errors(&cand_sol, &ref_sol)?,
        reference_timings: ref_t,
        candidate_timings: cand_t,
        speedup: ref_t.total.as_secs_f64() / cand_t.total.as_secs_f64(),
    };
    Ok((row, ref_sol, cand_sol))
}

/// Error table in percent, one row per case.
pub fn write_report_csv(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow {
            case: r.case.as_str(),
            n_samples: r.n_samples,
            d_x: 100.0 * r.errors[0],
            d_y: 100.0 * r.errors[1],
            sigma_xx: 100.0 * r.errors[2],
            sigma_yy: 100.0 * r.errors[3],
            tau_xy: 100.0 * r.errors[4],
            speedup: r.speedup,
        })?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    io::write_atomic(path, &bytes)
}

/// Error columns only; stable across reruns.
pub fn write_error_csv(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "n_samples", "d_x", "d_y", "sigma_xx", "sigma_yy", "tau_xy"])?;
    for r in rows {
        let mut rec = vec![r.case.to_string(), r.n_samples.to_string()];
        rec.extend(r.errors.iter().map(|e| format!("{:e}", 100.0 * e)));
        w.write_record(&rec)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    io::write_atomic(path, &bytes)
}

pub fn write_timing_csv(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        for (name, t) in [("fe2", &r.reference_timings), ("hybrid", &r.candidate_timings)] {
            w.serialize(TimingRow {
                case: r.case.as_str(),
                evaluator: name,
                total_s: t.total.as_secs_f64(),
                micro_s: t.micro.as_secs_f64(),
                assembly_s: t.assembly.as_secs_f64(),
                linear_solve_s: t.linear_solve.as_secs_f64(),
                micro_evaluations: t.micro_evaluations,
            })?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    io::write_atomic(path, &bytes)
}

pub fn format_report(rows: &[BenchmarkRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "case", "samples", "d_x %", "d_y %", "s_xx %", "s_yy %", "t_xy %", "speedup", "elements"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>9} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.1} {:>9}",
            r.case.as_str(),
            r.n_samples,
            100.0 * r.errors[0],
            100.0 * r.errors[1],
            100.0 * r.errors[2],
            100.0 * r.errors[3],
            100.0 * r.errors[4],
            r.speedup,
            r.n_elements
        );
    }
    let _ = writeln!(s);
    for r in rows {
        for (name, t) in [("fe2", &r.reference_timings), ("hybrid", &r.candidate_timings)] {
            let _ = writeln!(
                s,
                "{:<16} {:<7} total {:>9.3} s  micro {:>9.3} s  assembly {:>7.3} s  solve {:>7.3} s  ({} micro evaluations)",
                r.case.as_str(),
                name,
                t.total.as_secs_f64(),
                t.micro.as_secs_f64(),
                t.assembly.as_secs_f64(),
                t.linear_solve.as_secs_f64(),
                t.micro_evaluations
            );
        }
    }
    s
}
