//! Glue between the stages: training pairs from snapshots, and field-wise
//! comparison of a surrogate prediction with a reference cell solution.

use crate::error::{Error, Result};
use crate::mechanics::{Strain2D, Stress2D};
use crate::net::{BranchNet, TrainConfig};
use crate::pod::PodBasis;
use crate::rve::{MicroSolution, MicroSolver, SampleSet, SnapshotMatrix};
use crate::surrogate::MicroPrediction;

/// Inputs and POD-coefficient targets, one pair per snapshot column.
pub fn training_pairs(
    set: &SampleSet,
    snap: &SnapshotMatrix,
    basis: &PodBasis,
) -> Result<(Vec<Strain2D>, Vec<Vec<f64>>)> {
    if snap.samples_hash != crate::rve::snapshots::samples_hash(set) {
        return Err(Error::Provenance {
            what: "sample set".into(),
            expected: snap.samples_hash.clone(),
            found: crate::rve::snapshots::samples_hash(set),
        });
    }
    let inputs = snap.sample_indices.iter().map(|&i| set.samples[i]).collect();
    let targets = (0..snap.cols)
        .map(|j| basis.project(snap.column(j)))
        .collect::<Result<_>>()?;
    Ok((inputs, targets))
}

/// `d b / d eps_bar` of the projected cell solution at zero strain,
/// row-major `p x 3`. The cell response is odd in the strain, so a central
/// difference with a tiny step is accurate to roughly `h / alpha2`.
pub fn zero_strain_slope(basis: &PodBasis, solver: &MicroSolver) -> Result<Vec<f64>> {
    const H: f64 = 1e-7;
    let mut cols = Vec::with_capacity(3);
    for k in 0..3 {
        let mut v = [0.0; 3];
        v[k] = H;
        let plus = basis.project(&solver.solve(&Strain2D::from_voigt(v), 1e-12, 30)?.u)?;
        v[k] = -H;
        let minus = basis.project(&solver.solve(&Strain2D::from_voigt(v), 1e-12, 30)?.u)?;
        cols.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * H)).collect::<Vec<_>>());
    }
    Ok((0..basis.p).flat_map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect())
}

/// Untrained branch network for `basis`, with the zero-strain anchor and the
/// linear prior when the config asks for them.
pub fn initial_branch(basis: &PodBasis, solver: &MicroSolver, cfg: &TrainConfig) -> Result<BranchNet> {
    let mut net = BranchNet::initialize(basis.p, cfg.seed)?;
    if cfg.zero_anchor {
        net = net.with_anchor(basis.project(&vec![0.0; basis.rows])?)?;
    }
    if cfg.linear_prior {
        net = net.with_slope(zero_strain_slope(basis, solver)?)?;
    }
    Ok(net)
}

/// One row of a field error table. `relative` is false when the reference
/// norm vanishes and `value` is the plain ℓ2 norm of the difference.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub value: f64,
    pub relative: bool,
}

fn l2_error(field: &'static str, a: &[f64], b: &[f64]) -> FieldError {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        FieldError {
            field,
            value: diff / norm,
            relative: true,
        }
    } else {
        FieldError {
            field,
            value: diff,
            relative: false,
        }
    }
}

fn strain_component(e: &[Strain2D], c: Option<usize>) -> Vec<f64> {
    match c {
        Some(c) => e.iter().map(|v| v.to_voigt()[c]).collect(),
        None => e.iter().flat_map(|v| v.to_voigt()).collect(),
    }
}

fn stress_component(s: &[Stress2D], c: Option<usize>) -> Vec<f64> {
    match c {
        Some(c) => s.iter().map(|v| v.to_voigt()[c]).collect(),
        None => s.iter().flat_map(|v| v.to_voigt()).collect(),
    }
}

/// ℓ2 errors of displacement, strain and stress, whole fields first
/// (`u`, `eps`, `sigma`) and then per component.
pub fn rve_field_errors(pred: &MicroPrediction, reference: &MicroSolution) -> Result<Vec<FieldError>> {
    let m = reference.u.len() / 2;
    if pred.u_nodes.len() != reference.u.len() || pred.eps_q.len() != reference.eps_q.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.u.len(),
            got: pred.u_nodes.len(),
        });
    }
    let (pu, ru) = (&pred.u_nodes, &reference.u);
    let (pe, re) = (&pred.eps_q, &reference.eps_q);
    let (ps, rs) = (&pred.sig_q, &reference.sig_q);
    Ok(vec![
        l2_error("u", pu, ru),
        l2_error("eps", &strain_component(pe, None), &strain_component(re, None)),
        l2_error("sigma", &stress_component(ps, None), &stress_component(rs, None)),
        l2_error("u_x", &pu[..m], &ru[..m]),
        l2_error("u_y", &pu[m..], &ru[m..]),
        l2_error("eps_xx", &strain_component(pe, Some(0)), &strain_component(re, Some(0))),
        l2_error("eps_yy", &strain_component(pe, Some(1)), &strain_component(re, Some(1))),
        l2_error("gamma_xy", &strain_component(pe, Some(2)), &strain_component(re, Some(2))),
        l2_error("sigma_xx", &stress_component(ps, Some(0)), &stress_component(rs, Some(0))),
        l2_error("sigma_yy", &stress_component(ps, Some(1)), &stress_component(rs, Some(1))),
        l2_error("tau_xy", &stress_component(ps, Some(2)), &stress_component(rs, Some(2))),
    ])
}

pub fn format_field_errors(rows: &[FieldError]) -> String {
    let mut s = format!("{:<10} {:>14}  {}\n", "field", "error", "kind");
    for r in rows {
        let (v, kind) = if r.relative {
            (format!("{:.4} %", 100.0 * r.value), "relative")
        } else {
            (format!("{:.3e}", r.value), "absolute")
        };
        s.push_str(&format!("{:<10} {:>14}  {}\n", r.field, v, kind));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_reference_reports_absolute_error() {
        let e = l2_error("u", &[3.0, 4.0], &[0.0, 0.0]);
        assert!(!e.relative);
        assert_eq!(e.value, 5.0);
        let e = l2_error("u", &[1.1, 0.0], &[1.0, 0.0]);
        assert!(e.relative && (e.value - 0.1).abs() < 1e-12);
    }
}
