//! Vanilla DeepONet reconstruction `sum_k b_k t_k(x) + b0`. Displacements
//! are vector valued, so each trunk basis function `t_k(x)` and the bias
//! `b0` are 2-vectors.

use crate::error::{Error, Result};
use crate::mechanics::Strain2D;
use crate::net::branch::BranchNet;
use crate::net::mlp::{Activation, Mlp};
use crate::pod::PodBasis;
use crate::rve::mesh::RveMesh;

pub trait TrunkBasis {
    fn p(&self) -> usize;

    /// Basis functions `t_k(x)` and bias `b0(x)`.
    fn evaluate(&self, x: [f64; 2]) -> Result<(Vec<[f64; 2]>, [f64; 2])>;
}

/// Learned trunk: an MLP `x -> (t_1x, t_1y, ..., t_px, t_py)` plus a constant bias.
#[derive(Debug, Clone, PartialEq)]
pub struct TrunkNet {
    pub mlp: Mlp,
    pub bias: [f64; 2],
}

impl TrunkNet {
    pub fn new(mlp: Mlp, bias: [f64; 2]) -> Result<Self> {
        if mlp.n_inputs() != 2 || !mlp.n_outputs().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "trunk widths {:?} must map 2 inputs to 2p outputs",
                mlp.widths
            )));
        }
        Ok(Self { mlp, bias })
    }

    pub fn initialize(hidden: &[usize], p: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![2];
        widths.extend_from_slice(hidden);
        widths.push(2 * p);
        Self::new(Mlp::glorot(&widths, Activation::Swish, seed)?, [0.0; 2])
    }
}

impl TrunkBasis for TrunkNet {
    fn p(&self) -> usize {
        self.mlp.n_outputs() / 2
    }

    fn evaluate(&self, x: [f64; 2]) -> Result<(Vec<[f64; 2]>, [f64; 2])> {
        let out = self.mlp.forward(&x);
        Ok((out.chunks_exact(2).map(|c| [c[0], c[1]]).collect(), self.bias))
    }
}

/// Trunk frozen to the POD modes: `t_k` interpolates mode `k` and `b0`
/// interpolates the mean field on the snapshot mesh.
#[derive(Debug, Clone, Copy)]
pub struct PodTrunk<'a> {
    pub basis: &'a PodBasis,
    pub mesh: &'a RveMesh,
}

impl<'a> PodTrunk<'a> {
    pub fn new(basis: &'a PodBasis, mesh: &'a RveMesh) -> Result<Self> {
        crate::pod::check_mesh(basis, mesh)?;
        Ok(Self { basis, mesh })
    }
}

impl TrunkBasis for PodTrunk<'_> {
    fn p(&self) -> usize {
        self.basis.p
    }

    fn evaluate(&self, x: [f64; 2]) -> Result<(Vec<[f64; 2]>, [f64; 2])> {
        let outside = || Error::InvalidArgument(format!("point {x:?} lies outside the RVE"));
        let modes = (0..self.basis.p)
            .map(|k| self.mesh.interpolate(self.basis.mode(k), x).ok_or_else(outside))
            .collect::<Result<Vec<_>>>()?;
        let bias = self.mesh.interpolate(&self.basis.phi0, x).ok_or_else(outside)?;
        Ok((modes, bias))
    }
}

/// Displacement at `x` for macro strain `eps_bar`.
pub fn deeponet_forward(
    branch: &BranchNet,
    trunk: &impl TrunkBasis,
    x: [f64; 2],
    eps_bar: &Strain2D,
) -> Result<[f64; 2]> {
    if branch.p() != trunk.p() {
        return Err(Error::DimensionMismatch {
            expected: trunk.p(),
            got: branch.p(),
        });
    }
    let b = branch.forward(eps_bar)?;
    combine(&b, trunk, x)
}

/// `sum_k b_k t_k(x) + b0(x)` for given branch coefficients.
pub fn combine(b: &[f64], trunk: &impl TrunkBasis, x: [f64; 2]) -> Result<[f64; 2]> {
    let (t, b0) = trunk.evaluate(x)?;
    if t.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: b.len(),
        });
    }
    let mut u = b0;
    for (bk, tk) in b.iter().zip(&t) {
        u[0] += bk * tk[0];
        u[1] += bk * tk[1];
    }
    Ok(u)
}
