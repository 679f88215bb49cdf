use crate::error::{Error, Result};
use crate::mechanics::Strain2D;
use crate::net::mlp::{Activation, Mlp, Normalizer};

pub const HIDDEN_WIDTH: usize = 64;
pub const HIDDEN_LAYERS: usize = 4;

/// Maps a macro strain to POD coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchNet {
    pub mlp: Mlp,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
    /// Exact coefficients at zero strain. When set, the output is shifted
    /// so that `b(0)` equals them and only `b(eps) - b(0)` is learned.
    pub anchor: Option<Vec<f64>>,
    /// Linear term `S eps` added to the output, row-major `p x 3`. When set,
    /// the network only carries the part of the response that `S` misses.
    pub slope: Option<Vec<f64>>,
}

pub fn branch_widths(p: usize) -> Vec<usize> {
    let mut w = vec![3];
    w.extend(std::iter::repeat_n(HIDDEN_WIDTH, HIDDEN_LAYERS));
    w.push(p);
    w
}

impl BranchNet {
    pub fn new(mlp: Mlp, input_norm: Normalizer, output_norm: Normalizer) -> Result<Self> {
        if mlp.n_inputs() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: mlp.n_inputs(),
            });
        }
        if input_norm.len() != 3 || output_norm.len() != mlp.n_outputs() {
            return Err(Error::InvalidArgument(
                "normalizer sizes do not match the network".into(),
            ));
        }
        Ok(Self {
            mlp,
            input_norm,
            output_norm,
            anchor: None,
            slope: None,
        })
    }

    pub fn with_anchor(mut self, anchor: Vec<f64>) -> Result<Self> {
        if anchor.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: anchor.len(),
            });
        }
        self.anchor = Some(anchor);
        Ok(self)
    }

    pub fn with_slope(mut self, slope: Vec<f64>) -> Result<Self> {
        if slope.len() != 3 * self.p() {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.p(),
                got: slope.len(),
            });
        }
        self.slope = Some(slope);
        Ok(self)
    }

    /// `S x`, or zeros without a slope.
    pub(crate) fn linear_part(&self, x: &[f64; 3]) -> Vec<f64> {
        match &self.slope {
            Some(s) => s.chunks_exact(3).map(|r| r[0] * x[0] + r[1] * x[1] + r[2] * x[2]).collect(),
            None => vec![0.0; self.p()],
        }
    }

    pub(crate) fn zero_input(&self) -> Vec<f64> {
        self.input_norm.normalize(&[0.0; 3])
    }

    /// Offset added to the raw network output (standardized space).
    pub(crate) fn output_shift(&self) -> Option<Vec<f64>> {
        let anchor = self.anchor.as_ref()?;
        let at_zero = self.mlp.forward(&self.zero_input());
        let target = self.output_norm.normalize(anchor);
        Some(target.iter().zip(&at_zero).map(|(t, z)| t - z).collect())
    }

    fn shifted(&self, mut y: Vec<f64>, x: &[f64; 3]) -> Vec<f64> {
        if let Some(shift) = self.output_shift() {
            y.iter_mut().zip(&shift).for_each(|(v, s)| *v += s);
        }
        let mut b = self.output_norm.denormalize(&y);
        if self.slope.is_some() {
            b.iter_mut().zip(self.linear_part(x)).for_each(|(v, l)| *v += l);
        }
        b
    }

    /// Untrained `[3, 64, 64, 64, 64, p]` swish network with identity scaling.
    pub fn initialize(p: usize, seed: u64) -> Result<Self> {
        let mlp = Mlp::glorot(&branch_widths(p), Activation::Swish, seed)?;
        Self::new(mlp, Normalizer::identity(3), Normalizer::identity(p))
    }

    pub fn p(&self) -> usize {
        self.mlp.n_outputs()
    }

    pub fn is_finite(&self) -> bool {
        self.mlp.is_finite()
            && self
                .input_norm
                .mean
                .iter()
                .chain(&self.input_norm.scale)
                .chain(&self.output_norm.mean)
                .chain(&self.output_norm.scale)
                .chain(self.anchor.iter().flatten())
                .chain(self.slope.iter().flatten())
                .all(|v| v.is_finite())
    }

    fn check_input(eps_bar: &Strain2D) -> Result<[f64; 3]> {
        let x = eps_bar.to_voigt();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("branch input {eps_bar:?}")));
        }
        Ok(x)
    }

    pub fn forward(&self, eps_bar: &Strain2D) -> Result<Vec<f64>> {
        let x = Self::check_input(eps_bar)?;
        let y = self.mlp.forward(&self.input_norm.normalize(&x));
        Ok(self.shifted(y, &x))
    }

    /// Coefficients and their Jacobian `db/d eps_bar`, row-major `p x 3`.
    pub fn forward_with_jacobian(&self, eps_bar: &Strain2D) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = Self::check_input(eps_bar)?;
        let (y, mut jac) = self.mlp.forward_with_jacobian(&self.input_norm.normalize(&x));
        for i in 0..self.p() {
            for j in 0..3 {
                jac[i * 3 + j] *= self.output_norm.scale[i] / self.input_norm.scale[j];
            }
        }
        if let Some(s) = &self.slope {
            jac.iter_mut().zip(s).for_each(|(j, s)| *j += s);
        }
        Ok((self.shifted(y, &x), jac))
    }

    pub fn jacobian(&self, eps_bar: &Strain2D) -> Result<Vec<f64>> {
        Ok(self.forward_with_jacobian(eps_bar)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scaled_net(seed: u64) -> BranchNet {
        let mut net = BranchNet::initialize(5, seed).unwrap();
        net.input_norm = Normalizer {
            mean: vec![0.001, -0.002, 0.0],
            scale: vec![0.023, 0.021, 0.025],
        };
        net.output_norm = Normalizer {
            mean: vec![0.1, -0.3, 0.0, 2.0, 0.01],
            scale: vec![0.5, 0.02, 3.0, 0.1, 1e-3],
        };
        net
    }

    #[test]
    fn widths_follow_recipe() {
        assert_eq!(branch_widths(16), vec![3, 64, 64, 64, 64, 16]);
    }

    #[test]
    fn deterministic_and_rejects_nan() {
        let net = scaled_net(1);
        let e = Strain2D::new(0.01, 0.02, -0.03);
        assert_eq!(net.forward(&e).unwrap(), net.forward(&e).unwrap());
        assert!(net.forward(&Strain2D::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn zero_weight_net_returns_denormalized_bias() {
        let mut net = scaled_net(1);
        net.mlp.params.iter_mut().for_each(|p| *p = 0.0);
        let last = net.mlp.n_layers() - 1;
        net.mlp.layer_mut(last).1.copy_from_slice(&[1.0, 0.0, -1.0, 2.0, 0.5]);
        let b = net.forward(&Strain2D::new(0.03, 0.0, 0.01)).unwrap();
        let expect = [0.6, -0.3, -3.0, 2.2, 0.0105];
        for (a, e) in b.iter().zip(expect) {
            assert!((a - e).abs() < 1e-14);
        }
        assert!(net.jacobian(&Strain2D::ZERO).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_jacobian_is_scaled_weight() {
        let mlp = Mlp::glorot(&[3, 2], Activation::Identity, 4).unwrap();
        let net = BranchNet::new(
            mlp.clone(),
            Normalizer {
                mean: vec![0.0; 3],
                scale: vec![2.0, 4.0, 0.5],
            },
            Normalizer {
                mean: vec![1.0, 1.0],
                scale: vec![3.0, 10.0],
            },
        )
        .unwrap();
        let jac = net.jacobian(&Strain2D::new(0.1, 0.2, 0.3)).unwrap();
        let (w, _) = mlp.layer(0);
        for i in 0..2 {
            for j in 0..3 {
                let expect = w[i * 3 + j] * [3.0, 10.0][i] / [2.0, 4.0, 0.5][j];
                assert!((jac[i * 3 + j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn anchor_and_slope_fix_the_value_and_jacobian_at_zero() {
        let net = scaled_net(2);
        let anchor = vec![0.5, -1.0, 0.0, 2.0, 1e-3];
        let slope: Vec<f64> = (0..15).map(|k| k as f64 - 7.0).collect();
        let base_jac = net.jacobian(&Strain2D::ZERO).unwrap();
        let net = net.with_anchor(anchor.clone()).unwrap().with_slope(slope.clone()).unwrap();
        let b = net.forward(&Strain2D::ZERO).unwrap();
        for (a, e) in b.iter().zip(&anchor) {
            assert!((a - e).abs() < 1e-12);
        }
        let jac = net.jacobian(&Strain2D::ZERO).unwrap();
        for k in 0..15 {
            assert!((jac[k] - base_jac[k] - slope[k]).abs() < 1e-12);
        }
        assert!(net.clone().with_slope(vec![0.0; 14]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn jacobian_matches_finite_differences(
            seed in any::<u64>(),
            x in prop::array::uniform3(-0.04..0.04f64),
            with_prior in any::<bool>(),
        ) {
            let mut net = scaled_net(seed);
            if with_prior {
                net = net
                    .with_anchor(vec![0.1, 0.2, 0.3, 0.4, 0.5])
                    .unwrap()
                    .with_slope((0..15).map(|k| (k as f64).sin() * 10.0).collect())
                    .unwrap();
            }
            let e = Strain2D::from_voigt(x);
            let jac = net.jacobian(&e).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                let mut p = x;
                p[j] += h;
                let mut m = x;
                m[j] -= h;
                let fp = net.forward(&Strain2D::from_voigt(p)).unwrap();
                let fm = net.forward(&Strain2D::from_voigt(m)).unwrap();
                for i in 0..net.p() {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let scale = jac[i * 3 + j].abs().max(net.output_norm.scale[i] / net.input_norm.scale[j] * 1e-3);
                    prop_assert!((fd - jac[i * 3 + j]).abs() <= 1e-6 * scale,
                        "({i},{j}) fd {fd} vs {}", jac[i * 3 + j]);
                }
            }
        }
    }
}
