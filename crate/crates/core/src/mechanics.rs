//! Plane-strain tensor algebra and the fiber/matrix constitutive laws.
//!
//! Strains and stresses travel as Voigt triples ordered `(xx, yy, xy)` with
//! engineering shear (`gamma_xy = 2 eps_xy`). Trace and deviator are taken on
//! the full 3-D tensor with `eps_zz = 0`, so the out-of-plane stress is
//! nonzero and is carried separately in [`Stress2D::sig_zz`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this deviatoric norm the `dG/d eps` contribution to the matrix
/// tangent is dropped (the product `G'(s) e^D (x) e^D / s` tends to zero).
pub const DEV_NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Strain2D {
    pub eps_xx: f64,
    pub eps_yy: f64,
    /// Engineering shear strain.
    pub gamma_xy: f64,
}

impl Strain2D {
    pub const ZERO: Strain2D = Strain2D {
        eps_xx: 0.0,
        eps_yy: 0.0,
        gamma_xy: 0.0,
    };

    pub fn new(eps_xx: f64, eps_yy: f64, gamma_xy: f64) -> Self {
        Self {
            eps_xx,
            eps_yy,
            gamma_xy,
        }
    }

    pub fn from_voigt(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_voigt(self) -> [f64; 3] {
        [self.eps_xx, self.eps_yy, self.gamma_xy]
    }

    /// Checks finiteness and the small-strain guard `|component| < limit`.
    pub fn validate(&self, limit: f64) -> Result<()> {
        for c in self.to_voigt() {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("strain {self:?}")));
            }
            if c.abs() >= limit {
                return Err(Error::InvalidArgument(format!(
                    "strain component {c} outside small-strain range (< {limit})"
                )));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.to_voigt().iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stress2D {
    pub sig_xx: f64,
    pub sig_yy: f64,
    pub tau_xy: f64,
    pub sig_zz: f64,
}

impl Stress2D {
    pub const ZERO: Stress2D = Stress2D {
        sig_xx: 0.0,
        sig_yy: 0.0,
        tau_xy: 0.0,
        sig_zz: 0.0,
    };

    pub fn to_voigt(self) -> [f64; 3] {
        [self.sig_xx, self.sig_yy, self.tau_xy]
    }

    pub fn is_finite(&self) -> bool {
        [self.sig_xx, self.sig_yy, self.tau_xy, self.sig_zz]
            .iter()
            .all(|c| c.is_finite())
    }

    pub(crate) fn add_scaled(&mut self, other: &Stress2D, w: f64) {
        self.sig_xx += w * other.sig_xx;
        self.sig_yy += w * other.sig_yy;
        self.tau_xy += w * other.tau_xy;
        self.sig_zz += w * other.sig_zz;
    }

    pub(crate) fn scaled(self, s: f64) -> Stress2D {
        Stress2D {
            sig_xx: self.sig_xx * s,
            sig_yy: self.sig_yy * s,
            tau_xy: self.tau_xy * s,
            sig_zz: self.sig_zz * s,
        }
    }
}

/// Voigt 3x3 tangent `d sigma / d eps`, rows/cols `(xx, yy, xy)`, engineering shear.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tangent3x3(pub [[f64; 3]; 3]);

impl Tangent3x3 {
    pub const ZERO: Tangent3x3 = Tangent3x3([[0.0; 3]; 3]);

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// `max |C - D| / max |D|`, or the absolute difference if `D` vanishes.
    pub fn rel_diff(&self, reference: &Tangent3x3) -> f64 {
        let mut diff = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                diff = diff.max((self.0[i][j] - reference.0[i][j]).abs());
            }
        }
        let scale = reference.max_abs();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    /// Largest `|C_ij - C_ji|` relative to `max |C|`.
    pub fn asymmetry(&self) -> f64 {
        let mut a = 0.0_f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                a = a.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        let scale = self.max_abs();
        if scale > 0.0 {
            a / scale
        } else {
            0.0
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &Tangent3x3, w: f64) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += w * other.0[i][j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Fiber,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialParams {
    /// Fiber bulk modulus, N/mm².
    pub k_f: f64,
    /// Fiber shear modulus, N/mm².
    pub g_f: f64,
    /// Matrix bulk modulus, N/mm².
    pub k_m: f64,
    /// Matrix shear-modulus numerator, N/mm².
    pub alpha_1: f64,
    pub alpha_2: f64,
    /// Multiplier on the deviatoric term (1 uses `G e^D`, 2 gives `2G e^D`).
    pub dev_factor: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            k_f: 4.35e4,
            g_f: 2.99e4,
            k_m: 4.78e3,
            alpha_1: 50.0,
            alpha_2: 0.06,
            dev_factor: 1.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let moduli = [
            ("k_f", self.k_f),
            ("g_f", self.g_f),
            ("k_m", self.k_m),
            ("alpha_1", self.alpha_1),
            ("alpha_2", self.alpha_2),
            ("dev_factor", self.dev_factor),
        ];
        for (name, v) in moduli {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "material parameter {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Components of the 3-D deviatoric strain under plane strain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviator {
    pub dev_xx: f64,
    pub dev_yy: f64,
    pub dev_zz: f64,
    /// Tensor shear component `gamma_xy / 2`.
    pub eps_xy: f64,
}

pub fn trace_plane_strain(eps: &Strain2D) -> f64 {
    eps.eps_xx + eps.eps_yy
}

pub fn deviator_plane_strain(eps: &Strain2D) -> Deviator {
    let third = trace_plane_strain(eps) / 3.0;
    Deviator {
        dev_xx: eps.eps_xx - third,
        dev_yy: eps.eps_yy - third,
        dev_zz: -third,
        eps_xy: 0.5 * eps.gamma_xy,
    }
}

fn norm_of(d: &Deviator) -> f64 {
    (d.dev_xx * d.dev_xx + d.dev_yy * d.dev_yy + d.dev_zz * d.dev_zz + 2.0 * d.eps_xy * d.eps_xy)
        .sqrt()
}

/// Frobenius norm of the full 3-D deviatoric strain tensor.
pub fn dev_norm(eps: &Strain2D) -> f64 {
    norm_of(&deviator_plane_strain(eps))
}

/// `alpha_1 / (alpha_2 + ||e^D||)`.
pub fn matrix_shear_modulus(eps: &Strain2D, p: &MaterialParams) -> f64 {
    shear_modulus_at(dev_norm(eps), p)
}

#[inline]
fn shear_modulus_at(norm: f64, p: &MaterialParams) -> f64 {
    p.alpha_1 / (p.alpha_2 + norm)
}

#[inline]
fn isotropic_stress(tr: f64, d: &Deviator, bulk: f64, shear: f64) -> Stress2D {
    let hyd = bulk * tr;
    Stress2D {
        sig_xx: hyd + shear * d.dev_xx,
        sig_yy: hyd + shear * d.dev_yy,
        tau_xy: shear * d.eps_xy,
        sig_zz: hyd + shear * d.dev_zz,
    }
}

pub fn fiber_stress(eps: &Strain2D, p: &MaterialParams) -> Stress2D {
    let d = deviator_plane_strain(eps);
    isotropic_stress(trace_plane_strain(eps), &d, p.k_f, p.dev_factor * p.g_f)
}

pub fn matrix_stress(eps: &Strain2D, p: &MaterialParams) -> Stress2D {
    let d = deviator_plane_strain(eps);
    let g = shear_modulus_at(norm_of(&d), p);
    isotropic_stress(trace_plane_strain(eps), &d, p.k_m, p.dev_factor * g)
}

pub fn stress(eps: &Strain2D, phase: Phase, p: &MaterialParams) -> Stress2D {
    match phase {
        Phase::Fiber => fiber_stress(eps, p),
        Phase::Matrix => matrix_stress(eps, p),
    }
}

/// Tangent of a linear isotropic law `K tr(e) I + shear e^D` in Voigt form.
pub fn isotropic_tangent(bulk: f64, shear: f64) -> Tangent3x3 {
    let a = bulk + shear * 2.0 / 3.0;
    let b = bulk - shear / 3.0;
    Tangent3x3([[a, b, 0.0], [b, a, 0.0], [0.0, 0.0, 0.5 * shear]])
}

/// Stress and exact tangent in one pass.
pub fn stress_and_tangent(
    eps: &Strain2D,
    phase: Phase,
    p: &MaterialParams,
) -> (Stress2D, Tangent3x3) {
    let tr = trace_plane_strain(eps);
    let d = deviator_plane_strain(eps);
    match phase {
        Phase::Fiber => {
            let shear = p.dev_factor * p.g_f;
            (
                isotropic_stress(tr, &d, p.k_f, shear),
                isotropic_tangent(p.k_f, shear),
            )
        }
        Phase::Matrix => {
            let s = norm_of(&d);
            let g = shear_modulus_at(s, p);
            let shear = p.dev_factor * g;
            let sig = isotropic_stress(tr, &d, p.k_m, shear);
            let mut c = isotropic_tangent(p.k_m, shear);
            if s >= DEV_NORM_GUARD {
                // d(G e^D)/d eps = G D + e^D (x) G'(s) ds/d eps, ds/d eps = (dxx, dyy, exy)/s
                let dg = -p.alpha_1 / ((p.alpha_2 + s) * (p.alpha_2 + s));
                let coef = p.dev_factor * dg / s;
                let v = [d.dev_xx, d.dev_yy, d.eps_xy];
                for i in 0..3 {
                    for j in 0..3 {
                        c.0[i][j] += coef * v[i] * v[j];
                    }
                }
            }
            (sig, c)
        }
    }
}

pub fn material_tangent(eps: &Strain2D, phase: Phase, p: &MaterialParams) -> Tangent3x3 {
    stress_and_tangent(eps, phase, p).1
}
