//! Curvilinear mappings `F(r, theta) -> (x, y)` for disk-like cross sections.
//!
//! All mappings satisfy `F(-r, theta) = F(r, theta + pi)`, which the
//! across-the-origin closure relies on.

use crate::error::{Error, Result};

/// Determinant magnitude below which a Jacobian is treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// Supported cross-section mappings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Deformed ellipse with elongation `kappa` and Shafranov shift `delta`.
    Shafranov {
        x0: f64,
        y0: f64,
        kappa: f64,
        delta: f64,
    },
    /// D-shaped section with inverse aspect ratio `eps` and ellipticity `e`.
    Czarny { y0: f64, eps: f64, e: f64, xi: f64 },
    /// Plain polar coordinates.
    CirclePolar,
}

/// 2x2 Jacobian `[[x_r, x_theta], [y_r, y_theta]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub x_r: f64,
    pub x_t: f64,
    pub y_r: f64,
    pub y_t: f64,
}

impl Jacobian {
    #[inline]
    pub fn det(&self) -> f64 {
        self.x_r * self.y_t - self.x_t * self.y_r
    }
}

/// Entries of `(1/2) alpha DF^{-1} DF^{-T} |det DF|`, stored as
/// `[[arr, art/2], [art/2, att]]`, plus `|det DF|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformCoefficients {
    pub arr: f64,
    pub art: f64,
    pub att: f64,
    pub det_abs: f64,
}

impl TransformCoefficients {
    /// Symmetric 2x2 matrix represented by the coefficients.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let off = 0.5 * self.art;
        [[self.arr, off], [off, self.att]]
    }
}

impl Geometry {
    pub fn shafranov(kappa: f64, delta: f64) -> Self {
        Geometry::Shafranov {
            x0: 0.0,
            y0: 0.0,
            kappa,
            delta,
        }
    }

    pub fn czarny(eps: f64, e: f64) -> Self {
        Geometry::Czarny {
            y0: 0.0,
            eps,
            e,
            xi: 1.0 / (1.0 - 0.25 * eps * eps).sqrt(),
        }
    }

    /// Shafranov with `kappa = 0.3`, `delta = 0.2`.
    pub fn default_shafranov() -> Self {
        Self::shafranov(0.3, 0.2)
    }

    /// Czarny with `eps = 0.3`, `e = 1.4`.
    pub fn default_czarny() -> Self {
        Self::czarny(0.3, 1.4)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Shafranov { .. } => "Shafranov",
            Geometry::Czarny { .. } => "Czarny",
            Geometry::CirclePolar => "CirclePolar",
        }
    }

    pub fn map(&self, r: f64, theta: f64) -> (f64, f64) {
        self.map_sc(r, theta.sin(), theta.cos())
    }

    /// [`Geometry::map`] with precomputed `sin(theta)` and `cos(theta)`.
    #[inline]
    pub fn map_sc(&self, r: f64, sin_t: f64, cos_t: f64) -> (f64, f64) {
        match *self {
            Geometry::Shafranov {
                x0,
                y0,
                kappa,
                delta,
            } => (
                x0 + (1.0 - kappa) * r * cos_t - delta * r * r,
                y0 + (1.0 + kappa) * r * sin_t,
            ),
            Geometry::Czarny { y0, eps, e, xi } => {
                let s = (1.0 + eps * (eps + 2.0 * r * cos_t)).sqrt();
                ((1.0 - s) / eps, y0 + e * xi * r * sin_t / (2.0 - s))
            }
            Geometry::CirclePolar => (r * cos_t, r * sin_t),
        }
    }

    pub fn jacobian(&self, r: f64, theta: f64) -> Result<Jacobian> {
        let jac = self.jacobian_sc(r, theta.sin(), theta.cos());
        let det = jac.det();
        if det.abs() < SINGULAR_DET {
            return Err(Error::SingularJacobian { r, theta, det });
        }
        Ok(jac)
    }

    /// Analytic Jacobian with precomputed trigonometric values; no singularity check.
    #[inline]
    pub fn jacobian_sc(&self, r: f64, sin_t: f64, cos_t: f64) -> Jacobian {
        match *self {
            Geometry::Shafranov { kappa, delta, .. } => Jacobian {
                x_r: (1.0 - kappa) * cos_t - 2.0 * delta * r,
                x_t: -(1.0 - kappa) * r * sin_t,
                y_r: (1.0 + kappa) * sin_t,
                y_t: (1.0 + kappa) * r * cos_t,
            },
            Geometry::Czarny { eps, e, xi, .. } => {
                let s = (1.0 + eps * (eps + 2.0 * r * cos_t)).sqrt();
                let q = 2.0 - s;
                let exi = e * xi;
                Jacobian {
                    x_r: -cos_t / s,
                    x_t: r * sin_t / s,
                    y_r: exi * sin_t * (1.0 / q + eps * r * cos_t / (s * q * q)),
                    y_t: exi * r * (cos_t / q - eps * r * sin_t * sin_t / (s * q * q)),
                }
            }
            Geometry::CirclePolar => Jacobian {
                x_r: cos_t,
                x_t: -r * sin_t,
                y_r: sin_t,
                y_t: r * cos_t,
            },
        }
    }

    pub fn transform_coefficients(
        &self,
        alpha: f64,
        r: f64,
        theta: f64,
    ) -> Result<TransformCoefficients> {
        let jac = self.jacobian(r, theta)?;
        Ok(coefficients_from_jacobian(alpha, &jac))
    }

    /// Coefficients with precomputed trig values; no singularity check.
    #[inline]
    pub fn transform_coefficients_sc(
        &self,
        alpha: f64,
        r: f64,
        sin_t: f64,
        cos_t: f64,
    ) -> TransformCoefficients {
        coefficients_from_jacobian(alpha, &self.jacobian_sc(r, sin_t, cos_t))
    }
}

/// Cofactor form of `(1/2) alpha DF^{-1} DF^{-T} |det DF|`.
#[inline]
pub fn coefficients_from_jacobian(alpha: f64, jac: &Jacobian) -> TransformCoefficients {
    let det_abs = jac.det().abs();
    let scale = alpha / det_abs;
    TransformCoefficients {
        arr: 0.5 * scale * (jac.x_t * jac.x_t + jac.y_t * jac.y_t),
        att: 0.5 * scale * (jac.x_r * jac.x_r + jac.y_r * jac.y_r),
        art: -scale * (jac.x_r * jac.x_t + jac.y_r * jac.y_t),
        det_abs,
    }
}
