//! Density profiles, manufactured solutions and the derived source term.

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Width of the tanh transition of the Zoni profile.
pub const ZONI_DELTA_R: f64 = 0.05;
/// Relative radius of the Zoni profile transition.
pub const ZONI_R_P: f64 = 0.7;

/// Diffusion profile `alpha(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaProfile {
    /// `alpha = 1`.
    Poisson,
    /// `alpha = exp(-tanh((r/Rmax - r_p)/delta_r))`.
    Zoni { r_p: f64, delta_r: f64 },
}

impl AlphaProfile {
    pub fn zoni() -> Self {
        AlphaProfile::Zoni {
            r_p: ZONI_R_P,
            delta_r: ZONI_DELTA_R,
        }
    }
}

/// Reaction profile `beta(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaProfile {
    Zero,
    InverseAlpha,
}

/// Known exact solution used to manufacture `f` and Dirichlet data.
pub trait ManufacturedSolution: Send + Sync {
    fn value(&self, r: f64, theta: f64) -> f64;
    fn d_r(&self, r: f64, theta: f64) -> f64;
    fn d_theta(&self, r: f64, theta: f64) -> f64;
}

/// `u = 0.4096 (r/Rmax)^6 (1 - r/Rmax)^6 cos(11 theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarOscillation {
    pub rmax: f64,
}

impl ManufacturedSolution for PolarOscillation {
    fn value(&self, r: f64, theta: f64) -> f64 {
        let s = r / self.rmax;
        0.4096 * s.powi(6) * (1.0 - s).powi(6) * (11.0 * theta).cos()
    }

    fn d_r(&self, r: f64, theta: f64) -> f64 {
        let s = r / self.rmax;
        let radial = 6.0 * s.powi(5) * (1.0 - s).powi(6) - 6.0 * s.powi(6) * (1.0 - s).powi(5);
        0.4096 * radial / self.rmax * (11.0 * theta).cos()
    }

    fn d_theta(&self, r: f64, theta: f64) -> f64 {
        let s = r / self.rmax;
        -11.0 * 0.4096 * s.powi(6) * (1.0 - s).powi(6) * (11.0 * theta).sin()
    }
}

/// Which exact solution (if any) drives the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// Polar oscillation with `Rmax` taken from the problem.
    PolarOscillation,
    /// No exact solution: `f = 1`, homogeneous Dirichlet data.
    ConstantSource,
}

/// Complete description of the test problem on a given geometry.
#[derive(Clone)]
pub struct ProblemCase {
    pub alpha: AlphaProfile,
    pub beta: BetaProfile,
    pub rmax: f64,
    exact: Option<std::sync::Arc<dyn ManufacturedSolution>>,
}

impl std::fmt::Debug for ProblemCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemCase")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("rmax", &self.rmax)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Fourth-order differentiation step relative to the argument scale.
const REL_STEP: f64 = 1e-4;
/// Allowed gap between the step-h and step-2h derivative estimates.
const RICHARDSON_TOL: f64 = 1e-7;

impl ProblemCase {
    pub fn new(alpha: AlphaProfile, beta: BetaProfile, rmax: f64, kind: SolutionKind) -> Self {
        let exact: Option<std::sync::Arc<dyn ManufacturedSolution>> = match kind {
            SolutionKind::PolarOscillation => Some(std::sync::Arc::new(PolarOscillation { rmax })),
            SolutionKind::ConstantSource => None,
        };
        Self {
            alpha,
            beta,
            rmax,
            exact,
        }
    }

    /// Zoni profiles, `beta = 1/alpha`, polar oscillation.
    pub fn zoni_polar(rmax: f64) -> Self {
        Self::new(
            AlphaProfile::zoni(),
            BetaProfile::InverseAlpha,
            rmax,
            SolutionKind::PolarOscillation,
        )
    }

    pub fn with_solution(
        alpha: AlphaProfile,
        beta: BetaProfile,
        rmax: f64,
        solution: std::sync::Arc<dyn ManufacturedSolution>,
    ) -> Self {
        Self {
            alpha,
            beta,
            rmax,
            exact: Some(solution),
        }
    }

    pub fn exact_solution(&self) -> Option<&dyn ManufacturedSolution> {
        self.exact.as_deref()
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }

    #[inline]
    pub fn alpha(&self, r: f64) -> f64 {
        match self.alpha {
            AlphaProfile::Poisson => 1.0,
            AlphaProfile::Zoni { r_p, delta_r } => {
                (-((r.abs() / self.rmax - r_p) / delta_r).tanh()).exp()
            }
        }
    }

    #[inline]
    pub fn beta(&self, r: f64) -> f64 {
        match self.beta {
            BetaProfile::Zero => 0.0,
            BetaProfile::InverseAlpha => 1.0 / self.alpha(r),
        }
    }

    pub fn exact_u(&self, r: f64, theta: f64) -> Option<f64> {
        self.exact.as_ref().map(|u| u.value(r, theta))
    }

    /// Dirichlet value at a boundary node: exact solution if known, else zero.
    pub fn dirichlet_u(&self, r: f64, theta: f64) -> f64 {
        self.exact_u(r, theta).unwrap_or(0.0)
    }

    /// Source term `f` at `(r, theta)`.
    ///
    /// With a manufactured solution, `f` is the strong form
    /// `[-d_r(2 arr u_r + art u_t) - d_t(art u_r + 2 att u_t)] / |det DF| + beta u`,
    /// with analytic inner derivatives and fourth-order central differences
    /// for the outer ones.
    pub fn rhs_f(&self, geom: &Geometry, r: f64, theta: f64) -> Result<f64> {
        let Some(u) = self.exact.as_deref() else {
            return Ok(1.0);
        };
        let flux_r = |rr: f64| -> f64 {
            let c = geom.transform_coefficients_sc(self.alpha(rr), rr, theta.sin(), theta.cos());
            2.0 * c.arr * u.d_r(rr, theta) + c.art * u.d_theta(rr, theta)
        };
        let flux_t = |tt: f64| -> f64 {
            let c = geom.transform_coefficients_sc(self.alpha(r), r, tt.sin(), tt.cos());
            c.art * u.d_r(r, tt) + 2.0 * c.att * u.d_theta(r, tt)
        };
        let hr = REL_STEP * r.max(1e-3);
        let ht = REL_STEP;
        let (dr, dr2) = (central4(&flux_r, r, hr), central4(&flux_r, r, 2.0 * hr));
        let (dt, dt2) = (
            central4(&flux_t, theta, ht),
            central4(&flux_t, theta, 2.0 * ht),
        );
        let diff = (dr - dr2).abs().max((dt - dt2).abs());
        if diff > RICHARDSON_TOL * (1.0 + dr.abs().max(dt.abs())) {
            return Err(Error::RhsAccuracy { r, theta, diff });
        }
        let jac = geom.jacobian(r, theta)?;
        let det = jac.det().abs();
        Ok((-dr - dt) / det + self.beta(r) * u.value(r, theta))
    }
}

#[inline]
fn central4(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    struct RadialQuadratic;
    impl ManufacturedSolution for RadialQuadratic {
        fn value(&self, r: f64, _: f64) -> f64 {
            r * r
        }
        fn d_r(&self, r: f64, _: f64) -> f64 {
            2.0 * r
        }
        fn d_theta(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    struct CubicCos;
    impl ManufacturedSolution for CubicCos {
        fn value(&self, r: f64, t: f64) -> f64 {
            r.powi(3) * t.cos()
        }
        fn d_r(&self, r: f64, t: f64) -> f64 {
            3.0 * r * r * t.cos()
        }
        fn d_theta(&self, r: f64, t: f64) -> f64 {
            -r.powi(3) * t.sin()
        }
    }

    struct Zero;
    impl ManufacturedSolution for Zero {
        fn value(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn d_r(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn d_theta(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn zoni_profile_values() {
        let case = ProblemCase::zoni_polar(1.3);
        assert!((case.alpha(0.91) - 1.0).abs() < 1e-15);
        assert!((case.beta(0.91) - 1.0).abs() < 1e-15);
        assert!((case.alpha(0.0) - std::f64::consts::E).abs() < 1e-6);
        for a in 0..=130 {
            let r = a as f64 / 100.0;
            assert!(case.alpha(r) > 0.0);
            assert!((case.alpha(r) * case.beta(r) - 1.0).abs() <= 1e-15);
        }
        let poisson = ProblemCase::new(
            AlphaProfile::Poisson,
            BetaProfile::Zero,
            1.3,
            SolutionKind::PolarOscillation,
        );
        assert_eq!(poisson.alpha(0.4), 1.0);
        assert_eq!(poisson.beta(0.4), 0.0);
    }

    #[test]
    fn polar_oscillation_values() {
        let case = ProblemCase::zoni_polar(1.3);
        assert_eq!(case.exact_u(1.3, 0.3), Some(0.0));
        assert_eq!(case.exact_u(0.0, 0.3), Some(0.0));
        assert!((case.exact_u(0.65, 0.0).unwrap() - 1.0e-4).abs() < 1e-18);
        for t in [0.0, 0.4, 2.0] {
            let a = case.exact_u(0.8, t).unwrap();
            let b = case.exact_u(0.8, t + PI / 11.0).unwrap();
            assert!((a + b).abs() < 1e-18);
        }
    }

    #[test]
    fn polar_oscillation_derivatives_match_differences() {
        let u = PolarOscillation { rmax: 1.3 };
        let h = 1e-6;
        for (r, t) in [(0.3, 0.2), (0.9, 1.4), (1.1, 4.0)] {
            let fr = (u.value(r + h, t) - u.value(r - h, t)) / (2.0 * h);
            let ft = (u.value(r, t + h) - u.value(r, t - h)) / (2.0 * h);
            assert!((fr - u.d_r(r, t)).abs() < 1e-10);
            assert!((ft - u.d_theta(r, t)).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_laplacian_of_r_squared() {
        let case = ProblemCase::with_solution(
            AlphaProfile::Poisson,
            BetaProfile::Zero,
            1.3,
            Arc::new(RadialQuadratic),
        );
        for (r, t) in [(0.2, 0.0), (0.7, 2.0), (1.2, 5.0)] {
            let f = case.rhs_f(&Geometry::CirclePolar, r, t).unwrap();
            assert!((f + 4.0).abs() < 1e-8, "f = {f}");
        }
    }

    #[test]
    fn circle_laplacian_on_grid_nodes() {
        // -Laplace(r^3 cos t) = -8 r cos t
        let case = ProblemCase::with_solution(
            AlphaProfile::Poisson,
            BetaProfile::Zero,
            1.3,
            Arc::new(CubicCos),
        );
        for a in 1..16 {
            for b in 0..16 {
                let r = 0.1 + 1.2 * a as f64 / 16.0;
                let t = 2.0 * PI * b as f64 / 16.0;
                let f = case.rhs_f(&Geometry::CirclePolar, r, t).unwrap();
                assert!((f + 8.0 * r * t.cos()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_solution_gives_zero_source() {
        let case = ProblemCase::with_solution(
            AlphaProfile::zoni(),
            BetaProfile::InverseAlpha,
            1.3,
            Arc::new(Zero),
        );
        assert_eq!(
            case.rhs_f(&Geometry::default_czarny(), 0.5, 1.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn dirichlet_values() {
        let case = ProblemCase::zoni_polar(1.3);
        for t in [0.0, 1.0, 3.0] {
            assert_eq!(case.dirichlet_u(1.3, t), 0.0);
            assert_eq!(case.dirichlet_u(0.013, t), case.exact_u(0.013, t).unwrap());
        }
        let plain = ProblemCase::new(
            AlphaProfile::zoni(),
            BetaProfile::InverseAlpha,
            1.3,
            SolutionKind::ConstantSource,
        );
        assert_eq!(plain.dirichlet_u(0.013, 1.0), 0.0);
        assert_eq!(
            plain.rhs_f(&Geometry::default_czarny(), 0.5, 1.0).unwrap(),
            1.0
        );
    }

    /// Sixth-order central difference with step halving; independent of the
    /// production differentiation path (numerically differentiates u as well).
    fn brute_force_f(case: &ProblemCase, geom: &Geometry, r: f64, t: f64) -> f64 {
        let u = |rr: f64, tt: f64| case.exact_u(rr, tt).unwrap();
        let d6 = |f: &dyn Fn(f64) -> f64, x: f64, h: f64| {
            (f(x + 3.0 * h) - 9.0 * f(x + 2.0 * h) + 45.0 * f(x + h) - 45.0 * f(x - h)
                + 9.0 * f(x - 2.0 * h)
                - f(x - 3.0 * h))
                / (60.0 * h)
        };
        let inner = 1e-3;
        let coeff = |rr: f64, tt: f64| {
            let jac = geom.jacobian(rr, tt).unwrap();
            let det = jac.det();
            // DF^{-1} by cofactors, product spelled out independently
            let (a, b, c, d) = (jac.y_t / det, -jac.x_t / det, -jac.y_r / det, jac.x_r / det);
            let m00 = a * a + b * b;
            let m01 = a * c + b * d;
            let m11 = c * c + d * d;
            let s = 0.5 * case.alpha(rr) * det.abs();
            (s * m00, 2.0 * s * m01, s * m11)
        };
        let gr = |rr: f64| {
            let (arr, art, _) = coeff(rr, t);
            let ur = d6(&|x| u(x, t), rr, inner);
            let ut = d6(&|y| u(rr, y), t, inner);
            2.0 * arr * ur + art * ut
        };
        let gt = |tt: f64| {
            let (_, art, att) = coeff(r, tt);
            let ur = d6(&|x| u(x, tt), r, inner);
            let ut = d6(&|y| u(r, y), tt, inner);
            art * ur + 2.0 * att * ut
        };
        let outer = 2e-3;
        let dr = (64.0 * d6(&gr, r, outer / 2.0) - d6(&gr, r, outer)) / 63.0;
        let dt = (64.0 * d6(&gt, t, outer / 2.0) - d6(&gt, t, outer)) / 63.0;
        let det = geom.jacobian(r, t).unwrap().det().abs();
        (-dr - dt) / det + case.beta(r) * u(r, t)
    }

    #[test]
    fn shafranov_zoni_source_matches_brute_force() {
        let case = ProblemCase::zoni_polar(1.3);
        let geom = Geometry::default_shafranov();
        let f = case.rhs_f(&geom, 0.65, 1.0).unwrap();
        let oracle = brute_force_f(&case, &geom, 0.65, 1.0);
        assert!((f - oracle).abs() <= 1e-8, "{f} vs {oracle}");
    }
}
