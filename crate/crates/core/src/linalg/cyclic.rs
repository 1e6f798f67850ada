use super::tridiag::{factor_in_place, solve_in_place};
use super::{count, FLOPS};
use crate::error::{Error, Result};

/// Symmetric cyclic tridiagonal system solved by Sherman–Morrison.
///
/// The matrix `A` (diagonal `d`, off-diagonal `e`, corner `c = A[0][n-1]`) is
/// split as `A = T + gamma w w^T` with `gamma = -|c|` and
/// `w = e_0 - sign(c) e_{n-1}`. `T` is `A` without the corners and with
/// `|c|` added to its first and last diagonal entries, so `T >= A` stays
/// positive definite whenever `A` is.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTridiagFactor {
    inv_diag: Vec<f64>,
    l: Vec<f64>,
    corner: f64,
}

impl CyclicTridiagFactor {
    /// `diag` has n entries, `off` n-1 entries, `corner` couples rows 0 and n-1.
    pub fn new(mut diag: Vec<f64>, mut off: Vec<f64>, corner: f64) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(Error::Dimension(format!(
                "cyclic tridiagonal systems need n >= 3, got {n}"
            )));
        }
        if off.len() != n - 1 {
            return Err(Error::Dimension(format!(
                "cyclic tridiagonal: {} off-diagonal entries for {} rows",
                off.len(),
                n
            )));
        }
        diag[0] += corner.abs();
        diag[n - 1] += corner.abs();
        factor_in_place(&mut diag, &mut off)?;
        count(&FLOPS.cyclic_factor, 4 * n as u64 + 2);
        Ok(Self {
            inv_diag: diag,
            l: off,
            corner,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_diag.is_empty()
    }

    pub fn corner(&self) -> f64 {
        self.corner
    }

    /// Overwrites `rhs` with the solution; `scratch` must have length n.
    pub fn solve_with(&self, rhs: &mut [f64], scratch: &mut [f64]) {
        let n = self.len();
        solve_in_place(&self.inv_diag, &self.l, rhs);
        if self.corner == 0.0 {
            count(&FLOPS.cyclic_solve, 5 * n as u64);
            return;
        }
        let gamma = -self.corner.abs();
        let s = -self.corner.signum();
        let z = &mut scratch[..n];
        z.fill(0.0);
        z[0] = 1.0;
        z[n - 1] = s;
        solve_in_place(&self.inv_diag, &self.l, z);
        let wy = rhs[0] + s * rhs[n - 1];
        let wz = z[0] + s * z[n - 1];
        let factor = gamma * wy / (1.0 + gamma * wz);
        for (x, zi) in rhs.iter_mut().zip(z.iter()) {
            *x -= factor * zi;
        }
        // two tridiagonal solves, the update loop, and seven scalar operations
        count(&FLOPS.cyclic_solve, 12 * n as u64 + 7);
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let mut scratch = vec![0.0; self.len()];
        self.solve_with(rhs, &mut scratch);
    }
}
