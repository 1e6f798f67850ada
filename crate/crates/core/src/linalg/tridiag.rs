use super::{count, FLOPS};
use crate::error::{Error, Result};

/// In-place `L D L^T` factorization of a symmetric positive definite
/// tridiagonal matrix.
///
/// After factoring, `diag[i]` holds `1/d_i` and `off[i]` holds `l_{i+1,i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagFactor {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl TridiagFactor {
    /// Factors the matrix with diagonal `diag` (length n) and off-diagonal
    /// `off` (length n-1, or n with the last entry ignored).
    pub fn new(mut diag: Vec<f64>, mut off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if off.len() + 1 < n || off.len() > n {
            return Err(Error::Dimension(format!(
                "tridiagonal: {} off-diagonal entries for {} rows",
                off.len(),
                n
            )));
        }
        factor_in_place(&mut diag, &mut off)?;
        count(&FLOPS.tridiag_factor, 4 * n as u64);
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve(&self, rhs: &mut [f64]) {
        solve_in_place(&self.diag, &self.off, rhs);
        count(&FLOPS.tridiag_solve, 5 * self.len() as u64);
    }

    /// Dense reconstruction of `L D L^T` (testing aid).
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            let d = 1.0 / self.diag[i];
            a[i][i] += d;
            if i + 1 < n {
                let l = self.off[i];
                a[i + 1][i] += l * d;
                a[i][i + 1] += l * d;
                a[i + 1][i + 1] += l * l * d;
            }
        }
        a
    }
}

/// Factors in place (4 flops per row); `diag` becomes `1/d`, `off` becomes the multipliers.
pub(crate) fn factor_in_place(diag: &mut [f64], off: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    for i in 0..n {
        let d = diag[i];
        if d.is_nan() || d <= 0.0 {
            return Err(Error::NotPositiveDefinite { index: i, pivot: d });
        }
        let inv = 1.0 / d;
        diag[i] = inv;
        if i + 1 < n {
            let e = off[i];
            let l = e * inv;
            off[i] = l;
            diag[i + 1] -= l * e;
        }
    }
    Ok(())
}

/// Forward substitution, diagonal scaling, backward substitution (5 flops per row).
pub(crate) fn solve_in_place(inv_diag: &[f64], l: &[f64], x: &mut [f64]) {
    let n = inv_diag.len();
    debug_assert_eq!(x.len(), n);
    if n == 0 {
        return;
    }
    for i in 1..n {
        x[i] -= l[i - 1] * x[i - 1];
    }
    for i in 0..n {
        x[i] *= inv_diag[i];
    }
    for i in (0..n - 1).rev() {
        x[i] -= l[i] * x[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn two_by_two() {
        let f = TridiagFactor::new(vec![2.0, 2.0], vec![-1.0]).unwrap();
        let mut b = [1.0, 1.0];
        f.solve(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-15 && (b[1] - 1.0).abs() < 1e-15);
        let mut b = [1.0, 0.0];
        f.solve(&mut b);
        assert!((b[0] - 2.0 / 3.0).abs() < 1e-15 && (b[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite() {
        let err = TridiagFactor::new(vec![1.0, 1.0], vec![2.0]).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
        assert!(TridiagFactor::new(vec![0.0], vec![]).is_err());
    }

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())
                .unwrap();
            a.swap(c, p);
            b.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        x
    }

    #[test]
    fn random_spd_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 200;
        let off: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| 2.5 + rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = diag[i];
            if i + 1 < n {
                a[i][i + 1] = off[i];
                a[i + 1][i] = off[i];
            }
        }
        let expect = dense_solve(a.clone(), b.clone());
        let f = TridiagFactor::new(diag, off).unwrap();
        let rec = f.reconstruct();
        for i in 0..n {
            for j in 0..n {
                assert!((rec[i][j] - a[i][j]).abs() <= 1e-13 * 3.5);
            }
        }
        let mut x = b;
        f.solve(&mut x);
        let scale = expect.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, e) in x.iter().zip(&expect) {
            assert!((a - e).abs() <= 1e-12 * scale);
        }
    }
}
