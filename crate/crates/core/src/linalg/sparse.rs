use std::collections::VecDeque;

use super::{count, FLOPS};
use crate::error::{Error, Result};

/// Matrix entry; symmetric inputs list only the lower triangle (`row >= col`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub val: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, val: f64) -> Self {
        Self { row, col, val }
    }
}

/// Envelope `L D L^T` factorization after reverse Cuthill–McKee reordering.
///
/// No pivoting is performed; symmetric indefinite matrices factor as long as
/// no pivot vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDirectFactor {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    /// first column of the envelope of each permuted row
    first: Vec<usize>,
    /// offsets of each row's strictly-lower envelope in `lower`
    start: Vec<usize>,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseDirectFactor {
    /// Factors the `n x n` symmetric matrix given by its lower triangle.
    /// Duplicate entries are summed; entries with `row < col` are mirrored.
    pub fn new(n: usize, triplets: &[Triplet]) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut scale = 0.0f64;
        for t in triplets {
            if t.row >= n || t.col >= n {
                return Err(Error::Dimension(format!(
                    "triplet ({}, {}) outside a {n}x{n} matrix",
                    t.row, t.col
                )));
            }
            if t.row != t.col && t.val != 0.0 {
                adj[t.row].push(t.col);
                adj[t.col].push(t.row);
            }
            if t.row == t.col {
                scale = scale.max(t.val.abs());
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for t in triplets {
            if t.val == 0.0 {
                continue;
            }
            let (a, b) = (inv[t.row], inv[t.col]);
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f;
        }
        start.push(total);
        let mut lower = vec![0.0; total];
        let mut diag = vec![0.0; n];
        for t in triplets {
            let (a, b) = (inv[t.row], inv[t.col]);
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            if hi == lo {
                diag[hi] += t.val;
            } else if t.val != 0.0 {
                lower[start[hi] + lo - first[hi]] += t.val;
            }
        }

        let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut flops = 0u64;
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = lower[start[i] + j - fi];
                for k in lo..j {
                    s -= lower[start[i] + k - fi] * lower[start[j] + k - fj];
                }
                flops += 2 * (j - lo) as u64;
                lower[start[i] + j - fi] = s;
            }
            // row i now holds g_j = l_ij d_j
            let mut d = diag[i];
            for j in fi..i {
                let g = lower[start[i] + j - fi];
                let l = g / diag[j];
                lower[start[i] + j - fi] = l;
                d -= l * g;
            }
            flops += 3 * (i - fi) as u64;
            if !d.is_finite() || d.abs() <= tol {
                return Err(Error::StructurallySingular { row: perm[i] });
            }
            diag[i] = d;
        }
        count(&FLOPS.sparse_factor, flops);
        Ok(Self {
            n,
            perm,
            inv,
            first,
            start,
            lower,
            diag,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Stored factor entries (envelope plus diagonal).
    pub fn stored_entries(&self) -> usize {
        self.lower.len() + self.diag.len()
    }

    /// Heap bytes held by the factor, index arrays included.
    pub fn stored_bytes(&self) -> usize {
        let idx = self.perm.len() + self.inv.len() + self.first.len() + self.start.len();
        8 * self.stored_entries() + std::mem::size_of::<usize>() * idx
    }

    /// Overwrites `rhs` with the solution; `scratch` must have length n.
    pub fn solve_with(&self, rhs: &mut [f64], scratch: &mut [f64]) {
        let n = self.n;
        let y = &mut scratch[..n];
        for (new, &old) in self.perm.iter().enumerate() {
            y[new] = rhs[old];
        }
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let mut s = y[i];
            for (k, l) in row.iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let yi = y[i];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        for (old, &new) in self.inv.iter().enumerate() {
            rhs[old] = y[new];
        }
        count(&FLOPS.sparse_solve, 4 * self.lower.len() as u64 + n as u64);
    }

    pub fn solve(&self, rhs: &mut [f64]) {
        let mut scratch = vec![0.0; self.n];
        self.solve_with(rhs, &mut scratch);
    }
}

/// Reverse Cuthill–McKee ordering, component by component, each started at
/// a node of minimum degree. Returns `perm[new] = old`.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    let mut queue = VecDeque::new();
    let mut nbrs = Vec::new();
    for &root in &by_degree {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !seen[w]));
            nbrs.sort_by_key(|&w| (adj[w].len(), w));
            for &w in &nbrs {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity() {
        let t: Vec<Triplet> = (0..5).map(|i| Triplet::new(i, i, 1.0)).collect();
        let f = SparseDirectFactor::new(5, &t).unwrap();
        let mut b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let expect = b.clone();
        f.solve(&mut b);
        assert_eq!(b, expect);
    }

    #[test]
    fn structurally_singular() {
        let t = vec![Triplet::new(0, 0, 1.0), Triplet::new(2, 2, 1.0)];
        assert!(matches!(
            SparseDirectFactor::new(3, &t),
            Err(Error::StructurallySingular { row: 1 })
        ));
    }

    #[test]
    fn indefinite_without_zero_pivot() {
        // [[1, 2], [2, 1]] has eigenvalues 3 and -1
        let t = vec![
            Triplet::new(0, 0, 1.0),
            Triplet::new(1, 1, 1.0),
            Triplet::new(1, 0, 2.0),
        ];
        let f = SparseDirectFactor::new(2, &t).unwrap();
        let mut b = vec![3.0, 3.0];
        f.solve(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_sparse_spd_residual() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let n = 5000;
        let mut trip = Vec::new();
        let mut diag = vec![1.0; n];
        for i in 0..n {
            for off in [1usize, 37, 71] {
                if i >= off {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    trip.push(Triplet::new(i, i - off, v));
                    diag[i] += v.abs();
                    diag[i - off] += v.abs();
                }
            }
        }
        for (i, d) in diag.iter().enumerate() {
            trip.push(Triplet::new(i, i, *d));
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = SparseDirectFactor::new(n, &trip).unwrap();
        let mut x = b.clone();
        f.solve(&mut x);
        let mut ax = vec![0.0; n];
        for t in &trip {
            ax[t.row] += t.val * x[t.col];
            if t.row != t.col {
                ax[t.col] += t.val * x[t.row];
            }
        }
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() <= 1e-10 * bmax);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let adj = vec![vec![3], vec![2], vec![1, 3], vec![0, 2], vec![]];
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn explicit_zeros_outside_envelope() {
        let mut trip: Vec<Triplet> = (0..4).map(|i| Triplet::new(i, i, 2.0)).collect();
        trip.push(Triplet::new(3, 2, -1.0));
        trip.push(Triplet::new(3, 0, 0.0));
        let f = SparseDirectFactor::new(4, &trip).unwrap();
        let mut x = vec![2.0, 2.0, 1.0, 1.0];
        f.solve(&mut x);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}
