//! Matrix-free nine-point operator obtained from the discrete energy.
//!
//! Each cell `[r_i, r_{i+1}] x [theta_j, theta_{j+1}]` contributes one
//! quadrant to each of its four corners. A quadrant owned by node `e` joins
//! `e` with its radial neighbour `er` (spacing `h`) and its angular neighbour
//! `et` (spacing `k`) inside that cell. With one-sided differences at `e` and
//! corner quadrature of weight `w = h k / 4` its energy Hessian over
//! `(u_e, u_er, u_et)` reads
//!
//! ```text
//! [ a + 2c + b   -(a + c)   -(b + c) ]
//! [ -(a + c)        a          c     ]
//! [ -(b + c)        c          b     ]
//! ```
//!
//! with `a = k arr / (2h)`, `b = h att / (2k)` and `c = s art / 4`, where
//! `s = +-1` is the product of the two difference directions. Mass and load
//! are lumped at `e` with weight `w`.
//!
//! Across the origin, ring 0 owns two extra quadrants whose radial neighbour
//! is the antipodal node at distance `2 R0`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{check_len, Result};
use crate::geometry::{Geometry, TransformCoefficients};
use crate::grid::PolarGrid;
use crate::linalg::Triplet;
use crate::problem::ProblemCase;

/// Stencil execution style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StencilMode {
    /// Row-wise gather from cached coefficients.
    Take,
    /// Node-wise scatter, one coefficient evaluation per node.
    Give,
}

/// Inner boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InnerBoundary {
    AcrossOrigin,
    Dirichlet,
}

/// Which per-level arrays are kept in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CachePolicy {
    pub profile: bool,
    pub geometry: bool,
}

/// Transformation coefficients at every node, in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryArrays {
    pub arr: Vec<f64>,
    pub att: Vec<f64>,
    pub art: Vec<f64>,
    pub det: Vec<f64>,
}

/// Per-level tables: trigonometric values always, profiles and geometry optionally.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCache {
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
    /// `alpha` per ring
    pub alpha: Option<Vec<f64>>,
    /// `beta` per ring
    pub beta: Option<Vec<f64>>,
    pub geometry: Option<GeometryArrays>,
}

impl LevelCache {
    /// Number of stored `f64` entries.
    pub fn entries(&self) -> usize {
        let prof = self.alpha.as_ref().map_or(0, Vec::len) + self.beta.as_ref().map_or(0, Vec::len);
        let geo = self.geometry.as_ref().map_or(0, |g| 4 * g.arr.len());
        self.sin.len() + self.cos.len() + prof + geo
    }
}

/// Coefficients needed to evaluate the quadrants of one node.
#[derive(Debug, Clone, Copy, Default)]
struct NodeCoeffs {
    arr: f64,
    att: f64,
    art: f64,
    det: f64,
    beta: f64,
}

/// One quadrant: neighbours and the entries `a`, `b`, `c` and weight `w`.
#[derive(Debug, Clone, Copy, Default)]
struct Quad {
    er: usize,
    et: usize,
    a: f64,
    b: f64,
    c: f64,
    w: f64,
}

/// Discrete operator on one grid level.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: PolarGrid,
    geom: Geometry,
    case: ProblemCase,
    cache: LevelCache,
    inner: InnerBoundary,
}

/// Raw pointer wrapper for phase-scheduled disjoint writes.
#[derive(Clone, Copy)]
pub(crate) struct SharedMut(*mut f64, usize);

unsafe impl Send for SharedMut {}
unsafe impl Sync for SharedMut {}

impl SharedMut {
    pub(crate) fn new(v: &mut [f64]) -> Self {
        Self(v.as_mut_ptr(), v.len())
    }

    /// # Safety
    /// No other thread may access index `i` concurrently.
    #[inline]
    pub(crate) unsafe fn add(&self, i: usize, v: f64) {
        debug_assert!(i < self.1);
        *self.0.add(i) += v;
    }
}

impl Stencil {
    pub fn new(
        grid: PolarGrid,
        geom: Geometry,
        case: ProblemCase,
        inner: InnerBoundary,
        policy: CachePolicy,
    ) -> Self {
        let sin: Vec<f64> = grid.angles().iter().map(|t| t.sin()).collect();
        let cos: Vec<f64> = grid.angles().iter().map(|t| t.cos()).collect();
        let (alpha, beta) = if policy.profile {
            (
                Some(grid.radii().iter().map(|&r| case.alpha(r)).collect()),
                Some(grid.radii().iter().map(|&r| case.beta(r)).collect()),
            )
        } else {
            (None, None)
        };
        let mut st = Self {
            grid,
            geom,
            case,
            cache: LevelCache {
                sin,
                cos,
                alpha,
                beta,
                geometry: None,
            },
            inner,
        };
        if policy.geometry {
            let n = st.grid.len();
            let mut arrays = GeometryArrays {
                arr: vec![0.0; n],
                att: vec![0.0; n],
                art: vec![0.0; n],
                det: vec![0.0; n],
            };
            for p in 0..n {
                let (i, j) = st.grid.coords(p);
                let c = st.eval_coefficients(i, j);
                arrays.arr[p] = c.arr;
                arrays.att[p] = c.att;
                arrays.art[p] = c.art;
                arrays.det[p] = c.det_abs;
            }
            st.cache.geometry = Some(arrays);
        }
        st
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn case(&self) -> &ProblemCase {
        &self.case
    }

    pub fn cache(&self) -> &LevelCache {
        &self.cache
    }

    pub fn inner_boundary(&self) -> InnerBoundary {
        self.inner
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Whether ring `i` carries Dirichlet data.
    #[inline]
    pub fn is_dirichlet_ring(&self, i: usize) -> bool {
        i + 1 == self.grid.nr() || (i == 0 && self.inner == InnerBoundary::Dirichlet)
    }

    #[inline]
    pub fn is_dirichlet(&self, p: usize) -> bool {
        self.is_dirichlet_ring(self.grid.coords(p).0)
    }

    #[inline]
    fn alpha_at(&self, i: usize) -> f64 {
        match &self.cache.alpha {
            Some(a) => a[i],
            None => self.case.alpha(self.grid.radius(i)),
        }
    }

    #[inline]
    fn beta_at(&self, i: usize) -> f64 {
        match &self.cache.beta {
            Some(b) => b[i],
            None => self.case.beta(self.grid.radius(i)),
        }
    }

    #[inline]
    fn eval_coefficients(&self, i: usize, j: usize) -> TransformCoefficients {
        self.geom.transform_coefficients_sc(
            self.alpha_at(i),
            self.grid.radius(i),
            self.cache.sin[j],
            self.cache.cos[j],
        )
    }

    #[inline]
    fn node_coeffs(&self, i: usize, j: usize) -> NodeCoeffs {
        let beta = self.beta_at(i);
        if let Some(g) = &self.cache.geometry {
            let p = self.grid.index(i, j);
            NodeCoeffs {
                arr: g.arr[p],
                att: g.att[p],
                art: g.art[p],
                det: g.det[p],
                beta,
            }
        } else {
            let c = self.eval_coefficients(i, j);
            NodeCoeffs {
                arr: c.arr,
                att: c.att,
                art: c.art,
                det: c.det_abs,
                beta,
            }
        }
    }

    /// Quadrants owned by node `(i, j)`; returns how many were written.
    #[inline]
    fn quads(&self, i: usize, j: usize, nc: &NodeCoeffs, out: &mut [Quad; 4]) -> usize {
        let g = &self.grid;
        let nr = g.nr();
        let mut radial = [(0usize, 0.0f64, 0.0f64); 2];
        let mut nrad = 0;
        if i + 1 < nr {
            radial[nrad] = (g.index(i + 1, j), g.h(i), 1.0);
            nrad += 1;
        }
        if i > 0 {
            radial[nrad] = (g.index(i - 1, j), g.h(i - 1), -1.0);
            nrad += 1;
        } else if self.inner == InnerBoundary::AcrossOrigin {
            radial[nrad] = (g.index(0, g.antipode(j)), 2.0 * g.r0(), -1.0);
            nrad += 1;
        }
        let jn = g.next_angle(j);
        let jp = g.prev_angle(j);
        let angular = [
            (g.index(i, jn), g.k(j), 1.0),
            (g.index(i, jp), g.k(jp), -1.0),
        ];
        let mut n = 0;
        for &(er, h, sr) in &radial[..nrad] {
            for &(et, k, st) in &angular {
                out[n] = Quad {
                    er,
                    et,
                    a: k * nc.arr / (2.0 * h),
                    b: h * nc.att / (2.0 * k),
                    c: sr * st * nc.art / 4.0,
                    w: 0.25 * h * k,
                };
                n += 1;
            }
        }
        n
    }

    /// Calls `f(source, coefficient)` for every contribution to row `(i, j)`
    /// of the unconstrained energy matrix.
    #[inline]
    fn for_each_row_term(&self, i: usize, j: usize, mut f: impl FnMut(usize, f64)) {
        let g = &self.grid;
        let p = g.index(i, j);
        let mut qs = [Quad::default(); 4];

        let nc = self.node_coeffs(i, j);
        let nq = self.quads(i, j, &nc, &mut qs);
        let mut mass = 0.0;
        for q in &qs[..nq] {
            mass += q.w;
            f(p, q.a + 2.0 * q.c + q.b);
            f(q.er, -(q.a + q.c));
            f(q.et, -(q.b + q.c));
        }
        f(p, mass * nc.beta * nc.det);

        let mut radial = [(0usize, 0usize); 2];
        let mut nrad = 0;
        if i + 1 < g.nr() {
            radial[nrad] = (i + 1, j);
            nrad += 1;
        }
        if i > 0 {
            radial[nrad] = (i - 1, j);
            nrad += 1;
        } else if self.inner == InnerBoundary::AcrossOrigin {
            radial[nrad] = (0, g.antipode(j));
            nrad += 1;
        }
        for &(ei, ej) in &radial[..nrad] {
            let e = g.index(ei, ej);
            let nc = self.node_coeffs(ei, ej);
            let nq = self.quads(ei, ej, &nc, &mut qs);
            for q in &qs[..nq] {
                if q.er == p {
                    f(e, -(q.a + q.c));
                    f(p, q.a);
                    f(q.et, q.c);
                }
            }
        }
        for ej in [g.next_angle(j), g.prev_angle(j)] {
            let e = g.index(i, ej);
            let nc = self.node_coeffs(i, ej);
            let nq = self.quads(i, ej, &nc, &mut qs);
            for q in &qs[..nq] {
                if q.et == p {
                    f(e, -(q.b + q.c));
                    f(q.er, q.c);
                    f(p, q.b);
                }
            }
        }
    }

    /// Calls `f(target, source, coefficient)` for every energy-matrix term
    /// produced by the quadrants of node `(i, j)`.
    #[inline]
    pub(crate) fn for_each_emitted(
        &self,
        i: usize,
        j: usize,
        mut f: impl FnMut(usize, usize, f64),
    ) {
        let e = self.grid.index(i, j);
        let mut qs = [Quad::default(); 4];
        let nc = self.node_coeffs(i, j);
        let nq = self.quads(i, j, &nc, &mut qs);
        let mut mass = 0.0;
        for q in &qs[..nq] {
            mass += q.w;
            let (ee, er, et) = (q.a + 2.0 * q.c + q.b, -(q.a + q.c), -(q.b + q.c));
            f(e, e, ee);
            f(e, q.er, er);
            f(e, q.et, et);
            f(q.er, e, er);
            f(q.er, q.er, q.a);
            f(q.er, q.et, q.c);
            f(q.et, e, et);
            f(q.et, q.er, q.c);
            f(q.et, q.et, q.b);
        }
        f(e, e, mass * nc.beta * nc.det);
    }

    /// Row `p` of the unconstrained energy matrix applied to `val`.
    #[inline]
    pub(crate) fn gather_row(&self, i: usize, j: usize, val: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_row_term(i, j, |s, c| acc += c * val(s));
        acc
    }

    /// Runs `task(i, j)` for every node in rings `lo..hi` following the
    /// conflict-free phase schedule: circle rings `l, l+3, l+6, ...` in
    /// parallel for `l = 0, 1, 2`, then radial spokes `m, m+3, ...` for
    /// `m = 0, 1, 2`, then the spokes left over by the angular wraparound.
    /// Each task writes only to its own line and the two adjacent ones.
    pub(crate) fn give_phases(&self, lo: usize, hi: usize, task: impl Fn(usize, usize) + Sync) {
        let g = &self.grid;
        let split = g.smoother_split_index();
        let nt = g.ntheta();
        let circle_hi = hi.min(split);
        for phase in 0..3 {
            let rings: Vec<usize> = (lo..circle_hi).filter(|i| i % 3 == phase).collect();
            rings.par_iter().for_each(|&i| {
                for j in 0..nt {
                    task(i, j);
                }
            });
        }
        let radial_lo = lo.max(split);
        if radial_lo >= hi {
            return;
        }
        let full = nt - nt % 3;
        for phase in 0..3 {
            let spokes: Vec<usize> = (phase..full).step_by(3).collect();
            spokes.par_iter().for_each(|&j| {
                for i in radial_lo..hi {
                    task(i, j);
                }
            });
        }
        for j in full..nt {
            for i in radial_lo..hi {
                task(i, j);
            }
        }
    }

    /// `y = A x` with Dirichlet rows as identity.
    pub fn apply(&self, mode: StencilMode, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len("input vector", x.len(), self.len())?;
        check_len("output vector", y.len(), self.len())?;
        match mode {
            StencilMode::Take => self.apply_take(x, y),
            StencilMode::Give => self.apply_give(x, y),
        }
        Ok(())
    }

    fn masked<'a>(&'a self, x: &'a [f64]) -> impl Fn(usize) -> f64 + 'a {
        move |s| if self.is_dirichlet(s) { 0.0 } else { x[s] }
    }

    fn apply_take(&self, x: &[f64], y: &mut [f64]) {
        let val = self.masked(x);
        y.par_iter_mut().enumerate().for_each(|(p, out)| {
            let (i, j) = self.grid.coords(p);
            *out = if self.is_dirichlet_ring(i) {
                x[p]
            } else {
                self.gather_row(i, j, &val)
            };
        });
    }

    fn apply_give(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().for_each(|v| *v = 0.0);
        let out = SharedMut::new(y);
        let nr = self.grid.nr();
        self.give_phases(0, nr, |i, j| {
            self.for_each_emitted(i, j, |t, s, c| {
                if !self.is_dirichlet(t) && !self.is_dirichlet(s) {
                    // SAFETY: the phase schedule keeps concurrent targets disjoint
                    unsafe { out.add(t, c * x[s]) };
                }
            });
        });
        for i in 0..nr {
            if self.is_dirichlet_ring(i) {
                for j in 0..self.grid.ntheta() {
                    let p = self.grid.index(i, j);
                    y[p] = x[p];
                }
            }
        }
    }

    /// `r = b - A x`.
    pub fn residual(&self, mode: StencilMode, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
        check_len("right-hand side", b.len(), self.len())?;
        self.apply(mode, x, r)?;
        r.par_iter_mut()
            .zip(b.par_iter())
            .for_each(|(r, b)| *r = b - *r);
        Ok(())
    }

    /// Lumped load `W_p f(p) |det DF(p)|` without boundary handling.
    fn load(&self, i: usize, j: usize) -> Result<f64> {
        let g = &self.grid;
        let (r, t) = (g.radius(i), g.angle(j));
        let f = self.case.rhs_f(&self.geom, r, t)?;
        let nc = self.node_coeffs(i, j);
        let mut qs = [Quad::default(); 4];
        let nq = self.quads(i, j, &nc, &mut qs);
        let w: f64 = qs[..nq].iter().map(|q| q.w).sum();
        Ok(w * f * nc.det)
    }

    /// Dirichlet value at node `(i, j)`.
    #[inline]
    pub fn dirichlet_value(&self, i: usize, j: usize) -> f64 {
        self.case
            .dirichlet_u(self.grid.radius(i), self.grid.angle(j))
    }

    /// Right-hand side with Dirichlet elimination, written into `b`.
    pub fn assemble_rhs(&self, b: &mut [f64]) -> Result<()> {
        check_len("right-hand side", b.len(), self.len())?;
        let lift = |s: usize| {
            let (i, j) = self.grid.coords(s);
            if self.is_dirichlet_ring(i) {
                self.dirichlet_value(i, j)
            } else {
                0.0
            }
        };
        b.par_iter_mut()
            .enumerate()
            .try_for_each(|(p, out)| -> Result<()> {
                let (i, j) = self.grid.coords(p);
                *out = if self.is_dirichlet_ring(i) {
                    self.dirichlet_value(i, j)
                } else {
                    self.load(i, j)? - self.gather_row(i, j, lift)
                };
                Ok(())
            })
    }

    /// Overwrites Dirichlet entries of `u` with boundary data.
    pub fn enforce_dirichlet(&self, u: &mut [f64]) {
        for i in 0..self.grid.nr() {
            if self.is_dirichlet_ring(i) {
                for j in 0..self.grid.ntheta() {
                    u[self.grid.index(i, j)] = self.dirichlet_value(i, j);
                }
            }
        }
    }

    /// Zeroes Dirichlet entries of `v`.
    pub fn zero_dirichlet(&self, v: &mut [f64]) {
        for i in 0..self.grid.nr() {
            if self.is_dirichlet_ring(i) {
                for j in 0..self.grid.ntheta() {
                    v[self.grid.index(i, j)] = 0.0;
                }
            }
        }
    }

    /// Nonzeros of row `p` of the boundary-eliminated operator, merged by column.
    pub fn row_entries(&self, p: usize) -> Vec<(usize, f64)> {
        let (i, j) = self.grid.coords(p);
        if self.is_dirichlet_ring(i) {
            return vec![(p, 1.0)];
        }
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(13);
        self.for_each_row_term(i, j, |s, c| {
            if self.is_dirichlet(s) {
                return;
            }
            match out.iter_mut().find(|e| e.0 == s) {
                Some(e) => e.1 += c,
                None => out.push((s, c)),
            }
        });
        out
    }

    /// Lower-triangle triplets of the boundary-eliminated operator restricted
    /// to `rows` (sorted storage indices); couplings leaving the subset are dropped.
    ///
    /// Each stored entry is accumulated once, so the mirrored matrix is
    /// exactly symmetric.
    pub fn assemble_coo(&self, rows: &[usize]) -> Vec<Triplet> {
        let inside = |p: usize| rows.binary_search(&p).is_ok();
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut emitters: Vec<(usize, usize)> = Vec::new();
        let g = &self.grid;
        for &p in rows {
            let (i, j) = g.coords(p);
            emitters.push((i, j));
            if i + 1 < g.nr() {
                emitters.push((i + 1, j));
            }
            if i > 0 {
                emitters.push((i - 1, j));
            } else if self.inner == InnerBoundary::AcrossOrigin {
                emitters.push((0, g.antipode(j)));
            }
            emitters.push((i, g.next_angle(j)));
            emitters.push((i, g.prev_angle(j)));
        }
        emitters.sort_unstable();
        emitters.dedup();
        for &(i, j) in &emitters {
            self.for_each_emitted(i, j, |t, s, c| {
                if t < s || !inside(t) || !inside(s) {
                    return;
                }
                if self.is_dirichlet(t) || self.is_dirichlet(s) {
                    return;
                }
                *map.entry((t, s)).or_insert(0.0) += c;
            });
        }
        for &p in rows {
            if self.is_dirichlet(p) {
                map.insert((p, p), 1.0);
            }
        }
        map.into_iter()
            .map(|((r, c), v)| Triplet::new(r, c, v))
            .collect()
    }

    /// Dense boundary-eliminated matrix (small grids only).
    pub fn assemble_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let rows: Vec<usize> = (0..n).collect();
        let mut a = vec![vec![0.0; n]; n];
        for t in self.assemble_coo(&rows) {
            a[t.row][t.col] = t.val;
            a[t.col][t.row] = t.val;
        }
        a
    }

    /// Evaluates `f` at every node into `out` (testing and diagnostics).
    pub fn source_values(&self, out: &mut [f64]) -> Result<()> {
        check_len("source vector", out.len(), self.len())?;
        out.par_iter_mut()
            .enumerate()
            .try_for_each(|(p, v)| -> Result<()> {
                let (i, j) = self.grid.coords(p);
                *v = self
                    .case
                    .rhs_f(&self.geom, self.grid.radius(i), self.grid.angle(j))?;
                Ok(())
            })
    }

    /// Exact solution sampled at the nodes, if the case has one.
    pub fn exact_values(&self) -> Option<Vec<f64>> {
        let u = self.case.exact_solution()?;
        Some(
            (0..self.len())
                .map(|p| {
                    let (i, j) = self.grid.coords(p);
                    u.value(self.grid.radius(i), self.grid.angle(j))
                })
                .collect(),
        )
    }

    /// Unconstrained energy matrix times `x` (testing aid for the energy identity).
    pub fn apply_energy_matrix(&self, x: &[f64], y: &mut [f64]) {
        for (p, out) in y.iter_mut().enumerate() {
            let (i, j) = self.grid.coords(p);
            *out = self.gather_row(i, j, |s| x[s]);
        }
    }

    /// Unconstrained lumped load vector.
    pub fn load_vector(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|p| {
                let (i, j) = self.grid.coords(p);
                self.load(i, j)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;
    use crate::problem::{AlphaProfile, BetaProfile, SolutionKind};
    use rand::{Rng, SeedableRng};

    fn stencil(geom: Geometry, nr: usize, nt: usize, inner: InnerBoundary) -> Stencil {
        let r0 = match inner {
            InnerBoundary::AcrossOrigin => 0.05,
            InnerBoundary::Dirichlet => 0.1,
        };
        let grid = PolarGrid::build(&GridParams::uniform(r0, 1.3, nr, nt)).unwrap();
        Stencil::new(
            grid,
            geom,
            ProblemCase::zoni_polar(1.3),
            inner,
            CachePolicy {
                profile: true,
                geometry: true,
            },
        )
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let st = stencil(
            Geometry::default_czarny(),
            9,
            8,
            InnerBoundary::AcrossOrigin,
        );
        let x = vec![0.0; st.len()];
        for mode in [StencilMode::Take, StencilMode::Give] {
            let mut y = vec![1.0; st.len()];
            st.apply(mode, &x, &mut y).unwrap();
            assert!(y.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn take_and_give_match_dense() {
        for inner in [InnerBoundary::AcrossOrigin, InnerBoundary::Dirichlet] {
            for geom in [
                Geometry::CirclePolar,
                Geometry::default_shafranov(),
                Geometry::default_czarny(),
            ] {
                let st = stencil(geom, 9, 8, inner);
                let a = st.assemble_dense();
                let n = st.len();
                for p in 0..n {
                    for q in 0..n {
                        assert_eq!(a[p][q], a[q][p]);
                    }
                }
                let x = random(n, 5);
                let dense: Vec<f64> = a
                    .iter()
                    .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                    .collect();
                let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for mode in [StencilMode::Take, StencilMode::Give] {
                    let mut y = vec![0.0; n];
                    st.apply(mode, &x, &mut y).unwrap();
                    for (a, b) in y.iter().zip(&dense) {
                        assert!((a - b).abs() <= 1e-13 * scale, "{mode:?} {inner:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn row_entries_match_dense() {
        let st = stencil(
            Geometry::default_shafranov(),
            9,
            8,
            InnerBoundary::AcrossOrigin,
        );
        let a = st.assemble_dense();
        for p in 0..st.len() {
            let mut row = vec![0.0; st.len()];
            for (c, v) in st.row_entries(p) {
                row[c] += v;
            }
            for q in 0..st.len() {
                assert!((row[q] - a[p][q]).abs() <= 1e-14 * a[p][p].abs());
            }
        }
    }

    #[test]
    fn across_origin_couples_antipodes() {
        let st = stencil(Geometry::CirclePolar, 9, 8, InnerBoundary::AcrossOrigin);
        let g = st.grid().clone();
        for j in 0..8 {
            let p = g.index(0, j);
            let q = g.index(0, g.antipode(j));
            assert!(st.row_entries(p).iter().any(|&(c, v)| c == q && v != 0.0));
        }
    }

    #[test]
    fn polar_laplacian_stencil() {
        let grid = PolarGrid::build(&GridParams::uniform(0.1, 1.3, 13, 16)).unwrap();
        let case = ProblemCase::new(
            AlphaProfile::Poisson,
            BetaProfile::Zero,
            1.3,
            SolutionKind::ConstantSource,
        );
        let st = Stencil::new(
            grid.clone(),
            Geometry::CirclePolar,
            case,
            InnerBoundary::Dirichlet,
            CachePolicy {
                profile: false,
                geometry: false,
            },
        );
        let (i, j) = (5, 3);
        let (h, k) = (grid.h(0), grid.k(0));
        let (r, rm, rp) = (grid.radius(i), grid.radius(i - 1), grid.radius(i + 1));
        // arr = r/2 and att = 1/(2r): finite-volume polar Laplacian with
        // face radii (r_i + r_{i+-1})/2 and face length h / r_i
        let east = -k * (r + rp) / (2.0 * h);
        let west = -k * (r + rm) / (2.0 * h);
        let north = -h / (r * k);
        let centre = -(east + west + 2.0 * north);
        let p = grid.index(i, j);
        let row = st.row_entries(p);
        let get = |q: usize| row.iter().find(|e| e.0 == q).map_or(0.0, |e| e.1);
        assert!((get(grid.index(i + 1, j)) - east).abs() < 1e-14);
        assert!((get(grid.index(i - 1, j)) - west).abs() < 1e-14);
        assert!((get(grid.index(i, j + 1)) - north).abs() < 1e-14);
        assert!((get(grid.index(i, j - 1)) - north).abs() < 1e-14);
        assert!((get(p) - centre).abs() < 1e-13);
        assert!(get(grid.index(i + 1, j + 1)).abs() < 1e-15);
        assert_eq!(row.iter().filter(|e| e.1.abs() > 1e-14).count(), 5);
    }

    /// Cell-by-cell discrete energy written straight from the corner formula.
    fn energy(st: &Stencil, u: &[f64], load: &[f64]) -> f64 {
        let g = st.grid();
        let nt = g.ntheta();
        let mut e = 0.0;
        for i in 0..g.nr() - 1 {
            for j in 0..nt {
                let j1 = (j + 1) % nt;
                let (h, k) = (g.h(i), g.k(j));
                for (ci, cj, sr, st_) in [
                    (i, j, 1.0, 1.0),
                    (i + 1, j, -1.0, 1.0),
                    (i, j1, 1.0, -1.0),
                    (i + 1, j1, -1.0, -1.0),
                ] {
                    let oi = if sr > 0.0 { ci + 1 } else { ci - 1 };
                    let oj = if st_ > 0.0 { j1 } else { j };
                    let uc = u[g.index(ci, cj)];
                    let dr = sr * (u[g.index(oi, cj)] - uc) / h;
                    let dt = st_ * (u[g.index(ci, oj)] - uc) / k;
                    let c = st
                        .geometry()
                        .transform_coefficients(
                            st.case().alpha(g.radius(ci)),
                            g.radius(ci),
                            g.angle(cj),
                        )
                        .unwrap();
                    let beta = st.case().beta(g.radius(ci));
                    e += h * k / 4.0
                        * (c.arr * dr * dr
                            + c.art * dr * dt
                            + c.att * dt * dt
                            + beta * c.det_abs * uc * uc / 2.0);
                }
            }
        }
        e - u.iter().zip(load).map(|(a, b)| a * b).sum::<f64>()
    }

    #[test]
    fn gradient_of_energy() {
        let st = stencil(Geometry::default_czarny(), 9, 8, InnerBoundary::Dirichlet);
        let n = st.len();
        let u = random(n, 9);
        let load = st.load_vector().unwrap();
        let mut ku = vec![0.0; n];
        st.apply_energy_matrix(&u, &mut ku);
        let step = 1e-6;
        for p in 0..n {
            let mut up = u.clone();
            let mut um = u.clone();
            up[p] += step;
            um[p] -= step;
            let fd = (energy(&st, &up, &load) - energy(&st, &um, &load)) / (2.0 * step);
            let grad = ku[p] - load[p];
            assert!(
                (fd - grad).abs() <= 1e-5 * grad.abs().max(1e-3),
                "{p}: {fd} vs {grad}"
            );
        }
    }

    #[test]
    fn caching_is_neutral() {
        let grid = PolarGrid::build(&GridParams::uniform(0.01, 1.3, 17, 16)).unwrap();
        let make = |profile, geometry| {
            Stencil::new(
                grid.clone(),
                Geometry::default_czarny(),
                ProblemCase::zoni_polar(1.3),
                InnerBoundary::AcrossOrigin,
                CachePolicy { profile, geometry },
            )
        };
        let x = random(grid.len(), 2);
        let mut reference = vec![0.0; grid.len()];
        make(false, false)
            .apply(StencilMode::Give, &x, &mut reference)
            .unwrap();
        for (p, g) in [(true, false), (false, true), (true, true)] {
            let mut y = vec![0.0; grid.len()];
            make(p, g).apply(StencilMode::Give, &x, &mut y).unwrap();
            assert_eq!(y, reference);
        }
    }

    #[test]
    fn uniform_node_weight() {
        let st = stencil(
            Geometry::default_shafranov(),
            9,
            8,
            InnerBoundary::Dirichlet,
        );
        let g = st.grid();
        let (i, j) = (4, 2);
        let load = st.load_vector().unwrap()[g.index(i, j)];
        let (r, t) = (g.radius(i), g.angle(j));
        let f = st.case().rhs_f(st.geometry(), r, t).unwrap();
        let det = st.geometry().jacobian(r, t).unwrap().det().abs();
        assert!((load - g.h(0) * g.k(0) * det * f).abs() <= 1e-15 * load.abs().max(1e-300) * 10.0);
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let grid = PolarGrid::build(&GridParams::uniform(0.1, 1.3, 9, 8)).unwrap();
        struct Zero;
        impl crate::problem::ManufacturedSolution for Zero {
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
        let case = ProblemCase::with_solution(
            AlphaProfile::zoni(),
            BetaProfile::InverseAlpha,
            1.3,
            std::sync::Arc::new(Zero),
        );
        let st = Stencil::new(
            grid,
            Geometry::default_czarny(),
            case,
            InnerBoundary::Dirichlet,
            CachePolicy {
                profile: true,
                geometry: false,
            },
        );
        let mut b = vec![1.0; st.len()];
        st.assemble_rhs(&mut b).unwrap();
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interior_row_sums_balance_boundary_couplings() {
        let grid = PolarGrid::build(&GridParams::uniform(0.1, 1.3, 9, 8)).unwrap();
        let case = ProblemCase::new(
            AlphaProfile::zoni(),
            BetaProfile::Zero,
            1.3,
            SolutionKind::ConstantSource,
        );
        let st = Stencil::new(
            grid.clone(),
            Geometry::default_czarny(),
            case,
            InnerBoundary::Dirichlet,
            CachePolicy {
                profile: false,
                geometry: true,
            },
        );
        let ones = vec![1.0; st.len()];
        let mut y = vec![0.0; st.len()];
        st.apply(StencilMode::Give, &ones, &mut y).unwrap();
        let mut raw = vec![0.0; st.len()];
        st.apply_energy_matrix(&ones, &mut raw);
        for p in 0..st.len() {
            if st.is_dirichlet(p) {
                continue;
            }
            let (i, j) = grid.coords(p);
            let boundary = st.gather_row(i, j, |s| if st.is_dirichlet(s) { 1.0 } else { 0.0 });
            assert!(raw[p].abs() < 1e-12);
            assert!((y[p] + boundary).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_and_radial_line_patterns() {
        let st = stencil(
            Geometry::default_czarny(),
            17,
            16,
            InnerBoundary::AcrossOrigin,
        );
        let g = st.grid().clone();
        let split = g.smoother_split_index();
        assert!(split >= 2 && split < g.nr());
        let ring: Vec<usize> = (0..16).map(|j| g.index(1, j)).collect();
        let coo = st.assemble_coo(&ring);
        assert_eq!(coo.len(), 2 * 16);
        for t in &coo {
            let (_, a) = g.coords(t.row);
            let (_, b) = g.coords(t.col);
            let d = (a as isize - b as isize).rem_euclid(16);
            assert!(d == 0 || d == 1 || d == 15);
        }
        let mut spoke: Vec<usize> = (split..g.nr()).map(|i| g.index(i, 3)).collect();
        spoke.sort_unstable();
        for t in st.assemble_coo(&spoke) {
            let (a, _) = g.coords(t.row);
            let (b, _) = g.coords(t.col);
            assert!(a.abs_diff(b) <= 1);
        }
    }
}
