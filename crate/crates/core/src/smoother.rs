//! Combined circle/radial zebra line smoother.
//!
//! Rings close to the origin are relaxed as whole circles (cyclic tridiagonal
//! systems), outer rings as radial spokes (tridiagonal systems). One
//! smoothing step runs four sweeps: black circles, white circles, black
//! spokes, white spokes. Ring 0 and spoke 0 are black.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CyclicTridiagFactor, SparseDirectFactor, TridiagFactor, Triplet};
use crate::stencil::{InnerBoundary, SharedMut, Stencil, StencilMode};

/// Relative spread of angular spacings still treated as uniform.
const UNIFORM_K_RTOL: f64 = 1e-9;

/// First ring handled by the radial smoother.
///
/// Ring `i` is circle-smoothed while `r_i k <= h_i` (the outermost ring
/// reuses the last spacing); once a ring switches to radial smoothing all
/// outer rings follow. At least ring 0 is always circle-smoothed.
pub fn split_smoother_regions(radii: &[f64], angular_spacings: &[f64]) -> Result<usize> {
    let k = angular_spacings[0];
    if angular_spacings
        .iter()
        .any(|&kj| (kj - k).abs() > UNIFORM_K_RTOL * k)
    {
        return Err(Error::NonUniformAngles);
    }
    let nr = radii.len();
    if nr < 2 {
        return Ok(nr);
    }
    for i in 0..nr {
        let h = if i + 1 < nr {
            radii[i + 1] - radii[i]
        } else {
            radii[nr - 1] - radii[nr - 2]
        };
        if radii[i] * k > h {
            return Ok(i.max(1));
        }
    }
    Ok(nr)
}

/// Kind of line relaxed in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Circle,
    Radial,
}

/// Line color.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    Black,
    White,
}

impl Color {
    fn of(index: usize) -> Self {
        if index.is_multiple_of(2) {
            Color::Black
        } else {
            Color::White
        }
    }
}

/// Fixed sweep order of one smoothing step.
pub const SWEEPS: [(LineKind, Color); 4] = [
    (LineKind::Circle, Color::Black),
    (LineKind::Circle, Color::White),
    (LineKind::Radial, Color::Black),
    (LineKind::Radial, Color::White),
];

#[derive(Debug, Clone)]
enum CircleSystem {
    /// every node of the ring is fixed
    Identity,
    Cyclic(CyclicTridiagFactor),
    Direct(SparseDirectFactor),
}

/// Which nodes the smoother relaxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxed {
    /// every non-Dirichlet node
    All,
    /// only nodes absent from the next coarser grid
    FineOnly,
}

/// Factorized line systems of one level.
#[derive(Debug, Clone)]
pub struct SmootherPlan {
    relaxed: Relaxed,
    circles: Vec<CircleSystem>,
    radials: Vec<TridiagFactor>,
}

impl SmootherPlan {
    /// Builds and factors every line system of `op`.
    pub fn build(op: &Stencil, relaxed: Relaxed) -> Result<Self> {
        let g = op.grid();
        let split = g.smoother_split_index();
        let nt = g.ntheta();
        let plan_relaxed = relaxed;
        let fixed = |p: usize| is_fixed(op, plan_relaxed, p);
        let circles = (0..split)
            .into_par_iter()
            .map(|i| -> Result<CircleSystem> {
                let nodes: Vec<usize> = (0..nt).map(|j| g.index(i, j)).collect();
                if nodes.iter().all(|&p| fixed(p)) {
                    return Ok(CircleSystem::Identity);
                }
                let wrap = |e: Error| Error::LineFactorization {
                    kind: "circle",
                    line: i,
                    source: Box::new(e),
                };
                if i == 0 && op.inner_boundary() == InnerBoundary::AcrossOrigin {
                    let trip = line_triplets(op, &nodes, &fixed);
                    return SparseDirectFactor::new(nt, &trip)
                        .map(CircleSystem::Direct)
                        .map_err(wrap);
                }
                let (diag, mut off) = line_bands(op, &nodes, &fixed);
                let corner = off.pop().unwrap();
                CyclicTridiagFactor::new(diag, off, corner)
                    .map(CircleSystem::Cyclic)
                    .map_err(wrap)
            })
            .collect::<Result<Vec<_>>>()?;
        let radials = (0..nt)
            .into_par_iter()
            .filter(|_| split < g.nr())
            .map(|j| -> Result<TridiagFactor> {
                let nodes: Vec<usize> = (split..g.nr()).map(|i| g.index(i, j)).collect();
                let (diag, mut off) = line_bands(op, &nodes, &fixed);
                off.pop();
                TridiagFactor::new(diag, off).map_err(|e| Error::LineFactorization {
                    kind: "radial",
                    line: j,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            relaxed,
            circles,
            radials,
        })
    }

    pub fn relaxed(&self) -> Relaxed {
        self.relaxed
    }

    /// Number of circle lines.
    pub fn circle_count(&self) -> usize {
        self.circles.len()
    }

    /// Number of radial lines.
    pub fn radial_count(&self) -> usize {
        self.radials.len()
    }

    /// Whether circle line `i` is solved by the sparse direct solver.
    pub fn is_direct(&self, i: usize) -> bool {
        matches!(self.circles.get(i), Some(CircleSystem::Direct(_)))
    }

    /// Stored factor entries.
    pub fn stored_entries(&self) -> usize {
        let c: usize = self
            .circles
            .iter()
            .map(|c| match c {
                CircleSystem::Identity => 0,
                CircleSystem::Cyclic(f) => 2 * f.len(),
                CircleSystem::Direct(f) => f.stored_entries(),
            })
            .sum();
        c + self.radials.iter().map(|f| 2 * f.len()).sum::<usize>()
    }

    /// Heap bytes held by the plan.
    pub fn stored_bytes(&self) -> usize {
        let direct: usize = self
            .circles
            .iter()
            .map(|c| match c {
                CircleSystem::Direct(f) => f.stored_bytes() - 8 * f.stored_entries(),
                _ => 0,
            })
            .sum();
        8 * self.stored_entries()
            + direct
            + std::mem::size_of::<CircleSystem>() * self.circles.len()
            + std::mem::size_of::<TridiagFactor>() * self.radials.len()
    }

    /// One full smoothing step (four sweeps). `work` receives line
    /// right-hand sides and is clobbered.
    pub fn smooth(
        &self,
        op: &Stencil,
        mode: StencilMode,
        u: &mut [f64],
        b: &[f64],
        work: &mut [f64],
    ) {
        for (kind, color) in SWEEPS {
            self.sweep(op, mode, kind, color, u, b, work);
        }
    }

    /// One sweep over the lines of the given kind and color.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep(
        &self,
        op: &Stencil,
        mode: StencilMode,
        kind: LineKind,
        color: Color,
        u: &mut [f64],
        b: &[f64],
        work: &mut [f64],
    ) {
        let g = op.grid();
        let split = g.smoother_split_index();
        let nt = g.ntheta();
        let nr = g.nr();
        if (kind == LineKind::Circle && split == 0) || (kind == LineKind::Radial && split == nr) {
            return;
        }
        match mode {
            StencilMode::Take => self.rhs_take(op, kind, color, u, b, work),
            StencilMode::Give => self.rhs_give(op, kind, color, u, b, work),
        }
        let circle_len = split * nt;
        let spoke = nr - split;
        match kind {
            LineKind::Circle => {
                work[..circle_len]
                    .par_chunks_mut(nt)
                    .zip(self.circles.par_iter())
                    .enumerate()
                    .filter(|(i, _)| Color::of(*i) == color)
                    .for_each_init(
                        || vec![0.0; nt],
                        |scratch, (_, (rhs, sys))| match sys {
                            CircleSystem::Identity => {}
                            CircleSystem::Cyclic(f) => f.solve_with(rhs, scratch),
                            CircleSystem::Direct(f) => f.solve_with(rhs, scratch),
                        },
                    );
                u[..circle_len]
                    .par_chunks_mut(nt)
                    .zip(work[..circle_len].par_chunks(nt))
                    .enumerate()
                    .filter(|(i, _)| Color::of(*i) == color)
                    .for_each(|(_, (dst, src))| dst.copy_from_slice(src));
            }
            LineKind::Radial => {
                work[circle_len..]
                    .par_chunks_mut(spoke)
                    .zip(self.radials.par_iter())
                    .enumerate()
                    .filter(|(j, _)| Color::of(*j) == color)
                    .for_each(|(_, (rhs, f))| f.solve(rhs));
                u[circle_len..]
                    .par_chunks_mut(spoke)
                    .zip(work[circle_len..].par_chunks(spoke))
                    .enumerate()
                    .filter(|(j, _)| Color::of(*j) == color)
                    .for_each(|(_, (dst, src))| dst.copy_from_slice(src));
            }
        }
    }

    fn in_sweep(op: &Stencil, kind: LineKind, color: Color, i: usize, j: usize) -> bool {
        let split = op.grid().smoother_split_index();
        match kind {
            LineKind::Circle => i < split && Color::of(i) == color,
            LineKind::Radial => i >= split && Color::of(j) == color,
        }
    }

    /// Value a row sees from source `s` when building the right-hand side of
    /// target `t`: zero for Dirichlet sources and for unknowns of `t`'s line.
    #[inline]
    fn source_value(&self, op: &Stencil, u: &[f64], t: (usize, usize), s: usize) -> f64 {
        let (si, sj) = op.grid().coords(s);
        if op.is_dirichlet_ring(si) {
            return 0.0;
        }
        let split = op.grid().smoother_split_index();
        let same_line = if t.0 < split {
            si == t.0
        } else {
            si >= split && sj == t.1
        };
        if same_line && !is_fixed(op, self.relaxed, s) {
            0.0
        } else {
            u[s]
        }
    }

    /// Initial right-hand side value of a sweep node.
    #[inline]
    fn base_value(&self, op: &Stencil, u: &[f64], b: &[f64], p: usize) -> f64 {
        if op.is_dirichlet(p) {
            b[p]
        } else if is_fixed(op, self.relaxed, p) {
            u[p]
        } else {
            b[p]
        }
    }

    fn rhs_take(
        &self,
        op: &Stencil,
        kind: LineKind,
        color: Color,
        u: &[f64],
        b: &[f64],
        work: &mut [f64],
    ) {
        let g = op.grid();
        let (lo, hi) = sweep_range(op, kind);
        work[lo..hi]
            .par_iter_mut()
            .enumerate()
            .for_each(|(off, out)| {
                let p = lo + off;
                let (i, j) = g.coords(p);
                if !Self::in_sweep(op, kind, color, i, j) {
                    return;
                }
                let base = self.base_value(op, u, b, p);
                *out = if is_fixed(op, self.relaxed, p) {
                    base
                } else {
                    base - op.gather_row(i, j, |s| self.source_value(op, u, (i, j), s))
                };
            });
    }

    fn rhs_give(
        &self,
        op: &Stencil,
        kind: LineKind,
        color: Color,
        u: &[f64],
        b: &[f64],
        work: &mut [f64],
    ) {
        let g = op.grid();
        let (lo, hi) = sweep_range(op, kind);
        work[lo..hi]
            .par_iter_mut()
            .enumerate()
            .for_each(|(off, out)| {
                let p = lo + off;
                let (i, j) = g.coords(p);
                if Self::in_sweep(op, kind, color, i, j) {
                    *out = self.base_value(op, u, b, p);
                }
            });
        let split = g.smoother_split_index();
        let (ring_lo, ring_hi) = match kind {
            LineKind::Circle => (0, (split + 1).min(g.nr())),
            LineKind::Radial => (split.saturating_sub(1), g.nr()),
        };
        let out = SharedMut::new(work);
        op.give_phases(ring_lo, ring_hi, |ei, ej| {
            op.for_each_emitted(ei, ej, |t, s, c| {
                let (ti, tj) = g.coords(t);
                if !Self::in_sweep(op, kind, color, ti, tj) || is_fixed(op, self.relaxed, t) {
                    return;
                }
                let v = self.source_value(op, u, (ti, tj), s);
                if v != 0.0 {
                    // SAFETY: the phase schedule keeps concurrent targets disjoint
                    unsafe { out.add(t, -c * v) };
                }
            });
        });
    }
}

/// Storage range touched by a sweep of the given kind.
fn sweep_range(op: &Stencil, kind: LineKind) -> (usize, usize) {
    let circle_len = op.grid().numbering().circle_block_len();
    match kind {
        LineKind::Circle => (0, circle_len),
        LineKind::Radial => (circle_len, op.len()),
    }
}

/// Nodes whose rows the smoother keeps as identity.
#[inline]
fn is_fixed(op: &Stencil, relaxed: Relaxed, p: usize) -> bool {
    let (i, j) = op.grid().coords(p);
    op.is_dirichlet_ring(i) || (relaxed == Relaxed::FineOnly && i % 2 == 0 && j % 2 == 0)
}

/// Diagonal and off-diagonal bands of the line system over `nodes`; the last
/// off-diagonal entry couples the last node back to the first.
fn line_bands(
    op: &Stencil,
    nodes: &[usize],
    fixed: &impl Fn(usize) -> bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (a, &p) in nodes.iter().enumerate() {
        if fixed(p) {
            diag[a] = 1.0;
            continue;
        }
        let next = nodes[(a + 1) % n];
        for (c, v) in op.row_entries(p) {
            if c == p {
                diag[a] += v;
            } else if c == next && !fixed(next) && n > 1 {
                off[a] += v;
            }
        }
    }
    (diag, off)
}

/// Lower-triangle triplets (local indices) of the line system over `nodes`.
fn line_triplets(op: &Stencil, nodes: &[usize], fixed: &impl Fn(usize) -> bool) -> Vec<Triplet> {
    let local = |p: usize| nodes.iter().position(|&q| q == p);
    let mut out = Vec::new();
    for (a, &p) in nodes.iter().enumerate() {
        if fixed(p) {
            out.push(Triplet::new(a, a, 1.0));
            continue;
        }
        for (c, v) in op.row_entries(p) {
            if let Some(bi) = local(c) {
                if bi <= a && !fixed(c) {
                    out.push(Triplet::new(a, bi, v));
                }
            }
        }
    }
    out
}
