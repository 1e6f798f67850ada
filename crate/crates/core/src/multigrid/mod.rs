//! Level hierarchy, V/W/F cycles, nested iteration and implicit extrapolation.
//!
//! Coarse levels re-discretize the operator on their own grid. Inside cycles
//! the coarse right-hand side is the restricted fine residual; nested
//! iteration assembles each level's right-hand side directly.

mod norms;
mod solver;
mod transfer;

pub use norms::NormType;
pub use solver::{solve, ConvergenceReport, ErrorNorms, LevelMemory, Solver, Timings};
pub use transfer::Transfer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Geometry;
use crate::grid::PolarGrid;
use crate::linalg::SparseDirectFactor;
use crate::problem::ProblemCase;
use crate::smoother::{Relaxed, SmootherPlan};
use crate::stencil::{CachePolicy, InnerBoundary, Stencil, StencilMode};

/// Weight of the restricted fine residual in the extrapolated coarse
/// right-hand side; the coarse residual enters with `1 - EXTRAPOLATION_WEIGHT`.
pub const EXTRAPOLATION_WEIGHT: f64 = 4.0 / 3.0;

/// Recursion pattern of a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CycleType {
    #[default]
    V,
    W,
    F,
}

impl CycleType {
    pub fn name(self) -> &'static str {
        match self {
            CycleType::V => "V",
            CycleType::W => "W",
            CycleType::F => "F",
        }
    }
}

/// Cycle parameters shared by every level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    pub cycle: CycleType,
    pub pre_smoothing: usize,
    pub post_smoothing: usize,
    pub mode: StencilMode,
    /// Implicit extrapolation on the finest two levels.
    pub extrapolation: bool,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            cycle: CycleType::V,
            pre_smoothing: 1,
            post_smoothing: 1,
            mode: StencilMode::Give,
            extrapolation: false,
        }
    }
}

/// One multigrid level.
#[derive(Debug)]
pub struct Level {
    index: usize,
    op: Stencil,
    smoother: Option<SmootherPlan>,
    direct: Option<SparseDirectFactor>,
    u: Vec<f64>,
    f: Vec<f64>,
    res: Vec<f64>,
    /// assembled right-hand side, kept on the second level for extrapolation
    assembled: Option<Vec<f64>>,
}

impl Level {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn operator(&self) -> &Stencil {
        &self.op
    }

    pub fn grid(&self) -> &PolarGrid {
        self.op.grid()
    }

    pub fn smoother(&self) -> Option<&SmootherPlan> {
        self.smoother.as_ref()
    }

    pub fn is_coarsest(&self) -> bool {
        self.direct.is_some()
    }

    pub fn solution(&self) -> &[f64] {
        &self.u
    }

    pub fn rhs(&self) -> &[f64] {
        &self.f
    }

    fn smooth(&mut self, mode: StencilMode, steps: usize) {
        if let Some(plan) = &self.smoother {
            for _ in 0..steps {
                plan.smooth(&self.op, mode, &mut self.u, &self.f, &mut self.res);
            }
        }
    }

    fn direct_solve(&mut self) {
        let d = self
            .direct
            .as_ref()
            .expect("coarsest level has a direct factor");
        self.u.copy_from_slice(&self.f);
        d.solve_with(&mut self.u, &mut self.res);
    }

    fn residual(&mut self, mode: StencilMode) -> Result<()> {
        self.op.residual(mode, &self.f, &self.u, &mut self.res)
    }

    /// Persistent heap bytes by tag.
    fn memory(&self) -> LevelMemory {
        let n = self.op.len();
        let cache = self.op.cache();
        let mut tags = std::collections::BTreeMap::new();
        tags.insert("multigrid.vectors".to_string(), 8 * 3 * n);
        tags.insert(
            "stencil.trig_cache".to_string(),
            8 * (cache.sin.len() + cache.cos.len()),
        );
        let prof =
            cache.alpha.as_ref().map_or(0, Vec::len) + cache.beta.as_ref().map_or(0, Vec::len);
        if prof > 0 {
            tags.insert("stencil.profile_cache".to_string(), 8 * prof);
        }
        if let Some(g) = &cache.geometry {
            tags.insert("stencil.geometry_cache".to_string(), 8 * 4 * g.arr.len());
        }
        if let Some(s) = &self.smoother {
            tags.insert("smoother.factors".to_string(), s.stored_bytes());
        }
        if let Some(d) = &self.direct {
            tags.insert("linalg.coarse_direct".to_string(), d.stored_bytes());
        }
        if let Some(a) = &self.assembled {
            tags.insert("multigrid.extrapolation_rhs".to_string(), 8 * a.len());
        }
        LevelMemory {
            level: self.index,
            nr: self.grid().nr(),
            ntheta: self.grid().ntheta(),
            nodes: n,
            bytes: tags,
        }
    }
}

/// Grid hierarchy with per-level operators, smoothers and vectors.
#[derive(Debug)]
pub struct Hierarchy {
    levels: Vec<Level>,
    transfers: Vec<Transfer>,
    opts: CycleOptions,
}

impl Hierarchy {
    /// Builds every level below `fine` (at most `max_levels`), factors the
    /// smoothers and the coarsest operator, and assembles the finest
    /// right-hand side. The initial guess is zero with boundary data imposed.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        fine: PolarGrid,
        geom: &Geometry,
        case: &ProblemCase,
        inner: InnerBoundary,
        cache: CachePolicy,
        max_levels: Option<usize>,
        opts: CycleOptions,
    ) -> Result<Self> {
        let chain = fine.level_chain(max_levels);
        let nl = chain.len();
        let transfers = chain
            .windows(2)
            .map(|w| Transfer::new(&w[0], &w[1]))
            .collect::<Result<Vec<_>>>()?;
        let mut levels = Vec::with_capacity(nl);
        for (index, grid) in chain.into_iter().enumerate() {
            let op = Stencil::new(grid, *geom, case.clone(), inner, cache);
            let n = op.len();
            let (smoother, direct) = if index + 1 == nl {
                let rows: Vec<usize> = (0..n).collect();
                (
                    None,
                    Some(SparseDirectFactor::new(n, &op.assemble_coo(&rows))?),
                )
            } else {
                let relaxed = if opts.extrapolation && index == 0 {
                    Relaxed::FineOnly
                } else {
                    Relaxed::All
                };
                (Some(SmootherPlan::build(&op, relaxed)?), None)
            };
            let assembled = if opts.extrapolation && index == 1 {
                let mut b = vec![0.0; n];
                op.assemble_rhs(&mut b)?;
                Some(b)
            } else {
                None
            };
            levels.push(Level {
                index,
                op,
                smoother,
                direct,
                u: vec![0.0; n],
                f: vec![0.0; n],
                res: vec![0.0; n],
                assembled,
            });
        }
        let top = &mut levels[0];
        top.op.assemble_rhs(&mut top.f)?;
        top.op.enforce_dirichlet(&mut top.u);
        Ok(Self {
            levels,
            transfers,
            opts,
        })
    }

    pub fn options(&self) -> CycleOptions {
        self.opts
    }

    pub fn set_options(&mut self, opts: CycleOptions) {
        assert_eq!(
            opts.extrapolation, self.opts.extrapolation,
            "extrapolation is fixed when the hierarchy is built"
        );
        self.opts = opts;
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> &Level {
        &self.levels[i]
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn transfers(&self) -> &[Transfer] {
        &self.transfers
    }

    /// Whether extrapolation is active (it needs at least two levels).
    pub fn extrapolating(&self) -> bool {
        self.opts.extrapolation && self.levels.len() > 1
    }

    pub fn solution(&self) -> &[f64] {
        &self.levels[0].u
    }

    /// Replaces the finest iterate; boundary data is re-imposed.
    pub fn set_solution(&mut self, u: &[f64]) -> Result<()> {
        crate::error::check_len("initial guess", u.len(), self.levels[0].u.len())?;
        let top = &mut self.levels[0];
        top.u.copy_from_slice(u);
        top.op.enforce_dirichlet(&mut top.u);
        Ok(())
    }

    pub fn rhs(&self) -> &[f64] {
        &self.levels[0].f
    }

    /// One cycle of the configured type on the finest level.
    pub fn cycle(&mut self) -> Result<()> {
        self.cycle_as(self.opts.cycle)
    }

    /// One cycle of type `kind` on the finest level.
    pub fn cycle_as(&mut self, kind: CycleType) -> Result<()> {
        if self.extrapolating() {
            extrapolated_cycle(&mut self.levels, &self.transfers, kind, &self.opts)
        } else {
            cycle(&mut self.levels, &self.transfers, kind, &self.opts)
        }
    }

    /// `steps` smoothing steps on the finest level only.
    pub fn smooth(&mut self, steps: usize) {
        let mode = self.opts.mode;
        self.levels[0].smooth(mode, steps);
    }

    /// Nested iteration: solve the coarsest level with its own right-hand
    /// side, then on each finer level prolongate and run `iterations` cycles.
    pub fn fmg(&mut self, iterations: usize, kind: CycleType) -> Result<()> {
        let nl = self.levels.len();
        for l in 1..nl {
            let lev = &mut self.levels[l];
            match &lev.assembled {
                Some(b) => lev.f.copy_from_slice(b),
                None => lev.op.assemble_rhs(&mut lev.f)?,
            }
        }
        self.levels[nl - 1].direct_solve();
        for l in (0..nl - 1).rev() {
            let (head, tail) = self.levels[l..].split_at_mut(1);
            let (lev, coarse) = (&mut head[0], &tail[0]);
            self.transfers[l].prolongate(&coarse.u, &mut lev.u)?;
            lev.op.enforce_dirichlet(&mut lev.u);
            for _ in 0..iterations {
                if l == 0 && self.extrapolating() {
                    extrapolated_cycle(&mut self.levels, &self.transfers, kind, &self.opts)?;
                } else {
                    cycle(
                        &mut self.levels[l..],
                        &self.transfers[l..],
                        kind,
                        &self.opts,
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Residual of the finest level as used by the convergence test.
    ///
    /// With extrapolation, rows of nodes shared with the coarse grid carry
    /// a quarter of the extrapolated coarse residual.
    pub fn residual_vector(&mut self) -> Result<&[f64]> {
        let mode = self.opts.mode;
        if self.extrapolating() {
            let (head, tail) = self.levels.split_at_mut(1);
            let (top, next) = (&mut head[0], &mut tail[0]);
            top.residual(mode)?;
            extrapolated_rhs(top, next, &self.transfers[0], mode)?;
            let (fg, cg) = (top.grid().clone(), next.grid().clone());
            for q in 0..cg.len() {
                let (i, j) = cg.coords(q);
                top.res[fg.index(2 * i, 2 * j)] = 0.25 * next.f[q];
            }
        } else {
            self.levels[0].residual(mode)?;
        }
        Ok(&self.levels[0].res)
    }

    /// Norm of [`Self::residual_vector`].
    pub fn residual_norm(&mut self, norm: NormType) -> Result<f64> {
        Ok(norm.eval(self.residual_vector()?))
    }

    /// Error of the finest iterate against the exact solution, if known.
    pub fn error_norms(&self) -> Option<ErrorNorms> {
        let top = &self.levels[0];
        let exact = top.op.case().exact_solution()?;
        let g = top.grid();
        let (mut max, mut sq) = (0.0f64, 0.0);
        for (p, u) in top.u.iter().enumerate() {
            let (i, j) = g.coords(p);
            let e = exact.value(g.radius(i), g.angle(j)) - u;
            max = max.max(e.abs());
            sq += e * e;
        }
        Some(ErrorNorms {
            max,
            weighted_l2: (sq / top.u.len() as f64).sqrt(),
        })
    }

    /// Persistent storage per level.
    pub fn memory(&self) -> Vec<LevelMemory> {
        let mut out: Vec<LevelMemory> = self.levels.iter().map(Level::memory).collect();
        for (l, t) in self.transfers.iter().enumerate() {
            out[l]
                .bytes
                .insert("multigrid.transfer".to_string(), 8 * t.stored_entries());
        }
        out
    }
}

/// Standard correction-scheme cycle on `levels[0]`.
fn cycle(
    levels: &mut [Level],
    transfers: &[Transfer],
    kind: CycleType,
    o: &CycleOptions,
) -> Result<()> {
    let (head, tail) = levels.split_at_mut(1);
    let lev = &mut head[0];
    if tail.is_empty() {
        lev.direct_solve();
        return Ok(());
    }
    lev.smooth(o.mode, o.pre_smoothing);
    lev.residual(o.mode)?;
    {
        let next = &mut tail[0];
        transfers[0].restrict(&lev.res, &mut next.f)?;
        next.op.zero_dirichlet(&mut next.f);
    }
    coarse_correction(lev, tail, transfers, kind, o)
}

/// Recursion on the coarse levels followed by prolongation and post-smoothing.
fn coarse_correction(
    lev: &mut Level,
    tail: &mut [Level],
    transfers: &[Transfer],
    kind: CycleType,
    o: &CycleOptions,
) -> Result<()> {
    tail[0].u.par_iter_mut().for_each(|v| *v = 0.0);
    match kind {
        CycleType::V => cycle(tail, &transfers[1..], CycleType::V, o)?,
        CycleType::W => {
            cycle(tail, &transfers[1..], CycleType::W, o)?;
            cycle(tail, &transfers[1..], CycleType::W, o)?;
        }
        CycleType::F => {
            cycle(tail, &transfers[1..], CycleType::F, o)?;
            cycle(tail, &transfers[1..], CycleType::V, o)?;
        }
    }
    transfers[0].prolongate_add(&tail[0].u, &mut lev.u, &mut lev.res)?;
    lev.smooth(o.mode, o.post_smoothing);
    Ok(())
}

/// Writes the extrapolated coarse right-hand side into `next.f`, given the
/// fine residual in `top.res`. Clobbers `next.u` and `next.res`.
fn extrapolated_rhs(top: &Level, next: &mut Level, t: &Transfer, mode: StencilMode) -> Result<()> {
    let b = next
        .assembled
        .as_ref()
        .expect("second level keeps its assembled right-hand side");
    t.inject(&top.u, &mut next.u)?;
    next.op.residual(mode, b, &next.u, &mut next.res)?;
    t.restrict(&top.res, &mut next.f)?;
    let w = EXTRAPOLATION_WEIGHT;
    next.f
        .par_iter_mut()
        .zip(next.res.par_iter())
        .for_each(|(f, r)| *f = w * *f + (1.0 - w) * r);
    next.op.zero_dirichlet(&mut next.f);
    Ok(())
}

/// Cycle on the finest level with fine-node smoothing and the extrapolated
/// coarse right-hand side; coarser levels run the standard cycle.
fn extrapolated_cycle(
    levels: &mut [Level],
    transfers: &[Transfer],
    kind: CycleType,
    o: &CycleOptions,
) -> Result<()> {
    let (head, tail) = levels.split_at_mut(1);
    let lev = &mut head[0];
    lev.smooth(o.mode, o.pre_smoothing);
    lev.residual(o.mode)?;
    extrapolated_rhs(lev, &mut tail[0], &transfers[0], o.mode)?;
    coarse_correction(lev, tail, transfers, kind, o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;

    fn hierarchy(nr: usize, nt: usize, geom: Geometry, opts: CycleOptions) -> Hierarchy {
        let grid = PolarGrid::build(&GridParams::uniform(1e-5, 1.3, nr, nt)).unwrap();
        Hierarchy::build(
            grid,
            &geom,
            &ProblemCase::zoni_polar(1.3),
            InnerBoundary::AcrossOrigin,
            CachePolicy::default(),
            None,
            opts,
        )
        .unwrap()
    }

    fn iterate(h: &mut Hierarchy, rel: f64, max: usize) -> (usize, f64) {
        let r0 = h.residual_norm(NormType::WeightedL2).unwrap();
        let mut r = r0;
        let mut its = 0;
        while r > rel * r0 && its < max {
            h.cycle().unwrap();
            r = h.residual_norm(NormType::WeightedL2).unwrap();
            its += 1;
        }
        (its, r / r0)
    }

    #[test]
    fn exact_discrete_solution_is_a_fixed_point() {
        for kind in [CycleType::V, CycleType::W, CycleType::F] {
            let opts = CycleOptions {
                cycle: kind,
                ..Default::default()
            };
            let mut h = hierarchy(33, 32, Geometry::default_czarny(), opts);
            let (its, _) = iterate(&mut h, 1e-13, 100);
            assert!(its < 100);
            let before = h.solution().to_vec();
            h.cycle().unwrap();
            let drift = before
                .iter()
                .zip(h.solution())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(drift <= 1e-12, "{kind:?} drift {drift}");
        }
    }

    #[test]
    fn v_cycle_converges_on_shafranov() {
        let mut h = hierarchy(
            49,
            64,
            Geometry::default_shafranov(),
            CycleOptions::default(),
        );
        assert!(h.num_levels() >= 3);
        let (its, red) = iterate(&mut h, 1e-8, 60);
        assert!(red <= 1e-8, "reduction {red} after {its}");
        assert!(its <= 30, "{its} iterations");
    }

    #[test]
    fn single_level_is_a_direct_solve() {
        let grid = PolarGrid::build(&GridParams::uniform(1e-5, 1.3, 17, 16)).unwrap();
        let mut h = Hierarchy::build(
            grid,
            &Geometry::default_shafranov(),
            &ProblemCase::zoni_polar(1.3),
            InnerBoundary::AcrossOrigin,
            CachePolicy::default(),
            Some(1),
            CycleOptions::default(),
        )
        .unwrap();
        h.fmg(1, CycleType::V).unwrap();
        assert!(h.residual_norm(NormType::Infinity).unwrap() < 1e-12);
    }

    #[test]
    fn fmg_beats_a_zero_start() {
        let mut a = hierarchy(97, 128, Geometry::default_czarny(), CycleOptions::default());
        let zero = a.residual_norm(NormType::WeightedL2).unwrap();
        a.fmg(1, CycleType::F).unwrap();
        let fmg = a.residual_norm(NormType::WeightedL2).unwrap();
        assert!(fmg < zero, "{fmg} vs {zero}");
    }

    #[test]
    fn extrapolated_cycle_contracts() {
        let opts = CycleOptions {
            extrapolation: true,
            ..Default::default()
        };
        let mut h = hierarchy(49, 64, Geometry::default_czarny(), opts);
        let (its, red) = iterate(&mut h, 1e-8, 80);
        assert!(red <= 1e-8, "reduction {red} after {its}");
    }
}
