use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::Hierarchy;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::PolarGrid;
use crate::linalg::{FlopSnapshot, FLOPS};

/// Error of the finest iterate against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub max: f64,
    pub weighted_l2: f64,
}

/// Persistent heap bytes of one level, by tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMemory {
    pub level: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub nodes: usize,
    pub bytes: BTreeMap<String, usize>,
}

impl LevelMemory {
    pub fn total_bytes(&self) -> usize {
        self.bytes.values().sum()
    }

    /// Total bytes expressed as `f64` entries.
    pub fn doubles(&self) -> f64 {
        self.total_bytes() as f64 / 8.0
    }
}

/// Wall time per phase in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup: f64,
    pub fmg: f64,
    pub iterate: f64,
}

/// Outcome of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub norm: super::NormType,
    /// residual norm before the first cycle and after each cycle
    pub residual_history: Vec<f64>,
    /// error norms at the same points, when an exact solution is known
    pub error_history: Option<Vec<ErrorNorms>>,
    pub final_error: Option<ErrorNorms>,
    pub levels: Vec<LevelMemory>,
    pub flops: FlopSnapshot,
    pub timings: Timings,
    pub threads: usize,
}

impl ConvergenceReport {
    pub fn initial_residual(&self) -> f64 {
        self.residual_history[0]
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }

    /// Geometric mean residual reduction per cycle.
    pub fn mean_reduction(&self) -> f64 {
        if self.iterations == 0 || self.initial_residual() == 0.0 {
            return 0.0;
        }
        (self.final_residual() / self.initial_residual()).powf(1.0 / self.iterations as f64)
    }

    /// Persistent storage of all levels, in `f64` entries per finest node.
    pub fn memory_per_node(&self) -> (f64, f64) {
        let n = self.levels[0].nodes as f64;
        let all: f64 = self.levels.iter().map(LevelMemory::doubles).sum();
        (self.levels[0].doubles() / n, all / n)
    }

    /// Copy with timings zeroed, for comparisons across runs.
    pub fn without_timings(&self) -> Self {
        Self {
            timings: Timings::default(),
            threads: 0,
            ..self.clone()
        }
    }
}

/// A configured solver with its own worker pool.
pub struct Solver {
    config: SolverConfig,
    pool: rayon::ThreadPool,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_threads)
            .build()
            .map_err(|e| Error::Config {
                key: "maxOpenMPThreads".into(),
                message: e.to_string(),
            })?;
        Ok(Self { config, pool })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs `f` on this solver's workers.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Builds the grid and hierarchy described by the configuration.
    pub fn build(&self) -> Result<Hierarchy> {
        let c = &self.config;
        self.install(|| {
            let grid = PolarGrid::build(&c.grid_params())?;
            Hierarchy::build(
                grid,
                &c.geometry(),
                &c.problem_case(),
                c.inner_boundary(),
                c.cache_policy(),
                c.max_levels,
                c.cycle_options(),
            )
        })
    }

    /// Full run: setup, optional nested iteration, then cycles until converged.
    pub fn solve(&self) -> Result<(Hierarchy, ConvergenceReport)> {
        self.solve_with(|_, _| {})
    }

    /// As [`Self::solve`], calling `on_iter(iteration, residual)` after every
    /// convergence check.
    pub fn solve_with(
        &self,
        mut on_iter: impl FnMut(usize, f64) + Send,
    ) -> Result<(Hierarchy, ConvergenceReport)> {
        let c = self.config.clone();
        let flops0 = FLOPS.snapshot();
        let t0 = Instant::now();
        let mut h = self.build()?;
        let setup = t0.elapsed().as_secs_f64();
        self.install(move || {
            let t1 = Instant::now();
            if c.fmg {
                h.fmg(c.fmg_iterations, c.fmg_cycle)?;
            }
            let fmg = t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let track_error = h.level(0).operator().case().has_exact_solution();
            let mut residuals = vec![h.residual_norm(c.norm)?];
            let mut errors = Vec::new();
            if track_error {
                errors.extend(h.error_norms());
            }
            on_iter(0, residuals[0]);
            let r0 = residuals[0];
            let done = |r: f64| {
                c.absolute_tolerance.is_some_and(|t| r <= t)
                    || c.relative_tolerance.is_some_and(|t| r <= t * r0)
            };
            let mut converged = done(r0);
            while !converged && residuals.len() <= c.max_iterations {
                h.cycle()?;
                let r = h.residual_norm(c.norm)?;
                residuals.push(r);
                if track_error {
                    errors.extend(h.error_norms());
                }
                on_iter(residuals.len() - 1, r);
                if !r.is_finite() {
                    break;
                }
                converged = done(r);
            }
            let iterate = t2.elapsed().as_secs_f64();
            let report = ConvergenceReport {
                converged,
                iterations: residuals.len() - 1,
                norm: c.norm,
                residual_history: residuals,
                final_error: errors.last().copied(),
                error_history: track_error.then_some(errors),
                levels: h.memory(),
                flops: FLOPS.snapshot().since(&flops0),
                timings: Timings {
                    setup,
                    fmg,
                    iterate,
                },
                threads: self.threads(),
            };
            Ok((h, report))
        })
    }
}

/// Builds a solver for `config` and runs it.
pub fn solve(config: &SolverConfig) -> Result<ConvergenceReport> {
    Ok(Solver::new(config.clone())?.solve()?.1)
}
