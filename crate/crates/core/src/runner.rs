//! Run orchestration: solve, convergence-order study and kernel benchmark,
//! with their file outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::Result;
use crate::linalg::{CyclicTridiagFactor, FlopSnapshot, TridiagFactor, FLOPS};
use crate::multigrid::{ConvergenceReport, Hierarchy, LevelMemory, Solver};

/// Machine-readable record of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config: SolverConfig,
    pub nr: usize,
    pub ntheta: usize,
    pub nodes: usize,
    pub levels: usize,
    pub report: ConvergenceReport,
}

/// Solves `config` and writes `summary.json`, `history.csv` and, when
/// `paraview` is set, `solution.vtk` into `out_dir`.
pub fn run_solve(config: &SolverConfig, out_dir: &Path) -> Result<Summary> {
    let solver = Solver::new(config.clone())?;
    let verbose = config.verbose;
    let (h, report) = solver.solve_with(|it, r| {
        if verbose {
            eprintln!("iteration {it:4}  residual {r:.6e}");
        }
    })?;
    let g = h.level(0).grid();
    let summary = Summary {
        config: config.clone(),
        nr: g.nr(),
        ntheta: g.ntheta(),
        nodes: g.len(),
        levels: h.num_levels(),
        report,
    };
    fs::create_dir_all(out_dir)?;
    let json =
        serde_json::to_string_pretty(&summary).map_err(|e| crate::Error::Io(e.to_string()))?;
    fs::write(out_dir.join("summary.json"), json)?;
    fs::write(out_dir.join("history.csv"), history_csv(&summary.report))?;
    if config.paraview {
        fs::write(out_dir.join("solution.vtk"), vtk(&h))?;
    }
    Ok(summary)
}

/// One row per convergence check: iteration, residual and error norms.
pub fn history_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("iteration,residual,error_max,error_weighted_l2\n");
    for (it, r) in report.residual_history.iter().enumerate() {
        let (em, el) = match &report.error_history {
            Some(e) => (
                format!("{:e}", e[it].max),
                format!("{:e}", e[it].weighted_l2),
            ),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(s, "{it},{r:e},{em},{el}");
    }
    s
}

/// Legacy structured-grid file of the finest iterate on the mapped nodes.
/// The angular direction is closed by repeating the first spoke.
pub fn vtk(h: &Hierarchy) -> String {
    let op = h.level(0).operator();
    let g = op.grid();
    let (nr, nt) = (g.nr(), g.ntheta());
    let u = h.solution();
    let exact = op.exact_values();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\npolar multigrid solution\nASCII"
    );
    let _ = writeln!(s, "DATASET STRUCTURED_GRID\nDIMENSIONS {} {} 1", nt + 1, nr);
    let _ = writeln!(s, "POINTS {} double", (nt + 1) * nr);
    for i in 0..nr {
        for jj in 0..=nt {
            let (x, y) = op.geometry().map(g.radius(i), g.angle(jj % nt));
            let _ = writeln!(s, "{x:.12e} {y:.12e} 0");
        }
    }
    let _ = writeln!(s, "POINT_DATA {}", (nt + 1) * nr);
    let mut field = |name: &str, v: &dyn Fn(usize) -> f64| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for i in 0..nr {
            for jj in 0..=nt {
                let _ = writeln!(s, "{:.12e}", v(g.index(i, jj % nt)));
            }
        }
    };
    field("u", &|p| u[p]);
    if let Some(e) = &exact {
        field("error", &|p| u[p] - e[p]);
    }
    s
}

/// One refinement of an order study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub nr: usize,
    pub ntheta: usize,
    pub iterations: usize,
    pub converged: bool,
    pub error_max: f64,
    pub error_weighted_l2: f64,
    /// `log2(e_{h} / e_{h/2})` against the previous row
    pub order_max: Option<f64>,
    pub order_weighted_l2: Option<f64>,
}

/// Tightest relative tolerance an order study applies.
pub const ORDER_STUDY_RTOL: f64 = 1e-10;

/// Solves on `refinements` successively halved grids (via `divideBy2`) and
/// reports errors and observed orders. Relative tolerances looser than
/// [`ORDER_STUDY_RTOL`] are tightened so algebraic error stays negligible.
pub fn run_order_study(config: &SolverConfig, refinements: usize) -> Result<Vec<OrderRow>> {
    if !config.problem_case().has_exact_solution() {
        return Err(crate::Error::Config {
            key: "problem".into(),
            message: "an order study needs a manufactured solution".into(),
        });
    }
    let mut rows: Vec<OrderRow> = Vec::with_capacity(refinements);
    for m in 0..refinements {
        let mut c = config.clone();
        c.divide_by_2 += m;
        c.relative_tolerance = Some(
            c.relative_tolerance
                .map_or(ORDER_STUDY_RTOL, |t| t.min(ORDER_STUDY_RTOL)),
        );
        let solver = Solver::new(c)?;
        let (h, report) = solver.solve()?;
        let e = report.final_error.expect("manufactured solution");
        let prev = rows.last();
        rows.push(OrderRow {
            nr: h.level(0).grid().nr(),
            ntheta: h.level(0).grid().ntheta(),
            iterations: report.iterations,
            converged: report.converged,
            error_max: e.max,
            error_weighted_l2: e.weighted_l2,
            order_max: prev.map(|p| (p.error_max / e.max).log2()),
            order_weighted_l2: prev.map(|p| (p.error_weighted_l2 / e.weighted_l2).log2()),
        });
    }
    Ok(rows)
}

/// Plain-text table of an order study.
pub fn order_table(rows: &[OrderRow]) -> String {
    let mut s = format!(
        "{:>6} {:>7} {:>5} {:>12} {:>7} {:>12} {:>7}\n",
        "nr", "ntheta", "its", "err_max", "order", "err_wl2", "order"
    );
    let fmt = |o: Option<f64>| o.map_or("-".to_string(), |o| format!("{o:.3}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>7} {:>5} {:>12.4e} {:>7} {:>12.4e} {:>7}",
            r.nr,
            r.ntheta,
            r.iterations,
            r.error_max,
            fmt(r.order_max),
            r.error_weighted_l2,
            fmt(r.order_weighted_l2)
        );
    }
    s
}

/// Flops per unknown of one kernel on a system of size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCount {
    pub kernel: &'static str,
    pub n: usize,
    pub flops: u64,
    pub per_unknown: f64,
    pub seconds: f64,
}

/// Storage and operation counts of one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub nodes: usize,
    pub levels: Vec<LevelMemory>,
    /// persistent `f64` entries per finest node: finest level, all levels
    pub finest_per_node: f64,
    pub total_per_node: f64,
    pub kernels: Vec<KernelCount>,
    /// counts accumulated by the smoother lines and coarse solve during `cycles`
    pub cycle_flops: FlopSnapshot,
    pub cycles: usize,
    pub cycle_seconds: f64,
}

/// Diagonally dominant line system `(diag, off)` of size `n`.
fn model_line(n: usize) -> (Vec<f64>, Vec<f64>) {
    let diag = (0..n).map(|i| 4.0 + (i % 7) as f64 * 0.1).collect();
    let off = (0..n - 1).map(|i| -1.0 - (i % 5) as f64 * 0.05).collect();
    (diag, off)
}

/// Counts flops per unknown of the line kernels on systems of size `n`.
pub fn kernel_counts(n: usize) -> Result<Vec<KernelCount>> {
    let mut out = Vec::new();
    let mut measure = |kernel: &'static str,
                       f: &mut dyn FnMut() -> Result<()>,
                       pick: fn(&FlopSnapshot) -> u64| {
        let before = FLOPS.snapshot();
        let t = Instant::now();
        f()?;
        let seconds = t.elapsed().as_secs_f64();
        let flops = pick(&FLOPS.snapshot().since(&before));
        out.push(KernelCount {
            kernel,
            n,
            flops,
            per_unknown: flops as f64 / n as f64,
            seconds,
        });
        Ok::<(), crate::Error>(())
    };
    let (d, o) = model_line(n);
    let mut tri = None;
    measure(
        "tridiag_factor",
        &mut || {
            tri = Some(TridiagFactor::new(d.clone(), o.clone())?);
            Ok(())
        },
        |s| s.tridiag_factor,
    )?;
    let tri = tri.unwrap();
    let mut rhs = vec![1.0; n];
    measure(
        "tridiag_solve",
        &mut || {
            tri.solve(&mut rhs);
            Ok(())
        },
        |s| s.tridiag_solve,
    )?;
    let mut cyc = None;
    measure(
        "cyclic_factor",
        &mut || {
            cyc = Some(CyclicTridiagFactor::new(d.clone(), o.clone(), -1.0)?);
            Ok(())
        },
        |s| s.cyclic_factor,
    )?;
    let cyc = cyc.unwrap();
    let mut rhs = vec![1.0; n];
    measure(
        "cyclic_solve",
        &mut || {
            cyc.solve(&mut rhs);
            Ok(())
        },
        |s| s.cyclic_solve,
    )?;
    Ok(out)
}

/// Kernel line length used by [`run_bench`].
pub const BENCH_LINE: usize = 4096;

/// Builds the hierarchy, reports persistent storage, counts line-kernel
/// flops and runs `cycles` cycles to time them.
pub fn run_bench(config: &SolverConfig, cycles: usize) -> Result<BenchReport> {
    let solver = Solver::new(config.clone())?;
    let mut h = solver.build()?;
    let levels = h.memory();
    let n = levels[0].nodes;
    let finest = levels[0].doubles() / n as f64;
    let total = levels.iter().map(LevelMemory::doubles).sum::<f64>() / n as f64;
    let kernels = kernel_counts(BENCH_LINE)?;
    let before = FLOPS.snapshot();
    let t = Instant::now();
    solver.install(|| -> Result<()> {
        for _ in 0..cycles {
            h.cycle()?;
        }
        Ok(())
    })?;
    Ok(BenchReport {
        nodes: n,
        levels,
        finest_per_node: finest,
        total_per_node: total,
        kernels,
        cycle_flops: FLOPS.snapshot().since(&before),
        cycles,
        cycle_seconds: t.elapsed().as_secs_f64(),
    })
}

/// Plain-text rendering of a bench report.
pub fn bench_table(b: &BenchReport) -> String {
    let mut s = format!("nodes {}\n", b.nodes);
    for l in &b.levels {
        let _ = writeln!(
            s,
            "level {} ({}x{}): {:.4} entries per finest node",
            l.level,
            l.nr,
            l.ntheta,
            l.doubles() / b.nodes as f64
        );
        for (tag, bytes) in &l.bytes {
            let _ = writeln!(
                s,
                "    {tag:<30} {:.4}",
                *bytes as f64 / 8.0 / b.nodes as f64
            );
        }
    }
    let _ = writeln!(
        s,
        "finest {:.4} n, all levels {:.4} n",
        b.finest_per_node, b.total_per_node
    );
    for k in &b.kernels {
        let _ = writeln!(
            s,
            "{:<16} n={:<6} {:>8} flops  {:.3} per unknown  {:.2e} s",
            k.kernel, k.n, k.flops, k.per_unknown, k.seconds
        );
    }
    let _ = writeln!(
        s,
        "{} cycles in {:.3} s, line flops {:?}",
        b.cycles, b.cycle_seconds, b.cycle_flops
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SolverConfig {
        let mut c = SolverConfig::default();
        c.nr = Some(17);
        c.ntheta = Some(16);
        c
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let dir = std::env::temp_dir().join(format!("polarmg-csv-{}", std::process::id()));
        let s = run_solve(&small(), &dir).unwrap();
        let csv = fs::read_to_string(dir.join("history.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + s.report.iterations + 1);
        assert!(dir.join("summary.json").exists());
        assert!(!dir.join("solution.vtk").exists());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn verbose_leaves_files_unchanged() {
        let base = std::env::temp_dir().join(format!("polarmg-verbose-{}", std::process::id()));
        let mut c = small();
        run_solve(&c, &base.join("a")).unwrap();
        c.verbose = true;
        run_solve(&c, &base.join("b")).unwrap();
        let csv = |d: &str| fs::read_to_string(base.join(d).join("history.csv")).unwrap();
        assert_eq!(csv("a"), csv("b"));
        fs::remove_dir_all(&base).unwrap();
    }

    #[test]
    fn vtk_is_written_on_request() {
        let dir = std::env::temp_dir().join(format!("polarmg-vtk-{}", std::process::id()));
        let mut c = small();
        c.paraview = true;
        run_solve(&c, &dir).unwrap();
        let v = fs::read_to_string(dir.join("solution.vtk")).unwrap();
        assert!(v.contains("DIMENSIONS 17 17 1"));
        assert!(v.contains("SCALARS u double 1"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn single_refinement_has_no_order() {
        let rows = run_order_study(&small(), 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].order_max.is_none());
    }

    #[test]
    fn order_study_needs_an_exact_solution() {
        let mut c = small();
        c.problem = crate::config::ProblemKind::Constant;
        assert!(run_order_study(&c, 2).is_err());
    }

    #[test]
    fn max_iterations_zero_reports_the_initial_residual() {
        let mut c = small();
        c.max_iterations = 0;
        let r = crate::multigrid::solve(&c).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.residual_history.len(), 1);
        assert!(!r.converged);
    }
}
