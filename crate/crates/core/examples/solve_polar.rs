//! Solve the default Czarny problem and print the residual history.
//!
//! cargo run --release --example solve_polar -- [nr_exp] [ntheta_exp]

use polar_multigrid::config::SolverConfig;
use polar_multigrid::multigrid::Solver;

fn main() -> polar_multigrid::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = SolverConfig::default();
    if let Some(v) = args.next() {
        cfg.set("nr_exp", &v)?;
    }
    if let Some(v) = args.next() {
        cfg.set("ntheta_exp", &v)?;
    }

    let solver = Solver::new(cfg)?;
    let (h, report) = solver.solve_with(|it, r| println!("{it:3}  {r:.3e}"))?;
    let g = h.level(0).grid();
    println!(
        "{}x{} grid, {} levels, converged={} after {} cycles (mean reduction {:.3})",
        g.nr(),
        g.ntheta(),
        h.num_levels(),
        report.converged,
        report.iterations,
        report.mean_reduction()
    );
    if let Some(e) = report.final_error {
        println!(
            "error vs exact: max {:.3e}, weighted l2 {:.3e}",
            e.max, e.weighted_l2
        );
    }
    Ok(())
}
