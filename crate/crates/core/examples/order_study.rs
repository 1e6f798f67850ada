//! Observed convergence orders with and without implicit extrapolation.

use polar_multigrid::config::{GeometryKind, SolverConfig};
use polar_multigrid::runner::{order_table, run_order_study};

fn main() -> polar_multigrid::Result<()> {
    for geometry in [GeometryKind::Shafranov, GeometryKind::Czarny] {
        for extrapolation in [false, true] {
            let mut cfg = SolverConfig::default();
            cfg.geometry = geometry;
            cfg.nr = Some(49);
            cfg.ntheta = Some(64);
            cfg.extrapolation = extrapolation;
            let rows = run_order_study(&cfg, 3)?;
            println!("{geometry:?}, extrapolation={extrapolation}");
            print!("{}", order_table(&rows));
            println!();
        }
    }
    Ok(())
}
