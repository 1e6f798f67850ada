//! Iteration counts of V, W and F cycles, from a zero start and after FMG.

use polar_multigrid::config::SolverConfig;
use polar_multigrid::multigrid::{solve, CycleType};

fn main() -> polar_multigrid::Result<()> {
    let mut cfg = SolverConfig::default();
    cfg.nr = Some(193);
    cfg.ntheta = Some(256);
    cfg.relative_tolerance = None;
    cfg.absolute_tolerance = Some(1e-14);

    println!("cycle  zero-start  after FMG(2xF)");
    for cycle in [CycleType::V, CycleType::W, CycleType::F] {
        cfg.cycle = cycle;
        cfg.fmg = false;
        let zero = solve(&cfg)?;
        cfg.fmg = true;
        let fmg = solve(&cfg)?;
        println!(
            "{:>5}  {:>10}  {:>14}",
            cycle.name(),
            zero.iterations,
            format!("2 + {}", fmg.iterations)
        );
    }
    Ok(())
}
