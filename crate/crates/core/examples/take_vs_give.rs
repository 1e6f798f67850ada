//! Gather (Take) and scatter (Give) application of the same operator.

use std::time::Instant;

use polar_multigrid::config::SolverConfig;
use polar_multigrid::multigrid::Solver;
use polar_multigrid::stencil::StencilMode;

fn main() -> polar_multigrid::Result<()> {
    let mut cfg = SolverConfig::default();
    cfg.nr = Some(385);
    cfg.ntheta = Some(512);
    // Take needs the geometry cache; build with it so both modes can run
    cfg.stencil_mode = StencilMode::Take;
    let solver = Solver::new(cfg)?;
    let h = solver.build()?;
    let op = h.level(0).operator();
    let n = op.len();
    let x: Vec<f64> = (0..n)
        .map(|p| ((p * 7919) % 1000) as f64 / 1000.0 - 0.5)
        .collect();

    let mut y = [vec![0.0; n], vec![0.0; n]];
    for (k, mode) in [StencilMode::Take, StencilMode::Give]
        .into_iter()
        .enumerate()
    {
        let reps = 20;
        let t = Instant::now();
        solver.install(|| {
            for _ in 0..reps {
                op.apply(mode, &x, &mut y[k])?;
            }
            Ok::<_, polar_multigrid::Error>(())
        })?;
        let per = t.elapsed().as_secs_f64() / reps as f64;
        println!("{mode:?}: {:.2} ms per apply on {n} nodes", 1e3 * per);
    }
    let diff = y[0]
        .iter()
        .zip(&y[1])
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = y[0].iter().fold(0.0f64, |m, a| m.max(a.abs()));
    println!("max |Take - Give| / max |Ax| = {:.2e}", diff / scale);
    Ok(())
}
