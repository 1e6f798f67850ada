//! Persistent storage per level for the cheapest and the fastest setup.

use polar_multigrid::config::SolverConfig;
use polar_multigrid::runner::run_bench;
use polar_multigrid::stencil::StencilMode;

fn main() -> polar_multigrid::Result<()> {
    let mut cfg = SolverConfig::default();
    cfg.nr = Some(193);
    cfg.ntheta = Some(256);

    for (mode, caches) in [(StencilMode::Give, false), (StencilMode::Take, true)] {
        cfg.stencil_mode = mode;
        cfg.cache_profile = caches;
        cfg.cache_geometry = caches;
        let b = run_bench(&cfg, 0)?;
        println!("{mode:?}, caches={caches}");
        for l in &b.levels {
            let tags: Vec<String> = l
                .bytes
                .iter()
                .map(|(k, v)| format!("{k}={:.2}n", *v as f64 / 8.0 / l.nodes as f64))
                .collect();
            println!(
                "  level {} {}x{}: {}",
                l.level,
                l.nr,
                l.ntheta,
                tags.join(" ")
            );
        }
        println!(
            "  finest {:.3}n, all levels {:.3}n (n = {} finest nodes)\n",
            b.finest_per_node, b.total_per_node, b.nodes
        );
    }
    Ok(())
}
