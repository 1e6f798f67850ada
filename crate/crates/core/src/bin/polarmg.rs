use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};
use polar_multigrid::config::{SolverConfig, KEYS};
use polar_multigrid::runner;

fn with_keys(cmd: Command) -> Command {
    let cmd = cmd
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(value_parser!(PathBuf))
                .help("key = value file; flags override it"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .default_value("polarmg-out")
                .value_parser(value_parser!(PathBuf)),
        );
    KEYS.iter().fold(cmd, |c, k| {
        c.arg(
            Arg::new(*k)
                .long(*k)
                .value_name("VALUE")
                .allow_hyphen_values(true),
        )
    })
}

fn load(m: &ArgMatches) -> polar_multigrid::Result<SolverConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(p) => SolverConfig::from_file(p)?,
        None => SolverConfig::default(),
    };
    for k in KEYS {
        if let Some(v) = m.get_one::<String>(k) {
            cfg.set(k, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(m: &ArgMatches) -> polar_multigrid::Result<ExitCode> {
    match m.subcommand() {
        Some(("solve", sub)) => {
            let cfg = load(sub)?;
            let out = sub.get_one::<PathBuf>("out").unwrap();
            let s = runner::run_solve(&cfg, out)?;
            let r = &s.report;
            println!(
                "{}x{} nodes={} levels={} iterations={} converged={} residual={:.3e}",
                s.nr,
                s.ntheta,
                s.nodes,
                s.levels,
                r.iterations,
                r.converged,
                r.final_residual()
            );
            if let Some(e) = r.final_error {
                println!("error max={:.4e} weighted-l2={:.4e}", e.max, e.weighted_l2);
            }
            println!("wrote {}", out.display());
            Ok(if r.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Some(("order-study", sub)) => {
            let cfg = load(sub)?;
            let m = *sub.get_one::<usize>("refinements").unwrap();
            let rows = runner::run_order_study(&cfg, m)?;
            print!("{}", runner::order_table(&rows));
            let out = sub.get_one::<PathBuf>("out").unwrap();
            std::fs::create_dir_all(out)?;
            let json = serde_json::to_string_pretty(&rows)
                .map_err(|e| polar_multigrid::Error::Io(e.to_string()))?;
            std::fs::write(out.join("order.json"), json)?;
            Ok(if rows.iter().all(|r| r.converged) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Some(("bench", sub)) => {
            let cfg = load(sub)?;
            let cycles = *sub.get_one::<usize>("cycles").unwrap();
            let b = runner::run_bench(&cfg, cycles)?;
            print!("{}", runner::bench_table(&b));
            Ok(ExitCode::SUCCESS)
        }
        _ => unreachable!("subcommand is required"),
    }
}

fn main() -> ExitCode {
    let cli = Command::new("polarmg")
        .about("Geometric multigrid for curvilinear polar domains")
        .subcommand_required(true)
        .subcommand(with_keys(
            Command::new("solve").about("Solve once and write summary, history and optional VTK"),
        ))
        .subcommand(with_keys(
            Command::new("order-study")
                .about("Observed convergence orders over successive refinements")
                .arg(
                    Arg::new("refinements")
                        .long("refinements")
                        .default_value("3")
                        .value_parser(value_parser!(usize)),
                ),
        ))
        .subcommand(with_keys(
            Command::new("bench")
                .about("Storage per level and line-kernel operation counts")
                .arg(
                    Arg::new("cycles")
                        .long("cycles")
                        .default_value("5")
                        .value_parser(value_parser!(usize)),
                ),
        ));
    let m = cli.get_matches();
    match run(&m) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
