use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pcavoid_cli::{bench, compare_maps, load_scenario, run, write_compare};

/// Fly a scenario through the lidar simulator, or benchmark / compare maps.
///
/// Exit status: 0 goal reached, 1 error, 2 usage, 3 collision,
/// 4 planner failure, 5 timeout.
#[derive(Debug, Parser)]
#[command(name = "pcavoid", version)]
struct Args {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override any scenario key, e.g. `--set planner.limits.v_max=1.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run the scenario N times and print per-stage timing statistics.
    #[arg(long, value_name = "N", conflicts_with = "compare_maps")]
    bench: Option<usize>,
    /// Occupancy grid vs point-cloud map on the scenario's thin bar.
    #[arg(long)]
    compare_maps: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(args: &Args) -> anyhow::Result<i32> {
    let scenario = load_scenario(&args.scenario, args.seed, &args.set)?;
    if let Some(n) = args.bench {
        let table = bench(&scenario, n)?;
        print!("{}", table.to_table());
        return Ok(0);
    }
    if args.compare_maps {
        let report = compare_maps(&scenario)?;
        write_compare(&report, &scenario, &args.out)?;
        print!("{}", report.to_table());
        return Ok(0);
    }
    let (report, _) = run(&scenario, &args.out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.exit_code)
}
