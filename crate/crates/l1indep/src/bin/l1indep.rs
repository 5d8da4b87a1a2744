//! Command-line interface for the L1 independence test.
//!
//! Subcommands: `test` (run the test on a CSV file), `simulate` (Monte
//! Carlo size/power), `power-curve` (rate vs scenario parameter), `sigma`
//! (print the variance constant), `bandwidth` (print selected bandwidths).

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l1indep::bandwidth::{select_bandwidths, BandwidthGrid};
use l1indep::cli::{
    cmd_power_curve, cmd_simulate, cmd_test, curve_csv, report_csv, write_text, Calibration,
    SimulateConfig, TestRunConfig,
};
use l1indep::data::{load_csv, BlockSpec};
use l1indep::kernel::Kernel;
use l1indep::simgen::{Scenario, ScenarioParams};
use l1indep::variance::{default_resolution, sigma_sq};

#[derive(Parser)]
#[command(name = "l1indep", version, about = "L1-distance test of mutual independence")]
struct Cli {
    /// key = value config file; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the independence test on a CSV file
    Test(TestArgs),
    /// Monte Carlo rejection rate for a scenario
    Simulate(SimulateArgs),
    /// Rejection rate over a list of scenario parameters
    PowerCurve(PowerCurveArgs),
    /// Print the asymptotic variance constant for a block structure
    Sigma(SigmaArgs),
    /// Print the data-driven bandwidths for a CSV file
    Bandwidth(BandwidthArgs),
}

#[derive(Args)]
struct TestArgs {
    /// input CSV path
    #[arg(long)]
    input: Option<PathBuf>,
    /// comma-separated block dimensions, e.g. 1,1
    #[arg(long)]
    dims: Option<String>,
    /// input has a header line
    #[arg(long)]
    header: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon_region: Option<f64>,
    #[arg(long)]
    grid_factor: Option<f64>,
    /// comma-separated fixed bandwidths (skips selection)
    #[arg(long)]
    bandwidths: Option<String>,
    #[arg(long)]
    bandwidth_points: Option<usize>,
    /// calibration: asymptotic | permutation
    #[arg(long)]
    calibration: Option<String>,
    /// permutation replicate count
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma_resolution: Option<usize>,
    /// JSON output path (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// scenario name (e.g. ind-norm, w, sinusoid)
    #[arg(long)]
    scenario: Option<String>,
    /// scenario parameter (sinusoid l, circle-indicator theta, power-noise rho)
    #[arg(long)]
    param: Option<f64>,
    /// draw the independence variant of the scenario
    #[arg(long)]
    independent: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_factor: Option<f64>,
    #[arg(long)]
    epsilon_region: Option<f64>,
    #[arg(long)]
    bandwidth_points: Option<usize>,
    #[arg(long)]
    sigma_resolution: Option<usize>,
    /// worker threads (default: L1INDEP_WORKERS or all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// per-replication CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report output path
    #[arg(long)]
    report: Option<PathBuf>,
    /// scenario parameter config output path
    #[arg(long)]
    params_out: Option<PathBuf>,
}

#[derive(Args)]
struct PowerCurveArgs {
    #[command(flatten)]
    sim: SimulateArgs,
    /// comma-separated parameter values
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args)]
struct SigmaArgs {
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Args)]
struct BandwidthArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    bandwidth_points: Option<usize>,
}

type ConfigMap = HashMap<String, String>;

fn load_config(path: &Option<PathBuf>) -> Result<ConfigMap, String> {
    let mut map = ConfigMap::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", i + 1))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    Ok(map)
}

fn cfg_get<T: std::str::FromStr>(map: &ConfigMap, key: &str) -> Result<Option<T>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| format!("config field {key}: cannot parse {v:?}")),
    }
}

fn parse_dims(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|f| f.trim().parse::<usize>().map_err(|_| format!("dims: bad field {f:?}")))
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad numeric field {f:?}")))
        .collect()
}

fn default_workers() -> Option<usize> {
    std::env::var("L1INDEP_WORKERS").ok().and_then(|v| v.parse().ok())
}

fn require<T>(value: Option<T>, field: &str) -> Result<T, String> {
    value.ok_or_else(|| format!("missing required field: {field}"))
}

fn run() -> Result<(), String> {
    let cli = Cli::parse();
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Test(args) => run_test_cmd(args, &config),
        Command::Simulate(args) => {
            let cfg = build_simulate_config(&args, &config)?;
            run_simulate_cmd(cfg, &args)
        }
        Command::PowerCurve(args) => run_power_curve_cmd(args, &config),
        Command::Sigma(args) => run_sigma_cmd(args, &config),
        Command::Bandwidth(args) => run_bandwidth_cmd(args, &config),
    }
}

fn run_test_cmd(args: TestArgs, config: &ConfigMap) -> Result<(), String> {
    let input = require(args.input.or(cfg_get(config, "input")?), "input")?;
    let dims_str: String = require(args.dims.or(cfg_get(config, "dims")?), "dims")?;
    let mut cfg = TestRunConfig::new(input, parse_dims(&dims_str)?);
    cfg.header = args.header || cfg_get(config, "header")?.unwrap_or(false);
    if let Some(a) = args.alpha.or(cfg_get(config, "alpha")?) {
        cfg.alpha = a;
    }
    if let Some(e) = args.epsilon_region.or(cfg_get(config, "epsilon_region")?) {
        cfg.epsilon_region = e;
    }
    if let Some(g) = args.grid_factor.or(cfg_get(config, "grid_factor")?) {
        cfg.grid_factor = g;
    }
    if let Some(b) = args.bandwidths.or(cfg_get(config, "bandwidths")?) {
        cfg.fixed_bandwidths = Some(parse_f64_list(&b)?);
    }
    if let Some(p) = args.bandwidth_points.or(cfg_get(config, "bandwidth_points")?) {
        cfg.bandwidth_points = p;
    }
    if let Some(r) = args.sigma_resolution.or(cfg_get(config, "sigma_resolution")?) {
        cfg.sigma_resolution = Some(r);
    }
    if let Some(s) = args.seed.or(cfg_get(config, "seed")?) {
        cfg.seed = s;
    }
    let calibration: Option<String> = args.calibration.or(cfg_get(config, "calibration")?);
    cfg.calibration = match calibration.as_deref() {
        None | Some("asymptotic") => Calibration::Asymptotic,
        Some("permutation") => Calibration::Permutation {
            b_reps: args.permutations.or(cfg_get(config, "permutations")?).unwrap_or(200),
        },
        Some(other) => return Err(format!("calibration: unknown mode {other:?}")),
    };

    let output = cmd_test(&cfg).map_err(|e| e.to_string())?;
    let json = output.to_json();
    match &args.output {
        Some(path) => write_text(path, &json).map_err(|e| e.to_string())?,
        None => println!("{json}"),
    }
    eprint!("{}", output.human_summary());
    Ok(())
}

fn build_simulate_config(args: &SimulateArgs, config: &ConfigMap) -> Result<SimulateConfig, String> {
    let name: String = require(args.scenario.clone().or(cfg_get(config, "scenario")?), "scenario")?;
    let param = args.param.or(cfg_get(config, "param")?);
    let scenario = Scenario::parse(&name, param).map_err(|e| e.to_string())?;
    let dependent = !(args.independent || cfg_get(config, "independent")?.unwrap_or(false));
    let n = require(args.n.or(cfg_get(config, "n")?), "n")?;
    let reps = require(args.reps.or(cfg_get(config, "reps")?), "reps")?;
    let seed = require(args.seed.or(cfg_get(config, "seed")?), "seed")?;
    let mut cfg = SimulateConfig::new(scenario, dependent, n, reps, seed);
    if let Some(a) = args.alpha.or(cfg_get(config, "alpha")?) {
        cfg.alpha = a;
    }
    if let Some(g) = args.grid_factor.or(cfg_get(config, "grid_factor")?) {
        cfg.grid_factor = g;
    }
    if let Some(e) = args.epsilon_region.or(cfg_get(config, "epsilon_region")?) {
        cfg.epsilon_region = e;
    }
    if let Some(p) = args.bandwidth_points.or(cfg_get(config, "bandwidth_points")?) {
        cfg.bandwidth_points = p;
    }
    if let Some(r) = args.sigma_resolution.or(cfg_get(config, "sigma_resolution")?) {
        cfg.sigma_resolution = Some(r);
    }
    cfg.workers = args.workers.or(cfg_get(config, "workers")?).or_else(default_workers);
    Ok(cfg)
}

fn run_simulate_cmd(cfg: SimulateConfig, args: &SimulateArgs) -> Result<(), String> {
    let report = cmd_simulate(&cfg).map_err(|e| e.to_string())?;
    let csv = report_csv(&report);
    match &args.out {
        Some(path) => write_text(path, &csv).map_err(|e| e.to_string())?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).expect("serializable");
        write_text(path, &json).map_err(|e| e.to_string())?;
    }
    if let Some(path) = &args.params_out {
        write_text(path, &ScenarioParams::default().to_config_text())
            .map_err(|e| e.to_string())?;
    }
    eprintln!(
        "scenario {} ({}) n={} reps={} -> rejection rate {:.4} (stderr {:.4}, {} failed)",
        cfg.scenario.name(),
        if cfg.dependent { "dependent" } else { "independent" },
        cfg.n,
        cfg.reps,
        report.rejection_rate,
        report.rate_stderr,
        report.failed.len()
    );
    Ok(())
}

fn run_power_curve_cmd(args: PowerCurveArgs, config: &ConfigMap) -> Result<(), String> {
    let params_str: String =
        require(args.params.clone().or(cfg_get(config, "params")?), "params")?;
    let values = parse_f64_list(&params_str)?;
    // the base scenario needs some parameter value; reuse the first
    let mut sim = args.sim;
    if sim.param.is_none() {
        sim.param = values.first().copied();
    }
    let base = build_simulate_config(&sim, config)?;
    let points = cmd_power_curve(&base, &values).map_err(|e| e.to_string())?;
    let csv = curve_csv(&points);
    match &sim.out {
        Some(path) => write_text(path, &csv).map_err(|e| e.to_string())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_sigma_cmd(args: SigmaArgs, config: &ConfigMap) -> Result<(), String> {
    let dims_str: String = require(args.dims.or(cfg_get(config, "dims")?), "dims")?;
    let dims = parse_dims(&dims_str)?;
    let spec = BlockSpec::new(dims).map_err(|e| e.to_string())?;
    let resolution = args
        .resolution
        .or(cfg_get(config, "resolution")?)
        .unwrap_or_else(|| default_resolution(spec.d()));
    let kernels: Vec<Kernel> = spec.dims().iter().map(|&dl| Kernel::uniform(dl)).collect();
    let value = sigma_sq(&spec, &kernels, resolution).map_err(|e| e.to_string())?;
    println!("{value:.12}");
    Ok(())
}

fn run_bandwidth_cmd(args: BandwidthArgs, config: &ConfigMap) -> Result<(), String> {
    let input: PathBuf = require(args.input.or(cfg_get(config, "input")?), "input")?;
    let dims_str: String = require(args.dims.or(cfg_get(config, "dims")?), "dims")?;
    let spec = BlockSpec::new(parse_dims(&dims_str)?).map_err(|e| e.to_string())?;
    let header = args.header || cfg_get(config, "header")?.unwrap_or(false);
    let sample = load_csv(&input, spec, header).map_err(|e| e.to_string())?;
    let points = args
        .bandwidth_points
        .or(cfg_get(config, "bandwidth_points")?)
        .unwrap_or(5);
    let grid = BandwidthGrid::from_sample(&sample, points).map_err(|e| e.to_string())?;
    let selected = select_bandwidths(&sample, &grid).map_err(|e| e.to_string())?;
    let h: Vec<String> =
        selected.bandwidths.as_slice().iter().map(|v| format!("{v:.12}")).collect();
    println!("{}", h.join(","));
    if selected.fallback {
        eprintln!("warning: criterion failed on every candidate; grid midpoint used");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
