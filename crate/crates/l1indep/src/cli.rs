//! Monte Carlo harness and single-test driver behind the command-line
//! interface: runs the test on user data, reproduces size/power tables and
//! power curves, and emits machine-readable reports.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{select_bandwidths, BandwidthGrid, SelectedBandwidths};
use crate::data::{load_csv, BlockSpec, Sample};
use crate::error::{Error, Result};
use crate::estimators::{Bandwidths, Estimators};
use crate::simgen::{derive_seed, sample_scenario, Scenario, ScenarioParams};
use crate::statistic::{
    permutation_calibrate, run_test, select_region, TestConfig, TestResult,
};
use crate::variance::{default_resolution, VarianceParams};

/// Threshold calibration for a single test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Calibration {
    /// Compare `T_n` to the standard normal quantile (the default).
    Asymptotic,
    /// Permutation p-value with the given replicate count.
    Permutation { b_reps: usize },
}

/// Configuration of a `test` run on CSV data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestRunConfig {
    pub input: PathBuf,
    pub dims: Vec<usize>,
    pub header: bool,
    pub alpha: f64,
    pub epsilon_region: f64,
    pub grid_factor: f64,
    /// fixed per-coordinate bandwidths; selected from data when absent
    pub fixed_bandwidths: Option<Vec<f64>>,
    pub bandwidth_points: usize,
    pub calibration: Calibration,
    pub sigma_resolution: Option<usize>,
    pub seed: u64,
}

impl TestRunConfig {
    pub fn new(input: PathBuf, dims: Vec<usize>) -> Self {
        Self {
            input,
            dims,
            header: false,
            alpha: 0.05,
            epsilon_region: 0.04,
            grid_factor: 2.0,
            fixed_bandwidths: None,
            bandwidth_points: 5,
            calibration: Calibration::Asymptotic,
            sigma_resolution: None,
            seed: 0,
        }
    }
}

/// Everything a `test` run reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestOutput {
    pub result: TestResult,
    pub sigma_sq: f64,
    pub bandwidth_criterion: Option<f64>,
    pub skipped_terms: usize,
    pub bandwidth_fallback: bool,
    pub permutation_p_value: Option<f64>,
    pub config: TestRunConfig,
    pub version: String,
}

impl TestOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn human_summary(&self) -> String {
        let r = &self.result;
        let decision = if r.reject { "REJECT independence" } else { "do not reject" };
        let mut s = format!(
            "n = {}\nV_n = {:.6}\na_n = {:.6}\nsigma = {:.6}\nT_n = {:.4}\n\
             p-value = {:.4}\nalpha = {}\ndecision: {decision}\n",
            r.n, r.v_n, r.a_n, r.sigma, r.t_n, r.p_value, r.alpha
        );
        if let Some(p) = self.permutation_p_value {
            s.push_str(&format!("permutation p-value = {p:.4}\n"));
        }
        s
    }
}

fn variance_for(spec: &BlockSpec, resolution: Option<usize>) -> Result<VarianceParams> {
    let res = resolution.unwrap_or_else(|| default_resolution(spec.d()));
    let kernels = spec.dims().iter().map(|&dl| crate::kernel::Kernel::uniform(dl)).collect();
    VarianceParams::compute(spec, kernels, res)
}

fn pick_bandwidths(
    sample: &Sample,
    fixed: &Option<Vec<f64>>,
    points: usize,
) -> Result<SelectedBandwidths> {
    match fixed {
        Some(h) => Ok(SelectedBandwidths {
            bandwidths: Bandwidths::new(h.clone())?,
            criterion: None,
            skipped_terms: 0,
            fallback: false,
        }),
        None => {
            let grid = BandwidthGrid::from_sample(sample, points)?;
            select_bandwidths(sample, &grid)
        }
    }
}

/// Runs the independence test on a CSV file.
pub fn cmd_test(cfg: &TestRunConfig) -> Result<TestOutput> {
    let spec = BlockSpec::new(cfg.dims.clone())?;
    let sample = load_csv(&cfg.input, spec.clone(), cfg.header)?;
    if let Some(h) = &cfg.fixed_bandwidths {
        if h.len() != spec.d() {
            return Err(Error::InvalidConfig(format!(
                "expected {} bandwidths, got {}",
                spec.d(),
                h.len()
            )));
        }
    }
    let vp = variance_for(&spec, cfg.sigma_resolution)?;
    let selected = pick_bandwidths(&sample, &cfg.fixed_bandwidths, cfg.bandwidth_points)?;
    let tcfg = TestConfig {
        alpha: cfg.alpha,
        epsilon_region: cfg.epsilon_region,
        grid_factor: cfg.grid_factor,
    };
    let result = run_test(&sample, &selected.bandwidths, &vp, &tcfg)?;
    let permutation_p_value = match cfg.calibration {
        Calibration::Asymptotic => None,
        Calibration::Permutation { b_reps } => {
            let est = Estimators::new(&sample, &selected.bandwidths, vp.kernels.clone())?;
            let region = select_region(&est, cfg.epsilon_region, cfg.grid_factor)?;
            Some(permutation_calibrate(
                &sample,
                &selected.bandwidths,
                &vp,
                &region,
                b_reps,
                cfg.seed,
                cfg.grid_factor,
            )?)
        }
    };
    Ok(TestOutput {
        sigma_sq: vp.sigma_sq,
        bandwidth_criterion: selected.criterion,
        skipped_terms: selected.skipped_terms,
        bandwidth_fallback: selected.fallback,
        permutation_p_value,
        result,
        config: cfg.clone(),
        version: crate::VERSION.to_string(),
    })
}

/// Configuration of a Monte Carlo `simulate` run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub dependent: bool,
    pub params: ScenarioParams,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid_factor: f64,
    pub epsilon_region: f64,
    pub bandwidth_points: usize,
    pub sigma_resolution: Option<usize>,
    pub workers: Option<usize>,
}

impl SimulateConfig {
    pub fn new(scenario: Scenario, dependent: bool, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            scenario,
            dependent,
            params: ScenarioParams::default(),
            n,
            reps,
            alpha: 0.05,
            seed,
            grid_factor: 2.0,
            epsilon_region: 0.04,
            bandwidth_points: 5,
            sigma_resolution: None,
            workers: None,
        }
    }
}

/// Per-replication record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub v_n: f64,
    pub a_n: f64,
    pub t_n: f64,
    pub p_value: f64,
    pub reject: bool,
    pub bandwidths: Vec<f64>,
    pub skipped_terms: usize,
    pub bandwidth_fallback: bool,
}

/// Aggregate of a simulate run, with full provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<RepRow>,
    /// failed replications: (rep index, error message)
    pub failed: Vec<(usize, String)>,
    pub rejection_rate: f64,
    pub rate_stderr: f64,
    pub sigma_sq: f64,
    pub config: SimulateConfig,
    pub version: String,
}

fn run_one_rep(
    cfg: &SimulateConfig,
    vp: &VarianceParams,
    tcfg: &TestConfig,
    rep: usize,
) -> Result<RepRow> {
    let seed = derive_seed(cfg.seed, rep as u64);
    let sample = sample_scenario(cfg.scenario, &cfg.params, cfg.dependent, cfg.n, seed)?;
    let selected = pick_bandwidths(&sample, &None, cfg.bandwidth_points)?;
    let result = run_test(&sample, &selected.bandwidths, vp, tcfg)?;
    Ok(RepRow {
        rep,
        seed,
        v_n: result.v_n,
        a_n: result.a_n,
        t_n: result.t_n,
        p_value: result.p_value,
        reject: result.reject,
        bandwidths: result.bandwidths,
        skipped_terms: selected.skipped_terms,
        bandwidth_fallback: selected.fallback,
    })
}

/// Runs `reps` independent replications of (draw sample, select bandwidths,
/// run test) and aggregates the rejection rate. Replications execute in a
/// worker pool; results are merged in replication order, so the output is
/// independent of the worker count.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<Report> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    let spec = BlockSpec::new(vec![1, 1])?;
    let vp = variance_for(&spec, cfg.sigma_resolution)?;
    let tcfg = TestConfig {
        alpha: cfg.alpha,
        epsilon_region: cfg.epsilon_region,
        grid_factor: cfg.grid_factor,
    };

    let run_all = || -> Vec<(usize, Result<RepRow>)> {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| (rep, run_one_rep(cfg, &vp, &tcfg, rep)))
            .collect()
    };
    let outcomes = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (rep, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failed.push((rep, e.to_string())),
        }
    }
    let ok = rows.len();
    let rejects = rows.iter().filter(|r| r.reject).count();
    let rate = if ok > 0 { rejects as f64 / ok as f64 } else { f64::NAN };
    let stderr = if ok > 0 { (rate * (1.0 - rate) / ok as f64).sqrt() } else { f64::NAN };
    Ok(Report {
        rows,
        failed,
        rejection_rate: rate,
        rate_stderr: stderr,
        sigma_sq: vp.sigma_sq,
        config: cfg.clone(),
        version: crate::VERSION.to_string(),
    })
}

/// One point of a power curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub param: f64,
    pub rejection_rate: f64,
    pub rate_stderr: f64,
    pub failed: usize,
}

/// One `cmd_simulate` per parameter value of a scenario family.
pub fn cmd_power_curve(base: &SimulateConfig, params: &[f64]) -> Result<Vec<CurvePoint>> {
    if params.is_empty() {
        return Err(Error::InvalidConfig("parameter list must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(params.len());
    for (idx, &value) in params.iter().enumerate() {
        let scenario = match base.scenario {
            Scenario::Sinusoid { .. } => {
                Scenario::parse("sinusoid", Some(value))?
            }
            Scenario::CircleIndicator { .. } => {
                Scenario::parse("circle-indicator", Some(value))?
            }
            Scenario::PowerNoise { .. } => Scenario::parse("power-noise", Some(value))?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "scenario {} has no curve parameter",
                    other.name()
                )))
            }
        };
        let mut cfg = base.clone();
        cfg.scenario = scenario;
        cfg.seed = derive_seed(base.seed, 0x10000 + idx as u64);
        let report = cmd_simulate(&cfg)?;
        out.push(CurvePoint {
            param: value,
            rejection_rate: report.rejection_rate,
            rate_stderr: report.rate_stderr,
            failed: report.failed.len(),
        });
    }
    Ok(out)
}

/// Per-replication CSV: one row per successful replication.
pub fn report_csv(report: &Report) -> String {
    let mut s = String::from(
        "rep,seed,v_n,a_n,t_n,p_value,reject,bandwidths,skipped_terms,bandwidth_fallback\n",
    );
    for r in &report.rows {
        let bw: Vec<String> = r.bandwidths.iter().map(|h| format!("{h:.17}")).collect();
        s.push_str(&format!(
            "{},{},{:.17},{:.17},{:.17},{:.17},{},{},{},{}\n",
            r.rep,
            r.seed,
            r.v_n,
            r.a_n,
            r.t_n,
            r.p_value,
            r.reject as u8,
            bw.join(";"),
            r.skipped_terms,
            r.bandwidth_fallback as u8
        ));
    }
    s
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("param,rejection_rate,rate_stderr,failed\n");
    for p in points {
        s.push_str(&format!(
            "{},{:.17},{:.17},{}\n",
            p.param, p.rejection_rate, p.rate_stderr, p.failed
        ));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(scenario: Scenario, dependent: bool, reps: usize) -> SimulateConfig {
        SimulateConfig::new(scenario, dependent, 50, reps, 99)
    }

    #[test]
    fn simulate_single_rep() {
        let report = cmd_simulate(&quick_cfg(Scenario::IndNorm, true, 1)).unwrap();
        assert_eq!(report.rows.len() + report.failed.len(), 1);
        if !report.rows.is_empty() {
            assert!(report.rejection_rate == 0.0 || report.rejection_rate == 1.0);
        }
    }

    #[test]
    fn simulate_rate_equals_mean_of_rejects() {
        let report = cmd_simulate(&quick_cfg(Scenario::W, true, 20)).unwrap();
        let mean = report.rows.iter().filter(|r| r.reject).count() as f64
            / report.rows.len() as f64;
        assert_eq!(report.rejection_rate, mean);
    }

    #[test]
    fn simulate_deterministic_across_worker_counts() {
        let mut cfg = quick_cfg(Scenario::Parabola, true, 8);
        cfg.workers = Some(1);
        let a = cmd_simulate(&cfg).unwrap();
        cfg.workers = Some(4);
        let b = cmd_simulate(&cfg).unwrap();
        assert_eq!(report_csv(&a), report_csv(&b));
    }

    #[test]
    fn power_curve_shape() {
        let base = quick_cfg(Scenario::CircleIndicator { theta: 0.0 }, true, 5);
        let pts = cmd_power_curve(&base, &[0.0, 1.0]).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(cmd_power_curve(&base, &[]).is_err());
    }

    #[test]
    fn test_output_json_deterministic() {
        let sample = sample_scenario(
            Scenario::IndNorm,
            &ScenarioParams::default(),
            true,
            60,
            5,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        crate::data::write_csv(&path, &sample).unwrap();
        let cfg = TestRunConfig::new(path, vec![1, 1]);
        let a = cmd_test(&cfg).unwrap().to_json();
        let b = cmd_test(&cfg).unwrap().to_json();
        assert_eq!(a, b);
        assert!(a.contains("p_value"));
    }

    #[test]
    fn test_rejects_dim_mismatch() {
        let sample = sample_scenario(
            Scenario::IndNorm,
            &ScenarioParams::default(),
            true,
            30,
            5,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        crate::data::write_csv(&path, &sample).unwrap();
        let cfg = TestRunConfig::new(path, vec![1, 1, 1]);
        assert!(cmd_test(&cfg).is_err());
    }
}
