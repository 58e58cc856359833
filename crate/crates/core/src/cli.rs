//! The `wiks` command line: `test`, `calibrate` and `power`.
//!
//! Exit status is 0 on success, 2 for unreadable or malformed files, 3 when
//! a resource cap is hit and 64 for usage or configuration errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};

use crate::baselines::{classical_ks_test, wilcoxon_test, Method, TestReport};
use crate::calibration::{calibrate_wiks_null, calibrate_z_quantile, CalibrationMode, CalibrationResult};
use crate::config::RunConfig;
use crate::distributions::{BivariateModel, Model, ScenarioId};
use crate::error::{Error, Result};
use crate::index::{decide, wiks, DecisionRule, WiksEstimate};
use crate::io::{self, BaselineOutcome, Samples, ThresholdSource, TwoSampleReport};
use crate::posterior::{DPPrior, ProductBase};
use crate::power::{PowerStudy, PowerThresholds, ScenarioGrid};
use crate::seed::SeedSpec;

#[derive(Debug, Parser)]
#[command(name = "wiks", version, about = "Bayesian nonparametric two-sample testing with the WIKS index")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test whether the samples in --x and --y share a distribution.
    Test(Flags),
    /// Calibrate the rejection threshold by null simulation.
    Calibrate(Flags),
    /// Estimate power curves over the simulation scenarios.
    Power(Flags),
}

/// Flags override the `--config` file, which overrides the defaults.
#[derive(Debug, Default, clap::Args)]
struct Flags {
    /// Flat TOML file whose keys are these flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV file of the first sample.
    #[arg(long)]
    x: Option<PathBuf>,
    /// CSV file of the second sample.
    #[arg(long)]
    y: Option<PathBuf>,
    /// DP concentration K.
    #[arg(long)]
    k: Option<f64>,
    /// DP base measure, e.g. `normal(0,1)`.
    #[arg(long)]
    base: Option<String>,
    /// Exponent of the power weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight family: power, uniform, power(l) or tabulated(t:W,...).
    #[arg(long)]
    weight: Option<String>,
    /// Posterior draw pairs per index estimate.
    #[arg(long)]
    s_draws: Option<usize>,
    #[arg(long)]
    trunc_eps: Option<f64>,
    #[arg(long)]
    max_atoms: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Null replicates for calibration.
    #[arg(long)]
    replicates: Option<usize>,
    /// Null model for calibration, e.g. `lognormal(0,1)`.
    #[arg(long)]
    null: Option<String>,
    /// Calibration mode: wiks_null_sim or z_quantile.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Fixed WIKS threshold; skips calibration.
    #[arg(long)]
    threshold: Option<f64>,
    /// Calibration result file; repeatable.
    #[arg(long)]
    calibration: Vec<PathBuf>,
    /// Comma-separated scenario ids.
    #[arg(long)]
    scenarios: Option<String>,
    /// Comma-separated theta grid for a single scenario.
    #[arg(long)]
    thetas: Option<String>,
    /// Comma-separated methods among WIKS, KS, WILCOX.
    #[arg(long)]
    methods: Option<String>,
    /// Replicates per power-curve point.
    #[arg(long)]
    reps: Option<usize>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Cap on replicates * s-draws.
    #[arg(long)]
    budget_cap: Option<u64>,
}

fn parse_list<T>(text: &str, what: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).map_err(|e| Error::Usage(format!("bad {what} `{s}`: {e}"))))
        .collect()
}

fn usage<T, E: std::fmt::Display>(r: std::result::Result<T, E>, flag: &str) -> Result<T> {
    r.map_err(|e| Error::Usage(format!("--{flag}: {e}")))
}

impl Flags {
    fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(k, lambda, weight, s_draws, trunc_eps, max_atoms, alpha, replicates, n, m, reps, seed, workers);
        if self.x.is_some() {
            c.x = self.x;
        }
        if self.y.is_some() {
            c.y = self.y;
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        if self.threshold.is_some() {
            c.threshold = self.threshold;
        }
        if self.budget_cap.is_some() {
            c.budget_cap = self.budget_cap;
        }
        if !self.calibration.is_empty() {
            c.calibration = self.calibration;
        }
        if let Some(b) = &self.base {
            c.base = usage(b.parse(), "base")?;
        }
        if let Some(b) = &self.null {
            c.null = usage(b.parse(), "null")?;
        }
        if let Some(b) = &self.mode {
            c.mode = usage(b.parse(), "mode")?;
        }
        if let Some(s) = &self.scenarios {
            c.scenarios = parse_list(s, "scenario", |t| {
                t.parse::<u32>()
                    .map(ScenarioId)
                    .map_err(|e| Error::Usage(e.to_string()))
            })?;
        }
        if let Some(s) = &self.thetas {
            c.thetas = Some(parse_list(s, "theta", |t| {
                t.parse::<f64>().map_err(|e| Error::Usage(e.to_string()))
            })?);
        }
        if let Some(s) = &self.methods {
            c.methods = parse_list(s, "method", str::parse)?;
        }
        Ok(c)
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
        }
    };
    match execute(cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<String> {
    let (flags, cmd): (Flags, fn(&RunConfig) -> Result<String>) = match cli.command {
        Command::Test(f) => (f, cmd_test),
        Command::Calibrate(f) => (f, cmd_calibrate),
        Command::Power(f) => (f, cmd_power),
    };
    let config = flags.resolve()?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    pool.install(|| cmd(&config))
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Usage(format!("--{flag} is required")))
}

fn standard_bivariate_normal() -> Model {
    BivariateModel::normal([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).into()
}

/// The configured null if it has dimension `dim`, else a standard normal
/// of that dimension.
fn null_for(config: &RunConfig, dim: usize) -> Model {
    if config.null.dimension() == dim {
        config.null
    } else if dim == 2 {
        standard_bivariate_normal()
    } else {
        Model::Univariate(config.base)
    }
}

fn calibrate(config: &RunConfig, n: usize, m: usize, null: Model, seed: SeedSpec) -> Result<CalibrationResult> {
    let cal = config.calibration_config(n, m, null)?;
    match config.mode {
        CalibrationMode::WiksNullSim => {
            calibrate_wiks_null(&cal, &config.prior()?, &config.wiks_config()?, seed)
        }
        CalibrationMode::ZQuantile if null.dimension() == 1 => calibrate_z_quantile(&cal, seed),
        CalibrationMode::ZQuantile => Err(Error::Config(
            "z_quantile calibration applies to univariate data only".into(),
        )),
    }
}

fn read_calibrations(config: &RunConfig) -> Result<Vec<CalibrationResult>> {
    config.calibration.iter().map(|p| io::read_json(p)).collect()
}

fn estimate(config: &RunConfig, x: &Samples, y: &Samples, seed: SeedSpec) -> Result<WiksEstimate> {
    let wcfg = config.wiks_config()?;
    match (x, y) {
        (Samples::Univariate(x), Samples::Univariate(y)) => wiks(x, y, &config.prior()?, &wcfg, seed),
        (Samples::Bivariate(x), Samples::Bivariate(y)) => {
            let prior = DPPrior::new(config.k, ProductBase(config.base, config.base))?;
            wiks(x, y, &prior, &wcfg, seed)
        }
        _ => Err(Error::Usage(format!(
            "--x has {} column(s) but --y has {}",
            x.dimension(),
            y.dimension()
        ))),
    }
}

fn baselines(x: &Samples, y: &Samples) -> Vec<BaselineOutcome> {
    let run = |method: Method, f: fn(&[f64], &[f64]) -> Result<TestReport>| {
        let result = match (x, y) {
            (Samples::Univariate(x), Samples::Univariate(y)) => f(x, y),
            _ => Err(Error::Input("not applicable to bivariate data".into())),
        };
        match result {
            Ok(report) => BaselineOutcome {
                method,
                report: Some(report),
                error: None,
            },
            Err(e) => BaselineOutcome {
                method,
                report: None,
                error: Some(e.to_string()),
            },
        }
    };
    vec![run(Method::Ks, classical_ks_test), run(Method::Wilcox, wilcoxon_test)]
}

fn cmd_test(config: &RunConfig) -> Result<String> {
    let x_path = require(&config.x, "x")?;
    let y_path = require(&config.y, "y")?;
    let x = io::parse_samples(x_path)?;
    let y = io::parse_samples(y_path)?;
    if x.dimension() != y.dimension() {
        return Err(Error::Usage(format!(
            "--x has {} column(s) but --y has {}",
            x.dimension(),
            y.dimension()
        )));
    }
    let dim = x.dimension();
    let root = SeedSpec::root(config.seed);

    let (threshold, source) = if let Some(c) = config.threshold {
        (c, ThresholdSource::Given)
    } else if !config.calibration.is_empty() {
        let found = config
            .calibration
            .iter()
            .zip(read_calibrations(config)?)
            .find(|(_, c)| c.config.null_model.dimension() == dim)
            .ok_or_else(|| {
                Error::Config(format!("no calibration file matches {dim}-dimensional data"))
            })?;
        let (path, cal) = found;
        if (cal.config.n, cal.config.m) != (x.len(), y.len()) {
            warn!(
                "calibration was run for n={}, m={} but the samples have n={}, m={}",
                cal.config.n,
                cal.config.m,
                x.len(),
                y.len()
            );
        }
        (
            cal.threshold,
            ThresholdSource::CalibrationFile { path: path.clone() },
        )
    } else {
        info!("no threshold given; calibrating with {} replicates", config.replicates);
        let cal = calibrate(config, x.len(), y.len(), null_for(config, dim), root.child(1))?;
        (
            cal.threshold,
            ThresholdSource::Calibrated {
                mode: cal.mode,
                replicates: cal.config.replicates,
            },
        )
    };

    let wiks_seed = root.child(0);
    let est = estimate(config, &x, &y, wiks_seed)?;
    let decision = decide(&est, &DecisionRule::Threshold(threshold))?;
    let report = TwoSampleReport {
        x_path: x_path.to_path_buf(),
        y_path: y_path.to_path_buf(),
        n: x.len(),
        m: y.len(),
        dimension: dim,
        concentration: config.k,
        base: config.base,
        weight: config.weight_spec()?,
        estimate: est,
        threshold,
        threshold_source: source,
        decision: decision.verdict,
        baselines: baselines(&x, &y),
        seed: wiks_seed,
    };
    if let Some(out) = &config.out {
        io::write_json(out, &report)?;
    }

    let mut s = String::new();
    let _ = writeln!(s, "samples    n = {}, m = {}, dimension {}", report.n, report.m, dim);
    let _ = writeln!(
        s,
        "WIKS       {:.4} (MC std. error {:.4}, {} draws)",
        est.value, est.mc_std_error, est.draws
    );
    let _ = writeln!(s, "threshold  {threshold:.4}");
    let _ = writeln!(s, "decision   {}", decision.verdict);
    for b in &report.baselines {
        match (&b.report, &b.error) {
            (Some(r), _) => {
                let _ = writeln!(
                    s,
                    "{:<10} statistic {:.4}, p-value {:.4}",
                    b.method.name(),
                    r.statistic,
                    r.p_value.unwrap_or(f64::NAN)
                );
            }
            (None, e) => {
                let _ = writeln!(s, "{:<10} unavailable: {}", b.method.name(), e.as_deref().unwrap_or(""));
            }
        }
    }
    if est.truncation_flag_count > 0 {
        let _ = writeln!(s, "note       {} draws hit the atom cap", est.truncation_flag_count);
    }
    Ok(s)
}

fn cmd_calibrate(config: &RunConfig) -> Result<String> {
    let result = calibrate(config, config.n, config.m, config.null, SeedSpec::root(config.seed))?;
    if let Some(out) = &config.out {
        io::write_json(out, &result)?;
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        "threshold  {:.4} ({}, null {}, n = {}, m = {}, {} replicates, alpha {})",
        result.threshold,
        result.mode,
        result.config.null_model,
        result.config.n,
        result.config.m,
        result.config.replicates,
        result.config.alpha
    );
    Ok(s)
}

fn cmd_power(config: &RunConfig) -> Result<String> {
    let scenarios = config
        .scenarios
        .iter()
        .map(|&id| match &config.thetas {
            Some(t) => Ok(ScenarioGrid { id, thetas: t.clone() }),
            None => ScenarioGrid::with_default_grid(id),
        })
        .collect::<Result<Vec<_>>>()?;
    let study = PowerStudy {
        scenarios,
        methods: config.methods.clone(),
        reps: config.reps,
        n: config.n,
        m: config.m,
        alpha: config.alpha,
        prior: config.prior()?,
        wiks: config.wiks_config()?,
    };
    study.validate()?;

    let root = SeedSpec::root(config.seed);
    let mut thresholds = match config.threshold {
        Some(c) => PowerThresholds::fixed(c),
        None => PowerThresholds::from_calibrations(&read_calibrations(config)?),
    };
    if config.methods.contains(&Method::Wiks) {
        let mut dims: Vec<usize> = study
            .scenarios
            .iter()
            .filter_map(|g| g.id.dimension())
            .collect();
        dims.sort_unstable();
        dims.dedup();
        for dim in dims {
            if thresholds.get(dim).is_none() {
                info!("calibrating the {dim}-dimensional threshold");
                let cal = calibrate(config, config.n, config.m, null_for(config, dim), root.child(1).child(dim as u64))?;
                thresholds.set(dim, cal.threshold);
            }
        }
    }

    let table = study.run(&thresholds, root.child(0))?;
    let csv = table.to_csv_string()?;
    match &config.out {
        Some(out) => {
            io::write_text(out, &csv)?;
            let mut s = String::new();
            for row in &table.rows {
                let _ = writeln!(
                    s,
                    "scenario {:>2}  theta {:<10} {:<7} power {:.3} (se {:.3})",
                    row.scenario.to_string(),
                    row.theta,
                    row.method.name(),
                    row.power,
                    row.mc_se
                );
            }
            Ok(s)
        }
        None => Ok(csv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_defaults() {
        let cli = Cli::try_parse_from([
            "wiks", "power", "--k", "2", "--scenarios", "1,3", "--methods", "wiks,ks", "--null",
            "uniform(0,1)", "--s-draws", "10",
        ])
        .unwrap();
        let Command::Power(flags) = cli.command else { panic!() };
        let c = flags.resolve().unwrap();
        assert_eq!(c.k, 2.0);
        assert_eq!(c.scenarios, vec![ScenarioId(1), ScenarioId(3)]);
        assert_eq!(c.methods, vec![Method::Wiks, Method::Ks]);
        assert_eq!(c.s_draws, 10);
        assert_eq!(c.null.dimension(), 1);
    }

    #[test]
    fn exit_codes_for_parse_failures() {
        assert_eq!(run(["wiks", "--help"]), 0);
        assert_eq!(run(["wiks", "--version"]), 0);
        assert_eq!(run(["wiks", "frobnicate"]), 64);
        assert_eq!(run(["wiks", "test", "--k", "abc"]), 64);
        assert_eq!(run(["wiks", "test"]), 64);
        assert_eq!(run(["wiks", "power", "--scenarios", ""]), 64);
        assert_eq!(run(["wiks", "calibrate", "--null", "normal(0,-1)"]), 64);
        assert_eq!(run(["wiks", "test", "--x", "/nonexistent/a.csv", "--y", "/nonexistent/b.csv"]), 2);
        assert_eq!(run(["wiks", "calibrate", "--budget-cap", "10"]), 3);
    }
}
