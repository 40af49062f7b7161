use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use itrp::identifiability::{self as ident, profile_verdict};
use itrp::model::{load_model, parse_data, write_data, Model, ParameterSpace, PositiveControlTransform, Scale};
use itrp::simulate::synthetic_data;
use itrp::{IntegratorConfig, ItrpConfig, OptimizerConfig, Problem, ProfileGrid, Verdict};

mod output;

use output::{write_outputs, CsvTable};

/// Identifiability testing of ODE model parameters by radial penalization.
#[derive(Debug, Parser)]
#[command(name = "itrp", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Global {
    /// Model file (TOML).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Data file (CSV: observable,condition,time,value[,sigma]).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Directory for report.json and curve CSVs; the report goes to stdout otherwise.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random start points (and for noise in simulate-data).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    atol: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    rtol: f64,
    /// Fits per optimization: the current estimate plus random starts.
    #[arg(long, global = true, default_value_t = 5)]
    nstarts: usize,
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolfun: f64,
    #[arg(long, global = true, default_value_t = 1000)]
    maxiter: usize,
    /// Replace this parameter by the product of two new ones before anything else.
    #[arg(long, global = true, value_name = "PARAM")]
    positive_control: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TestArgs {
    /// Penalty radius on the estimation scale.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Penalty strength [default: 1/radius²].
    #[arg(long)]
    lambda: Option<f64>,
    /// Threshold on the objective increase.
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Comma-separated parameters that enter the penalty norm.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
    /// Replace the data by noise-free simulations with tolerance-derived σ.
    #[arg(long)]
    math_mode: bool,
    /// Simulation points per observable in math mode.
    #[arg(long, default_value_t = 100)]
    nsim: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a dataset with Gaussian noise.
    SimulateData {
        /// Natural-scale parameter values `name=value,...`; unspecified ones keep the model value.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<String>,
        /// Noise standard deviation; 0 gives exact simulations.
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        /// Value written to the sigma column [default: --sigma, or empty when it is 0].
        #[arg(long)]
        sigma_column: Option<f64>,
        /// Measurement times: `start:step:end` or a comma-separated list.
        #[arg(long, default_value = "0:5:50")]
        times: String,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the model to the data.
    Fit,
    /// Fit, then run the identifiability test.
    Itrp {
        #[command(flatten)]
        test: TestArgs,
        /// Keep fixing the least identifiable parameter until identifiable.
        #[arg(long)]
        iterate: bool,
    },
    /// Fit, then enumerate non-identifiabilities by repeated fixing.
    Iterate {
        #[command(flatten)]
        test: TestArgs,
    },
    /// Profile likelihood of one or all free parameters.
    Profile {
        /// Parameter to profile; all free parameters when omitted.
        #[arg(long)]
        profile: Option<String>,
        /// Half-width of the profile grid, estimation scale.
        #[arg(long, default_value_t = 2.0)]
        span: f64,
        /// Grid points including the estimate.
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Penalized optimum as a function of the radius.
    RadialProfile {
        #[command(flatten)]
        test: TestArgs,
        /// Radius grid `lo:hi:n`.
        #[arg(long, default_value = "0.1:2:20")]
        rgrid: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_times(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let times = match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b): (f64, f64, f64) = (a.trim().parse()?, step.trim().parse()?, b.trim().parse()?);
            if !(step > 0.0) || b < a {
                bail!("time range `{spec}` needs a positive step and end >= start");
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| a + step * k as f64).collect()
        }
        [list] => list.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?,
        _ => bail!("cannot read times `{spec}`"),
    };
    if times.is_empty() {
        bail!("no measurement times");
    }
    Ok(times)
}

fn parse_rgrid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        bail!("radius grid must look like lo:hi:n, got `{spec}`");
    };
    let (lo, hi, n): (f64, f64, usize) = (lo.parse()?, hi.parse()?, n.parse()?);
    if n == 0 || !(lo > 0.0) || (n > 1 && !(hi > lo)) {
        bail!("radius grid needs 0 < lo < hi and n >= 1");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let m = (n - 1) as f64;
    Ok((0..n).map(|k| (lo * (m - k as f64) + hi * k as f64) / m).collect())
}

fn load(global: &Global) -> Result<(Model, ParameterSpace)> {
    let path = global.model.as_ref().context("--model is required")?;
    let (m, s) = load_model(path).with_context(|| format!("loading {}", path.display()))?;
    match &global.positive_control {
        Some(p) => Ok(m.with_positive_control(&s, &PositiveControlTransform::new(p))?),
        None => Ok((m, s)),
    }
}

fn problem(global: &Global) -> Result<Problem> {
    let (m, s) = load(global)?;
    let path = global.data.as_ref().context("--data is required")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let data = parse_data(&text, &m).with_context(|| format!("reading {}", path.display()))?;
    Ok(Problem::new(m, s, data, integrator(global))?)
}

fn integrator(global: &Global) -> IntegratorConfig {
    IntegratorConfig { atol: global.atol, rtol: global.rtol, ..IntegratorConfig::default() }
}

fn optimizer(global: &Global) -> OptimizerConfig {
    OptimizerConfig {
        tol_fun: global.tolfun,
        max_iter: global.maxiter,
        n_starts: global.nstarts,
        seed: global.seed,
        ..OptimizerConfig::default()
    }
}

fn itrp_config(global: &Global, t: &TestArgs) -> ItrpConfig {
    ItrpConfig {
        radius: t.radius,
        lambda: t.lambda,
        delta: t.delta,
        subset: t.subset.clone(),
        optimizer: optimizer(global),
    }
}

/// Base fit, swapped for the math-mode problem when requested.
fn fitted(global: &Global, t: Option<&TestArgs>, timings: &mut serde_json::Map<String, Value>) -> Result<(Problem, Value, Vec<f64>)> {
    let pb = problem(global)?;
    let clock = Instant::now();
    let fit = ident::fit::<f64>(&pb, None, &optimizer(global))?;
    timings.insert("fit_seconds".into(), json!(clock.elapsed().as_secs_f64()));
    let theta = fit.theta.clone();
    let fit_json = serde_json::to_value(&fit)?;
    match t {
        Some(t) if t.math_mode => Ok((ident::math_mode_problem(&pb, &theta, t.nsim)?, fit_json, theta)),
        _ => Ok((pb, fit_json, theta)),
    }
}

fn names_row(space: &ParameterSpace) -> Vec<String> {
    space.free_names()
}

fn run(cli: Cli) -> Result<u8> {
    let g = cli.global.clone();
    if let Some(j) = g.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().ok();
    }
    let mut timings = serde_json::Map::new();
    let mut tables: Vec<CsvTable> = Vec::new();
    let started = Instant::now();

    let (command, config, body, code): (&str, Value, Value, u8) = match &cli.command {
        Command::SimulateData { theta, sigma, sigma_column, times, output } => {
            let (m, s) = load(&g)?;
            let times = parse_times(times)?;
            let mut natural: Vec<f64> = s.params().iter().map(|p| p.value).collect();
            for a in theta {
                let (name, v) = a.split_once('=').with_context(|| format!("expected name=value, got `{a}`"))?;
                let i = s.index_of(name.trim()).with_context(|| format!("unknown parameter `{name}`"))?;
                natural[i] = v.trim().parse().with_context(|| format!("bad value in `{a}`"))?;
            }
            let estimate: Vec<f64> = s
                .params()
                .iter()
                .zip(&natural)
                .filter(|(p, _)| !p.fixed)
                .map(|(p, &v)| if p.scale == Scale::Log10 { v.log10() } else { v })
                .collect();
            let fixed_changed = s.params().iter().zip(&natural).any(|(p, &v)| p.fixed && p.value != v);
            if fixed_changed {
                bail!("--theta cannot change fixed parameters");
            }
            let col = sigma_column.or((*sigma > 0.0).then_some(*sigma));
            let pts = synthetic_data(&m, &s, &estimate, &times, *sigma, col, g.seed, &integrator(&g))?;
            let csv = write_data(&pts, &m);
            match output {
                Some(p) => std::fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            return Ok(0);
        }
        Command::Fit => {
            let pb = problem(&g)?;
            let clock = Instant::now();
            let fit = ident::fit::<f64>(&pb, None, &optimizer(&g))?;
            timings.insert("fit_seconds".into(), json!(clock.elapsed().as_secs_f64()));
            tables.push(output::starts_table("starts.csv", &names_row(&pb.space), &fit));
            let body = json!({ "parameters": pb.space.free_names(), "fit": fit });
            ("fit", json!({}), body, 0)
        }
        Command::Itrp { test, iterate } => {
            let (pb, fit, theta) = fitted(&g, Some(test), &mut timings)?;
            let cfg = itrp_config(&g, test);
            if *iterate {
                let (body, code) = run_iterate(&pb, &theta, &cfg, fit, &mut timings, &mut tables)?;
                ("itrp", serde_json::to_value(test)?, body, code)
            } else {
                let clock = Instant::now();
                let rep = ident::itrp::<f64>(&pb, &theta, &cfg)?;
                timings.insert("itrp_seconds".into(), json!(clock.elapsed().as_secs_f64()));
                tables.push(output::penalized_starts_table("itrp_starts.csv", &rep));
                let code = rep.verdict.exit_code() as u8;
                let body = json!({ "fit": fit, "itrp": rep, "verdict": rep.verdict });
                ("itrp", serde_json::to_value(test)?, body, code)
            }
        }
        Command::Iterate { test } => {
            let (pb, fit, theta) = fitted(&g, Some(test), &mut timings)?;
            let cfg = itrp_config(&g, test);
            let (body, code) = run_iterate(&pb, &theta, &cfg, fit, &mut timings, &mut tables)?;
            ("iterate", serde_json::to_value(test)?, body, code)
        }
        Command::Profile { profile, span, points, delta } => {
            let (pb, fit, theta) = fitted(&g, None, &mut timings)?;
            let grid = ProfileGrid { span: *span, points: *points };
            let opt = optimizer(&g);
            let clock = Instant::now();
            let curves = match profile {
                Some(p) => vec![ident::profile_likelihood::<f64>(&pb, &theta, p, grid, *delta, &opt)?],
                None => ident::profile_all::<f64>(&pb, &theta, grid, *delta, &opt)?,
            };
            timings.insert("profile_seconds".into(), json!(clock.elapsed().as_secs_f64()));
            for c in &curves {
                tables.push(output::profile_table(&names_row(&pb.space), c));
            }
            let verdict = profile_verdict(&curves);
            let config = json!({ "profile": profile, "span": span, "points": points, "delta": delta });
            let body = json!({ "fit": fit, "profiles": curves, "verdict": verdict });
            ("profile", config, body, verdict.exit_code() as u8)
        }
        Command::RadialProfile { test, rgrid } => {
            let radii = parse_rgrid(rgrid)?;
            let (pb, fit, theta) = fitted(&g, Some(test), &mut timings)?;
            let cfg = itrp_config(&g, test);
            let clock = Instant::now();
            let rp = ident::radial_profile::<f64>(&pb, &theta, &radii, &cfg)?;
            timings.insert("radial_profile_seconds".into(), json!(clock.elapsed().as_secs_f64()));
            tables.push(output::radial_table(&rp));
            let mut config = serde_json::to_value(test)?;
            config["rgrid"] = json!(rgrid);
            let body = json!({ "fit": fit, "radial_profile": rp });
            ("radial-profile", config, body, 0)
        }
    };

    timings.insert("total_seconds".into(), json!(started.elapsed().as_secs_f64()));
    let report = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "global": g,
        "config": config,
        "integrator": integrator(&g),
        "optimizer": optimizer(&g),
        "result": body,
        "timings": timings,
        "exit_code": code,
    });
    match &g.out {
        Some(dir) => write_outputs(Path::new(dir), &report, &tables)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(code)
}

fn run_iterate(
    pb: &Problem,
    theta: &[f64],
    cfg: &ItrpConfig,
    fit: Value,
    timings: &mut serde_json::Map<String, Value>,
    tables: &mut Vec<CsvTable>,
) -> Result<(Value, u8)> {
    let clock = Instant::now();
    let trail = ident::iterate::<f64>(pb, theta, cfg)?;
    timings.insert("iterate_seconds".into(), json!(clock.elapsed().as_secs_f64()));
    tables.push(output::trail_table(&trail));
    // The exit code describes the model as given, before anything was fixed.
    let code = trail.initial.verdict.exit_code() as u8;
    let verdict: Verdict = trail.initial.verdict;
    let body = json!({
        "fit": fit,
        "trail": trail,
        "fixed": trail.fixed(),
        "verdict": verdict,
    });
    Ok((body, code))
}
