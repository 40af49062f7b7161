//! Acceptance criteria for the shipped models, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the report is always printed.
//! Criteria listed in [`KNOWN_FAILURES`] are expected to fail on this
//! machine class; the run insists they still do, so a fix shows up.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::Value;

use itrp::identifiability::{fit, itrp, iterate, math_mode_problem, profile_all, ProfileCurve};
use itrp::linalg::{lstsq, symmetric_eigenvalues};
use itrp::model::{load_model, parse_data, PositiveControlTransform};
use itrp::objective::{LeastSquares, Objective, ObjectiveSpec, RadialPenalty};
use itrp::simulate::integrate;
use itrp::{IntegratorConfig, ItrpConfig, Problem, ProfileGrid, Verdict};

/// Criteria that do not hold here; see the README for the analysis.
const KNOWN_FAILURES: &[u32] = &[];

const DELTA: f64 = 1e-3;
const TOL_FUN: f64 = 1e-6;

/// Regression values of the shipped dataset (seed 195).
const ABC_DELTA_V: f64 = 0.42383083367760044;
const ABC_THETA_HAT: [f64; 3] = [-1.0160886904510507, -0.9739877582242966, -0.013282520308581156];
const THETA_TRUE: [f64; 3] = [-1.0, -1.0, 0.0];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn models() -> PathBuf {
    root().join("models")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Shipped {
    Abc,
    AbcRel,
    AbcControl,
}

impl Shipped {
    fn label(self) -> &'static str {
        match self {
            Shipped::Abc => "ABC",
            Shipped::AbcRel => "ABC_rel",
            Shipped::AbcControl => "ABC+control(k1)",
        }
    }

    fn args(self) -> Vec<String> {
        let (model, data) = match self {
            Shipped::AbcRel => ("abc_rel.toml", "abc_rel.csv"),
            _ => ("abc.toml", "abc.csv"),
        };
        let mut a = vec![
            "--model".to_string(),
            models().join(model).display().to_string(),
            "--data".into(),
            models().join(data).display().to_string(),
        ];
        if self == Shipped::AbcControl {
            a.extend(["--positive-control".to_string(), "k1".into()]);
        }
        a
    }

    fn problem(self) -> Problem {
        let (model, data) = match self {
            Shipped::AbcRel => ("abc_rel.toml", "abc_rel.csv"),
            _ => ("abc.toml", "abc.csv"),
        };
        let (mut m, mut s) = load_model(models().join(model)).unwrap();
        if self == Shipped::AbcControl {
            (m, s) = m.with_positive_control(&s, &PositiveControlTransform::new("k1")).unwrap();
        }
        let d = parse_data(&std::fs::read_to_string(models().join(data)).unwrap(), &m).unwrap();
        Problem::new(m, s, d, IntegratorConfig::default()).unwrap()
    }
}

struct Run {
    code: i32,
    report: Value,
    seconds: f64,
}

fn cli(args: &[String], out: Option<&Path>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_itrp"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.arg("--out").arg(dir);
    }
    let clock = Instant::now();
    let o = cmd.output().expect("binary runs");
    let seconds = clock.elapsed().as_secs_f64();
    let code = o.status.code().unwrap_or(-1);
    let report = match out {
        Some(dir) => std::fs::read_to_string(dir.join("report.json"))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or(Value::Null),
        None => serde_json::from_slice(&o.stdout).unwrap_or(Value::Null),
    };
    if code == 1 {
        eprintln!("{}", String::from_utf8_lossy(&o.stderr));
    }
    Run { code, report, seconds }
}

fn cmd(words: &str, m: Shipped) -> Vec<String> {
    let mut a: Vec<String> = words.split_whitespace().map(String::from).collect();
    a.extend(m.args());
    a
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("itrp-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

/// Outcome of one criterion.
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Per-parameter PL verdicts: flat, or rising by more than δ on both sides.
fn flat(c: &ProfileCurve<f64>) -> bool {
    c.flat
}

fn unique_minimum(c: &ProfileCurve<f64>) -> bool {
    !c.flat && c.rise_below > DELTA && c.rise_above > DELTA
}

fn one_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn criterion_1() -> Outcome {
    let r = cli(&cmd("itrp", Shipped::Abc), None);
    let it = &r.report["result"]["itrp"];
    let dv = it["delta_v"].as_f64().unwrap_or(f64::NAN);
    let verdict = it["verdict"].as_str().unwrap_or("");
    let hat: Vec<f64> = it["theta_hat"].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default();

    // Three standard errors from the Gauss–Newton covariance 2 H⁻¹.
    let problem = Shipped::Abc.problem();
    let h = Objective::data_only(&problem).gauss_newton_hessian(&hat).unwrap();
    let se: Vec<f64> = (0..hat.len())
        .map(|j| {
            let mut e = vec![0.0; hat.len()];
            e[j] = 1.0;
            (2.0 * lstsq(&h, &e).unwrap()[j]).sqrt()
        })
        .collect();
    let compatible = hat.iter().zip(&THETA_TRUE).zip(&se).all(|((a, b), s)| (a - b).abs() <= 3.0 * s);
    let frozen = (dv - ABC_DELTA_V).abs() <= TOL_FUN && hat.iter().zip(&ABC_THETA_HAT).all(|(a, b)| (a - b).abs() <= 1e-4);
    let pass = r.code == 0
        && verdict == "identifiable"
        && dv > DELTA
        && (0.1..10.0).contains(&dv)
        && compatible
        && frozen
        && r.seconds < 10.0;
    outcome(
        pass,
        format!(
            "verdict {verdict}, ΔV {dv:.6} (frozen {ABC_DELTA_V:.6}), θ̂ {hat:.4?} within 3·SE {se:.3?} of truth: {compatible}, exit {}, {:.2} s",
            r.code, r.seconds
        ),
    )
}

fn criterion_2() -> Outcome {
    let r = cli(&cmd("itrp", Shipped::AbcRel), None);
    let it = &r.report["result"]["itrp"];
    let dv = it["delta_v"].as_f64().unwrap_or(f64::NAN);
    let least = it["least_identifiable_name"].as_str().unwrap_or("");
    let pass = r.code == 10 && dv < DELTA && ["A0", "s"].contains(&least) && r.seconds < 30.0;
    outcome(pass, format!("ΔV {dv:.3e}, i* = {least}, exit {}, {:.2} s", r.code, r.seconds))
}

/// ITRP and all-parameter PL from the same estimate, each timed on one thread.
struct Comparison {
    model: Shipped,
    verdict: Verdict,
    least: String,
    itrp_seconds: f64,
    curves: Vec<ProfileCurve<f64>>,
    pl_seconds: f64,
}

fn compare(m: Shipped) -> Comparison {
    let problem = m.problem();
    let cfg = ItrpConfig::default();
    one_thread(|| {
        let hat = fit::<f64>(&problem, None, &cfg.optimizer).unwrap().theta;
        let clock = Instant::now();
        let rep = itrp(&problem, &hat, &cfg).unwrap();
        let itrp_seconds = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let curves = profile_all(&problem, &hat, ProfileGrid::default(), DELTA, &cfg.optimizer).unwrap();
        let pl_seconds = clock.elapsed().as_secs_f64();
        Comparison {
            model: m,
            verdict: rep.verdict,
            least: rep.least_identifiable_name,
            itrp_seconds,
            curves,
            pl_seconds,
        }
    })
}

fn criterion_3(runs: &[Comparison]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in runs {
        let flat_names: Vec<&str> = c.curves.iter().filter(|p| flat(p)).map(|p| p.parameter.as_str()).collect();
        let ok = match c.verdict {
            Verdict::Identifiable => flat_names.is_empty() && c.curves.iter().all(|p| p.rise_below > DELTA || p.rise_above > DELTA),
            Verdict::NonIdentifiable => flat_names.contains(&c.least.as_str()),
            Verdict::SuspectStart => false,
        };
        pass &= ok;
        parts.push(format!("{}: {} (i* {}) vs PL flat {:?}", c.model.label(), c.verdict, c.least, flat_names));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Shipped::AbcRel, Shipped::AbcControl] {
        let problem = m.problem();
        let cfg = ItrpConfig::default();
        let hat = fit::<f64>(&problem, None, &cfg.optimizer).unwrap().theta;
        let trail = iterate(&problem, &hat, &cfg).unwrap();
        let fixed: Vec<String> = trail.fixed().iter().map(|s| s.to_string()).collect();
        let mut ok = fixed.len() == 1;
        let mut unique = Vec::new();
        if let Some(step) = trail.steps.first() {
            let reduced = problem.with_fixed(&step.fixed, step.value).unwrap();
            let curves = profile_all(&reduced, &step.refit.theta, ProfileGrid::default(), DELTA, &cfg.optimizer).unwrap();
            ok &= curves.iter().all(unique_minimum);
            unique = curves.iter().map(|c| (c.parameter.clone(), unique_minimum(c))).collect();
        }
        pass &= ok;
        parts.push(format!("{}: fixed {fixed:?}, unique minima {unique:?}", m.label()));
    }
    outcome(pass, parts.join("; "))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j]).collect()
}

fn criterion_5() -> Outcome {
    let grid = ["--rgrid".to_string(), "0.1:2:20".into()];

    let dir = scratch_dir("radial-rel");
    let mut args = cmd("radial-profile", Shipped::AbcRel);
    args.extend(grid.iter().cloned());
    cli(&args, Some(&dir));
    let (h, rows) = read_csv(&dir.join("radial_profile.csv"));
    let v = column(&h, &rows, "v_tot");
    let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm = |names: &[&str]| -> Vec<f64> {
        let cols: Vec<Vec<f64>> = names.iter().map(|n| column(&h, &rows, &format!("d_{n}"))).collect();
        (0..rows.len()).map(|k| cols.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt()).collect()
    };
    let rates = norm(&["k1", "k2"]);
    let scale = norm(&["A0", "s"]);
    let rel_ok = rows.len() == 20
        && spread < DELTA
        && rates.iter().all(|&d| d < 0.01)
        && scale.windows(2).all(|w| w[1] > w[0]);

    let dir = scratch_dir("radial-abc");
    let mut args = cmd("radial-profile", Shipped::Abc);
    args.extend(grid.iter().cloned());
    cli(&args, Some(&dir));
    let (h, rows) = read_csv(&dir.join("radial_profile.csv"));
    let radius = column(&h, &rows, "radius");
    let dv = column(&h, &rows, "delta_v");
    let increasing = dv.windows(2).all(|w| w[1] > w[0]);
    let at_one = radius.iter().position(|&r| (r - 1.0).abs() < 1e-12).map(|k| dv[k]).unwrap_or(f64::NAN);
    let abc_ok = rows.len() == 20 && increasing && (at_one - ABC_DELTA_V).abs() <= TOL_FUN;

    outcome(
        rel_ok && abc_ok,
        format!(
            "ABC_rel spread {spread:.2e}, max ‖Δ(k1,k2)‖ {:.2e}, ‖Δ(A0,s)‖ {:.3}→{:.3} increasing: {}; ABC increasing: {increasing}, V(1) {at_one:.6} vs ΔV {ABC_DELTA_V:.6}",
            rates.iter().cloned().fold(0.0, f64::max),
            scale.first().copied().unwrap_or(f64::NAN),
            scale.last().copied().unwrap_or(f64::NAN),
            scale.windows(2).all(|w| w[1] > w[0]),
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Shipped::Abc, Shipped::AbcRel] {
        let problem = m.problem();
        let cfg = ItrpConfig::default();
        let hat = fit::<f64>(&problem, None, &cfg.optimizer).unwrap().theta;
        let verdicts: Vec<Verdict> = [50, 100, 200]
            .iter()
            .map(|&n| itrp(&math_mode_problem(&problem, &hat, n).unwrap(), &hat, &cfg).unwrap().verdict)
            .collect();
        pass &= verdicts.windows(2).all(|w| w[0] == w[1]);
        parts.push(format!("{}: {:?}", m.label(), verdicts.iter().map(|v| v.to_string()).collect::<Vec<_>>()));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7(runs: &[Comparison]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in runs {
        let ratio = c.pl_seconds / c.itrp_seconds;
        pass &= ratio >= 3.0;
        parts.push(format!("{}: ITRP {:.3} s, PL {:.3} s, ×{ratio:.1}", c.model.label(), c.itrp_seconds, c.pl_seconds));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let tight = IntegratorConfig { atol: 1e-12, rtol: 1e-12, ..IntegratorConfig::default() };
    let mut worst_grad: f64 = 0.0;
    let mut worst_sens: f64 = 0.0;
    let mut worst_plain: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for m in [Shipped::Abc, Shipped::AbcRel, Shipped::AbcControl] {
        let base = m.problem();
        let problem = Problem::new(base.model.clone(), base.space.clone(), base.data.clone(), tight).unwrap();
        let names = problem.space.free_names();
        for _ in 0..10 {
            let theta: Vec<f64> = names
                .iter()
                .map(|n| if n.starts_with('k') { rng.random_range(-1.6..-0.2) } else { rng.random_range(-0.5..0.5) })
                .collect();
            // (a) objective gradient, data part and penalized
            let centre: Vec<f64> = theta.iter().map(|v| v - 0.4).collect();
            for spec in [ObjectiveSpec::default(), ObjectiveSpec::penalized(RadialPenalty::new(centre, 1.0).unwrap())] {
                let obj = Objective::new(&problem, spec).unwrap();
                let (_, g) = obj.value_and_gradient(&theta).unwrap();
                let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                for j in 0..theta.len() {
                    let h = 1e-5;
                    let (mut p, mut q) = (theta.clone(), theta.clone());
                    p[j] += h;
                    q[j] -= h;
                    let fd = (obj.value(&p).unwrap() - obj.value(&q).unwrap()) / (2.0 * h);
                    worst_grad = worst_grad.max((g[j] - fd).abs() / fd.abs().max(1e-3 * scale));
                }
            }
            // (b) state sensitivities, h = 1e-4 on the log10 scale. The plain
            // central difference carries O(h²) truncation error near zero
            // crossings, so the oracle is its Richardson extrapolation with h/2.
            let times: Vec<f64> = (0..=10).map(|k| 5.0 * k as f64).collect();
            let traj = integrate(&problem.model, &problem.space, &theta, 0, &times, &tight, true).unwrap();
            let nx = problem.model.n_states();
            for j in 0..theta.len() {
                let central = |h: f64| -> Vec<Vec<f64>> {
                    let (mut p, mut q) = (theta.clone(), theta.clone());
                    p[j] += h;
                    q[j] -= h;
                    let up = integrate(&problem.model, &problem.space, &p, 0, &times, &tight, false).unwrap();
                    let dn = integrate(&problem.model, &problem.space, &q, 0, &times, &tight, false).unwrap();
                    (0..times.len())
                        .map(|k| (0..nx).map(|i| (up.states[k][i] - dn.states[k][i]) / (2.0 * h)).collect())
                        .collect()
                };
                let (plain, half) = (central(1e-4), central(5e-5));
                // Entries far below the column scale (structural zeros, decayed
                // states) are compared against that scale, as for gradients.
                let scale = plain.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
                for k in 0..times.len() {
                    for i in 0..nx {
                        let s = traj.sensitivity(k, i, j);
                        let fd = (4.0 * half[k][i] - plain[k][i]) / 3.0;
                        let floor = 1e-3 * scale;
                        worst_sens = worst_sens.max((s - fd).abs() / fd.abs().max(floor));
                        worst_plain = worst_plain.max((s - plain[k][i]).abs() / plain[k][i].abs().max(floor));
                    }
                }
            }
            // (c) mass conservation on the closed chain
            if m == Shipped::Abc {
                let traj = integrate(&problem.model, &problem.space, &theta, 0, &times, &IntegratorConfig::default(), false).unwrap();
                let a0 = 10f64.powf(theta[2]);
                for x in &traj.states {
                    worst_mass = worst_mass.max((x.iter().sum::<f64>() - a0).abs());
                }
            }
        }
    }
    let a = worst_grad < 1e-4;
    let b = worst_sens < 1e-5;
    let c = worst_mass <= 1e-8;

    // (d) penalty normalization at the ABC estimate
    let hat = ABC_THETA_HAT.to_vec();
    let pen = RadialPenalty::new(hat.clone(), 1.0).unwrap();
    let at_centre = pen.value(&hat);
    let mut on_sphere = Vec::new();
    for j in 0..hat.len() {
        let mut p = hat.clone();
        p[j] += 1.0;
        if p[j] - hat[j] == 1.0 {
            on_sphere.push(pen.value(&p));
        }
    }
    let d = at_centre == 1.0 && !on_sphere.is_empty() && on_sphere.iter().all(|&v| v == 0.0);

    // (e) Gauss–Newton null direction
    let cfg = ItrpConfig::default();
    let smallest = |m: Shipped| {
        let problem = m.problem();
        let best = fit::<f64>(&problem, None, &cfg.optimizer).unwrap().theta;
        symmetric_eigenvalues(&Objective::data_only(&problem).gauss_newton_hessian(&best).unwrap())[0]
    };
    let (rel, plain) = (smallest(Shipped::AbcRel), smallest(Shipped::Abc));
    let e = rel < 1e-6 && plain > 1e-6;

    outcome(
        a && b && c && d && e,
        format!(
            "(a) worst gradient rel. error {worst_grad:.1e} [{}]; (b) worst sensitivity rel. error {worst_sens:.1e} (plain central difference {worst_plain:.1e}) [{}]; (c) worst mass drift {worst_mass:.1e} [{}]; (d) V_pen(θ̂) = {at_centre}, on sphere {on_sphere:?} [{}]; (e) smallest GN eigenvalue ABC_rel {rel:.1e}, ABC {plain:.1e} [{}]",
            ok(a), ok(b), ok(c), ok(d), ok(e)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

/// Every real in `a` and `b` agrees within `tol`; timings are skipped.
fn same_report(a: &Value, b: &Value, tol: f64, path: &str) -> Result<(), String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: different keys"));
            }
            for (k, v) in x {
                if k == "timings" {
                    continue;
                }
                let w = y.get(k).ok_or_else(|| format!("{path}.{k} missing"))?;
                same_report(v, w, tol, &format!("{path}.{k}"))?;
            }
            Ok(())
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                return Err(format!("{path}: lengths {} and {}", x.len(), y.len()));
            }
            x.iter().zip(y).enumerate().try_for_each(|(i, (v, w))| same_report(v, w, tol, &format!("{path}[{i}]")))
        }
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() <= tol {
                Ok(())
            } else {
                Err(format!("{path}: {x} vs {y}"))
            }
        }
        _ if a == b => Ok(()),
        _ => Err(format!("{path}: {a} vs {b}")),
    }
}

fn criterion_9() -> Outcome {
    let sim = |dir: &str| {
        let out = scratch_dir(dir).with_extension("csv");
        let args: Vec<String> = [
            "simulate-data",
            "--model",
            &models().join("abc.toml").display().to_string(),
            "--theta",
            "k1=0.1,k2=0.1,A0=1",
            "--seed",
            "3",
            "-o",
            &out.display().to_string(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cli(&args, None);
        std::fs::read(&out).unwrap_or_default()
    };
    let mut failures = Vec::new();
    let (x, y) = (sim("sim-a"), sim("sim-b"));
    if x.is_empty() || x != y {
        failures.push("simulate-data".to_string());
    }
    let commands = [
        ("fit", Shipped::Abc),
        ("itrp", Shipped::Abc),
        ("itrp --math-mode --nsim 50", Shipped::AbcRel),
        ("iterate", Shipped::AbcRel),
        ("profile", Shipped::Abc),
        ("radial-profile --rgrid 0.5:1.5:3", Shipped::AbcRel),
    ];
    for (words, m) in commands {
        let a = cli(&cmd(&format!("{words} --seed 11"), m), None);
        let b = cli(&cmd(&format!("{words} --seed 11"), m), None);
        let verdict_same = a.report["result"]["verdict"] == b.report["result"]["verdict"];
        if a.report.is_null() || a.code != b.code || !verdict_same {
            failures.push(format!("{words}: verdict or exit code differs"));
        } else if let Err(e) = same_report(&a.report, &b.report, 1e-12, "") {
            failures.push(format!("{words}: {e}"));
        }
    }
    let n = commands.len() + 1;
    outcome(failures.is_empty(), format!("{} of {n} commands reproduced {}", n - failures.len(), failures.join("; ")))
}

fn main() {
    let started = Instant::now();
    let comparisons: Vec<Comparison> = [Shipped::Abc, Shipped::AbcRel, Shipped::AbcControl].into_iter().map(compare).collect();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "ABC identifiable verdict", criterion_1()),
        (2, "ABC_rel non-identifiable verdict", criterion_2()),
        (3, "ITRP and profile likelihood agree", criterion_3(&comparisons)),
        (4, "iterative enumeration", criterion_4()),
        (5, "radial profile shapes", criterion_5()),
        (6, "math mode N_sim invariance", criterion_6()),
        (7, "ITRP at least 3x faster than all profiles", criterion_7(&comparisons)),
        (8, "numerical property suites", criterion_8()),
        (9, "determinism", criterion_9()),
    ];
    let mut unexpected = Vec::new();
    for (n, name, o) in &results {
        println!("{} criterion {n} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if o.pass == KNOWN_FAILURES.contains(n) {
            unexpected.push(*n);
        }
    }
    println!("acceptance suite finished in {:.1} s", started.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("criteria with unexpected outcome: {unexpected:?} (known failures: {KNOWN_FAILURES:?})");
        std::process::exit(1);
    }
}
