//! Identifiability testing by radial penalization, its extensions, and the
//! profile-likelihood oracle used to cross-check verdicts.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{DataPoint, Dataset};
use crate::objective::{LeastSquares, Objective, ObjectiveSpec, Problem, RadialPenalty};
use crate::optimize::{fit_from, minimize, multistart, start_points, FitResult, OptimizerConfig, StartRecord};
use crate::scalar::Real;
use crate::simulate::observe;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItrpConfig {
    /// Penalty radius on the estimation scale.
    pub radius: f64,
    /// Penalty strength; `1/R²` when `None`.
    pub lambda: Option<f64>,
    pub delta: f64,
    /// Names of the parameters entering the penalty norm; all free ones when `None`.
    pub subset: Option<Vec<String>>,
    pub optimizer: OptimizerConfig,
}

impl Default for ItrpConfig {
    fn default() -> Self {
        Self { radius: 1.0, lambda: None, delta: 1e-3, subset: None, optimizer: OptimizerConfig::default() }
    }
}

impl ItrpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Config(format!("lambda must be positive, got {l}")));
            }
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Identifiable,
    NonIdentifiable,
    /// The objective fell below its value at the supposed optimum.
    SuspectStart,
}

impl Verdict {
    pub fn classify<T: Real>(delta_v: T, delta: f64) -> Self {
        let d = T::lit(delta);
        if delta_v < -d {
            Verdict::SuspectStart
        } else if delta_v < d {
            Verdict::NonIdentifiable
        } else {
            Verdict::Identifiable
        }
    }

    /// Process exit code: 0, 10 or 20.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Identifiable => 0,
            Verdict::NonIdentifiable => 10,
            Verdict::SuspectStart => 20,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Identifiable => "identifiable",
            Verdict::NonIdentifiable => "non-identifiable",
            Verdict::SuspectStart => "suspect-start",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItrpReport<T> {
    /// Free parameter names, in the order of every vector below.
    pub parameters: Vec<String>,
    pub subset: Vec<String>,
    pub radius: T,
    pub lambda: T,
    pub delta: f64,
    pub theta_hat: Vec<T>,
    pub v_data: T,
    /// Minimum of the penalized objective.
    pub v_tot: T,
    pub delta_v: T,
    pub verdict: Verdict,
    pub theta_star: Vec<T>,
    /// `θ* - θ̂`.
    pub displacement: Vec<T>,
    pub least_identifiable: usize,
    pub least_identifiable_name: String,
    /// Data and penalty parts of `v_tot`.
    pub v_data_star: T,
    pub v_pen_star: T,
    pub fit: FitResult<T>,
}

/// Fits the unpenalized objective, starting at `start` or the model's
/// reference values.
pub fn fit<T: Real>(problem: &Problem, start: Option<&[T]>, cfg: &OptimizerConfig) -> Result<FitResult<T>> {
    let obj = Objective::data_only(problem);
    let first = match start {
        Some(s) => s.to_vec(),
        None => problem.space.reference(),
    };
    multistart(&obj, &first, &problem.space.lower(), &problem.space.upper(), cfg)
}

fn subset_mask(problem: &Problem, subset: Option<&[String]>) -> Result<(Vec<bool>, Vec<String>)> {
    let names = problem.space.free_names();
    let Some(subset) = subset else {
        return Ok((vec![true; names.len()], names));
    };
    if subset.is_empty() {
        return Err(Error::Config("penalty subset is empty".into()));
    }
    let mut mask = vec![false; names.len()];
    for s in subset {
        match problem.space.free_position(s) {
            Some(j) => mask[j] = true,
            None if problem.space.index_of(s).is_some() => {
                return Err(Error::Config(format!("subset parameter `{s}` is fixed")));
            }
            None => return Err(Error::UnknownParameter(s.clone())),
        }
    }
    let chosen = names.iter().zip(&mask).filter(|(_, &m)| m).map(|(n, _)| n.clone()).collect();
    Ok((mask, chosen))
}

fn penalty_for<T: Real>(problem: &Problem, theta_hat: &[T], radius: f64, cfg: &ItrpConfig) -> Result<(RadialPenalty<T>, Vec<String>)> {
    let (mask, chosen) = subset_mask(problem, cfg.subset.as_deref())?;
    let mut pen = RadialPenalty::new(theta_hat.to_vec(), T::lit(radius))?.with_mask(mask)?;
    if let Some(l) = cfg.lambda {
        pen = pen.with_lambda(T::lit(l))?;
    }
    Ok((pen, chosen))
}

fn report_from_fit<T: Real>(
    problem: &Problem,
    theta_hat: &[T],
    v_data: T,
    penalty: RadialPenalty<T>,
    subset: Vec<String>,
    delta: f64,
    fit: FitResult<T>,
) -> Result<ItrpReport<T>> {
    let obj = Objective::new(problem, ObjectiveSpec::penalized(penalty.clone()))?;
    let (v_data_star, v_pen_star) = obj.split_value(&fit.theta)?;
    let delta_v = fit.value - v_data;
    let displacement: Vec<T> = fit.theta.iter().zip(theta_hat).map(|(&a, &b)| a - b).collect();
    let mut least = None::<usize>;
    for j in (0..displacement.len()).filter(|&j| penalty.mask[j]) {
        if least.is_none_or(|b| displacement[j].abs() > displacement[b].abs()) {
            least = Some(j);
        }
    }
    let least = least.expect("mask selects at least one parameter");
    let parameters = problem.space.free_names();
    Ok(ItrpReport {
        least_identifiable_name: parameters[least].clone(),
        parameters,
        subset,
        radius: penalty.radius,
        lambda: penalty.lambda,
        delta,
        theta_hat: theta_hat.to_vec(),
        v_data,
        v_tot: fit.value,
        delta_v,
        verdict: Verdict::classify(delta_v, delta),
        theta_star: fit.theta.clone(),
        displacement,
        least_identifiable: least,
        v_data_star,
        v_pen_star,
        fit,
    })
}

/// Refits with the radial penalty around `theta_hat` and classifies the
/// increase of the objective.
pub fn itrp<T: Real>(problem: &Problem, theta_hat: &[T], cfg: &ItrpConfig) -> Result<ItrpReport<T>> {
    cfg.validate()?;
    let v_data = Objective::data_only(problem).value(theta_hat)?;
    let (pen, subset) = penalty_for(problem, theta_hat, cfg.radius, cfg)?;
    let obj = Objective::new(problem, ObjectiveSpec::penalized(pen.clone()))?;
    let fit = multistart(&obj, theta_hat, &problem.space.lower(), &problem.space.upper(), &cfg.optimizer)?;
    report_from_fit(problem, theta_hat, v_data, pen, subset, cfg.delta, fit)
}

/// ITRP with the penalty norm restricted to `subset`; all free parameters
/// are still optimized.
pub fn itrp_subset<T: Real>(
    problem: &Problem,
    theta_hat: &[T],
    subset: &[String],
    cfg: &ItrpConfig,
) -> Result<ItrpReport<T>> {
    itrp(problem, theta_hat, &ItrpConfig { subset: Some(subset.to_vec()), ..cfg.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationStep<T> {
    pub fixed: String,
    /// Value (estimation scale) the parameter was fixed at.
    pub value: T,
    pub refit: FitResult<T>,
    /// `None` once no free parameter is left.
    pub report: Option<ItrpReport<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrail<T> {
    pub initial: ItrpReport<T>,
    pub steps: Vec<IterationStep<T>>,
    pub final_verdict: Verdict,
}

impl<T> IterationTrail<T> {
    pub fn fixed(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.fixed.as_str()).collect()
    }
}

/// Repeatedly fixes the least identifiable parameter, refits and reruns ITRP
/// until the verdict is no longer non-identifiable.
pub fn iterate<T: Real>(problem: &Problem, theta_hat: &[T], cfg: &ItrpConfig) -> Result<IterationTrail<T>> {
    let initial = itrp(problem, theta_hat, cfg)?;
    let mut steps = Vec::new();
    let mut verdict = initial.verdict;
    let mut current = problem.clone();
    let mut cfg = cfg.clone();
    let mut hat = theta_hat.to_vec();
    let mut report = initial.clone();
    while verdict == Verdict::NonIdentifiable {
        let j = report.least_identifiable;
        let name = report.least_identifiable_name.clone();
        let value = hat[j];
        current = current.with_fixed(&name, value.to_f64_lossy())?;
        let mut reduced = hat.clone();
        reduced.remove(j);
        if let Some(s) = cfg.subset.as_mut() {
            s.retain(|n| *n != name);
        }
        if current.n_free() == 0 || cfg.subset.as_ref().is_some_and(Vec::is_empty) {
            let refit = FitResult { theta: reduced, value: T::nan(), best: 0, starts: vec![], converged: false };
            steps.push(IterationStep { fixed: name, value, refit, report: None });
            break;
        }
        let refit = fit(&current, Some(&reduced), &cfg.optimizer)?;
        hat = refit.theta.clone();
        report = itrp(&current, &hat, &cfg)?;
        verdict = report.verdict;
        steps.push(IterationStep { fixed: name, value, refit, report: Some(report.clone()) });
    }
    Ok(IterationTrail { initial, steps, final_verdict: verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile<T> {
    pub parameters: Vec<String>,
    pub radii: Vec<T>,
    /// Penalized optimum at each radius.
    pub v_tot: Vec<T>,
    /// Data part of the objective at each penalized optimum.
    pub v_data: Vec<T>,
    pub theta: Vec<Vec<T>>,
    pub theta_hat: Vec<T>,
    pub v_hat: T,
}

/// Penalized fits over an increasing grid of radii. Each radius starts from
/// the previous optimum plus random starts; a random start replaces the
/// warm-started result only if it is better by more than `tol_fun`, which
/// keeps the parameter paths on one branch.
pub fn radial_profile<T: Real>(
    problem: &Problem,
    theta_hat: &[T],
    radii: &[f64],
    cfg: &ItrpConfig,
) -> Result<RadialProfile<T>> {
    cfg.validate()?;
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("radius grid must be positive and strictly increasing".into()));
    }
    let lower = problem.space.lower();
    let upper = problem.space.upper();
    let v_hat = Objective::data_only(problem).value(theta_hat)?;
    let tol = T::lit(cfg.optimizer.tol_fun);
    let mut warm = theta_hat.to_vec();
    let mut out = RadialProfile {
        parameters: problem.space.free_names(),
        radii: vec![],
        v_tot: vec![],
        v_data: vec![],
        theta: vec![],
        theta_hat: theta_hat.to_vec(),
        v_hat,
    };
    for (k, &r) in radii.iter().enumerate() {
        let (pen, _) = penalty_for(problem, theta_hat, r, cfg)?;
        let obj = Objective::new(problem, ObjectiveSpec::penalized(pen.clone()))?;
        let mut starts =
            start_points(theta_hat, &lower, &upper, cfg.optimizer.n_starts, cfg.optimizer.seed.wrapping_add(k as u64));
        starts[0] = warm.clone();
        let fit = fit_from(&obj, starts, &lower, &upper, &cfg.optimizer)?;
        let warm_rec = &fit.starts[0];
        let chosen = if warm_rec.value.is_finite() && !(fit.value < warm_rec.value - tol) {
            warm_rec
        } else {
            &fit.starts[fit.best]
        };
        let (vd, _) = obj.split_value(&chosen.theta)?;
        out.radii.push(T::lit(r));
        out.v_tot.push(chosen.value);
        out.v_data.push(vd);
        out.theta.push(chosen.theta.clone());
        warm = chosen.theta.clone();
    }
    Ok(out)
}

/// Noise level for the noise-free, densely sampled problem: `N (atol + rtol |x|)`.
pub fn math_mode_sigma<T: Real>(x: T, atol: f64, rtol: f64, n_sim: usize) -> T {
    T::lit(n_sim as f64) * (T::lit(atol) + T::lit(rtol) * x.abs())
}

/// Replaces the data by `n_sim` noise-free simulations at `theta_hat` per
/// observable and condition of the original data, on a uniform grid over
/// the data's time span, with σ from [`math_mode_sigma`].
pub fn math_mode_problem(problem: &Problem, theta_hat: &[f64], n_sim: usize) -> Result<Problem> {
    if n_sim < 2 {
        return Err(Error::Config("math mode needs at least two simulation points".into()));
    }
    let (lo, hi) = problem.data.time_span();
    let times: Vec<f64> = (0..n_sim).map(|k| lo + (hi - lo) * k as f64 / (n_sim - 1) as f64).collect();
    let mut pairs: Vec<(usize, usize)> = problem.data.points.iter().map(|p| (p.condition, p.observable)).collect();
    pairs.sort_unstable();
    pairs.dedup();
    let cfg = &problem.integrator;
    let mut points = Vec::new();
    let mut cond_cache: Option<(usize, Vec<Vec<f64>>)> = None;
    for (c, o) in pairs {
        if cond_cache.as_ref().is_none_or(|(cc, _)| *cc != c) {
            cond_cache = Some((c, observe(&problem.model, &problem.space, theta_hat, c, &times, cfg)?));
        }
        let values = &cond_cache.as_ref().expect("just filled").1;
        for (k, &t) in times.iter().enumerate() {
            let x = values[k][o];
            points.push(DataPoint {
                observable: o,
                condition: c,
                time: t,
                value: x,
                sigma: Some(math_mode_sigma(x, cfg.atol, cfg.rtol, n_sim)),
            });
        }
    }
    let data = Dataset::new(points, &problem.model)?;
    Problem::new(problem.model.clone(), problem.space.clone(), data, *cfg)
}

/// A least-squares problem with one coordinate held at a given value.
struct Pinned<'a, T, P: ?Sized> {
    inner: &'a P,
    index: usize,
    value: T,
}

impl<T: Real, P: LeastSquares<T> + ?Sized> Pinned<'_, T, P> {
    fn expand(&self, theta: &[T]) -> Vec<T> {
        let mut full = theta.to_vec();
        full.insert(self.index, self.value);
        full
    }
}

impl<T: Real, P: LeastSquares<T> + ?Sized> LeastSquares<T> for Pinned<'_, T, P> {
    fn n_params(&self) -> usize {
        self.inner.n_params() - 1
    }

    fn residuals(&self, theta: &[T]) -> Result<Vec<T>> {
        self.inner.residuals(&self.expand(theta))
    }

    fn residuals_jacobian(&self, theta: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let (r, j) = self.inner.residuals_jacobian(&self.expand(theta))?;
        let keep: Vec<usize> = (0..j.cols()).filter(|&c| c != self.index).collect();
        Ok((r, j.select_cols(&keep)))
    }

    fn offset(&self) -> T {
        self.inner.offset()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileGrid {
    /// Half-width of the grid around the estimate, estimation scale.
    pub span: f64,
    /// Total number of points, including the estimate.
    pub points: usize,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { span: 2.0, points: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve<T> {
    pub parameter: String,
    /// Grid values of the profiled parameter (estimation scale), ascending.
    pub values: Vec<T>,
    pub objective: Vec<T>,
    /// Optimal full parameter vectors along the profile.
    pub theta: Vec<Vec<T>>,
    pub v_hat: T,
    /// Largest increase over `v_hat` below and above the estimate.
    pub rise_below: T,
    pub rise_above: T,
    /// `max - min < δ` over the whole grid.
    pub flat: bool,
}

/// Profile likelihood of one free parameter. Points are visited outward from
/// the estimate in both directions, each fit warm-started from its
/// neighbour; grid points outside the bounds are dropped.
pub fn profile_likelihood<T: Real>(
    problem: &Problem,
    theta_hat: &[T],
    parameter: &str,
    grid: ProfileGrid,
    delta: f64,
    cfg: &OptimizerConfig,
) -> Result<ProfileCurve<T>> {
    let k = problem.space.free_position(parameter).ok_or_else(|| {
        if problem.space.index_of(parameter).is_some() {
            Error::Config(format!("profiled parameter `{parameter}` is fixed"))
        } else {
            Error::UnknownParameter(parameter.to_string())
        }
    })?;
    if grid.points < 3 || !(grid.span > 0.0) {
        return Err(Error::Config("profile grid needs at least three points and a positive span".into()));
    }
    let obj = Objective::data_only(problem);
    let v_hat = obj.value(theta_hat)?;
    let lower = problem.space.lower::<T>();
    let upper = problem.space.upper::<T>();
    let mut lo_r = lower.clone();
    lo_r.remove(k);
    let mut up_r = upper.clone();
    up_r.remove(k);
    let local = OptimizerConfig { n_starts: 1, ..*cfg };

    let half = grid.points / 2;
    let step = T::lit(grid.span) / T::lit(half as f64);
    let center = theta_hat[k];
    let solve = |p: T, warm: &[T]| -> Result<StartRecord<T>> {
        let pinned = Pinned { inner: &obj, index: k, value: p };
        let mut reduced = warm.to_vec();
        reduced.remove(k);
        let rec = minimize(&pinned, &reduced, &lo_r, &up_r, &local)?;
        let mut full = rec.theta.clone();
        full.insert(k, p);
        Ok(StartRecord { theta: full, ..rec })
    };

    let mut below: Vec<(T, StartRecord<T>)> = Vec::new();
    let mut above: Vec<(T, StartRecord<T>)> = Vec::new();
    let c_rec = solve(center, theta_hat)?;
    for (dir, side) in [(-T::one(), &mut below), (T::one(), &mut above)] {
        let mut warm = c_rec.theta.clone();
        for i in 1..=half {
            let p = center + dir * step * T::lit(i as f64);
            if p < lower[k] || p > upper[k] {
                break;
            }
            let rec = solve(p, &warm)?;
            if rec.value.is_finite() {
                warm = rec.theta.clone();
            }
            side.push((p, rec));
        }
    }

    let mut values = Vec::new();
    let mut objective = Vec::new();
    let mut theta = Vec::new();
    for (p, rec) in below.iter().rev().chain(std::iter::once(&(center, c_rec.clone()))).chain(above.iter()) {
        values.push(*p);
        objective.push(rec.value);
        theta.push(rec.theta.clone());
    }
    let rise = |side: &[(T, StartRecord<T>)]| {
        side.iter().map(|(_, r)| r.value - v_hat).filter(|v| v.is_finite()).fold(T::zero(), T::max)
    };
    let finite: Vec<T> = objective.iter().copied().filter(|v| v.is_finite()).collect();
    let max = finite.iter().copied().fold(T::neg_infinity(), T::max);
    let min = finite.iter().copied().fold(T::infinity(), T::min);
    Ok(ProfileCurve {
        parameter: parameter.to_string(),
        values,
        objective,
        theta,
        v_hat,
        rise_below: rise(&below),
        rise_above: rise(&above),
        flat: max - min < T::lit(delta),
    })
}

/// Profiles of every free parameter, computed concurrently.
pub fn profile_all<T: Real>(
    problem: &Problem,
    theta_hat: &[T],
    grid: ProfileGrid,
    delta: f64,
    cfg: &OptimizerConfig,
) -> Result<Vec<ProfileCurve<T>>> {
    problem
        .space
        .free_names()
        .par_iter()
        .map(|name| profile_likelihood(problem, theta_hat, name, grid, delta, cfg))
        .collect()
}

/// Verdict implied by a set of profiles: non-identifiable if any is flat.
pub fn profile_verdict<T>(curves: &[ProfileCurve<T>]) -> Verdict {
    if curves.iter().any(|c| c.flat) {
        Verdict::NonIdentifiable
    } else {
        Verdict::Identifiable
    }
}
