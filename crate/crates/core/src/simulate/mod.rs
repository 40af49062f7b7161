//! ODE integration with forward sensitivities and per-datapoint predictions.

pub mod dopri;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, IntegrationError, Result};
use crate::model::{DataPoint, Dataset, Model, ParameterSpace};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { atol: 1e-8, rtol: 1e-8, max_steps: 50_000, initial_step: None }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) || !(self.rtol > 0.0) {
            return Err(Error::Config(format!("tolerances must be positive (atol {}, rtol {})", self.atol, self.rtol)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::Config(format!("initial step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// States and sensitivities of one condition at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// `states[k][i]`: state i at `times[k]`.
    pub states: Vec<Vec<T>>,
    /// `sens[k][i * n_free + j]`: ∂x_i/∂θ_j at `times[k]`, θ on the
    /// estimation scale. Empty when sensitivities were not requested.
    pub sens: Vec<Vec<T>>,
    pub n_free: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn sensitivity(&self, k: usize, state: usize, param: usize) -> T {
        self.sens[k][state * self.n_free + param]
    }
}

/// Evaluation context shared by the RHS and the observation step.
struct Setup<T> {
    env: Vec<T>,
    /// Position in the free vector of each model parameter.
    free_pos: Vec<Option<usize>>,
    chain: Vec<T>,
    nx: usize,
    nf: usize,
}

impl<T: Real> Setup<T> {
    fn new(model: &Model, space: &ParameterSpace, theta: &[T], condition: usize) -> Result<Self> {
        if theta.len() != space.n_free() {
            return Err(Error::Config(format!(
                "parameter vector has {} entries, expected {}",
                theta.len(),
                space.n_free()
            )));
        }
        let cond = model
            .conditions
            .get(condition)
            .ok_or_else(|| Error::Config(format!("condition index {condition} out of range")))?;
        let nx = model.n_states();
        let np = model.n_params();
        let natural = space.natural_all(theta);
        let mut env = vec![T::zero(); model.env_len()];
        env[nx..nx + np].copy_from_slice(&natural);
        for (slot, &u) in env[nx + np..nx + np + model.n_inputs()].iter_mut().zip(&cond.inputs) {
            *slot = T::lit(u);
        }
        let mut free_pos = vec![None; np];
        for (j, &i) in space.free().iter().enumerate() {
            free_pos[i] = Some(j);
        }
        Ok(Self { env, free_pos, chain: space.chain_free(&natural), nx, nf: space.n_free() })
    }

    fn set_time(&mut self, t: T) {
        let last = self.env.len() - 1;
        self.env[last] = t;
    }
}

/// Integrates one condition at `theta` (free parameters, estimation scale).
/// `times` must be ascending and non-negative.
pub fn integrate<T: Real>(
    model: &Model,
    space: &ParameterSpace,
    theta: &[T],
    condition: usize,
    times: &[T],
    cfg: &IntegratorConfig,
    sensitivities: bool,
) -> Result<Trajectory<T>> {
    if times.iter().any(|&t| !(t >= T::zero()) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("output times must be finite, non-negative and ascending".into()));
    }
    let mut s = Setup::new(model, space, theta, condition)?;
    let (nx, nf) = (s.nx, s.nf);
    let width = if sensitivities { nx * (1 + nf) } else { nx };

    s.set_time(T::zero());
    let mut y0 = vec![T::zero(); width];
    for i in 0..nx {
        y0[i] = model.init[i].eval(&s.env)?;
        if sensitivities {
            for (p, e) in &model.init_dp[i] {
                if let Some(j) = s.free_pos[*p] {
                    y0[nx + i * nf + j] = e.eval(&s.env)? * s.chain[j];
                }
            }
        }
    }

    let mut jx = vec![T::zero(); nx * nx];
    let mut fp = vec![T::zero(); nx * nf];
    let rhs = |t: T, y: &[T], dy: &mut [T]| -> std::result::Result<(), IntegrationError> {
        let to_err = |source| IntegrationError::Rhs { t: t.to_f64_lossy(), source };
        s.env[..nx].copy_from_slice(&y[..nx]);
        s.set_time(t);
        for i in 0..nx {
            dy[i] = model.rates[i].eval(&s.env).map_err(to_err)?;
        }
        if !sensitivities {
            return Ok(());
        }
        jx.iter_mut().for_each(|v| *v = T::zero());
        fp.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..nx {
            for (j, e) in &model.rate_dx[i] {
                jx[i * nx + j] = e.eval(&s.env).map_err(to_err)?;
            }
            for (p, e) in &model.rate_dp[i] {
                if let Some(j) = s.free_pos[*p] {
                    fp[i * nf + j] = e.eval(&s.env).map_err(to_err)? * s.chain[j];
                }
            }
        }
        let sens = &y[nx..];
        for i in 0..nx {
            for j in 0..nf {
                let mut acc = fp[i * nf + j];
                for l in 0..nx {
                    let a = jx[i * nx + l];
                    if a != T::zero() {
                        acc = acc + a * sens[l * nf + j];
                    }
                }
                dy[nx + i * nf + j] = acc;
            }
        }
        Ok(())
    };

    let sol = dopri::integrate_controlled(rhs, &y0, nx, times, cfg).map_err(|e| match e {
        IntegrationError::NonFinite { t, .. } => {
            IntegrationError::NonFinite { t, theta: theta.iter().map(|v| v.to_f64_lossy()).collect() }
        }
        other => other,
    })?;

    let mut states = Vec::with_capacity(sol.len());
    let mut sens = Vec::new();
    for mut y in sol {
        if sensitivities {
            sens.push(y.split_off(nx));
        }
        states.push(y);
    }
    Ok(Trajectory { times: times.to_vec(), states, sens, n_free: nf })
}

/// Model output and noise level for one data point, with derivatives by the
/// free parameters on the estimation scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub g: T,
    pub dg: Vec<T>,
    pub sigma: T,
    pub dsigma: Vec<T>,
    /// True when σ comes from the error model rather than the data point.
    pub sigma_from_model: bool,
}

fn grad_through<T: Real>(
    grad_x: &[(usize, crate::exprlang::Expr)],
    grad_p: &[(usize, crate::exprlang::Expr)],
    setup: &Setup<T>,
    traj: &Trajectory<T>,
    k: usize,
) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); setup.nf];
    for (i, e) in grad_x {
        let d = e.eval(&setup.env)?;
        for (j, o) in out.iter_mut().enumerate() {
            *o = *o + d * traj.sensitivity(k, *i, j);
        }
    }
    for (p, e) in grad_p {
        if let Some(j) = setup.free_pos[*p] {
            out[j] = out[j] + e.eval(&setup.env)? * setup.chain[j];
        }
    }
    Ok(out)
}

/// Predictions for every point of `data`, in order. Derivative vectors are
/// empty when `derivatives` is false.
pub fn predict<T: Real>(
    model: &Model,
    space: &ParameterSpace,
    data: &Dataset,
    theta: &[T],
    cfg: &IntegratorConfig,
    derivatives: bool,
) -> Result<Vec<Prediction<T>>> {
    let mut out: Vec<Option<Prediction<T>>> = vec![None; data.len()];
    for c in 0..model.conditions.len() {
        let idx: Vec<usize> = (0..data.len()).filter(|&i| data.points[i].condition == c).collect();
        if idx.is_empty() {
            continue;
        }
        let mut times: Vec<f64> = idx.iter().map(|&i| data.points[i].time).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let tt: Vec<T> = times.iter().map(|&t| T::lit(t)).collect();
        let traj = integrate(model, space, theta, c, &tt, cfg, derivatives)?;
        let mut s = Setup::new(model, space, theta, c)?;
        let nx = s.nx;
        for &i in &idx {
            let p = &data.points[i];
            let k = times.partition_point(|&t| t < p.time);
            s.env[..nx].copy_from_slice(&traj.states[k]);
            s.set_time(T::lit(p.time));
            let obs = &model.observables[p.observable];
            let g = obs.expr.eval(&s.env)?;
            let dg = if derivatives { grad_through(&obs.expr_dx, &obs.expr_dp, &s, &traj, k)? } else { vec![] };
            let pred = match (p.sigma, &obs.error) {
                (Some(sig), _) => Prediction {
                    g,
                    dg,
                    sigma: T::lit(sig),
                    dsigma: if derivatives { vec![T::zero(); s.nf] } else { vec![] },
                    sigma_from_model: false,
                },
                (None, Some(err)) => {
                    let sigma = err.eval(&s.env)?;
                    if !(sigma > T::zero()) || !sigma.is_finite() {
                        return Err(Error::InvalidSigma { index: i, sigma: sigma.to_f64_lossy() });
                    }
                    let dsigma = if derivatives {
                        grad_through(&obs.error_dx, &obs.error_dp, &s, &traj, k)?
                    } else {
                        vec![]
                    };
                    Prediction { g, dg, sigma, dsigma, sigma_from_model: true }
                }
                (None, None) => unreachable!("datasets are validated against their model"),
            };
            out[i] = Some(pred);
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every point belongs to a condition")).collect())
}

/// Observable values at `times` for one condition: `out[k][o]`.
pub fn observe<T: Real>(
    model: &Model,
    space: &ParameterSpace,
    theta: &[T],
    condition: usize,
    times: &[T],
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<T>>> {
    let traj = integrate(model, space, theta, condition, times, cfg, false)?;
    let mut s = Setup::new(model, space, theta, condition)?;
    let nx = s.nx;
    let mut out = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        s.env[..nx].copy_from_slice(&traj.states[k]);
        s.set_time(t);
        out.push(model.observables.iter().map(|o| o.expr.eval(&s.env)).collect::<std::result::Result<Vec<_>, _>>()?);
    }
    Ok(out)
}

/// Simulated measurements of every observable in every condition at
/// `times`, with Gaussian noise of standard deviation `noise_sd` drawn from a
/// seeded generator. Rows are ordered by condition, observable, time.
/// `sigma` is copied into each row.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_data(
    model: &Model,
    space: &ParameterSpace,
    theta: &[f64],
    times: &[f64],
    noise_sd: f64,
    sigma: Option<f64>,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<Vec<DataPoint>> {
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::Config(format!("noise level must be non-negative, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for c in 0..model.conditions.len() {
        let values = observe(model, space, theta, c, times, cfg)?;
        for o in 0..model.observables.len() {
            for (k, &t) in times.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let value = if noise_sd > 0.0 { values[k][o] + noise_sd * z } else { values[k][o] };
                out.push(DataPoint { observable: o, condition: c, time: t, value, sigma });
            }
        }
    }
    Ok(out)
}
