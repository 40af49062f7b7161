//! Box-bounded Levenberg–Marquardt and seeded multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lstsq, reducible_sq, Matrix};
use crate::objective::LeastSquares;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizerConfig {
    /// Stop once an accepted step lowers V by less than this.
    pub tol_fun: f64,
    /// Stop once the projected gradient's largest entry is below this.
    pub tol_grad: f64,
    /// Trial steps per start.
    pub max_iter: usize,
    /// Initial damping relative to the scaled Gauss–Newton diagonal.
    pub initial_damping: f64,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { tol_fun: 1e-6, tol_grad: 1e-8, max_iter: 1000, initial_damping: 1e-3, n_starts: 5, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_fun > 0.0) || !(self.tol_grad > 0.0) {
            return Err(Error::Config("termination tolerances must be positive".into()));
        }
        if !(self.initial_damping > 0.0) {
            return Err(Error::Config("initial damping must be positive".into()));
        }
        if self.n_starts == 0 {
            return Err(Error::Config("at least one start is required".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient below `tol_grad`.
    Gradient,
    /// Accepted step lowered V by less than `tol_fun`.
    FunctionChange,
    /// Even the undamped linearized step would lower V by less than `tol_fun`.
    PredictedReduction,
    MaxIterations,
    /// Damping grew without finding an acceptable step.
    Stalled,
    /// The start point itself could not be evaluated.
    Failed(String),
}

impl Termination {
    pub fn converged(&self) -> bool {
        matches!(self, Termination::Gradient | Termination::FunctionChange | Termination::PredictedReduction)
    }
}

/// Outcome of one local fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartRecord<T> {
    pub start: Vec<T>,
    pub theta: Vec<T>,
    /// NaN when the start failed.
    pub value: T,
    /// Trial steps taken, accepted or not.
    pub iterations: usize,
    pub termination: Termination,
    /// V at the start and after every accepted step.
    pub trace: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub theta: Vec<T>,
    pub value: T,
    /// Index into `starts` of the best record.
    pub best: usize,
    pub starts: Vec<StartRecord<T>>,
    pub converged: bool,
}

const MAX_DAMPING: f64 = 1e16;
const ACCEPT_RATIO: f64 = 1e-4;

fn sum_sq<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}

fn check_box<T: Real>(x: &[T], lower: &[T], upper: &[T]) -> Result<()> {
    if x.len() != lower.len() || x.len() != upper.len() {
        return Err(Error::Config("start and bounds differ in length".into()));
    }
    for j in 0..x.len() {
        if !(lower[j] < upper[j]) {
            return Err(Error::Bounds(format!("empty box in coordinate {j}")));
        }
        if !(x[j] >= lower[j] && x[j] <= upper[j]) {
            return Err(Error::Bounds(format!("start coordinate {j} = {} outside [{}, {}]", x[j], lower[j], upper[j])));
        }
    }
    Ok(())
}

/// Local bounded Levenberg–Marquardt fit from `start`.
///
/// Coordinates sitting on a bound whose gradient points outward are frozen
/// for the step; the remaining step is solved from the damped least-squares
/// system and the trial point is projected onto the box. The value of the
/// returned point is never above the value at `start`.
pub fn minimize<T: Real, P: LeastSquares<T> + ?Sized>(
    problem: &P,
    start: &[T],
    lower: &[T],
    upper: &[T],
    cfg: &OptimizerConfig,
) -> Result<StartRecord<T>> {
    cfg.validate()?;
    check_box(start, lower, upper)?;
    let n = start.len();
    let tol_fun = T::lit(cfg.tol_fun);
    let tol_grad = T::lit(cfg.tol_grad);
    let two = T::lit(2.0);

    let mut x = start.to_vec();
    let (mut r, mut jac) = match problem.residuals_jacobian(&x) {
        Ok(v) => v,
        Err(e) if e.is_infeasible_point() => {
            return Ok(StartRecord {
                start: start.to_vec(),
                theta: start.to_vec(),
                value: T::nan(),
                iterations: 0,
                termination: Termination::Failed(e.to_string()),
                trace: vec![],
            })
        }
        Err(e) => return Err(e),
    };
    let offset = problem.offset();
    let mut ss = sum_sq(&r);
    let mut trace = vec![ss - offset];

    let col_norms = |j: &Matrix<T>| -> Vec<T> {
        (0..n).map(|c| (0..j.rows()).map(|i| j.get(i, c).powi(2)).sum::<T>().sqrt()).collect()
    };
    let mut scale: Vec<T> = col_norms(&jac).into_iter().map(|d| if d > T::zero() { d } else { T::one() }).collect();
    let mut mu = T::lit(cfg.initial_damping);
    let mut nu = two;
    let mut iterations = 0;

    let termination = loop {
        let g = jac.tr_mul_vec(&r);
        let at_lower = |j: usize| x[j] <= lower[j] && g[j] > T::zero();
        let at_upper = |j: usize| x[j] >= upper[j] && g[j] < T::zero();
        let active: Vec<usize> = (0..n).filter(|&j| !at_lower(j) && !at_upper(j)).collect();
        let pg = active.iter().map(|&j| (two * g[j]).abs()).fold(T::zero(), T::max);
        if pg < tol_grad {
            break Termination::Gradient;
        }
        if iterations >= cfg.max_iter {
            break Termination::MaxIterations;
        }
        if mu > T::lit(MAX_DAMPING) {
            break Termination::Stalled;
        }
        let ja = jac.select_cols(&active);
        if reducible_sq(&ja, &r) < tol_fun {
            break Termination::PredictedReduction;
        }
        iterations += 1;

        // [J_A; sqrt(mu) D_A] d = [-r; 0]
        let mut a = ja.clone();
        let mut rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let sm = mu.sqrt();
        for (k, &j) in active.iter().enumerate() {
            let mut row = vec![T::zero(); active.len()];
            row[k] = sm * scale[j];
            a.push_row(&row);
            rhs.push(T::zero());
        }
        let Some(d) = lstsq(&a, &rhs) else {
            mu = mu * nu;
            nu = nu * two;
            continue;
        };

        let mut trial = x.clone();
        for (k, &j) in active.iter().enumerate() {
            trial[j] = (x[j] + d[k]).max(lower[j]).min(upper[j]);
        }
        let step: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let jr: Vec<T> = jac.mul_vec(&step).iter().zip(&r).map(|(&a, &b)| a + b).collect();
        let predicted = ss - sum_sq(&jr);

        let reject = |mu: &mut T, nu: &mut T| {
            *mu = *mu * *nu;
            *nu = *nu * two;
        };
        if !(predicted > T::zero()) || step.iter().all(|&s| s == T::zero()) {
            reject(&mut mu, &mut nu);
            continue;
        }

        let new = problem.residuals_jacobian(&trial);
        let (r_new, j_new) = match new {
            Ok(v) => v,
            Err(e) if e.is_infeasible_point() => {
                reject(&mut mu, &mut nu);
                continue;
            }
            Err(e) => return Err(e),
        };
        let ss_new = sum_sq(&r_new);
        let actual = ss - ss_new;
        let rho = actual / predicted;
        if ss_new.is_finite() && actual > T::zero() && rho > T::lit(ACCEPT_RATIO) {
            x = trial;
            r = r_new;
            jac = j_new;
            ss = ss_new;
            trace.push(ss - offset);
            for (s, c) in scale.iter_mut().zip(col_norms(&jac)) {
                *s = s.max(c);
            }
            let f = T::one() - (two * rho - T::one()).powi(3);
            mu = mu * f.max(T::one() / T::lit(3.0));
            nu = two;
            if actual < tol_fun {
                break Termination::FunctionChange;
            }
        } else {
            reject(&mut mu, &mut nu);
        }
    };

    Ok(StartRecord { start: start.to_vec(), theta: x, value: ss - offset, iterations, termination, trace })
}

/// `first` followed by `n_starts - 1` points drawn uniformly in the box.
pub fn start_points<T: Real>(first: &[T], lower: &[T], upper: &[T], n_starts: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![first.to_vec()];
    for _ in 1..n_starts {
        out.push(
            lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    let v = l + (u - l) * T::lit(rng.random::<f64>());
                    v.max(l).min(u)
                })
                .collect(),
        );
    }
    out
}

/// Runs [`minimize`] from each start (concurrently) and keeps the lowest
/// value; the earliest start wins ties.
pub fn fit_from<T: Real, P: LeastSquares<T> + Sync + ?Sized>(
    problem: &P,
    starts: Vec<Vec<T>>,
    lower: &[T],
    upper: &[T],
    cfg: &OptimizerConfig,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    if starts.is_empty() {
        return Err(Error::Config("no start points".into()));
    }
    let records = starts
        .par_iter()
        .map(|s| minimize(problem, s, lower, upper, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<usize> = None;
    for (i, rec) in records.iter().enumerate() {
        if matches!(rec.termination, Termination::Failed(_)) || !rec.value.is_finite() {
            continue;
        }
        if best.is_none_or(|b| rec.value < records[b].value) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        let why: Vec<String> = records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("start {i}: {:?}", r.termination))
            .collect();
        return Err(Error::OptimizationFailed(format!("every start failed ({})", why.join("; "))));
    };
    Ok(FitResult {
        theta: records[best].theta.clone(),
        value: records[best].value,
        best,
        converged: records[best].termination.converged(),
        starts: records,
    })
}

/// Multi-start fit: `first` plus `n_starts - 1` seeded uniform draws.
pub fn multistart<T: Real, P: LeastSquares<T> + Sync + ?Sized>(
    problem: &P,
    first: &[T],
    lower: &[T],
    upper: &[T],
    cfg: &OptimizerConfig,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    check_box(first, lower, upper)?;
    fit_from(problem, start_points(first, lower, upper, cfg.n_starts, cfg.seed), lower, upper, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as residuals: r = (10 (y - x²), 1 - x).
    struct Rosenbrock;

    impl LeastSquares<f64> for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, t: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![10.0 * (t[1] - t[0] * t[0]), 1.0 - t[0]])
        }
        fn residuals_jacobian(&self, t: &[f64]) -> Result<(Vec<f64>, Matrix<f64>)> {
            Ok((self.residuals(t)?, Matrix::from_rows(&[vec![-20.0 * t[0], 10.0], vec![-1.0, 0.0]])))
        }
    }

    /// Minimum of (x - 3)² outside the box [0, 1].
    struct Shifted;

    impl LeastSquares<f64> for Shifted {
        fn n_params(&self) -> usize {
            1
        }
        fn residuals(&self, t: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![t[0] - 3.0])
        }
        fn residuals_jacobian(&self, t: &[f64]) -> Result<(Vec<f64>, Matrix<f64>)> {
            Ok((self.residuals(t)?, Matrix::from_rows(&[vec![1.0]])))
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let cfg = OptimizerConfig { tol_fun: 1e-14, ..OptimizerConfig::default() };
        let rec = minimize(&Rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg).unwrap();
        assert!(rec.termination.converged(), "{:?}", rec.termination);
        assert!((rec.theta[0] - 1.0).abs() < 1e-5 && (rec.theta[1] - 1.0).abs() < 1e-5, "{:?}", rec.theta);
        assert!(rec.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stops_on_the_active_bound() {
        let rec = minimize(&Shifted, &[0.2], &[0.0], &[1.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(rec.theta, vec![1.0]);
        assert_eq!(rec.value, 4.0);
        assert_eq!(rec.termination, Termination::Gradient);
    }

    #[test]
    fn start_outside_the_box_is_rejected() {
        assert!(minimize(&Shifted, &[2.0], &[0.0], &[1.0], &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn start_points_are_seeded() {
        let a = start_points(&[0.0f64, 0.0], &[-1.0, -2.0], &[1.0, 2.0], 5, 7);
        let b = start_points(&[0.0f64, 0.0], &[-1.0, -2.0], &[1.0, 2.0], 5, 7);
        let c = start_points(&[0.0f64, 0.0], &[-1.0, -2.0], &[1.0, 2.0], 5, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a[0], vec![0.0, 0.0]);
        assert!(a.iter().all(|p| p[0].abs() <= 1.0 && p[1].abs() <= 2.0));
    }

    #[test]
    fn multistart_picks_the_lowest_value() {
        let cfg = OptimizerConfig { n_starts: 4, tol_fun: 1e-14, ..OptimizerConfig::default() };
        let fit = multistart(&Rosenbrock, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &cfg).unwrap();
        let min = fit.starts.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
        assert_eq!(fit.value, min);
        assert_eq!(fit.starts.len(), 4);
        assert!(fit.converged);
    }
}
