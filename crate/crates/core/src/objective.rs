//! Residuals, objective value, gradient and Gauss–Newton Hessian.
//!
//! Everything is derived from one stacked residual vector:
//!
//! * data rows `(y_i - g_i) / σ_i`
//! * prior rows `(θ_j - mean_j) / sd_j` for free parameters with a prior
//! * optional error-model rows `sqrt(2 log σ_i + C)` (the `-2 log L`
//!   normalization term, shifted by `C` so the square root exists)
//! * optional radial penalty row `sqrt(λ) (‖θ_sub - θ̂_sub‖ - R)`
//!
//! and `V = Σ r² - C · n_err`.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Dataset, Model, ParameterSpace};
use crate::scalar::Real;
use crate::simulate::{predict, IntegratorConfig};

/// Shift inside the error-model rows. Requires `σ > exp(-C/2)`.
pub const LOG_TERM_SHIFT: f64 = 50.0;

/// A model, its parameter space, the data and the integrator settings.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: Model,
    pub space: ParameterSpace,
    pub data: Dataset,
    pub integrator: IntegratorConfig,
}

impl Problem {
    pub fn new(model: Model, space: ParameterSpace, data: Dataset, integrator: IntegratorConfig) -> Result<Self> {
        integrator.validate()?;
        Ok(Self { model, space, data, integrator })
    }

    pub fn n_free(&self) -> usize {
        self.space.n_free()
    }

    /// Same problem with one more parameter held fixed.
    pub fn with_fixed(&self, name: &str, estimate: f64) -> Result<Self> {
        Ok(Self { space: self.space.with_fixed(name, estimate)?, ..self.clone() })
    }
}

/// `λ (‖θ_sub - θ̂_sub‖₂ - R)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPenalty<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub lambda: T,
    /// Which free parameters enter the norm.
    pub mask: Vec<bool>,
}

impl<T: Real> RadialPenalty<T> {
    /// Penalty over all free parameters with `λ = 1/R²`.
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        let mask = vec![true; center.len()];
        Ok(Self { center, radius, lambda: T::one() / (radius * radius), mask })
    }

    pub fn with_lambda(mut self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.center.len() || !mask.iter().any(|&m| m) {
            return Err(Error::Config("penalty subset must select at least one free parameter".into()));
        }
        self.mask = mask;
        Ok(self)
    }

    /// Distance of `theta` from the center over the masked coordinates.
    pub fn distance(&self, theta: &[T]) -> T {
        self.masked(theta).map(|(_, d)| d * d).sum::<T>().sqrt()
    }

    fn masked<'a>(&'a self, theta: &'a [T]) -> impl Iterator<Item = (usize, T)> + 'a {
        (0..self.center.len()).filter(|&j| self.mask[j]).map(move |j| (j, theta[j] - self.center[j]))
    }

    pub fn residual(&self, theta: &[T]) -> T {
        self.lambda.sqrt() * (self.distance(theta) - self.radius)
    }

    pub fn value(&self, theta: &[T]) -> T {
        self.residual(theta).powi(2)
    }

    /// Derivative of [`RadialPenalty::residual`]. At the center the norm is
    /// not differentiable; the first masked coordinate is used as direction.
    pub fn residual_gradient(&self, theta: &[T]) -> Vec<T> {
        let sl = self.lambda.sqrt();
        let dist = self.distance(theta);
        let mut g = vec![T::zero(); theta.len()];
        if dist == T::zero() {
            let first = self.mask.iter().position(|&m| m).expect("mask is non-empty");
            g[first] = sl;
        } else {
            for (j, d) in self.masked(theta) {
                g[j] = sl * d / dist;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec<T> {
    pub penalty: Option<RadialPenalty<T>>,
    /// Adds `Σ 2 log σ_i` for points whose σ comes from an error model.
    pub error_log_term: bool,
}

impl<T> Default for ObjectiveSpec<T> {
    fn default() -> Self {
        Self { penalty: None, error_log_term: true }
    }
}

impl<T: Real> ObjectiveSpec<T> {
    pub fn penalized(penalty: RadialPenalty<T>) -> Self {
        Self { penalty: Some(penalty), ..Self::default() }
    }
}

/// A residual-form objective: `V(θ) = Σ r_i(θ)² - offset`.
pub trait LeastSquares<T: Real> {
    fn n_params(&self) -> usize;

    fn residuals(&self, theta: &[T]) -> Result<Vec<T>>;

    /// Residuals and their Jacobian (one row per residual).
    fn residuals_jacobian(&self, theta: &[T]) -> Result<(Vec<T>, Matrix<T>)>;

    /// Constant subtracted from the sum of squares.
    fn offset(&self) -> T {
        T::zero()
    }

    fn value(&self, theta: &[T]) -> Result<T> {
        Ok(self.residuals(theta)?.iter().map(|&r| r * r).sum::<T>() - self.offset())
    }
}

#[derive(Debug, Clone)]
pub struct Objective<'a, T> {
    pub problem: &'a Problem,
    pub spec: ObjectiveSpec<T>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(problem: &'a Problem, spec: ObjectiveSpec<T>) -> Result<Self> {
        if let Some(p) = &spec.penalty {
            if p.center.len() != problem.n_free() {
                return Err(Error::Config(format!(
                    "penalty center has {} entries, problem has {} free parameters",
                    p.center.len(),
                    problem.n_free()
                )));
            }
        }
        Ok(Self { problem, spec })
    }

    /// Unpenalized objective of the same problem.
    pub fn data_only(problem: &'a Problem) -> Self {
        Self { problem, spec: ObjectiveSpec::default() }
    }

    fn n_log_rows(&self) -> usize {
        if !self.spec.error_log_term {
            return 0;
        }
        self.problem
            .data
            .points
            .iter()
            .filter(|p| p.sigma.is_none())
            .count()
    }

    fn assemble(&self, theta: &[T], jacobian: bool) -> Result<(Vec<T>, Option<Matrix<T>>)> {
        let pb = self.problem;
        let n = pb.n_free();
        if theta.len() != n {
            return Err(Error::Config(format!("parameter vector has {} entries, expected {n}", theta.len())));
        }
        let preds = predict(&pb.model, &pb.space, &pb.data, theta, &pb.integrator, jacobian)?;
        let mut res = Vec::with_capacity(preds.len() + 1);
        let mut jac = jacobian.then(|| Matrix::zeros(0, n));

        for (p, pred) in pb.data.points.iter().zip(&preds) {
            let y = T::lit(p.value);
            let diff = y - pred.g;
            res.push(diff / pred.sigma);
            if let Some(j) = jac.as_mut() {
                let s2 = pred.sigma * pred.sigma;
                let row: Vec<T> =
                    (0..n).map(|k| -pred.dg[k] / pred.sigma - diff / s2 * pred.dsigma[k]).collect();
                j.push_row(&row);
            }
        }

        for (k, prm) in pb.space.params().iter().filter(|p| !p.fixed).enumerate() {
            if let Some(pr) = prm.prior {
                let sd = T::lit(pr.sd);
                res.push((theta[k] - T::lit(pr.mean)) / sd);
                if let Some(j) = jac.as_mut() {
                    let mut row = vec![T::zero(); n];
                    row[k] = T::one() / sd;
                    j.push_row(&row);
                }
            }
        }

        if self.spec.error_log_term {
            let c = T::lit(LOG_TERM_SHIFT);
            for (i, pred) in preds.iter().enumerate() {
                if !pred.sigma_from_model {
                    continue;
                }
                let arg = T::lit(2.0) * pred.sigma.ln() + c;
                if !(arg > T::zero()) {
                    return Err(Error::InvalidSigma { index: i, sigma: pred.sigma.to_f64_lossy() });
                }
                let r = arg.sqrt();
                res.push(r);
                if let Some(j) = jac.as_mut() {
                    let row: Vec<T> = pred.dsigma.iter().map(|&ds| ds / (pred.sigma * r)).collect();
                    j.push_row(&row);
                }
            }
        }

        if let Some(pen) = &self.spec.penalty {
            res.push(pen.residual(theta));
            if let Some(j) = jac.as_mut() {
                j.push_row(&pen.residual_gradient(theta));
            }
        }
        Ok((res, jac))
    }

    /// `(V, ∇V)` with `∇V = 2 Jᵀ r`.
    pub fn value_and_gradient(&self, theta: &[T]) -> Result<(T, Vec<T>)> {
        let (r, j) = self.residuals_jacobian(theta)?;
        let v = r.iter().map(|&x| x * x).sum::<T>() - self.offset();
        let g = j.tr_mul_vec(&r).into_iter().map(|x| T::lit(2.0) * x).collect();
        Ok((v, g))
    }

    /// `2 JᵀJ` over all residual rows.
    pub fn gauss_newton_hessian(&self, theta: &[T]) -> Result<Matrix<T>> {
        let (_, j) = self.residuals_jacobian(theta)?;
        let mut h = j.gram();
        for r in 0..h.rows() {
            for c in 0..h.cols() {
                h.set(r, c, T::lit(2.0) * h.get(r, c));
            }
        }
        Ok(h)
    }

    /// `(V_data, V_pen)`; their sum is the total objective.
    pub fn split_value(&self, theta: &[T]) -> Result<(T, T)> {
        let total = self.value(theta)?;
        let pen = self.spec.penalty.as_ref().map_or(T::zero(), |p| p.value(theta));
        Ok((total - pen, pen))
    }
}

impl<T: Real> LeastSquares<T> for Objective<'_, T> {
    fn n_params(&self) -> usize {
        self.problem.n_free()
    }

    fn residuals(&self, theta: &[T]) -> Result<Vec<T>> {
        Ok(self.assemble(theta, false)?.0)
    }

    fn residuals_jacobian(&self, theta: &[T]) -> Result<(Vec<T>, Matrix<T>)> {
        let (r, j) = self.assemble(theta, true)?;
        Ok((r, j.expect("requested")))
    }

    fn offset(&self) -> T {
        T::lit(LOG_TERM_SHIFT) * T::lit(self.n_log_rows() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DataPoint, ModelFile};

    fn problem(error: &str) -> Problem {
        let text = crate::model::tests::ABC.replace("error = \"data\"", &format!("error = \"{error}\""));
        let (m, s) = Model::compile(ModelFile::from_toml(&text).unwrap()).unwrap();
        let sigma = (error == "data").then_some(0.1);
        let pts = (0..=10)
            .map(|k| DataPoint { observable: 0, condition: 0, time: 5.0 * k as f64, value: 0.2, sigma })
            .collect();
        let d = Dataset::new(pts, &m).unwrap();
        Problem::new(m, s, d, IntegratorConfig::default()).unwrap()
    }

    #[test]
    fn penalty_is_one_at_the_center_and_zero_on_the_sphere() {
        let center = vec![-1.0f64, -1.0, 0.0];
        for r in [0.1, 1.0, 3.0] {
            let p = RadialPenalty::new(center.clone(), r).unwrap();
            assert_eq!(p.residual(&center), -1.0);
            assert_eq!(p.value(&center), 1.0);
            let on = vec![-1.0, -1.0, r];
            assert_eq!(p.value(&on), 0.0);
        }
    }

    #[test]
    fn penalty_gradient_at_center_points_along_first_masked_coordinate() {
        let p = RadialPenalty::new(vec![0.0f64, 0.0, 0.0], 2.0).unwrap().with_mask(vec![false, true, true]).unwrap();
        assert_eq!(p.residual_gradient(&[0.0, 0.0, 0.0]), vec![0.0, 0.5, 0.0]);
        // unmasked coordinates never enter the norm
        assert_eq!(p.distance(&[5.0, 3.0, 4.0]), 5.0);
    }

    #[test]
    fn data_residual_is_scaled_difference() {
        let pb = problem("data");
        let obj = Objective::<f64>::data_only(&pb);
        let r = obj.residuals(&[-1.0, -1.0, 0.0]).unwrap();
        // at t = 0, B = 0 so the residual is 0.2 / 0.1
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert_eq!(r.len(), 11);
    }

    #[test]
    fn penalized_objective_is_data_plus_one_at_center() {
        let pb = problem("data");
        let c = vec![-1.0f64, -1.0, 0.0];
        let data = Objective::<f64>::data_only(&pb).value(&c).unwrap();
        let pen = Objective::new(&pb, ObjectiveSpec::penalized(RadialPenalty::new(c.clone(), 1.0).unwrap())).unwrap();
        assert_eq!(pen.value(&c).unwrap() - data, 1.0);
    }

    #[test]
    fn log_term_rows_add_two_log_sigma() {
        let pb = problem("0.05 + 0.1*B");
        let theta = [-1.0f64, -1.0, 0.0];
        let with = Objective::<f64>::data_only(&pb);
        let without = Objective::new(&pb, ObjectiveSpec { penalty: None, error_log_term: false }).unwrap();
        let preds = predict(&pb.model, &pb.space, &pb.data, &theta, &pb.integrator, false).unwrap();
        let logs: f64 = preds.iter().map(|p| 2.0 * p.sigma.ln()).sum();
        let d = with.value(&theta).unwrap() - without.value(&theta).unwrap();
        assert!((d - logs).abs() < 1e-9, "{d} vs {logs}");
    }

    #[test]
    fn hessian_is_symmetric() {
        let pb = problem("data");
        let h = Objective::<f64>::data_only(&pb).gauss_newton_hessian(&[-0.7, -1.2, 0.1]).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(h.get(r, c), h.get(c, r));
            }
        }
    }
}
