use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scale on which a parameter is estimated, bounded and penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Log10,
    #[serde(alias = "lin")]
    Linear,
}

impl Scale {
    pub fn to_natural<T: Real>(self, x: T) -> T {
        match self {
            Scale::Log10 => T::lit(10.0).powf(x),
            Scale::Linear => x,
        }
    }

    pub fn from_natural<T: Real>(self, x: T) -> T {
        match self {
            Scale::Log10 => x.log10(),
            Scale::Linear => x,
        }
    }

    /// d(natural)/d(estimation) evaluated at the natural value.
    pub fn chain<T: Real>(self, natural: T) -> T {
        match self {
            Scale::Log10 => T::LN_10() * natural,
            Scale::Linear => T::one(),
        }
    }
}

/// Gaussian prior on the estimation scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub scale: Scale,
    /// Bounds on the estimation scale.
    pub lower: f64,
    pub upper: f64,
    /// Reference value on the natural scale: the default initial guess, or
    /// the held value when the parameter is fixed.
    pub value: f64,
    pub fixed: bool,
    pub prior: Option<Prior>,
}

impl Parameter {
    pub fn estimate(&self) -> f64 {
        self.scale.from_natural(self.value)
    }
}

/// The parameters of a model, with the free/fixed split that defines the
/// optimization vector. All vectors called `theta` elsewhere in the crate
/// hold the free parameters only, on the estimation scale, in declaration
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    params: Vec<Parameter>,
}

impl ParameterSpace {
    pub fn new(params: Vec<Parameter>) -> Result<Self> {
        for p in &params {
            if p.scale == Scale::Log10 && p.value <= 0.0 {
                return Err(Error::Bounds(format!(
                    "log10-scaled parameter `{}` needs a positive value, got {}",
                    p.name, p.value
                )));
            }
            if !p.value.is_finite() {
                return Err(Error::Bounds(format!("parameter `{}` has a non-finite value", p.name)));
            }
            if !p.fixed {
                if !(p.lower < p.upper) || !p.lower.is_finite() || !p.upper.is_finite() {
                    return Err(Error::Bounds(format!(
                        "parameter `{}`: lower bound {} must be finite and below upper bound {}",
                        p.name, p.lower, p.upper
                    )));
                }
                let est = p.estimate();
                if est < p.lower || est > p.upper {
                    return Err(Error::Bounds(format!(
                        "parameter `{}`: value {} (estimation scale {est}) outside [{}, {}]",
                        p.name, p.value, p.lower, p.upper
                    )));
                }
            }
            if let Some(pr) = p.prior {
                if !(pr.sd > 0.0) {
                    return Err(Error::Bounds(format!("parameter `{}`: prior sd must be positive", p.name)));
                }
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Indices (into the full parameter list) of the free parameters.
    pub fn free(&self) -> Vec<usize> {
        (0..self.params.len()).filter(|&i| !self.params[i].fixed).collect()
    }

    pub fn n_free(&self) -> usize {
        self.params.iter().filter(|p| !p.fixed).count()
    }

    pub fn free_names(&self) -> Vec<String> {
        self.params.iter().filter(|p| !p.fixed).map(|p| p.name.clone()).collect()
    }

    /// Position of a parameter within the free vector.
    pub fn free_position(&self, name: &str) -> Option<usize> {
        self.params.iter().filter(|p| !p.fixed).position(|p| p.name == name)
    }

    pub fn lower<T: Real>(&self) -> Vec<T> {
        self.params.iter().filter(|p| !p.fixed).map(|p| T::lit(p.lower)).collect()
    }

    pub fn upper<T: Real>(&self) -> Vec<T> {
        self.params.iter().filter(|p| !p.fixed).map(|p| T::lit(p.upper)).collect()
    }

    /// Reference values of the free parameters on the estimation scale.
    pub fn reference<T: Real>(&self) -> Vec<T> {
        self.params.iter().filter(|p| !p.fixed).map(|p| T::lit(p.estimate())).collect()
    }

    /// Natural-scale values of all parameters, taking free ones from `theta`.
    pub fn natural_all<T: Real>(&self, theta: &[T]) -> Vec<T> {
        debug_assert_eq!(theta.len(), self.n_free());
        let mut it = theta.iter();
        self.params
            .iter()
            .map(|p| {
                if p.fixed {
                    T::lit(p.value)
                } else {
                    p.scale.to_natural(*it.next().expect("theta has one entry per free parameter"))
                }
            })
            .collect()
    }

    /// d(natural)/d(estimation) for each free parameter.
    pub fn chain_free<T: Real>(&self, natural_all: &[T]) -> Vec<T> {
        self.params
            .iter()
            .zip(natural_all)
            .filter(|(p, _)| !p.fixed)
            .map(|(p, &v)| p.scale.chain(v))
            .collect()
    }

    /// Elementwise transform of a full estimation-scale vector to natural scale.
    pub fn to_natural<T: Real>(&self, estimate: &[T]) -> Vec<T> {
        self.params.iter().zip(estimate).map(|(p, &x)| p.scale.to_natural(x)).collect()
    }

    /// Inverse of [`ParameterSpace::to_natural`].
    pub fn from_natural<T: Real>(&self, natural: &[T]) -> Vec<T> {
        self.params.iter().zip(natural).map(|(p, &x)| p.scale.from_natural(x)).collect()
    }

    /// Fixes a free parameter at an estimation-scale value.
    pub fn with_fixed(&self, name: &str, estimate: f64) -> Result<Self> {
        let i = self.index_of(name).ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
        if self.params[i].fixed {
            return Err(Error::Config(format!("parameter `{name}` is already fixed")));
        }
        let mut out = self.clone();
        let p = &mut out.params[i];
        p.value = p.scale.to_natural(estimate);
        p.fixed = true;
        Ok(out)
    }

    /// Replaces the reference values of the free parameters.
    pub fn with_reference<T: Real>(&self, theta: &[T]) -> Self {
        let mut out = self.clone();
        for (p, &x) in out.params.iter_mut().filter(|p| !p.fixed).zip(theta) {
            p.value = p.scale.to_natural(x).to_f64_lossy();
        }
        out
    }
}
