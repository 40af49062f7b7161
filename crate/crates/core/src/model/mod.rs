//! Estimation problem definition: states, parameters, conditions, rate
//! equations, observables with their error models, and measured data.
//!
//! Models are declared in TOML:
//!
//! ```toml
//! name = "ABC"
//! inputs = []                     # optional, per-condition constants
//!
//! [[states]]
//! name = "A"
//! init = "A0"                     # number or expression in parameters/inputs
//!
//! [[parameters]]
//! name = "k1"
//! value = 0.1                     # natural scale
//! scale = "log10"                 # or "linear"
//! lower = -5.0                    # estimation scale, default [-5, 3] for log10
//! upper = 3.0
//! fixed = false
//! prior = { mean = -1.0, sd = 0.5 }   # optional, estimation scale
//!
//! [[conditions]]                  # optional; defaults to one condition "default"
//! id = "default"
//! inputs = {}
//!
//! [rates]
//! A = "-k1*A"
//!
//! [[observables]]
//! id = "B"
//! expr = "B"
//! error = "data"                  # or an error-model expression
//! ```

mod data;
mod space;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprlang::{parse, BinOp, Expr, SymbolKind, SymbolTable};

pub use data::{load_data, parse_data, write_data, DataPoint, Dataset};
pub use space::{Parameter, ParameterSpace, Prior, Scale};

/// Name of the time symbol available in rate, observation and error expressions.
pub const TIME_SYMBOL: &str = "t";

const DEFAULT_LOG10_BOUNDS: (f64, f64) = (-5.0, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitValue {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDecl {
    pub name: String,
    pub init: InitValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterDecl {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default)]
    pub fixed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDecl {
    pub id: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableDecl {
    pub id: String,
    pub expr: String,
    /// Error-model expression, or `"data"` to take σ from each data point.
    pub error: String,
}

/// The model file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub states: Vec<StateDecl>,
    pub parameters: Vec<ParameterDecl>,
    #[serde(default)]
    pub conditions: Vec<ConditionDecl>,
    pub rates: BTreeMap<String, String>,
    pub observables: Vec<ObservableDecl>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files always serialize")
    }
}

/// Derivative of an expression with respect to a set of variables, kept
/// sparse: only structurally non-zero entries are stored.
pub type SparseGrad = Vec<(usize, Expr)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub id: String,
    pub inputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub id: String,
    pub expr: Expr,
    /// `None` when σ comes from the data.
    pub error: Option<Expr>,
    pub expr_dx: SparseGrad,
    pub expr_dp: SparseGrad,
    pub error_dx: SparseGrad,
    pub error_dp: SparseGrad,
}

/// A validated, compiled dynamic model.
///
/// Expression environments are laid out as
/// `[states..., parameters (natural scale)..., inputs..., t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub name: String,
    def: ModelFile,
    symbols: SymbolTable,
    state_names: Vec<String>,
    n_params: usize,
    n_inputs: usize,
    pub conditions: Vec<Condition>,
    pub init: Vec<Expr>,
    /// `init_dp[i]`: derivatives of state i's initial value by parameter.
    pub init_dp: Vec<SparseGrad>,
    pub rates: Vec<Expr>,
    pub rate_dx: Vec<SparseGrad>,
    pub rate_dp: Vec<SparseGrad>,
    pub observables: Vec<Observable>,
}

fn schema<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Schema(msg.into()))
}

fn sparse_grad(e: &Expr, offset: usize, count: usize) -> SparseGrad {
    (0..count)
        .filter(|&k| e.depends_on(offset + k))
        .map(|k| (k, e.differentiate(offset + k)))
        .collect()
}

impl Model {
    /// Validates a model file and builds the model and its parameter space.
    pub fn compile(def: ModelFile) -> Result<(Model, ParameterSpace)> {
        let mut symbols = SymbolTable::new();
        let add = |symbols: &mut SymbolTable, name: &str, kind| -> Result<usize> {
            if name == TIME_SYMBOL {
                return schema(format!("`{TIME_SYMBOL}` is reserved for time"));
            }
            symbols.add(name, kind).map_err(Error::Schema)
        };
        if def.states.is_empty() {
            return schema("model declares no states");
        }
        for s in &def.states {
            add(&mut symbols, &s.name, SymbolKind::State)?;
        }
        for p in &def.parameters {
            add(&mut symbols, &p.name, SymbolKind::Parameter)?;
        }
        for u in &def.inputs {
            add(&mut symbols, u, SymbolKind::Input)?;
        }
        symbols.add(TIME_SYMBOL, SymbolKind::Time).map_err(Error::Schema)?;

        let n_states = def.states.len();
        let n_params = def.parameters.len();
        let n_inputs = def.inputs.len();
        let p_off = n_states;

        let parse_in = |ctx: &str, src: &str| -> Result<Expr> {
            parse(src, &symbols).map_err(|e| Error::ExprIn { context: ctx.to_string(), source: e })
        };

        let mut init = Vec::with_capacity(n_states);
        for s in &def.states {
            let e = match &s.init {
                InitValue::Number(v) => Expr::Const(*v),
                InitValue::Expr(src) => parse_in(&format!("initial value of `{}`", s.name), src)?,
            };
            for sym in e.symbols() {
                let kind = symbols.get(sym).kind;
                if kind == SymbolKind::State || kind == SymbolKind::Time {
                    return schema(format!(
                        "initial value of `{}` may only reference parameters and inputs, found `{}`",
                        s.name,
                        symbols.get(sym).name
                    ));
                }
            }
            init.push(e);
        }

        let state_names: Vec<String> = def.states.iter().map(|s| s.name.clone()).collect();
        for name in def.rates.keys() {
            if !state_names.contains(name) {
                return schema(format!("rate given for undeclared state `{name}`"));
            }
        }
        let mut rates = Vec::with_capacity(n_states);
        for s in &def.states {
            let src = def.rates.get(&s.name).ok_or_else(|| Error::Schema(format!("state `{}` has no rate", s.name)))?;
            rates.push(parse_in(&format!("rate of `{}`", s.name), src)?);
        }

        let conditions = if def.conditions.is_empty() {
            if n_inputs > 0 {
                return schema("model declares inputs but no conditions assigning them");
            }
            vec![Condition { id: "default".into(), inputs: vec![] }]
        } else {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for c in &def.conditions {
                if !seen.insert(c.id.clone()) {
                    return schema(format!("condition `{}` declared twice", c.id));
                }
                for k in c.inputs.keys() {
                    if !def.inputs.contains(k) {
                        return schema(format!("condition `{}` assigns undeclared input `{k}`", c.id));
                    }
                }
                let inputs = def
                    .inputs
                    .iter()
                    .map(|u| {
                        c.inputs.get(u).copied().ok_or_else(|| {
                            Error::Schema(format!("condition `{}` does not assign input `{u}`", c.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(Condition { id: c.id.clone(), inputs });
            }
            out
        };

        if def.observables.is_empty() {
            return schema("model declares no observables");
        }
        let mut observables = Vec::new();
        let mut seen = HashSet::new();
        for o in &def.observables {
            if !seen.insert(o.id.clone()) {
                return schema(format!("observable `{}` declared twice", o.id));
            }
            let expr = parse_in(&format!("observable `{}`", o.id), &o.expr)?;
            let error = if o.error.trim() == "data" {
                None
            } else {
                Some(parse_in(&format!("error model of `{}`", o.id), &o.error)?)
            };
            let (error_dx, error_dp) = match &error {
                Some(e) => (sparse_grad(e, 0, n_states), sparse_grad(e, p_off, n_params)),
                None => (vec![], vec![]),
            };
            observables.push(Observable {
                id: o.id.clone(),
                expr_dx: sparse_grad(&expr, 0, n_states),
                expr_dp: sparse_grad(&expr, p_off, n_params),
                expr,
                error,
                error_dx,
                error_dp,
            });
        }

        let params = def
            .parameters
            .iter()
            .map(|p| {
                let (lower, upper) = match (p.scale, p.lower, p.upper) {
                    (_, Some(l), Some(u)) => (l, u),
                    (Scale::Log10, l, u) => (l.unwrap_or(DEFAULT_LOG10_BOUNDS.0), u.unwrap_or(DEFAULT_LOG10_BOUNDS.1)),
                    (Scale::Linear, _, _) if p.fixed => (f64::NEG_INFINITY, f64::INFINITY),
                    (Scale::Linear, _, _) => {
                        return Err(Error::Bounds(format!("linear-scale parameter `{}` needs explicit bounds", p.name)))
                    }
                };
                Ok(Parameter {
                    name: p.name.clone(),
                    scale: p.scale,
                    lower,
                    upper,
                    value: p.value,
                    fixed: p.fixed,
                    prior: p.prior,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let space = ParameterSpace::new(params)?;

        let model = Model {
            name: def.name.clone(),
            init_dp: init.iter().map(|e| sparse_grad(e, p_off, n_params)).collect(),
            rate_dx: rates.iter().map(|e| sparse_grad(e, 0, n_states)).collect(),
            rate_dp: rates.iter().map(|e| sparse_grad(e, p_off, n_params)).collect(),
            init,
            rates,
            observables,
            conditions,
            state_names,
            n_params,
            n_inputs,
            symbols,
            def,
        };
        Ok((model, space))
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Length of an expression environment.
    pub fn env_len(&self) -> usize {
        self.n_states() + self.n_params + self.n_inputs + 1
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn definition(&self) -> &ModelFile {
        &self.def
    }

    pub fn observable_index(&self, id: &str) -> Option<usize> {
        self.observables.iter().position(|o| o.id == id)
    }

    pub fn condition_index(&self, id: &str) -> Option<usize> {
        self.conditions.iter().position(|c| c.id == id)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|s| s == name)
    }

    /// Replaces a parameter by the product of two new free parameters,
    /// injecting a known one-dimensional non-identifiability.
    pub fn with_positive_control(
        &self,
        space: &ParameterSpace,
        transform: &PositiveControlTransform,
    ) -> Result<(Model, ParameterSpace)> {
        apply_positive_control(self, space, transform)
    }
}

/// Loads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, ParameterSpace)> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Model::compile(ModelFile::from_toml(&text)?)
}

/// Replacement of one parameter by a product of two.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveControlTransform {
    pub target: String,
    pub factors: (String, String),
}

impl PositiveControlTransform {
    /// Uses `<target>a` and `<target>b` as factor names.
    pub fn new(target: &str) -> Self {
        Self { target: target.to_string(), factors: (format!("{target}a"), format!("{target}b")) }
    }
}

/// Rewrites the model so that `target` becomes `a*b`. The first factor takes
/// the target's current value and the second starts at one, so the product
/// reproduces the original dynamics; both inherit the target's bounds.
pub fn apply_positive_control(
    model: &Model,
    space: &ParameterSpace,
    transform: &PositiveControlTransform,
) -> Result<(Model, ParameterSpace)> {
    let target_idx = space
        .index_of(&transform.target)
        .ok_or_else(|| Error::UnknownParameter(transform.target.clone()))?;
    let target = &space.params()[target_idx];
    if target.fixed {
        return Err(Error::Config(format!("positive control target `{}` is fixed", target.name)));
    }
    let (fa, fb) = &transform.factors;

    let mut def = model.def.clone();
    // Carry over the current values (e.g. a fitted estimate), not the file's.
    for (decl, p) in def.parameters.iter_mut().zip(space.params()) {
        decl.value = p.value;
        decl.fixed = p.fixed;
    }

    let mut table = model.symbols.clone();
    let a = table.add(fa, SymbolKind::Parameter).map_err(Error::Schema)?;
    let b = table.add(fb, SymbolKind::Parameter).map_err(Error::Schema)?;
    let sym = model.symbols.lookup(&transform.target).expect("parameters are in the symbol table");
    let product = Expr::bin(BinOp::Mul, Expr::Sym(a), Expr::Sym(b));
    let rewrite = |src: &str| -> Result<String> {
        let e = parse(src, &table)?;
        Ok(e.substitute(sym, &product).display(&table).to_string())
    };

    for s in &mut def.states {
        if let InitValue::Expr(src) = &s.init {
            s.init = InitValue::Expr(rewrite(src)?);
        }
    }
    for src in def.rates.values_mut() {
        *src = rewrite(src)?;
    }
    for o in &mut def.observables {
        o.expr = rewrite(&o.expr)?;
        if o.error.trim() != "data" {
            o.error = rewrite(&o.error)?;
        }
    }

    let factor = |name: &str, value: f64| ParameterDecl {
        name: name.to_string(),
        value,
        scale: target.scale,
        lower: Some(target.lower),
        upper: Some(target.upper),
        fixed: false,
        prior: None,
    };
    let pos = def.parameters.iter().position(|p| p.name == transform.target).expect("declared");
    def.parameters.splice(pos..=pos, [factor(fa, target.value), factor(fb, 1.0)]);
    def.name = format!("{}_pc_{}", model.name, transform.target);

    Model::compile(def)
}
