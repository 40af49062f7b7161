//! Scalar expression language for rate laws, observation functions and
//! error models.
//!
//! Expressions are parsed against a [`SymbolTable`] and refer to symbols by
//! index, so evaluation takes a flat value slice laid out in table order.

mod diff;
mod parse;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{name}` at position {pos}")]
    UnknownSymbol { name: String, pos: usize },
    #[error("unknown function `{name}` at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    State,
    Parameter,
    Input,
    Time,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    pub name: String,
    pub kind: SymbolKind,
}

/// Ordered set of named symbols; the position of a symbol is its slot in
/// evaluation environments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    index: HashMap<String, usize>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a symbol and returns its slot. Duplicate names are rejected.
    pub fn add(&mut self, name: &str, kind: SymbolKind) -> Result<usize, String> {
        if self.index.contains_key(name) {
            return Err(format!("symbol `{name}` declared twice"));
        }
        let id = self.symbols.len();
        self.symbols.push(Symbol { name: name.to_string(), kind });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: usize) -> &Symbol {
        &self.symbols[id]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Symbol> {
        self.symbols.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Log10,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Log10 => "log10",
            Func::Sqrt => "sqrt",
        }
    }
}

/// Expression tree. `pow(a, b)` and `a ^ b` share the [`BinOp::Pow`] node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Sym(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Evaluates with `env[i]` holding the value of symbol `i`.
    pub fn eval<T: Real>(&self, env: &[T]) -> Result<T, ExprError> {
        let v = match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Sym(i) => env[*i],
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == T::zero() {
                            return Err(ExprError::Domain("division by zero".into()));
                        }
                        x / y
                    }
                    BinOp::Pow => pow(x, y)?,
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(env)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Log | Func::Log10 if x <= T::zero() => {
                        return Err(ExprError::Domain(format!("{}({x}) of non-positive argument", f.name())));
                    }
                    Func::Log => x.ln(),
                    Func::Log10 => x.log10(),
                    Func::Sqrt if x < T::zero() => {
                        return Err(ExprError::Domain(format!("sqrt({x}) of negative argument")));
                    }
                    Func::Sqrt => x.sqrt(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite result in `{}`", self.display_raw())))
        }
    }

    /// Slots of all symbols referenced by the expression.
    pub fn symbols(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_symbols(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(i) => out.push(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_symbols(out),
            Expr::Bin(_, a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn depends_on(&self, sym: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(i) => *i == sym,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(sym),
            Expr::Bin(_, a, b) => a.depends_on(sym) || b.depends_on(sym),
        }
    }

    /// Replaces every occurrence of symbol `sym` by `with`.
    pub fn substitute(&self, sym: usize, with: &Expr) -> Expr {
        match self {
            Expr::Sym(i) if *i == sym => with.clone(),
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(sym, with))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.substitute(sym, with))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(sym, with), b.substitute(sym, with)),
        }
    }

    /// Renames symbol slots, e.g. when re-parsing against a different table.
    pub fn remap(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(i) => Expr::Sym(map(*i)),
            Expr::Neg(a) => Expr::Neg(Box::new(a.remap(map))),
            Expr::Call(f, a) => Expr::Call(*f, Box::new(a.remap(map))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.remap(map), b.remap(map)),
        }
    }

    /// Fully parenthesized source text; re-parsing it yields a tree that
    /// evaluates bit-identically.
    pub fn display<'a>(&'a self, table: &'a SymbolTable) -> impl fmt::Display + 'a {
        Printer { expr: self, table: Some(table) }
    }

    fn display_raw(&self) -> String {
        Printer { expr: self, table: None }.to_string()
    }
}

fn pow<T: Real>(x: T, y: T) -> Result<T, ExprError> {
    if x == T::zero() && y < T::zero() {
        return Err(ExprError::Domain("zero raised to a negative power".into()));
    }
    if x < T::zero() {
        if y.fract() != T::zero() {
            return Err(ExprError::Domain(format!("negative base {x} with non-integer exponent {y}")));
        }
        if let Some(n) = y.to_i32() {
            return Ok(x.powi(n));
        }
    }
    Ok(x.powf(y))
}

struct Printer<'a> {
    expr: &'a Expr,
    table: Option<&'a SymbolTable>,
}

impl Printer<'_> {
    fn sub<'b>(&'b self, e: &'b Expr) -> Printer<'b> {
        Printer { expr: e, table: self.table }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            // `{:?}` on f64 is the shortest representation that round-trips
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Sym(i) => match self.table {
                Some(t) => f.write_str(&t.get(*i).name),
                None => write!(f, "${i}"),
            },
            Expr::Neg(a) => write!(f, "(-{})", self.sub(a)),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({} {sym} {})", self.sub(a), self.sub(b))
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), self.sub(a)),
        }
    }
}
