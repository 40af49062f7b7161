//! Symbolic differentiation.

use super::{BinOp, Expr, Func};

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (true, _) => b,
        (_, true) => a,
        _ => Expr::bin(BinOp::Add, a, b),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (is_zero(&a), is_zero(&b)) {
        (_, true) => a,
        (true, _) => neg(b),
        _ => Expr::bin(BinOp::Sub, a, b),
    }
}

fn neg(a: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Const(0.0)
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Const(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::bin(BinOp::Mul, a, b)
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Const(0.0)
    } else if is_one(&b) {
        a
    } else {
        Expr::bin(BinOp::Div, a, b)
    }
}

impl Expr {
    /// Exact derivative with respect to symbol slot `wrt`, simplified only
    /// for multiplication by zero or one and addition of zero.
    pub fn differentiate(&self, wrt: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Sym(i) => Expr::Const(if *i == wrt { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(wrt)),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.as_ref(), b.as_ref());
                match op {
                    BinOp::Add => add(a.differentiate(wrt), b.differentiate(wrt)),
                    BinOp::Sub => sub(a.differentiate(wrt), b.differentiate(wrt)),
                    BinOp::Mul => add(
                        mul(a.differentiate(wrt), b.clone()),
                        mul(a.clone(), b.differentiate(wrt)),
                    ),
                    BinOp::Div => {
                        let da = a.differentiate(wrt);
                        let db = b.differentiate(wrt);
                        if is_zero(&db) {
                            div(da, b.clone())
                        } else {
                            div(
                                sub(mul(da, b.clone()), mul(a.clone(), db)),
                                Expr::bin(BinOp::Pow, b.clone(), Expr::Const(2.0)),
                            )
                        }
                    }
                    // b a^(b-1) a' whenever the exponent does not vary
                    BinOp::Pow if !b.depends_on(wrt) => {
                        let da = a.differentiate(wrt);
                        if is_zero(&da) {
                            return Expr::Const(0.0);
                        }
                        let lowered = match b {
                            Expr::Const(n) if *n == 1.0 => Expr::Const(1.0),
                            Expr::Const(n) => Expr::bin(BinOp::Pow, a.clone(), Expr::Const(n - 1.0)),
                            _ => Expr::bin(BinOp::Pow, a.clone(), sub(b.clone(), Expr::Const(1.0))),
                        };
                        mul(mul(b.clone(), lowered), da)
                    }
                    // a^b = exp(b log a)
                    BinOp::Pow => Expr::Call(
                        Func::Exp,
                        Box::new(Expr::bin(BinOp::Mul, b.clone(), Expr::Call(Func::Log, Box::new(a.clone())))),
                    )
                    .differentiate(wrt),
                }
            }
            Expr::Call(f, a) => {
                let da = a.differentiate(wrt);
                if is_zero(&da) {
                    return Expr::Const(0.0);
                }
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Log => div(Expr::Const(1.0), a.as_ref().clone()),
                    Func::Log10 => div(
                        Expr::Const(1.0),
                        Expr::bin(BinOp::Mul, a.as_ref().clone(), Expr::Const(std::f64::consts::LN_10)),
                    ),
                    Func::Sqrt => div(Expr::Const(0.5), self.clone()),
                };
                mul(outer, da)
            }
        }
    }
}
