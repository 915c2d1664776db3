use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Norm1,
    Norm2,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "norm1" => Func::Norm1,
            "norm2" => Func::Norm2,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Norm1 => "norm1",
            Func::Norm2 => "norm2",
        }
    }

    /// Inclusive arity bounds.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Func::Sin | Func::Cos | Func::Exp | Func::Log | Func::Abs => (1, 1),
            Func::Min | Func::Max => (2, usize::MAX),
            Func::Norm1 | Func::Norm2 => (1, usize::MAX),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Expression tree. Variables are zero-based coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Constant non-negative integer power, evaluated by repeated
    /// multiplication.
    Pow(Box<Expr>, u32),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *x.get(*i).ok_or_else(|| {
                Error::KindMismatch(format!("variable x{} in a {}-dimensional point", i + 1, x.len()))
            })?,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(base, n) => {
                let b = base.eval(x)?;
                if *n == 0 {
                    1.0
                } else {
                    (1..*n).fold(b, |acc, _| acc * b)
                }
            }
            Expr::Call(f, args) => {
                let first = args[0].eval(x)?;
                match f {
                    Func::Sin => first.sin(),
                    Func::Cos => first.cos(),
                    Func::Exp => first.exp(),
                    Func::Log => {
                        if first <= 0.0 || first.is_nan() {
                            return Err(Error::Domain(format!("log of non-positive value {first}")));
                        }
                        first.ln()
                    }
                    Func::Abs => first.abs(),
                    Func::Min | Func::Max | Func::Norm1 | Func::Norm2 => {
                        let mut acc = match f {
                            Func::Norm1 => first.abs(),
                            Func::Norm2 => first * first,
                            _ => first,
                        };
                        for a in &args[1..] {
                            let v = a.eval(x)?;
                            acc = match f {
                                Func::Min => acc.min(v),
                                Func::Max => acc.max(v),
                                Func::Norm1 => acc + v.abs(),
                                _ => acc + v * v,
                            };
                        }
                        if *f == Func::Norm2 {
                            acc.sqrt()
                        } else {
                            acc
                        }
                    }
                }
            }
        })
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_var(),
            Expr::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }
}

/// Canonical printing: fully parenthesised, variables as `x1…xd`, numbers in
/// shortest round-trip form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(b, n) => write!(f, "({b}^{n})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Ge,
    Lt,
    Gt,
}

impl CmpOp {
    fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }
}

/// Boolean combination of comparisons; `and` binds tighter than `or`.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Cmp(Expr, CmpOp, Expr),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn holds(&self, x: &[f64]) -> Result<bool> {
        Ok(match self {
            Predicate::Cmp(a, op, b) => {
                let (a, b) = (a.eval(x)?, b.eval(x)?);
                match op {
                    CmpOp::Le => a <= b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Gt => a > b,
                }
            }
            Predicate::And(p, q) => p.holds(x)? && q.holds(x)?,
            Predicate::Or(p, q) => p.holds(x)? || q.holds(x)?,
        })
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Predicate::Cmp(a, _, b) => a.max_var().max(b.max_var()),
            Predicate::And(p, q) | Predicate::Or(p, q) => p.max_var().max(q.max_var()),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Predicate::And(p, q) => write!(f, "{p} and {q}"),
            Predicate::Or(p, q) => write!(f, "{p} or {q}"),
        }
    }
}
