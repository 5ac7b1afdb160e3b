//! Expression language for function pieces, region predicates and custom kernels.
//!
//! Expressions are rational functions of the input variables `x1..xn` (and
//! `y1..yn` inside kernel definitions) built from constants, `+ - * /`,
//! integer powers and unary negation. `abs(..)` is accepted only inside
//! region predicates, so every piece formula stays smooth and can be
//! differentiated exactly.

mod diff;
mod parse;
mod predicate;

use std::fmt;

use thiserror::Error;

pub use parse::{parse, parse_predicate, Context, ParseError};
pub use predicate::{CmpOp, Predicate, EQ_TOL};

/// Which argument block a variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarSpace {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index.
    Var(VarSpace, usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Abs(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("variable {space:?}{index} is outside the supplied point (dimension {dim})")]
    DimensionMismatch {
        space: VarSpace,
        index: usize,
        dim: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DiffError {
    #[error("cannot differentiate non-smooth operator in `{0}`")]
    NonSmoothOperator(String),
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn x(index: usize) -> Self {
        Expr::Var(VarSpace::X, index)
    }

    pub fn y(index: usize) -> Self {
        Expr::Var(VarSpace::Y, index)
    }

    /// Evaluate with values for the `x` block only.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_xy(point, &[])
    }

    /// Evaluate with values for both the `x` and `y` blocks.
    pub fn eval_xy(&self, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(space, index) => {
                let block = match space {
                    VarSpace::X => x,
                    VarSpace::Y => y,
                };
                *block.get(*index).ok_or(EvalError::DimensionMismatch {
                    space: *space,
                    index: index + 1,
                    dim: block.len(),
                })?
            }
            Expr::Neg(a) => -a.eval_xy(x, y)?,
            Expr::Add(a, b) => a.eval_xy(x, y)? + b.eval_xy(x, y)?,
            Expr::Sub(a, b) => a.eval_xy(x, y)? - b.eval_xy(x, y)?,
            Expr::Mul(a, b) => a.eval_xy(x, y)? * b.eval_xy(x, y)?,
            Expr::Div(a, b) => {
                let num = a.eval_xy(x, y)?;
                let den = b.eval_xy(x, y)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval_xy(x, y)?;
                if *k < 0 && base == 0.0 {
                    return Err(EvalError::DivisionByZero(self.to_string()));
                }
                base.powi(*k)
            }
            Expr::Abs(a) => a.eval_xy(x, y)?.abs(),
        })
    }

    /// Largest variable index used in each block, as a count (`max index + 1`).
    pub fn arity(&self) -> (usize, usize) {
        let mut acc = (0, 0);
        self.visit(&mut |e| {
            if let Expr::Var(space, i) = e {
                match space {
                    VarSpace::X => acc.0 = acc.0.max(i + 1),
                    VarSpace::Y => acc.1 = acc.1.max(i + 1),
                }
            }
        });
        acc
    }

    pub fn is_smooth(&self) -> bool {
        let mut smooth = true;
        self.visit(&mut |e| {
            if matches!(e, Expr::Abs(_)) {
                smooth = false;
            }
        });
        smooth
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(..) => {}
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Abs(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Negation of the whole expression, without stacking double negations.
    pub fn negated(&self) -> Expr {
        match self {
            Expr::Neg(a) => (**a).clone(),
            Expr::Const(c) => Expr::Const(-c),
            other => Expr::Neg(Box::new(other.clone())),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 => 3,
            Expr::Const(_) | Expr::Var(..) | Expr::Abs(_) => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.fract() == 0.0 && c.abs() < 1e15 {
                    write!(f, "{}", *c as i64)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Expr::Var(VarSpace::X, i) => write!(f, "x{}", i + 1),
            Expr::Var(VarSpace::Y, i) => write!(f, "y{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 4)
            }
            Expr::Add(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " + ")?;
                write_operand(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " - ")?;
                write_operand(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "*")?;
                write_operand(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "/")?;
                write_operand(f, b, 3)
            }
            Expr::Pow(a, k) => {
                write_operand(f, a, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Abs(a) => write!(f, "abs({a})"),
        }
    }
}
