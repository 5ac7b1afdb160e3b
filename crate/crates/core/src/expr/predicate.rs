use std::fmt;

use super::{EvalError, Expr};

/// Absolute tolerance for `=` comparisons, so piece boundaries are detectable
/// in floating point.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predicate {
    True,
    Cmp(Expr, CmpOp, Expr),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    /// Evaluate with every comparison inflated by `slack`: `a >= b` becomes
    /// `a - b >= -slack`, `a > b` becomes `a - b > -slack`, and `a == b`
    /// becomes `|a - b| <= max(slack, EQ_TOL)`.
    pub fn holds(&self, x: &[f64], slack: f64) -> Result<bool, EvalError> {
        Ok(match self {
            Predicate::True => true,
            Predicate::Cmp(lhs, op, rhs) => {
                let d = lhs.eval(x)? - rhs.eval(x)?;
                match op {
                    CmpOp::Lt => d < slack,
                    CmpOp::Le => d <= slack,
                    CmpOp::Eq => d.abs() <= slack.max(EQ_TOL),
                    CmpOp::Ge => d >= -slack,
                    CmpOp::Gt => d > -slack,
                }
            }
            Predicate::And(a, b) => a.holds(x, slack)? && b.holds(x, slack)?,
            Predicate::Or(a, b) => a.holds(x, slack)? || b.holds(x, slack)?,
        })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => write!(f, "true"),
            Predicate::Cmp(a, op, b) => write!(f, "{a} {} {b}", op.symbol()),
            Predicate::And(a, b) => {
                let side = |f: &mut fmt::Formatter<'_>, p: &Predicate| match p {
                    Predicate::Or(..) => write!(f, "({p})"),
                    _ => write!(f, "{p}"),
                };
                side(f, a)?;
                write!(f, " and ")?;
                side(f, b)
            }
            Predicate::Or(a, b) => write!(f, "{a} or {b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse_predicate;

    #[test]
    fn equality_uses_absolute_tolerance() {
        let p = parse_predicate("x1 = 0", 1).unwrap();
        assert!(p.holds(&[5e-10], 0.0).unwrap());
        assert!(!p.holds(&[5e-9], 0.0).unwrap());
        assert!(p.holds(&[5e-9], 1e-8).unwrap());
    }

    #[test]
    fn slack_inflates_inequalities() {
        let p = parse_predicate("x1 >= 0", 1).unwrap();
        assert!(!p.holds(&[-1e-8], 0.0).unwrap());
        assert!(p.holds(&[-1e-8], 1e-7).unwrap());
        let strict = parse_predicate("x1 > 0", 1).unwrap();
        assert!(!strict.holds(&[0.0], 0.0).unwrap());
        assert!(strict.holds(&[0.0], 1e-7).unwrap());
    }

    #[test]
    fn abs_in_region() {
        let p = parse_predicate("abs(x1) <= 0.5 and x2 > 0", 2).unwrap();
        assert!(p.holds(&[-0.4, 1.0], 0.0).unwrap());
        assert!(!p.holds(&[-0.6, 1.0], 0.0).unwrap());
    }

    #[test]
    fn display_round_trips() {
        let p = parse_predicate("(x1 >= 0 or x2 < 0) and x1 <= 1", 2).unwrap();
        let q = parse_predicate(&p.to_string(), 2).unwrap();
        for pt in [[0.5, 0.5], [-0.5, -0.5], [2.0, -1.0], [-1.0, 1.0]] {
            assert_eq!(p.holds(&pt, 0.0).unwrap(), q.holds(&pt, 0.0).unwrap());
        }
    }
}
