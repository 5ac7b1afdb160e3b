use super::{DiffError, Expr, VarSpace};

// Smart constructors: fold constants and drop neutral elements, nothing more.

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => Expr::Const(p + q),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        (_, Expr::Neg(inner)) => sub(a, (**inner).clone()),
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => Expr::Const(p - q),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        Expr::Mul(c, rest) if matches!(*c, Expr::Const(_)) => {
            let Expr::Const(c) = *c else { unreachable!() };
            Expr::Mul(Box::new(Expr::Const(-c)), rest)
        }
        other => Expr::Neg(Box::new(other)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) => Expr::Const(p * q),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&a, -1.0) => neg(b),
        _ if is_const(&b, -1.0) => neg(a),
        (_, Expr::Const(_)) => Expr::Mul(Box::new(b), Box::new(a)),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(p), Expr::Const(q)) if *q != 0.0 => Expr::Const(p / q),
        _ if is_const(&a, 0.0) => Expr::Const(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match (&a, k) {
        (_, 0) => Expr::Const(1.0),
        (_, 1) => a,
        (Expr::Const(c), _) if *c != 0.0 || k > 0 => Expr::Const(c.powi(k)),
        _ => Expr::Pow(Box::new(a), k),
    }
}

impl Expr {
    /// Symbolic partial derivative with respect to `x_{var+1}` (zero-based `var`).
    pub fn differentiate(&self, var: usize) -> Result<Expr, DiffError> {
        Ok(match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(VarSpace::X, i) if *i == var => Expr::Const(1.0),
            Expr::Var(..) => Expr::Const(0.0),
            Expr::Neg(a) => neg(a.differentiate(var)?),
            Expr::Add(a, b) => add(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Sub(a, b) => sub(a.differentiate(var)?, b.differentiate(var)?),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(var)?, (**b).clone()),
                mul((**a).clone(), b.differentiate(var)?),
            ),
            Expr::Div(a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.differentiate(var)?, (**b).clone()),
                    mul((**a).clone(), b.differentiate(var)?),
                );
                div(num, pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => mul(
                mul(Expr::Const(*k as f64), pow((**a).clone(), k - 1)),
                a.differentiate(var)?,
            ),
            Expr::Abs(_) => return Err(DiffError::NonSmoothOperator(self.to_string())),
        })
    }

    /// Constant-folded copy of the expression.
    pub fn folded(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(..) => self.clone(),
            Expr::Neg(a) => neg(a.folded()),
            Expr::Add(a, b) => add(a.folded(), b.folded()),
            Expr::Sub(a, b) => sub(a.folded(), b.folded()),
            Expr::Mul(a, b) => mul(a.folded(), b.folded()),
            Expr::Div(a, b) => div(a.folded(), b.folded()),
            Expr::Pow(a, k) => pow(a.folded(), *k),
            Expr::Abs(a) => Expr::Abs(Box::new(a.folded())),
        }
    }
}
