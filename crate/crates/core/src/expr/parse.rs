use thiserror::Error;

use super::predicate::{CmpOp, Predicate};
use super::{Expr, VarSpace};

/// Where an expression is going to be used; decides which identifiers are legal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Piece components: `x1..xn`, no `abs`.
    Function,
    /// Custom kernels: `x1..xn` and `y1..yn`, no `abs`.
    Kernel,
    /// Region predicates: `x1..xn`, `abs` allowed.
    Predicate,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("offset {offset}: {message}")]
pub struct ParseError {
    /// Character offset into the source text.
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Cmp(CmpOp),
    And,
    Or,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::End => "end of input".into(),
        other => format!("{other:?}"),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lit: String = chars[start..i].iter().collect();
            let value = lit
                .parse::<f64>()
                .map_err(|_| ParseError::new(start, format!("malformed number `{lit}`")))?;
            out.push((Tok::Num(value), start));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                _ => Tok::Ident(word),
            };
            out.push((tok, start));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
            ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
            ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), 2),
            ('&', Some('&')) => (Tok::And, 2),
            ('|', Some('|')) => (Tok::Or, 2),
            ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
            ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
            ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
            ('≤', _) => (Tok::Cmp(CmpOp::Le), 1),
            ('≥', _) => (Tok::Cmp(CmpOp::Ge), 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) | ('−', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('^', _) => (Tok::Caret, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            _ => {
                return Err(ParseError::new(
                    start,
                    format!("unexpected character `{c}`"),
                ))
            }
        };
        out.push((tok, start));
        i += width;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
    context: Context,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::new(
                self.offset(),
                format!(
                    "expected {}, found {}",
                    describe(&want),
                    describe(self.peek())
                ),
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let parenthesised = *self.peek() == Tok::LParen;
        if parenthesised {
            self.bump();
        }
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
        }
        let k = match self.bump() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => v as i32,
            _ => return Err(ParseError::new(at, "exponent must be an integer literal")),
        };
        if parenthesised {
            self.expect(Tok::RParen)?;
        }
        if *self.peek() == Tok::Caret {
            return Err(ParseError::new(
                self.offset(),
                "chained exponents are ambiguous; add parentheses",
            ));
        }
        Ok(Expr::Pow(Box::new(base), if negative { -k } else { k }))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(&name, at),
            other => Err(ParseError::new(
                at,
                format!("expected an operand, found {}", describe(&other)),
            )),
        }
    }

    fn identifier(&mut self, name: &str, at: usize) -> Result<Expr, ParseError> {
        if name == "abs" {
            if self.context != Context::Predicate {
                return Err(ParseError::new(
                    at,
                    "abs is only allowed in region predicates; split the piece instead",
                ));
            }
            self.expect(Tok::LParen)?;
            let inner = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(Expr::Abs(Box::new(inner)));
        }
        let (space, rest) = match name.split_at(1) {
            ("x", rest) => (VarSpace::X, rest),
            ("y", rest) => (VarSpace::Y, rest),
            _ => return Err(ParseError::new(at, format!("unknown identifier `{name}`"))),
        };
        if space == VarSpace::Y && self.context != Context::Kernel {
            return Err(ParseError::new(
                at,
                format!("`{name}` is only available in kernel definitions"),
            ));
        }
        let index = if rest.is_empty() {
            if self.dim != 1 {
                return Err(ParseError::new(
                    at,
                    format!(
                        "bare `{name}` needs an index when the dimension is {}",
                        self.dim
                    ),
                ));
            }
            1
        } else {
            rest.parse::<usize>()
                .map_err(|_| ParseError::new(at, format!("unknown identifier `{name}`")))?
        };
        if index == 0 || index > self.dim {
            return Err(ParseError::new(
                at,
                format!("variable `{name}` out of range 1..={}", self.dim),
            ));
        }
        Ok(Expr::Var(space, index - 1))
    }

    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Predicate::Or(Box::new(lhs), Box::new(self.conjunction()?));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Predicate, ParseError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Predicate::And(Box::new(lhs), Box::new(self.comparison()?));
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Predicate, ParseError> {
        if let Tok::Ident(word) = self.peek() {
            if word == "true" {
                self.bump();
                return Ok(Predicate::True);
            }
        }
        if *self.peek() == Tok::LParen {
            // `(` opens either a grouped predicate or an arithmetic operand.
            let save = self.pos;
            self.bump();
            if let Ok(inner) = self.predicate() {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    if !matches!(self.peek(), Tok::Cmp(_)) {
                        return Ok(inner);
                    }
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            other => {
                return Err(ParseError::new(
                    self.offset(),
                    format!("expected a comparison operator, found {}", describe(other)),
                ))
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Predicate::Cmp(lhs, op, rhs))
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::End => Ok(()),
            other => Err(ParseError::new(
                self.offset(),
                format!("unexpected {}", describe(other)),
            )),
        }
    }
}

fn parser(text: &str, dim: usize, context: Context) -> Result<Parser, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(0, "empty expression"));
    }
    if dim == 0 {
        return Err(ParseError::new(0, "dimension must be positive"));
    }
    Ok(Parser {
        toks: lex(text)?,
        pos: 0,
        dim,
        context,
    })
}

/// Parse an arithmetic expression over `dim` variables.
pub fn parse(text: &str, dim: usize, context: Context) -> Result<Expr, ParseError> {
    let mut p = parser(text, dim, context)?;
    let e = p.expr()?;
    if let Tok::Cmp(_) = p.peek() {
        return Err(ParseError::new(
            p.offset(),
            "comparison operators are only valid in region predicates",
        ));
    }
    p.finish()?;
    Ok(e)
}

/// Parse a region predicate such as `x1 >= 0 and abs(x2) <= 1`.
pub fn parse_predicate(text: &str, dim: usize) -> Result<Predicate, ParseError> {
    let mut p = parser(text, dim, Context::Predicate)?;
    let pred = p.predicate()?;
    p.finish()?;
    Ok(pred)
}
