//! A small total language for writing functionals on the command line.
//!
//! ```text
//! fn    := '\' NAME '.' body          (λ may replace the backslash)
//! body  := 'if' sum '=' sum 'then' body 'else' body | sum
//! sum   := prod ('+' prod)*
//! prod  := app ('*' app)*
//! app   := NAT | NAME | NAME '(' body ')' | 'succ' '(' body ')' | '(' body ')'
//! ```
//!
//! A function whose variable is only used as a number, like `\x. x*x + 1`,
//! is type 1. A function whose variable is only applied, like
//! `\f. f(f(0)) + 2`, is type 2. There is no recursion, and arithmetic
//! saturates, so every expression denotes a total functional.

use std::fmt;
use std::sync::Arc;

use ctreal::kk::{Nat, Oracle, TotalFn1, TotalFn2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Body {
    Lit(Nat),
    Var,
    Succ(Box<Body>),
    Add(Box<Body>, Box<Body>),
    Mul(Box<Body>, Box<Body>),
    Apply(Box<Body>),
    If(Box<Body>, Box<Body>, Box<Body>, Box<Body>),
}

/// A parsed functional of type level 1 or 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FnExpr {
    var: String,
    body: Arc<Body>,
    level: u8,
    /// The variable does not occur, so the expression fits either level.
    constant: bool,
}

impl FnExpr {
    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn fits(&self, level: u8) -> bool {
        self.level == level || (self.constant && (1..=2).contains(&level))
    }

    pub fn to_fn1(&self) -> Option<TotalFn1> {
        self.fits(1).then(|| {
            let body = self.body.clone();
            TotalFn1::new(move |x| eval(&body, &Env::Num(x)))
        })
    }

    pub fn to_fn2(&self) -> Option<TotalFn2> {
        self.fits(2).then(|| {
            let body = self.body.clone();
            TotalFn2::new(move |o| eval(&body, &Env::Fn(o)))
        })
    }
}

impl fmt::Display for FnExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\\{}. ", self.var)?;
        write_body(f, &self.body, &self.var)
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, b: &Body, var: &str) -> fmt::Result {
    match b {
        Body::Lit(n) => write!(f, "{n}"),
        Body::Var => f.write_str(var),
        Body::Succ(e) => {
            f.write_str("succ(")?;
            write_body(f, e, var)?;
            f.write_str(")")
        }
        Body::Add(a, c) | Body::Mul(a, c) => {
            let op = if matches!(b, Body::Add(..)) { " + " } else { " * " };
            f.write_str("(")?;
            write_body(f, a, var)?;
            f.write_str(op)?;
            write_body(f, c, var)?;
            f.write_str(")")
        }
        Body::Apply(e) => {
            write!(f, "{var}(")?;
            write_body(f, e, var)?;
            f.write_str(")")
        }
        Body::If(a, c, t, e) => {
            f.write_str("(if ")?;
            write_body(f, a, var)?;
            f.write_str(" = ")?;
            write_body(f, c, var)?;
            f.write_str(" then ")?;
            write_body(f, t, var)?;
            f.write_str(" else ")?;
            write_body(f, e, var)?;
            f.write_str(")")
        }
    }
}

enum Env<'a, 'b> {
    Num(Nat),
    Fn(&'a Oracle<'b>),
}

fn eval(b: &Body, env: &Env<'_, '_>) -> Nat {
    match b {
        Body::Lit(n) => *n,
        Body::Var => match env {
            Env::Num(x) => *x,
            Env::Fn(_) => unreachable!("type-2 variables are only applied"),
        },
        Body::Succ(e) => eval(e, env).saturating_add(1),
        Body::Add(a, c) => eval(a, env).saturating_add(eval(c, env)),
        Body::Mul(a, c) => eval(a, env).saturating_mul(eval(c, env)),
        Body::Apply(e) => match env {
            Env::Fn(o) => o.query(eval(e, env)),
            Env::Num(_) => unreachable!("type-1 variables are never applied"),
        },
        Body::If(a, c, t, e) => {
            if eval(a, env) == eval(c, env) {
                eval(t, env)
            } else {
                eval(e, env)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Lambda,
    Dot,
    LParen,
    RParen,
    Plus,
    Star,
    Eq,
    Num(Nat),
    Name(String),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        let single = match c {
            '\\' | 'λ' => Some(Tok::Lambda),
            '.' => Some(Tok::Dot),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '+' => Some(Tok::Plus),
            '*' => Some(Tok::Star),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(t) = single {
            out.push((pos, t));
            chars.next();
        } else if c.is_whitespace() {
            chars.next();
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.peek().filter(|(_, d)| d.is_ascii_digit()) {
                s.push(d);
                chars.next();
            }
            let n = s.parse().map_err(|_| ParseError {
                pos,
                msg: format!("literal {s} does not fit in 64 bits"),
            })?;
            out.push((pos, Tok::Num(n)));
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.peek().filter(|(_, d)| d.is_alphanumeric() || *d == '_') {
                s.push(d);
                chars.next();
            }
            out.push((pos, Tok::Name(s)));
        } else {
            return Err(ParseError {
                pos,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    var: String,
    used_as_number: bool,
    applied: bool,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn keyword(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Name(n)) if n == k) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn body(&mut self) -> Result<Body, ParseError> {
        if self.keyword("if") {
            let a = self.sum()?;
            self.expect(Tok::Eq, "`=`")?;
            let c = self.sum()?;
            if !self.keyword("then") {
                return self.fail("expected `then`");
            }
            let t = self.body()?;
            if !self.keyword("else") {
                return self.fail("expected `else`");
            }
            let e = self.body()?;
            return Ok(Body::If(Box::new(a), Box::new(c), Box::new(t), Box::new(e)));
        }
        self.sum()
    }

    fn sum(&mut self) -> Result<Body, ParseError> {
        let mut acc = self.prod()?;
        while self.eat(&Tok::Plus) {
            acc = Body::Add(Box::new(acc), Box::new(self.prod()?));
        }
        Ok(acc)
    }

    fn prod(&mut self) -> Result<Body, ParseError> {
        let mut acc = self.app()?;
        while self.eat(&Tok::Star) {
            acc = Body::Mul(Box::new(acc), Box::new(self.app()?));
        }
        Ok(acc)
    }

    fn app(&mut self) -> Result<Body, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.at += 1;
                Ok(Body::Lit(n))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let b = self.body()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(b)
            }
            Some(Tok::Name(name)) if matches!(name.as_str(), "if" | "then" | "else") => self.fail(format!(
                "`{name}` cannot start an operand; parenthesize the conditional"
            )),
            Some(Tok::Name(name)) => {
                let start = self.pos();
                self.at += 1;
                let call = self.eat(&Tok::LParen);
                let arg = if call {
                    let a = self.body()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Some(a)
                } else {
                    None
                };
                match (name == self.var, name.as_str(), arg) {
                    (true, _, None) => {
                        self.used_as_number = true;
                        Ok(Body::Var)
                    }
                    (true, _, Some(a)) => {
                        self.applied = true;
                        Ok(Body::Apply(Box::new(a)))
                    }
                    (false, "succ", Some(a)) => Ok(Body::Succ(Box::new(a))),
                    _ => Err(ParseError {
                        pos: start,
                        msg: format!("unknown name `{name}`"),
                    }),
                }
            }
            Some(_) => self.fail("expected a number, a name or `(`"),
            None => self.fail("unexpected end of expression"),
        }
    }
}

/// Parses `\v. body` and infers its type level from how `v` is used.
pub fn parse(src: &str) -> Result<FnExpr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: src.len(),
        var: String::new(),
        used_as_number: false,
        applied: false,
    };
    p.expect(Tok::Lambda, "`\\` to start a function")?;
    p.var = match p.peek().cloned() {
        Some(Tok::Name(n)) if n != "succ" => {
            p.at += 1;
            n
        }
        _ => return p.fail("expected a variable name after `\\`"),
    };
    p.expect(Tok::Dot, "`.` after the variable")?;
    let body = p.body()?;
    if p.at != p.toks.len() {
        return p.fail("trailing input");
    }
    let level = match (p.used_as_number, p.applied) {
        (true, true) => {
            return Err(ParseError {
                pos: 0,
                msg: format!("`{}` is used both as a number and as a function", p.var),
            })
        }
        (false, true) => 2,
        _ => 1,
    };
    Ok(FnExpr {
        var: p.var,
        body: Arc::new(body),
        level,
        constant: !p.used_as_number && !p.applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(s: &str) -> TotalFn1 {
        parse(s).unwrap().to_fn1().unwrap()
    }

    fn f2(s: &str) -> TotalFn2 {
        parse(s).unwrap().to_fn2().unwrap()
    }

    #[test]
    fn level_one() {
        let sq = f1("\\x. x*x + 1");
        assert_eq!((sq.eval(0), sq.eval(3)), (1, 10));
        assert_eq!(f1("λn. succ(succ(n))").eval(5), 7);
        assert_eq!(f1("\\x. 2 + 3 * x").eval(4), 14);
        assert_eq!(f1("\\x. if x = 2 then 9 else x").eval(2), 9);
        assert_eq!(f1("\\x. if x = 2 then 9 else x").eval(3), 3);
        assert_eq!(f1("\\x. 7").eval(100), 7);
        assert_eq!(f2("\\x. 7").eval(&|x| x), 7);
        assert_eq!(f1("\\x. x * 18446744073709551615").eval(2), Nat::MAX);
    }

    #[test]
    fn level_two() {
        let e = parse("\\f. f(f(0)) + 1").unwrap();
        assert_eq!(e.level(), 2);
        assert_eq!(e.to_fn2().unwrap().eval(&|x| x + 2), 5);
        assert_eq!(f2("\\f. f(0) + f(1)").eval(&|x| x + 1), 3);
        assert_eq!(f2("\\f. if f(0) = 0 then f(3) else 1").eval(&|x| x * 2), 6);
        assert!(e.to_fn1().is_none());
    }

    #[test]
    fn errors_name_their_position() {
        let err = parse("\\x. x + y").unwrap_err();
        assert_eq!(err.pos, 8);
        assert_eq!(parse("\\x. g(1) + 1").unwrap_err().pos, 4);
        assert!(parse("x + 1").is_err());
        assert!(parse("\\x. x(x)").is_err());
        assert!(parse("\\x. (x + 1").is_err());
        assert!(parse("\\x. x 1").is_err());
        assert!(parse("\\x. x # 1").is_err());
        assert!(parse("\\x. 99999999999999999999999").is_err());
        assert!(parse("\\x. 1 + if x = 1 then 2 else 3").is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["\\x. x*x + 1", "\\f. if f(0) = 1 then succ(f(2)) else 0"] {
            let e = parse(s).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e);
        }
    }
}
