//! Coefficient expressions over the coordinates `x`, `y` and `r = sqrt(x^2 + y^2)`.
//!
//! Grammar: `+ - * / ^` (with `^` right-associative and binding tighter than unary minus),
//! parentheses, numbers, the constants `pi` and `e`, and the functions `sin cos exp abs`
//! (one argument) and `min max` (two or more).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    R,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            _ => n == 1,
        }
    }
}

/// A parsed expression; keeps its source text for round-tripping through JSON.
#[derive(Clone, Debug)]
pub struct Expr {
    src: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(usize, usize),
    Sym(u8),
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    tok: Tok,
    tok_pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self> {
        let mut p = Parser { src, pos: 0, tok: Tok::End, tok_pos: 0 };
        p.advance()?;
        Ok(p)
    }

    fn err<T>(&self, pos: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Expr { pos, msg: msg.into() })
    }

    fn advance(&mut self) -> Result<()> {
        let b = self.src.as_bytes();
        while self.pos < b.len() && b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_pos = self.pos;
        if self.pos == b.len() {
            self.tok = Tok::End;
            return Ok(());
        }
        let c = b[self.pos];
        if c.is_ascii_digit() || c == b'.' {
            let start = self.pos;
            while self.pos < b.len() && (b[self.pos].is_ascii_digit() || b[self.pos] == b'.') {
                self.pos += 1;
            }
            if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
                let mut k = self.pos + 1;
                if k < b.len() && (b[k] == b'+' || b[k] == b'-') {
                    k += 1;
                }
                if k < b.len() && b[k].is_ascii_digit() {
                    while k < b.len() && b[k].is_ascii_digit() {
                        k += 1;
                    }
                    self.pos = k;
                }
            }
            let text = &self.src[start..self.pos];
            match text.parse::<f64>() {
                Ok(v) => self.tok = Tok::Num(v),
                Err(_) => return self.err(start, format!("bad number '{text}'")),
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self.pos < b.len() && (b[self.pos].is_ascii_alphanumeric() || b[self.pos] == b'_') {
                self.pos += 1;
            }
            self.tok = Tok::Ident(start, self.pos);
        } else if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            self.tok = Tok::Sym(c);
        } else {
            let ch = self.src[self.pos..].chars().next().unwrap_or('?');
            return self.err(self.pos, format!("unexpected character '{ch}'"));
        }
        Ok(())
    }

    fn eat(&mut self, s: u8) -> Result<bool> {
        if self.tok == Tok::Sym(s) {
            self.advance()?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'+') => Op::Add,
                Tok::Sym(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Sym(b'*') => Op::Mul,
                Tok::Sym(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-')? {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+')? {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^')? {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let pos = self.tok_pos;
        match self.tok {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Node::Num(v))
            }
            Tok::Sym(b'(') => {
                self.advance()?;
                let e = self.expr()?;
                if !self.eat(b')')? {
                    return self.err(self.tok_pos, "expected ')'");
                }
                Ok(e)
            }
            Tok::Ident(s, t) => {
                let name = &self.src[s..t];
                self.advance()?;
                match name {
                    "x" => return Ok(Node::X),
                    "y" => return Ok(Node::Y),
                    "r" => return Ok(Node::R),
                    "pi" => return Ok(Node::Num(std::f64::consts::PI)),
                    "e" => return Ok(Node::Num(std::f64::consts::E)),
                    _ => {}
                }
                let Some(func) = Func::lookup(name) else {
                    return self.err(pos, format!("unknown name '{name}'"));
                };
                if !self.eat(b'(')? {
                    return self.err(self.tok_pos, format!("expected '(' after {name}"));
                }
                let mut args = vec![self.expr()?];
                while self.eat(b',')? {
                    args.push(self.expr()?);
                }
                if !self.eat(b')')? {
                    return self.err(self.tok_pos, "expected ')' or ','");
                }
                if !func.arity_ok(args.len()) {
                    return self.err(pos, format!("{name} does not take {} argument(s)", args.len()));
                }
                Ok(Node::Call(func, args))
            }
            Tok::End => self.err(pos, "unexpected end of expression"),
            Tok::Sym(c) => self.err(pos, format!("unexpected '{}'", c as char)),
        }
    }
}

fn eval(n: &Node, x: f64, y: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::R => x.hypot(y),
        Node::Neg(a) => -eval(a, x, y),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y), eval(b, x, y));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let mut vals = args.iter().map(|a| eval(a, x, y));
            match f {
                Func::Sin => vals.next().unwrap_or(f64::NAN).sin(),
                Func::Cos => vals.next().unwrap_or(f64::NAN).cos(),
                Func::Exp => vals.next().unwrap_or(f64::NAN).exp(),
                Func::Abs => vals.next().unwrap_or(f64::NAN).abs(),
                Func::Min => vals.fold(f64::INFINITY, f64::min),
                Func::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            }
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser::new(src)?;
        let root = p.expr()?;
        if p.tok != Tok::End {
            return p.err(p.tok_pos, "trailing input");
        }
        Ok(Expr { src: src.to_string(), root })
    }

    /// Value at the point `(x, y)`; radial domains pass `(r, 0)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        eval(&self.root, x, y)
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// `Some(c)` when the expression does not depend on the coordinates.
    pub fn constant(&self) -> Option<f64> {
        fn free(n: &Node) -> bool {
            match n {
                Node::X | Node::Y | Node::R => false,
                Node::Num(_) => true,
                Node::Neg(a) => free(a),
                Node::Bin(_, a, b) => free(a) && free(b),
                Node::Call(_, args) => args.iter().all(free),
            }
        }
        free(&self.root).then(|| self.eval(0.0, 0.0))
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.src)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Expr { src: crate::report::fmt17(v), root: Node::Num(v) }),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}
