//! Expressions in `x`, `y` and `t` for user-supplied data.
//!
//! Grammar (`^` binds tightest and is right-associative; unary minus binds
//! looser than `^`, so `-x^2 = -(x^2)`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | 'y' | 't' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt | abs
//! ```

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
    pub source: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let col = self.source[..self.pos.min(self.source.len())].chars().count();
        write!(f, "{} at column {}\n  {}\n  {}^", self.msg, col + 1, self.source, " ".repeat(col))
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    T,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression, evaluated at `(x, y, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let err = |pos: usize, msg: String| ParseError {
        pos,
        msg,
        source: src.to_string(),
    };
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                out.push((i, Tok::Op(c)));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| err(start, format!("malformed number `{text}`")))?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(err(i, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.src.len(), |(p, _)| *p)
    }

    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            pos: self.pos(),
            msg: msg.into(),
            source: self.src.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.at += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.at += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.at += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if let Some(Tok::Op('+')) = self.peek() {
            self.at += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.at += 1;
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("unexpected end of expression");
        };
        match tok {
            Tok::Num(v) => {
                self.at += 1;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.at += 1;
                let inner = self.expr()?;
                self.close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "x" | "y" | "t" | "pi" | "e" => {
                        self.at += 1;
                        return Ok(match name.as_str() {
                            "x" => Node::X,
                            "y" => Node::Y,
                            "t" => Node::T,
                            "pi" => Node::Num(std::f64::consts::PI),
                            _ => Node::Num(std::f64::consts::E),
                        });
                    }
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    other => return self.fail(format!("unknown name `{other}`")),
                };
                self.at += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return self.fail(format!("expected `(` after `{name}`"));
                }
                self.at += 1;
                let arg = self.expr()?;
                self.close()?;
                Ok(Node::Call(func, Box::new(arg)))
            }
            Tok::RParen => self.fail("unexpected `)`"),
            Tok::Op(c) => self.fail(format!("unexpected operator `{c}`")),
        }
    }

    fn close(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            self.at += 1;
            Ok(())
        } else {
            self.fail("expected `)`")
        }
    }
}

fn eval(n: &Node, x: f64, y: f64, t: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Y => y,
        Node::T => t,
        Node::Neg(a) => -eval(a, x, y, t),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, y, t), eval(b, x, y, t));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => {
                    if b.fract() == 0.0 && b.abs() <= 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x, y, t);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
            }
        }
    }
}

fn mentions_t(n: &Node) -> bool {
    match n {
        Node::T => true,
        Node::Num(_) | Node::X | Node::Y => false,
        Node::Neg(a) | Node::Call(_, a) => mentions_t(a),
        Node::Bin(_, a, b) => mentions_t(a) || mentions_t(b),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let toks = lex(src)?;
        let mut p = Parser { toks, at: 0, src };
        let root = p.expr()?;
        if p.at < p.toks.len() {
            return p.fail("unexpected trailing input");
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        eval(&self.root, x, y, t)
    }

    pub fn depends_on_time(&self) -> bool {
        mentions_t(&self.root)
    }
}
