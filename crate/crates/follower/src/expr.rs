//! Arithmetic expressions in one variable `x`, evaluated together with their
//! first two derivatives.
//!
//! Grammar: `+ - * / ^`, parentheses, unary minus, numbers, `x`, the
//! constants `pi` and `e`, and the functions `exp ln log sqrt sin cos tanh
//! cosh sinh`. `^` is right-associative and binds tighter than unary minus.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse `{source_text}` at column {column}: {message}")]
pub struct ParseError {
    pub source_text: String,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Sinh,
    Cosh,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Value and first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet {
    fn constant(v: f64) -> Jet {
        Jet { v, d1: 0.0, d2: 0.0 }
    }

    /// `g∘self` from `g, g′, g″` at `self.v`.
    fn chain(self, g: f64, gp: f64, gpp: f64) -> Jet {
        Jet {
            v: g,
            d1: gp * self.d1,
            d2: gpp * self.d1 * self.d1 + gp * self.d2,
        }
    }

    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    fn recip(self) -> Jet {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    text: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.text)
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr {
            text: text.to_string(),
            root,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// True when the expression does not mention `x`.
    pub fn is_constant(&self) -> bool {
        !mentions_x(&self.root)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.jet(x).v
    }

    pub fn jet(&self, x: f64) -> Jet {
        eval(&self.root, x)
    }
}

fn mentions_x(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::X => true,
        Node::Neg(a) | Node::Call(_, a) => mentions_x(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            mentions_x(a) || mentions_x(b)
        }
    }
}

fn eval(n: &Node, x: f64) -> Jet {
    match n {
        Node::Num(c) => Jet::constant(*c),
        Node::X => Jet { v: x, d1: 1.0, d2: 0.0 },
        Node::Neg(a) => {
            let a = eval(a, x);
            Jet {
                v: -a.v,
                d1: -a.d1,
                d2: -a.d2,
            }
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            let s = if matches!(n, Node::Add(..)) { 1.0 } else { -1.0 };
            Jet {
                v: a.v + s * b.v,
                d1: a.d1 + s * b.d1,
                d2: a.d2 + s * b.d2,
            }
        }
        Node::Mul(a, b) => eval(a, x).mul(eval(b, x)),
        Node::Div(a, b) => eval(a, x).mul(eval(b, x).recip()),
        Node::Pow(a, b) => {
            let base = eval(a, x);
            if !mentions_x(b) {
                let c = eval(b, x).v;
                let v = base.v;
                base.chain(v.powf(c), c * v.powf(c - 1.0), c * (c - 1.0) * v.powf(c - 2.0))
            } else {
                // a^b = exp(b ln a)
                let ln_a = base.chain(base.v.ln(), 1.0 / base.v, -1.0 / (base.v * base.v));
                let e = eval(b, x).mul(ln_a);
                let g = e.v.exp();
                e.chain(g, g, g)
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, x);
            let v = a.v;
            match f {
                Func::Exp => {
                    let g = v.exp();
                    a.chain(g, g, g)
                }
                Func::Ln => a.chain(v.ln(), 1.0 / v, -1.0 / (v * v)),
                Func::Sqrt => {
                    let s = v.sqrt();
                    a.chain(s, 0.5 / s, -0.25 / (s * v))
                }
                Func::Sin => a.chain(v.sin(), v.cos(), -v.sin()),
                Func::Cos => a.chain(v.cos(), -v.sin(), -v.cos()),
                Func::Tanh => {
                    let t = v.tanh();
                    let s = 1.0 - t * t;
                    a.chain(t, s, -2.0 * t * s)
                }
                Func::Sinh => a.chain(v.sinh(), v.cosh(), v.sinh()),
                Func::Cosh => a.chain(v.cosh(), v.sinh(), v.cosh()),
            }
        }
    }
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            source_text: self.text.to_string(),
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == b'*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_') {
                    self.pos += 1;
                }
                let name = &self.text[start..self.pos];
                match name {
                    "x" => Ok(Node::X),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => {
                        let f = Func::lookup(name).ok_or_else(|| {
                            self.pos = start;
                            self.error(&format!("unknown name `{name}`; the only variable is `x`"))
                        })?;
                        if self.peek() != Some(b'(') {
                            return Err(self.error("expected `(` after function name"));
                        }
                        Ok(Node::Call(f, Box::new(self.atom()?)))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let b = self.bytes;
        let digits = |p: &mut usize| {
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < b.len() && b[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < b.len() && (b[self.pos] == b'e' || b[self.pos] == b'E') {
            let mut q = self.pos + 1;
            if q < b.len() && (b[q] == b'+' || b[q] == b'-') {
                q += 1;
            }
            if q < b.len() && b[q].is_ascii_digit() {
                self.pos = q;
                digits(&mut self.pos);
            }
        }
        self.text[start..self.pos].parse().map(Node::Num).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*3 - 4/2").unwrap();
        assert_eq!(e.eval(0.0), 5.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0), 512.0);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(3.0), -9.0);
        assert_eq!(Expr::parse("1.5e-1*x").unwrap().eval(2.0), 0.3);
        assert!(Expr::parse("0.5").unwrap().is_constant());
    }

    #[test]
    fn derivatives() {
        let x = 0.7;
        let j = Expr::parse("exp(-2*x) + x^3 / sqrt(1 + x)").unwrap().jet(x);
        let s = (1.0 + x).sqrt();
        let f = (-2.0 * x).exp() + x * x * x / s;
        let fp = -2.0 * (-2.0 * x).exp() + 3.0 * x * x / s - 0.5 * x * x * x / (s * s * s);
        assert!(close(j.v, f));
        assert!(close(j.d1, fp));
        // second derivative against a central difference of the first
        let h = 1e-5;
        let e = Expr::parse("exp(-2*x) + x^3 / sqrt(1 + x)").unwrap();
        let fd = (e.jet(x + h).d1 - e.jet(x - h).d1) / (2.0 * h);
        assert!((j.d2 - fd).abs() < 1e-7);
    }

    #[test]
    fn variable_exponent() {
        let j = Expr::parse("x^x").unwrap().jet(2.0);
        assert!(close(j.v, 4.0));
        assert!(close(j.d1, 4.0 * (2f64.ln() + 1.0)));
    }

    #[test]
    fn errors_point_at_the_problem() {
        let e = Expr::parse("1 + y").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(Expr::parse("(1 + x").is_err());
        assert!(Expr::parse("2 x").is_err());
        assert!(Expr::parse("").is_err());
    }
}
