//! Right-hand-side expressions.
//!
//! Grammar (standard precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | state | func '(' expr ')' | '(' expr ')'
//! state := 'x' digits '@' digits          component @ delay index
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::model::jet::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    pub const CATALOG: [Func; 4] = [Func::Exp, Func::Log, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn lookup(name: &str) -> Option<Func> {
        Self::CATALOG.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// A leaf symbol, before binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Name(String),
    /// `x{component}@{lag index}`.
    State { component: usize, lag: usize },
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Name(s) => f.write_str(s),
            Symbol::State { component, lag } => write!(f, "x{component}@{lag}"),
        }
    }
}

/// Expression tree over leaves of type `L`: [`Symbol`] after parsing,
/// variable slots (`usize`) after binding.
#[derive(Debug, Clone, PartialEq)]
pub enum Node<L> {
    Num(f64),
    Leaf(L),
    Neg(Box<Node<L>>),
    Bin(BinOp, Box<Node<L>>, Box<Node<L>>),
    Call(Func, Box<Node<L>>),
}

pub type Expr = Node<Symbol>;

// Printing precedence levels.
const P_SUM: u8 = 1;
const P_PROD: u8 = 2;
const P_UNARY: u8 = 3;
const P_POW: u8 = 4;
const P_ATOM: u8 = 5;

impl<L> Node<L> {
    fn precedence(&self) -> u8 {
        match self {
            Node::Num(v) if *v < 0.0 || v.is_sign_negative() => P_UNARY,
            Node::Num(_) | Node::Leaf(_) | Node::Call(..) => P_ATOM,
            Node::Neg(_) => P_UNARY,
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => P_SUM,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => P_PROD,
            Node::Bin(BinOp::Pow, ..) => P_POW,
        }
    }

    /// Canonical text with the minimal parenthesization that reparses to the
    /// same tree.
    pub fn print_with(&self, leaf: &dyn Fn(&L) -> String) -> String {
        let mut out = String::new();
        self.write(&mut out, leaf);
        out
    }

    fn write(&self, out: &mut String, leaf: &dyn Fn(&L) -> String) {
        match self {
            Node::Num(v) => {
                if v.is_sign_negative() {
                    out.push('-');
                }
                out.push_str(&format!("{:?}", v.abs()));
            }
            Node::Leaf(l) => out.push_str(&leaf(l)),
            Node::Neg(a) => {
                out.push('-');
                a.write_at(out, leaf, P_UNARY);
            }
            Node::Bin(op, a, b) => {
                let (lmin, rmin) = match op {
                    BinOp::Add | BinOp::Sub => (P_SUM, P_PROD),
                    BinOp::Mul | BinOp::Div => (P_PROD, P_UNARY),
                    BinOp::Pow => (P_ATOM, P_UNARY),
                };
                a.write_at(out, leaf, lmin);
                out.push_str(op.symbol());
                b.write_at(out, leaf, rmin);
            }
            Node::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out, leaf);
                out.push(')');
            }
        }
    }

    fn write_at(&self, out: &mut String, leaf: &dyn Fn(&L) -> String, min: u8) {
        if self.precedence() < min {
            out.push('(');
            self.write(out, leaf);
            out.push(')');
        } else {
            self.write(out, leaf);
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a L>) {
        match self {
            Node::Num(_) => {}
            Node::Leaf(l) => out.push(l),
            Node::Neg(a) | Node::Call(_, a) => a.collect_leaves(out),
            Node::Bin(_, a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    /// Replaces every leaf through `f`.
    pub fn try_map<M>(&self, f: &mut dyn FnMut(&L) -> Result<M>) -> Result<Node<M>> {
        Ok(match self {
            Node::Num(v) => Node::Num(*v),
            Node::Leaf(l) => Node::Leaf(f(l)?),
            Node::Neg(a) => Node::Neg(Box::new(a.try_map(f)?)),
            Node::Call(g, a) => Node::Call(*g, Box::new(a.try_map(f)?)),
            Node::Bin(op, a, b) => Node::Bin(*op, Box::new(a.try_map(f)?), Box::new(b.try_map(f)?)),
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print_with(&|s: &Symbol| s.to_string()))
    }
}

impl Expr {
    /// Binds symbols to variable slots.
    pub fn bind(&self, resolve: &dyn Fn(&Symbol) -> Option<usize>, names: Vec<String>) -> Result<Bound> {
        let root = self.try_map(&mut |s| resolve(s).ok_or_else(|| Error::UnknownSymbol(s.to_string())))?;
        Ok(Bound { root, names })
    }
}

/// An expression whose leaves are indices into a variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    root: Node<usize>,
    names: Vec<String>,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&self.root))
    }
}

impl Bound {
    fn render(&self, node: &Node<usize>) -> String {
        node.print_with(&|&i: &usize| self.names.get(i).cloned().unwrap_or_else(|| format!("#{i}")))
    }

    /// Number of variable slots the expression was bound against.
    pub fn arity(&self) -> usize {
        self.names.len()
    }

    pub fn eval<S: Scalar>(&self, vars: &[S]) -> Result<S> {
        self.eval_node(&self.root, vars)
    }

    fn non_diff(&self, node: &Node<usize>, reason: &str) -> Error {
        Error::NonDifferentiable {
            expr: self.render(node),
            reason: reason.to_string(),
        }
    }

    fn eval_node<S: Scalar>(&self, node: &Node<usize>, vars: &[S]) -> Result<S> {
        Ok(match node {
            Node::Num(v) => S::constant(*v),
            Node::Leaf(i) => vars[*i],
            Node::Neg(a) => -self.eval_node(a, vars)?,
            Node::Call(f, a) => {
                let x = self.eval_node(a, vars)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Log => {
                        let b = x.base();
                        if b.im == 0.0 && b.re <= 0.0 || b.norm() == 0.0 {
                            return Err(self.non_diff(node, "logarithm of a nonpositive value"));
                        }
                        x.ln()
                    }
                }
            }
            Node::Bin(op, a, b) => {
                let x = self.eval_node(a, vars)?;
                match op {
                    BinOp::Pow => return self.eval_pow(node, x, b, vars),
                    _ => {
                        let y = self.eval_node(b, vars)?;
                        match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            BinOp::Mul => x * y,
                            BinOp::Div => {
                                if y.base().norm() == 0.0 {
                                    return Err(self.non_diff(node, "division by zero"));
                                }
                                x / y
                            }
                            BinOp::Pow => unreachable!(),
                        }
                    }
                }
            }
        })
    }

    fn eval_pow<S: Scalar>(&self, node: &Node<usize>, x: S, exponent: &Node<usize>, vars: &[S]) -> Result<S> {
        if let Some(r) = constant_value(exponent) {
            if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
                if r < 0.0 && x.base().norm() == 0.0 {
                    return Err(self.non_diff(node, "negative power of zero"));
                }
                return Ok(x.powi(r as i32));
            }
            let b = x.base();
            if b.im == 0.0 && b.re <= 0.0 {
                return Err(self.non_diff(node, "fractional power of a nonpositive value"));
            }
            return Ok(x.powf(r));
        }
        let b = x.base();
        if b.im == 0.0 && b.re <= 0.0 || b.norm() == 0.0 {
            return Err(self.non_diff(node, "variable power of a nonpositive value"));
        }
        let y = self.eval_node(exponent, vars)?;
        Ok((y * x.ln()).exp())
    }
}

/// Value of a leaf-free subtree.
fn constant_value(node: &Node<usize>) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        Node::Neg(a) => constant_value(a).map(|v| -v),
        _ => None,
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            let s = *p;
            while bytes.get(*p).is_some_and(|c| c.is_ascii_digit()) {
                *p += 1;
            }
            *p > s
        };
        let mut p = self.pos;
        let int = digits(&mut p);
        let mut frac = false;
        if bytes.get(p) == Some(&b'.') {
            p += 1;
            frac = digits(&mut p);
        }
        if !int && !frac {
            return Err(self.error("malformed number"));
        }
        if matches!(bytes.get(p), Some(b'e' | b'E')) {
            let mut q = p + 1;
            if matches!(bytes.get(q), Some(b'+' | b'-')) {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            } else {
                self.pos = q;
                return Err(self.error("malformed exponent"));
            }
        }
        self.pos = p;
        self.src[start..p]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| Error::Syntax {
                offset: start,
                message: "malformed number".into(),
            })
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'@') {
            let component = name
                .strip_prefix('x')
                .filter(|d| !d.is_empty() && d.bytes().all(|c| c.is_ascii_digit()))
                .and_then(|d| d.parse::<usize>().ok())
                .ok_or(Error::Syntax {
                    offset: start,
                    message: format!("`{name}@` is not a state symbol of the form x<i>@<k>"),
                })?;
            self.pos += 1;
            let lag_start = self.pos;
            while bytes.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let lag = self.src[lag_start..self.pos]
                .parse::<usize>()
                .map_err(|_| self.error("expected a delay index after `@`"))?;
            return Ok(Node::Leaf(Symbol::State { component, lag }));
        }
        let save = self.pos;
        if self.eat(b'(') {
            let f = Func::lookup(name).ok_or_else(|| Error::UnknownFunction(name.to_string()))?;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Node::Call(f, Box::new(arg)));
        }
        self.pos = save;
        Ok(Node::Leaf(Symbol::Name(name.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(s: &str) -> Expr {
        Node::Leaf(Symbol::Name(s.into()))
    }

    #[test]
    fn precedence() {
        let e = parse("a+b*c").unwrap();
        let expected = Node::Bin(
            BinOp::Add,
            Box::new(name("a")),
            Box::new(Node::Bin(BinOp::Mul, Box::new(name("b")), Box::new(name("c")))),
        );
        assert_eq!(e, expected);
        assert_eq!(e.to_string(), "a + b*c");
    }

    #[test]
    fn power_binds_tighter_than_minus() {
        let e = parse("-a^b^c").unwrap();
        assert_eq!(e.to_string(), "-a^b^c");
        match e {
            Node::Neg(inner) => assert!(matches!(*inner, Node::Bin(BinOp::Pow, _, _))),
            _ => panic!("expected negation at the root"),
        }
        assert_eq!(parse("(a^b)^c").unwrap().to_string(), "(a^b)^c");
        assert_eq!(parse("a-(b-c)").unwrap().to_string(), "a - (b - c)");
        assert_eq!(parse("a/(b*c)").unwrap().to_string(), "a/(b*c)");
        assert_eq!(parse("2^-x").unwrap().to_string(), "2.0^-x");
    }

    #[test]
    fn model_expressions() {
        let e = parse("-mu*x0@0 + beta*x0@1*exp(-x0@1)").unwrap();
        assert_eq!(e.to_string(), "-mu*x0@0 + beta*x0@1*exp(-x0@1)");
        let leaves = e.leaves();
        assert!(leaves.contains(&&Symbol::State { component: 0, lag: 1 }));
        let f = parse("1 - k*x0@0*x0@1*x1@0/2").unwrap();
        assert_eq!(parse(&f.to_string()).unwrap(), f);
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3").unwrap(), Node::Num(1.5e-3));
        assert_eq!(parse(".25").unwrap(), Node::Num(0.25));
        assert!(matches!(parse("1e+"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse("a + * b"),
            Err(Error::Syntax {
                offset: 4,
                message: "unexpected character".into()
            })
        );
        assert_eq!(parse("tanh(x)"), Err(Error::UnknownFunction("tanh".into())));
        assert!(matches!(parse("(a"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("y@1"), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("a b"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn evaluation_and_domain_errors() {
        let e = parse("log(a) + 1/b").unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let bound = e
            .bind(
                &|s| match s {
                    Symbol::Name(n) => names.iter().position(|m| m == n),
                    _ => None,
                },
                names.clone(),
            )
            .unwrap();
        let v: f64 = bound.eval(&[1.0f64.exp(), 4.0]).unwrap();
        assert!((v - 1.25).abs() < 1e-15);
        match bound.eval(&[-1.0f64, 4.0]) {
            Err(Error::NonDifferentiable { expr, .. }) => assert_eq!(expr, "log(a)"),
            other => panic!("unexpected {other:?}"),
        }
        match bound.eval(&[1.0f64, 0.0]) {
            Err(Error::NonDifferentiable { expr, .. }) => assert_eq!(expr, "1.0/b"),
            other => panic!("unexpected {other:?}"),
        }
        let unbound = parse("a*zeta").unwrap().bind(&|_| None, vec![]);
        assert_eq!(unbound, Err(Error::UnknownSymbol("a".into())));
    }

    #[test]
    fn powers() {
        let names = vec!["x".to_string()];
        let bind = |t: &str| parse(t).unwrap().bind(&|_| Some(0), names.clone()).unwrap();
        assert_eq!(bind("x^3").eval(&[-2.0f64]).unwrap(), -8.0);
        assert!(bind("x^0.5").eval(&[-2.0f64]).is_err());
        assert!((bind("x^x").eval(&[2.0f64]).unwrap() - 4.0).abs() < 1e-14);
        assert!(bind("x^-1").eval(&[0.0f64]).is_err());
    }
}
