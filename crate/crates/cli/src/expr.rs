//! Small arithmetic expressions for data fields.
//!
//! Variables: `x y z` (position) and `nx ny nz` (outward normal on the
//! boundary, zero inside). Functions: `sin cos tan exp log sqrt abs tanh`
//! plus the two-argument `min max pow`. Constant `pi`.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (column {})", self.message, self.column + 1)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }
}

const VARIABLES: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: src.len(),
        };
        let root = p.expr(0)?;
        if let Some(t) = p.peek() {
            return Err(p.error_at(t.col, format!("unexpected {}", t.kind)));
        }
        Ok(Expr { root })
    }

    /// Evaluate at position `x` with outward normal `n`.
    pub fn eval(&self, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        let vars = [x[0], x[1], x[2], n[0], n[1], n[2]];
        eval(&self.root, &vars)
    }

    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
                Node::Call(_, args) => args.iter().all(walk),
            }
        }
        walk(&self.root)
    }
}

fn eval(n: &Node, v: &[f64; 6]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(i) => v[*i],
        Node::Neg(a) => -eval(a, v),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], v);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Tanh => a.tanh(),
                Func::Min => a.min(eval(&args[1], v)),
                Func::Max => a.max(eval(&args[1], v)),
                Func::Pow => a.powf(eval(&args[1], v)),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
    Open,
    Close,
    Comma,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Num(v) => write!(f, "number {v}"),
            Kind::Ident(s) => write!(f, "'{s}'"),
            Kind::Op(c) => write!(f, "'{c}'"),
            Kind::Open => write!(f, "'('"),
            Kind::Close => write!(f, "')'"),
            Kind::Comma => write!(f, "','"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    col: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() || c == '.' {
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
            Kind::Num(text.parse().map_err(|_| ExprError {
                column: start,
                message: format!("malformed number '{text}'"),
            })?)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Kind::Ident(src[start..i].to_string())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Kind::Op(c),
                '(' => Kind::Open,
                ')' => Kind::Close,
                ',' => Kind::Comma,
                _ => {
                    return Err(ExprError {
                        column: start,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            }
        };
        out.push(Token { kind, col: start });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

fn binding(op: char) -> (u8, u8) {
    match op {
        '+' | '-' => (1, 2),
        '*' | '/' => (3, 4),
        // Right associative, binds tighter than unary minus.
        _ => (8, 7),
    }
}

const UNARY: u8 = 5;

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error_at(&self, column: usize, message: String) -> ExprError {
        ExprError { column, message }
    }

    fn expect(&mut self, kind: Kind) -> Result<(), ExprError> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(self.error_at(t.col, format!("expected {kind}, found {}", t.kind))),
            None => Err(self.error_at(self.end, format!("expected {kind} at end of input"))),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ExprError> {
        let mut lhs = self.atom()?;
        while let Some(Token { kind: Kind::Op(op), .. }) = self.peek() {
            let op = *op;
            let (l, r) = binding(op);
            if l < min_bp {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(r)?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let Some(t) = self.next() else {
            return Err(self.error_at(self.end, "unexpected end of input".into()));
        };
        match t.kind {
            Kind::Num(v) => Ok(Node::Num(v)),
            Kind::Op('-') => Ok(Node::Neg(Box::new(self.expr(UNARY)?))),
            Kind::Op('+') => self.expr(UNARY),
            Kind::Open => {
                let e = self.expr(0)?;
                self.expect(Kind::Close)?;
                Ok(e)
            }
            Kind::Ident(name) => {
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                if let Some(i) = VARIABLES.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                let Some(f) = Func::lookup(&name) else {
                    return Err(self.error_at(t.col, format!("unknown identifier '{name}'")));
                };
                self.expect(Kind::Open)?;
                let mut args = vec![self.expr(0)?];
                while matches!(self.peek(), Some(Token { kind: Kind::Comma, .. })) {
                    self.pos += 1;
                    args.push(self.expr(0)?);
                }
                self.expect(Kind::Close)?;
                if args.len() != f.arity() {
                    return Err(self.error_at(
                        t.col,
                        format!("'{name}' takes {} argument(s), got {}", f.arity(), args.len()),
                    ));
                }
                Ok(Node::Call(f, args))
            }
            other => Err(self.error_at(t.col, format!("unexpected {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(&[0.5, 2.0, -1.0], &[1.0, 0.0, 0.0])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("1 - 2 - 3"), -4.0);
        assert_eq!(ev("2 * -3"), -6.0);
        assert_eq!(ev("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x + y * z"), -1.5);
        assert_eq!(ev("0.3 * nx + ny"), 0.3);
        assert_eq!(ev("max(x, y) + min(x, y)"), 2.5);
        assert_eq!(ev("pow(y, 3)"), 8.0);
        assert!((ev("sin(pi / 2)") - 1.0).abs() < 1e-15);
        assert!((ev("sqrt(abs(z)) + log(exp(2))") - 3.0).abs() < 1e-15);
        assert!(Expr::parse("2 * pi").unwrap().is_constant());
        assert!(!Expr::parse("2 * x").unwrap().is_constant());
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("1 + foo").unwrap_err();
        assert_eq!(e.column, 4);
        assert!(e.message.contains("foo"));
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("max(1)").is_err());
        assert!(Expr::parse("sin 1").is_err());
        assert!(Expr::parse("x # 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("1..2").is_err());
    }
}
