//! Scalar arithmetic expressions over state variables `x1..xn`.
//!
//! Expressions house user-defined drifts, control fields and Lyapunov
//! functions. Grammar, from loosest to tightest binding:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right-associative
//! atom    := number | xN | func '(' args ')' | '(' sum ')'
//! ```
//!
//! Functions: `sin cos exp log sqrt tanh abs` (one argument) and
//! `min max` (exactly two). Gradients are central finite differences.

use std::fmt;

use thiserror::Error;

/// Relative finite-difference step used across the crate.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { position: usize, name: String },
    #[error("variable x{index} at position {position} exceeds state dimension {dimension}")]
    VariableOutOfRange {
        position: usize,
        index: usize,
        dimension: usize,
    },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: &'static str },
    #[error("point has dimension {got}, expression expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based variable index (`x1` is `Var(0)`).
    Var(usize),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression bound to a state dimension. Immutable and `Sync`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dimension: usize,
}

impl Expression {
    pub fn parse(source: &str, dimension: usize) -> Result<Self, ParseError> {
        let tokens = lex(source)?;
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut parser = Parser {
            tokens,
            pos: 0,
            dimension,
            end: source.len(),
        };
        let root = parser.sum()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                position: tok.position,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(Expression { root, dimension })
    }

    /// Builds an expression from an already-validated tree.
    pub fn from_node(root: Node, dimension: usize) -> Self {
        Expression { root, dimension }
    }

    pub fn constant(value: f64, dimension: usize) -> Self {
        Expression {
            root: Node::Const(value),
            dimension,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        if point.len() != self.dimension {
            return Err(EvalError::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        eval_node(&self.root, point)
    }

    /// Central-difference gradient. The step along coordinate `i` is
    /// `step * max(1, |x_i|)`.
    pub fn gradient(&self, point: &[f64], step: f64) -> Result<Vec<f64>, EvalError> {
        let mut grad = vec![0.0; point.len()];
        self.gradient_into(point, step, &mut grad)?;
        Ok(grad)
    }

    pub fn gradient_into(&self, point: &[f64], step: f64, out: &mut [f64]) -> Result<(), EvalError> {
        if point.len() != self.dimension {
            return Err(EvalError::DimensionMismatch {
                expected: self.dimension,
                got: point.len(),
            });
        }
        let mut probe = point.to_vec();
        for i in 0..point.len() {
            let h = step * point[i].abs().max(1.0);
            probe[i] = point[i] + h;
            let forward = eval_node(&self.root, &probe)?;
            probe[i] = point[i] - h;
            let backward = eval_node(&self.root, &probe)?;
            probe[i] = point[i];
            out[i] = (forward - backward) / (2.0 * h);
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

/// Fully parenthesized rendering; re-parses to an equivalent tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // a bare `-c` would bind looser than a following `^`
            Node::Const(v) if v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Node::Const(v) => write!(f, "{v:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(inner) => write!(f, "(-{inner})"),
            Node::Binary(op, lhs, rhs) => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Node::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn domain(node: &Node, reason: &'static str) -> EvalError {
    EvalError::Domain {
        expr: node.to_string(),
        reason,
    }
}

fn finite(node: &Node, value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(node, "non-finite result"))
    }
}

fn eval_node(node: &Node, x: &[f64]) -> Result<f64, EvalError> {
    match node {
        Node::Const(v) => Ok(*v),
        Node::Var(i) => Ok(x[*i]),
        Node::Neg(inner) => Ok(-eval_node(inner, x)?),
        Node::Binary(op, lhs, rhs) => {
            let a = eval_node(lhs, x)?;
            let b = eval_node(rhs, x)?;
            let value = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    a / b
                }
                BinaryOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(domain(node, "negative base with non-integer exponent"));
                    }
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            };
            finite(node, value)
        }
        Node::Call(func, args) => {
            let a = eval_node(&args[0], x)?;
            let value = match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if a <= 0.0 {
                        return Err(domain(node, "logarithm of a nonpositive number"));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(node, "square root of a negative number"));
                    }
                    a.sqrt()
                }
                Func::Tanh => a.tanh(),
                Func::Abs => a.abs(),
                Func::Min => a.min(eval_node(&args[1], x)?),
                Func::Max => a.max(eval_node(&args[1], x)?),
            };
            finite(node, value)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("operator `{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    position: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &source[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("number `{text}` is out of range"),
                });
            }
            tokens.push(Token {
                kind: TokenKind::Number(value),
                position: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(source[start..i].to_string()),
                position: start,
            });
            continue;
        }
        let kind = match c {
            '+' | '-' | '*' | '/' | '^' => TokenKind::Op(c),
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    position: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        tokens.push(Token {
            kind,
            position: start,
        });
        i += c.len_utf8();
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dimension: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: TokenKind) -> Result<(), ParseError> {
        match self.next() {
            Some(tok) if tok.kind == want => Ok(()),
            Some(tok) => Err(ParseError::Syntax {
                position: tok.position,
                message: format!("expected {}, found {}", want.describe(), tok.kind.describe()),
            }),
            None => Err(ParseError::Syntax {
                position: self.end,
                message: format!("expected {}, found end of input", want.describe()),
            }),
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        while let Some(c) = self.eat_op(&['+', '-']) {
            let rhs = self.product()?;
            let op = if c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let Some(tok) = self.next() else {
            return Err(ParseError::Syntax {
                position: self.end,
                message: "unexpected end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.identifier(name, tok.position),
            other => Err(ParseError::Syntax {
                position: tok.position,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, position: usize) -> Result<Node, ParseError> {
        if let Some(func) = Func::from_name(&name) {
            self.expect(TokenKind::LParen)?;
            let mut args = vec![self.sum()?];
            while matches!(self.peek(), Some(Token { kind: TokenKind::Comma, .. })) {
                self.pos += 1;
                args.push(self.sum()?);
            }
            self.expect(TokenKind::RParen)?;
            if args.len() != func.arity() {
                return Err(ParseError::Syntax {
                    position,
                    message: format!(
                        "`{}` takes {} argument(s), got {}",
                        func.name(),
                        func.arity(),
                        args.len()
                    ),
                });
            }
            return Ok(Node::Call(func, args));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ParseError::UnknownIdentifier {
                    position,
                    name: name.clone(),
                })?;
                if index == 0 || index > self.dimension {
                    return Err(ParseError::VariableOutOfRange {
                        position,
                        index,
                        dimension: self.dimension,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        Err(ParseError::UnknownIdentifier { position, name })
    }
}
