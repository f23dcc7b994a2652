//! Expression DSL for time- and parameter-dependent fields.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest,
//! right-associative), unary minus, calls `sin cos exp log sqrt tanh abs`,
//! numeric literals, and declared symbols. Printing is fully parenthesized
//! so that parse-of-print returns a structurally equal tree.

mod eval;
mod parse;

pub use eval::{ComplexDomain, EvalDomain, RealDomain, TaylorDomain};
pub use parse::SyntaxError;

use std::fmt;
use std::sync::Arc;

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
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
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Sym(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its symbol table.
///
/// Symbols are positional: evaluation binds `values[i]` to symbol `i` in
/// declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExpr {
    symbols: Arc<Vec<String>>,
    root: Node,
}

impl FieldExpr {
    /// Parse `source` against the declared symbols.
    pub fn parse(source: &str, symbols: &[&str]) -> Result<Self, SyntaxError> {
        let table: Arc<Vec<String>> = Arc::new(symbols.iter().map(|s| s.to_string()).collect());
        let root = parse::parse(source, &table)?;
        Ok(Self {
            symbols: table,
            root,
        })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Indices of the symbols that actually occur.
    pub fn free_symbols(&self) -> Vec<usize> {
        let mut seen = vec![false; self.symbols.len()];
        fn walk(node: &Node, seen: &mut [bool]) {
            match node {
                Node::Num(_) => {}
                Node::Sym(i) => seen[*i] = true,
                Node::Neg(a) | Node::Call(_, a) => walk(a, seen),
                Node::Bin(_, a, b) => {
                    walk(a, seen);
                    walk(b, seen);
                }
            }
        }
        walk(&self.root, &mut seen);
        seen.iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    /// Evaluate over an arbitrary domain, binding `values[i]` to symbol `i`.
    pub fn eval<D: EvalDomain>(
        &self,
        domain: &D,
        values: &[D::Value],
    ) -> Result<D::Value, crate::taylor::DomainError> {
        assert_eq!(values.len(), self.symbols.len(), "one value per symbol");
        eval::eval_node(&self.root, domain, values)
    }

    /// Plain float evaluation.
    pub fn eval_f64(&self, values: &[f64]) -> Result<f64, crate::taylor::DomainError> {
        self.eval(&RealDomain, values)
    }

    /// Flattened factor list of a (possibly nested) product, for inspection.
    pub fn product_factors(&self) -> Vec<&Node> {
        fn collect<'a>(node: &'a Node, out: &mut Vec<&'a Node>) {
            match node {
                Node::Bin(BinOp::Mul, a, b) => {
                    collect(a, out);
                    collect(b, out);
                }
                other => out.push(other),
            }
        }
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out
    }
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print_node(&self.root, &self.symbols, f)
    }
}

fn print_node(node: &Node, symbols: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) => {
            if *v < 0.0 {
                // keep literals nonnegative so reparse yields the same shape
                write!(f, "(-{:?})", -v)
            } else {
                write!(f, "{v:?}")
            }
        }
        Node::Sym(i) => write!(f, "{}", symbols[*i]),
        Node::Neg(a) => {
            write!(f, "(-")?;
            print_node(a, symbols, f)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            write!(f, "(")?;
            print_node(a, symbols, f)?;
            write!(f, " {} ", op.symbol())?;
            print_node(b, symbols, f)?;
            write!(f, ")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            print_node(a, symbols, f)?;
            write!(f, ")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_reference() {
        let e = FieldExpr::parse("x1", &["t", "x1", "x2"]).unwrap();
        assert_eq!(*e.root(), Node::Sym(1));
    }

    #[test]
    fn product_with_three_factors() {
        let e = FieldExpr::parse("p1*sin(t)*x2", &["t", "x2", "p1"]).unwrap();
        assert_eq!(e.product_factors().len(), 3);
    }

    #[test]
    fn trailing_operator_position() {
        let err = FieldExpr::parse("x1 +", &["x1"]).unwrap_err();
        assert_eq!(err.line, 1);
        assert_eq!(err.column, 5);
    }

    #[test]
    fn undeclared_symbol_rejected() {
        let err = FieldExpr::parse("x1 + q", &["x1"]).unwrap_err();
        assert!(err.to_string().contains('q'));
    }

    #[test]
    fn print_parse_round_trip() {
        let syms = &["t", "x1", "x2", "p1"];
        for src in [
            "p1*sin(t)*x2",
            "-x1^2 + 3.5/(x2 - 1)",
            "exp(-(x1*x1))*tanh(t)",
            "x1^x2^2",
            "sqrt(abs(x1)) - log(p1 + 2)",
        ] {
            let e = FieldExpr::parse(src, syms).unwrap();
            let printed = e.to_string();
            let reparsed = FieldExpr::parse(&printed, syms).unwrap();
            assert_eq!(e, reparsed, "round trip failed for {src} -> {printed}");
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = FieldExpr::parse("-x1^2", &["x1"]).unwrap();
        // -(x1^2), not (-x1)^2
        assert_eq!(e.eval_f64(&[3.0]).unwrap(), -9.0);
        let e = FieldExpr::parse("2 - 3 - 4", &["x1"]).unwrap();
        assert_eq!(e.eval_f64(&[0.0]).unwrap(), -5.0);
        let e = FieldExpr::parse("2^3^2", &["x1"]).unwrap();
        assert_eq!(e.eval_f64(&[0.0]).unwrap(), 512.0);
    }
}
