//! Evaluation of expression trees over pluggable scalar domains.

use super::{BinOp, Func, Node};
use crate::taylor::{DomainError, TaylorCtx, TaylorPoly};
use num_complex::Complex64;
use std::sync::Arc;

/// A scalar domain the AST can be evaluated over: plain floats, complex
/// values for the holomorphic class, or truncated Taylor expansions for jets.
pub trait EvalDomain {
    type Value: Clone;

    fn constant(&self, v: f64) -> Self::Value;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, DomainError>;
    fn neg(&self, a: &Self::Value) -> Self::Value;
    fn pow(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, DomainError>;
    fn call(&self, f: Func, a: &Self::Value) -> Result<Self::Value, DomainError>;
}

pub(super) fn eval_node<D: EvalDomain>(
    node: &Node,
    domain: &D,
    values: &[D::Value],
) -> Result<D::Value, DomainError> {
    match node {
        Node::Num(v) => Ok(domain.constant(*v)),
        Node::Sym(i) => Ok(values[*i].clone()),
        Node::Neg(a) => Ok(domain.neg(&eval_node(a, domain, values)?)),
        Node::Bin(op, a, b) => {
            let a = eval_node(a, domain, values)?;
            let b = eval_node(b, domain, values)?;
            match op {
                BinOp::Add => Ok(domain.add(&a, &b)),
                BinOp::Sub => Ok(domain.sub(&a, &b)),
                BinOp::Mul => Ok(domain.mul(&a, &b)),
                BinOp::Div => domain.div(&a, &b),
                BinOp::Pow => domain.pow(&a, &b),
            }
        }
        Node::Call(f, a) => domain.call(*f, &eval_node(a, domain, values)?),
    }
}

/// Plain `f64` arithmetic.
pub struct RealDomain;

impl EvalDomain for RealDomain {
    type Value = f64;

    fn constant(&self, v: f64) -> f64 {
        v
    }
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn sub(&self, a: &f64, b: &f64) -> f64 {
        a - b
    }
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn div(&self, a: &f64, b: &f64) -> Result<f64, DomainError> {
        if *b == 0.0 {
            return Err(DomainError("division by zero".into()));
        }
        Ok(a / b)
    }
    fn neg(&self, a: &f64) -> f64 {
        -a
    }
    fn pow(&self, a: &f64, b: &f64) -> Result<f64, DomainError> {
        let r = a.powf(*b);
        if r.is_finite() {
            Ok(r)
        } else {
            Err(DomainError(format!("{a}^{b} is not finite")))
        }
    }
    fn call(&self, f: Func, a: &f64) -> Result<f64, DomainError> {
        let r = match f {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => {
                if *a <= 0.0 {
                    return Err(DomainError(format!("log of nonpositive value {a}")));
                }
                a.ln()
            }
            Func::Sqrt => {
                if *a < 0.0 {
                    return Err(DomainError(format!("sqrt of negative value {a}")));
                }
                a.sqrt()
            }
            Func::Tanh => a.tanh(),
            Func::Abs => a.abs(),
        };
        Ok(r)
    }
}

/// Complex arithmetic for holomorphic patches; `abs` maps to the modulus.
pub struct ComplexDomain;

impl EvalDomain for ComplexDomain {
    type Value = Complex64;

    fn constant(&self, v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }
    fn add(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a + b
    }
    fn sub(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a - b
    }
    fn mul(&self, a: &Complex64, b: &Complex64) -> Complex64 {
        a * b
    }
    fn div(&self, a: &Complex64, b: &Complex64) -> Result<Complex64, DomainError> {
        if b.norm_sqr() == 0.0 {
            return Err(DomainError("division by zero".into()));
        }
        Ok(a / b)
    }
    fn neg(&self, a: &Complex64) -> Complex64 {
        -a
    }
    fn pow(&self, a: &Complex64, b: &Complex64) -> Result<Complex64, DomainError> {
        Ok(a.powc(*b))
    }
    fn call(&self, f: Func, a: &Complex64) -> Result<Complex64, DomainError> {
        let r = match f {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => {
                if a.norm_sqr() == 0.0 {
                    return Err(DomainError("log of zero".into()));
                }
                a.ln()
            }
            Func::Sqrt => a.sqrt(),
            Func::Tanh => a.tanh(),
            Func::Abs => Complex64::new(a.norm(), 0.0),
        };
        Ok(r)
    }
}

/// Truncated Taylor arithmetic; carries the shared context for constants.
pub struct TaylorDomain {
    pub ctx: Arc<TaylorCtx>,
}

impl TaylorDomain {
    pub fn new(ctx: Arc<TaylorCtx>) -> Self {
        Self { ctx }
    }
}

impl EvalDomain for TaylorDomain {
    type Value = TaylorPoly;

    fn constant(&self, v: f64) -> TaylorPoly {
        TaylorPoly::constant(&self.ctx, v)
    }
    fn add(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.add(b)
    }
    fn sub(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.sub(b)
    }
    fn mul(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        a.mul(b)
    }
    fn div(&self, a: &TaylorPoly, b: &TaylorPoly) -> Result<TaylorPoly, DomainError> {
        a.div(b)
    }
    fn neg(&self, a: &TaylorPoly) -> TaylorPoly {
        a.neg()
    }
    fn pow(&self, a: &TaylorPoly, b: &TaylorPoly) -> Result<TaylorPoly, DomainError> {
        // Constant exponents keep integer powers exact on any base sign.
        let nonconst = b.coeffs().iter().skip(1).any(|&c| c != 0.0);
        if !nonconst {
            a.powf(b.value())
        } else {
            Ok(a.ln()?.mul(b).exp())
        }
    }
    fn call(&self, f: Func, a: &TaylorPoly) -> Result<TaylorPoly, DomainError> {
        match f {
            Func::Sin => Ok(a.sin()),
            Func::Cos => Ok(a.cos()),
            Func::Exp => Ok(a.exp()),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Tanh => Ok(a.tanh()),
            Func::Abs => a.abs(),
        }
    }
}
