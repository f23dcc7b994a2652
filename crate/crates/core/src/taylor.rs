//! Truncated multivariate Taylor arithmetic.
//!
//! Values carry all mixed partial derivatives up to a fixed total order,
//! propagated exactly through arithmetic and elementary functions. This is
//! the substrate for jets: no finite differences, no expression swell.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

/// Raised when an operation leaves the domain where derivatives exist
/// (log of a nonpositive value, division by zero, `abs` at the kink, ...).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

/// Shared evaluation context: variable count, truncation order, and the
/// precomputed index tables for truncated products.
#[derive(Debug)]
pub struct TaylorCtx {
    dim: usize,
    order: usize,
    /// Multi-indices in graded lexicographic order; entry 0 is the constant.
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// (ia, ib, iout) triples with |alpha| + |beta| <= order.
    mul_table: Vec<(u32, u32, u32)>,
    /// alpha! per index, as f64.
    factorials: Vec<f64>,
}

impl TaylorCtx {
    pub fn new(dim: usize, order: usize) -> Arc<Self> {
        let mut indices = Vec::new();
        for total in 0..=order {
            enumerate_degree(dim, total, &mut Vec::new(), &mut indices);
        }
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, ix)| (ix.clone(), i))
            .collect();
        let mut mul_table = Vec::new();
        for (ia, a) in indices.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (ib, b) in indices.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                let iout = lookup[&sum];
                mul_table.push((ia as u32, ib as u32, iout as u32));
            }
        }
        let factorials = indices
            .iter()
            .map(|ix| ix.iter().map(|&k| factorial(k as usize)).product())
            .collect();
        Arc::new(Self {
            dim,
            order,
            indices,
            lookup,
            mul_table,
            factorials,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    pub fn position(&self, index: &[u8]) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    /// alpha! for the multi-index at `pos`.
    pub fn index_factorial(&self, pos: usize) -> f64 {
        self.factorials[pos]
    }
}

fn enumerate_degree(dim: usize, total: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == dim {
        if total == 0 {
            out.push(prefix.clone());
        }
        return;
    }
    let remaining_slots = dim - prefix.len();
    for v in (0..=total).rev() {
        if remaining_slots == 1 && v != total {
            continue;
        }
        prefix.push(v as u8);
        enumerate_degree(dim, total - v, prefix, out);
        prefix.pop();
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// A truncated Taylor expansion around an implicit base point.
#[derive(Clone)]
pub struct TaylorPoly {
    ctx: Arc<TaylorCtx>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for TaylorPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaylorPoly({:?})", self.coeffs)
    }
}

impl TaylorPoly {
    pub fn constant(ctx: &Arc<TaylorCtx>, v: f64) -> Self {
        let mut coeffs = vec![0.0; ctx.len()];
        coeffs[0] = v;
        Self {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn from_coeffs(ctx: &Arc<TaylorCtx>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), ctx.len());
        Self {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    /// The expansion of the `var`-th coordinate around `base`.
    pub fn variable(ctx: &Arc<TaylorCtx>, var: usize, base: f64) -> Self {
        assert!(var < ctx.dim());
        let mut coeffs = vec![0.0; ctx.len()];
        coeffs[0] = base;
        if ctx.order() >= 1 {
            let mut ix = vec![0u8; ctx.dim()];
            ix[var] = 1;
            coeffs[ctx.position(&ix).expect("order >= 1")] = 1.0;
        }
        Self {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn ctx(&self) -> &Arc<TaylorCtx> {
        &self.ctx
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Partial derivative D^alpha evaluated at the base point.
    pub fn partial(&self, alpha: &[u8]) -> f64 {
        match self.ctx.position(alpha) {
            Some(pos) => self.coeffs[pos] * self.ctx.index_factorial(pos),
            None => panic!("multi-index beyond truncation order"),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            ctx: self.ctx.clone(),
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            ctx: self.ctx.clone(),
            coeffs: self.coeffs.iter().map(|a| c * a).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut coeffs = vec![0.0; self.ctx.len()];
        for &(ia, ib, iout) in &self.ctx.mul_table {
            coeffs[iout as usize] += self.coeffs[ia as usize] * other.coeffs[ib as usize];
        }
        Self {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self, DomainError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn recip(&self) -> Result<Self, DomainError> {
        let u0 = self.value();
        if u0 == 0.0 {
            return Err(DomainError("division by zero".into()));
        }
        // g_k = (-1)^k / u0^{k+1}
        let m = self.ctx.order();
        let mut outer = Vec::with_capacity(m + 1);
        let mut g = 1.0 / u0;
        for _ in 0..=m {
            outer.push(g);
            g *= -1.0 / u0;
        }
        Ok(self.compose_series(&outer))
    }

    /// Composition with an outer univariate series: sum_k g_k (self - self0)^k,
    /// where g_k = f^(k)(self0)/k!.
    fn compose_series(&self, outer: &[f64]) -> Self {
        let mut tilde = self.clone();
        tilde.coeffs[0] = 0.0;
        let mut acc = Self::constant(&self.ctx, *outer.last().unwrap());
        for k in (0..outer.len() - 1).rev() {
            acc = acc.mul(&tilde);
            acc.coeffs[0] += outer[k];
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let m = self.ctx.order();
        let outer: Vec<f64> = (0..=m).map(|k| e / factorial(k)).collect();
        self.compose_series(&outer)
    }

    pub fn ln(&self) -> Result<Self, DomainError> {
        let u0 = self.value();
        if u0 <= 0.0 {
            return Err(DomainError(format!("log of nonpositive value {u0}")));
        }
        let m = self.ctx.order();
        let mut outer = Vec::with_capacity(m + 1);
        outer.push(u0.ln());
        // d^k/du^k ln u = (-1)^{k-1} (k-1)! / u^k, divided by k!.
        let mut p = 1.0 / u0;
        for k in 1..=m {
            outer.push(if k % 2 == 1 { p / k as f64 } else { -p / k as f64 });
            p /= u0;
        }
        Ok(self.compose_series(&outer))
    }

    pub fn sqrt(&self) -> Result<Self, DomainError> {
        let u0 = self.value();
        if u0 < 0.0 {
            return Err(DomainError(format!("sqrt of negative value {u0}")));
        }
        if u0 == 0.0 {
            if self.ctx.order() == 0 {
                return Ok(Self::constant(&self.ctx, 0.0));
            }
            return Err(DomainError("sqrt is not differentiable at 0".into()));
        }
        let m = self.ctx.order();
        // g_k = binom(1/2, k) * u0^{1/2 - k}
        let mut outer = Vec::with_capacity(m + 1);
        let mut binom = 1.0;
        let mut pw = u0.sqrt();
        for k in 0..=m {
            outer.push(binom * pw);
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pw /= u0;
        }
        Ok(self.compose_series(&outer))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let m = self.ctx.order();
        let outer: Vec<f64> = (0..=m).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose_series(&outer)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let m = self.ctx.order();
        let outer: Vec<f64> = (0..=m).map(|k| cycle[k % 4] / factorial(k)).collect();
        self.compose_series(&outer)
    }

    pub fn tanh(&self) -> Self {
        // Derivatives of tanh via the recurrence on polynomials in tanh(u0):
        // f' = 1 - f^2. Build series coefficients numerically.
        let m = self.ctx.order();
        let t0 = self.value().tanh();
        // Represent f^(k)(u0)/k! via the ODE for the series of tanh around u0:
        // with y = tanh(u0 + h), y' = 1 - y^2. Coefficients a_k satisfy
        // (k+1) a_{k+1} = [h^k](1 - y^2).
        let mut a = vec![0.0; m + 1];
        a[0] = t0;
        for k in 0..m {
            // convolution term of y^2 at degree k
            let mut sq = 0.0;
            for j in 0..=k {
                sq += a[j] * a[k - j];
            }
            let rhs = if k == 0 { 1.0 - sq } else { -sq };
            a[k + 1] = rhs / (k as f64 + 1.0);
        }
        self.compose_series(&a)
    }

    pub fn abs(&self) -> Result<Self, DomainError> {
        let u0 = self.value();
        if u0 > 0.0 {
            Ok(self.clone())
        } else if u0 < 0.0 {
            Ok(self.neg())
        } else if self.ctx.order() == 0 {
            Ok(Self::constant(&self.ctx, 0.0))
        } else {
            Err(DomainError("abs is not differentiable at 0".into()))
        }
    }

    pub fn powi(&self, n: i64) -> Result<Self, DomainError> {
        if n == 0 {
            return Ok(Self::constant(&self.ctx, 1.0));
        }
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Self::constant(&self.ctx, 1.0);
        let mut base = self.clone();
        let mut k = n;
        loop {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.mul(&base);
        }
        Ok(acc)
    }

    pub fn powf(&self, p: f64) -> Result<Self, DomainError> {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            return self.powi(p as i64);
        }
        // u^p = exp(p ln u)
        Ok(self.ln()?.scale(p).exp())
    }

    /// Partial derivative as a polynomial one order lower in content;
    /// coefficients beyond the truncation are dropped.
    pub fn derivative(&self, var: usize) -> Self {
        let mut coeffs = vec![0.0; self.ctx.len()];
        for (pos, ix) in self.ctx.indices().iter().enumerate() {
            if ix[var] == 0 {
                continue;
            }
            let mut lower = ix.clone();
            lower[var] -= 1;
            let lpos = self.ctx.position(&lower).unwrap();
            coeffs[lpos] += self.coeffs[pos] * ix[var] as f64;
        }
        Self {
            ctx: self.ctx.clone(),
            coeffs,
        }
    }
}
