//! Time- and parameter-dependent sections: expression-backed vector fields
//! and scalar functions, plus grid-sampled fields reconstructed from flows.

use crate::expr::{FieldExpr, SyntaxError, TaylorDomain};
use crate::numeric::{lagrange_weights, stencil_start};
use crate::taylor::{DomainError, TaylorCtx, TaylorPoly};
use std::sync::Arc;

/// Whether a section takes values in the tangent bundle or the trivial line
/// bundle. This decides the connection term and the fibre weight in jets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fiber {
    Scalar,
    Vector,
}

/// A parsed field xi(t, x, p): one expression per component over the symbol
/// list `t, x1..xn, p1..pk`. Holomorphic functions use the symbol list
/// `t, z, p1..pk` instead and are evaluated over complex z = x1 + i x2.
#[derive(Debug, Clone)]
pub struct TimeVaryingField {
    components: Vec<FieldExpr>,
    dim: usize,
    n_params: usize,
    fiber: Fiber,
    hol: bool,
}

impl TimeVaryingField {
    fn symbol_names(dim: usize, n_params: usize) -> Vec<String> {
        let mut s = vec!["t".to_string()];
        s.extend((1..=dim).map(|i| format!("x{i}")));
        s.extend((1..=n_params).map(|i| format!("p{i}")));
        s
    }

    fn parse_components(
        sources: &[&str],
        dim: usize,
        n_params: usize,
    ) -> Result<Vec<FieldExpr>, SyntaxError> {
        let names = Self::symbol_names(dim, n_params);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        sources
            .iter()
            .map(|src| FieldExpr::parse(src, &refs))
            .collect()
    }

    /// A vector field: one component expression per patch coordinate.
    pub fn vector_field(
        sources: &[&str],
        dim: usize,
        n_params: usize,
    ) -> Result<Self, SyntaxError> {
        assert_eq!(sources.len(), dim, "one component per coordinate");
        Ok(Self {
            components: Self::parse_components(sources, dim, n_params)?,
            dim,
            n_params,
            fiber: Fiber::Vector,
            hol: false,
        })
    }

    /// A scalar function of (t, x, p).
    pub fn scalar_function(
        source: &str,
        dim: usize,
        n_params: usize,
    ) -> Result<Self, SyntaxError> {
        Ok(Self {
            components: Self::parse_components(&[source], dim, n_params)?,
            dim,
            n_params,
            fiber: Fiber::Scalar,
            hol: false,
        })
    }

    /// A holomorphic function of z = x1 + i x2 over a 2-dimensional patch.
    pub fn hol_function(source: &str, n_params: usize) -> Result<Self, SyntaxError> {
        let mut names = vec!["t".to_string(), "z".to_string()];
        names.extend((1..=n_params).map(|i| format!("p{i}")));
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(Self {
            components: vec![FieldExpr::parse(source, &refs)?],
            dim: 2,
            n_params,
            fiber: Fiber::Scalar,
            hol: true,
        })
    }

    pub fn is_hol(&self) -> bool {
        self.hol
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[FieldExpr] {
        &self.components
    }

    fn bind(&self, t: f64, x: &[f64], p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(p.len(), self.n_params);
        let mut values = Vec::with_capacity(1 + self.dim + self.n_params);
        values.push(t);
        values.extend_from_slice(x);
        values.extend_from_slice(p);
        values
    }

    pub fn eval(&self, t: f64, x: &[f64], p: &[f64]) -> Result<Vec<f64>, DomainError> {
        let values = self.bind(t, x, p);
        self.components
            .iter()
            .map(|c| c.eval_f64(&values))
            .collect()
    }

    /// Fix time and parameters, leaving a section of x alone.
    pub fn snapshot(&self, t: f64, p: &[f64]) -> SectionSnapshot<'_> {
        assert_eq!(p.len(), self.n_params);
        SectionSnapshot {
            field: self,
            t,
            p: p.to_vec(),
        }
    }

    /// Bind parameters for the flow engine.
    pub fn bound<'a>(&'a self, p: &[f64]) -> BoundField<'a> {
        assert_eq!(p.len(), self.n_params);
        BoundField {
            field: self,
            params: p.to_vec(),
        }
    }

    /// Linear combination a*self + b*other, for test fields.
    pub fn eval_difference(
        &self,
        other: &Self,
        t: f64,
        x: &[f64],
        p: &[f64],
        q: &[f64],
    ) -> Result<Vec<f64>, DomainError> {
        let a = self.eval(t, x, p)?;
        let b = other.eval(t, x, q)?;
        Ok(a.iter().zip(&b).map(|(u, v)| u - v).collect())
    }
}

/// A section x -> xi(t0, x, p0) with time and parameters frozen.
#[derive(Debug, Clone)]
pub struct SectionSnapshot<'a> {
    field: &'a TimeVaryingField,
    t: f64,
    p: Vec<f64>,
}

impl<'a> SectionSnapshot<'a> {
    pub fn dim(&self) -> usize {
        self.field.dim
    }

    pub fn fiber(&self) -> Fiber {
        self.field.fiber
    }

    pub fn n_components(&self) -> usize {
        self.field.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.field.eval(self.t, x, &self.p)
    }

    /// Evaluate a holomorphic section at z, with t and p as real constants.
    pub fn eval_complex(&self, z: num_complex::Complex64) -> Result<num_complex::Complex64, DomainError> {
        assert!(self.field.hol, "eval_complex needs a holomorphic field");
        let mut values = vec![num_complex::Complex64::new(self.t, 0.0), z];
        values.extend(self.p.iter().map(|&p| num_complex::Complex64::new(p, 0.0)));
        self.field.components[0].eval(&crate::expr::ComplexDomain, &values)
    }

    /// Component expansions around `x`, with t and p held constant.
    pub fn component_jets(
        &self,
        ctx: &Arc<TaylorCtx>,
        x: &[f64],
    ) -> Result<Vec<TaylorPoly>, DomainError> {
        assert!(!self.field.hol, "holomorphic sections have no real jets");
        assert_eq!(ctx.dim(), self.field.dim);
        let domain = TaylorDomain::new(ctx.clone());
        let mut values = Vec::with_capacity(1 + self.field.dim + self.field.n_params);
        values.push(TaylorPoly::constant(ctx, self.t));
        for (i, &xi) in x.iter().enumerate() {
            values.push(TaylorPoly::variable(ctx, i, xi));
        }
        for &pi in &self.p {
            values.push(TaylorPoly::constant(ctx, pi));
        }
        self.field
            .components
            .iter()
            .map(|c| c.eval(&domain, &values))
            .collect()
    }
}

/// The flow engine's view of a vector field with parameters already bound.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DomainError>;

    fn eval_vec(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, x, &mut out)?;
        Ok(out)
    }

    /// Spatial gradient of component `j`. The default is a central
    /// difference, adequate for contraction planning; expression-backed
    /// fields override it with exact Taylor derivatives.
    fn component_gradient(&self, t: f64, x: &[f64], j: usize) -> Result<Vec<f64>, DomainError> {
        let h = 1e-5;
        let mut grad = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for d in 0..x.len() {
            xp[d] = x[d] + h;
            let up = self.eval_vec(t, &xp)?[j];
            xp[d] = x[d] - h;
            let down = self.eval_vec(t, &xp)?[j];
            xp[d] = x[d];
            grad[d] = (up - down) / (2.0 * h);
        }
        Ok(grad)
    }
}

/// Expression field with parameters bound.
#[derive(Debug, Clone)]
pub struct BoundField<'a> {
    field: &'a TimeVaryingField,
    params: Vec<f64>,
}

impl<'a> VectorField for BoundField<'a> {
    fn dim(&self) -> usize {
        self.field.dim
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DomainError> {
        let values = self.field.bind(t, x, &self.params);
        for (o, c) in out.iter_mut().zip(&self.field.components) {
            *o = c.eval_f64(&values)?;
        }
        Ok(())
    }

    fn component_gradient(&self, t: f64, x: &[f64], j: usize) -> Result<Vec<f64>, DomainError> {
        let ctx = TaylorCtx::new(self.field.dim, 1);
        let domain = TaylorDomain::new(ctx.clone());
        let mut values = Vec::with_capacity(1 + self.field.dim + self.field.n_params);
        values.push(TaylorPoly::constant(&ctx, t));
        for (i, &xi) in x.iter().enumerate() {
            values.push(TaylorPoly::variable(&ctx, i, xi));
        }
        for &pi in &self.params {
            values.push(TaylorPoly::constant(&ctx, pi));
        }
        let jet = self.field.components[j].eval(&domain, &values)?;
        let mut grad = vec![0.0; self.field.dim];
        let mut ix = vec![0u8; self.field.dim];
        for (d, g) in grad.iter_mut().enumerate() {
            ix[d] = 1;
            *g = jet.partial(&ix);
            ix[d] = 0;
        }
        Ok(grad)
    }
}

/// A vector field sampled on a (t, x) product grid, evaluated by 4-point
/// Lagrange interpolation per axis. Queries are clamped to the sampled box.
#[derive(Debug, Clone)]
pub struct SampledField {
    t_nodes: Vec<f64>,
    x_axes: Vec<Vec<f64>>,
    /// Flattened values, shape [t][x1]..[xn][dim].
    values: Vec<f64>,
    dim: usize,
}

impl SampledField {
    pub fn new(t_nodes: Vec<f64>, x_axes: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let dim = x_axes.len();
        let expected: usize = t_nodes.len() * x_axes.iter().map(|a| a.len()).product::<usize>() * dim;
        assert_eq!(values.len(), expected, "sample array shape mismatch");
        Self {
            t_nodes,
            x_axes,
            values,
            dim,
        }
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    pub fn x_axes(&self) -> &[Vec<f64>] {
        &self.x_axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn flat_index(&self, it: usize, ix: &[usize]) -> usize {
        let mut idx = it;
        for (axis, &i) in self.x_axes.iter().zip(ix) {
            idx = idx * axis.len() + i;
        }
        idx * self.dim
    }

    /// Value at exact grid indices.
    pub fn at_nodes(&self, it: usize, ix: &[usize]) -> &[f64] {
        let base = self.flat_index(it, ix);
        &self.values[base..base + self.dim]
    }
}

impl VectorField for SampledField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DomainError> {
        // per-axis stencils of width min(4, len)
        let axes: Vec<&[f64]> = std::iter::once(self.t_nodes.as_slice())
            .chain(self.x_axes.iter().map(|a| a.as_slice()))
            .collect();
        let coords: Vec<f64> = std::iter::once(t).chain(x.iter().cloned()).collect();
        let mut starts = Vec::with_capacity(axes.len());
        let mut weights = Vec::with_capacity(axes.len());
        for (axis, &c) in axes.iter().zip(&coords) {
            let width = axis.len().min(4);
            let s = stencil_start(axis, c, width);
            starts.push(s);
            weights.push(lagrange_weights(&axis[s..s + width], c));
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        // tensor-product accumulation over the stencil
        let mut counters = vec![0usize; axes.len()];
        loop {
            let mut w = 1.0;
            for (d, &c) in counters.iter().enumerate() {
                w *= weights[d][c];
            }
            let it = starts[0] + counters[0];
            let ix: Vec<usize> = (1..axes.len()).map(|d| starts[d] + counters[d]).collect();
            let vals = self.at_nodes(it, &ix);
            for (o, v) in out.iter_mut().zip(vals) {
                *o += w * v;
            }
            // odometer increment
            let mut d = 0;
            loop {
                counters[d] += 1;
                if counters[d] < weights[d].len() {
                    break;
                }
                counters[d] = 0;
                d += 1;
                if d == axes.len() {
                    return Ok(());
                }
            }
        }
    }
}
