//! Covariant derivative towers with symmetrization and the induced fibre
//! norms on jets.
//!
//! A tower at a point collects the section value and its symmetrized
//! covariant derivatives up to some order. Everything is propagated in
//! Taylor arithmetic around the base point, so levels are exact there.

use crate::expr::FieldExpr;
use crate::field::{Fiber, SectionSnapshot};
use crate::patch::{GeometryError, Patch};
use crate::taylor::{DomainError, TaylorCtx, TaylorPoly};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::Arc;

/// One symmetrized level of a tower: `cov_rank` covariant slots plus a value
/// slot of width `fiber_dim` (the patch dimension for vector fields, 1 for
/// scalar functions). Data is indexed [i1, ..., ik, a], row-major.
#[derive(Debug, Clone)]
pub struct TensorLevel {
    pub cov_rank: usize,
    pub dim: usize,
    pub fiber_dim: usize,
    pub data: Vec<f64>,
}

impl TensorLevel {
    pub fn len(&self) -> usize {
        self.dim.pow(self.cov_rank as u32) * self.fiber_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, cov: &[usize], a: usize) -> f64 {
        debug_assert_eq!(cov.len(), self.cov_rank);
        let mut idx = 0usize;
        for &i in cov {
            idx = idx * self.dim + i;
        }
        self.data[idx * self.fiber_dim + a]
    }
}

/// The order-m jet of a section at a point, as symmetrized covariant
/// derivative levels 0..=m.
#[derive(Debug, Clone)]
pub struct JetTower {
    pub point: Vec<f64>,
    pub order: usize,
    pub levels: Vec<TensorLevel>,
}

/// Raw partial derivatives of an expression up to a total order.
#[derive(Debug, Clone)]
pub struct RawJet {
    ctx: Arc<TaylorCtx>,
    /// D^alpha values in the context's multi-index order.
    pub derivatives: Vec<f64>,
}

impl RawJet {
    pub fn multi_indices(&self) -> &[Vec<u8>] {
        self.ctx.indices()
    }

    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        self.derivatives[self.ctx.position(alpha).expect("index within order")]
    }
}

/// Exact partial derivatives of `expr` at `point`, differentiating the
/// symbols listed in `vars` (all other symbols held fixed).
pub fn taylor_jet(
    expr: &FieldExpr,
    point: &[f64],
    vars: &[usize],
    order: usize,
) -> Result<RawJet, DomainError> {
    assert_eq!(point.len(), expr.symbols().len());
    let ctx = TaylorCtx::new(vars.len(), order);
    let domain = crate::expr::TaylorDomain::new(ctx.clone());
    let values: Vec<TaylorPoly> = point
        .iter()
        .enumerate()
        .map(|(i, &v)| match vars.iter().position(|&w| w == i) {
            Some(j) => TaylorPoly::variable(&ctx, j, v),
            None => TaylorPoly::constant(&ctx, v),
        })
        .collect();
    let jet = expr.eval(&domain, &values)?;
    let derivatives = (0..ctx.len())
        .map(|pos| jet.coeffs()[pos] * ctx.index_factorial(pos))
        .collect();
    Ok(RawJet { ctx, derivatives })
}

/// Tensor of Taylor values with `cov_rank` covariant slots and a fiber slot.
/// The working representation for covariant differentiation.
#[derive(Clone)]
pub(crate) struct PolyTensor {
    cov_rank: usize,
    dim: usize,
    fiber_dim: usize,
    comps: Vec<TaylorPoly>,
}

impl PolyTensor {
    fn idx(&self, cov: &[usize], a: usize) -> usize {
        let mut idx = 0usize;
        for &i in cov {
            idx = idx * self.dim + i;
        }
        idx * self.fiber_dim + a
    }

    fn comp(&self, cov: &[usize], a: usize) -> &TaylorPoly {
        &self.comps[self.idx(cov, a)]
    }

    fn cov_tuples(&self) -> Vec<Vec<usize>> {
        index_tuples(self.dim, self.cov_rank)
    }

    /// Covariant derivative: one extra covariant slot in front.
    ///
    /// nabla_i T^a_{j1..jk} = d_i T^a_{j1..jk}
    ///                        + Gamma^a_{ib} T^b_{j1..jk}      (vector fiber)
    ///                        - sum_l Gamma^b_{i j_l} T^a_{..b..}
    fn covariant_derivative(&self, gamma: &[TaylorPoly], ctx: &Arc<TaylorCtx>) -> PolyTensor {
        let n = self.dim;
        let zero = TaylorPoly::constant(ctx, 0.0);
        let mut comps =
            vec![zero; n.pow(self.cov_rank as u32 + 1) * self.fiber_dim];
        let out_rank = self.cov_rank + 1;
        for tuple in index_tuples(n, out_rank) {
            let i = tuple[0];
            let rest = &tuple[1..];
            for a in 0..self.fiber_dim {
                let mut acc = self.comp(rest, a).derivative(i);
                if self.fiber_dim == n {
                    for b in 0..n {
                        let g = &gamma[(a * n + i) * n + b];
                        acc = acc.add(&g.mul(self.comp(rest, b)));
                    }
                }
                for (l, &jl) in rest.iter().enumerate() {
                    for b in 0..n {
                        let g = &gamma[(b * n + i) * n + jl];
                        let mut swapped = rest.to_vec();
                        swapped[l] = b;
                        acc = acc.sub(&g.mul(self.comp(&swapped, a)));
                    }
                }
                let mut idx = 0usize;
                for &v in &tuple {
                    idx = idx * n + v;
                }
                comps[idx * self.fiber_dim + a] = acc;
            }
        }
        PolyTensor {
            cov_rank: out_rank,
            dim: n,
            fiber_dim: self.fiber_dim,
            comps,
        }
    }

    /// Symmetrize over the covariant slots by multiset averaging.
    fn symmetrized(&self, ctx: &Arc<TaylorCtx>) -> PolyTensor {
        if self.cov_rank < 2 {
            return self.clone();
        }
        let mut by_multiset: HashMap<Vec<usize>, Vec<TaylorPoly>> = HashMap::new();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for tuple in self.cov_tuples() {
            let mut key = tuple.clone();
            key.sort_unstable();
            let entry = by_multiset.entry(key.clone()).or_insert_with(|| {
                vec![TaylorPoly::constant(ctx, 0.0); self.fiber_dim]
            });
            for (a, e) in entry.iter_mut().enumerate() {
                *e = e.add(self.comp(&tuple, a));
            }
            *counts.entry(key).or_insert(0) += 1;
        }
        let mut comps = self.comps.clone();
        for tuple in self.cov_tuples() {
            let mut key = tuple.clone();
            key.sort_unstable();
            let mean = &by_multiset[&key];
            let count = counts[&key] as f64;
            for a in 0..self.fiber_dim {
                comps[self.idx(&tuple, a)] = mean[a].scale(1.0 / count);
            }
        }
        PolyTensor {
            comps,
            ..self.clone()
        }
    }

    /// Contract the leading covariant slot with a vector.
    fn contract_first(&self, v: &[f64], ctx: &Arc<TaylorCtx>) -> PolyTensor {
        assert!(self.cov_rank >= 1);
        let n = self.dim;
        let out_rank = self.cov_rank - 1;
        let zero = TaylorPoly::constant(ctx, 0.0);
        let mut comps = vec![zero; n.pow(out_rank as u32) * self.fiber_dim];
        for tuple in index_tuples(n, out_rank) {
            for a in 0..self.fiber_dim {
                let mut acc = TaylorPoly::constant(ctx, 0.0);
                for (i, &vi) in v.iter().enumerate() {
                    let mut full = Vec::with_capacity(self.cov_rank);
                    full.push(i);
                    full.extend_from_slice(&tuple);
                    acc = acc.add(&self.comp(&full, a).scale(vi));
                }
                let mut idx = 0usize;
                for &t in &tuple {
                    idx = idx * n + t;
                }
                comps[idx * self.fiber_dim + a] = acc;
            }
        }
        PolyTensor {
            cov_rank: out_rank,
            dim: n,
            fiber_dim: self.fiber_dim,
            comps,
        }
    }

    fn values(&self) -> TensorLevel {
        TensorLevel {
            cov_rank: self.cov_rank,
            dim: self.dim,
            fiber_dim: self.fiber_dim,
            data: self.comps.iter().map(|p| p.value()).collect(),
        }
    }
}

fn index_tuples(dim: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..rank {
        out = out
            .into_iter()
            .flat_map(|stem: Vec<usize>| {
                (0..dim).map(move |i| {
                    let mut t = stem.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// The raw (unsymmetrized) derivative tensors of a section at `point`, as
/// Taylor tensors in the given context; layer j has j covariant slots.
pub(crate) fn raw_poly_tower(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    point: &[f64],
    ctx: &Arc<TaylorCtx>,
    layers_upto: usize,
) -> Result<Vec<PolyTensor>, GeometryError> {
    let n = patch.dim();
    let gamma = patch.christoffel_jets(point, ctx)?;
    let fiber_dim = match section.fiber() {
        Fiber::Vector => n,
        Fiber::Scalar => 1,
    };
    let comps = section.component_jets(ctx, point)?;
    assert_eq!(comps.len(), fiber_dim, "component count matches fiber");
    let mut layers = Vec::with_capacity(layers_upto + 1);
    layers.push(PolyTensor {
        cov_rank: 0,
        dim: n,
        fiber_dim,
        comps,
    });
    for j in 1..=layers_upto {
        let prev = &layers[j - 1];
        layers.push(prev.covariant_derivative(&gamma, ctx));
    }
    Ok(layers)
}

/// The symmetrized covariant jet of a section at a point: level j is
/// Sym_j applied to the j-th covariant derivative, evaluated at the point.
pub fn covariant_jet_tower(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    point: &[f64],
    order: usize,
) -> Result<JetTower, GeometryError> {
    let ctx = TaylorCtx::new(patch.dim(), order);
    let layers = raw_poly_tower(section, patch, point, &ctx, order)?;
    let levels = layers
        .iter()
        .map(|layer| layer.symmetrized(&ctx).values())
        .collect();
    Ok(JetTower {
        point: point.to_vec(),
        order,
        levels,
    })
}

/// Norm of a directional covariant derivative of the whole jet: the levels
/// are symmetrized, differentiated once more, contracted with `v`, and
/// combined with the same 1/j! weights as the fibre norm. This realizes the
/// derivative characterization of the sectional dilatation.
pub fn directional_jet_derivative_norm(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    point: &[f64],
    order: usize,
    v: &[f64],
) -> Result<f64, GeometryError> {
    let ctx = TaylorCtx::new(patch.dim(), order + 1);
    let gamma = patch.christoffel_jets(point, &ctx)?;
    let layers = raw_poly_tower(section, patch, point, &ctx, order)?;
    let g = patch.metric().at(point)?;
    let mut sum = 0.0;
    let mut weight = 1.0;
    for (j, layer) in layers.iter().enumerate() {
        if j > 0 {
            weight /= j as f64;
        }
        let sym = layer.symmetrized(&ctx);
        let deriv = sym.covariant_derivative(&gamma, &ctx);
        let contracted = deriv.contract_first(v, &ctx).values();
        let q = tensor_norm_squared(&contracted, &g)?;
        sum += weight * weight * q;
    }
    Ok(sum.sqrt())
}

/// Squared induced norm of a tensor level: covariant slots contract with
/// g^{-1}, the vector fiber slot with g. Computed in an orthonormal frame
/// via the Cholesky factor, one mode product per slot.
pub fn tensor_norm_squared(level: &TensorLevel, g: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let n = level.dim;
    let chol = g.clone().cholesky().ok_or(GeometryError::SingularMetric {
        point: vec![],
        min_eigenvalue: crate::patch::min_eigenvalue(g),
    })?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().expect("triangular inverse");
    // covariant slot w: |L^{-1} w|^2 reproduces w^T g^{-1} w
    let mut data = level.data.clone();
    let mut dims: Vec<usize> = vec![n; level.cov_rank];
    dims.push(level.fiber_dim);
    for slot in 0..level.cov_rank {
        data = mode_transform(&data, &dims, slot, |row, col| l_inv[(row, col)]);
    }
    if level.fiber_dim == n {
        // contravariant fiber v: |L^T v|^2 reproduces v^T g v
        let lt = l.transpose();
        let last = dims.len() - 1;
        data = mode_transform(&data, &dims, last, |row, col| lt[(row, col)]);
    }
    Ok(data.iter().map(|v| v * v).sum())
}

/// Apply `out[.., row, ..] = sum_col M[row, col] * in[.., col, ..]` on the
/// given slot of a dense row-major tensor. Slot sizes are square here.
fn mode_transform<M>(data: &[f64], dims: &[usize], slot: usize, m: M) -> Vec<f64>
where
    M: Fn(usize, usize) -> f64,
{
    let size = dims[slot];
    let inner: usize = dims[slot + 1..].iter().product();
    let outer: usize = dims[..slot].iter().product();
    let mut out = vec![0.0; data.len()];
    for o in 0..outer {
        for row in 0..size {
            for col in 0..size {
                let w = m(row, col);
                if w == 0.0 {
                    continue;
                }
                let src = (o * size + col) * inner;
                let dst = (o * size + row) * inner;
                for k in 0..inner {
                    out[dst + k] += w * data[src + k];
                }
            }
        }
    }
    out
}

/// Fibre norm of a jet tower: sqrt of the sum over levels of the induced
/// inner product of (1/j!) level_j with itself.
pub fn jet_fibre_norm(tower: &JetTower, g: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let mut sum = 0.0;
    let mut weight = 1.0;
    for (j, level) in tower.levels.iter().enumerate() {
        if j > 0 {
            weight /= j as f64;
        }
        sum += weight * weight * tensor_norm_squared(level, g)?;
    }
    Ok(sum.sqrt())
}
