//! Uniform grids over the transformed domain `𝓟′ = 𝓕(𝓟)` and four-species
//! fields on them.
//!
//! The grid spans the bounding box of `𝓟′` with [`PAD`] extra layers on each
//! side. Nodes whose physical image lies in `𝓟` are [`NodeKind::Inside`].
//! Nodes within one cell of `𝓟` are [`NodeKind::Ghost`]: the operator
//! formulas are evaluated there too, continuing the solution smoothly so that
//! interpolation near the boundary of `𝓟′` stays second order. The remaining
//! nodes are [`NodeKind::Filled`] with a copy of their nearest evaluated node.
//! Norms and checks only look at inside nodes.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::characteristics::{from_eta, to_eta, CharCoords};
use crate::domain_data::SpaceTimeBox;
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Padding layers on each side of the bounding box.
pub const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Inside,
    Ghost,
    Filled,
}

#[derive(Debug)]
pub struct EtaGrid {
    bx: SpaceTimeBox,
    params: ModelParams,
    n: [usize; 3],
    dims: [usize; 3],
    lo: [f64; 3],
    h: [f64; 3],
    kinds: Vec<NodeKind>,
    fill_from: Vec<usize>,
    evaluated: Vec<usize>,
    inside: Vec<usize>,
}

impl EtaGrid {
    /// `n` nodes per axis across the bounding box of `𝓟′`.
    pub fn new(bx: SpaceTimeBox, params: ModelParams, n: usize) -> Result<Arc<Self>> {
        Self::with_resolution(bx, params, [n, n, n])
    }

    pub fn with_resolution(bx: SpaceTimeBox, params: ModelParams, n: [usize; 3]) -> Result<Arc<Self>> {
        if n.iter().any(|&k| k < 2) {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes per axis, got {n:?}")));
        }
        let c = params.c;
        let box_lo = [bx.a1 / c, (bx.a2 - bx.b1) / (2.0 * c), -(bx.b1 + bx.b2) / (2.0 * c)];
        let box_hi = [
            bx.b1 / c,
            0.5 * bx.t + (bx.b2 - bx.a1) / (2.0 * c),
            0.5 * bx.t - (bx.a1 + bx.a2) / (2.0 * c),
        ];
        let h: [f64; 3] = std::array::from_fn(|a| (box_hi[a] - box_lo[a]) / (n[a] - 1) as f64);
        let lo: [f64; 3] = std::array::from_fn(|a| box_lo[a] - PAD as f64 * h[a]);
        let dims: [usize; 3] = std::array::from_fn(|a| n[a] + 2 * PAD);
        let total = dims[0] * dims[1] * dims[2];

        let slack = crate::characteristics::domain_slack(&bx);
        let mt = h[0] + h[1] + h[2] + slack;
        let mx = c * h[0] + slack;
        let my = c * (h[1] + h[2]) + slack;
        let mut kinds = Vec::with_capacity(total);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let eta = CharCoords::new(
                        lo[0] + i as f64 * h[0],
                        lo[1] + j as f64 * h[1],
                        lo[2] + k as f64 * h[2],
                    );
                    let (t, x, y) = from_eta(eta, &params);
                    let kind = if bx.contains(t, x, y, slack) {
                        NodeKind::Inside
                    } else if t >= -mt
                        && t <= bx.t + mt
                        && x >= bx.a1 - mx
                        && x <= bx.b1 + mx
                        && y >= bx.a2 - my
                        && y <= bx.b2 + my
                    {
                        NodeKind::Ghost
                    } else {
                        NodeKind::Filled
                    };
                    kinds.push(kind);
                }
            }
        }
        let evaluated: Vec<usize> = (0..total).filter(|&i| kinds[i] != NodeKind::Filled).collect();
        let inside: Vec<usize> = (0..total).filter(|&i| kinds[i] == NodeKind::Inside).collect();
        if inside.is_empty() {
            return Err(Error::InvalidGrid("no grid node falls inside the domain".into()));
        }
        let fill_from = nearest_sources(dims, &kinds, &evaluated);
        Ok(Arc::new(Self {
            bx,
            params,
            n,
            dims,
            lo,
            h,
            kinds,
            fill_from,
            evaluated,
            inside,
        }))
    }

    pub fn bx(&self) -> &SpaceTimeBox {
        &self.bx
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Nodes per axis across the bounding box (without padding).
    pub fn resolution(&self) -> [usize; 3] {
        self.n
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn origin(&self) -> [f64; 3] {
        self.lo
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        [idx / (self.dims[1] * self.dims[2]), j, k]
    }

    pub(crate) fn strides(&self) -> [usize; 3] {
        [self.dims[1] * self.dims[2], self.dims[2], 1]
    }

    pub fn eta(&self, idx: usize) -> CharCoords {
        let [i, j, k] = self.ijk(idx);
        CharCoords::new(
            self.lo[0] + i as f64 * self.h[0],
            self.lo[1] + j as f64 * self.h[1],
            self.lo[2] + k as f64 * self.h[2],
        )
    }

    /// Physical `(t, x, y)` of a node.
    pub fn physical(&self, idx: usize) -> (f64, f64, f64) {
        from_eta(self.eta(idx), &self.params)
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn inside_nodes(&self) -> &[usize] {
        &self.inside
    }

    /// Inside and ghost nodes, in index order.
    pub fn evaluated_nodes(&self) -> &[usize] {
        &self.evaluated
    }

    pub(crate) fn fill_source(&self, idx: usize) -> usize {
        self.fill_from[idx]
    }

    /// Lower cell corner along axis `a` and the fraction within the cell;
    /// the cell is clamped to the grid so that far points extrapolate.
    #[inline]
    pub(crate) fn locate(&self, a: usize, coord: f64) -> (usize, f64) {
        let mut u = (coord - self.lo[a]) / self.h[a];
        // node images round-trip through physical coordinates with O(ε) error
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        let i = (u.floor().max(0.0) as usize).min(self.dims[a] - 2);
        (i, u - i as f64)
    }

    pub(crate) fn same_as(&self, other: &EtaGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.bx == other.bx && self.params.c == other.params.c)
    }
}

/// Multi-source breadth-first search over face neighbours; ties go to the
/// source reached first in index order.
fn nearest_sources(dims: [usize; 3], kinds: &[NodeKind], evaluated: &[usize]) -> Vec<usize> {
    let total = kinds.len();
    let mut src = vec![usize::MAX; total];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &i in evaluated {
        src[i] = i;
        queue.push_back(i);
    }
    let strides = [dims[1] * dims[2], dims[2], 1];
    while let Some(idx) = queue.pop_front() {
        let coords = [idx / strides[0], (idx / strides[1]) % dims[1], idx % dims[2]];
        for a in 0..3 {
            for up in [false, true] {
                let ok = if up { coords[a] + 1 < dims[a] } else { coords[a] > 0 };
                if !ok {
                    continue;
                }
                let nb = if up { idx + strides[a] } else { idx - strides[a] };
                if src[nb] == usize::MAX {
                    src[nb] = src[idx];
                    queue.push_back(nb);
                }
            }
        }
    }
    src
}

/// Four species values at every node of an [`EtaGrid`].
#[derive(Debug, Clone)]
pub struct EtaField {
    grid: Arc<EtaGrid>,
    values: Vec<[f64; 4]>,
}

impl EtaField {
    pub fn zeros(grid: &Arc<EtaGrid>) -> Self {
        Self::constant(grid, [0.0; 4])
    }

    pub fn constant(grid: &Arc<EtaGrid>, v: [f64; 4]) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![v; grid.len()],
        }
    }

    /// Samples `f(t, x, y)` at the physical image of every node.
    pub fn from_fn(grid: &Arc<EtaGrid>, f: impl Fn(f64, f64, f64) -> [f64; 4]) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let (t, x, y) = grid.physical(i);
                f(t, x, y)
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Arc<EtaGrid>, values: Vec<[f64; 4]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Values at evaluated nodes (index order); filled nodes are copied in.
    pub(crate) fn from_evaluated(grid: &Arc<EtaGrid>, evaluated: Vec<[f64; 4]>) -> Self {
        let mut values = vec![[0.0; 4]; grid.len()];
        for (&idx, v) in grid.evaluated_nodes().iter().zip(evaluated) {
            values[idx] = v;
        }
        for idx in 0..grid.len() {
            if grid.kind(idx) == NodeKind::Filled {
                values[idx] = values[grid.fill_source(idx)];
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<EtaGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 4]] {
        &self.values
    }

    pub fn node(&self, idx: usize) -> [f64; 4] {
        self.values[idx]
    }

    /// Trilinear interpolation at `eta`.
    pub fn sample_eta(&self, eta: CharCoords) -> [f64; 4] {
        let g = &self.grid;
        let e = eta.to_array();
        let (i, fi) = g.locate(0, e[0]);
        let (j, fj) = g.locate(1, e[1]);
        let (k, fk) = g.locate(2, e[2]);
        let [si, sj, _] = g.strides();
        let base = g.index(i, j, k);
        let v = &self.values;
        let mut out = [0.0; 4];
        for (s, o) in out.iter_mut().enumerate() {
            let c00 = lerp(v[base][s], v[base + 1][s], fk);
            let c01 = lerp(v[base + sj][s], v[base + sj + 1][s], fk);
            let c10 = lerp(v[base + si][s], v[base + si + 1][s], fk);
            let c11 = lerp(v[base + si + sj][s], v[base + si + sj + 1][s], fk);
            *o = lerp(lerp(c00, c01, fj), lerp(c10, c11, fj), fi);
        }
        out
    }

    /// Trilinear interpolation at physical `(t, x, y)`.
    pub fn sample(&self, t: f64, x: f64, y: f64) -> [f64; 4] {
        self.sample_eta(to_eta(t, x, y, self.grid.params()))
    }

    /// `max_i ‖M_i‖∞` over inside nodes.
    pub fn sup_norm(&self) -> f64 {
        self.grid
            .inside_nodes()
            .iter()
            .flat_map(|&i| self.values[i])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest species value over inside nodes.
    pub fn min_value(&self) -> f64 {
        self.grid
            .inside_nodes()
            .iter()
            .flat_map(|&i| self.values[i])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn([f64; 4]) -> [f64; 4]) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[inline]
pub(crate) fn lerp(a: f64, b: f64, f: f64) -> f64 {
    a + f * (b - a)
}

/// `max` over species and inside nodes of `|A − B|`.
pub fn sup_distance(a: &EtaField, b: &EtaField) -> Result<f64> {
    if !a.grid.same_as(&b.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(a.grid
        .inside_nodes()
        .iter()
        .flat_map(|&i| (0..4).map(move |s| (a.values[i][s] - b.values[i][s]).abs()))
        .fold(0.0, f64::max))
}
