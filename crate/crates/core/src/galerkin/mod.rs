//! Gaussian-weighted staggered-grid discretization (d <= 2) of the gradient,
//! the generator, its Dirichlet realization, the lifted operator on gradient
//! fields, and the block operator coupling them.
//!
//! The discretization is adjoint-exact: the divergence is defined as the
//! weighted adjoint of the difference gradient, so every operator identity
//! below holds at rounding level rather than discretization order. Scalar
//! functions live on grid nodes; the k-th gradient component lives on the grid
//! staggered by half a cell in direction k, which keeps the scheme
//! second-order consistent.
//!
//! All matrices are kept in "flat" coordinates (functions multiplied by the
//! square root of their weights), where weighted inner products become
//! Euclidean and weighted adjoints become plain transposes.

use nalgebra::{DMatrix, DVector};

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::model::OUModel;

mod operator;
mod spectral;

pub use operator::{assemble, Compressed, GridOperator};
pub use spectral::{
    bisectoriality_scan, chaos_spectrum, gr_scan, hinf_norm_probe, ndr_scan, poincare_gap,
    resolvent_estimates, riesz_constants, sym_gen_extremes, BisectorReport, BisectorRow,
    HinfProbe, PoincareMode, ResolventQuad,
};

/// Minimal row-compressed sparse matrix for assembly-time products.
#[derive(Debug, Clone)]
pub struct SparseMat {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
}

impl SparseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rows: vec![Vec::new(); nrows] }
    }

    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        self.rows[r].push((c as u32, v));
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(out.len(), self.nrows);
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, v) in row {
                acc += v * x[c as usize];
            }
            out[r] = acc;
        }
    }

    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(out.len(), self.ncols);
        out.fill(0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for &(c, v) in row {
                out[c as usize] += v * xr;
            }
        }
    }

    /// Dense matrix product: self * dense (column by column).
    pub fn apply_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, m.ncols());
        let mut buf = vec![0.0; self.nrows];
        for j in 0..m.ncols() {
            let col: Vec<f64> = m.column(j).iter().copied().collect();
            self.apply(&col, &mut buf);
            for i in 0..self.nrows {
                out[(i, j)] = buf[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[(r, c as usize)] += v;
            }
        }
        out
    }
}

/// Tensor grid with Gaussian node weights, per-dimension staggered midpoint
/// grids, and an interior mask against a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    pub d: usize,
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    pub truncation_radius: f64,
    /// Node coordinates, row-major (node index, dim).
    pub node_xs: Vec<f64>,
    /// Node weights, positive, summing to one.
    pub w: Vec<f64>,
    pub sqrt_w: Vec<f64>,
    /// Midpoint coordinates for each staggered direction.
    pub mid_xs: Vec<Vec<f64>>,
    /// Midpoint weights (same normalization as the node weights).
    pub wm: Vec<Vec<f64>>,
    /// Interior mask (node inside the domain).
    pub mask: Vec<bool>,
    /// Indices of interior nodes.
    pub interior: Vec<usize>,
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        self.w.len()
    }

    pub fn n_mid(&self, k: usize) -> usize {
        self.wm[k].len()
    }

    pub fn node(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.node_xs[i * self.d..(i + 1) * self.d])
    }

    pub fn mid(&self, k: usize, p: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.mid_xs[k][p * self.d..(p + 1) * self.d])
    }

    /// Strides of the node grid, row-major (dim 0 slowest).
    pub fn node_strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.d];
        for k in (0..self.d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.n[k + 1];
        }
        s
    }
}

/// Build the grid for a model: uniform nodes on [-R sigma_k, R sigma_k] per
/// dimension, Gaussian weights renormalized to unit mass, interior mask from
/// the domain.
pub fn build_grid(m: &OUModel, dom: Option<&Domain>, n_per_dim: usize, r: f64) -> Result<Grid> {
    let d = m.d;
    if d > 2 {
        return Err(Error::Capability("grids are limited to d <= 2".into()));
    }
    let cap = if d == 1 { 400 } else { 141 };
    if n_per_dim < 3 || n_per_dim > cap {
        return Err(Error::Argument(format!("n_per_dim must be in [3, {cap}] for d={d}")));
    }
    if let Some(dom) = dom {
        if dom.dim() != d {
            return Err(Error::Dimension("domain dimension does not match the model".into()));
        }
    }
    let n = vec![n_per_dim; d];
    let measure = m.measure();
    let sigmas: Vec<f64> = (0..d).map(|k| m.q_inf[(k, k)].sqrt()).collect();
    let nodes_1d: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let half = r * sigmas[k];
            (0..n[k]).map(|i| -half + 2.0 * half * i as f64 / (n[k] - 1) as f64).collect()
        })
        .collect();
    let h: Vec<f64> = (0..d).map(|k| nodes_1d[k][1] - nodes_1d[k][0]).collect();
    let vol: f64 = h.iter().product();

    let coords = |shape: &[usize], staggered: Option<usize>| -> Vec<f64> {
        let total: usize = shape.iter().product();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let mut xs = Vec::with_capacity(total * d);
        for idx in 0..total {
            for k in 0..d {
                let ik = (idx / strides[k]) % shape[k];
                let x = match staggered {
                    Some(sk) if sk == k => nodes_1d[k][ik] + 0.5 * h[k],
                    _ => nodes_1d[k][ik],
                };
                xs.push(x);
            }
        }
        xs
    };

    let node_xs = coords(&n, None);
    let n_nodes: usize = n.iter().product();
    let density_at = |xs: &[f64], i: usize| -> f64 {
        measure.density(&DVector::from_column_slice(&xs[i * d..(i + 1) * d]))
    };
    let raw_w: Vec<f64> = (0..n_nodes).map(|i| density_at(&node_xs, i) * vol).collect();
    let z: f64 = raw_w.iter().sum();
    let w: Vec<f64> = raw_w.iter().map(|v| v / z).collect();
    let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();

    let mut mid_xs = Vec::with_capacity(d);
    let mut wm = Vec::with_capacity(d);
    for k in 0..d {
        let mut shape = n.clone();
        shape[k] -= 1;
        let xs = coords(&shape, Some(k));
        let total: usize = shape.iter().product();
        let ws: Vec<f64> = (0..total).map(|i| density_at(&xs, i) * vol / z).collect();
        mid_xs.push(xs);
        wm.push(ws);
    }

    let mask: Vec<bool> = match dom {
        None => vec![true; n_nodes],
        Some(dom) => (0..n_nodes)
            .map(|i| dom.contains(&DVector::from_column_slice(&node_xs[i * d..(i + 1) * d])))
            .collect(),
    };
    let interior: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if interior.is_empty() {
        return Err(Error::Domain("domain has empty intersection with the grid".into()));
    }

    Ok(Grid {
        d,
        n,
        h,
        truncation_radius: r,
        node_xs,
        w,
        sqrt_w,
        mid_xs,
        wm,
        mask,
        interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matkit;
    use crate::model::{build_model, ModelTol};

    fn model_1d() -> OUModel {
        build_model(&matkit::mat_from_rows(1, 1, &[-1.0]).unwrap(), ModelTol::default()).unwrap()
    }

    #[test]
    fn grid_weights_normalize() {
        let m = model_1d();
        let g = build_grid(&m, None, 5, 5.0).unwrap();
        assert_eq!(g.n_nodes(), 5);
        let s: f64 = g.w.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfline_mask_covers_half() {
        let m = model_1d();
        let dom = Domain::half_space(&[1.0], 0.0).unwrap();
        let g = build_grid(&m, Some(&dom), 201, 6.0).unwrap();
        assert_eq!(g.interior.len(), 100);
    }

    #[test]
    fn weights_reproduce_second_moment() {
        let m = model_1d();
        let g = build_grid(&m, None, 200, 6.0).unwrap();
        let mut s = 0.0;
        for i in 0..g.n_nodes() {
            let x = g.node_xs[i];
            s += g.w[i] * x * x;
        }
        let q = m.q_inf[(0, 0)];
        assert!((s - q).abs() < 0.005 * q, "second moment {s} vs {q}");
    }

    #[test]
    fn empty_interior_rejected() {
        let m = model_1d();
        let dom = Domain::ball(&[100.0], 0.1).unwrap();
        assert!(matches!(build_grid(&m, Some(&dom), 51, 5.0), Err(Error::Domain(_))));
    }
}
