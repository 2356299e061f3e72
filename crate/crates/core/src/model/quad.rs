//! Gauss-Hermite quadrature for centered Gaussian measures, tensorized over
//! up to three dimensions and mapped through the Cholesky factor.

use nalgebra::{DMatrix, DVector};

use super::GaussianMeasure;
use crate::error::{Error, Result};
use crate::matkit;

/// Nodes and positive weights summing to one; exact for polynomials up to
/// `exact_degree` against the target Gaussian.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
    pub exact_degree: u32,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(&DVector<f64>) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// 1D probabilists' Hermite nodes/weights by Golub-Welsch: the Jacobi matrix
/// has zero diagonal and off-diagonal sqrt(k); weights are squared first
/// eigenvector components.
fn hermite_1d(level: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if level == 0 {
        return Err(Error::Argument("quadrature level must be >= 1".into()));
    }
    let mut j = DMatrix::<f64>::zeros(level, level);
    for k in 1..level {
        let v = (k as f64).sqrt();
        j[(k - 1, k)] = v;
        j[(k, k - 1)] = v;
    }
    let (vals, vecs) = matkit::sym_eigen(&j, true)?;
    let vecs = vecs.unwrap();
    let weights: Vec<f64> = (0..level).map(|i| vecs[(0, i)] * vecs[(0, i)]).collect();
    Ok((vals, weights))
}

/// Tensor-product rule for the measure N(0, Q), d <= 3.
pub fn gauss_hermite_rule(measure: &GaussianMeasure, level: usize) -> Result<QuadratureRule> {
    let d = measure.dim();
    if d > 3 {
        return Err(Error::Capability(format!(
            "gauss_hermite_rule limited to d <= 3 (got {d}); use Monte Carlo"
        )));
    }
    if level > 60 {
        return Err(Error::Argument("quadrature level must be <= 60".into()));
    }
    let (xs, ws) = hermite_1d(level)?;
    let mut nodes = Vec::with_capacity(level.pow(d as u32));
    let mut weights = Vec::with_capacity(level.pow(d as u32));
    let mut idx = vec![0usize; d];
    loop {
        let xi = DVector::from_iterator(d, idx.iter().map(|&i| xs[i]));
        nodes.push(&measure.chol * xi);
        weights.push(idx.iter().map(|&i| ws[i]).product());
        // advance the multi-index
        let mut k = 0;
        loop {
            if k == d {
                let rule = QuadratureRule { nodes, weights, exact_degree: 2 * level as u32 - 1 };
                return Ok(rule);
            }
            idx[k] += 1;
            if idx[k] < level {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
