//! Closed family of test functions with analytic gradients and Laplacians:
//! multivariate polynomials, exponentials of linear functionals, and
//! tanh-of-linear bounded tests.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Sparse multivariate polynomial: sum of coef * prod_k x_k^{exps[k]}.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (_, e) in &terms {
            if e.len() != dim {
                return Err(Error::Dimension("monomial exponent length != dim".into()));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self { dim, terms: vec![(c, vec![0; dim])] }
    }

    /// Linear functional <x, a>.
    pub fn linear(a: &DVector<f64>) -> Self {
        let dim = a.len();
        let terms = (0..dim)
            .filter(|&k| a[k] != 0.0)
            .map(|k| {
                let mut e = vec![0; dim];
                e[k] = 1;
                (a[k], e)
            })
            .collect();
        Self { dim, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().enumerate().map(|(k, &p)| x[k].powi(p as i32)).product::<f64>())
            .sum()
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim);
        for (c, e) in &self.terms {
            for k in 0..self.dim {
                if e[k] == 0 {
                    continue;
                }
                let mut v = c * e[k] as f64;
                for (j, &p) in e.iter().enumerate() {
                    let p = if j == k { p - 1 } else { p };
                    v *= x[j].powi(p as i32);
                }
                g[k] += v;
            }
        }
        g
    }

    pub fn laplacian(&self, x: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for (c, e) in &self.terms {
            for k in 0..self.dim {
                if e[k] < 2 {
                    continue;
                }
                let mut v = c * (e[k] * (e[k] - 1)) as f64;
                for (j, &p) in e.iter().enumerate() {
                    let p = if j == k { p - 2 } else { p };
                    v *= x[j].powi(p as i32);
                }
                s += v;
            }
        }
        s
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut terms: Vec<(f64, Vec<u32>)> = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (c1, e1) in &self.terms {
            for (c2, e2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                terms.push((c1 * c2, e));
            }
        }
        Polynomial { dim: self.dim, terms }
    }
}

/// Test functions with exact derivatives.
#[derive(Debug, Clone)]
pub enum TestFunction {
    Poly(Polynomial),
    /// exp(<x, xstar> + offset). With offset = -1/2 <Q xstar, xstar> this is the
    /// normalized exponential functional used by the semigroup oracle.
    ExpLinear { xstar: DVector<f64>, offset: f64 },
    /// tanh(<a, x> + b), bounded with bounded derivatives.
    TanhLinear { a: DVector<f64>, b: f64 },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Poly(p) => p.dim,
            TestFunction::ExpLinear { xstar, .. } => xstar.len(),
            TestFunction::TanhLinear { a, .. } => a.len(),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            TestFunction::Poly(p) => p.eval(x),
            TestFunction::ExpLinear { xstar, offset } => (x.dot(xstar) + offset).exp(),
            TestFunction::TanhLinear { a, b } => (a.dot(x) + b).tanh(),
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            TestFunction::Poly(p) => p.grad(x),
            TestFunction::ExpLinear { xstar, offset } => xstar * (x.dot(xstar) + offset).exp(),
            TestFunction::TanhLinear { a, b } => {
                let t = (a.dot(x) + b).tanh();
                a * (1.0 - t * t)
            }
        }
    }

    pub fn laplacian(&self, x: &DVector<f64>) -> f64 {
        match self {
            TestFunction::Poly(p) => p.laplacian(x),
            TestFunction::ExpLinear { xstar, offset } => {
                xstar.norm_squared() * (x.dot(xstar) + offset).exp()
            }
            TestFunction::TanhLinear { a, b } => {
                let t = (a.dot(x) + b).tanh();
                -2.0 * t * (1.0 - t * t) * a.norm_squared()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &TestFunction, x: &DVector<f64>) {
        let h = 1e-5;
        let d = x.len();
        let g = f.grad(x);
        let mut lap_fd = 0.0;
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let gfd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
            assert!((g[k] - gfd).abs() < 1e-6 * (1.0 + g[k].abs()), "grad mismatch");
            lap_fd += (f.eval(&xp) - 2.0 * f.eval(x) + f.eval(&xm)) / (h * h);
        }
        assert!(
            (f.laplacian(x) - lap_fd).abs() < 1e-4 * (1.0 + f.laplacian(x).abs()),
            "laplacian mismatch"
        );
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let p = Polynomial::new(
            2,
            vec![(1.5, vec![2, 1]), (-0.4, vec![0, 3]), (2.0, vec![1, 0]), (0.7, vec![0, 0])],
        )
        .unwrap();
        fd_check(&TestFunction::Poly(p), &x);
        fd_check(
            &TestFunction::ExpLinear { xstar: DVector::from_vec(vec![0.8, -0.2]), offset: -0.1 },
            &x,
        );
        fd_check(&TestFunction::TanhLinear { a: DVector::from_vec(vec![1.1, 0.5]), b: 0.2 }, &x);
    }

    #[test]
    fn poly_product_degree() {
        let p = Polynomial::new(1, vec![(2.0, vec![1]), (1.0, vec![0])]).unwrap();
        let q = p.mul(&p);
        let x = DVector::from_vec(vec![3.0]);
        assert!((q.eval(&x) - 49.0).abs() < 1e-12);
        assert_eq!(q.degree(), 2);
    }
}
