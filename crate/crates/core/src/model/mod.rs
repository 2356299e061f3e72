//! Finite-dimensional instantiation of the standing assumptions: a stable
//! drift A, the invariant Gaussian measure N(0, Q_inf), the non-symmetry
//! matrix B with B + B^T = I, and quadrature against the invariant measure.

use std::collections::HashMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matkit::{self, Mat};

mod quad;
mod testfn;

pub use quad::{gauss_hermite_rule, QuadratureRule};
pub use testfn::{Polynomial, TestFunction};

/// Centered Gaussian measure with SPD covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    pub q: Mat,
    pub chol: Mat,
    log_norm: f64,
}

impl GaussianMeasure {
    pub fn new(q: Mat) -> Result<Self> {
        let d = q.nrows();
        if d != q.ncols() {
            return Err(Error::Dimension("covariance must be square".into()));
        }
        if (&q - q.transpose()).norm() > 1e-10 * q.norm() {
            return Err(Error::Argument("covariance must be symmetric".into()));
        }
        let chol = matkit::cholesky_lower(&q)?;
        let log_det: f64 = (0..d).map(|i| chol[(i, i)].ln() * 2.0).sum();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self { q, chol, log_norm })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.dim();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.chol * z
    }

    /// Density of N(0, Q) at x.
    pub fn density(&self, x: &DVector<f64>) -> f64 {
        // solve L y = x, density = exp(-|y|^2/2 + log_norm)
        let mut y = x.clone();
        let d = self.dim();
        for i in 0..d {
            let mut s = y[i];
            for j in 0..i {
                s -= self.chol[(i, j)] * y[j];
            }
            y[i] = s / self.chol[(i, i)];
        }
        (self.log_norm - 0.5 * y.norm_squared()).exp()
    }

    /// Exact Gaussian moment E prod_k x_k^{a_k} by the covariance recursion
    /// E[x_i p(x)] = sum_j Q_ij dp/dx_j expectation.
    pub fn moment(&self, exps: &[u32]) -> f64 {
        fn rec(q: &Mat, e: &mut Vec<u32>, memo: &mut HashMap<Vec<u32>, f64>) -> f64 {
            let total: u32 = e.iter().sum();
            if total == 0 {
                return 1.0;
            }
            if total % 2 == 1 {
                return 0.0;
            }
            if let Some(&v) = memo.get(e.as_slice()) {
                return v;
            }
            let i = e.iter().position(|&p| p > 0).unwrap();
            let key = e.clone();
            e[i] -= 1;
            let mut s = 0.0;
            for j in 0..e.len() {
                if e[j] > 0 {
                    let bj = e[j] as f64;
                    e[j] -= 1;
                    s += q[(i, j)] * bj * rec(q, e, memo);
                    e[j] += 1;
                }
            }
            e[i] += 1;
            memo.insert(key, s);
            s
        }
        let mut e = exps.to_vec();
        let mut memo = HashMap::new();
        rec(&self.q, &mut e, &mut memo)
    }

    /// Exact integral of a polynomial against the measure.
    pub fn integrate_poly(&self, p: &Polynomial) -> f64 {
        p.terms.iter().map(|(c, e)| c * self.moment(e)).sum()
    }
}

/// Per-model tolerance overrides.
#[derive(Debug, Clone, Copy)]
pub struct ModelTol {
    pub lyapunov: f64,
    pub bsym: f64,
}

impl Default for ModelTol {
    fn default() -> Self {
        Self { lyapunov: 1e-10, bsym: 1e-12 }
    }
}

/// Stable drift with derived invariant-measure structure.
#[derive(Debug, Clone)]
pub struct OUModel {
    pub d: usize,
    pub a: Mat,
    pub q_inf: Mat,
    pub chol_q: Mat,
    pub b: Mat,
    /// Stability margin: -spectral abscissa of A.
    pub w: f64,
    /// Upper estimate of sup_t ||e^{tA}|| e^{wt} sampled on a log time grid.
    pub m_const: f64,
}

impl OUModel {
    pub fn measure(&self) -> GaussianMeasure {
        GaussianMeasure::new(self.q_inf.clone()).expect("q_inf is SPD by construction")
    }
}

/// Build and validate the model from a stable drift matrix.
pub fn build_model(a: &Mat, tol: ModelTol) -> Result<OUModel> {
    let d = a.nrows();
    if d != a.ncols() {
        return Err(Error::Dimension("drift matrix must be square".into()));
    }
    if d > 64 {
        return Err(Error::Capability("model dimension limited to d <= 64".into()));
    }
    let (abscissa, worst) = matkit::spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::Stability(format!(
            "drift is not stable: eigenvalue {worst} has Re = {abscissa:.6e} >= 0"
        )));
    }
    let w = -abscissa;
    let q_inf = matkit::solve_lyapunov(a)?;
    let resid = (a * &q_inf + &q_inf * a.transpose() + Mat::identity(d, d)).norm();
    if resid > tol.lyapunov * d as f64 {
        return Err(Error::Numerical(format!("Lyapunov residual {resid:.3e} over tolerance")));
    }
    let b = -(&q_inf * a.transpose());
    let bsym = (&b + b.transpose() - Mat::identity(d, d)).norm();
    if bsym > tol.bsym {
        return Err(Error::Numerical(format!("B + B^T - I residual {bsym:.3e}")));
    }
    let chol_q = matkit::cholesky_lower(&q_inf)?;

    // sup_t ||e^{tA}|| e^{wt} on a refining log grid, stable to 1%
    let mut n_grid = 200usize;
    let mut m_const = 1.0f64;
    for _ in 0..4 {
        let mut m = 1.0f64; // t = 0 contributes exactly 1
        let (t0, t1) = (1e-3, 20.0 / w);
        for k in 0..n_grid {
            let t = t0 * (t1 / t0).powf(k as f64 / (n_grid - 1) as f64);
            let nrm = matkit::op_norm(&matkit::expm(a, t)?)?;
            m = m.max(nrm * (w * t).exp());
        }
        if (m - m_const).abs() <= 0.01 * m_const {
            m_const = m;
            break;
        }
        m_const = m;
        n_grid *= 2;
    }

    Ok(OUModel { d, a: a.clone(), q_inf, chol_q, b, w, m_const })
}

/// Generator applied pointwise: (1/2) tr D^2 f(x) + <Ax, grad f(x)>.
pub fn generator_apply(m: &OUModel, f: &TestFunction, x: &DVector<f64>) -> f64 {
    0.5 * f.laplacian(x) + (&m.a * x).dot(&f.grad(x))
}

/// Dirichlet form l(f,g) = int <B grad f, grad g> dmu evaluated by quadrature.
pub fn dirichlet_form(m: &OUModel, f: &TestFunction, g: &TestFunction, q: &QuadratureRule) -> f64 {
    q.nodes
        .iter()
        .zip(&q.weights)
        .map(|(x, w)| w * (&m.b * f.grad(x)).dot(&g.grad(x)))
        .sum()
}

/// Exact duality residual l(f,g) + int (Lf) g dmu for polynomial test
/// functions, using exact Gaussian moments (any dimension).
pub fn duality_residual_poly(m: &OUModel, f: &Polynomial, g: &Polynomial) -> f64 {
    let mu = m.measure();
    let d = m.d;
    // int (Lf) g via polynomial algebra: Lf = 1/2 lap f + <Ax, grad f>
    let mut lf_terms: Vec<(f64, Vec<u32>)> = Vec::new();
    // 1/2 laplacian
    for (c, e) in &f.terms {
        for k in 0..d {
            if e[k] >= 2 {
                let mut e2 = e.clone();
                e2[k] -= 2;
                lf_terms.push((0.5 * c * (e[k] * (e[k] - 1)) as f64, e2));
            }
        }
    }
    // <Ax, grad f> = sum_{i,j} A_ij x_j d_i f
    for (c, e) in &f.terms {
        for i in 0..d {
            if e[i] == 0 {
                continue;
            }
            for j in 0..d {
                if m.a[(i, j)] == 0.0 {
                    continue;
                }
                let mut e2 = e.clone();
                e2[i] -= 1;
                e2[j] += 1;
                lf_terms.push((c * e[i] as f64 * m.a[(i, j)], e2));
            }
        }
    }
    let lf = Polynomial { dim: d, terms: lf_terms };
    let int_lfg = mu.integrate_poly(&lf.mul(g));

    // l(f,g) = sum_{i,j} B_ij int (d_j f)(d_i g)
    let mut form = 0.0;
    for i in 0..d {
        for j in 0..d {
            if m.b[(i, j)] == 0.0 {
                continue;
            }
            let dj_f = poly_derivative(f, j);
            let di_g = poly_derivative(g, i);
            form += m.b[(i, j)] * mu.integrate_poly(&dj_f.mul(&di_g));
        }
    }
    form + int_lfg
}

fn poly_derivative(p: &Polynomial, k: usize) -> Polynomial {
    let terms = p
        .terms
        .iter()
        .filter(|(_, e)| e[k] > 0)
        .map(|(c, e)| {
            let mut e2 = e.clone();
            e2[k] -= 1;
            (c * e[k] as f64, e2)
        })
        .collect();
    Polynomial { dim: p.dim, terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rotation_model() -> OUModel {
        let a = matkit::mat_from_rows(2, 2, &[-1.0, -1.0, 1.0, -1.0]).unwrap();
        build_model(&a, ModelTol::default()).unwrap()
    }

    #[test]
    fn build_scalar_family() {
        for a in [0.5, 1.0, 2.0] {
            let m = build_model(&matkit::mat_from_rows(1, 1, &[-a]).unwrap(), ModelTol::default())
                .unwrap();
            assert!((m.q_inf[(0, 0)] - 0.5 / a).abs() < 1e-13);
            assert!((m.b[(0, 0)] - 0.5).abs() < 1e-13);
            assert!((m.w - a).abs() < 1e-12);
            assert!((m.m_const - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn build_rotation_matches_hand_values() {
        let m = rotation_model();
        assert!((&m.q_inf - Mat::identity(2, 2) * 0.5).norm() < 1e-12);
        let want = matkit::mat_from_rows(2, 2, &[0.5, -0.5, 0.5, 0.5]).unwrap();
        assert!((&m.b - &want).norm() < 1e-12);
        assert!((m.w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_triangular_b_from_lyapunov() {
        let a = matkit::mat_from_rows(2, 2, &[-1.0, 1.0, 0.0, -2.0]).unwrap();
        let m = build_model(&a, ModelTol::default()).unwrap();
        let want = -(&m.q_inf * a.transpose());
        assert!((&m.b - &want).norm() < 1e-14);
        assert!((&m.b + m.b.transpose() - Mat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn build_rejects_unstable() {
        let a = matkit::mat_from_rows(1, 1, &[0.1]).unwrap();
        assert!(matches!(build_model(&a, ModelTol::default()), Err(Error::Stability(_))));
    }

    #[test]
    fn b_quadratic_form_is_half_norm() {
        let m = rotation_model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let h = DVector::from_fn(2, |_, _| rng.gen::<f64>() - 0.5);
            let lhs = (&m.b * &h).dot(&h);
            assert!((lhs - 0.5 * h.norm_squared()).abs() <= 1e-12 * (1.0 + h.norm_squared()));
        }
    }

    #[test]
    fn generator_pointwise_examples() {
        let m = build_model(&matkit::mat_from_rows(2, 2, &[-1.0, 0.0, 0.0, -1.0]).unwrap(), ModelTol::default()).unwrap();
        // f = x1^2 at (1, 0): 1/2*2 + <Ax, (2,0)> = 1 - 2 = -1
        let f = TestFunction::Poly(Polynomial::new(2, vec![(1.0, vec![2, 0])]).unwrap());
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!((generator_apply(&m, &f, &x) + 1.0).abs() < 1e-13);
        // constants annihilated
        let c = TestFunction::Poly(Polynomial::constant(2, 1.0));
        assert!(generator_apply(&m, &c, &x).abs() < 1e-15);
        // linear: Lf = <Ax, xstar>
        let xs = DVector::from_vec(vec![0.3, -0.8]);
        let lin = TestFunction::Poly(Polynomial::linear(&xs));
        let want = (&m.a * &x).dot(&xs);
        assert!((generator_apply(&m, &lin, &x) - want).abs() < 1e-13);
    }

    #[test]
    fn quadrature_moments() {
        let m = rotation_model();
        let mu = m.measure();
        let rule = gauss_hermite_rule(&mu, 6).unwrap();
        let total: f64 = rule.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // int x1^2 = Q_11
        let v = rule.integrate(|x| x[0] * x[0]);
        assert!((v - m.q_inf[(0, 0)]).abs() < 1e-12);
        // int x1^4 = 3 Q_11^2 (Isserlis)
        let v = rule.integrate(|x| x[0].powi(4));
        assert!((v - 3.0 * m.q_inf[(0, 0)] * m.q_inf[(0, 0)]).abs() < 1e-12);
        // moment recursion agrees
        assert!((mu.moment(&[4, 0]) - 3.0 * 0.25).abs() < 1e-13);
        assert!((mu.moment(&[1, 1]) - m.q_inf[(0, 1)]).abs() < 1e-13);
    }

    #[test]
    fn density_integrates_to_one_1d2d() {
        for a in [&[-1.0f64][..], &[-1.0, -1.0, 1.0, -1.0][..]] {
            let d = if a.len() == 1 { 1 } else { 2 };
            let m = build_model(&matkit::mat_from_rows(d, d, a).unwrap(), ModelTol::default()).unwrap();
            let mu = m.measure();
            // Riemann sum over [-8 sigma, 8 sigma]^d
            let ns = if d == 1 { 4001 } else { 501 };
            let sig: Vec<f64> = (0..d).map(|k| mu.q[(k, k)].sqrt()).collect();
            let mut total = 0.0;
            let mut idx = vec![0usize; d];
            'outer: loop {
                let x = DVector::from_iterator(
                    d,
                    idx.iter().enumerate().map(|(k, &i)| -8.0 * sig[k] + 16.0 * sig[k] * i as f64 / (ns - 1) as f64),
                );
                let vol: f64 = sig.iter().map(|s| 16.0 * s / (ns - 1) as f64).product();
                total += mu.density(&x) * vol;
                let mut k = 0;
                loop {
                    if k == d {
                        break 'outer;
                    }
                    idx[k] += 1;
                    if idx[k] < ns {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "density mass {total}");
        }
    }

    #[test]
    fn dirichlet_form_examples() {
        let m = rotation_model();
        let mu = m.measure();
        let rule = gauss_hermite_rule(&mu, 8).unwrap();
        // constants give zero
        let c = TestFunction::Poly(Polynomial::constant(2, 3.0));
        assert!(dirichlet_form(&m, &c, &c, &rule).abs() < 1e-14);
        // f = g = <x, e1>: l = <B e1, e1> = 1/2
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let lin = TestFunction::Poly(Polynomial::linear(&e1));
        assert!((dirichlet_form(&m, &lin, &lin, &rule) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duality_selects_b_convention() {
        // quadrature route
        let m = rotation_model();
        let mu = m.measure();
        let rule = gauss_hermite_rule(&mu, 8).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..3 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let terms: Vec<(f64, Vec<u32>)> = (0..4u32)
                    .flat_map(|i| (0..4u32 - i).map(move |j| (i, j)))
                    .map(|(i, j)| (rng.gen::<f64>() - 0.5, vec![i, j]))
                    .collect();
                Polynomial::new(2, terms).unwrap()
            };
            let f = mk(&mut rng);
            let g = mk(&mut rng);
            // quadrature-based residual
            let tf = TestFunction::Poly(f.clone());
            let tg = TestFunction::Poly(g.clone());
            let l = dirichlet_form(&m, &tf, &tg, &rule);
            let int_lfg = rule.integrate(|x| generator_apply(&m, &tf, x) * tg.eval(x));
            assert!((l + int_lfg).abs() < 1e-8, "quadrature duality residual {}", l + int_lfg);
            // exact-moment route agrees
            let r = duality_residual_poly(&m, &f, &g);
            assert!(r.abs() < 1e-10, "moment duality residual {r}");
            // the transposed convention fails by O(1)
            let mut m_bad = m.clone();
            m_bad.b = -(&m.a * &m.q_inf);
            let r_bad = duality_residual_poly(&m_bad, &f, &g);
            assert!(r_bad.abs() > 1e-3, "transposed convention unexpectedly passed");
        }
    }

    #[test]
    fn gauss_hermite_rejects_high_dim() {
        let q = Mat::identity(4, 4);
        let mu = GaussianMeasure::new(q).unwrap();
        assert!(matches!(gauss_hermite_rule(&mu, 4), Err(Error::Capability(_))));
    }
}
