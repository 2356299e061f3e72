//! Open-domain geometry: membership, exact signed distances, shrunk domains,
//! and the penalization potentials built from them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convex primitives and their complements. All sets are open.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// { x : <x, normal> > offset }, normal normalized at construction.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Complement { inner: Box<Domain> },
    WholeSpace { dim: usize },
}

impl Domain {
    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        let n = DVector::from_column_slice(normal);
        let len = n.norm();
        if len == 0.0 || !len.is_finite() {
            return Err(Error::Argument("half-space normal must be nonzero".into()));
        }
        Ok(Domain::HalfSpace { normal: (n / len).iter().copied().collect(), offset: offset / len })
    }

    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Argument("ball radius must be positive".into()));
        }
        Ok(Domain::Ball { center: center.to_vec(), radius })
    }

    pub fn cuboid(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| a >= b) {
            return Err(Error::Argument("box requires lo < hi componentwise".into()));
        }
        Ok(Domain::Box { lo: lo.to_vec(), hi: hi.to_vec() })
    }

    pub fn complement(inner: Domain) -> Self {
        Domain::Complement { inner: Box::new(inner) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::HalfSpace { normal, .. } => normal.len(),
            Domain::Ball { center, .. } => center.len(),
            Domain::Box { lo, .. } => lo.len(),
            Domain::Complement { inner } => inner.dim(),
            Domain::WholeSpace { dim } => *dim,
        }
    }

    /// Signed distance to the complement: positive inside the open set,
    /// negative outside, zero on the boundary. Exact for half-space and ball;
    /// for boxes the inside value is the distance to the nearest face and the
    /// outside value is minus the Euclidean distance to the box.
    pub fn signed_distance(&self, x: &DVector<f64>) -> f64 {
        match self {
            Domain::HalfSpace { normal, offset } => {
                let n = DVector::from_column_slice(normal);
                n.dot(x) - offset
            }
            Domain::Ball { center, radius } => {
                let c = DVector::from_column_slice(center);
                radius - (x - c).norm()
            }
            Domain::Box { lo, hi } => {
                let mut inside_min = f64::INFINITY;
                let mut out_sq = 0.0f64;
                let mut outside = false;
                for k in 0..lo.len() {
                    let (a, b) = (lo[k], hi[k]);
                    if x[k] <= a {
                        outside = true;
                        out_sq += (a - x[k]) * (a - x[k]);
                    } else if x[k] >= b {
                        outside = true;
                        out_sq += (x[k] - b) * (x[k] - b);
                    } else {
                        inside_min = inside_min.min((x[k] - a).min(b - x[k]));
                    }
                }
                if outside {
                    -out_sq.sqrt()
                } else {
                    inside_min
                }
            }
            Domain::Complement { inner } => -inner.signed_distance(x),
            Domain::WholeSpace { .. } => f64::INFINITY,
        }
    }

    /// Strict membership in the open set.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Euclidean distance from x to the complement of the set (0 outside).
    pub fn dist_to_complement(&self, x: &DVector<f64>) -> f64 {
        self.signed_distance(x).max(0.0)
    }

    /// Distance from x to the shrunk set Omega_eps = { d(., complement) > eps },
    /// in closed form per primitive. Returns None if Omega_eps is empty.
    pub fn dist_to_shrunk(&self, x: &DVector<f64>, eps: f64) -> Option<f64> {
        match self {
            Domain::HalfSpace { normal, offset } => {
                let n = DVector::from_column_slice(normal);
                Some((offset + eps - n.dot(x)).max(0.0))
            }
            Domain::Ball { center, radius } => {
                if *radius <= eps {
                    return None;
                }
                let c = DVector::from_column_slice(center);
                Some(((x - c).norm() - (radius - eps)).max(0.0))
            }
            Domain::Box { lo, hi } => {
                if lo.iter().zip(hi).any(|(a, b)| b - a <= 2.0 * eps) {
                    return None;
                }
                let mut sq = 0.0f64;
                for k in 0..lo.len() {
                    let (a, b) = (lo[k] + eps, hi[k] - eps);
                    let v = if x[k] < a {
                        a - x[k]
                    } else if x[k] > b {
                        x[k] - b
                    } else {
                        0.0
                    };
                    sq += v * v;
                }
                Some(sq.sqrt())
            }
            Domain::Complement { inner } => {
                // Omega_eps = { x : dist(x, inner-closure) > eps }; the distance
                // increases at unit rate along the outward ray, so
                // d(x, Omega_eps) = (eps + signed_distance_inner(x))_+ .
                Some((eps + inner.signed_distance(x)).max(0.0))
            }
            Domain::WholeSpace { .. } => Some(0.0),
        }
    }
}

/// Penalization potential V_eps(x) = min(d(x, Omega_eps)/eps, 1).
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub domain: Domain,
    pub eps: f64,
    degenerate: bool,
}

impl PotentialSpec {
    pub fn new(domain: Domain, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(Error::Argument("potential eps must be positive".into()));
        }
        let probe = DVector::zeros(domain.dim());
        let degenerate = domain.dist_to_shrunk(&probe, eps).is_none();
        Ok(Self { domain, eps, degenerate })
    }

    /// Whether the shrunk set is empty, making the potential constant 1.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self.domain.dist_to_shrunk(x, self.eps) {
            Some(d) => (d / self.eps).min(1.0),
            None => 1.0,
        }
    }
}

/// Monte-Carlo or quadrature estimate of mu(Omega); used for the positive-mass
/// hypothesis checks. Returns (estimate, std_error).
pub fn mu_mass_mc(
    dom: &Domain,
    measure: &crate::model::GaussianMeasure,
    n: usize,
    seed: u64,
) -> (f64, f64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n {
        if dom.contains(&measure.sample(&mut rng)) {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(s)
    }

    #[test]
    fn membership_cases() {
        let hs = Domain::half_space(&[1.0, 0.0], 0.0).unwrap();
        assert!(hs.contains(&v(&[1.0, 0.0])));
        assert!(!hs.contains(&v(&[0.0, 5.0])));

        let ball = Domain::ball(&[0.0, 0.0], 1.0).unwrap();
        assert!(!ball.contains(&v(&[1.0, 0.0]))); // boundary excluded
        assert!(ball.contains(&v(&[0.5, 0.0])));

        let comp = Domain::complement(Domain::ball(&[0.0, 0.0], 1.0).unwrap());
        assert!(!comp.contains(&v(&[0.0, 0.0])));
        assert!(comp.contains(&v(&[2.0, 0.0])));
    }

    #[test]
    fn distances() {
        let hs = Domain::half_space(&[1.0, 0.0], 0.0).unwrap();
        assert!((hs.dist_to_complement(&v(&[0.3, 7.0])) - 0.3).abs() < 1e-15);

        let ball = Domain::ball(&[0.0, 0.0], 1.0).unwrap();
        assert!((ball.dist_to_complement(&v(&[0.0, 0.0])) - 1.0).abs() < 1e-15);

        let bx = Domain::cuboid(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        assert!((bx.dist_to_complement(&v(&[1.0, 0.25])) - 0.25).abs() < 1e-15);

        // equivalence: positive distance iff member
        for x in [v(&[0.1, 0.5]), v(&[-0.1, 0.5]), v(&[2.5, 0.5])] {
            assert_eq!(bx.contains(&x), bx.dist_to_complement(&x) > 0.0);
        }
    }

    #[test]
    fn potential_ramp_halfline() {
        let dom = Domain::half_space(&[1.0], 0.0).unwrap();
        let spec = PotentialSpec::new(dom, 0.1).unwrap();
        assert!((spec.eval(&v(&[0.1])) - 0.0).abs() < 1e-15);
        assert!((spec.eval(&v(&[0.0])) - 1.0).abs() < 1e-15);
        assert!((spec.eval(&v(&[0.05])) - 0.5).abs() < 1e-15);
        // deep inside
        assert_eq!(spec.eval(&v(&[0.5])), 0.0);
        // outside
        assert_eq!(spec.eval(&v(&[-3.0])), 1.0);
    }

    #[test]
    fn potential_ball_clamp() {
        let dom = Domain::ball(&[0.0, 0.0], 1.0).unwrap();
        let spec = PotentialSpec::new(dom, 0.2).unwrap();
        // d((1.5,0), ball(0,0.8)) = 0.7 -> clamp at 1
        assert!((spec.eval(&v(&[1.5, 0.0])) - 1.0).abs() < 1e-15);
        assert!(!spec.is_degenerate());
        // degenerate shrink
        let tiny = PotentialSpec::new(Domain::ball(&[0.0, 0.0], 0.15).unwrap(), 0.2).unwrap();
        assert!(tiny.is_degenerate());
        assert_eq!(tiny.eval(&v(&[0.0, 0.0])), 1.0);
    }

    #[test]
    fn potential_support_properties() {
        // V_eps = 0 on the closed shrunk set, 1 on the complement, 1/eps-Lipschitz
        let dom = Domain::ball(&[0.0], 1.0).unwrap();
        let eps = 0.25;
        let spec = PotentialSpec::new(dom.clone(), eps).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..400 {
            let xv = -2.0 + 4.0 * i as f64 / 399.0;
            let x = v(&[xv]);
            let val = spec.eval(&x);
            assert!((0.0..=1.0).contains(&val));
            if dom.signed_distance(&x) >= eps {
                assert_eq!(val, 0.0);
            }
            if dom.signed_distance(&x) <= 0.0 {
                assert_eq!(val, 1.0);
            }
            if let Some((px, pv)) = prev {
                assert!((val - pv).abs() <= (xv - px).abs() / eps + 1e-12, "Lipschitz violated");
            }
            prev = Some((xv, val));
        }
    }

    #[test]
    fn potential_pointwise_limit_and_monotone() {
        let dom = Domain::half_space(&[1.0], 0.0).unwrap();
        // off the boundary, V_eps -> indicator of complement-closure
        for &xv in &[0.7, 0.02, -0.4] {
            let x = v(&[xv]);
            let mut last = f64::NAN;
            for eps in [0.4, 0.2, 0.1, 0.05, 0.01, 0.001] {
                last = PotentialSpec::new(dom.clone(), eps).unwrap().eval(&x);
            }
            let want = if xv > 0.0 { 0.0 } else { 1.0 };
            assert_eq!(last, want, "limit at x={xv}");
        }
        // monotone nesting of the ramps outside the set (both 1) and on the ramp
        for &xv in &[0.03, 0.12, -1.0] {
            let x = v(&[xv]);
            let v1 = PotentialSpec::new(dom.clone(), 0.1).unwrap().eval(&x);
            let v2 = PotentialSpec::new(dom.clone(), 0.2).unwrap().eval(&x);
            assert!(v1 <= v2 + 1e-15, "ramps should nest at x={xv}");
        }
    }

    #[test]
    fn box_complement_potential() {
        let dom = Domain::complement(Domain::cuboid(&[-1.0, -1.0], &[1.0, 1.0]).unwrap());
        let spec = PotentialSpec::new(dom, 0.5).unwrap();
        // center of the removed box: deep in the complement of Omega
        assert_eq!(spec.eval(&v(&[0.0, 0.0])), 1.0);
        // far away: inside Omega_eps
        assert_eq!(spec.eval(&v(&[3.0, 0.0])), 0.0);
        // on the box boundary
        assert!((spec.eval(&v(&[1.0, 0.0])) - 1.0).abs() < 1e-15);
        // half way up the ramp: distance from boundary 0.25 outward
        assert!((spec.eval(&v(&[1.25, 0.0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mass_estimates() {
        let whole = Domain::WholeSpace { dim: 1 };
        let m = crate::model::build_model(
            &crate::matkit::mat_from_rows(1, 1, &[-1.0]).unwrap(),
            crate::model::ModelTol::default(),
        )
        .unwrap();
        let mu = m.measure();
        let (p, _) = mu_mass_mc(&whole, &mu, 1000, 3);
        assert_eq!(p, 1.0);

        let half = Domain::half_space(&[1.0], 0.0).unwrap();
        let (p, se) = mu_mass_mc(&half, &mu, 200_000, 4);
        assert!((p - 0.5).abs() < 4.0 * se + 1e-3);

        // ball(0, sigma) in 1D with Q = sigma^2: mass = 2 Phi(1) - 1
        let sigma = m.q_inf[(0, 0)].sqrt();
        let ball = Domain::ball(&[0.0], sigma).unwrap();
        let (p, se) = mu_mass_mc(&ball, &mu, 400_000, 5);
        let want = 0.6826894921370859;
        assert!((p - want).abs() < 4.0 * se, "p={p} want={want} se={se}");
    }
}
