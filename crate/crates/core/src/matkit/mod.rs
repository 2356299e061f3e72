//! Dense real-matrix kernel: exponentials, Lyapunov solves, principal square
//! roots, resolvents, spectra, and operator norms.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) mod expm;
pub(crate) mod lapack;
pub(crate) mod sqrtm;

pub use lapack::{ceig, cholesky_lower, csvd_vals, eig_vals, qr_thin_q, real_schur, solve,
                 svd_vals, sym_eigen, CluFactors, CMat, LuFactors};

/// Dense real matrix. Column-major storage (LAPACK layout).
pub type Mat = DMatrix<f64>;

/// Build a matrix from row-major data, validating shape and finiteness.
pub fn mat_from_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Mat> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension("matrix dimensions must be positive".into()));
    }
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "expected {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    if !entries.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("matrix entries must be finite".into()));
    }
    Ok(Mat::from_row_slice(rows, cols, entries))
}

/// Eigenvalues plus a crude conditioning estimate (ratio of extreme singular values).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub condition_estimate: f64,
}

pub fn spectrum(m: &Mat) -> Result<Spectrum> {
    let eigenvalues = eig_vals(m)?;
    let sv = svd_vals(m)?;
    let condition_estimate = match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    };
    Ok(Spectrum { eigenvalues, condition_estimate })
}

/// Spectral abscissa: max real part of the eigenvalues.
pub fn spectral_abscissa(m: &Mat) -> Result<(f64, Complex64)> {
    let eigs = eig_vals(m)?;
    let worst = eigs
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| Error::Dimension("empty matrix".into()))?;
    Ok((worst.re, worst))
}

/// e^{tM} by scaling-and-squaring with the Pade(13) approximant.
pub fn expm(m: &Mat, t: f64) -> Result<Mat> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("expm: square matrix required".into()));
    }
    if !t.is_finite() {
        return Err(Error::Argument("expm: t must be finite".into()));
    }
    expm::expm(&(m * t))
}

/// Solve A Q + Q A^T = -I for the invariant covariance Q (Bartels-Stewart).
/// Requires all eigenvalues of A in the open left half-plane.
pub fn solve_lyapunov(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("lyapunov: square matrix required".into()));
    }
    let (abscissa, worst) = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::Stability(format!(
            "spectral abscissa {abscissa:.6e} >= 0 (eigenvalue {worst})"
        )));
    }
    let (t, z, _) = lapack::real_schur(a)?;
    let c = -Mat::identity(n, n);
    // T Y + Y T^T = -I
    let y = lapack::trsyl(b'N', b'T', &t, &t, &c)?;
    let q = &z * y * z.transpose();
    // symmetrize away rounding
    let q = (&q + q.transpose()) * 0.5;
    let resid = (a * &q + &q * a.transpose() + Mat::identity(n, n)).norm();
    if resid > 1e-8 * n as f64 {
        return Err(Error::Numerical(format!(
            "lyapunov residual {resid:.3e} too large"
        )));
    }
    Ok(q)
}

/// Principal square root (no eigenvalues on the closed negative real axis).
pub fn sqrtm_principal(m: &Mat) -> Result<Mat> {
    sqrtm::sqrtm_principal(m)
}

/// Resolvent (zI - M)^{-1} at a complex point z off the spectrum.
pub fn resolvent(m: &Mat, z: Complex64) -> Result<CMat> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension("resolvent: square matrix required".into()));
    }
    let gap = eig_vals(m)?
        .iter()
        .map(|ev| (z - ev).norm())
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-12 {
        return Err(Error::NearSingular(format!(
            "z within {gap:.3e} of an eigenvalue"
        )));
    }
    let mut zm = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            zm[(i, j)] = Complex64::new(-m[(i, j)], 0.0);
        }
        zm[(j, j)] += z;
    }
    let lu = CluFactors::new(&zm)?;
    let r = lu.inverse()?;
    // residual check: ||(zI - M) R - I||
    let mut resid = 0.0f64;
    let prod = &zm * &r;
    for j in 0..n {
        for i in 0..n {
            let expect = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            resid = resid.max((prod[(i, j)] - expect).norm());
        }
    }
    if resid > 1e-10 * (1.0 + z.norm() + m.norm()) {
        return Err(Error::NearSingular(format!(
            "resolvent residual {resid:.3e}; z too close to the spectrum?"
        )));
    }
    Ok(r)
}

/// Largest singular value.
pub fn op_norm(m: &Mat) -> Result<f64> {
    let sv = svd_vals(m)?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// Largest singular value of a complex matrix.
pub fn cop_norm(m: &CMat) -> Result<f64> {
    let sv = csvd_vals(m)?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// Frobenius norm of A - B.
pub fn frob_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_expm(m: &Mat, terms: usize) -> Mat {
        let n = m.nrows();
        let mut acc = Mat::identity(n, n);
        let mut term = Mat::identity(n, n);
        for k in 1..=terms {
            term = (&term * m) / k as f64;
            acc += &term;
        }
        acc
    }

    /// Direct d^2 x d^2 Kronecker solve of A Q + Q A^T = -I (test oracle).
    fn lyapunov_kron_oracle(a: &Mat) -> Mat {
        let d = a.nrows();
        let n = d * d;
        let mut big = Mat::zeros(n, n);
        // vec(AQ) = (I (x) A) vec(Q); vec(Q A^T) = (A (x) I) vec(Q)   [column-major vec]
        for j in 0..d {
            for i in 0..d {
                for k in 0..d {
                    big[(j * d + i, j * d + k)] += a[(i, k)];
                    big[(j * d + i, k * d + i)] += a[(j, k)];
                }
            }
        }
        let mut rhs = Mat::zeros(n, 1);
        for i in 0..d {
            rhs[(i * d + i, 0)] = -1.0;
        }
        let x = solve(&big, &rhs).unwrap();
        let mut q = Mat::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                q[(i, j)] = x[(j * d + i, 0)];
            }
        }
        q
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = Mat::zeros(3, 3);
        let e = expm(&z, 5.0).unwrap();
        assert!((e - Mat::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn expm_diagonal() {
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let e = expm(&m, 2f64.ln()).unwrap();
        assert!((e[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((e[(1, 1)] - 0.25).abs() < 1e-14);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn expm_rotation_quarter_turn() {
        let m = mat_from_rows(2, 2, &[0.0, -1.0, 1.0, 0.0]).unwrap();
        let e = expm(&m, std::f64::consts::FRAC_PI_2).unwrap();
        let want = mat_from_rows(2, 2, &[0.0, -1.0, 1.0, 0.0]).unwrap();
        assert!((&e - &want).norm() < 1e-12);
        // independent oracle: truncated Taylor series
        let tay = taylor_expm(&(&m * std::f64::consts::FRAC_PI_2), 40);
        assert!((&e - &tay).norm() < 1e-12);
    }

    #[test]
    fn expm_semigroup_law() {
        let mut rng = 123u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for d in [2usize, 4, 8] {
            let mut a = Mat::from_fn(d, d, |_, _| next());
            for i in 0..d {
                a[(i, i)] -= 2.0;
            }
            let (s, t) = (0.3, 0.9);
            let e1 = expm(&a, s).unwrap() * expm(&a, t).unwrap();
            let e2 = expm(&a, s + t).unwrap();
            assert!((e1 - e2).norm() < 1e-10, "semigroup law failed at d={d}");
        }
    }

    #[test]
    fn lyapunov_scalar_and_normal() {
        let a = mat_from_rows(2, 2, &[-1.0, 0.0, 0.0, -1.0]).unwrap();
        let q = solve_lyapunov(&a).unwrap();
        assert!((q - Mat::identity(2, 2) * 0.5).norm() < 1e-13);

        let a = mat_from_rows(2, 2, &[-1.0, -1.0, 1.0, -1.0]).unwrap();
        let q = solve_lyapunov(&a).unwrap();
        assert!((q - Mat::identity(2, 2) * 0.5).norm() < 1e-13);
    }

    #[test]
    fn lyapunov_hand_solved_triangular() {
        // A = [[-1,1],[0,-2]] -> Q = [[7/12, 1/12],[1/12, 1/4]]
        let a = mat_from_rows(2, 2, &[-1.0, 1.0, 0.0, -2.0]).unwrap();
        let q = solve_lyapunov(&a).unwrap();
        let want = mat_from_rows(2, 2, &[7.0 / 12.0, 1.0 / 12.0, 1.0 / 12.0, 0.25]).unwrap();
        assert!((&q - &want).norm() < 1e-13);
        // cross-check against the d^2 x d^2 direct solve
        let oracle = lyapunov_kron_oracle(&a);
        assert!((&q - &oracle).norm() < 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = mat_from_rows(2, 2, &[0.5, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(solve_lyapunov(&a), Err(Error::Stability(_))));
    }

    #[test]
    fn lyapunov_random_vs_kron_oracle() {
        let mut rng = 77u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for d in 1..=8usize {
            let mut a = Mat::from_fn(d, d, |_, _| next());
            for i in 0..d {
                a[(i, i)] -= 1.5;
            }
            let q = solve_lyapunov(&a).unwrap();
            let oracle = lyapunov_kron_oracle(&a);
            assert!((&q - &oracle).norm() < 1e-10, "mismatch vs oracle at d={d}");
            let resid = (&a * &q + &q * a.transpose() + Mat::identity(d, d)).norm();
            assert!(resid <= 1e-10 * d as f64);
            // symmetric positive definite
            assert!((&q - q.transpose()).norm() < 1e-12);
            let (vals, _) = sym_eigen(&q, false).unwrap();
            assert!(vals[0] > 0.0);
        }
    }

    #[test]
    fn sqrtm_diagonal_and_identity() {
        let m = mat_from_rows(2, 2, &[4.0, 0.0, 0.0, 9.0]).unwrap();
        let r = sqrtm_principal(&m).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-13 && (r[(1, 1)] - 3.0).abs() < 1e-13);
        let i3 = Mat::identity(3, 3);
        assert!((sqrtm_principal(&i3).unwrap() - i3).norm() < 1e-14);
    }

    #[test]
    fn sqrtm_jordan_block() {
        let m = mat_from_rows(2, 2, &[2.0, 1.0, 0.0, 2.0]).unwrap();
        let r = sqrtm_principal(&m).unwrap();
        let s2 = 2f64.sqrt();
        let want = mat_from_rows(2, 2, &[s2, 1.0 / (2.0 * s2), 0.0, s2]).unwrap();
        assert!((&r - &want).norm() < 1e-12);
        assert!((&r * &r - &m).norm() < 1e-9 * m.norm());
    }

    #[test]
    fn sqrtm_random_square_back() {
        let mut rng = 5u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for d in [3usize, 6, 12] {
            let g = Mat::from_fn(d, d, |_, _| next());
            let m = &g * g.transpose() + Mat::identity(d, d) * (0.5 + d as f64 * 0.1)
                + Mat::from_fn(d, d, |_, _| 0.2 * next());
            let r = sqrtm_principal(&m).unwrap();
            let rel = (&r * &r - &m).norm() / m.norm();
            assert!(rel < 1e-9, "relative residual {rel:.2e} at d={d}");
        }
    }

    #[test]
    fn sqrtm_rejects_negative_axis() {
        let m = mat_from_rows(2, 2, &[-1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(matches!(sqrtm_principal(&m), Err(Error::Sectoriality(_))));
    }

    #[test]
    fn resolvent_cases() {
        let z1 = Complex64::new(1.0, 0.0);
        let m0 = Mat::zeros(2, 2);
        let r = resolvent(&m0, z1).unwrap();
        assert!((r[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-13);

        let m = mat_from_rows(1, 1, &[-1.0]).unwrap();
        let r = resolvent(&m, z1).unwrap();
        assert!((r[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-13);

        let m = mat_from_rows(2, 2, &[-1.0, 1.0, 0.0, -2.0]).unwrap();
        let zi = Complex64::new(0.0, 1.0);
        // residual oracle is asserted inside resolvent(); reaching here means it held
        let r = resolvent(&m, zi).unwrap();
        assert_eq!(r.nrows(), 2);
    }

    #[test]
    fn resolvent_near_singular_rejected() {
        let m = mat_from_rows(2, 2, &[-1.0, 0.0, 0.0, -2.0]).unwrap();
        let z = Complex64::new(-1.0 + 1e-14, 0.0);
        assert!(resolvent(&m, z).is_err());
    }

    #[test]
    fn op_norm_cases() {
        assert!((op_norm(&Mat::identity(4, 4)).unwrap() - 1.0).abs() < 1e-12);
        let m = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -5.0]));
        assert!((op_norm(&m).unwrap() - 5.0).abs() < 1e-12);
        // nilpotent block: singular values from M^T M eigenvalues
        let m = mat_from_rows(2, 2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        let g = m.transpose() * &m;
        let (vals, _) = sym_eigen(&g, false).unwrap();
        let oracle = vals.last().unwrap().sqrt();
        assert!((op_norm(&m).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mat_from_rows_validates() {
        assert!(mat_from_rows(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(mat_from_rows(2, 2, &[1.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(mat_from_rows(0, 2, &[]).is_err());
        let m = mat_from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 3.0);
    }

    #[test]
    fn spectrum_conjugate_pairs() {
        let a = mat_from_rows(2, 2, &[-1.0, -1.0, 1.0, -1.0]).unwrap();
        let s = spectrum(&a).unwrap();
        assert_eq!(s.eigenvalues.len(), 2);
        let mut ims: Vec<f64> = s.eigenvalues.iter().map(|e| e.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-12 && (ims[1] - 1.0).abs() < 1e-12);
        assert!(s.eigenvalues.iter().all(|e| (e.re + 1.0).abs() < 1e-12));
    }
}
