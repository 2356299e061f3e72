//! Thin safe wrappers over the LAPACK routines the kernel is built on.
//!
//! nalgebra stores dense matrices column-major, which is what LAPACK expects,
//! so slices can be handed over directly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<i32> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what}: expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows() as i32)
}

/// LU factorization with partial pivoting, kept for repeated solves.
pub struct LuFactors {
    lu: DMatrix<f64>,
    ipiv: Vec<i32>,
    n: i32,
}

impl LuFactors {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = check_square(a, "lu")?;
        let mut lu = a.clone();
        let mut ipiv = vec![0i32; n as usize];
        let mut info = 0;
        unsafe {
            lapack::dgetrf(n, n, lu.as_mut_slice(), n, &mut ipiv, &mut info);
        }
        if info != 0 {
            return Err(Error::Numerical(format!("dgetrf failed, info={info}")));
        }
        Ok(Self { lu, ipiv, n })
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() as i32 != self.n {
            return Err(Error::Dimension("lu solve: rhs rows mismatch".into()));
        }
        let mut x = b.clone();
        let nrhs = b.ncols() as i32;
        let mut info = 0;
        unsafe {
            lapack::dgetrs(
                b'N',
                self.n,
                nrhs,
                self.lu.as_slice(),
                self.n,
                &self.ipiv,
                x.as_mut_slice(),
                self.n,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Numerical(format!("dgetrs failed, info={info}")));
        }
        Ok(x)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.solve_mat(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.solve_mat(&DMatrix::identity(self.n as usize, self.n as usize))
    }
}

/// Solve AX = B.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    LuFactors::new(a)?.solve_mat(b)
}

/// Real Schur decomposition A = Z T Z^T with T quasi-upper-triangular.
/// Returns (t, z, eigenvalues).
pub fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<Complex64>)> {
    let n = check_square(a, "schur")?;
    let nu = n as usize;
    let mut t = a.clone();
    let mut z = DMatrix::zeros(nu, nu);
    let mut wr = vec![0.0; nu];
    let mut wi = vec![0.0; nu];
    let mut sdim = 0;
    let mut bwork = vec![0i32; nu.max(1)];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dgees(
            b'V', b'N', None, n, t.as_mut_slice(), n, &mut sdim, &mut wr, &mut wi,
            z.as_mut_slice(), n, &mut wkopt, -1, &mut bwork, &mut info,
        );
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dgees(
            b'V', b'N', None, n, t.as_mut_slice(), n, &mut sdim, &mut wr, &mut wi,
            z.as_mut_slice(), n, &mut work, lwork, &mut bwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgees failed, info={info}")));
    }
    let eigs = wr.iter().zip(&wi).map(|(&re, &im)| Complex64::new(re, im)).collect();
    Ok((t, z, eigs))
}

/// Eigenvalues of a general real matrix (dgeev, values only).
pub fn eig_vals(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = check_square(a, "eig")?;
    let nu = n as usize;
    let mut m = a.clone();
    let mut wr = vec![0.0; nu];
    let mut wi = vec![0.0; nu];
    let mut vl = [0.0f64];
    let mut vr = [0.0f64];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dgeev(
            b'N', b'N', n, m.as_mut_slice(), n, &mut wr, &mut wi, &mut vl, 1, &mut vr, 1,
            &mut wkopt, -1, &mut info,
        );
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dgeev(
            b'N', b'N', n, m.as_mut_slice(), n, &mut wr, &mut wi, &mut vl, 1, &mut vr, 1,
            &mut work, lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgeev failed, info={info}")));
    }
    Ok(wr.iter().zip(&wi).map(|(&re, &im)| Complex64::new(re, im)).collect())
}

/// Symmetric eigenproblem; eigenvalues ascending. `vectors` requests eigenvectors
/// (returned as columns).
pub fn sym_eigen(a: &DMatrix<f64>, vectors: bool) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let n = check_square(a, "sym_eigen")?;
    let nu = n as usize;
    let mut m = a.clone();
    let mut w = vec![0.0; nu];
    let jobz = if vectors { b'V' } else { b'N' };
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dsyev(jobz, b'L', n, m.as_mut_slice(), n, &mut w, &mut wkopt, -1, &mut info);
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dsyev(jobz, b'L', n, m.as_mut_slice(), n, &mut w, &mut work, lwork, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyev failed, info={info}")));
    }
    Ok((w, if vectors { Some(m) } else { None }))
}

/// Singular values (descending) of a general rectangular matrix.
pub fn svd_vals(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = a.nrows() as i32;
    let n = a.ncols() as i32;
    let mn = m.min(n) as usize;
    if mn == 0 {
        return Ok(vec![]);
    }
    let mut mat = a.clone();
    let mut s = vec![0.0; mn];
    let mut u = [0.0f64];
    let mut vt = [0.0f64];
    let mut iwork = vec![0i32; 8 * mn];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dgesdd(
            b'N', m, n, mat.as_mut_slice(), m, &mut s, &mut u, 1, &mut vt, 1, &mut wkopt, -1,
            &mut iwork, &mut info,
        );
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dgesdd(
            b'N', m, n, mat.as_mut_slice(), m, &mut s, &mut u, 1, &mut vt, 1, &mut work, lwork,
            &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgesdd failed, info={info}")));
    }
    Ok(s)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_square(a, "cholesky")?;
    let nu = n as usize;
    let mut l = a.clone();
    let mut info = 0;
    unsafe {
        lapack::dpotrf(b'L', n, l.as_mut_slice(), n, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dpotrf failed, info={info} (matrix not positive definite?)"
        )));
    }
    for j in 1..nu {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
    Ok(l)
}

/// Thin QR: returns Q with orthonormal columns spanning the column space of `a`.
pub fn qr_thin_q(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = a.nrows() as i32;
    let n = a.ncols() as i32;
    if m < n {
        return Err(Error::Dimension("qr_thin_q: need nrows >= ncols".into()));
    }
    let mut q = a.clone();
    let k = n;
    let mut tau = vec![0.0; n as usize];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dgeqrf(m, n, q.as_mut_slice(), m, &mut tau, &mut wkopt, -1, &mut info);
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dgeqrf(m, n, q.as_mut_slice(), m, &mut tau, &mut work, lwork, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgeqrf failed, info={info}")));
    }
    unsafe {
        lapack::dorgqr(m, n, k, q.as_mut_slice(), m, &tau, &mut wkopt, -1, &mut info);
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dorgqr(m, n, k, q.as_mut_slice(), m, &tau, &mut work, lwork, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dorgqr failed, info={info}")));
    }
    Ok(q)
}

/// Solve the quasi-triangular Sylvester equation  op(A) X + X op(B) = C
/// with A, B in real Schur form (LAPACK dtrsyl). Overwrites and returns X.
pub fn trsyl(
    trana: u8,
    tranb: u8,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = a.nrows() as i32;
    let n = b.nrows() as i32;
    let mut x = c.clone();
    let mut scale = [1.0f64];
    let mut info = 0;
    unsafe {
        lapack::dtrsyl(
            trana,
            tranb,
            &[1],
            m,
            n,
            a.as_slice(),
            m,
            b.as_slice(),
            n,
            x.as_mut_slice(),
            m,
            &mut scale,
            &mut info,
        );
    }
    if info < 0 {
        return Err(Error::Numerical(format!("dtrsyl failed, info={info}")));
    }
    if scale[0] != 1.0 {
        x /= scale[0];
    }
    Ok(x)
}

// ---- complex kernels ----

pub struct CluFactors {
    lu: CMat,
    ipiv: Vec<i32>,
    n: i32,
}

impl CluFactors {
    pub fn new(a: &CMat) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("zlu: square matrix required".into()));
        }
        let n = a.nrows() as i32;
        let mut lu = a.clone();
        let mut ipiv = vec![0i32; n as usize];
        let mut info = 0;
        unsafe {
            lapack::zgetrf(n, n, lu.as_mut_slice(), n, &mut ipiv, &mut info);
        }
        if info != 0 {
            return Err(Error::NearSingular(format!("zgetrf failed, info={info}")));
        }
        Ok(Self { lu, ipiv, n })
    }

    pub fn solve_mat(&self, b: &CMat) -> Result<CMat> {
        let mut x = b.clone();
        let nrhs = b.ncols() as i32;
        let mut info = 0;
        unsafe {
            lapack::zgetrs(
                b'N',
                self.n,
                nrhs,
                self.lu.as_slice(),
                self.n,
                &self.ipiv,
                x.as_mut_slice(),
                self.n,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Numerical(format!("zgetrs failed, info={info}")));
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMat> {
        self.solve_mat(&CMat::identity(self.n as usize, self.n as usize))
    }
}

/// Singular values of a complex matrix (descending).
pub fn csvd_vals(a: &CMat) -> Result<Vec<f64>> {
    let m = a.nrows() as i32;
    let n = a.ncols() as i32;
    let mn = m.min(n) as usize;
    if mn == 0 {
        return Ok(vec![]);
    }
    let mut mat = a.clone();
    let mut s = vec![0.0; mn];
    let mut u = [Complex64::new(0.0, 0.0)];
    let mut vt = [Complex64::new(0.0, 0.0)];
    let mut rwork = vec![0.0; 5 * mn];
    let mut info = 0;
    let mut wkopt = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack::zgesvd(
            b'N', b'N', m, n, mat.as_mut_slice(), m, &mut s, &mut u, 1, &mut vt, 1, &mut wkopt,
            -1, &mut rwork, &mut info,
        );
    }
    let lwork = wkopt[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        lapack::zgesvd(
            b'N', b'N', m, n, mat.as_mut_slice(), m, &mut s, &mut u, 1, &mut vt, 1, &mut work,
            lwork, &mut rwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("zgesvd failed, info={info}")));
    }
    Ok(s)
}

/// Full complex eigendecomposition (values + right eigenvectors).
pub fn ceig(a: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("ceig: square matrix required".into()));
    }
    let n = a.nrows() as i32;
    let nu = a.nrows();
    let mut m = a.clone();
    let mut w = vec![Complex64::new(0.0, 0.0); nu];
    let mut vl = [Complex64::new(0.0, 0.0)];
    let mut vr = CMat::zeros(nu, nu);
    let mut rwork = vec![0.0; 2 * nu];
    let mut info = 0;
    let mut wkopt = [Complex64::new(0.0, 0.0)];
    unsafe {
        lapack::zgeev(
            b'N', b'V', n, m.as_mut_slice(), n, &mut w, &mut vl, 1, vr.as_mut_slice(), n,
            &mut wkopt, -1, &mut rwork, &mut info,
        );
    }
    let lwork = wkopt[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        lapack::zgeev(
            b'N', b'V', n, m.as_mut_slice(), n, &mut w, &mut vl, 1, vr.as_mut_slice(), n,
            &mut work, lwork, &mut rwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("zgeev failed, info={info}")));
    }
    Ok((w, vr))
}
