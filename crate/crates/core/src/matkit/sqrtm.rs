//! Principal matrix square root via the real Schur form and a block
//! Parlett-style recurrence on the quasi-triangular factor.

use nalgebra::DMatrix;

use super::lapack;
use crate::error::{Error, Result};

/// Block partition of a quasi-upper-triangular matrix: start index and size (1 or 2).
fn blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

/// Square root of a diagonal block (1x1 positive, or 2x2 with complex pair).
fn sqrt_block(t: &DMatrix<f64>, i: usize, sz: usize, tol: f64) -> Result<[[f64; 2]; 2]> {
    if sz == 1 {
        let v = t[(i, i)];
        if v <= tol {
            return Err(Error::Sectoriality(format!(
                "real eigenvalue {v:.3e} on the closed negative axis"
            )));
        }
        return Ok([[v.sqrt(), 0.0], [0.0, 0.0]]);
    }
    let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
    let theta = 0.5 * (a + d);
    let disc = -0.25 * (a - d) * (a - d) - b * c;
    if disc <= 0.0 {
        return Err(Error::Numerical("2x2 Schur block without complex pair".into()));
    }
    let mu = disc.sqrt();
    let r = (theta * theta + mu * mu).sqrt();
    let alpha = (0.5 * (r + theta)).sqrt();
    let s = alpha * alpha + 0.25 * mu * mu / (alpha * alpha) + 0.0;
    // R = (M + (alpha^2 + beta^2) I) / (2 alpha), beta = mu / (2 alpha)
    let beta = mu / (2.0 * alpha);
    let q = alpha * alpha + beta * beta;
    let _ = s;
    let inv = 1.0 / (2.0 * alpha);
    Ok([[(a + q) * inv, b * inv], [c * inv, (d + q) * inv]])
}

/// Solve the small Sylvester equation  A X + X B = C  with A (p x p), B (q x q),
/// p, q <= 2, by the Kronecker linear system.
fn small_sylvester(a: &[[f64; 2]; 2], p: usize, b: &[[f64; 2]; 2], q: usize, c: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let n = p * q;
    let mut m = [[0.0f64; 4]; 4];
    let mut rhs = [0.0f64; 4];
    // unknown x stored column-major: x[(i,j)] -> index j*p + i
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            rhs[row] = c[i][j];
            for k in 0..p {
                m[row][j * p + k] += a[i][k];
            }
            for k in 0..q {
                m[row][k * p + i] += b[k][j];
            }
        }
    }
    // Gaussian elimination with partial pivoting on n x n
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::Numerical("singular small Sylvester system".into()));
        }
        if piv != col {
            m.swap(piv, col);
            rhs.swap(piv, col);
        }
        let d = m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / d;
            if f != 0.0 {
                for cc in col..n {
                    m[r][cc] -= f * m[col][cc];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = [0.0f64; 4];
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for cc in col + 1..n {
            s -= m[col][cc] * x[cc];
        }
        x[col] = s / m[col][col];
    }
    let mut out = [[0.0f64; 2]; 2];
    for j in 0..q {
        for i in 0..p {
            out[i][j] = x[j * p + i];
        }
    }
    Ok(out)
}

/// Principal square root of a real matrix with no eigenvalues on the closed
/// negative real axis.
pub fn sqrtm_principal(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("sqrtm: square matrix required".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (t, z, _) = lapack::real_schur(a)?;
    let scale = t.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    let sec_tol = 1e-12 * (1.0 + scale);

    let blks = blocks(&t);
    let nb = blks.len();
    let mut u = DMatrix::<f64>::zeros(n, n);

    // diagonal blocks
    for &(i, sz) in &blks {
        let r = sqrt_block(&t, i, sz, sec_tol)?;
        for a_ in 0..sz {
            for b_ in 0..sz {
                u[(i + a_, i + b_)] = r[a_][b_];
            }
        }
    }

    // superdiagonals of blocks: U_ii U_ij + U_ij U_jj = T_ij - sum_k U_ik U_kj
    for dj in 1..nb {
        for bi in 0..nb - dj {
            let bj = bi + dj;
            let (i0, p) = blks[bi];
            let (j0, q) = blks[bj];
            let mut c = [[0.0f64; 2]; 2];
            for a_ in 0..p {
                for b_ in 0..q {
                    let mut s = t[(i0 + a_, j0 + b_)];
                    // accumulate over the strictly-between columns
                    for k in (i0 + p)..j0 {
                        s -= u[(i0 + a_, k)] * u[(k, j0 + b_)];
                    }
                    c[a_][b_] = s;
                }
            }
            let aii = [[u[(i0, i0)], if p == 2 { u[(i0, i0 + 1)] } else { 0.0 }],
                       [if p == 2 { u[(i0 + 1, i0)] } else { 0.0 },
                        if p == 2 { u[(i0 + 1, i0 + 1)] } else { 0.0 }]];
            let bjj = [[u[(j0, j0)], if q == 2 { u[(j0, j0 + 1)] } else { 0.0 }],
                       [if q == 2 { u[(j0 + 1, j0)] } else { 0.0 },
                        if q == 2 { u[(j0 + 1, j0 + 1)] } else { 0.0 }]];
            let x = small_sylvester(&aii, p, &bjj, q, &c)?;
            for a_ in 0..p {
                for b_ in 0..q {
                    u[(i0 + a_, j0 + b_)] = x[a_][b_];
                }
            }
        }
    }

    Ok(&z * u * z.transpose())
}
