//! Assembly of the flat-coordinate grid operators.

use nalgebra::DMatrix;

use super::{Grid, SparseMat};
use crate::error::{Error, Result};
use crate::matkit::{self, Mat};
use crate::model::OUModel;

/// Skew coupling between two staggered gradient components: out_j += s H f_k,
/// out_k -= s H^T f_j. H is the symmetrized 4-point transfer between the two
/// midpoint grids, so the full multiplier satisfies B + B^T = I exactly.
#[derive(Debug, Clone)]
pub struct CrossBlock {
    pub j: usize,
    pub k: usize,
    pub s: f64,
    pub h: SparseMat,
}

/// Assembled grid operators in flat coordinates.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub grid: Grid,
    /// Flat difference gradient, nodes -> stacked midpoint fields.
    pub dhat: SparseMat,
    /// Row offsets of the per-dimension field blocks inside the stack.
    pub offsets: Vec<usize>,
    pub cross: Vec<CrossBlock>,
    /// Dense whole-space generator, L = -D^T B D (flat).
    pub l_whole: Mat,
    /// Dense Dirichlet restriction to interior nodes (zero extension).
    pub l_dir: Option<Mat>,
    /// True when the multiplier is exactly half the identity (1D or symmetric drift).
    pub symmetric: bool,
}

/// Range-compressed representation of the Dirichlet block structure. Q is an
/// orthonormal basis of range(D restricted to interior nodes); everything else
/// lives on coefficient space.
pub struct Compressed {
    /// Field-space orthonormal basis of the gradient range (M x N_int).
    pub q: Mat,
    /// Compressed gradient Q^T D (N_int x N_int).
    pub d_c: Mat,
    /// Compressed divergence-with-multiplier D^T B Q (N_int x N_int).
    pub s_c: Mat,
    /// Lifted operator on the gradient range, computed through sparse applies.
    pub u_c: Mat,
}

impl GridOperator {
    pub fn n_int(&self) -> usize {
        self.grid.interior.len()
    }

    pub fn field_dim(&self) -> usize {
        self.dhat.nrows
    }

    /// Apply the field multiplier B (flat coordinates) to a stacked field.
    pub fn apply_bhat(&self, f: &[f64], out: &mut [f64]) {
        let m = self.field_dim();
        debug_assert_eq!(f.len(), m);
        for i in 0..m {
            out[i] = 0.5 * f[i];
        }
        let mut buf = vec![0.0f64; m];
        for cb in &self.cross {
            let (oj, ok) = (self.offsets[cb.j], self.offsets[cb.k]);
            let (mj, mk) = (cb.h.nrows, cb.h.ncols);
            cb.h.apply(&f[ok..ok + mk], &mut buf[..mj]);
            for i in 0..mj {
                out[oj + i] += cb.s * buf[i];
            }
            cb.h.apply_transpose(&f[oj..oj + mj], &mut buf[..mk]);
            for i in 0..mk {
                out[ok + i] -= cb.s * buf[i];
            }
        }
    }

    /// Gradient of a flat interior vector (zero extension off the mask).
    pub fn apply_d_interior(&self, f_int: &[f64], out: &mut [f64]) {
        let n = self.grid.n_nodes();
        let mut full = vec![0.0f64; n];
        for (ii, &node) in self.grid.interior.iter().enumerate() {
            full[node] = f_int[ii];
        }
        self.dhat.apply(&full, out);
    }

    /// Dense gradient applied to the columns of an interior-indexed matrix.
    pub fn d_dense_interior(&self, m: &Mat) -> Mat {
        let mm = self.field_dim();
        let mut out = DMatrix::zeros(mm, m.ncols());
        let mut buf = vec![0.0f64; mm];
        let mut col = vec![0.0f64; self.n_int()];
        for j in 0..m.ncols() {
            for i in 0..self.n_int() {
                col[i] = m[(i, j)];
            }
            self.apply_d_interior(&col, &mut buf);
            for i in 0..mm {
                out[(i, j)] = buf[i];
            }
        }
        out
    }

    /// Gram matrix of the interior gradient, equal to twice the symmetric part
    /// of the negated Dirichlet operator.
    pub fn gram_d_interior(&self) -> Result<Mat> {
        let l = self.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
        Ok(-(l + l.transpose()))
    }

    /// Orthonormal range basis and compressed block operators.
    pub fn compress(&self) -> Result<Compressed> {
        let l = self.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
        let ni = self.n_int();
        let d_full = self.d_dense_interior(&DMatrix::identity(ni, ni));
        let q = matkit::qr_thin_q(&d_full)?;
        let d_c = q.transpose() * &d_full;
        // S = D^T B Q via sparse applies
        let m = self.field_dim();
        let n = self.grid.n_nodes();
        let mut s_c = DMatrix::zeros(ni, ni);
        let mut bq = vec![0.0f64; m];
        let mut dtbq = vec![0.0f64; n];
        let mut qcol = vec![0.0f64; m];
        for j in 0..ni {
            for i in 0..m {
                qcol[i] = q[(i, j)];
            }
            self.apply_bhat(&qcol, &mut bq);
            self.dhat.apply_transpose(&bq, &mut dtbq);
            for (ii, &node) in self.grid.interior.iter().enumerate() {
                s_c[(ii, j)] = dtbq[node];
            }
        }
        // U Q column-by-column through the sparse route, then compress:
        // U q = -D (D^T (B q))
        let mut u_c = DMatrix::zeros(ni, ni);
        let mut dcol = vec![0.0f64; m];
        let mut s_int = vec![0.0f64; ni];
        for j in 0..ni {
            for i in 0..m {
                qcol[i] = q[(i, j)];
            }
            self.apply_bhat(&qcol, &mut bq);
            self.dhat.apply_transpose(&bq, &mut dtbq);
            for (ii, &node) in self.grid.interior.iter().enumerate() {
                s_int[ii] = dtbq[node];
            }
            self.apply_d_interior(&s_int, &mut dcol);
            // compress: u_c[:, j] = -Q^T dcol
            for r in 0..ni {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += q[(i, r)] * dcol[i];
                }
                u_c[(r, j)] = -acc;
            }
        }
        let _ = l;
        Ok(Compressed { q, d_c, s_c, u_c })
    }
}

/// Assemble the flat-coordinate operators on a grid.
pub fn assemble(m: &OUModel, grid: &Grid) -> Result<GridOperator> {
    let d = grid.d;
    let n = grid.n_nodes();
    if n > 8000 {
        return Err(Error::Capacity(format!(
            "dense assembly capped at 8000 nodes (requested {n})"
        )));
    }
    let strides = grid.node_strides();

    // flat difference gradient
    let mut offsets = vec![0usize; d + 1];
    for k in 0..d {
        offsets[k + 1] = offsets[k] + grid.n_mid(k);
    }
    let m_total = offsets[d];
    let mut dhat = SparseMat::zeros(m_total, n);
    for k in 0..d {
        let mut shape = grid.n.clone();
        shape[k] -= 1;
        let mut mstr = vec![1usize; d];
        for kk in (0..d.saturating_sub(1)).rev() {
            mstr[kk] = mstr[kk + 1] * shape[kk + 1];
        }
        let total = grid.n_mid(k);
        for p in 0..total {
            // node index of the lower corner
            let mut node = 0usize;
            for kk in 0..d {
                let ik = (p / mstr[kk]) % shape[kk];
                node += ik * strides[kk];
            }
            let flat = grid.wm[k][p].sqrt() / grid.h[k];
            let r = offsets[k] + p;
            dhat.push(r, node, -flat / grid.sqrt_w[node]);
            let hi = node + strides[k];
            dhat.push(r, hi, flat / grid.sqrt_w[hi]);
        }
    }

    // skew cross-couplings (only when B has off-diagonal entries)
    let mut cross = Vec::new();
    for j in 0..d {
        for k in (j + 1)..d {
            let s = m.b[(j, k)];
            if s.abs() < 1e-15 {
                continue;
            }
            let h_kj = transfer(grid, k, j); // k-grid -> j-grid, geometric
            let h_jk = transfer(grid, j, k);
            // flat versions
            let fk = flatten_transfer(grid, &h_kj, k, j);
            let fj = flatten_transfer(grid, &h_jk, j, k);
            // symmetrized: H = (flat(k->j) + flat(j->k)^T)/2
            let mut h = SparseMat::zeros(grid.n_mid(j), grid.n_mid(k));
            for (r, row) in fk.rows.iter().enumerate() {
                for &(c, v) in row {
                    h.push(r, c as usize, 0.5 * v);
                }
            }
            for (r, row) in fj.rows.iter().enumerate() {
                for &(c, v) in row {
                    h.push(c as usize, r, 0.5 * v);
                }
            }
            cross.push(CrossBlock { j, k, s, h });
        }
    }
    let symmetric = cross.is_empty();

    // dense whole-space L by columns: L e_i = -D^T B D e_i
    let mut l_whole = DMatrix::zeros(n, n);
    {
        let mut e = vec![0.0f64; n];
        let mut df = vec![0.0f64; m_total];
        let mut bdf = vec![0.0f64; m_total];
        let mut out = vec![0.0f64; n];
        let op_probe = GridOperator {
            grid: grid.clone(),
            dhat: dhat.clone(),
            offsets: offsets.clone(),
            cross: cross.clone(),
            l_whole: DMatrix::zeros(0, 0),
            l_dir: None,
            symmetric,
        };
        for i in 0..n {
            e[i] = 1.0;
            op_probe.dhat.apply(&e, &mut df);
            op_probe.apply_bhat(&df, &mut bdf);
            op_probe.dhat.apply_transpose(&bdf, &mut out);
            for r in 0..n {
                l_whole[(r, i)] = -out[r];
            }
            e[i] = 0.0;
        }
    }

    let l_dir = if grid.interior.len() < n {
        let ni = grid.interior.len();
        let mut ld = DMatrix::zeros(ni, ni);
        for (jj, &cj) in grid.interior.iter().enumerate() {
            for (ii, &ci) in grid.interior.iter().enumerate() {
                ld[(ii, jj)] = l_whole[(ci, cj)];
            }
        }
        Some(ld)
    } else {
        None
    };

    Ok(GridOperator { grid: grid.clone(), dhat, offsets, cross, l_whole, l_dir, symmetric })
}

/// Geometric 4-point transfer from the k-staggered grid to the j-staggered
/// grid (2-point at the j-edges).
fn transfer(grid: &Grid, k: usize, j: usize) -> SparseMat {
    let d = grid.d;
    let mut jshape = grid.n.clone();
    jshape[j] -= 1;
    let mut kshape = grid.n.clone();
    kshape[k] -= 1;
    let stride_of = |shape: &[usize]| {
        let mut s = vec![1usize; d];
        for kk in (0..d.saturating_sub(1)).rev() {
            s[kk] = s[kk + 1] * shape[kk + 1];
        }
        s
    };
    let jstr = stride_of(&jshape);
    let kstr = stride_of(&kshape);
    let jtotal: usize = jshape.iter().product();
    let mut out = SparseMat::zeros(jtotal, kshape.iter().product());
    for t in 0..jtotal {
        let mut idx = vec![0usize; d];
        for kk in 0..d {
            idx[kk] = (t / jstr[kk]) % jshape[kk];
        }
        let tj = idx[j];
        let tk = idx[k];
        let mut srcs: Vec<usize> = Vec::with_capacity(4);
        for a in [tj, tj + 1] {
            for b in [tk.wrapping_sub(1), tk] {
                if b >= kshape[k] {
                    continue;
                }
                let mut s = 0usize;
                for kk in 0..d {
                    let v = if kk == j { a } else if kk == k { b } else { idx[kk] };
                    s += v * kstr[kk];
                }
                srcs.push(s);
            }
        }
        let wgt = 1.0 / srcs.len() as f64;
        for s in srcs {
            out.push(t, s, wgt);
        }
    }
    out
}

/// Conjugate a geometric transfer into flat coordinates.
fn flatten_transfer(grid: &Grid, t: &SparseMat, from_k: usize, to_j: usize) -> SparseMat {
    let mut out = SparseMat::zeros(t.nrows, t.ncols);
    for (r, row) in t.rows.iter().enumerate() {
        let sw_r = grid.wm[to_j][r].sqrt();
        for &(c, v) in row {
            out.push(r, c as usize, v * sw_r / grid.wm[from_k][c as usize].sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use crate::galerkin::build_grid;
    use crate::model::{build_model, ModelTol};
    use crate::paths::stream_rng;
    use rand::Rng;

    fn model(entries: &[f64]) -> OUModel {
        let d = (entries.len() as f64).sqrt() as usize;
        build_model(&matkit::mat_from_rows(d, d, entries).unwrap(), ModelTol::default()).unwrap()
    }

    #[test]
    fn bhat_is_half_identity_plus_skew() {
        let m = model(&[-1.0, -1.0, 1.0, -1.0]);
        let g = build_grid(&m, None, 15, 5.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let mt = op.field_dim();
        let mut rng = stream_rng(3, 0);
        for _ in 0..5 {
            let f: Vec<f64> = (0..mt).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut bf = vec![0.0; mt];
            op.apply_bhat(&f, &mut bf);
            // <Bf, f> = 1/2 |f|^2 exactly (skew part drops)
            let quad: f64 = bf.iter().zip(&f).map(|(a, b)| a * b).sum();
            let nrm: f64 = f.iter().map(|v| v * v).sum();
            assert!((quad - 0.5 * nrm).abs() < 1e-12 * (1.0 + nrm));
        }
    }

    #[test]
    fn accretivity_and_kernel_constants() {
        let m = model(&[-1.0, -1.0, 1.0, -1.0]);
        let g = build_grid(&m, None, 15, 5.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let n = g.n_nodes();
        let mut rng = stream_rng(4, 0);
        let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let fv = DMatrix::from_column_slice(n, 1, &f);
        let lf = &op.l_whole * &fv;
        let quad: f64 = -(0..n).map(|i| lf[(i, 0)] * f[i]).sum::<f64>();
        let mut df = vec![0.0; op.field_dim()];
        op.dhat.apply(&f, &mut df);
        let gn: f64 = df.iter().map(|v| v * v).sum();
        assert!((quad - 0.5 * gn).abs() < 1e-10 * (1.0 + gn), "accretivity identity");
        // constants (flat: sqrt(w)) in the kernel
        let ones = DMatrix::from_column_slice(n, 1, &g.sqrt_w);
        let res = (&op.l_whole * &ones).norm();
        assert!(res < 1e-10, "constants not annihilated: {res}");
    }

    #[test]
    fn commutation_and_pi_square_exact() {
        let m = model(&[-1.0, -1.0, 1.0, -1.0]);
        let dom = Domain::half_space(&[1.0, 0.0], 0.0).unwrap();
        let g = build_grid(&m, Some(&dom), 13, 5.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let l = op.l_dir.clone().unwrap();
        let c = op.compress().unwrap();
        let ni = op.n_int();
        // D L = U D at the compressed level
        let lhs = &c.d_c * &l;
        let rhs = &c.u_c * &c.d_c;
        let scale = l.norm();
        assert!((&lhs - &rhs).norm() < 1e-10 * scale, "commutation {:.2e}", (&lhs - &rhs).norm());
        // Pi^2 block-diagonal: S D = -L, D S = -U
        let sd = &c.s_c * &c.d_c;
        assert!((&sd + &l).norm() < 1e-10 * scale);
        let ds = &c.d_c * &c.s_c;
        assert!((&ds + &c.u_c).norm() < 1e-10 * scale);
        let _ = ni;
    }

    #[test]
    fn weak_solution_residual_exact() {
        let m = model(&[-1.0, -1.0, 1.0, -1.0]);
        let dom = Domain::half_space(&[0.0, 1.0], 0.0).unwrap();
        let g = build_grid(&m, Some(&dom), 13, 5.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let l = op.l_dir.as_ref().unwrap();
        let ni = op.n_int();
        let lam = 0.7;
        let mut rng = stream_rng(5, 0);
        let f: Vec<f64> = (0..ni).map(|_| rng.gen::<f64>() - 0.5).collect();
        let fv = DMatrix::from_column_slice(ni, 1, &f);
        let a = DMatrix::identity(ni, ni) * lam - l;
        let phi = matkit::solve(&a, &fv).unwrap();
        let phiv: Vec<f64> = (0..ni).map(|i| phi[(i, 0)]).collect();
        // form route: lam <phi, v> + <B D phi, D v> - <f, v> for random v
        let mt = op.field_dim();
        let mut dphi = vec![0.0; mt];
        op.apply_d_interior(&phiv, &mut dphi);
        let mut bdphi = vec![0.0; mt];
        op.apply_bhat(&dphi, &mut bdphi);
        for _ in 0..5 {
            let v: Vec<f64> = (0..ni).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mut dv = vec![0.0; mt];
            op.apply_d_interior(&v, &mut dv);
            let t1: f64 = lam * phiv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            let t2: f64 = bdphi.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>();
            let t3: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            assert!((t1 + t2 - t3).abs() < 1e-10, "weak-form residual {}", t1 + t2 - t3);
        }
    }
}
