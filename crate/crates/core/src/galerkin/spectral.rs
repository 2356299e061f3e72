//! Spectral computations on the assembled grid operators: square-root norm
//! equivalence, bisectoriality scans, spectral gaps, resolvent estimates with
//! potentials, and the holomorphic-calculus probe.

use nalgebra::DVector;
use num_complex::Complex64;

use super::operator::GridOperator;
use crate::domains::PotentialSpec;
use crate::error::{Error, Result};
use crate::matkit::{self, CMat, Mat};
use crate::model::OUModel;
use crate::paths::stream_rng;
use rand::Rng;

/// Extreme generalized eigenvalues of the symmetric-definite pencil (A, B):
/// returns (min, max) of eigenvalues of A x = lambda B x.
pub fn sym_gen_extremes(a: &Mat, b: &Mat) -> Result<(f64, f64)> {
    let g = matkit::cholesky_lower(b)?;
    let n = a.nrows();
    // M = G^{-1} A G^{-T} via two triangular solves
    let mut m = a.clone();
    // forward: G X = A  (column-wise)
    for j in 0..n {
        for i in 0..n {
            let mut s = m[(i, j)];
            for k in 0..i {
                s -= g[(i, k)] * m[(k, j)];
            }
            m[(i, j)] = s / g[(i, i)];
        }
    }
    // now solve (G X^T = M^T): right-multiply by G^{-T}
    for i in 0..n {
        for j in 0..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= m[(i, k)] * g[(j, k)];
            }
            m[(i, j)] = s / g[(j, j)];
        }
    }
    let msym = (&m + m.transpose()) * 0.5;
    let (vals, _) = matkit::sym_eigen(&msym, false)?;
    Ok((vals[0], *vals.last().unwrap()))
}

/// Which operator the gap or Riesz computation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoincareMode {
    /// Whole space, on the orthogonal complement of constants.
    WholeMeanZero,
    /// Dirichlet restriction; no deflation needed.
    Dirichlet,
}

/// Orthonormal basis of the complement of the flat constant vector sqrt(w):
/// a Householder reflector mapping e_1 to the constant, columns 2..n.
fn constant_complement(sqrt_w: &[f64]) -> Mat {
    let n = sqrt_w.len();
    let k = DVector::from_column_slice(sqrt_w).normalize();
    let mut v = k.clone();
    v[0] -= 1.0; // v = k - e1
    let nv = v.norm();
    let house = if nv < 1e-14 {
        Mat::identity(n, n)
    } else {
        let v = v / nv;
        Mat::identity(n, n) - &v * v.transpose() * 2.0
    };
    // columns 1..n span the complement of k
    house.columns(1, n - 1).into_owned()
}

/// Extremes of ||(-L)^{1/2} f|| / ||D f|| over the relevant space.
pub fn riesz_constants(op: &GridOperator, mode: PoincareMode) -> Result<(f64, f64)> {
    match mode {
        PoincareMode::Dirichlet => {
            let l = op.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
            let r = matkit::sqrtm_principal(&(-l))?;
            let gr = r.transpose() * &r;
            let gd = op.gram_d_interior()?;
            let (lo, hi) = sym_gen_extremes(&gr, &gd)?;
            Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
        }
        PoincareMode::WholeMeanZero => {
            let u = constant_complement(&op.grid.sqrt_w);
            let a = -(u.transpose() * &op.l_whole * &u);
            let r = matkit::sqrtm_principal(&a)?;
            let gr = r.transpose() * &r;
            let gd = u.transpose() * (-(op.l_whole.clone() + op.l_whole.transpose())) * &u;
            let (lo, hi) = sym_gen_extremes(&gr, &gd)?;
            Ok((lo.max(0.0).sqrt(), hi.max(0.0).sqrt()))
        }
    }
}

/// Per-t row of the bisectoriality scan.
#[derive(Debug, Clone)]
pub struct BisectorRow {
    pub t: f64,
    /// Norm of the resolvent of the block operator in the balanced product norm.
    pub resolvent_norm: f64,
    /// Entrywise deviation of the inverse from the assembled block formula.
    pub formula_residual: f64,
    /// Unscaled block norms: (1,1), (1,2), (2,1), (2,2).
    pub block_norms: [f64; 4],
    pub singular: bool,
}

#[derive(Debug, Clone)]
pub struct BisectorReport {
    pub rows: Vec<BisectorRow>,
    pub sup_norm: f64,
    pub max_formula_residual: f64,
    pub any_singular: bool,
}

/// Scan t -> (I - i t Pi)^{-1} on the balanced product space. The balancing
/// rescales the field component so that the half-identity multiplier case is
/// selfadjoint and its scan stays at norm one.
pub fn bisectoriality_scan(op: &GridOperator, t_grid: &[f64]) -> Result<BisectorReport> {
    let l = op.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
    let c = op.compress()?;
    let ni = l.nrows();
    let sq2 = 2f64.sqrt();

    let mut rows = Vec::with_capacity(t_grid.len());
    let mut sup = 0.0f64;
    let mut max_resid = 0.0f64;
    let mut any_singular = false;
    for &t in t_grid {
        if t == 0.0 {
            return Err(Error::Argument("bisector scan needs t != 0".into()));
        }
        // complex inverse of I - i t Pi_bal
        let mut mc = CMat::zeros(2 * ni, 2 * ni);
        for i in 0..2 * ni {
            mc[(i, i)] = Complex64::new(1.0, 0.0);
        }
        for r in 0..ni {
            for cc in 0..ni {
                // Pi_bal = [[0, sqrt2 S],[D/sqrt2, 0]]
                mc[(r, ni + cc)] -= Complex64::new(0.0, t) * (sq2 * c.s_c[(r, cc)]);
                mc[(ni + r, cc)] -= Complex64::new(0.0, t) * (c.d_c[(r, cc)] / sq2);
            }
        }
        let lu = match matkit::CluFactors::new(&mc) {
            Ok(lu) => lu,
            Err(_) => {
                any_singular = true;
                rows.push(BisectorRow {
                    t,
                    resolvent_norm: f64::INFINITY,
                    formula_residual: f64::INFINITY,
                    block_norms: [f64::NAN; 4],
                    singular: true,
                });
                continue;
            }
        };
        let inv = lu.inverse()?;
        let norm = matkit::cop_norm(&inv)?;
        sup = sup.max(norm);

        // real resolvents for the block formula
        let eye = Mat::identity(ni, ni);
        let rl = matkit::solve(&(&eye - l * (t * t)), &eye)?;
        let ru = matkit::solve(&(&eye - &c.u_c * (t * t)), &eye)?;
        let b12 = &rl * &c.s_c; // times i t sqrt2
        let b21 = &c.d_c * &rl; // times i t / sqrt2
        let mut resid = 0.0f64;
        for r in 0..ni {
            for cc in 0..ni {
                resid = resid.max((inv[(r, cc)] - Complex64::new(rl[(r, cc)], 0.0)).norm());
                resid = resid.max(
                    (inv[(r, ni + cc)] - Complex64::new(0.0, t * sq2 * b12[(r, cc)])).norm(),
                );
                resid = resid.max(
                    (inv[(ni + r, cc)] - Complex64::new(0.0, t / sq2 * b21[(r, cc)])).norm(),
                );
                resid = resid.max((inv[(ni + r, ni + cc)] - Complex64::new(ru[(r, cc)], 0.0)).norm());
            }
        }
        max_resid = max_resid.max(resid);

        // unscaled block norms: ||Rl||, ||t Rl S||, ||t D(.)^{-1}|| on the full
        // field space via the gradient Gram matrix, ||Ru||
        let n11 = matkit::op_norm(&rl)?;
        let n12 = t.abs() * matkit::op_norm(&b12)?;
        let gd = op.gram_d_interior()?;
        let w = &rl.transpose() * &gd * &rl;
        let (wvals, _) = matkit::sym_eigen(&((&w + w.transpose()) * 0.5), false)?;
        let n21 = t.abs() * wvals.last().unwrap().max(0.0).sqrt();
        let n22 = matkit::op_norm(&ru)?;
        rows.push(BisectorRow {
            t,
            resolvent_norm: norm,
            formula_residual: resid,
            block_norms: [n11, n12, n21, n22],
            singular: false,
        });
    }
    Ok(BisectorReport { rows, sup_norm: sup, max_formula_residual: max_resid, any_singular })
}

/// Spectral gap plus the comparison constant 2w/M^2 from the model.
pub fn poincare_gap(op: &GridOperator, mode: PoincareMode, m: &OUModel) -> Result<(f64, f64)> {
    let bound = 2.0 * m.w / (m.m_const * m.m_const);
    let gap = match mode {
        PoincareMode::WholeMeanZero => {
            let u = constant_complement(&op.flat_constant());
            let s = -(op.l_whole.clone() + op.l_whole.transpose()) * 0.5;
            let a = u.transpose() * s * &u;
            let (vals, _) = matkit::sym_eigen(&((&a + a.transpose()) * 0.5), false)?;
            vals[0]
        }
        PoincareMode::Dirichlet => {
            let l = op.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
            if op.symmetric {
                let s = -(l + l.transpose()) * 0.5;
                let (vals, _) = matkit::sym_eigen(&s, false)?;
                vals[0]
            } else {
                let eigs = matkit::eig_vals(&(-l))?;
                eigs.iter().map(|e| e.re).fold(f64::INFINITY, f64::min)
            }
        }
    };
    Ok((gap, bound))
}

impl GridOperator {
    fn flat_constant(&self) -> Vec<f64> {
        self.grid.sqrt_w.clone()
    }
}

/// Eigenvalues of the generator on polynomial chaos up to total degree n_max:
/// all sums sum_k n_k lambda_k(A) with sum n_k <= n_max.
pub fn chaos_spectrum(m: &OUModel, n_max: usize) -> Result<Vec<Complex64>> {
    if n_max > 6 {
        return Err(Error::Argument("chaos degree limited to 6".into()));
    }
    let lam = matkit::eig_vals(&m.a)?;
    let d = lam.len();
    let mut out = Vec::new();
    let mut counts = vec![0usize; d];
    loop {
        let total: usize = counts.iter().sum();
        if total <= n_max {
            let s = counts
                .iter()
                .zip(&lam)
                .fold(Complex64::new(0.0, 0.0), |acc, (&n, l)| acc + l * n as f64);
            out.push(s);
        }
        // advance counts within the box [0, n_max]^d
        let mut k = 0;
        loop {
            if k == d {
                out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                out.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
                return Ok(out);
            }
            counts[k] += 1;
            if counts[k] <= n_max {
                break;
            }
            counts[k] = 0;
            k += 1;
        }
    }
}

/// sup over lambda of sqrt(lambda) ||D (lambda - L)^{-1}|| on the Dirichlet
/// operator (weighted norms; flat coordinates).
pub fn gr_scan(op: &GridOperator, lambdas: &[f64]) -> Result<f64> {
    let l = op.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
    let ni = l.nrows();
    let gd = op.gram_d_interior()?;
    let eye = Mat::identity(ni, ni);
    let mut worst = 0.0f64;
    for &lam in lambdas {
        let x = matkit::solve(&(&eye * lam - l), &eye)?;
        let w = x.transpose() * &gd * &x;
        let (vals, _) = matkit::sym_eigen(&((&w + w.transpose()) * 0.5), false)?;
        worst = worst.max(lam.sqrt() * vals.last().unwrap().max(0.0).sqrt());
    }
    Ok(worst)
}

/// sup over t of ||t D (I - t^2 L)^{-1}|| on the Dirichlet operator.
pub fn ndr_scan(op: &GridOperator, ts: &[f64]) -> Result<f64> {
    let l = op.l_dir.as_ref().ok_or_else(|| Error::Domain("no Dirichlet restriction".into()))?;
    let ni = l.nrows();
    let gd = op.gram_d_interior()?;
    let eye = Mat::identity(ni, ni);
    let mut worst = 0.0f64;
    for &t in ts {
        let x = matkit::solve(&(&eye - l * (t * t)), &eye)?;
        let w = x.transpose() * &gd * &x;
        let (vals, _) = matkit::sym_eigen(&((&w + w.transpose()) * 0.5), false)?;
        worst = worst.max(t.abs() * vals.last().unwrap().max(0.0).sqrt());
    }
    Ok(worst)
}

/// Worst margins of the four resolvent estimates with the penalization
/// potential on the whole-space operator:
///   ||phi||      <= ||f|| / lambda
///   ||D phi||^2  <= (2/lambda) ||f||^2
///   <V phi, phi> <= (eps/lambda) ||f||^2
///   int V |D phi|^2 <= sqrt(eps/lambda) ||f||^2
/// Margins are (quantity - bound); all should be <= slack.
#[derive(Debug, Clone)]
pub struct ResolventQuad {
    pub lambda: f64,
    pub eps: f64,
    pub margins: [f64; 4],
}

pub fn resolvent_estimates(
    op: &GridOperator,
    pot_domain: &crate::domains::Domain,
    lambdas: &[f64],
    epss: &[f64],
    n_rand: usize,
    seed: u64,
) -> Result<Vec<ResolventQuad>> {
    let n = op.grid.n_nodes();
    let d = op.grid.d;
    let eye = Mat::identity(n, n);
    let mut out = Vec::new();
    for &eps in epss {
        let spec = PotentialSpec::new(pot_domain.clone(), eps)?;
        let v_nodes: Vec<f64> = (0..n).map(|i| spec.eval(&op.grid.node(i))).collect();
        let v_mid: Vec<Vec<f64>> = (0..d)
            .map(|k| (0..op.grid.n_mid(k)).map(|p| spec.eval(&op.grid.mid(k, p))).collect())
            .collect();
        for &lam in lambdas {
            let mut a = &eye * lam - &op.l_whole;
            for i in 0..n {
                a[(i, i)] += v_nodes[i] / eps;
            }
            let lu = matkit::LuFactors::new(&a)?;
            let mut margins = [f64::NEG_INFINITY; 4];
            let mut rng = stream_rng(seed, (lam.to_bits() ^ eps.to_bits()) & 0xffff);
            for _ in 0..n_rand {
                let mut f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                let nf = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut f {
                    *v /= nf;
                }
                let phi = lu.solve_vec(&DVector::from_column_slice(&f))?;
                let phis: Vec<f64> = phi.iter().copied().collect();
                let mut dphi = vec![0.0; op.field_dim()];
                op.dhat.apply(&phis, &mut dphi);
                let nphi = phi.norm();
                let ndphi2: f64 = dphi.iter().map(|v| v * v).sum();
                let vphi: f64 = (0..n).map(|i| v_nodes[i] * phis[i] * phis[i]).sum();
                let mut vdphi = 0.0;
                for k in 0..d {
                    let off = op.offsets[k];
                    for p in 0..op.grid.n_mid(k) {
                        vdphi += v_mid[k][p] * dphi[off + p] * dphi[off + p];
                    }
                }
                margins[0] = margins[0].max(nphi - 1.0 / lam);
                margins[1] = margins[1].max(ndphi2 - 2.0 / lam);
                margins[2] = margins[2].max(vphi - eps / lam);
                margins[3] = margins[3].max(vdphi - (eps / lam).sqrt());
            }
            out.push(ResolventQuad { lambda: lam, eps, margins });
        }
    }
    Ok(out)
}

/// Measured holomorphic-calculus bound on the lifted range operator for a
/// probe family (imaginary powers and rational bumps on a sector of angle
/// theta). This measures the discretization; it cannot certify the continuum
/// hypothesis.
#[derive(Debug, Clone)]
pub struct HinfProbe {
    pub theta: f64,
    pub probe: f64,
    /// Conditioning of the diagonalization used (f64::INFINITY if the contour
    /// fallback was taken).
    pub diag_condition: f64,
}

pub fn hinf_norm_probe(op: &GridOperator, theta: f64) -> Result<HinfProbe> {
    let c = op.compress()?;
    let neg_u = -&c.u_c;
    let ni = neg_u.nrows();
    let mut a = CMat::zeros(ni, ni);
    for j in 0..ni {
        for i in 0..ni {
            a[(i, j)] = Complex64::new(neg_u[(i, j)], 0.0);
        }
    }
    let (vals, vecs) = matkit::ceig(&a)?;
    let sv = matkit::csvd_vals(&vecs)?;
    let cond = sv.first().copied().unwrap_or(1.0) / sv.last().copied().unwrap_or(1.0).max(1e-300);

    // family: z^{is} for s in [-5, 5]; bumps (z/(1+z))^alpha (1/(1+z))^beta
    let mut family: Vec<(Box<dyn Fn(Complex64) -> Complex64>, f64)> = Vec::new();
    for k in 0..11 {
        let s = -5.0 + k as f64;
        if s == 0.0 {
            continue;
        }
        let supnorm = (s.abs() * theta).exp();
        family.push((Box::new(move |z: Complex64| (Complex64::new(0.0, s) * z.ln()).exp()), supnorm));
    }
    for &(al, be) in &[(1.0, 1.0), (0.5, 0.5), (2.0, 1.0)] {
        let f = move |z: Complex64| {
            (z / (Complex64::new(1.0, 0.0) + z)).powf(al)
                * (Complex64::new(1.0, 0.0) + z).powf(-be)
        };
        // sup over the sector boundary, sampled
        let mut sup: f64 = 0.0;
        for k in 0..200 {
            let r = 10f64.powf(-6.0 + 12.0 * k as f64 / 199.0);
            for sgn in [-1.0, 1.0] {
                let z = Complex64::from_polar(r, sgn * theta);
                sup = sup.max(f(z).norm());
            }
        }
        family.push((Box::new(f), sup.max(1e-12)));
    }
    // identity probe f(z) = 1 has ratio exactly 1 by construction; include it
    family.push((Box::new(|_| Complex64::new(1.0, 0.0)), 1.0));

    let mut probe = 0.0f64;
    if cond < 1e8 {
        let lu = matkit::CluFactors::new(&vecs)?;
        let vinv = lu.inverse()?;
        for (f, sup) in &family {
            let mut fd = CMat::zeros(ni, ni);
            for i in 0..ni {
                fd[(i, i)] = f(vals[i]);
            }
            let fu = &vecs * fd * &vinv;
            probe = probe.max(matkit::cop_norm(&fu)? / sup);
        }
        Ok(HinfProbe { theta, probe, diag_condition: cond })
    } else {
        // contour-integral fallback: circle around the spectrum staying in the
        // open right half-plane
        let re_min = vals.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        let center = Complex64::new(
            (vals.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max) + re_min) / 2.0,
            0.0,
        );
        let rad0 = vals.iter().map(|v| (v - center).norm()).fold(0.0, f64::max);
        let radius = rad0 + 0.4 * re_min.max(1e-6);
        for (f, sup) in &family {
            let mut prev = f64::INFINITY;
            let mut nq = 64usize;
            loop {
                let mut acc = CMat::zeros(ni, ni);
                for k in 0..nq {
                    let ang = 2.0 * std::f64::consts::PI * k as f64 / nq as f64;
                    let z = center + Complex64::from_polar(radius, ang);
                    let dz = Complex64::from_polar(radius, ang) * Complex64::new(0.0, 1.0)
                        * (2.0 * std::f64::consts::PI / nq as f64);
                    let mut zm = -a.clone();
                    for i in 0..ni {
                        zm[(i, i)] += z;
                    }
                    let rz = matkit::CluFactors::new(&zm)?.inverse()?;
                    acc += rz * (f(z) * dz / Complex64::new(0.0, 2.0 * std::f64::consts::PI));
                }
                let nrm = matkit::cop_norm(&acc)?;
                if (nrm - prev).abs() <= 1e-6 * (1.0 + nrm) || nq >= 1024 {
                    probe = probe.max(nrm / sup);
                    break;
                }
                prev = nrm;
                nq *= 2;
            }
        }
        Ok(HinfProbe { theta, probe, diag_condition: f64::INFINITY })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::Domain;
    use crate::galerkin::{assemble, build_grid};
    use crate::model::{build_model, ModelTol};

    fn model(entries: &[f64]) -> OUModel {
        let d = (entries.len() as f64).sqrt() as usize;
        build_model(&matkit::mat_from_rows(d, d, entries).unwrap(), ModelTol::default()).unwrap()
    }

    #[test]
    fn hermite_spectrum_1d() {
        let m = model(&[-1.0]);
        let g = build_grid(&m, None, 200, 6.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let s = -(op.l_whole.clone() + op.l_whole.transpose()) * 0.5;
        let (vals, _) = matkit::sym_eigen(&s, false).unwrap();
        for (k, want) in [0.0, 1.0, 2.0, 3.0].iter().enumerate() {
            let got = vals[k];
            assert!(
                (got - want).abs() <= 0.01 * want.max(0.02),
                "eigenvalue {k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn halfline_dirichlet_gap() {
        for a in [0.5, 1.0, 2.0] {
            let m = model(&[-a]);
            let dom = Domain::half_space(&[1.0], 0.0).unwrap();
            let g = build_grid(&m, Some(&dom), 201, 6.0).unwrap();
            let op = assemble(&m, &g).unwrap();
            let (gap, bound) = poincare_gap(&op, PoincareMode::Dirichlet, &m).unwrap();
            assert!((gap - a).abs() <= 0.02 * a, "gap {gap} vs {a}");
            // 2w/M^2 = 2a here
            assert!((bound - 2.0 * a).abs() < 0.05 * a);
        }
    }

    #[test]
    fn whole_space_gap_and_constant() {
        for a in [0.5, 2.0] {
            let m = model(&[-a]);
            let g = build_grid(&m, None, 200, 6.0).unwrap();
            let op = assemble(&m, &g).unwrap();
            let (gap, bound) = poincare_gap(&op, PoincareMode::WholeMeanZero, &m).unwrap();
            assert!((gap - a).abs() <= 0.02 * a, "gap {gap} vs {a}");
            // variance constant 1/(2 gap) equals M^2/(2w) = 1/(2a) for this family
            assert!((1.0 / (2.0 * gap) - 1.0 / bound).abs() < 0.05 / a);
        }
    }

    #[test]
    fn riesz_symmetric_exact() {
        let m = model(&[-1.0]);
        let dom = Domain::half_space(&[1.0], 0.0).unwrap();
        let g = build_grid(&m, Some(&dom), 201, 6.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let (c, cc) = riesz_constants(&op, PoincareMode::Dirichlet).unwrap();
        let want = 0.5f64.sqrt();
        assert!((c - want).abs() < 1e-6, "c = {c}");
        assert!((cc - want).abs() < 1e-6, "C = {cc}");
    }

    #[test]
    fn chaos_spectrum_cases() {
        let m = model(&[-1.0]);
        let s = chaos_spectrum(&m, 3).unwrap();
        let res: Vec<f64> = s.iter().map(|z| z.re).collect();
        assert_eq!(res, vec![-3.0, -2.0, -1.0, 0.0]);
        let m0 = chaos_spectrum(&m, 0).unwrap();
        assert_eq!(m0.len(), 1);
        assert!(m0[0].norm() < 1e-15);

        let m2 = model(&[-1.0, -1.0, 1.0, -1.0]);
        let s = chaos_spectrum(&m2, 2).unwrap();
        // {0, -1 +- i, -2, -2 +- 2i}
        assert_eq!(s.len(), 6);
        assert!(s.iter().any(|z| (z - Complex64::new(-1.0, 1.0)).norm() < 1e-12));
        assert!(s.iter().any(|z| (z - Complex64::new(-2.0, -2.0)).norm() < 1e-12));
        assert!(s.iter().any(|z| (z - Complex64::new(-2.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn chaos_vs_dense_eigensolve_2d() {
        let m = model(&[-1.0, -1.0, 1.0, -1.0]);
        let g = build_grid(&m, None, 31, 5.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let eigs = matkit::eig_vals(&op.l_whole).unwrap();
        let mut eigs: Vec<Complex64> = eigs.into_iter().collect();
        eigs.sort_by(|a, b| b.re.total_cmp(&a.re));
        let oracle = [
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 1.0),
            Complex64::new(-1.0, -1.0),
        ];
        for want in oracle {
            let best = eigs.iter().map(|e| (e - want).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 0.02, "chaos eigenvalue {want} missed by {best}");
        }
    }

    #[test]
    fn hinf_probe_symmetric_bounded() {
        let m = model(&[-1.0]);
        let dom = Domain::half_space(&[1.0], 0.0).unwrap();
        let g = build_grid(&m, Some(&dom), 61, 6.0).unwrap();
        let op = assemble(&m, &g).unwrap();
        let probe = hinf_norm_probe(&op, 0.1).unwrap();
        // selfadjoint calculus: f(U) has norm sup over spectrum <= sup over sector
        assert!(probe.probe <= 1.0 + 1e-8, "probe = {}", probe.probe);
    }
}
