//! The check catalog: one entry per verified claim.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{CheckCtx, CheckDef, CheckOutcome, SeriesRow, Verdict};
use crate::domains::{Domain, PotentialSpec};
use crate::error::{Error, Result};
use crate::galerkin::{
    self, assemble, bisectoriality_scan, build_grid, gr_scan, hinf_norm_probe, ndr_scan,
    poincare_gap, resolvent_estimates, riesz_constants, PoincareMode,
};
use crate::matkit;
use crate::model::{gauss_hermite_rule, Polynomial, TestFunction};
use crate::paths::{self, stream_rng};
use crate::semigroups::{
    exact_on_exponentials, ergodic_limit, exit_bias_budget, fk_squared_norm, invariance_check,
    mc_killed, mc_killed_curve, mc_semigroup, penalization_sweep, ExpFunctional, FkPotential,
};

fn scaled(n: usize, scale: f64) -> usize {
    (n as f64 * scale) as usize
}

fn pass_if(cond: bool) -> Verdict {
    if cond {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn random_cubic(d: usize, rng: &mut impl Rng) -> Polynomial {
    let mut terms = Vec::new();
    let mut exps = vec![0u32; d];
    fn rec(
        k: usize,
        left: u32,
        exps: &mut Vec<u32>,
        terms: &mut Vec<(f64, Vec<u32>)>,
        rng: &mut impl Rng,
    ) {
        if k == exps.len() {
            terms.push((rng.gen::<f64>() - 0.5, exps.clone()));
            return;
        }
        for e in 0..=left {
            exps[k] = e;
            rec(k + 1, left - e, exps, terms, rng);
        }
        exps[k] = 0;
    }
    rec(0, 3, &mut exps, &mut terms, rng);
    Polynomial::new(d, terms).expect("well-formed")
}

// ---- model checks ----

fn check_duality(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let mut rng = stream_rng(ctx.seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..6 {
        let f = random_cubic(m.d, &mut rng);
        let g = random_cubic(m.d, &mut rng);
        worst = worst.max(crate::model::duality_residual_poly(m, &f, &g).abs());
    }
    // independent quadrature route in low dimension
    let mut quad_note = String::from("moment route only");
    if m.d <= 3 {
        let mu = m.measure();
        let rule = gauss_hermite_rule(&mu, 8)?;
        let mut rng = stream_rng(ctx.seed, 2);
        for _ in 0..3 {
            let f = random_cubic(m.d, &mut rng);
            let g = random_cubic(m.d, &mut rng);
            let tf = TestFunction::Poly(f.clone());
            let tg = TestFunction::Poly(g.clone());
            let l = crate::model::dirichlet_form(m, &tf, &tg, &rule);
            let i = rule.integrate(|x| crate::model::generator_apply(m, &tf, x) * tg.eval(x));
            worst = worst.max((l + i).abs());
        }
        quad_note = "moment and quadrature routes".into();
    }
    Ok(CheckOutcome {
        measured: worst,
        bound: 0.0,
        tol: 1e-8,
        verdict: pass_if(worst <= 1e-8),
        detail: format!("max |l(f,g) + int (Lf) g| over cubic pairs; {quad_note}"),
        series: vec![],
    })
}

fn check_bmatrix(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let sym = (&m.b + m.b.transpose() - DMatrix::identity(m.d, m.d)).norm();
    let mut worst_quad: f64 = 0.0;
    let mut rng = stream_rng(ctx.seed, 1);
    for _ in 0..100 {
        let h = DVector::from_fn(m.d, |_, _| rng.gen::<f64>() - 0.5);
        let q = (&m.b * &h).dot(&h) - 0.5 * h.norm_squared();
        worst_quad = worst_quad.max(q.abs() / (1.0 + h.norm_squared()));
    }
    let measured = sym.max(worst_quad);
    Ok(CheckOutcome {
        measured,
        bound: 0.0,
        tol: 1e-12,
        verdict: pass_if(measured <= 1e-12),
        detail: format!("|B+B^T-I| = {sym:.3e}; worst quadratic-form defect {worst_quad:.3e}"),
        series: vec![],
    })
}

fn check_increment(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let mut xstar = DVector::zeros(m.d);
    xstar[0] = 1.0;
    let ln2 = 2f64.ln();
    let pairs = vec![(0.0, 0.0), (0.3, 0.3 + ln2), (0.1, 0.6), (0.0, 1.0)];
    let n = scaled(60_000, ctx.n_scale);
    let rows = paths::stationary_increment_check(m, &xstar, &pairs, n, ctx.seed)?;
    let mut worst_se: f64 = 0.0;
    let mut bound_ok = true;
    let mut series = Vec::new();
    for r in &rows {
        if r.std_error > 0.0 {
            worst_se = worst_se.max((r.mc - r.closed_form).abs() / r.std_error);
        }
        bound_ok &= r.pass_bound;
        series.push(SeriesRow::Mc {
            estimator: "increment".into(),
            t: r.t - r.s,
            eps: 0.0,
            value: r.mc,
            std_error: r.std_error,
            bias_note: format!("closed={:.6e} bound={:.6e}", r.closed_form, r.bound),
        });
    }
    Ok(CheckOutcome {
        measured: worst_se,
        bound: 4.0,
        tol: 0.0,
        verdict: pass_if(worst_se <= 4.0 && bound_ok),
        detail: format!("worst |mc-closed|/se over {} pairs; linear bound held: {bound_ok}", rows.len()),
        series,
    })
}

// ---- semigroup checks ----

fn check_invariance(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let n = scaled(100_000, ctx.n_scale);
    let mut xstar = DVector::zeros(m.d);
    xstar[0] = 0.7;
    let kf = ExpFunctional::new(xstar)?;
    let f = kf.to_test_function(m);
    let est = invariance_check(m, &f, 0.8, n, ctx.seed)?;
    let mut worst = (est.mean - 1.0).abs() / est.std_error;
    // quadratic polynomial: int x1^2 dmu = Q_11
    let p = Polynomial::new(m.d, vec![(1.0, {
        let mut e = vec![0u32; m.d];
        e[0] = 2;
        e
    })])?;
    let est2 = invariance_check(m, &TestFunction::Poly(p), 0.5, n, ctx.seed + 1)?;
    worst = worst.max((est2.mean - m.q_inf[(0, 0)]).abs() / est2.std_error);
    Ok(CheckOutcome {
        measured: worst,
        bound: 4.0,
        tol: 0.0,
        verdict: pass_if(worst <= 4.0),
        detail: "stationary-start means vs exact invariant integrals (exp + quadratic)".into(),
        series: vec![],
    })
}

fn check_oracle(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let n = scaled(100_000, ctx.n_scale);
    let ln2 = 2f64.ln();
    let ts = [0.3, ln2, 1.5];
    let xs = [0.0, 1.0, -0.5];
    let stars = [1.0, 0.5, -1.0];
    let mut worst: f64 = 0.0;
    let mut idx = 0u64;
    let mut series = Vec::new();
    for &t in &ts {
        for &xv in &xs {
            for &sv in &stars {
                let mut x = DVector::zeros(m.d);
                x[0] = xv;
                let mut xstar = DVector::zeros(m.d);
                xstar[0] = sv;
                if m.d > 1 {
                    x[1] = -0.3 * xv;
                    xstar[1] = 0.4 * sv;
                }
                let kf = ExpFunctional::new(xstar)?;
                let f = kf.to_test_function(m);
                let want = exact_on_exponentials(m, &kf, t, &x)?;
                let est = mc_semigroup(m, &f, &x, t, n, ctx.seed ^ idx)?;
                if est.std_error > 0.0 {
                    worst = worst.max((est.mean - want).abs() / est.std_error);
                }
                series.push(SeriesRow::Mc {
                    estimator: "exp-oracle".into(),
                    t,
                    eps: 0.0,
                    value: est.mean,
                    std_error: est.std_error,
                    bias_note: format!("closed={want:.8e}"),
                });
                idx += 1;
            }
        }
    }
    // reference value at the 1D point: exp(-1/16)
    let detail = if m.d == 1 {
        let kf = ExpFunctional::new(DVector::from_vec(vec![1.0]))?;
        let v = exact_on_exponentials(m, &kf, ln2, &DVector::zeros(1))?;
        format!("27-point grid; closed form at the reference point = {v:.6} (exp(-1/16) = {:.6})", (-1.0f64 / 16.0).exp())
    } else {
        "27-point grid of (t, x, x*)".into()
    };
    Ok(CheckOutcome {
        measured: worst,
        bound: 4.0,
        tol: 0.0,
        verdict: pass_if(worst <= 4.0),
        detail,
        series,
    })
}

fn check_ergodic(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let n = scaled(100_000, ctx.n_scale);
    let mut a = DVector::zeros(m.d);
    a[0] = 1.0;
    let f = TestFunction::Poly(Polynomial::linear(&a));
    let rows = ergodic_limit(m, &f, &[1.0, 2.0, 3.0], n, ctx.seed)?;
    let mut worst: f64 = 0.0;
    let mut series = Vec::new();
    for r in &rows {
        if r.std_error > 0.0 {
            worst = worst.max((r.norm - r.closed_form).abs() / r.std_error);
        }
        series.push(SeriesRow::Mc {
            estimator: "ergodic-l2".into(),
            t: r.t,
            eps: 0.0,
            value: r.norm,
            std_error: r.std_error,
            bias_note: format!("closed={:.6e}", r.closed_form),
        });
    }
    // pointwise trend of the exponential functional (reported, not asserted)
    let kf = ExpFunctional::new(a * 0.8)?;
    for &t in &[1.0, 2.0, 4.0, 8.0] {
        let mut x = DVector::zeros(m.d);
        x[0] = 1.0;
        let v = exact_on_exponentials(m, &kf, t, &x)?;
        series.push(SeriesRow::Mc {
            estimator: "ergodic-pointwise".into(),
            t,
            eps: 0.0,
            value: v,
            std_error: 0.0,
            bias_note: "trend toward 1".into(),
        });
    }
    Ok(CheckOutcome {
        measured: worst,
        bound: 4.0,
        tol: 0.0,
        verdict: pass_if(worst <= 4.0),
        detail: "L2 distance of P(t)f to the mean vs the closed form, linear f".into(),
        series,
    })
}

fn check_fk_contraction(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let n = scaled(30_000, ctx.n_scale);
    let pot = FkPotential::Penalized(PotentialSpec::new(ctx.domain.clone(), 0.2)?);
    let mut a = DVector::zeros(m.d);
    a[0] = 1.0;
    let f = TestFunction::TanhLinear { a, b: 0.3 };
    let sq = fk_squared_norm(m, &pot, &f, 0.6, n, 0.04, ctx.seed)?;
    let f2 = if m.d <= 3 {
        let rule = gauss_hermite_rule(&m.measure(), 40)?;
        rule.integrate(|x| f.eval(x) * f.eval(x))
    } else {
        return Err(Error::Capability("contraction reference needs d <= 3".into()));
    };
    let margin = (sq.mean - f2) / sq.std_error;
    Ok(CheckOutcome {
        measured: margin,
        bound: 4.0,
        tol: 0.0,
        verdict: pass_if(margin <= 4.0),
        detail: format!("int (P_eps f)^2 = {:.6e} (se {:.1e}) vs int f^2 = {f2:.6e}", sq.mean, sq.std_error),
        series: vec![],
    })
}

fn check_resolvent4(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let (n_per_dim, r) = if m.d == 1 { (200, 6.0) } else { (61, 5.0) };
    let grid = build_grid(m, None, n_per_dim, r)?;
    let op = assemble(m, &grid)?;
    let lambdas = [0.5, 1.0, 2.0, 4.0];
    let epss = [0.05, 0.1, 0.2];
    let quads = resolvent_estimates(&op, ctx.domain, &lambdas, &epss, 10, ctx.seed)?;
    let mut worst = f64::NEG_INFINITY;
    let mut series = Vec::new();
    for q in &quads {
        for (i, &v) in q.margins.iter().enumerate() {
            worst = worst.max(v);
            series.push(SeriesRow::Grid {
                table: format!("resolvent4.m{i}"),
                param: q.lambda,
                value: v,
                extra: q.eps,
            });
        }
    }
    Ok(CheckOutcome {
        measured: worst,
        bound: 0.0,
        tol: 1e-8,
        verdict: pass_if(worst <= 1e-8),
        detail: format!(
            "worst margin of the four bounds over lambda in {lambdas:?}, eps in {epss:?}, 10 random f, {n_per_dim} nodes/dim"
        ),
        series,
    })
}

// ---- killed semigroup checks ----

fn check_kill_t0(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let mut x = DVector::zeros(m.d);
    x[0] = 0.8;
    let mut a = DVector::zeros(m.d);
    a[0] = 1.0;
    let f = TestFunction::Poly(Polynomial::linear(&a));
    let e = mc_killed(m, ctx.domain, &f, &x, 0.0, 100, 0.1, ctx.seed, true)?;
    let err = (e.mean - f.eval(&x)).abs();
    Ok(CheckOutcome {
        measured: err,
        bound: 0.0,
        tol: 0.0,
        verdict: pass_if(err == 0.0),
        detail: "P_O(0)f = f exactly".into(),
        series: vec![],
    })
}

fn check_kill_eigen(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    if m.d != 1 {
        return Err(Error::Capability("kill.eigen is the half-line eigenfunction oracle (d=1)".into()));
    }
    let dom = Domain::half_space(&[1.0], 0.0)?;
    let x = DVector::from_vec(vec![1.0]);
    let h = 1e-3;
    let n = scaled(200_000, ctx.n_scale);
    let f = TestFunction::Poly(Polynomial::linear(&DVector::from_vec(vec![1.0])));
    let est = mc_killed(m, &dom, &f, &x, 1.0, n, h, ctx.seed, true)?;
    let want = (-1.0f64).exp();
    let budget = exit_bias_budget(h, true, want);
    let err = (est.mean - want).abs();
    let allowed = 4.0 * est.std_error + budget;

    // survival curve and slope on [1, 3]
    let one = TestFunction::Poly(Polynomial::constant(1, 1.0));
    let ts = [1.0, 1.5, 2.0, 2.5, 3.0];
    let curve = mc_killed_curve(m, &dom, &one, &x, &ts, n, h, ctx.seed + 1, true)?;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut series = vec![SeriesRow::Mc {
        estimator: "killed-value".into(),
        t: 1.0,
        eps: 0.0,
        value: est.mean,
        std_error: est.std_error,
        bias_note: est.bias_note.clone().unwrap_or_default(),
    }];
    for (i, &t) in ts.iter().enumerate() {
        let v = curve[i].mean.max(1e-12);
        let ly = v.ln();
        sx += t;
        sy += ly;
        sxx += t * t;
        sxy += t * ly;
        series.push(SeriesRow::Mc {
            estimator: "killed-survival".into(),
            t,
            eps: 0.0,
            value: curve[i].mean,
            std_error: curve[i].std_error,
            bias_note: curve[i].bias_note.clone().unwrap_or_default(),
        });
    }
    let k = ts.len() as f64;
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let slope_ok = (slope + 1.0).abs() <= 0.1;
    Ok(CheckOutcome {
        measured: err,
        bound: allowed,
        tol: 0.0,
        verdict: pass_if(err <= allowed && slope_ok),
        detail: format!(
            "estimate {:.6} vs e^-1 = {want:.6} (4 se + budget = {allowed:.2e}); log-survival slope {slope:.4}",
            est.mean
        ),
        series,
    })
}

fn check_pen_sweep(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    if m.d != 1 {
        return Err(Error::Capability("pen.sweep runs in the half-line configuration (d=1)".into()));
    }
    let dom = Domain::half_space(&[1.0], 0.0)?;
    let x = DVector::from_vec(vec![1.0]);
    let f = TestFunction::Poly(Polynomial::linear(&DVector::from_vec(vec![1.0])));
    let eps_list = [0.4, 0.2, 0.1, 0.05];
    let h = 1e-3;
    let n = scaled(200_000, ctx.n_scale);
    let sweep = penalization_sweep(m, &dom, &f, &x, 1.0, &eps_list, n, h, ctx.seed, true)?;
    let mut series = Vec::new();
    for row in &sweep.rows {
        series.push(SeriesRow::Mc {
            estimator: "pen-sweep-gap".into(),
            t: 1.0,
            eps: row.eps,
            value: row.gap_mean,
            std_error: row.gap_se,
            bias_note: format!("P_eps={:.6e}", row.p_eps.mean),
        });
    }
    series.push(SeriesRow::Mc {
        estimator: "pen-sweep-killed".into(),
        t: 1.0,
        eps: 0.0,
        value: sweep.killed.mean,
        std_error: sweep.killed.std_error,
        bias_note: sweep.killed.bias_note.clone().unwrap_or_default(),
    });
    let ok = sweep.monotone && sweep.dominance && sweep.final_gap <= sweep.final_bound;
    Ok(CheckOutcome {
        measured: sweep.final_gap,
        bound: sweep.final_bound,
        tol: 0.0,
        verdict: pass_if(ok),
        detail: format!(
            "gaps {:?}; monotone={}, dominance={}; final gap vs 3 se + budget: {:.3e} vs {:.3e} (the finite-eps penalization residual dominates at eps = 0.05; see the sweep series)",
            sweep.rows.iter().map(|r| (r.eps, r.gap_mean)).collect::<Vec<_>>(),
            sweep.monotone,
            sweep.dominance,
            sweep.final_gap,
            sweep.final_bound
        ),
        series,
    })
}

// ---- grid checks ----

fn grids_for(ctx: &CheckCtx) -> Result<Vec<(String, galerkin::GridOperator)>> {
    let m = ctx.model;
    let mut out = Vec::new();
    if m.d == 1 {
        let g = build_grid(m, Some(ctx.domain), 201, 6.0)?;
        out.push(("halfline-201".to_string(), assemble(m, &g)?));
    } else {
        let g = build_grid(m, Some(ctx.domain), 21, 5.0)?;
        out.push(("halfplane-21".to_string(), assemble(m, &g)?));
        let g = build_grid(m, Some(ctx.domain), 41, 5.0)?;
        out.push(("halfplane-41".to_string(), assemble(m, &g)?));
    }
    Ok(out)
}

fn check_grid_identities(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for (name, op) in grids_for(ctx)? {
        let n = op.grid.n_nodes();
        let mut rng = stream_rng(ctx.seed, 3);
        // accretivity on random vectors
        for _ in 0..5 {
            let f: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let fv = DMatrix::from_column_slice(n, 1, &f);
            let lf = &op.l_whole * &fv;
            let quad: f64 = -(0..n).map(|i| lf[(i, 0)] * f[i]).sum::<f64>();
            let mut df = vec![0.0; op.field_dim()];
            op.dhat.apply(&f, &mut df);
            let gn: f64 = df.iter().map(|v| v * v).sum();
            worst = worst.max((quad - 0.5 * gn).abs() / (1.0 + gn));
        }
        // constants in the kernel of the whole-space operator
        let ones = DMatrix::from_column_slice(n, 1, &op.grid.sqrt_w);
        worst = worst.max((&op.l_whole * &ones).norm());
        // compressed identities on the Dirichlet restriction
        let small = if op.n_int() <= 600 { Some(&op) } else { None };
        if let Some(op) = small {
            let l = op.l_dir.clone().unwrap();
            let c = op.compress()?;
            let scale = l.norm();
            worst = worst.max((&c.d_c * &l - &c.u_c * &c.d_c).norm() / scale);
            worst = worst.max((&c.s_c * &c.d_c + &l).norm() / scale);
            worst = worst.max((&c.d_c * &c.s_c + &c.u_c).norm() / scale);
            // resolvent commutation D (I - tL)^{-1} = (I - tU)^{-1} D
            let ni = l.nrows();
            let eye = DMatrix::identity(ni, ni);
            for &t in &[0.1, 1.0, 10.0] {
                let rl = matkit::solve(&(&eye - &l * t), &eye)?;
                let ru = matkit::solve(&(&eye - &c.u_c * t), &eye)?;
                worst = worst.max((&c.d_c * &rl - &ru * &c.d_c).norm() / (ni as f64).sqrt());
            }
        }
        // weak-form residual through the sparse route
        if let Some(l) = &op.l_dir {
            let ni = l.nrows();
            let lam = 0.7;
            let f: Vec<f64> = (0..ni).map(|_| rng.gen::<f64>() - 0.5).collect();
            let fv = DMatrix::from_column_slice(ni, 1, &f);
            let a = DMatrix::identity(ni, ni) * lam - l;
            let phi = matkit::solve(&a, &fv)?;
            let phiv: Vec<f64> = (0..ni).map(|i| phi[(i, 0)]).collect();
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
                worst = worst.max((t1 + t2 - t3).abs());
            }
        }
        detail.push_str(&format!("{name} ok; "));
    }
    Ok(CheckOutcome {
        measured: worst,
        bound: 0.0,
        tol: 1e-8,
        verdict: pass_if(worst <= 1e-8),
        detail: format!("worst identity residual across assemblies: {detail}"),
        series: vec![],
    })
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn check_gradres(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let (npd, r) = if m.d == 1 { (201, 6.0) } else { (41, 5.0) };
    let g = build_grid(m, Some(ctx.domain), npd, r)?;
    let op = assemble(m, &g)?;
    let lambdas = logspace(-2.0, 2.0, 9);
    let worst = gr_scan(&op, &lambdas)?;
    let bound = 2f64.sqrt() + 1e-6;
    let series = vec![SeriesRow::Grid { table: "gr-sup".into(), param: npd as f64, value: worst, extra: 0.0 }];
    Ok(CheckOutcome {
        measured: worst,
        bound,
        tol: 0.0,
        verdict: pass_if(worst <= bound),
        detail: format!("sup over lambda in logspace(-2,2,9) at {npd} nodes/dim"),
        series,
    })
}

fn check_ndr(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let (npd, r, nt) = if m.d == 1 { (201, 6.0, 61) } else { (41, 5.0, 21) };
    let g = build_grid(m, Some(ctx.domain), npd, r)?;
    let op = assemble(m, &g)?;
    let ts = logspace(-3.0, 3.0, nt);
    let worst = ndr_scan(&op, &ts)?;
    let bound = 2.0 + 1e-6;
    let series = vec![SeriesRow::Grid { table: "ndr-sup".into(), param: npd as f64, value: worst, extra: 0.0 }];
    Ok(CheckOutcome {
        measured: worst,
        bound,
        tol: 0.0,
        verdict: pass_if(worst <= bound),
        detail: format!("sup over t in logspace(-3,3,{nt}) at {npd} nodes/dim"),
        series,
    })
}

fn check_bisector(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let (npd, r) = if m.d == 1 { (201, 6.0) } else { (21, 5.0) };
    let g = build_grid(m, Some(ctx.domain), npd, r)?;
    let op = assemble(m, &g)?;
    let ts = logspace(-3.0, 3.0, 61);
    let rep = bisectoriality_scan(&op, &ts)?;
    let mut series = Vec::new();
    for row in &rep.rows {
        series.push(SeriesRow::Grid {
            table: "bisector-norm".into(),
            param: row.t,
            value: row.resolvent_norm,
            extra: row.formula_residual,
        });
        series.push(SeriesRow::Grid {
            table: "bisector-block21".into(),
            param: row.t,
            value: row.block_norms[2],
            extra: 0.0,
        });
    }
    let mut ok = !rep.any_singular && rep.sup_norm.is_finite() && rep.max_formula_residual <= 1e-8;
    let mut detail = format!(
        "sup norm {:.6}; max formula residual {:.2e}; 61 points at {npd} nodes/dim",
        rep.sup_norm, rep.max_formula_residual
    );
    if op.symmetric {
        ok &= rep.sup_norm <= 1.0 + 1e-8;
        detail.push_str("; selfadjoint case bound sup <= 1");
    }
    // block (2,1) bound from the gradient estimate
    let worst21 = rep.rows.iter().map(|r| r.block_norms[2]).fold(0.0f64, f64::max);
    ok &= worst21 <= 2.0 + 1e-6;
    Ok(CheckOutcome {
        measured: rep.sup_norm,
        bound: if op.symmetric { 1.0 + 1e-8 } else { f64::INFINITY },
        tol: 1e-8,
        verdict: pass_if(ok),
        detail,
        series,
    })
}

fn check_riesz(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let want = 0.5f64.sqrt();
    if m.d == 1 {
        let g = build_grid(m, Some(ctx.domain), 201, 6.0)?;
        let op = assemble(m, &g)?;
        let (c, cc) = riesz_constants(&op, PoincareMode::Dirichlet)?;
        let err = (c - want).abs().max((cc - want).abs());
        return Ok(CheckOutcome {
            measured: err,
            bound: 0.0,
            tol: 1e-6,
            verdict: pass_if(err <= 1e-6),
            detail: format!("selfadjoint case: c = {c:.9}, C = {cc:.9}, exact value 1/sqrt2"),
            series: vec![
                SeriesRow::Grid { table: "riesz-c".into(), param: 201.0, value: c, extra: cc },
            ],
        });
    }
    // non-symmetric: positivity and grid stability of (c, C)
    let mut vals = Vec::new();
    for npd in [41usize, 61] {
        let g = build_grid(m, Some(ctx.domain), npd, 5.0)?;
        let op = assemble(m, &g)?;
        let (c, cc) = riesz_constants(&op, PoincareMode::Dirichlet)?;
        vals.push((npd, c, cc));
    }
    let (_, c1, cc1) = vals[0];
    let (_, c2, cc2) = vals[1];
    let drift_c = (c2 - c1).abs() / c2;
    let drift_cc = (cc2 - cc1).abs() / cc2;
    let ok = c1 > 0.0 && c2 > 0.0 && cc1.is_finite() && cc2.is_finite() && drift_c <= 0.05 && drift_cc <= 0.05;
    let series = vals
        .iter()
        .map(|&(npd, c, cc)| SeriesRow::Grid { table: "riesz-c".into(), param: npd as f64, value: c, extra: cc })
        .collect();
    Ok(CheckOutcome {
        measured: drift_c.max(drift_cc),
        bound: 0.05,
        tol: 0.0,
        verdict: pass_if(ok),
        detail: format!(
            "values observe-only: 41x41 (c,C)=({c1:.6},{cc1:.6}); 61x61 (c,C)=({c2:.6},{cc2:.6}); pass on positivity and 5% stability"
        ),
        series,
    })
}

fn check_poincare_whole(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let mut detail = String::new();
    let mut worst_rel: f64 = 0.0;
    let mut series = Vec::new();
    if m.d == 1 {
        // scalar family: measured gap vs a within 2%, and 1/(2 gap) = M^2/2w
        for a in [0.5, 1.0, 2.0] {
            let ma = crate::model::build_model(
                &matkit::mat_from_rows(1, 1, &[-a])?,
                crate::model::ModelTol::default(),
            )?;
            let g = build_grid(&ma, None, 200, 6.0)?;
            let op = assemble(&ma, &g)?;
            let (gap, bound) = poincare_gap(&op, PoincareMode::WholeMeanZero, &ma)?;
            worst_rel = worst_rel.max((gap - a).abs() / a);
            series.push(SeriesRow::Grid { table: "poincare-whole".into(), param: a, value: gap, extra: bound });
            detail.push_str(&format!("a={a}: gap={gap:.5}, 2w/M^2={bound:.5}; "));
        }
        Ok(CheckOutcome {
            measured: worst_rel,
            bound: 0.02,
            tol: 0.0,
            verdict: pass_if(worst_rel <= 0.02),
            detail: format!("variance constant 1/(2 gap) matches M^2/2w on the scalar family; {detail}"),
            series,
        })
    } else {
        let g = build_grid(m, None, 41, 5.0)?;
        let op = assemble(m, &g)?;
        let (gap, bound) = poincare_gap(&op, PoincareMode::WholeMeanZero, m)?;
        let ok = gap > 0.0 && gap >= bound / 2.0 * 0.9;
        series.push(SeriesRow::Grid { table: "poincare-whole".into(), param: 0.0, value: gap, extra: bound });
        Ok(CheckOutcome {
            measured: gap,
            bound,
            tol: 0.0,
            verdict: pass_if(ok),
            detail: format!("mean-zero symmetric-part gap {gap:.5} vs 2w/M^2 = {bound:.5} (w/M^2 lower bound)"),
            series,
        })
    }
}

fn check_poincare_domain(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let mut series = Vec::new();
    if m.d == 1 {
        let mut worst_rel: f64 = 0.0;
        for a in [0.5, 1.0, 2.0] {
            let ma = crate::model::build_model(
                &matkit::mat_from_rows(1, 1, &[-a])?,
                crate::model::ModelTol::default(),
            )?;
            let dom = Domain::half_space(&[1.0], 0.0)?;
            let g = build_grid(&ma, Some(&dom), 201, 6.0)?;
            let op = assemble(&ma, &g)?;
            let (gap, _) = poincare_gap(&op, PoincareMode::Dirichlet, &ma)?;
            worst_rel = worst_rel.max((gap - a).abs() / a);
            series.push(SeriesRow::Grid { table: "poincare-domain".into(), param: a, value: gap, extra: 0.0 });
        }
        // interval (1D ball) mask: gap strictly positive
        let ball = Domain::ball(&[0.0], 1.0)?;
        let g = build_grid(m, Some(&ball), 201, 6.0)?;
        let op = assemble(m, &g)?;
        let (gap_ball, _) = poincare_gap(&op, PoincareMode::Dirichlet, m)?;
        series.push(SeriesRow::Grid { table: "poincare-domain-ball".into(), param: 1.0, value: gap_ball, extra: 0.0 });
        let ok = worst_rel <= 0.02 && gap_ball > 0.0;
        Ok(CheckOutcome {
            measured: worst_rel,
            bound: 0.02,
            tol: 0.0,
            verdict: pass_if(ok),
            detail: format!("half-line gap matches the odd-eigenfunction value within 2%; interval gap {gap_ball:.5} > 0"),
            series,
        })
    } else {
        let g = build_grid(m, Some(ctx.domain), 41, 5.0)?;
        let op = assemble(m, &g)?;
        let (gap, _) = poincare_gap(&op, PoincareMode::Dirichlet, m)?;
        let ball = Domain::ball(&[0.0, 0.0], 1.0)?;
        let gb = build_grid(m, Some(&ball), 41, 5.0)?;
        let opb = assemble(m, &gb)?;
        let (gap_ball, _) = poincare_gap(&opb, PoincareMode::Dirichlet, m)?;
        series.push(SeriesRow::Grid { table: "poincare-domain".into(), param: 0.0, value: gap, extra: 0.0 });
        series.push(SeriesRow::Grid { table: "poincare-domain-ball".into(), param: 1.0, value: gap_ball, extra: 0.0 });
        let ok = gap > 0.0 && gap_ball > 0.0;
        Ok(CheckOutcome {
            measured: gap.min(gap_ball),
            bound: 0.0,
            tol: 0.0,
            verdict: pass_if(ok),
            detail: format!("half-plane gap {gap:.5}, ball gap {gap_ball:.5}; both strictly positive"),
            series,
        })
    }
}

fn check_hinf(ctx: &CheckCtx) -> Result<CheckOutcome> {
    let m = ctx.model;
    let (npd, r) = if m.d == 1 { (61, 6.0) } else { (15, 5.0) };
    let g = build_grid(m, Some(ctx.domain), npd, r)?;
    let op = assemble(m, &g)?;
    let theta = 0.3;
    let probe = hinf_norm_probe(&op, theta)?;
    Ok(CheckOutcome {
        measured: probe.probe,
        bound: f64::INFINITY,
        tol: 0.0,
        verdict: Verdict::ObserveOnly,
        detail: format!(
            "probe of the measured calculus bound at sector angle {theta} on {npd} nodes/dim (diag condition {:.2e}); measures the discretization, certifies nothing",
            probe.diag_condition
        ),
        series: vec![SeriesRow::Grid { table: "hinf-probe".into(), param: theta, value: probe.probe, extra: probe.diag_condition }],
    })
}

pub static CHECKS: &[CheckDef] = &[
    CheckDef {
        id: "model.duality",
        claim: "l(f,g) = -int (Lf) g dmu on cubic polynomials",
        statistical: false,
        run: check_duality,
    },
    CheckDef {
        id: "model.bmatrix",
        claim: "B + B^T = I and <Bh,h> = |h|^2/2",
        statistical: false,
        run: check_bmatrix,
    },
    CheckDef {
        id: "paths.increment",
        claim: "E<Z(t)-Z(s),x*>^2 = 2<Q(I-e^{(t-s)A^T})x*,x*> <= 2 M_T |t-s| |B| |x*|^2",
        statistical: true,
        run: check_increment,
    },
    CheckDef {
        id: "sg.invariance",
        claim: "int P(t)f dmu = int f dmu",
        statistical: true,
        run: check_invariance,
    },
    CheckDef {
        id: "sg.oracle",
        claim: "P(t)K_{x*} = K_{e^{tA^T}x*}",
        statistical: true,
        run: check_oracle,
    },
    CheckDef {
        id: "sg.ergodic",
        claim: "||P(t)f - mean f||_{L2} decays with the drift rate on linear f",
        statistical: true,
        run: check_ergodic,
    },
    CheckDef {
        id: "fk.contraction",
        claim: "int (P_eps(t)f)^2 dmu <= int f^2 dmu",
        statistical: true,
        run: check_fk_contraction,
    },
    CheckDef {
        id: "fk.resolvent4",
        claim: "|phi| <= |f|/l; |Dphi|^2 <= 2|f|^2/l; <V phi,phi> <= e|f|^2/l; int V |Dphi|^2 <= sqrt(e/l)|f|^2",
        statistical: false,
        run: check_resolvent4,
    },
    CheckDef {
        id: "kill.t0",
        claim: "P_O(0)f = f",
        statistical: false,
        run: check_kill_t0,
    },
    CheckDef {
        id: "kill.eigen",
        claim: "P_O(t)x = e^{-t}x on the half-line; log-survival slope -1",
        statistical: true,
        run: check_kill_eigen,
    },
    CheckDef {
        id: "pen.sweep",
        claim: "P_eps(t)f~(x) -> P_O(t)f(x) as eps -> 0",
        statistical: true,
        run: check_pen_sweep,
    },
    CheckDef {
        id: "grid.identities",
        claim: "D L_O = UL D; Pi^2 = diag(-L_O, -UL); weak-form residual 0; <-Lf,f> = |Df|^2/2",
        statistical: false,
        run: check_grid_identities,
    },
    CheckDef {
        id: "grid.gradres",
        claim: "sqrt(l) |D R(l, L_O)| <= sqrt(2)",
        statistical: false,
        run: check_gradres,
    },
    CheckDef {
        id: "grid.ndr",
        claim: "|t D (I - t^2 L_O)^{-1}| <= 2",
        statistical: false,
        run: check_ndr,
    },
    CheckDef {
        id: "grid.bisector",
        claim: "sup_t |(I - it Pi)^{-1}| finite; inverse matches the block resolvent formula",
        statistical: false,
        run: check_bisector,
    },
    CheckDef {
        id: "grid.riesz",
        claim: "|(-L_O)^{1/2} f| equivalent to |D f| (both = |Df|/sqrt2 when B = I/2)",
        statistical: false,
        run: check_riesz,
    },
    CheckDef {
        id: "grid.poincare.whole",
        claim: "mean-zero spectral gap; variance constant vs M^2/2w",
        statistical: false,
        run: check_poincare_whole,
    },
    CheckDef {
        id: "grid.poincare.domain",
        claim: "0 in rho(L_O): Dirichlet gap > 0 (= drift rate on the half-line)",
        statistical: false,
        run: check_poincare_domain,
    },
    CheckDef {
        id: "grid.hinf",
        claim: "measured holomorphic-calculus bound for the probe family (observe)",
        statistical: false,
        run: check_hinf,
    },
];

pub fn check_ids() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.id).collect()
}
