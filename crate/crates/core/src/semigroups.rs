//! Monte-Carlo and closed-form evaluation of the transition semigroup, the
//! Feynman-Kac semigroup, and the killed semigroup, plus the penalization and
//! ergodic limit studies.

use nalgebra::DVector;

use crate::domains::{Domain, PotentialSpec};
use crate::error::{Error, Result};
use crate::matkit;
use crate::model::{OUModel, TestFunction};
use crate::paths::{stream_paths, SimSpec, StepKernel};

/// Monte-Carlo value with standard error and sample count.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub bias_note: Option<String>,
}

impl McEstimate {
    fn from_sums(sum: f64, sumsq: f64, n: usize) -> Self {
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        Self { mean, std_error: (var / n as f64).sqrt(), n, bias_note: None }
    }

    fn with_note(mut self, note: String) -> Self {
        self.bias_note = Some(note);
        self
    }
}

/// Exit-detection bias budget for killed-semigroup estimates at step h.
/// Discrete monitoring over-estimates survival at rate O(sqrt h); the bridge
/// correction removes the leading term, leaving a smaller residue.
pub fn exit_bias_budget(h: f64, bridge: bool, scale: f64) -> f64 {
    if bridge {
        0.15 * h.sqrt() * scale.abs() + 2.0 * h
    } else {
        0.6 * h.sqrt() * scale.abs() + 2.0 * h
    }
}

/// Normalized exponential functional K(x) = exp(<x, xstar> - 1/2 <Q xstar, xstar>).
#[derive(Debug, Clone)]
pub struct ExpFunctional {
    pub xstar: DVector<f64>,
}

impl ExpFunctional {
    pub fn new(xstar: DVector<f64>) -> Result<Self> {
        if !xstar.iter().all(|v| v.is_finite()) {
            return Err(Error::Argument("exponential functional needs finite entries".into()));
        }
        Ok(Self { xstar })
    }

    pub fn to_test_function(&self, m: &OUModel) -> TestFunction {
        let offset = -0.5 * (&m.q_inf * &self.xstar).dot(&self.xstar);
        TestFunction::ExpLinear { xstar: self.xstar.clone(), offset }
    }
}

/// Closed form for P(t) applied to the normalized exponential functional:
/// with y = e^{tA^T} xstar,
///   P(t)K(x) = exp(<x, y> - 1/2 <Q_inf y, y>).
pub fn exact_on_exponentials(m: &OUModel, k: &ExpFunctional, t: f64, x: &DVector<f64>) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Argument("time must be nonnegative".into()));
    }
    let y = matkit::expm(&m.a, t)?.transpose() * &k.xstar;
    Ok((x.dot(&y) - 0.5 * (&m.q_inf * &y).dot(&y)).exp())
}

/// Closed form of P(t)f(x) for family members that admit one.
pub fn semigroup_closed_form(m: &OUModel, f: &TestFunction, t: f64, x: &DVector<f64>) -> Result<Option<f64>> {
    match f {
        TestFunction::Poly(p) if p.degree() <= 1 => {
            let ex = matkit::expm(&m.a, t)? * x;
            Ok(Some(p.eval(&ex)))
        }
        TestFunction::ExpLinear { xstar, offset } => {
            // P(t) e^{<.,x*> + c} = K-normalized form times e^{c + 1/2 <Q x*, x*>}
            let k = ExpFunctional { xstar: xstar.clone() };
            let norm_offset = -0.5 * (&m.q_inf * xstar).dot(xstar);
            let v = exact_on_exponentials(m, &k, t, x)?;
            Ok(Some(v * (offset - norm_offset).exp()))
        }
        _ => Ok(None),
    }
}

/// Mean of f over n exact draws of X^x(t) (single exact step; no grid).
pub fn mc_semigroup(
    m: &OUModel,
    f: &TestFunction,
    x: &DVector<f64>,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if t < 0.0 {
        return Err(Error::Argument("time must be nonnegative".into()));
    }
    if t == 0.0 {
        return Ok(McEstimate { mean: f.eval(x), std_error: 0.0, n, bias_note: None });
    }
    let spec = SimSpec { model: m, x0: x.clone(), t_end: t, h: t, domain: None, bridge: false, seed, n_paths: n };
    let (sum, sumsq) = stream_paths(
        &spec,
        || (0.0f64, 0.0f64),
        |_, _, _| {},
        |acc, _, pe| {
            let v = f.eval(&DVector::from_column_slice(pe.x));
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )?;
    Ok(McEstimate::from_sums(sum, sumsq, n))
}

/// Potential plugged into the Feynman-Kac weight. The constant variant is a
/// geometry-free hook for unit tests.
#[derive(Debug, Clone)]
pub enum FkPotential {
    Penalized(PotentialSpec),
    Constant { value: f64, eps: f64 },
}

impl FkPotential {
    pub fn eps(&self) -> f64 {
        match self {
            FkPotential::Penalized(s) => s.eps,
            FkPotential::Constant { eps, .. } => *eps,
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            FkPotential::Penalized(s) => s.eval(x),
            FkPotential::Constant { value, .. } => *value,
        }
    }
}

/// Feynman-Kac estimate E[f~(X^x(t)) exp(-(1/eps) int_0^t V(X_s) ds)] with the
/// path integral by the trapezoid rule on the simulation grid. For the
/// penalized potential, f is zero-extended across the domain boundary.
pub fn mc_feynman_kac(
    m: &OUModel,
    pot: &FkPotential,
    f: &TestFunction,
    x: &DVector<f64>,
    t: f64,
    n: usize,
    h: f64,
    seed: u64,
) -> Result<McEstimate> {
    if t <= 0.0 {
        return Err(Error::Argument("feynman-kac needs t > 0".into()));
    }
    if h > t {
        return Err(Error::Argument("step must not exceed the horizon".into()));
    }
    let eps = pot.eps();
    if h > eps / 5.0 + 1e-15 {
        return Err(Error::Argument(format!(
            "step h = {h} under-resolves the potential; need h <= eps/5 = {}",
            eps / 5.0
        )));
    }
    let dom = match pot {
        FkPotential::Penalized(s) => Some(s.domain.clone()),
        FkPotential::Constant { .. } => None,
    };
    let spec = SimSpec { model: m, x0: x.clone(), t_end: t, h, domain: None, bridge: false, seed, n_paths: n };
    let steps = spec.steps();
    let (sum, sumsq) = stream_paths(
        &spec,
        || (0.0f64, 0.0f64, 0.0f64),
        |acc, _, sv| {
            let fac = if sv.step == 0 || sv.step == steps { 0.5 } else { 1.0 };
            acc.2 += fac * pot.eval(&DVector::from_column_slice(sv.x));
        },
        |acc, _, pe| {
            let xv = DVector::from_column_slice(pe.x);
            let ftil = match &dom {
                Some(d) if !d.contains(&xv) => 0.0,
                _ => f.eval(&xv),
            };
            let w = (-(acc.2 * h) / eps).exp();
            let v = w * ftil;
            acc.0 += v;
            acc.1 += v * v;
            acc.2 = 0.0;
        },
        |a, b| (a.0 + b.0, a.1 + b.1, 0.0),
    )
    .map(|acc| (acc.0, acc.1))?;
    Ok(McEstimate::from_sums(sum, sumsq, n))
}

/// Killed-semigroup estimate E[f(X^x(t)) 1_{tau > t}]. Requires x inside the
/// domain. The bias note records the exit-detection budget.
pub fn mc_killed(
    m: &OUModel,
    dom: &Domain,
    f: &TestFunction,
    x: &DVector<f64>,
    t: f64,
    n: usize,
    h: f64,
    seed: u64,
    bridge: bool,
) -> Result<McEstimate> {
    if !dom.contains(x) {
        return Err(Error::Argument("killed semigroup is defined for x inside the domain".into()));
    }
    if t == 0.0 {
        return Ok(McEstimate { mean: f.eval(x), std_error: 0.0, n, bias_note: None });
    }
    let curve = mc_killed_curve(m, dom, f, x, &[t], n, h, seed, bridge)?;
    Ok(curve.into_iter().next().unwrap())
}

/// Killed estimates at several grid-aligned times from a single ensemble.
#[allow(clippy::too_many_arguments)]
pub fn mc_killed_curve(
    m: &OUModel,
    dom: &Domain,
    f: &TestFunction,
    x: &DVector<f64>,
    ts: &[f64],
    n: usize,
    h: f64,
    seed: u64,
    bridge: bool,
) -> Result<Vec<McEstimate>> {
    if !dom.contains(x) {
        return Err(Error::Argument("killed semigroup is defined for x inside the domain".into()));
    }
    let t_end = ts.iter().copied().fold(0.0f64, f64::max);
    let mut marks = Vec::with_capacity(ts.len());
    for &t in ts {
        let k = (t / h).round() as usize;
        if ((k as f64) * h - t).abs() > 1e-9 * (1.0 + t) {
            return Err(Error::Argument(format!("time {t} is not on the simulation grid")));
        }
        marks.push(k);
    }
    let spec = SimSpec { model: m, x0: x.clone(), t_end, h, domain: Some(dom), bridge, seed, n_paths: n };
    let nm = marks.len();
    let sums = stream_paths(
        &spec,
        || (vec![0.0f64; nm], vec![0.0f64; nm]),
        |acc, _, sv| {
            for (i, &k) in marks.iter().enumerate() {
                if sv.step == k && sv.alive {
                    let v = f.eval(&DVector::from_column_slice(sv.x));
                    acc.0[i] += v;
                    acc.1[i] += v * v;
                }
            }
        },
        |_, _, _| {},
        |mut a, b| {
            for i in 0..nm {
                a.0[i] += b.0[i];
                a.1[i] += b.1[i];
            }
            a
        },
    )?;
    Ok((0..nm)
        .map(|i| {
            let est = McEstimate::from_sums(sums.0[i], sums.1[i], n);
            let budget = exit_bias_budget(h, bridge, est.mean);
            est.with_note(format!("exit-detection budget {budget:.3e} (h={h}, bridge={bridge})"))
        })
        .collect())
}

/// One row of the penalization sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub p_eps: McEstimate,
    /// Shared-randomness gap estimate P_eps - P_killed and its standard error.
    pub gap_mean: f64,
    pub gap_se: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub killed: McEstimate,
    /// Non-increase of |gap| along the eps list within statistical slack.
    pub monotone: bool,
    /// |gap| at the smallest eps.
    pub final_gap: f64,
    pub final_bound: f64,
    /// Pathwise dominance estimate(P_eps f) >= estimate(killed-with-weight f)
    /// for nonnegative f held on every row.
    pub dominance: bool,
}

/// Shared-randomness penalization sweep: every estimator consumes the same
/// realized paths, so the eps-gap is measured with the Monte-Carlo noise
/// cancelled.
#[allow(clippy::too_many_arguments)]
pub fn penalization_sweep(
    m: &OUModel,
    dom: &Domain,
    f: &TestFunction,
    x: &DVector<f64>,
    t: f64,
    eps_list: &[f64],
    n: usize,
    h: f64,
    seed: u64,
    bridge: bool,
) -> Result<SweepResult> {
    if !dom.contains(x) {
        return Err(Error::Argument("sweep requires x inside the domain".into()));
    }
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    if h > eps_min / 5.0 + 1e-15 {
        return Err(Error::Argument(format!(
            "step h = {h} under-resolves the smallest potential; need h <= {}",
            eps_min / 5.0
        )));
    }
    let pots: Vec<PotentialSpec> = eps_list
        .iter()
        .map(|&e| PotentialSpec::new(dom.clone(), e))
        .collect::<Result<_>>()?;
    let ne = pots.len();
    let spec = SimSpec { model: m, x0: x.clone(), t_end: t, h, domain: Some(dom), bridge, seed, n_paths: n };
    let steps = spec.steps();

    struct Acc {
        integ: Vec<f64>,
        fk_sum: Vec<f64>,
        fk_sumsq: Vec<f64>,
        gap_sum: Vec<f64>,
        gap_sumsq: Vec<f64>,
        dom_sum: Vec<f64>,
        kill_sum: f64,
        kill_sumsq: f64,
    }
    let acc = stream_paths(
        &spec,
        || Acc {
            integ: vec![0.0; ne],
            fk_sum: vec![0.0; ne],
            fk_sumsq: vec![0.0; ne],
            gap_sum: vec![0.0; ne],
            gap_sumsq: vec![0.0; ne],
            dom_sum: vec![0.0; ne],
            kill_sum: 0.0,
            kill_sumsq: 0.0,
        },
        |acc, _, sv| {
            let xv = DVector::from_column_slice(sv.x);
            let fac = if sv.step == 0 || sv.step == steps { 0.5 } else { 1.0 };
            for (i, p) in pots.iter().enumerate() {
                acc.integ[i] += fac * p.eval(&xv);
            }
        },
        |acc, _, pe| {
            let xv = DVector::from_column_slice(pe.x);
            let ftil = if dom.contains(&xv) { f.eval(&xv) } else { 0.0 };
            let kill = if pe.alive { ftil } else { 0.0 };
            acc.kill_sum += kill;
            acc.kill_sumsq += kill * kill;
            for i in 0..ne {
                let w = (-(acc.integ[i] * h) / pots[i].eps).exp();
                let fk = w * ftil;
                let g = fk - kill;
                acc.fk_sum[i] += fk;
                acc.fk_sumsq[i] += fk * fk;
                acc.gap_sum[i] += g;
                acc.gap_sumsq[i] += g * g;
                // killed paths re-weighted by the same factor (dominance side)
                acc.dom_sum[i] += if pe.alive { w * ftil } else { 0.0 };
                acc.integ[i] = 0.0;
            }
        },
        |mut a, b| {
            for i in 0..ne {
                a.integ[i] = 0.0;
                a.fk_sum[i] += b.fk_sum[i];
                a.fk_sumsq[i] += b.fk_sumsq[i];
                a.gap_sum[i] += b.gap_sum[i];
                a.gap_sumsq[i] += b.gap_sumsq[i];
                a.dom_sum[i] += b.dom_sum[i];
            }
            a.kill_sum += b.kill_sum;
            a.kill_sumsq += b.kill_sumsq;
            a
        },
    )?;

    let killed = McEstimate::from_sums(acc.kill_sum, acc.kill_sumsq, n).with_note(format!(
        "exit-detection budget {:.3e} (h={h}, bridge={bridge})",
        exit_bias_budget(h, bridge, acc.kill_sum / n as f64)
    ));
    let mut rows = Vec::with_capacity(ne);
    let mut dominance = true;
    for i in 0..ne {
        let p_eps = McEstimate::from_sums(acc.fk_sum[i], acc.fk_sumsq[i], n);
        let gap = McEstimate::from_sums(acc.gap_sum[i], acc.gap_sumsq[i], n);
        if p_eps.mean < acc.dom_sum[i] / n as f64 - 1e-12 {
            dominance = false;
        }
        rows.push(SweepRow { eps: eps_list[i], p_eps, gap_mean: gap.mean, gap_se: gap.std_error });
    }
    let mut monotone = true;
    for wpair in rows.windows(2) {
        let slack = 2.0 * (wpair[0].gap_se + wpair[1].gap_se);
        if wpair[1].gap_mean.abs() > wpair[0].gap_mean.abs() + slack {
            monotone = false;
        }
    }
    let last = rows.last().expect("nonempty eps list");
    let final_gap = last.gap_mean.abs();
    let final_bound = 3.0 * last.gap_se + exit_bias_budget(h, bridge, killed.mean);
    Ok(SweepResult { rows, killed, monotone, final_gap, final_bound, dominance })
}

/// One row of the ergodic-limit table.
#[derive(Debug, Clone)]
pub struct ErgodicRow {
    pub t: f64,
    /// Estimate of ||P(t)f - mean(f)||_{L^2(mu)}.
    pub norm: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub pass: bool,
}

/// L^2 decay of P(t)f toward the mean, for family members with closed-form
/// P(t)f: outer Monte Carlo over stationary starting points, inner evaluation
/// exact.
pub fn ergodic_limit(
    m: &OUModel,
    f: &TestFunction,
    t_list: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<ErgodicRow>> {
    let mu = m.measure();
    let fbar = match f {
        TestFunction::Poly(p) => mu.integrate_poly(p),
        TestFunction::ExpLinear { xstar, offset } => {
            // int e^{<x,y>+c} dmu = e^{c + 1/2 <Q y, y>}
            (offset + 0.5 * (&mu.q * xstar).dot(xstar)).exp()
        }
        _ => return Err(Error::Capability("ergodic_limit needs a closed-form family member".into())),
    };
    let mut rows = Vec::with_capacity(t_list.len());
    for (ti, &t) in t_list.iter().enumerate() {
        // closed-form L2 norm of P(t)f - fbar
        let closed = match f {
            TestFunction::Poly(p) if p.degree() == 0 => 0.0,
            TestFunction::Poly(p) if p.degree() <= 1 => {
                // linear part a: P(t)f - fbar = <e^{tA}x, a>
                let mut a = DVector::zeros(m.d);
                for (c, e) in &p.terms {
                    if let Some(k) = e.iter().position(|&p_| p_ == 1) {
                        a[k] += *c;
                    }
                }
                let y = matkit::expm(&m.a, t)?.transpose() * a;
                (&mu.q * &y).dot(&y).sqrt()
            }
            TestFunction::ExpLinear { xstar, offset } => {
                let y = matkit::expm(&m.a, t)?.transpose() * xstar;
                let qyy = (&mu.q * &y).dot(&y);
                let scale = (offset + 0.5 * (&mu.q * xstar).dot(xstar)).exp();
                scale * (qyy.exp() - 1.0).max(0.0).sqrt()
            }
            _ => unreachable!(),
        };
        // outer MC of E_x (P(t)f(x) - fbar)^2
        let mut rng = crate::paths::stream_rng(seed, 5000 + ti as u64);
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = mu.sample(&mut rng);
            let ptf = semigroup_closed_form(m, f, t, &x)?
                .ok_or_else(|| Error::Capability("no closed form for inner evaluation".into()))?;
            let g = (ptf - fbar) * (ptf - fbar);
            sum += g;
            sumsq += g * g;
        }
        let est = McEstimate::from_sums(sum, sumsq, n);
        let norm = est.mean.max(0.0).sqrt();
        // delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
        let se = if norm > 0.0 { est.std_error / (2.0 * norm) } else { est.std_error.sqrt() };
        let pass = (norm - closed).abs() <= 4.0 * se + 1e-12;
        rows.push(ErgodicRow { t, norm, std_error: se, closed_form: closed, pass });
    }
    Ok(rows)
}

/// Invariance estimate: E[f(X(t))] with stationary start, to compare against
/// the exact mean of f under the invariant measure.
pub fn invariance_check(m: &OUModel, f: &TestFunction, t: f64, n: usize, seed: u64) -> Result<McEstimate> {
    let mu = m.measure();
    let kernel = StepKernel::new(m, t)?;
    let mut rng = crate::paths::stream_rng(seed, 77);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let x0 = mu.sample(&mut rng);
        let x1 = kernel.step(&x0, &mut rng);
        let v = f.eval(&x1);
        sum += v;
        sumsq += v * v;
    }
    Ok(McEstimate::from_sums(sum, sumsq, n))
}

/// Contraction estimate of the squared L^2 norm of the Feynman-Kac semigroup:
/// two independent inner replicas sharing the stationary start give an
/// unbiased estimate of int (P_eps(t) f)^2 dmu.
#[allow(clippy::too_many_arguments)]
pub fn fk_squared_norm(
    m: &OUModel,
    pot: &FkPotential,
    f: &TestFunction,
    t: f64,
    n: usize,
    h: f64,
    seed: u64,
) -> Result<McEstimate> {
    let eps = pot.eps();
    if h > eps / 5.0 + 1e-15 {
        return Err(Error::Argument("step under-resolves the potential".into()));
    }
    let dom = match pot {
        FkPotential::Penalized(s) => Some(&s.domain),
        FkPotential::Constant { .. } => None,
    };
    let mu = m.measure();
    let kernel = StepKernel::new(m, h)?;
    let steps = (t / h).round() as usize;
    let d = m.d;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut x = vec![0.0; d];
    let mut xn = vec![0.0; d];
    let mut z = vec![0.0; d];
    for i in 0..n {
        let mut rng = crate::paths::stream_rng(seed, 20_000 + i as u64);
        let x0 = mu.sample(&mut rng);
        let mut reps = [0.0f64; 2];
        for rep in &mut reps {
            x.copy_from_slice(x0.as_slice());
            let mut integ = 0.5 * pot.eval(&x0);
            for k in 1..=steps {
                kernel.step_into(&x, &mut xn, &mut z, &mut rng);
                x.copy_from_slice(&xn);
                let xv = DVector::from_column_slice(&x);
                integ += if k == steps { 0.5 } else { 1.0 } * pot.eval(&xv);
            }
            let xv = DVector::from_column_slice(&x);
            let ftil = match dom {
                Some(d) if !d.contains(&xv) => 0.0,
                _ => f.eval(&xv),
            };
            *rep = (-(integ * h) / eps).exp() * ftil;
        }
        let v = reps[0] * reps[1];
        sum += v;
        sumsq += v * v;
    }
    Ok(McEstimate::from_sums(sum, sumsq, n))
}
