//! Named, reproducible verification suites: each check measures one
//! quantitative claim about the model, the estimators, or the grid operators,
//! and reports a verdict with the measured constants.

use std::time::Instant;

use serde::Serialize;

use crate::domains::Domain;
use crate::error::{Error, Result};
use crate::model::{build_model, ModelTol, OUModel};

mod checks;

pub use checks::{check_ids, CHECKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    ObserveOnly,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::ObserveOnly => write!(f, "observe-only"),
        }
    }
}

/// Detail rows emitted alongside scalar check results, for the experiment CSVs
/// and the plots.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeriesRow {
    Mc { estimator: String, t: f64, eps: f64, value: f64, std_error: f64, bias_note: String },
    Grid { table: String, param: f64, value: f64, extra: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: String,
    /// The quantitative statement the check verifies, in plain notation.
    pub claim: String,
    pub measured: f64,
    pub bound: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub seconds: f64,
    pub detail: String,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
}

/// Outcome produced by a check body before timing is attached.
pub struct CheckOutcome {
    pub measured: f64,
    pub bound: f64,
    pub tol: f64,
    pub verdict: Verdict,
    pub detail: String,
    pub series: Vec<SeriesRow>,
}

pub struct CheckCtx<'a> {
    pub model: &'a OUModel,
    pub domain: &'a Domain,
    pub seed: u64,
    /// Sample-size multiplier (the statistical retry sets this to 4).
    pub n_scale: f64,
    pub caps: ResourceCaps,
}

#[derive(Debug, Clone, Copy)]
pub struct ResourceCaps {
    pub max_paths: usize,
    pub max_grid: usize,
    pub wall_secs: f64,
}

impl Default for ResourceCaps {
    fn default() -> Self {
        Self { max_paths: 10_000_000, max_grid: 8000, wall_secs: 1800.0 }
    }
}

pub struct CheckDef {
    pub id: &'static str,
    pub claim: &'static str,
    /// Statistical checks are retried once with four times the samples.
    pub statistical: bool,
    pub run: fn(&CheckCtx) -> Result<CheckOutcome>,
}

/// A named, reproducible bundle: model, domain, checks, seed.
#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub model_a: Vec<Vec<f64>>,
    pub domain: Domain,
    pub checks: Vec<String>,
    pub seed: u64,
    pub caps: ResourceCaps,
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The built-in suites. The half-line symmetric model carries every check;
/// the rotation model exercises the genuinely non-symmetric grid theory.
pub fn builtin_suite(name: &str, seed: u64) -> Result<Suite> {
    let all: Vec<String> = check_ids().iter().map(|s| s.to_string()).collect();
    match name {
        "symmetric-1d" => Ok(Suite {
            name: name.into(),
            model_a: vec![vec![-1.0]],
            domain: Domain::half_space(&[1.0], 0.0)?,
            checks: all,
            seed,
            caps: ResourceCaps::default(),
        }),
        "rotation-2d" => Ok(Suite {
            name: name.into(),
            model_a: vec![vec![-1.0, -1.0], vec![1.0, -1.0]],
            domain: Domain::half_space(&[1.0, 0.0], 0.0)?,
            checks: all
                .into_iter()
                .filter(|c| c != "kill.eigen" && c != "pen.sweep")
                .collect(),
            seed,
            caps: ResourceCaps::default(),
        }),
        other => Err(Error::Config(format!("unknown suite '{other}'"))),
    }
}

pub fn build_suite_model(s: &Suite) -> Result<OUModel> {
    let d = s.model_a.len();
    let flat: Vec<f64> = s.model_a.iter().flatten().copied().collect();
    let a = crate::matkit::mat_from_rows(d, d, &flat)?;
    build_model(&a, ModelTol::default())
}

/// Execute the suite's checks in catalog order. A failing check never aborts
/// the suite; infrastructure errors become failed results with the error in
/// the detail column.
pub fn run_suite(suite: &Suite) -> Result<Vec<CheckResult>> {
    let model = build_suite_model(suite)?;
    let mut wanted: Vec<&'static CheckDef> = Vec::new();
    for id in &suite.checks {
        let def = CHECKS
            .iter()
            .find(|c| c.id == *id)
            .ok_or_else(|| Error::Config(format!("unknown check id '{id}'")))?;
        wanted.push(def);
    }
    wanted.sort_by_key(|c| c.id);
    wanted.dedup_by_key(|c| c.id);

    let mut results = Vec::with_capacity(wanted.len());
    for def in wanted {
        let started = Instant::now();
        let base_seed = suite.seed ^ fnv1a(def.id);
        let mut outcome = run_one(def, &model, suite, base_seed, 1.0);
        if def.statistical {
            if let Ok(ref o) = outcome {
                if o.verdict == Verdict::Fail {
                    // one retry with four times the samples
                    outcome = run_one(def, &model, suite, base_seed.wrapping_add(17), 4.0);
                }
            }
        }
        let seconds = started.elapsed().as_secs_f64();
        let res = match outcome {
            Ok(o) => CheckResult {
                id: def.id.into(),
                claim: def.claim.into(),
                measured: o.measured,
                bound: o.bound,
                tol: o.tol,
                verdict: o.verdict,
                seconds,
                detail: o.detail,
                series: o.series,
            },
            Err(e) => CheckResult {
                id: def.id.into(),
                claim: def.claim.into(),
                measured: f64::NAN,
                bound: f64::NAN,
                tol: f64::NAN,
                verdict: Verdict::Fail,
                seconds,
                detail: format!("error: {e}"),
                series: Vec::new(),
            },
        };
        results.push(res);
    }
    Ok(results)
}

fn run_one(
    def: &CheckDef,
    model: &OUModel,
    suite: &Suite,
    seed: u64,
    n_scale: f64,
) -> Result<CheckOutcome> {
    let ctx = CheckCtx { model, domain: &suite.domain, seed, n_scale, caps: suite.caps };
    (def.run)(&ctx)
}

/// Deterministic CSV of the scalar results. The seconds column is the only
/// run-dependent field.
pub fn results_csv(results: &[CheckResult], header_note: &str) -> String {
    let mut out = String::new();
    out.push_str(header_note);
    out.push_str("check_id,claim,measured,bound,tol,verdict,seconds\n");
    for r in results {
        out.push_str(&format!(
            "{},\"{}\",{:.12e},{:.12e},{:.12e},{},{:.3}\n",
            r.id, r.claim, r.measured, r.bound, r.tol, r.verdict, r.seconds
        ));
    }
    out
}

/// Experiment detail CSV with the per-estimator rows.
pub fn mc_csv(results: &[CheckResult], header_note: &str) -> String {
    let mut out = String::new();
    out.push_str(header_note);
    out.push_str("estimator,t,eps,value,std_error,bias_note\n");
    for r in results {
        for row in &r.series {
            if let SeriesRow::Mc { estimator, t, eps, value, std_error, bias_note } = row {
                out.push_str(&format!(
                    "{estimator},{t:.6e},{eps:.6e},{value:.12e},{std_error:.12e},\"{bias_note}\"\n"
                ));
            }
        }
    }
    out
}

/// Grid scan/spectrum tables.
pub fn grid_csv(results: &[CheckResult], header_note: &str) -> String {
    let mut out = String::new();
    out.push_str(header_note);
    out.push_str("table,param,value,extra\n");
    for r in results {
        for row in &r.series {
            if let SeriesRow::Grid { table, param, value, extra } = row {
                out.push_str(&format!("{table},{param:.12e},{value:.12e},{extra:.12e}\n"));
            }
        }
    }
    out
}
