use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::{error, info, warn};
use serde::{Deserialize, Serialize};

use super::drivers::{
    example1_driver, example2_driver, two_param_driver, Bracket, Example2Comparison, HypothesisChecks, PairSolve,
    PairSummary,
};
use super::scenario::Scenario;
use super::thresholds::{example1_thresholds, example2_thresholds, ThresholdReport};
use crate::eigen::{AlphaGap, EigenSummary};
use crate::error::{Error, Result};
use crate::mesh::ScalarField;
use crate::plap::TorsionSummary;
use crate::report::write_json;
use crate::solve::{
    continuation_q_to_p, homogeneity_check, nonexistence_probe, ContinuationTrace, HomogeneityReport, Prepared,
    ProbeOutcome, ProbeReport, Schedule, SolveSummary,
};
use crate::subsuper::{Form, HypothesisReport, ProblemSummary};

/// Exit status of a scenario run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Config,
    /// A threshold or structural hypothesis is violated.
    Hypothesis,
    /// A solver did not converge or a computed quantity contradicts a proven bound.
    Solver,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Config => 1,
            Status::Hypothesis => 2,
            Status::Solver => 3,
        }
    }

    pub fn of_error(e: &Error) -> Status {
        match e {
            Error::Config(_) | Error::Expr { .. } | Error::Json(_) => Status::Config,
            Error::Threshold { .. }
            | Error::Overflow(_)
            | Error::NoBracket { .. }
            | Error::SubSolution { .. }
            | Error::SuperSolution { .. } => Status::Hypothesis,
            _ => Status::Solver,
        }
    }
}

/// Relative strict gap required of `lambda_beta` below `lambda1` when `beta > 0`.
pub const STRICT_GAP: f64 = 1e-6;
/// Largest allowed ratio of `max_n |grad u_n|_inf` to its median.
pub const GRADIENT_RATIO: f64 = 10.0;
/// Absolute mismatch allowed by the homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub status: Option<Status>,
    pub exit_code: i32,
    pub messages: Vec<String>,
    pub seed: u64,
    pub problem: Option<ProblemSummary>,
    pub torsion: Option<TorsionSummary>,
    pub eigen: Option<EigenSummary>,
    pub thresholds: Option<ThresholdReport>,
    pub hypotheses: Option<HypothesisChecks>,
    pub h3: Option<HypothesisReport>,
    pub pair: Option<PairSummary>,
    pub solve: Option<SolveSummary>,
    pub bracket: Option<Bracket>,
    pub example2: Option<Example2Comparison>,
    pub continuation: Option<ContinuationTrace>,
    pub homogeneity: Vec<HomogeneityReport>,
    pub probe: Option<ProbeReport>,
}

/// A finished run: the report plus the fields worth dumping.
#[derive(Clone, Debug, Default)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: Option<ScalarField>,
}

impl RunOutcome {
    pub fn status(&self) -> Status {
        self.report.status.unwrap_or(Status::Solver)
    }

    pub fn exit_code(&self) -> i32 {
        self.status().code()
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub h: Option<f64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(h) = self.h {
            s.h = h;
        }
        if let Some(t) = self.tol {
            s.tolerances.solve = t;
        }
        if let Some(o) = &self.out {
            s.out = Some(o.clone());
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
    }
}

struct Run {
    out: RunOutcome,
    worst: Status,
}

impl Run {
    fn flag(&mut self, s: Status, msg: impl Into<String>) {
        let msg = msg.into();
        if s == Status::Pass {
            info!("{msg}");
        } else {
            warn!("{msg}");
        }
        self.out.report.messages.push(msg);
        self.worst = self.worst.max(s);
    }

    fn fail(mut self, e: Error) -> RunOutcome {
        let s = Status::of_error(&e);
        self.flag(s, e.to_string());
        self.finish()
    }

    fn finish(mut self) -> RunOutcome {
        self.out.report.status = Some(self.worst);
        self.out.report.exit_code = self.worst.code();
        self.out
    }

    fn record_pair(&mut self, ps: &PairSolve) {
        let r = &mut self.out.report;
        r.pair = Some(ps.pair_summary.clone());
        r.solve = Some(ps.report.summary());
        r.bracket = Some(ps.bracket.clone());
        self.out.solution = Some(ps.report.solution.clone());
        if !ps.report.converged {
            let msg = format!("frozen-gradient solve did not converge (residual {:e})", ps.report.residual);
            self.flag(Status::Solver, msg);
        }
        if !ps.report.sandwich_pass {
            self.flag(Status::Solver, format!("iterate {:?} left the order interval", ps.report.escaped_at));
        }
        if !ps.bracket.pass {
            let b = &ps.bracket;
            let msg = format!("bracket {:e} <= {:e} <= {:e} violated", b.lower, b.sup_u, b.upper);
            self.flag(Status::Solver, msg);
        }
    }
}

fn thresholds_of(scn: &Scenario, prep: &Prepared) -> (ThresholdReport, Vec<String>) {
    let spec = &prep.spec;
    let (alpha, mu, lambda1) = (prep.td.alpha(), prep.td.mu(), prep.ep.lambda1);
    let mut notes = Vec::new();
    let alpha_gap = match prep.alpha_gap() {
        Ok(g) => Some(g),
        Err(e) => {
            notes.push(format!("alpha < lambda1 check: {e}"));
            None
        }
    };
    let mut r = ThresholdReport {
        alpha,
        mu,
        lambda1,
        beta_max: f64::INFINITY,
        lambda_star: None,
        m_star: None,
        lambda_star_box: None,
        alpha_gap: alpha_gap.clone(),
        lambda: spec.lam,
        beta: spec.beta,
        admissible: true,
        verdict: String::new(),
    };
    let mut verdict = Vec::new();
    if let Some(AlphaGap { rel_gap, .. }) = alpha_gap {
        if rel_gap <= 1e-3 {
            verdict.push(format!("relative gap lambda1 - alpha = {rel_gap:e} is below 1e-3"));
        }
    } else {
        r.admissible = false;
        verdict.push("alpha exceeds lambda1".into());
    }
    match &spec.form {
        Form::TwoParam => {
            r.beta_max = alpha / mu.powf(spec.b);
            let homogeneous = (spec.a + spec.b - (spec.p - 1.0)).abs() <= 1e-12;
            if homogeneous && spec.beta >= r.beta_max {
                r.admissible = false;
                verdict.push(format!("beta = {} >= alpha / mu^b = {}", spec.beta, r.beta_max));
            }
            if spec.q == spec.p && !homogeneous {
                r.admissible = false;
                verdict.push("q = p needs a + b = p - 1".into());
            }
        }
        Form::Example1 => match example1_thresholds(spec.p, spec.q, alpha, mu) {
            Ok(t) => {
                r.lambda_star = Some(t.lambda_star);
                r.m_star = Some(t.m_star);
                if spec.lam > t.lambda_star {
                    r.admissible = false;
                    verdict.push(format!("lambda = {} > lambda_* = {}", spec.lam, t.lambda_star));
                }
            }
            Err(e) => {
                r.admissible = false;
                verdict.push(e.to_string());
            }
        },
        Form::Example2 { c1, .. } => match example2_thresholds(*c1, spec.p, spec.q, alpha * spec.omega().inf(), mu) {
            Ok(t) => {
                r.lambda_star = Some(t.printed);
                r.lambda_star_box = Some(t.boxed);
                r.m_star = Some(t.m_box);
                if spec.lam > t.admissible_max() {
                    r.admissible = false;
                    verdict.push(format!("lambda = {} > min(printed, box) = {}", spec.lam, t.admissible_max()));
                }
            }
            Err(e) => {
                r.admissible = false;
                verdict.push(e.to_string());
            }
        },
        Form::Custom(_) => {}
    }
    let _ = scn;
    r.verdict = if verdict.is_empty() { "admissible".into() } else { verdict.join("; ") };
    (r, notes)
}

fn prepare(scn: &Scenario, run: &mut Run) -> Result<Prepared> {
    let dom = scn.build_domain()?;
    let spec = scn.build_spec(&dom)?;
    run.out.report.problem = Some(spec.summary());
    let prep = Prepared::new(spec, scn.tolerances.clone())?;
    run.out.report.torsion = Some(prep.td.summary());
    run.out.report.eigen = Some(prep.ep.summary());
    if !prep.ep.converged {
        run.flag(
            Status::Solver,
            format!(
                "eigenpair not converged to {:e} (relative residual {:e})",
                scn.tolerances.eigen, prep.ep.residual_rel
            ),
        );
    }
    Ok(prep)
}

/// Torsion, eigenpair and the threshold report only.
pub fn thresholds_scenario(scn: &Scenario) -> RunOutcome {
    let mut run = Run { out: RunOutcome::default(), worst: Status::Pass };
    run.out.report.name = scn.name.clone();
    run.out.report.seed = scn.seed;
    let prep = match prepare(scn, &mut run) {
        Ok(p) => p,
        Err(e) => return run.fail(e),
    };
    let (t, notes) = thresholds_of(scn, &prep);
    for n in notes {
        run.flag(Status::Hypothesis, n);
    }
    if !t.admissible {
        run.flag(Status::Hypothesis, format!("not admissible: {}", t.verdict));
    }
    run.out.report.thresholds = Some(t);
    run.finish()
}

/// Full pipeline: torsion, eigenpair, thresholds, pair, solve, and the continuation with its
/// diagnostics when `q = p`.
pub fn run_scenario_struct(scn: &Scenario) -> RunOutcome {
    let mut run = Run { out: RunOutcome::default(), worst: Status::Pass };
    run.out.report.name = scn.name.clone();
    run.out.report.seed = scn.seed;
    info!("scenario {}", scn.name);
    let prep = match prepare(scn, &mut run) {
        Ok(p) => p,
        Err(e) => return run.fail(e),
    };
    let (t, notes) = thresholds_of(scn, &prep);
    for n in notes {
        run.flag(Status::Hypothesis, n);
    }
    let admissible = t.admissible;
    let verdict = t.verdict.clone();
    run.out.report.thresholds = Some(t);
    if !admissible {
        run.flag(Status::Hypothesis, format!("not admissible: {verdict}"));
        return run.finish();
    }
    let spec = &prep.spec;
    let res = match &spec.form {
        Form::TwoParam if spec.q < spec.p => two_param_driver(&prep, &scn.frozen).map(|ps| run.record_pair(&ps)),
        Form::TwoParam => homogeneous(scn, &prep, &mut run),
        Form::Example1 => example1_driver(&prep, &scn.sampling, &scn.frozen).map(|o| {
            let pass = o.hypotheses.pass();
            run.out.report.hypotheses = Some(o.hypotheses);
            match o.solve {
                Some(ps) => run.record_pair(&ps),
                None if !pass => run.flag(Status::Hypothesis, "structural hypotheses H1-H3 failed"),
                None => {}
            }
        }),
        Form::Example2 { .. } => example2_driver(&prep, &scn.sampling, &scn.frozen).map(|o| {
            if let Some(h3) = &o.h3 {
                if !h3.pass {
                    run.flag(Status::Hypothesis, format!("H3 fails on the box M = {:e}", o.m));
                }
            }
            run.out.report.h3 = o.h3.clone();
            if let Some(ps) = &o.direct {
                run.record_pair(ps);
            } else {
                run.out.solution = o.mapped.clone();
            }
            if let Some(t) = &o.transformed {
                if !t.converged {
                    run.flag(Status::Solver, format!("transformed solve did not converge (residual {:e})", t.residual));
                }
            }
            if let Some(c) = &o.comparison {
                if !c.pass {
                    let msg =
                        format!("direct and transformed solutions differ by {:e} > {:e}", c.discrepancy, c.tolerance);
                    run.flag(Status::Solver, msg);
                }
            }
            run.out.report.example2 = o.comparison;
        }),
        Form::Custom(_) => Err(Error::Config("custom nonlinearities have no scenario driver".into())),
    };
    if let Err(e) = res {
        return run.fail(e);
    }
    run.finish()
}

fn homogeneous(scn: &Scenario, prep: &Prepared, run: &mut Run) -> Result<()> {
    let spec = &prep.spec;
    let schedule = scn.schedule.clone().unwrap_or(Schedule { q0: 0.5 * (1.0 + spec.p), stages: 8 });
    let trace = continuation_q_to_p(prep, &schedule, prep.tol.solve, &scn.continuation)?;
    if let Some(f) = &trace.failure {
        run.flag(Status::Solver, format!("continuation truncated: {f}"));
    }
    let slack = prep.tol.eigen.max(1e-6) * trace.lambda1;
    for s in &trace.stages {
        if !(s.lambda_q >= trace.lower - slack && s.lambda_q <= trace.lambda1 + slack) {
            let msg = format!("stage {}: lambda_q = {} outside [{}, {}]", s.n, s.lambda_q, trace.lower, trace.lambda1);
            run.flag(Status::Solver, msg);
        }
    }
    if trace.gradient_ratio > GRADIENT_RATIO {
        run.flag(Status::Solver, format!("gradient ratio {} exceeds {GRADIENT_RATIO}", trace.gradient_ratio));
    }
    if spec.beta > 0.0 && trace.complete && !(trace.gap > STRICT_GAP * trace.lambda1) {
        run.flag(
            Status::Solver,
            format!("lambda_beta = {} is not below lambda1 = {}", trace.lambda_beta, trace.lambda1),
        );
    }
    if let Some(u) = &trace.u_beta {
        let at_limit = spec.with_params(trace.lambda_beta.max(0.0), spec.beta)?;
        for &k in &scn.probe.homogeneity_scales {
            let h = homogeneity_check(u, &at_limit, k)?;
            if h.mismatch > HOMOGENEITY_TOL {
                run.flag(Status::Solver, format!("homogeneity mismatch {:e} at k = {k}", h.mismatch));
            }
            run.out.report.homogeneity.push(h);
        }
        run.out.solution = Some(u.clone());
    }
    if scn.probe.lambda_factor >= 1.0 + 1e-3 && !scn.probe.amplitudes.is_empty() {
        let probe_spec = spec.with_params(scn.probe.lambda_factor * prep.ep.lambda1, spec.beta)?;
        let probe =
            nonexistence_probe(&prep.with_spec(probe_spec), &scn.probe.amplitudes, scn.seed, scn.probe.max_iter)?;
        if probe.anomaly {
            run.flag(Status::Pass, "nonexistence probe converged to a positive profile (anomaly)");
        }
        let undecided = probe.runs.iter().filter(|r| r.outcome == ProbeOutcome::Undecided).count();
        info!("nonexistence probe: growth {} ({undecided} undecided runs)", probe.growth);
        run.out.report.probe = Some(probe);
    }
    run.out.report.continuation = Some(trace);
    Ok(())
}

/// Loads and runs a scenario file. Unreadable or malformed files give [`Status::Config`].
pub fn run_scenario(path: &Path, ov: &Overrides) -> RunOutcome {
    match Scenario::load(path) {
        Ok(mut scn) => {
            ov.apply(&mut scn);
            run_scenario_struct(&scn)
        }
        Err(e) => config_failure(path, e),
    }
}

pub(crate) fn config_failure(path: &Path, e: Error) -> RunOutcome {
    error!("{e}");
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let report = RunReport {
        name,
        status: Some(Status::Config),
        exit_code: Status::Config.code(),
        messages: vec![e.to_string()],
        ..RunReport::default()
    };
    RunOutcome { report, solution: None }
}

/// Writes `report.json`, `solution.csv` and, when present, `continuation.csv` and
/// `continuation.json` into `dir/<name>/`.
pub fn write_artifacts(out: &RunOutcome, dir: &Path) -> Result<PathBuf> {
    let name = if out.report.name.is_empty() { "scenario" } else { out.report.name.as_str() };
    let d = dir.join(name);
    std::fs::create_dir_all(&d)?;
    write_json(&d.join("report.json"), &out.report)?;
    if let Some(u) = &out.solution {
        u.write_csv(BufWriter::new(File::create(d.join("solution.csv"))?))?;
    }
    if let Some(t) = &out.report.continuation {
        t.write_csv(BufWriter::new(File::create(d.join("continuation.csv"))?))?;
        write_json(&d.join("continuation.json"), t)?;
    }
    Ok(d)
}
