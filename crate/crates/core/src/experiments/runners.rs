use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::records::{fmt_f64, hash_measurements, Program, Table, TrialRecord};
use super::signals::{compressible_signal, power_law_signal, sparse_signal};
use super::stats::{linear_fit, mean, wilson_interval, LinearFit};
use super::{ExperimentResult, ExperimentSpec};
use crate::block::{BlockSupport, BlockVector};
use crate::certificate::{gram_conditions, golfing_build, verify_inexact, verify_robust, GolfingSchedule, RobustParams};
use crate::error::{Error, Result};
use crate::frame::FusionFrame;
use crate::measurement::MeasurementEnsemble;
use crate::rng::{derive_seed, seeded};
use crate::solver::{solve_block_baseline, solve_l1_equality, solve_l1_noisy, SolveReport, SolverConfig};

const FRAME_TAG: u64 = 0x4652_414d_0000_0000;
const SIGNAL_TAG: u64 = 0x5349_474e_0000_0000;
const MATRIX_TAG: u64 = 0x4d41_5452;
const NOISE_TAG: u64 = 0x4e4f_4953;
/// Absolute slack for the bound check, covering solver accuracy when the bound is 0.
pub const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    s: usize,
    m: usize,
    d: usize,
    param: Option<f64>,
}

/// Aggregate over the trials of one (cell, program).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: usize,
    pub program: Program,
    pub s: usize,
    pub d: usize,
    pub m: usize,
    pub param: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_rel_err: f64,
    pub mean_abs_err: f64,
    pub mean_lambda_eff: f64,
}

/// Smallest swept m whose success rate reaches the threshold, per group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub program: Program,
    pub s: usize,
    pub d: usize,
    pub param: Option<f64>,
    pub lambda_eff: f64,
    pub m_min: Option<usize>,
}

/// Stability bound check for one noisy trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustCheck {
    pub seed: u64,
    pub sigma: f64,
    pub m: usize,
    pub error: f64,
    pub cert_valid: bool,
    /// C₁σ_s(x)₁ + (C₂ + C₃√s)η when the certificate is valid.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub seed: u64,
    pub s: usize,
    pub m: usize,
    pub inv_norm: f64,
    pub cross_max: f64,
    pub deviation: f64,
    pub cond2_on_s: f64,
    pub cond2_off_s: f64,
    pub h_norm: f64,
    pub cert_pass: bool,
    pub reasons: String,
    pub success: bool,
}

/// Certificate verdict against solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Contingency {
    pub pass_success: usize,
    pub pass_failure: usize,
    pub fail_success: usize,
    pub fail_failure: usize,
}

impl Contingency {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["cert_pass", "success", "count"]);
        for (p, s, c) in [
            (true, true, self.pass_success),
            (true, false, self.pass_failure),
            (false, true, self.fail_success),
            (false, false, self.fail_failure),
        ] {
            t.push(vec![p.to_string(), s.to_string(), c.to_string()]);
        }
        t
    }
}

fn solver_config(spec: &ExperimentSpec) -> SolverConfig {
    SolverConfig {
        success_rel_err: spec.success_rel_err,
        ..SolverConfig::default()
    }
}

fn frame_for(spec: &ExperimentSpec, d: usize) -> Result<Arc<FusionFrame>> {
    Ok(Arc::new(FusionFrame::random(
        spec.n,
        d,
        spec.k,
        derive_seed(spec.base_seed, FRAME_TAG ^ d as u64),
    )?))
}

fn lambda_eff(frame: &FusionFrame, support: &BlockSupport) -> Result<f64> {
    if support.is_empty() {
        Ok(0.0)
    } else {
        frame.incoherence().lambda_eff(support)
    }
}

/// Cells with m = 0, s > N or d < k are skipped with a note; an all-skipped grid is infeasible.
fn feasible_cells(spec: &ExperimentSpec, cells: &[Cell], notes: &mut Vec<String>) -> Result<Vec<usize>> {
    let mut ok = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let why = if c.m == 0 {
            Some("m = 0".to_string())
        } else if c.s > spec.n {
            Some(format!("s = {} exceeds N = {}", c.s, spec.n))
        } else if c.d < spec.k {
            Some(format!("d = {} below k = {}", c.d, spec.k))
        } else {
            None
        };
        match why {
            Some(w) => notes.push(format!("cell {i} skipped: {w}")),
            None => ok.push(i),
        }
    }
    if ok.is_empty() {
        return Err(Error::Infeasible("every cell of the sweep is infeasible".into()));
    }
    Ok(ok)
}

fn par_trials<T, F>(spec: &ExperimentSpec, cells: &[usize], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize, u64) -> Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = cells
        .iter()
        .flat_map(|&c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(c, t)| f(c, t, spec.trial_seed(c, t)))
        .collect()
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    cell_idx: usize,
    cell: Cell,
    trial: usize,
    seed: u64,
}

impl Ctx<'_> {
    fn record(
        &self,
        program: Program,
        report: &SolveReport,
        truth: &BlockVector,
        y: &BlockVector,
        lambda_eff: f64,
    ) -> Result<TrialRecord> {
        let abs_err = report.abs_err(truth)?;
        let nrm = truth.norm_l2();
        let rel_err = if nrm > 0.0 { abs_err / nrm } else { abs_err };
        Ok(TrialRecord {
            experiment: self.spec.name.as_str().to_string(),
            cell: self.cell_idx,
            trial: self.trial,
            seed: self.seed,
            n: self.spec.n,
            d: self.cell.d,
            k: self.spec.k,
            s: self.cell.s,
            m: self.cell.m,
            lambda_eff,
            kind: self.spec.kind.as_str().to_string(),
            program,
            param: self.cell.param,
            success: rel_err <= self.spec.success_rel_err,
            rel_err,
            abs_err,
            objective: report.objective,
            iterations: report.iterations,
            converged: report.converged,
            y_hash: hash_measurements(y),
            cert_pass: None,
            wall_time: report.wall_time,
        })
    }

    fn ensemble(&self, frame: &Arc<FusionFrame>) -> Result<MeasurementEnsemble> {
        MeasurementEnsemble::draw(
            self.spec.kind,
            self.cell.m,
            frame.clone(),
            derive_seed(self.seed, MATRIX_TAG),
            true,
        )
    }
}

fn summarise(cells: &[Cell], records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(usize, Program), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.cell, r.program)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((cell, program), rs)| {
            let c = cells[cell];
            let successes = rs.iter().filter(|r| r.success).count();
            let (lo, hi) = wilson_interval(successes, rs.len());
            let rel: Vec<f64> = rs.iter().map(|r| r.rel_err).collect();
            let abs: Vec<f64> = rs.iter().map(|r| r.abs_err).collect();
            let lam: Vec<f64> = rs.iter().map(|r| r.lambda_eff).collect();
            CellSummary {
                cell,
                program,
                s: c.s,
                d: c.d,
                m: c.m,
                param: c.param,
                trials: rs.len(),
                successes,
                rate: successes as f64 / rs.len() as f64,
                wilson_lo: lo,
                wilson_hi: hi,
                mean_rel_err: mean(&rel),
                mean_abs_err: mean(&abs),
                mean_lambda_eff: mean(&lam),
            }
        })
        .collect()
}

/// Minimal m reaching the threshold for each (program, s, d, param) group.
fn transitions(spec: &ExperimentSpec, summaries: &[CellSummary]) -> Vec<Transition> {
    let mut groups: BTreeMap<(Program, usize, usize, Option<u64>), Vec<&CellSummary>> = BTreeMap::new();
    for c in summaries {
        groups
            .entry((c.program, c.s, c.d, c.param.map(f64::to_bits)))
            .or_default()
            .push(c);
    }
    groups
        .into_iter()
        .map(|((program, s, d, param), mut cs)| {
            cs.sort_by_key(|c| c.m);
            let m_min = cs.iter().find(|c| c.rate >= spec.threshold).map(|c| c.m);
            let lam: Vec<f64> = cs.iter().map(|c| c.mean_lambda_eff).collect();
            Transition {
                program,
                s,
                d,
                param: param.map(f64::from_bits),
                lambda_eff: mean(&lam),
                m_min,
            }
        })
        .collect()
}

fn finish(spec: &ExperimentSpec, cells: &[Cell], records: Vec<TrialRecord>, notes: Vec<String>) -> ExperimentResult {
    let summary = summarise(cells, &records);
    let transitions = transitions(spec, &summary);
    ExperimentResult {
        records,
        cells: summary,
        transitions,
        notes,
        ..Default::default()
    }
}

fn grid_s_m(spec: &ExperimentSpec) -> Vec<Cell> {
    spec.s_list
        .iter()
        .flat_map(|&s| {
            spec.m_list.iter().map(move |&m| Cell {
                s,
                m,
                d: spec.d,
                param: None,
            })
        })
        .collect()
}

fn grid_param_m(spec: &ExperimentSpec, params: &[f64]) -> Vec<Cell> {
    let s = spec.s_list[0];
    params
        .iter()
        .flat_map(|&p| {
            spec.m_list.iter().map(move |&m| Cell {
                s,
                m,
                d: spec.d,
                param: Some(p),
            })
        })
        .collect()
}

pub(super) fn run_phase_transition(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_s_m(spec);
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    // one fixed signal per sparsity level
    let mut signals = BTreeMap::new();
    for &c in &feasible {
        let s = cells[c].s;
        signals.entry(s).or_insert_with(|| {
            let mut rng = seeded(derive_seed(spec.base_seed, SIGNAL_TAG ^ s as u64));
            sparse_signal(&frame, s, &mut rng)
        });
    }
    let lambdas: BTreeMap<usize, f64> = signals
        .iter()
        .map(|(&s, (_, sup))| Ok((s, lambda_eff(&frame, sup)?)))
        .collect::<Result<_>>()?;
    let records = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let (x, _) = &signals[&ctx.cell.s];
        let e = ctx.ensemble(&frame)?;
        let y = e.apply_ap(x)?;
        let report = solve_l1_equality(&e, &y, &cfg)?;
        ctx.record(Program::Ff, &report, x, &y, lambdas[&ctx.cell.s])
    })?;
    Ok(finish(spec, &cells, records, notes))
}

pub(super) fn run_ff_vs_block(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_s_m(spec);
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    let pairs = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let (x, sup) = sparse_signal(&frame, ctx.cell.s, &mut rng);
        let lam = lambda_eff(&frame, &sup)?;
        let e = ctx.ensemble(&frame)?;
        let y = e.apply_ap(&x)?;
        let ff = solve_l1_equality(&e, &y, &cfg)?;
        let block = solve_block_baseline(&e, &y, &cfg)?;
        Ok(vec![
            ctx.record(Program::Ff, &ff, &x, &y, lam)?,
            ctx.record(Program::Block, &block, &x, &y, lam)?,
        ])
    })?;
    let records = pairs.into_iter().flatten().collect();
    Ok(finish(spec, &cells, records, notes))
}

pub(super) fn run_m_vs_lambda_eff(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let s = spec.s_list[0];
    let cells: Vec<Cell> = spec
        .d_list
        .iter()
        .flat_map(|&d| spec.m_list.iter().map(move |&m| Cell { s, m, d, param: None }))
        .collect();
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let mut frames = BTreeMap::new();
    for &c in &feasible {
        let d = cells[c].d;
        if let std::collections::btree_map::Entry::Vacant(v) = frames.entry(d) {
            v.insert(frame_for(spec, d)?);
        }
    }
    let cfg = solver_config(spec);
    let records = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let frame = &frames[&ctx.cell.d];
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let (x, sup) = sparse_signal(frame, s, &mut rng);
        let lam = lambda_eff(frame, &sup)?;
        let e = ctx.ensemble(frame)?;
        let y = e.apply_ap(&x)?;
        let report = solve_l1_equality(&e, &y, &cfg)?;
        ctx.record(Program::Ff, &report, &x, &y, lam)
    })?;
    let mut result = finish(spec, &cells, records, notes);
    let points: Vec<(f64, f64)> = result
        .transitions
        .iter()
        .filter_map(|t| t.m_min.map(|m| (t.lambda_eff, m as f64)))
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    match linear_fit("m_min vs lambda_eff", &xs, &ys) {
        Some(fit) => result.fits.push(fit),
        None => result
            .notes
            .push(format!("fit refused: {} usable lambda_eff value(s)", points.len())),
    }
    Ok(result)
}

pub(super) fn run_stable(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_param_m(spec, &spec.theta);
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    let records = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let theta = ctx.cell.param.expect("theta cell");
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let (x, sup) = compressible_signal(&frame, ctx.cell.s, theta, &mut rng);
        let lam = lambda_eff(&frame, &sup)?;
        let e = ctx.ensemble(&frame)?;
        let y = e.apply_ap(&x)?;
        let report = solve_l1_equality(&e, &y, &cfg)?;
        ctx.record(Program::Ff, &report, &x, &y, lam)
    })?;
    Ok(finish(spec, &cells, records, notes))
}

pub(super) fn run_noisy(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_param_m(spec, &spec.sigma_list);
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    let rows = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let sigma = ctx.cell.param.expect("sigma cell");
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let (x, sup) = sparse_signal(&frame, ctx.cell.s, &mut rng);
        let lam = lambda_eff(&frame, &sup)?;
        let e = ctx.ensemble(&frame)?;
        let clean = e.apply_ap(&x)?;
        let noisy = e.add_noise(&clean, sigma, derive_seed(seed, NOISE_TAG))?;
        let report = solve_l1_noisy(&e, &noisy.y, sigma, &cfg)?;
        let mut rec = ctx.record(Program::Ff, &report, &x, &noisy.y, lam)?;

        let check = if sup.is_empty() {
            None
        } else {
            let schedule = GolfingSchedule::default_for(ctx.cell.m, spec.n, sup.len())?;
            let cert = golfing_build(&e, &x, &schedule)?;
            let gram = gram_conditions(&e, &sup)?;
            let params = RobustParams::from_measured(&cert, &gram);
            let verdict = verify_robust(&cert, &gram, &params);
            let valid = verdict.as_ref().is_ok_and(|v| v.valid);
            rec.cert_pass = Some(valid);
            let bound = match (&verdict, valid) {
                (Ok(v), true) => Some(v.error_bound(x.best_s_term_error(sup.len()), sigma, sup.len())),
                _ => None,
            };
            Some(RobustCheck {
                seed,
                sigma,
                m: ctx.cell.m,
                error: rec.abs_err,
                cert_valid: valid,
                bound,
                holds: bound.map(|b| rec.abs_err <= b + BOUND_SLACK),
            })
        };
        Ok((rec, check))
    })?;
    let (records, checks): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut result = finish(spec, &cells, records, notes);
    result.robust_checks = checks.into_iter().flatten().collect();
    fit_error_vs_param(&mut result, "sigma");
    Ok(result)
}

/// Linear fit of mean absolute error against the swept parameter, one per m.
fn fit_error_vs_param(result: &mut ExperimentResult, label: &str) {
    let mut by_m: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for c in &result.cells {
        if let Some(p) = c.param {
            by_m.entry(c.m).or_default().push((p, c.mean_abs_err));
        }
    }
    for (m, pts) in by_m {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        match linear_fit(format!("error vs {label}, m={m}"), &xs, &ys) {
            Some(f) => result.fits.push(f),
            None => result.notes.push(format!("fit refused for m={m}: fewer than two {label} values")),
        }
    }
}

pub(super) fn run_power_law(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_param_m(spec, &spec.q_list);
    let mut notes = Vec::new();
    let feasible = feasible_cells(spec, &cells, &mut notes)?;
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    let records = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let q = ctx.cell.param.expect("q cell");
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let x = power_law_signal(&frame, q, &mut rng);
        let lam = lambda_eff(&frame, &x.best_s_term_support(ctx.cell.s))?;
        let e = ctx.ensemble(&frame)?;
        let y = e.apply_ap(&x)?;
        let report = solve_l1_equality(&e, &y, &cfg)?;
        ctx.record(Program::Ff, &report, &x, &y, lam)
    })?;
    let mut result = finish(spec, &cells, records, notes);
    fit_error_vs_param(&mut result, "q");
    Ok(result)
}

pub(super) fn run_certificate_audit(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let cells = grid_s_m(spec);
    let mut notes = Vec::new();
    let mut feasible = feasible_cells(spec, &cells, &mut notes)?;
    feasible.retain(|&c| {
        let keep = cells[c].s > 0;
        if !keep {
            notes.push(format!("cell {c} skipped: a certificate needs a nonempty support"));
        }
        keep
    });
    if feasible.is_empty() {
        return Err(Error::Infeasible("no cell has a nonempty support".into()));
    }
    let frame = frame_for(spec, spec.d)?;
    let cfg = solver_config(spec);
    let rows = par_trials(spec, &feasible, |c, trial, seed| {
        let ctx = Ctx {
            spec,
            cell_idx: c,
            cell: cells[c],
            trial,
            seed,
        };
        let mut rng = seeded(derive_seed(seed, SIGNAL_TAG));
        let (x, sup) = sparse_signal(&frame, ctx.cell.s, &mut rng);
        let lam = lambda_eff(&frame, &sup)?;
        let e = ctx.ensemble(&frame)?;
        let y = e.apply_ap(&x)?;
        let schedule = GolfingSchedule::default_for(ctx.cell.m, spec.n, sup.len())?;
        let cert = golfing_build(&e, &x, &schedule)?;
        let gram = gram_conditions(&e, &sup)?;
        let verdict = verify_inexact(&cert, &gram);
        let report = solve_l1_equality(&e, &y, &cfg)?;
        let mut rec = ctx.record(Program::Ff, &report, &x, &y, lam)?;
        rec.cert_pass = Some(verdict.passed);
        let audit = AuditRow {
            seed,
            s: ctx.cell.s,
            m: ctx.cell.m,
            inv_norm: gram.inv_norm,
            cross_max: gram.cross_max,
            deviation: gram.deviation,
            cond2_on_s: cert.cond2_on_s,
            cond2_off_s: cert.cond2_off_s,
            h_norm: cert.h_norm,
            cert_pass: verdict.passed,
            reasons: verdict.reasons.join(";"),
            success: rec.success,
        };
        Ok((rec, audit))
    })?;
    let (records, audit): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut contingency = Contingency::default();
    for a in &audit {
        match (a.cert_pass, a.success) {
            (true, true) => contingency.pass_success += 1,
            (true, false) => contingency.pass_failure += 1,
            (false, true) => contingency.fail_success += 1,
            (false, false) => contingency.fail_failure += 1,
        }
    }
    let mut result = finish(spec, &cells, records, notes);
    result.audit = audit;
    result.contingency = Some(contingency);
    Ok(result)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub(super) fn cell_table(cells: &[CellSummary]) -> Table {
    let mut t = Table::new(&[
        "program",
        "s",
        "d",
        "m",
        "param",
        "trials",
        "successes",
        "rate",
        "wilson_lo",
        "wilson_hi",
        "mean_rel_err",
        "mean_abs_err",
        "mean_lambda_eff",
    ]);
    for c in cells {
        t.push(vec![
            c.program.as_str().to_string(),
            c.s.to_string(),
            c.d.to_string(),
            c.m.to_string(),
            opt_f64(c.param),
            c.trials.to_string(),
            c.successes.to_string(),
            fmt_f64(c.rate),
            fmt_f64(c.wilson_lo),
            fmt_f64(c.wilson_hi),
            fmt_f64(c.mean_rel_err),
            fmt_f64(c.mean_abs_err),
            fmt_f64(c.mean_lambda_eff),
        ]);
    }
    t
}

pub(super) fn transition_table(ts: &[Transition]) -> Table {
    let mut t = Table::new(&["program", "s", "d", "param", "lambda_eff", "m_min"]);
    for r in ts {
        t.push(vec![
            r.program.as_str().to_string(),
            r.s.to_string(),
            r.d.to_string(),
            opt_f64(r.param),
            fmt_f64(r.lambda_eff),
            r.m_min.map(|m| m.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub(super) fn fit_table(fits: &[LinearFit]) -> Table {
    let mut t = Table::new(&["group", "slope", "intercept", "r2", "points"]);
    for f in fits {
        t.push(vec![
            f.group.clone(),
            fmt_f64(f.slope),
            fmt_f64(f.intercept),
            fmt_f64(f.r2),
            f.points.to_string(),
        ]);
    }
    t
}

pub(super) fn robust_table(rows: &[RobustCheck]) -> Table {
    let mut t = Table::new(&["seed", "sigma", "m", "error", "cert_valid", "bound", "holds"]);
    for r in rows {
        t.push(vec![
            r.seed.to_string(),
            fmt_f64(r.sigma),
            r.m.to_string(),
            fmt_f64(r.error),
            r.cert_valid.to_string(),
            opt_f64(r.bound),
            r.holds.map(|h| h.to_string()).unwrap_or_default(),
        ]);
    }
    t
}

pub(super) fn audit_table(rows: &[AuditRow]) -> Table {
    let mut t = Table::new(&[
        "seed",
        "s",
        "m",
        "inv_norm",
        "cross_max",
        "deviation",
        "cond2_on_s",
        "cond2_off_s",
        "h_norm",
        "cert_pass",
        "reasons",
        "success",
    ]);
    for r in rows {
        t.push(vec![
            r.seed.to_string(),
            r.s.to_string(),
            r.m.to_string(),
            fmt_f64(r.inv_norm),
            fmt_f64(r.cross_max),
            fmt_f64(r.deviation),
            fmt_f64(r.cond2_on_s),
            fmt_f64(r.cond2_off_s),
            fmt_f64(r.h_norm),
            r.cert_pass.to_string(),
            r.reasons.clone(),
            r.success.to_string(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::super::{run, ExperimentName, ExperimentSpec};
    use super::*;
    use crate::measurement::MatrixKind;

    fn spec(name: ExperimentName) -> ExperimentSpec {
        ExperimentSpec {
            name,
            n: 12,
            d: 4,
            k: 2,
            s_list: vec![0, 2],
            m_list: vec![1, 6],
            d_list: vec![],
            theta: vec![0.0, 0.1],
            sigma_list: vec![0.0, 0.05],
            q_list: vec![0.3, 1.0],
            trials: 2,
            base_seed: 3,
            success_rel_err: 1e-4,
            kind: MatrixKind::Bernoulli,
            threshold: 0.96,
            record_wall_time: false,
        }
    }

    #[test]
    fn phase_transition_smoke() {
        let r = run(&spec(ExperimentName::PhaseTransition)).unwrap();
        assert_eq!(r.records.len(), 8);
        // x = 0 succeeds at m = 1
        let zero: Vec<_> = r.records.iter().filter(|t| t.s == 0).collect();
        assert!(zero.iter().all(|t| t.success && t.rel_err == 0.0));
        assert_eq!(r.cells.len(), 4);
        let t0 = r.transitions.iter().find(|t| t.s == 0).unwrap();
        assert_eq!(t0.m_min, Some(1));
        for rec in &r.records {
            assert_eq!(rec.success, rec.rel_err <= 1e-4);
            assert_eq!(rec.seed, 3_000_000 + rec.cell as u64 * 1000 + rec.trial as u64);
        }
    }

    #[test]
    fn ff_vs_block_pairs_share_measurements() {
        let mut s = spec(ExperimentName::FfVsBlock);
        s.trials = 1;
        s.s_list = vec![2];
        s.m_list = vec![3];
        let r = run(&s).unwrap();
        assert_eq!(r.records.len(), 2);
        assert_eq!(r.records[0].program, Program::Ff);
        assert_eq!(r.records[1].program, Program::Block);
        assert_eq!(r.records[0].seed, r.records[1].seed);
        assert_eq!(r.records[0].y_hash, r.records[1].y_hash);
    }

    #[test]
    fn ff_equals_block_when_k_equals_d() {
        let mut s = spec(ExperimentName::FfVsBlock);
        s.k = 4;
        s.s_list = vec![2];
        s.m_list = vec![2, 3];
        s.trials = 4;
        let r = run(&s).unwrap();
        for pair in r.records.chunks(2) {
            assert_eq!(pair[0].success, pair[1].success);
        }
    }

    #[test]
    fn infeasible_grid_is_reported() {
        let mut s = spec(ExperimentName::PhaseTransition);
        s.s_list = vec![20];
        assert!(matches!(run(&s), Err(Error::Infeasible(_))));
        s.s_list = vec![20, 1];
        let r = run(&s).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("exceeds N")));
    }

    #[test]
    fn lambda_sweep_single_d_refuses_fit() {
        let mut s = spec(ExperimentName::MVsLambdaEff);
        s.s_list = vec![2];
        s.d_list = vec![4];
        let r = run(&s).unwrap();
        assert!(r.fits.is_empty());
        assert!(r.notes.iter().any(|n| n.starts_with("fit refused")));
    }

    #[test]
    fn other_runners_smoke() {
        for name in [
            ExperimentName::StableTheta,
            ExperimentName::NoisySigma,
            ExperimentName::PowerLawQ,
            ExperimentName::CertificateAudit,
        ] {
            let mut s = spec(name);
            s.s_list = vec![2];
            let r = run(&s).unwrap();
            let cells = if name == ExperimentName::CertificateAudit { 2 } else { 4 };
            assert_eq!(r.records.len(), cells * 2, "{name}");
            assert!(r.records.iter().all(|t| t.param.is_some() == (name != ExperimentName::CertificateAudit)));
        }
    }

    #[test]
    fn audit_records_conditions() {
        let mut s = spec(ExperimentName::CertificateAudit);
        s.s_list = vec![0, 1];
        s.trials = 1;
        let r = run(&s).unwrap();
        assert_eq!(r.audit.len(), 2);
        let c = r.contingency.unwrap();
        assert_eq!(c.pass_success + c.pass_failure + c.fail_success + c.fail_failure, 2);
        assert!(r.notes.iter().any(|n| n.contains("nonempty support")));
        assert!(r.records.iter().all(|t| t.cert_pass.is_some()));
    }
}
