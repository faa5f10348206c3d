//! Seeded Monte-Carlo sweeps.
//!
//! An [`ExperimentSpec`] fixes the frame, the grids and the trial count. Every
//! trial is a pure function of its seed, trials run on the rayon pool, and the
//! rows are emitted in (cell, trial, program) order, so reruns produce
//! byte-identical files regardless of the thread count.

mod records;
mod runners;
mod signals;
mod stats;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MatrixKind;

pub use records::{
    fmt_f64, hash_measurements, trial_table, Program, Table, TrialRecord, SCHEMA_VERSION, TRIAL_HEADER,
    WALL_TIME_COLUMN,
};
pub use runners::{AuditRow, CellSummary, Contingency, RobustCheck, Transition, BOUND_SLACK};
pub use signals::{compressible_signal, power_law_signal, sparse_signal};
pub use stats::{linear_fit, mean, wilson_interval, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    PhaseTransition,
    FfVsBlock,
    MVsLambdaEff,
    StableTheta,
    NoisySigma,
    PowerLawQ,
    CertificateAudit,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::PhaseTransition,
        ExperimentName::FfVsBlock,
        ExperimentName::MVsLambdaEff,
        ExperimentName::StableTheta,
        ExperimentName::NoisySigma,
        ExperimentName::PowerLawQ,
        ExperimentName::CertificateAudit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::PhaseTransition => "phase_transition",
            ExperimentName::FfVsBlock => "ff_vs_block",
            ExperimentName::MVsLambdaEff => "m_vs_lambda_eff",
            ExperimentName::StableTheta => "stable_theta",
            ExperimentName::NoisySigma => "noisy_sigma",
            ExperimentName::PowerLawQ => "power_law_q",
            ExperimentName::CertificateAudit => "certificate_audit",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Spec(format!("unknown experiment {s:?}")))
    }
}

fn default_success() -> f64 {
    1e-4
}

fn default_threshold() -> f64 {
    0.96
}

fn default_kind() -> MatrixKind {
    MatrixKind::Bernoulli
}

/// Sweep description, read from JSON. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub k: usize,
    #[serde(default)]
    pub s_list: Vec<usize>,
    pub m_list: Vec<usize>,
    /// Ambient dimensions swept to move λ_eff (m_vs_lambda_eff only).
    #[serde(default)]
    pub d_list: Vec<usize>,
    /// Off-support weights θ (stable_theta).
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Noise levels σ (noisy_sigma).
    #[serde(default)]
    pub sigma_list: Vec<f64>,
    /// Power-law exponents q (power_law_q).
    #[serde(default)]
    pub q_list: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_success")]
    pub success_rel_err: f64,
    #[serde(default = "default_kind")]
    pub kind: MatrixKind,
    /// Success rate defining the transition point.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Adds a wall_time column; off by default because it breaks byte-identity.
    #[serde(default)]
    pub record_wall_time: bool,
}

/// Largest trial count the seed layout keeps collision-free.
pub const MAX_TRIALS: usize = 1000;

impl ExperimentSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks; failures map to [`Error::Spec`].
    pub fn validate(&self) -> Result<()> {
        let spec = |msg: String| Err(Error::Spec(msg));
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return spec(format!("N, d, k must be positive (got {}, {}, {})", self.n, self.d, self.k));
        }
        if self.k > self.d {
            return spec(format!("k = {} exceeds d = {}", self.k, self.d));
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return spec(format!("trials must lie in 1..={MAX_TRIALS}, got {}", self.trials));
        }
        if self.m_list.is_empty() {
            return spec("m_list is empty".into());
        }
        if !(self.success_rel_err > 0.0) {
            return spec("success_rel_err must be positive".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return spec(format!("threshold must lie in (0, 1], got {}", self.threshold));
        }
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { spec(format!("{what} is empty")) };
        match self.name {
            ExperimentName::PhaseTransition | ExperimentName::FfVsBlock | ExperimentName::CertificateAudit => {
                need(!self.s_list.is_empty(), "s_list")?
            }
            ExperimentName::MVsLambdaEff => {
                need(!self.s_list.is_empty(), "s_list")?;
                need(!self.d_list.is_empty(), "d_list")?;
            }
            ExperimentName::StableTheta => {
                need(!self.s_list.is_empty(), "s_list")?;
                need(!self.theta.is_empty(), "theta")?;
            }
            ExperimentName::NoisySigma => {
                need(!self.s_list.is_empty(), "s_list")?;
                need(!self.sigma_list.is_empty(), "sigma_list")?;
            }
            ExperimentName::PowerLawQ => {
                need(!self.s_list.is_empty(), "s_list")?;
                need(!self.q_list.is_empty(), "q_list")?;
            }
        }
        for (name, list) in [("theta", &self.theta), ("sigma_list", &self.sigma_list)] {
            if list.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return spec(format!("{name} entries must be finite and nonnegative"));
            }
        }
        if self.q_list.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
            return spec("q_list entries must be positive".into());
        }
        Ok(())
    }

    /// seed = base_seed·10⁶ + cell·10³ + trial (wrapping).
    pub fn trial_seed(&self, cell: usize, trial: usize) -> u64 {
        self.base_seed
            .wrapping_mul(1_000_000)
            .wrapping_add((cell as u64).wrapping_mul(1_000))
            .wrapping_add(trial as u64)
    }
}

/// Everything a run produces, structured for tests and rendered for files.
#[derive(Debug, Clone, Default)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
    pub transitions: Vec<Transition>,
    pub fits: Vec<LinearFit>,
    pub robust_checks: Vec<RobustCheck>,
    pub audit: Vec<AuditRow>,
    pub contingency: Option<Contingency>,
    /// Skipped cells, refused fits and similar remarks.
    pub notes: Vec<String>,
}

impl ExperimentResult {
    pub fn trial_csv(&self, with_wall_time: bool) -> String {
        trial_table(&self.records, with_wall_time).to_csv()
    }

    /// Companion tables keyed by file suffix.
    pub fn sidecars(&self) -> Vec<(&'static str, Table)> {
        let mut out = vec![("summary.csv", runners::cell_table(&self.cells))];
        out.push(("dat", runners::cell_table(&self.cells)));
        if !self.transitions.is_empty() {
            out.push(("transitions.csv", runners::transition_table(&self.transitions)));
        }
        if !self.fits.is_empty() {
            out.push(("fits.csv", runners::fit_table(&self.fits)));
        }
        if !self.robust_checks.is_empty() {
            out.push(("robust.csv", runners::robust_table(&self.robust_checks)));
        }
        if !self.audit.is_empty() {
            out.push(("audit.csv", runners::audit_table(&self.audit)));
        }
        if let Some(c) = &self.contingency {
            out.push(("contingency.csv", c.table()));
        }
        out
    }

    /// Writes the trial CSV to `out` and the companions next to it
    /// (`<stem>.summary.csv`, `<stem>.dat`, …). Returns every path written.
    pub fn write(&self, out: &Path, with_wall_time: bool) -> Result<Vec<PathBuf>> {
        if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, self.trial_csv(with_wall_time))?;
        let mut written = vec![out.to_path_buf()];
        let stem = out.with_extension("");
        for (suffix, table) in self.sidecars() {
            let path = PathBuf::from(format!("{}.{suffix}", stem.display()));
            let body = if suffix == "dat" { table.to_dat() } else { table.to_csv() };
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Validates the spec and dispatches to the matching runner on the current rayon pool.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    match spec.name {
        ExperimentName::PhaseTransition => runners::run_phase_transition(spec),
        ExperimentName::FfVsBlock => runners::run_ff_vs_block(spec),
        ExperimentName::MVsLambdaEff => runners::run_m_vs_lambda_eff(spec),
        ExperimentName::StableTheta => runners::run_stable(spec),
        ExperimentName::NoisySigma => runners::run_noisy(spec),
        ExperimentName::PowerLawQ => runners::run_power_law(spec),
        ExperimentName::CertificateAudit => runners::run_certificate_audit(spec),
    }
}
