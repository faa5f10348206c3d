use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::block::BlockVector;

/// Column order of the trial CSV. Bump [`SCHEMA_VERSION`] when it changes.
pub const TRIAL_HEADER: [&str; 18] = [
    "experiment",
    "seed",
    "N",
    "d",
    "k",
    "s",
    "m",
    "lambda_eff",
    "kind",
    "program",
    "param",
    "success",
    "rel_err",
    "objective",
    "iterations",
    "converged",
    "y_hash",
    "cert_pass",
];
pub const WALL_TIME_COLUMN: &str = "wall_time";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Program {
    Ff,
    Block,
}

impl Program {
    pub fn as_str(self) -> &'static str {
        match self {
            Program::Ff => "ff",
            Program::Block => "block",
        }
    }
}

/// One row per (cell, trial, program).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub experiment: String,
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub s: usize,
    pub m: usize,
    pub lambda_eff: f64,
    pub kind: String,
    pub program: Program,
    /// θ, σ or q, depending on the experiment.
    pub param: Option<f64>,
    pub success: bool,
    pub rel_err: f64,
    pub abs_err: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub y_hash: String,
    pub cert_pass: Option<bool>,
    pub wall_time: f64,
}

impl TrialRecord {
    fn fields(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.seed.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.k.to_string(),
            self.s.to_string(),
            self.m.to_string(),
            fmt_f64(self.lambda_eff),
            self.kind.clone(),
            self.program.as_str().to_string(),
            self.param.map(fmt_f64).unwrap_or_default(),
            self.success.to_string(),
            fmt_f64(self.rel_err),
            fmt_f64(self.objective),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.y_hash.clone(),
            self.cert_pass.map(|b| b.to_string()).unwrap_or_default(),
        ]
    }
}

/// Shortest decimal string that parses back to the same f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

/// First 16 hex digits of SHA-256 over the little-endian bytes of y.
pub fn hash_measurements(y: &BlockVector) -> String {
    let mut hasher = Sha256::new();
    for v in y.as_slice() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(16);
    for b in &digest[..8] {
        write!(out, "{b:02x}").expect("writing to a String");
    }
    out
}

/// A header plus string rows, rendered as LF-terminated CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        push_line(&mut out, &self.header);
        for row in &self.rows {
            push_line(&mut out, row);
        }
        out
    }

    /// Whitespace-separated rendering with a commented header, for gnuplot.
    pub fn to_dat(&self) -> String {
        let mut out = format!("# {}\n", self.header.join(" "));
        for row in &self.rows {
            let cells: Vec<&str> = row.iter().map(|c| if c.is_empty() { "?" } else { c.as_str() }).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
        out
    }
}

fn push_line(out: &mut String, cells: &[String]) {
    let escaped: Vec<String> = cells.iter().map(|c| escape(c)).collect();
    out.push_str(&escaped.join(","));
    out.push('\n');
}

fn escape(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

pub fn trial_table(records: &[TrialRecord], with_wall_time: bool) -> Table {
    let mut header: Vec<&str> = TRIAL_HEADER.to_vec();
    if with_wall_time {
        header.push(WALL_TIME_COLUMN);
    }
    let mut table = Table::new(&header);
    for r in records {
        let mut row = r.fields();
        if with_wall_time {
            row.push(fmt_f64(r.wall_time));
        }
        table.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockForm;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = BlockVector::from_flat(vec![1.0, 2.0], 1, BlockForm::Ambient).unwrap();
        let b = BlockVector::from_flat(vec![1.0, 2.0 + 1e-15], 1, BlockForm::Ambient).unwrap();
        assert_eq!(hash_measurements(&a), hash_measurements(&a.clone()));
        assert_ne!(hash_measurements(&a), hash_measurements(&b));
        assert_eq!(hash_measurements(&a).len(), 16);
    }

    #[test]
    fn csv_escaping_and_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"x,y\",\n");
        assert_eq!(t.to_dat(), "# a b\nx,y ?\n");
    }

    #[test]
    fn trial_header_is_pinned() {
        let t = trial_table(&[], false);
        assert_eq!(
            t.to_csv(),
            "experiment,seed,N,d,k,s,m,lambda_eff,kind,program,param,success,rel_err,objective,iterations,converged,y_hash,cert_pass\n"
        );
        assert!(trial_table(&[], true).to_csv().trim_end().ends_with(",wall_time"));
    }
}
