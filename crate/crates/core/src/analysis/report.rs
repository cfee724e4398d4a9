//! CSV tables for external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::formulas::{analytic_link_avg_with_k, analytic_link_self_to_self, analytic_link_vpki_to_self, AnalyticalParams, LinkKind};
use super::montecarlo::{empirical_link_probability, LinkingEstimate};
use super::observer::anonymity_sets;
use super::AnalysisError;
use crate::sim::ObservationLog;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_g9(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

/// One CSV file: `<name>.csv` with `columns` as the header row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ReportTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, AnalysisError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(AnalysisError::csv)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(AnalysisError::csv)?;
        }
        w.into_inner().map_err(|e| AnalysisError::Report(e.to_string()))
    }
}

/// `%.9g` formatting: nine significant digits, trailing zeros trimmed.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (8 - exp) as usize)).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes each table as `<dir>/<name>.csv`, creating `dir` if needed.
pub fn emit_report(tables: &[ReportTable], dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
    if tables.is_empty() {
        return Err(AnalysisError::EmptyResults);
    }
    fs::create_dir_all(dir).map_err(|e| AnalysisError::Io { path: dir.to_path_buf(), source: e })?;
    let mut written = Vec::with_capacity(tables.len());
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        fs::write(&path, t.to_csv()?).map_err(|e| AnalysisError::Io { path: path.clone(), source: e })?;
        written.push(path);
    }
    Ok(written)
}

/// `slot,vpki_count,selfcert_count` for every slot of a run.
pub fn anonymity_table(name: impl Into<String>, log: &ObservationLog) -> ReportTable {
    let mut t = ReportTable::new(name, &["slot", "vpki_count", "selfcert_count"]);
    for slot in 0..log.slots.len() {
        let (v, s) = anonymity_sets(log, slot).expect("slot in range");
        t.push(vec![slot.into(), v.into(), s.into()]);
    }
    t
}

/// `K,analytic,empirical,stderr` for the averaged VPKI linking probability.
pub fn k_sweep_table(
    name: impl Into<String>,
    n: u64,
    r: f64,
    ks: &[u64],
    rounds: u64,
    seed: u64,
) -> Result<ReportTable, AnalysisError> {
    let mut t = ReportTable::new(name, &["K", "analytic", "empirical", "stderr"]);
    for (i, &k) in ks.iter().enumerate() {
        let analytic = analytic_link_avg_with_k(n, r, k)?;
        let params = AnalyticalParams::new(n, 0, r, k)?;
        let e = empirical_link_probability(params, LinkKind::AvgWithK, rounds, crate::seed::derive(seed, crate::seed::Stream::MonteCarlo, i as u64))?;
        t.push(vec![k.into(), analytic.into(), e.estimate.into(), e.std_error.into()]);
    }
    Ok(t)
}

/// Linking probabilities against the number of exhausted vehicles `M`:
/// the baseline singleton set, a vehicle that must self-certify, and a
/// vehicle that opts in.
pub fn m_sweep_table(
    name: impl Into<String>,
    n: u64,
    r: f64,
    ms: &[u64],
    rounds: u64,
    seed: u64,
) -> Result<ReportTable, AnalysisError> {
    let mut t = ReportTable::new(
        name,
        &[
            "M",
            "baseline_self",
            "baseline_vpki",
            "rhythm_self",
            "rhythm_self_empirical",
            "rhythm_self_stderr",
            "rhythm_opt_in",
            "rhythm_opt_in_empirical",
            "rhythm_opt_in_stderr",
        ],
    );
    for (i, &m) in ms.iter().enumerate() {
        if m == 0 {
            return Err(AnalysisError::InvalidParams("M sweep values must be >= 1".into()));
        }
        let params = AnalyticalParams::new(n, m, r, 0)?;
        let sub = |j: u64| crate::seed::derive(seed, crate::seed::Stream::MonteCarlo, 2 * i as u64 + j);
        let own: LinkingEstimate = empirical_link_probability(params, LinkKind::SelfToSelf, rounds, sub(0))?;
        let opt: LinkingEstimate = empirical_link_probability(params, LinkKind::VpkiToSelf, rounds, sub(1))?;
        t.push(vec![
            m.into(),
            (1.0 / m as f64).into(),
            (1.0 / n as f64).into(),
            analytic_link_self_to_self(n, m, r)?.into(),
            own.estimate.into(),
            own.std_error.into(),
            analytic_link_vpki_to_self(n, m, r)?.into(),
            opt.estimate.into(),
            opt.std_error.into(),
        ]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_formatting() {
        assert_eq!(fmt_g9(0.01), "0.01");
        assert_eq!(fmt_g9(1.0 / 21.0), "0.0476190476");
        assert_eq!(fmt_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_g9(100.0), "100");
        assert_eq!(fmt_g9(123456789.0), "123456789");
        assert_eq!(fmt_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_g9(0.0001), "0.0001");
        assert_eq!(fmt_g9(0.00001234), "1.234e-05");
        assert_eq!(fmt_g9(-2.5), "-2.5");
        assert_eq!(fmt_g9(0.0), "0");
        assert_eq!(fmt_g9(0.9999999999), "1");
    }

    #[test]
    fn empty_results_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(&[], dir.path()), Err(AnalysisError::EmptyResults)));
    }

    #[test]
    fn writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ReportTable::new("sets", &["slot", "vpki_count", "selfcert_count"]);
        t.push(vec![0usize.into(), 99usize.into(), 1usize.into()]);
        let paths = emit_report(&[t], dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(text, "slot,vpki_count,selfcert_count\n0,99,1\n");
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("file");
        std::fs::write(&file, b"x").unwrap();
        let t = ReportTable::new("a", &["x"]);
        assert!(matches!(emit_report(&[t], &file.join("sub")), Err(AnalysisError::Io { .. })));
    }
}
