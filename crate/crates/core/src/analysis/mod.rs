//! Linkability of pseudonyms under a global passive observer: closed-form
//! probabilities, a Monte Carlo oracle for each of them, the observer
//! applied to simulation logs, and CSV output.

use std::path::PathBuf;

mod formulas;
mod montecarlo;
mod observer;
mod report;

pub use formulas::{
    analytic_link_avg_with_k, analytic_link_baseline, analytic_link_self_to_self, analytic_link_vpki_to_self,
    analytic_link_vpki_to_vpki, k_formula_terms, AnalyticalParams, KFormulaTerms, LinkKind, IDENTITY_TOLERANCE,
};
pub use montecarlo::{empirical_link_probability, LinkingEstimate};
pub use observer::{anonymity_sets, empirical_link_from_log, LogLinking, Observer, Outcome, PairLinking};
pub use report::{anonymity_table, emit_report, fmt_g9, k_sweep_table, m_sweep_table, Cell, ReportTable};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("identity {what} violated: {lhs} vs {rhs}")]
    IdentityViolation { what: &'static str, lhs: f64, rhs: f64 },
    #[error("{0}")]
    NoCandidates(String),
    #[error("slot {slot} out of range (log has {slots} slots)")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("linking needs at least 2 slots, log has {0}")]
    TooFewSlots(usize),
    #[error("no results to report")]
    EmptyResults,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report: {0}")]
    Report(String),
}

impl AnalysisError {
    fn csv(e: csv::Error) -> Self {
        AnalysisError::Report(e.to_string())
    }
}

/// Sweep grid for the oracle-agreement check: every `(kind, params)` cell
/// on which the closed form is defined.
pub fn sweep_grid() -> Vec<(LinkKind, AnalyticalParams)> {
    let mut cells = Vec::new();
    let push = |cells: &mut Vec<(LinkKind, AnalyticalParams)>, kind, n, m, r, k| {
        let p = AnalyticalParams { n, m, r, k };
        if kind_defined(kind, &p) && !cells.contains(&(kind, p)) {
            cells.push((kind, p));
        }
    };
    for &n in &[2u64, 10, 100] {
        push(&mut cells, LinkKind::Baseline, n, 0, 0.0, 0);
        for &r in &[0.1, 0.2, 0.5, 0.9] {
            push(&mut cells, LinkKind::VpkiToVpki, n, 0, r, 0);
            for &m in &[0u64, 1, 10] {
                push(&mut cells, LinkKind::VpkiToSelf, n, m, r, 0);
                push(&mut cells, LinkKind::SelfToSelf, n, m, r, 0);
            }
            for k in [0, n / 4, n / 2, n] {
                push(&mut cells, LinkKind::AvgWithK, n, 0, r, k);
            }
        }
    }
    cells
}

fn kind_defined(kind: LinkKind, p: &AnalyticalParams) -> bool {
    match kind {
        LinkKind::SelfToSelf => p.m >= 1,
        _ => kind.analytic(p).is_ok(),
    }
}

/// One row of the oracle-agreement check.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub kind: LinkKind,
    pub params: AnalyticalParams,
    pub analytic: f64,
    pub empirical: LinkingEstimate,
    pub sigmas: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.empirical.agrees_with(self.analytic, self.sigmas)
    }

    /// Distance from the closed form in standard errors.
    pub fn z(&self) -> f64 {
        let d = (self.empirical.estimate - self.analytic).abs();
        if self.empirical.std_error > 0.0 {
            d / self.empirical.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compares every grid cell against its Monte Carlo estimate. `analytic`
/// supplies the closed form, so callers can substitute a faulty one.
pub fn check_oracles(
    cells: &[(LinkKind, AnalyticalParams)],
    rounds: u64,
    seed: u64,
    sigmas: f64,
    analytic: impl Fn(LinkKind, &AnalyticalParams) -> Result<f64, AnalysisError>,
) -> Result<Vec<OracleCheck>, AnalysisError> {
    cells
        .iter()
        .enumerate()
        .map(|(i, &(kind, params))| {
            let cell_seed = crate::seed::derive(seed, crate::seed::Stream::MonteCarlo, i as u64);
            Ok(OracleCheck {
                kind,
                params,
                analytic: analytic(kind, &params)?,
                empirical: empirical_link_probability(params, kind, rounds, cell_seed)?,
                sigmas,
            })
        })
        .collect()
}
