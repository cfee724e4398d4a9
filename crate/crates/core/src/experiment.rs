//! Experiment files: a simulation (optionally paired with a baseline run)
//! or an analytic sweep, each producing CSV tables and a text summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    anonymity_table, empirical_link_from_log, k_sweep_table, m_sweep_table, AnalysisError, LogLinking, Observer,
    ReportTable,
};
use crate::credentials::Flavor;
use crate::sim::{run, ExhaustedSpec, RunError, RunOutput, Scenario, ScenarioError, Scheme, VehicleClass};
use crate::vpki::ReachabilityConfig;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum Experiment {
    Simulation(SimulationExperiment),
    MSweep(MSweep),
    KSweep(KSweep),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationExperiment {
    pub name: String,
    /// Also run the same scenario with the baseline scheme.
    pub compare_baseline: bool,
    pub observer: Observer,
    /// Leading slots left out of the summary statistics.
    pub settle_slots: usize,
    pub scenario: Scenario,
}

impl Default for SimulationExperiment {
    fn default() -> Self {
        Self {
            name: "simulation".into(),
            compare_baseline: false,
            observer: Observer::default(),
            settle_slots: 0,
            scenario: Scenario::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MSweep {
    pub name: String,
    pub n: u64,
    pub r: f64,
    pub m_values: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for MSweep {
    fn default() -> Self {
        Self { name: "m_sweep".into(), n: 100, r: 0.2, m_values: (1..=20).collect(), trials: 100_000, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KSweep {
    pub name: String,
    pub n: u64,
    pub r: f64,
    /// `0..=n` when absent.
    pub k_values: Option<Vec<u64>>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for KSweep {
    fn default() -> Self {
        Self { name: "k_sweep".into(), n: 100, r: 0.5, k_values: None, trials: 100_000, seed: 1 }
    }
}

/// Command-line overrides applied on top of an experiment file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub r: Option<f64>,
    /// Fraction of exhausted vehicles, and of VPKI-disconnected vehicles
    /// when the scenario uses that reachability mode.
    pub p: Option<f64>,
    pub tau_p_s: Option<f64>,
    pub gamma_s: Option<f64>,
    pub trials: Option<u64>,
}

/// One simulation run with the observer applied.
#[derive(Clone, Debug)]
pub struct LabeledRun {
    pub label: String,
    pub output: RunOutput,
    pub linking: LogLinking,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<ReportTable>,
    pub runs: Vec<LabeledRun>,
    pub summary: Vec<String>,
}

impl Experiment {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads an experiment file; relative trace paths resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io { path: path.display().to_string(), source: e })?;
        let mut exp = Self::from_json(&text)
            .map_err(|e| ExperimentError::Parse { path: path.display().to_string(), source: e })?;
        if let Experiment::Simulation(s) = &mut exp {
            if let Some(dir) = path.parent() {
                s.scenario.resolve_paths(dir);
            }
        }
        Ok(exp)
    }

    pub fn name(&self) -> &str {
        match self {
            Experiment::Simulation(s) => &s.name,
            Experiment::MSweep(s) => &s.name,
            Experiment::KSweep(s) => &s.name,
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        match self {
            Experiment::Simulation(s) => {
                let sc = &mut s.scenario;
                if let Some(v) = o.seed {
                    sc.seed = v;
                }
                if let Some(v) = o.r {
                    sc.r = v;
                }
                if let Some(v) = o.p {
                    sc.exhausted = ExhaustedSpec::Fraction(v);
                    if let ReachabilityConfig::DisconnectedFraction { p, .. } = &mut sc.reachability {
                        *p = v;
                    }
                }
                if let Some(v) = o.tau_p_s {
                    sc.tau_p_s = v;
                }
                if let Some(v) = o.gamma_s {
                    sc.gamma_s = v;
                }
            }
            Experiment::MSweep(s) => {
                s.seed = o.seed.unwrap_or(s.seed);
                s.r = o.r.unwrap_or(s.r);
                s.trials = o.trials.unwrap_or(s.trials);
            }
            Experiment::KSweep(s) => {
                s.seed = o.seed.unwrap_or(s.seed);
                s.r = o.r.unwrap_or(s.r);
                s.trials = o.trials.unwrap_or(s.trials);
            }
        }
    }

    /// Every problem with the experiment, before anything runs.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        match self {
            Experiment::Simulation(s) => Ok(s.scenario.validate()?),
            Experiment::MSweep(s) => {
                if s.m_values.is_empty() || s.trials == 0 {
                    return Err(ExperimentError::Invalid("m_sweep needs m_values and trials >= 1".into()));
                }
                Ok(())
            }
            Experiment::KSweep(s) => {
                if s.trials == 0 {
                    return Err(ExperimentError::Invalid("k_sweep needs trials >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn run(&self) -> Result<ExperimentOutput, ExperimentError> {
        self.validate()?;
        match self {
            Experiment::Simulation(s) => run_simulation(s),
            Experiment::MSweep(s) => {
                let table = m_sweep_table(&s.name, s.n, s.r, &s.m_values, s.trials, s.seed)?;
                let summary = vec![format!("m_sweep N={} r={} points={} trials={}", s.n, s.r, s.m_values.len(), s.trials)];
                Ok(ExperimentOutput { tables: vec![table], runs: Vec::new(), summary })
            }
            Experiment::KSweep(s) => {
                let ks = s.k_values.clone().unwrap_or_else(|| (0..=s.n).collect());
                let table = k_sweep_table(&s.name, s.n, s.r, &ks, s.trials, s.seed)?;
                let summary = vec![format!("k_sweep N={} r={} points={} trials={}", s.n, s.r, ks.len(), s.trials)];
                Ok(ExperimentOutput { tables: vec![table], runs: Vec::new(), summary })
            }
        }
    }
}

fn run_simulation(exp: &SimulationExperiment) -> Result<ExperimentOutput, ExperimentError> {
    let mut variants = Vec::new();
    if exp.compare_baseline {
        let mut base = exp.scenario.clone();
        base.scheme = Scheme::Baseline;
        let mut rhythm = exp.scenario.clone();
        rhythm.scheme = Scheme::Rhythm;
        variants.push(("baseline".to_owned(), format!("{}_baseline", exp.name), base));
        variants.push(("rhythm".to_owned(), format!("{}_rhythm", exp.name), rhythm));
    } else {
        let label = match exp.scenario.scheme {
            Scheme::Rhythm => "rhythm",
            Scheme::Baseline => "baseline",
        };
        variants.push((label.to_owned(), exp.name.clone(), exp.scenario.clone()));
    }
    let mut out = ExperimentOutput::default();
    for (label, table, scenario) in variants {
        let output = run(&scenario)?;
        let linking = empirical_link_from_log(&output.log, &exp.observer)?;
        out.tables.push(anonymity_table(table, &output.log));
        out.summary.extend(summarize(&label, &output, &linking, exp.settle_slots));
        out.runs.push(LabeledRun { label, output, linking });
    }
    Ok(out)
}

fn summarize(label: &str, out: &RunOutput, linking: &LogLinking, settle: usize) -> Vec<String> {
    let log = &out.log;
    let slots = &log.slots[settle.min(log.slots.len())..];
    let mut lines = vec![format!(
        "[{label}] vehicles={} slots={} (summary from slot {settle})",
        log.population(),
        log.slots.len()
    )];
    let count = |f: Flavor| -> Vec<usize> {
        slots.iter().map(|s| s.records.iter().filter(|r| r.flavor == Some(f)).count()).collect()
    };
    for (name, counts) in [("vpki", count(Flavor::VpkiProvided)), ("self_certified", count(Flavor::SelfCertified))] {
        if counts.is_empty() {
            continue;
        }
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        lines.push(format!("[{label}] {name} set per slot: mean={mean:.2} min={lo} max={hi}"));
    }
    for (class, e) in linking.by_class(settle) {
        let members = log.classes.iter().filter(|c| **c == class).count();
        lines.push(format!(
            "[{label}] linking {} ({members} vehicles): estimate={:.6} stderr={:.6} guesses={}",
            class_name(class),
            e.estimate,
            e.std_error,
            e.trials
        ));
    }
    let s = &out.stats;
    lines.push(format!(
        "[{label}] cams={} flagged={} receptions={} initiations={} self_certified_generated={} vpki_requests={}",
        s.cams_sent, s.cams_flagged, s.receptions, s.initiations, s.self_certified_generated, s.vpki_requests
    ));
    lines
}

fn class_name(c: VehicleClass) -> &'static str {
    match c {
        VehicleClass::Exhausted => "exhausted",
        VehicleClass::Participant => "participant",
        VehicleClass::NeverJoin => "never_join",
        VehicleClass::Attacker => "attacker",
    }
}
