use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mobility::{RandomWaypoint, Track};
use crate::credentials::{SimTime, TimeGrid};
use crate::crypto::{CryptoProfile, ProviderKind};
use crate::protocol::{Position, ProtocolConfig};
use crate::vpki::{ReachabilityConfig, VpkiLatency};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse scenario {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Hybrid scheme with randomized opt-in.
    #[default]
    Rhythm,
    /// Exhausted vehicles self-certify alone; nobody else ever switches.
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum MobilityConfig {
    RandomWaypoint(RandomWaypoint),
    /// `vehicle_id,t,x,y` CSV; relative paths resolve against the scenario
    /// file's directory.
    Trace { path: PathBuf },
    /// Parked vehicles, one `[x, y]` per vehicle.
    Static { positions: Vec<[f64; 2]> },
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig::RandomWaypoint(RandomWaypoint::default())
    }
}

impl MobilityConfig {
    pub fn stationary_tracks(positions: &[[f64; 2]]) -> Vec<Track> {
        positions.iter().map(|[x, y]| Track::new(vec![(0.0, Position::new(*x, *y))])).collect()
    }
}

/// Which vehicles start with an empty VPKI pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustedSpec {
    /// Those that cannot reach the VPKI at time 0.
    #[default]
    Unreachable,
    None,
    /// Exactly ⌈p · population⌉ vehicles chosen by seed.
    Fraction(f64),
    Vehicles(Vec<u32>),
}

/// Pool preloaded into every non-exhausted vehicle at bootstrap.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preload {
    /// The first Γ window.
    #[default]
    Gamma,
    /// Every slot of the run plus the exhaustion look-ahead past its end.
    Run,
    Slots(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Revocation {
    pub vehicle: u32,
    pub at_s: f64,
}

/// Full configuration of one simulation run. Every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub population: usize,
    pub duration_s: f64,
    pub gamma_s: f64,
    pub tau_p_s: f64,
    pub r: f64,
    pub scheme: Scheme,
    pub beacon_hz: f64,
    pub range_m: f64,
    pub mobility: MobilityConfig,
    /// Neighbor graphs are recomputed at this period.
    pub mobility_step_s: f64,
    pub reachability: ReachabilityConfig,
    pub exhausted: ExhaustedSpec,
    pub preload: Preload,
    /// Pseudonyms per VPKI request or initiation; Γ/τ_P when absent.
    pub batch_size: Option<usize>,
    /// Look-ahead past the current slot when testing for exhaustion; τ_P
    /// when absent.
    pub exhaustion_horizon_s: Option<f64>,
    pub crypto: ProviderKind,
    pub crypto_profile: CryptoProfile,
    pub vpki_latency: VpkiLatency,
    /// Virtual time charged for confirming VPKI reachability, once per slot.
    pub probe_timeout_ms: u64,
    pub loss_probability: f64,
    pub protocol: ProtocolConfig,
    /// Number of vehicles (chosen by seed among the non-exhausted) that never
    /// join.
    pub never_join: usize,
    pub clogging_attackers: Vec<u32>,
    pub revocations: Vec<Revocation>,
    /// Vehicles that start without grid knowledge and must infer it from a
    /// neighbor's CAM.
    pub stale_grid_vehicles: Vec<u32>,
    /// Record every sent CAM in the run trace.
    pub trace_cams: bool,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            population: 100,
            duration_s: 1800.0,
            gamma_s: 600.0,
            tau_p_s: 60.0,
            r: 0.5,
            scheme: Scheme::Rhythm,
            beacon_hz: 10.0,
            range_m: 300.0,
            mobility: MobilityConfig::default(),
            mobility_step_s: 1.0,
            reachability: ReachabilityConfig::AlwaysOn,
            exhausted: ExhaustedSpec::Unreachable,
            preload: Preload::Gamma,
            batch_size: None,
            exhaustion_horizon_s: None,
            crypto: ProviderKind::Mock,
            crypto_profile: CryptoProfile::default(),
            vpki_latency: VpkiLatency::default(),
            probe_timeout_ms: 100,
            loss_probability: 0.0,
            protocol: ProtocolConfig::default(),
            never_join: 0,
            clogging_attackers: Vec::new(),
            revocations: Vec::new(),
            stale_grid_vehicles: Vec::new(),
            trace_cams: false,
            seed: 1,
        }
    }
}

fn check(issues: &mut Vec<String>, ok: bool, msg: String) {
    if !ok {
        issues.push(msg);
    }
}

fn whole_ms(s: f64) -> Option<u64> {
    let ms = s * 1000.0;
    (s.is_finite() && s > 0.0 && (ms - ms.round()).abs() < 1e-6).then(|| ms.round() as u64)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and validates a scenario file; a relative trace path is
    /// rewritten against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_owned(), source })?;
        let mut sc = Self::from_json(&text).map_err(|source| ScenarioError::Parse { path: path.to_owned(), source })?;
        if let Some(dir) = path.parent() {
            sc.resolve_paths(dir);
        }
        sc.validate()?;
        Ok(sc)
    }

    /// Makes a relative mobility trace path relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        if let MobilityConfig::Trace { path } = &mut self.mobility {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut issues = Vec::new();
        check(&mut issues, self.population > 0, "population must be > 0".into());
        check(&mut issues, self.duration_s.is_finite() && self.duration_s > 0.0, format!("duration_s must be > 0, got {}", self.duration_s));
        let gamma = whole_ms(self.gamma_s);
        let tau = whole_ms(self.tau_p_s);
        check(&mut issues, gamma.is_some(), format!("gamma_s must be a positive whole number of ms, got {}", self.gamma_s));
        check(&mut issues, tau.is_some(), format!("tau_p_s must be a positive whole number of ms, got {}", self.tau_p_s));
        if let (Some(g), Some(t)) = (gamma, tau) {
            check(&mut issues, g % t == 0, format!("gamma_s ({}) must be an integer multiple of tau_p_s ({})", self.gamma_s, self.tau_p_s));
        }
        check(&mut issues, (0.0..=1.0).contains(&self.r), format!("r must be in [0,1], got {}", self.r));
        check(&mut issues, 
            self.beacon_hz.is_finite() && self.beacon_hz > 0.0 && self.beacon_hz <= 1000.0,
            format!("beacon_hz must be in (0, 1000], got {}", self.beacon_hz),
        );
        check(&mut issues, self.range_m.is_finite() && self.range_m > 0.0, format!("range_m must be > 0, got {}", self.range_m));
        check(&mut issues, 
            self.mobility_step_s.is_finite() && self.mobility_step_s >= 0.001,
            format!("mobility_step_s must be >= 0.001, got {}", self.mobility_step_s),
        );
        match &self.mobility {
            MobilityConfig::RandomWaypoint(p) => {
                if let Err(e) = p.validate() {
                    issues.push(e.to_string());
                }
            }
            MobilityConfig::Trace { .. } => {}
            MobilityConfig::Static { positions } => {
                check(&mut issues, 
                    positions.len() == self.population,
                    format!("static mobility lists {} positions for population {}", positions.len(), self.population),
                );
                check(&mut issues, positions.iter().flatten().all(|v| v.is_finite()), "static positions must be finite".into());
            }
        }
        if let Err(e) = self.reachability.validate() {
            issues.push(e);
        }
        match &self.exhausted {
            ExhaustedSpec::Fraction(p) => check(&mut issues, (0.0..=1.0).contains(p), format!("exhausted fraction must be in [0,1], got {p}")),
            ExhaustedSpec::Vehicles(vs) => self.check_ids(vs, "exhausted", &mut issues),
            _ => {}
        }
        if let Preload::Slots(0) = self.preload {
            issues.push("preload slots must be > 0".into());
        }
        check(&mut issues, self.batch_size != Some(0), "batch_size must be > 0".into());
        if let Some(h) = self.exhaustion_horizon_s {
            check(&mut issues, h.is_finite() && h >= 0.0, format!("exhaustion_horizon_s must be >= 0, got {h}"));
        }
        if let Err(e) = self.crypto_profile.validate() {
            issues.push(e);
        }
        let lat = self.vpki_latency;
        check(&mut issues, 
            [lat.base_rtt_ms, lat.per_pseudonym_ms].iter().all(|v| v.is_finite() && *v >= 0.0),
            "vpki latencies must be finite and >= 0".into(),
        );
        check(&mut issues, 
            (0.0..=1.0).contains(&self.loss_probability),
            format!("loss_probability must be in [0,1], got {}", self.loss_probability),
        );
        check(&mut issues, self.never_join <= self.population, "never_join exceeds population".into());
        self.check_ids(&self.clogging_attackers, "clogging_attackers", &mut issues);
        self.check_ids(&self.stale_grid_vehicles, "stale_grid_vehicles", &mut issues);
        let revoked: Vec<u32> = self.revocations.iter().map(|r| r.vehicle).collect();
        self.check_ids(&revoked, "revocations", &mut issues);
        for r in &self.revocations {
            if !(r.at_s.is_finite() && r.at_s >= 0.0) {
                issues.push(format!("revocation time {} is invalid", r.at_s));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(issues))
        }
    }

    fn check_ids(&self, ids: &[u32], what: &str, issues: &mut Vec<String>) {
        for id in ids {
            if *id as usize >= self.population {
                issues.push(format!("{what}: vehicle {id} is out of range for population {}", self.population));
            }
        }
    }

    /// Panics on an unvalidated scenario.
    pub fn grid(&self) -> TimeGrid {
        let g = whole_ms(self.gamma_s).expect("validated gamma");
        let t = whole_ms(self.tau_p_s).expect("validated tau_p");
        TimeGrid::new(g, t, SimTime::ZERO).expect("validated grid")
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }

    /// Number of (possibly partial) pseudonym slots in the run.
    pub fn slots(&self) -> usize {
        let tau = self.grid().tau_p_ms();
        self.duration().0.div_ceil(tau) as usize
    }

    pub fn beacon_interval_ms(&self) -> u64 {
        ((1000.0 / self.beacon_hz).round() as u64).max(1)
    }

    pub fn batch(&self) -> usize {
        self.batch_size.unwrap_or_else(|| self.grid().slots_per_gamma())
    }

    pub fn horizon_ms(&self) -> u64 {
        self.exhaustion_horizon_s
            .map_or_else(|| self.grid().tau_p_ms(), |h| SimTime::from_secs_f64(h).0)
    }

    pub fn preload_slots(&self) -> usize {
        match self.preload {
            Preload::Gamma => self.grid().slots_per_gamma(),
            Preload::Run => {
                let tau = self.grid().tau_p_ms();
                self.slots() + 1 + self.horizon_ms().div_ceil(tau) as usize
            }
            Preload::Slots(n) => n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let sc = Scenario::default();
        sc.validate().unwrap();
        assert_eq!(sc.slots(), 30);
        assert_eq!(sc.batch(), 10);
        assert_eq!(sc.horizon_ms(), 60_000);
        assert_eq!(sc.beacon_interval_ms(), 100);
    }

    #[test]
    fn empty_json_is_the_default() {
        assert_eq!(Scenario::from_json("{}").unwrap(), Scenario::default());
    }

    #[test]
    fn json_forms() {
        let sc = Scenario::from_json(
            r#"{
                "population": 3,
                "mobility": {"source": "static", "positions": [[0,0],[1,0],[2,0]]},
                "reachability": {"mode": "disconnected_fraction", "p": 0.01},
                "exhausted": {"fraction": 0.5},
                "preload": "run",
                "protocol": {"max_hops": 2}
            }"#,
        )
        .unwrap();
        sc.validate().unwrap();
        assert_eq!(sc.exhausted, ExhaustedSpec::Fraction(0.5));
        // 30 slots of the run, one past the end, one for the look-ahead.
        assert_eq!(sc.preload_slots(), 32);
        assert_eq!(sc.protocol.max_hops, Some(2));
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc);
        assert!(Scenario::from_json(r#"{"populaton": 3}"#).is_err());
    }

    #[test]
    fn validation_enumerates_every_issue() {
        let sc = Scenario { population: 0, gamma_s: 610.0, r: 1.5, ..Default::default() };
        let ScenarioError::Invalid(issues) = sc.validate().unwrap_err() else { panic!() };
        assert_eq!(issues.len(), 3, "{issues:?}");
        let bad_ids = Scenario { population: 2, clogging_attackers: vec![5], ..Default::default() };
        assert!(bad_ids.validate().is_err());
        let fractional = Scenario { tau_p_s: 0.0001, ..Default::default() };
        assert!(fractional.validate().is_err());
    }
}
