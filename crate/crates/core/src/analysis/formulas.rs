//! Closed-form probabilities that a global passive observer links two
//! successive pseudonyms of the same vehicle.
//!
//! `N` vehicles hold VPKI pseudonyms, `M` have run out and always use
//! self-certified ones, each of the `N` switches to a self-certified
//! pseudonym with probability `r` at every update, and `K` of the `N` never
//! switch.

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Tolerance for the algebraic identities checked at evaluation time.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalParams {
    pub n: u64,
    pub m: u64,
    pub r: f64,
    pub k: u64,
}

impl AnalyticalParams {
    pub fn new(n: u64, m: u64, r: f64, k: u64) -> Result<Self, AnalysisError> {
        let p = Self { n, m, r, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(AnalysisError::InvalidParams(format!("r must be in [0,1], got {}", self.r)));
        }
        if self.k > self.n {
            return Err(AnalysisError::InvalidParams(format!("K ({}) exceeds N ({})", self.k, self.n)));
        }
        Ok(())
    }
}

/// Which pair of pseudonyms the observer tries to link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    /// Two VPKI pseudonyms when nobody ever switches.
    Baseline,
    /// A switching vehicle that kept its VPKI flavor.
    VpkiToVpki,
    /// A switching vehicle that moved to a self-certified pseudonym.
    VpkiToSelf,
    /// A vehicle without VPKI pseudonyms.
    SelfToSelf,
    /// Two VPKI pseudonyms averaged over never-join and switching vehicles.
    AvgWithK,
}

impl LinkKind {
    pub const ALL: [LinkKind; 5] =
        [LinkKind::Baseline, LinkKind::VpkiToVpki, LinkKind::VpkiToSelf, LinkKind::SelfToSelf, LinkKind::AvgWithK];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::Baseline => "baseline",
            LinkKind::VpkiToVpki => "vpki_to_vpki",
            LinkKind::VpkiToSelf => "vpki_to_self",
            LinkKind::SelfToSelf => "self_to_self",
            LinkKind::AvgWithK => "avg_with_k",
        }
    }

    pub fn analytic(self, p: &AnalyticalParams) -> Result<f64, AnalysisError> {
        p.validate()?;
        match self {
            LinkKind::Baseline => analytic_link_baseline(p.n),
            LinkKind::VpkiToVpki => analytic_link_vpki_to_vpki(p.n, p.r),
            LinkKind::VpkiToSelf => analytic_link_vpki_to_self(p.n, p.m, p.r),
            LinkKind::SelfToSelf => analytic_link_self_to_self(p.n, p.m, p.r),
            LinkKind::AvgWithK => analytic_link_avg_with_k(p.n, p.r, p.k),
        }
    }
}

impl std::fmt::Display for LinkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_r(r: f64) -> Result<(), AnalysisError> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(AnalysisError::InvalidParams(format!("r must be in [0,1], got {r}")))
    }
}

fn identity(what: &'static str, lhs: f64, rhs: f64) -> Result<(), AnalysisError> {
    if (lhs - rhs).abs() <= IDENTITY_TOLERANCE {
        Ok(())
    } else {
        Err(AnalysisError::IdentityViolation { what, lhs, rhs })
    }
}

pub fn analytic_link_baseline(n: u64) -> Result<f64, AnalysisError> {
    if n == 0 {
        return Err(AnalysisError::Undefined("baseline linking needs N >= 1".into()));
    }
    Ok(1.0 / n as f64)
}

/// `(1-r) / (N - rN)`, checked against `1/N`.
pub fn analytic_link_vpki_to_vpki(n: u64, r: f64) -> Result<f64, AnalysisError> {
    check_r(r)?;
    if n == 0 {
        return Err(AnalysisError::Undefined("vpki_to_vpki needs N >= 1".into()));
    }
    if r >= 1.0 {
        return Err(AnalysisError::Undefined("vpki_to_vpki is degenerate at r = 1: the VPKI set is empty".into()));
    }
    let n = n as f64;
    let value = (1.0 - r) / (n - r * n);
    identity("(1-r)/(N-rN) = 1/N", value, 1.0 / n)?;
    Ok(value)
}

/// `r / (M + rN)`, checked against `1/(N + M/r)` and, for `M > 0`, strictly
/// below `1/N`.
pub fn analytic_link_vpki_to_self(n: u64, m: u64, r: f64) -> Result<f64, AnalysisError> {
    check_r(r)?;
    if n == 0 {
        return Err(AnalysisError::Undefined("vpki_to_self needs N >= 1".into()));
    }
    if r <= 0.0 {
        return Err(AnalysisError::Undefined("vpki_to_self needs r > 0".into()));
    }
    let (nf, mf) = (n as f64, m as f64);
    let value = r / (mf + r * nf);
    identity("r/(M+rN) = 1/(N+M/r)", value, 1.0 / (nf + mf / r))?;
    if m > 0 && value >= 1.0 / nf {
        return Err(AnalysisError::IdentityViolation { what: "r/(M+rN) < 1/N for M > 0", lhs: value, rhs: 1.0 / nf });
    }
    Ok(value)
}

/// `1 / (M + rN)`: uniform guess within the expected self-certified set.
pub fn analytic_link_self_to_self(n: u64, m: u64, r: f64) -> Result<f64, AnalysisError> {
    check_r(r)?;
    let size = m as f64 + r * n as f64;
    if size <= 0.0 {
        return Err(AnalysisError::Undefined("self_to_self needs M + rN > 0".into()));
    }
    Ok(1.0 / size)
}

/// Decomposition of the averaged VPKI-to-VPKI linking probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFormulaTerms {
    /// Expected size of the VPKI set: `K + (N-K)(1-r)`.
    pub d: f64,
    /// `K / D^2`: contribution of never-join vehicles.
    pub never_join_term: f64,
    /// `(N - r(N-K) - K)(1-r) / D^2`: contribution of switching vehicles.
    pub participant_term: f64,
    /// Linking probability of one never-join vehicle: `1/D`.
    pub never_join_per_vehicle: f64,
    /// Linking probability of one switching vehicle seen with a VPKI
    /// pseudonym: `(1-r)/D`.
    pub participant_per_vehicle: f64,
}

impl KFormulaTerms {
    pub fn total(&self) -> f64 {
        self.never_join_term + self.participant_term
    }
}

pub fn k_formula_terms(n: u64, r: f64, k: u64) -> Result<KFormulaTerms, AnalysisError> {
    check_r(r)?;
    if n == 0 {
        return Err(AnalysisError::Undefined("avg_with_k needs N >= 1".into()));
    }
    if k > n {
        return Err(AnalysisError::InvalidParams(format!("K ({k}) exceeds N ({n})")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let d = kf + (nf - kf) * (1.0 - r);
    if d <= 0.0 {
        return Err(AnalysisError::Undefined("avg_with_k has an empty VPKI set (D = 0)".into()));
    }
    let d2 = d * d;
    Ok(KFormulaTerms {
        d,
        never_join_term: kf / d2,
        participant_term: (nf - r * (nf - kf) - kf) / d2 * (1.0 - r),
        never_join_per_vehicle: 1.0 / d,
        participant_per_vehicle: (1.0 - r) / d,
    })
}

/// Averaged VPKI-to-VPKI linking probability with `K` never-join vehicles.
/// Reduces to `1/N` at `K = 0` and `K = N`; both reductions are checked.
pub fn analytic_link_avg_with_k(n: u64, r: f64, k: u64) -> Result<f64, AnalysisError> {
    let value = k_formula_terms(n, r, k)?.total();
    if k == 0 || k == n {
        identity("avg_with_k reduces to 1/N at K = 0 and K = N", value, 1.0 / n as f64)?;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_values() {
        assert_eq!(analytic_link_baseline(100).unwrap(), 0.01);
        assert_eq!(analytic_link_baseline(1).unwrap(), 1.0);
        assert_eq!(analytic_link_baseline(2).unwrap(), 0.5);
        assert!(analytic_link_baseline(0).is_err());
    }

    #[test]
    fn vpki_to_vpki_identity() {
        assert!((analytic_link_vpki_to_vpki(100, 0.5).unwrap() - 0.01).abs() < 1e-15);
        assert!((analytic_link_vpki_to_vpki(100, 0.2).unwrap() - 0.01).abs() < 1e-15);
        assert!(analytic_link_vpki_to_vpki(100, 1.0).is_err());
    }

    #[test]
    fn vpki_to_self_values() {
        assert!((analytic_link_vpki_to_self(100, 0, 0.5).unwrap() - 0.01).abs() < 1e-15);
        assert!((analytic_link_vpki_to_self(100, 1, 0.2).unwrap() - 1.0 / 105.0).abs() < 1e-15);
        assert!((analytic_link_vpki_to_self(100, 1, 0.2).unwrap() - 0.2 / 21.0).abs() < 1e-15);
        assert!((analytic_link_vpki_to_self(100, 20, 0.5).unwrap() - 1.0 / 140.0).abs() < 1e-15);
        assert!(analytic_link_vpki_to_self(100, 1, 0.0).is_err());
    }

    #[test]
    fn self_to_self_values() {
        assert!((analytic_link_self_to_self(100, 1, 0.2).unwrap() - 1.0 / 21.0).abs() < 1e-15);
        assert!((analytic_link_self_to_self(0, 5, 0.7).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(analytic_link_self_to_self(100, 1, 0.0).unwrap(), 1.0);
        assert!(analytic_link_self_to_self(100, 0, 0.0).is_err());
    }

    #[test]
    fn k_formula_values() {
        assert!((analytic_link_avg_with_k(100, 0.5, 0).unwrap() - 0.01).abs() < 1e-12);
        assert!((analytic_link_avg_with_k(100, 0.5, 100).unwrap() - 0.01).abs() < 1e-12);
        let expected = 50.0 / 75.0f64.powi(2) + 25.0 * 0.5 / 75.0f64.powi(2);
        assert!((analytic_link_avg_with_k(100, 0.5, 50).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.011_111_111_111).abs() < 1e-11);
        assert!(analytic_link_avg_with_k(100, 1.0, 0).is_err());
        assert!(analytic_link_avg_with_k(10, 0.5, 11).is_err());
    }

    #[test]
    fn participants_never_worse_off() {
        for &n in &[2u64, 10, 100] {
            for &r in &[0.1, 0.2, 0.5, 0.9] {
                for k in 1..n {
                    let t = k_formula_terms(n, r, k).unwrap();
                    assert!(t.participant_per_vehicle <= t.never_join_per_vehicle);
                }
            }
        }
    }
}
