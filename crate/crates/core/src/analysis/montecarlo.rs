//! Monte Carlo oracle for the closed-form linking probabilities.
//!
//! Each round draws the flavor of every vehicle at two consecutive updates.
//! The observer knows the target's flavor at the first update and guesses
//! uniformly among the vehicles holding the flavor it expects at the second.
//! Rounds are pooled: the estimate is the fraction of all candidate guesses
//! across rounds that hit the target, which is the ratio of the expected
//! number of true links to the expected candidate-set size.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::formulas::{AnalyticalParams, LinkKind};
use super::AnalysisError;
use crate::seed::{self, Stream};

const CHUNK_ROUNDS: u64 = 4096;

/// Pooled success frequency of a uniform-guess observer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkingEstimate {
    pub estimate: f64,
    pub hits: u64,
    /// Number of candidate guesses pooled into the estimate.
    pub trials: u64,
    pub std_error: f64,
}

impl LinkingEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Option<Self> {
        if trials == 0 {
            return None;
        }
        let p = hits as f64 / trials as f64;
        Some(Self { estimate: p, hits, trials, std_error: (p * (1.0 - p) / trials as f64).sqrt() })
    }

    /// `|estimate - value| <= sigmas * std_error`.
    pub fn agrees_with(&self, value: f64, sigmas: f64) -> bool {
        (self.estimate - value).abs() <= sigmas * self.std_error
    }
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0,1)").sample(rng)
}

/// One round: `(true links, candidate guesses)`.
fn round(kind: LinkKind, p: &AnalyticalParams, rng: &mut ChaCha8Rng) -> (u64, u64) {
    let AnalyticalParams { n, m, r, k } = *p;
    match kind {
        LinkKind::Baseline => (1, n),
        LinkKind::VpkiToVpki => {
            let stay = u64::from(rng.gen::<f64>() >= r);
            (stay, stay + binomial(rng, n - 1, 1.0 - r))
        }
        LinkKind::VpkiToSelf => {
            let switch = u64::from(rng.gen::<f64>() < r);
            (switch, m + switch + binomial(rng, n - 1, r))
        }
        LinkKind::SelfToSelf => (1, m + binomial(rng, n, r)),
        LinkKind::AvgWithK => {
            let participants = n - k;
            let first = binomial(rng, participants, 1.0 - r);
            let kept = binomial(rng, first, 1.0 - r);
            let joined = binomial(rng, participants - first, 1.0 - r);
            let before = k + first;
            let after = k + kept + joined;
            (k + kept, before * after)
        }
    }
}

fn check(kind: LinkKind, p: &AnalyticalParams) -> Result<(), AnalysisError> {
    p.validate()?;
    let bad = |msg: &str| Err(AnalysisError::InvalidParams(format!("{kind}: {msg}")));
    match kind {
        LinkKind::Baseline | LinkKind::VpkiToVpki | LinkKind::VpkiToSelf | LinkKind::AvgWithK if p.n == 0 => {
            bad("needs N >= 1")
        }
        LinkKind::SelfToSelf if p.m == 0 => bad("needs M >= 1 to have a target"),
        _ => Ok(()),
    }
}

/// Runs `rounds` independent update pairs, split into fixed chunks with
/// derived seeds so the result does not depend on thread scheduling.
pub fn empirical_link_probability(
    params: AnalyticalParams,
    kind: LinkKind,
    rounds: u64,
    seed: u64,
) -> Result<LinkingEstimate, AnalysisError> {
    if rounds == 0 {
        return Err(AnalysisError::InvalidParams("trials must be >= 1".into()));
    }
    check(kind, &params)?;
    let chunks = rounds.div_ceil(CHUNK_ROUNDS);
    let (hits, trials) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::rng(seed, Stream::MonteCarlo, c);
            let len = CHUNK_ROUNDS.min(rounds - c * CHUNK_ROUNDS);
            (0..len).fold((0u64, 0u64), |(h, t), _| {
                let (dh, dt) = round(kind, &params, &mut rng);
                (h + dh, t + dt)
            })
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    LinkingEstimate::from_counts(hits, trials)
        .ok_or_else(|| AnalysisError::NoCandidates(format!("{kind}: no candidate in {rounds} rounds")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_is_exact() {
        let p = AnalyticalParams::new(100, 0, 0.0, 0).unwrap();
        let e = empirical_link_probability(p, LinkKind::Baseline, 1000, 1).unwrap();
        assert_eq!(e.estimate, 0.01);
        assert_eq!(e.trials, 100_000);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = AnalyticalParams::new(10, 1, 0.3, 0).unwrap();
        let a = empirical_link_probability(p, LinkKind::VpkiToSelf, 20_000, 9).unwrap();
        let b = empirical_link_probability(p, LinkKind::VpkiToSelf, 20_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_input() {
        let p = AnalyticalParams::new(10, 0, 0.3, 0).unwrap();
        assert!(empirical_link_probability(p, LinkKind::VpkiToVpki, 0, 1).is_err());
        assert!(empirical_link_probability(p, LinkKind::SelfToSelf, 10, 1).is_err());
    }

    #[test]
    fn singleton_self_set_links_with_certainty() {
        let p = AnalyticalParams::new(100, 1, 0.0, 0).unwrap();
        let e = empirical_link_probability(p, LinkKind::SelfToSelf, 100, 1).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.std_error, 0.0);
    }
}
