//! RHyTHM: a randomized hybrid pseudonym scheme for vehicular networks.
//!
//! Vehicles that cannot reach the vehicular PKI (VPKI) to refill their
//! pseudonym pool fall back to *self-certified* pseudonyms: freshly generated
//! key pairs whose certificate is a group signature over the public key and a
//! lifetime aligned to the region-wide time grid. To keep those vehicles from
//! standing out, they set a flag in their beacons (CAMs); connected neighbors
//! relay the flag epidemically and, at each pseudonym update, randomly switch
//! to a self-certified pseudonym with probability `r`.
//!
//! The crate is organised bottom-up:
//!
//! - [`credentials`]: the time grid, pseudonym types and the per-vehicle pool.
//! - [`crypto`]: signature and group-signature providers plus the latency
//!   profile used to charge virtual time.
//! - [`vpki`]: in-process LTCA, PCA, GM and RA models, revocation and the
//!   reachability model.
//! - [`protocol`]: the per-vehicle state machine (initiation, CAMs, opt-in,
//!   HSM single-key enforcement, revert at Γ boundaries).
//! - [`sim`]: the deterministic discrete-event engine.
//! - [`analysis`]: closed-form linkability, Monte Carlo oracles, observers
//!   over simulation output and CSV reports.
//! - [`experiment`]: canned experiment configurations tying it all together.

pub mod analysis;
pub mod credentials;
pub mod crypto;
pub mod experiment;
pub mod protocol;
pub mod seed;
pub mod sim;
pub mod vpki;

pub use credentials::{Flavor, SimTime, TimeGrid, Validity};
pub use crypto::{CryptoProfile, CryptoProvider, OperationKind};
pub use sim::{run, Scenario};
