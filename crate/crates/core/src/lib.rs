//! Joint AP mode assignment and power control for virtually full-duplex
//! cell-free massive MIMO.
//!
//! Half-duplex APs are split into DL and UL groups so a single band carries
//! DL and UL traffic at once. The optimizer relaxes the binary modes with
//! concave penalties and solves a sequence of convex (second-order cone)
//! subproblems until the penalized sum SE stalls, then rounds the modes and
//! polishes the powers.
//!
//! Module map:
//! - [`network`]: deployments, path loss, correlated shadowing, MMSE statistics
//! - [`se`]: closed-form SEs and the half-duplex variants
//! - [`moments`]: Monte Carlo check of the moments behind the closed forms
//! - [`sca`]: penalties, surrogates, subproblem assembly and the SCA loops
//! - [`baselines`]: random-mode vFD and half-duplex comparison schemes
//! - [`harness`]: seeded experiments, percentiles and CSV/JSON export

pub mod baselines;
pub mod config;
pub mod error;
pub mod exec;
pub mod harness;
pub mod moments;
pub mod network;
pub mod sca;
pub mod scenario;
pub mod se;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use exec::Execution;
pub use scenario::Scenario;
