//! Benchmarking laboratory for bid-response estimation under bid selection
//! bias.
//!
//! The crate generates semi-synthetic loan-pricing data whose ground truth
//! is known ([`synthdata`]), fits seven bid-response estimators behind one
//! contract ([`estimators`]) on top of a small neural-network engine
//! ([`netcore`]), scores them on counterfactual and factual metrics
//! ([`evaluation`]) and runs full bias sweeps ([`experiment`]).

pub mod cli;
pub mod estimators;
pub mod evaluation;
pub mod experiment;
pub mod netcore;
pub mod response;
pub mod rng;
pub mod synthdata;

pub use response::BidResponse;
