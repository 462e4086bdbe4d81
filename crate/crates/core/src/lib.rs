//! Compressive estimation of the UE→IRS channel in mmWave MIMO-OFDM.
//!
//! The pipeline generates broadband geometric channels ([`channel`]), sounds
//! them through a handful of switched active IRS elements ([`sounding`]),
//! recovers a common-support sparse representation over an oversampled
//! steering dictionary ([`dictionary`], [`recovery`]) and evaluates the
//! result in Monte-Carlo sweeps ([`harness`]).

pub mod channel;
pub mod config;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod recovery;
pub mod sounding;

pub use error::{Error, Result};
