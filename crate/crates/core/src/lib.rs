//! A vehicular (C-V2X) spectrum-sensing workbench.
//!
//! The pipeline runs from microscopic traffic ([`mobility`]) through link
//! generation ([`channel`]) to labelled wideband spectrum snapshots
//! ([`specgen`]). Those snapshots are compressed by a sensing matrix
//! ([`sensing`]) and reconstructed either by classical sparse recovery
//! ([`cs`]) or by a learned compression/reconstruction network
//! ([`reconstructor`]). [`eval`] scores the results with reconstruction and
//! energy-detection metrics.

pub mod channel;
pub mod container;
pub mod cs;
pub mod eval;
pub mod mobility;
pub mod reconstructor;
pub mod rng;
pub mod sensing;
pub mod specgen;

pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/traffic.md")]
    mod traffic {}
    #[doc = include_str!("../../../book/src/links.md")]
    mod links {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
