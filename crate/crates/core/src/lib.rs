//! Multi-omics biomarker discovery.
//!
//! Gene-interaction learning with a graph attention layer, multi-modality
//! variational encoding, elastic-net selection and Storey q-value ranking,
//! plus a synthetic cohort generator and evaluation harness.

pub mod enet;
pub mod error;
pub mod fdr;
pub mod gat;
pub mod graph;
pub mod synth;
pub mod vae;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
