//! Selection-based question answering toolkit: corpus construction and
//! retrieval-based filtering, four neural/feature-based sentence rankers,
//! and the full evaluation protocol (MAP/MRR, question-level triggering F1,
//! per-facet breakdowns).

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod retrieval;
pub mod synth;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
