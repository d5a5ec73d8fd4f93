//! Desk-scale numeric engine: shaped arrays, a reverse-mode tape, seeded
//! initializers, RMSProp, finite-difference gradient checking, and the
//! checkpoint container.

mod array;
mod checkpoint;
mod gradcheck;
mod graph;
mod init;
mod optim;

pub use array::{Array, Scalar};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckFailure, GradCheckReport, GRAD_CHECK_H, GRAD_CHECK_TOL};
pub use graph::{Graph, NodeId};
pub use init::{gaussian_matrix, orthogonal_init};
pub use optim::{rmsprop_step, Param, ParamStore, RmspropState};
