//! Budget-constrained adversaries for proper-loss learners.
//!
//! The crate builds concrete adversaries (mixup-to-point, Monge perturbation
//! tables, iterated contractions), measures how much they distort the class
//! marginals (adversarial distortion, weighted MMD, exact optimal transport)
//! and turns those measurements into hardness certificates: lower bounds on
//! the adversarial loss that any learner minimising a proper loss over a
//! given hypothesis class must pay.
//!
//! Module map:
//!
//! * [`losses`]: proper losses defined by their conditional Bayes risk, links,
//!   partial losses and the scalars derived from them.
//! * [`data`]: labelled datasets, empirical class marginals and priors.
//! * [`kernel`]: reproducing kernels and Gram utilities.
//! * [`distortion`]: adversarial distortion, β, hardness bound, certificates.
//! * [`transport`]: exact discrete optimal transport (network simplex).
//! * [`adversaries`]: adversary construction and iteration.
//! * [`learner`]: linear proper-loss learner and the cross-evaluation grid.
//! * [`harness`]: experiment runners, configuration and reports.

// Comparisons are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversaries;
pub mod data;
pub mod digest;
pub mod distortion;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod learner;
pub mod losses;
pub mod transport;

pub use adversaries::{Adversary, AdversaryKind};
pub use data::{EmpiricalMarginal, Label, LabeledDataset, Prior};
pub use distortion::{DefeatCertificate, HypothesisClass, Scorer};
pub use error::{Error, Result};
pub use kernel::Kernel;
pub use learner::{LinearModel, TrainConfig};
pub use losses::{Link, LinkKind, ProperLoss};
pub use transport::{Cost, CostMatrix, Coupling};
