//! Dual-head classifier with a Dirichlet evidential auxiliary head.

mod dirichlet;
mod model;
pub mod special;
mod train;

pub use dirichlet::{
    alpha_from_logits, calibrated_softmax, deflate, dirichlet_expected_prob,
    kl_to_uniform_dirichlet, loss_kl, loss_nll, DEFAULT_LOGIT_CLAMP,
};
pub use model::{total_loss, DualHeadParams, Example, LossBreakdown, Objective};
pub use special::{digamma, ln_gamma, trigamma};
pub use train::{fit, labeled_rows, primary_accuracy, train, AuxSupervision, LabeledRow, Trained};
