//! Objective, gradients, optimiser and the training loop.

mod backward;
mod fit;
mod gradcheck;
mod loss;
mod optim;
mod sampling;

pub use backward::backward;
pub use fit::{fit, fit_with_state, EpochRecord, TrainLog, Trainer};
pub use gradcheck::{analytic_gradients, frozen_loss, grad_check, grad_check_with, gradcheck_instance, GradCheckReport, REL_ERROR_FLOOR};
pub use loss::{grad_with_weights, lambda_weights, loss_grad_scores, loss_with_weights, rlpo_loss, valid_pair_count, LambdaWeights};
pub use optim::{adamw_step, AdamW, OptimizerState};
pub use sampling::{holdout_split, kfold_split, sample_list_size, subsample_indices, Fold};
