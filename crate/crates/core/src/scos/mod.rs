//! One-shot supernet for band selection.
//!
//! A patch is flattened to `HW x N` and handled in the transposed `N x HW`
//! orientation so that band selection indexes rows. Each band row passes
//! through a spatial affine layer and a position embedding (sinusoidal,
//! learned, or learned spatial plus per-band), the rows named by a band
//! combination are kept, and a small head produces class logits or a
//! reconstructed spectrum. Training draws a uniformly random combination
//! every step, so afterwards any combination can be scored by inference.

mod model;
mod patch;
mod train;

pub use model::{
    encode, forward, loss_and_grad, loss_value, select_encoded, Affine, Head, Loss, ModelShape, PeKind, SupernetParams,
};
pub use patch::{ape_embedding, transform_patch, Sample, ScosData, TransformedPatch};
pub use train::{
    check_compatible, evaluate_bc, evaluate_metrics, finetune, gd_step, grad_check, load_params, log_csv, save_params,
    scos_search, train_one_shot, FinetuneConfig, LogEntry, ScosTrainConfig, StepRule, SupernetEvaluator, Trained,
};
