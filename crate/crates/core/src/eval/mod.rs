//! Metrics, checkpoints, run configuration, and the evaluation sweep.

mod checkpoint;
mod config;
mod metrics;
mod report;

pub use checkpoint::{
    load_checkpoint, load_model, save_checkpoint, save_model, Checkpoint, DdpmModel, Model, ModelKind,
    CHECKPOINT_VERSION,
};
pub use config::RunConfig;
pub use metrics::{masked_mse, psnr, PSNR_CAP_DB};
pub use report::{run_eval, EvalReport, EvalRow, EvalSetup, Method, MethodSummary, CSV_HEADER};
