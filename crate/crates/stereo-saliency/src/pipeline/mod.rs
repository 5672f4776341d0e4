//! The end-to-end pipeline: manifests, on-disk stacks, per-video feature
//! extraction, and the train / predict / importance / evaluate /
//! compare-fusion commands the CLI and examples drive.

pub mod commands;
pub mod extract;
pub mod manifest;
pub mod stacks;
pub mod synth;

pub use commands::{
    DEFAULT_FRAMES_PER_VIDEO, DEFAULT_PIXELS_PER_FRAME, EvaluateOutcome, FusionChoice,
    PredictReport, RunContext, RunOptions, TrainOutcome, TrainingLog, cmd_compare_fusion,
    cmd_evaluate, cmd_extract, cmd_importance, cmd_predict, cmd_train, render_metric_table,
};
pub use manifest::{FlowSpec, RunManifest, Split, VideoEntry};
pub use stacks::{STACK_FORMAT_VERSION, StackIndex, StackSource, parse_feature_selection};
pub use synth::write_demo_dataset;
