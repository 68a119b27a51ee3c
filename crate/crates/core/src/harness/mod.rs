//! Config-driven experiments and report writing.

pub mod config;
pub mod ood;
pub mod output;
pub mod run;

pub use config::{DataSpec, DensitySpec, Experiment, ExperimentConfig, MapSpec, Pipeline};
pub use ood::{ood_flag, OodTest, PushforwardReference};
pub use output::{format_f64, to_json_string, write_json};
pub use run::{
    diagnose, dogbone_config, run_dogbone_study, run_single, run_sweep, DensitySummary, DiagnoseReport,
    InferenceReport, RealizationReport, SweepReport, SweepRow, SweepSummary,
};
