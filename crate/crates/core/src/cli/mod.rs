//! Operator entry points behind the `etl` binary: configuration, synthetic
//! data, and one function per subcommand.

pub mod commands;
pub mod config;
pub mod synth;

pub use commands::{
    cmd_analyze, cmd_eval, cmd_prepare, cmd_report, cmd_sweep, cmd_synth, cmd_train, collect_runs,
    dir_fingerprint, expand_grid, load_run, load_run_dataset, parse_grid, read_run, AnalysisKind,
    Comparison, GroupSummary, ReportSummary, RunRecord, SweepRow, TrainOutcome, CHECKPOINT_FILE,
    CONFIG_FILE, LOG_FILE, METRICS_JSON, WALL_CLOCK_KEY,
};
pub use config::{RunConfig, KEYS};
pub use synth::{save_synth, synthesize, SynthData, SynthOptions, SynthTruth, MAX_SYNTH_ATTEMPTS};
