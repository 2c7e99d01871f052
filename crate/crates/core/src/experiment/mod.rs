//! Experiment grids, artifact files and self-checks behind the command line.

mod check;
mod config;
mod run;

pub use check::{
    convexity_pairs, harvest_cuts, random_beamformer, run_check, CheckOptions, CheckReport, HarvestedCut, Suite,
};
pub use config::{
    load_config, parse_config, AlgorithmKind, AlgorithmSection, AlmSection, DistributedSection, ExperimentConfig,
    NetworkSection, OneOrMany, ReportSection, RunSection, SolverSection, UncertaintySection, WmmseSection,
};
pub use run::{
    aggregate, cmd_dump_channels, cmd_run, cmd_sweep_snr, plot_csv, realization_seed, summary_csv, RunOutcome,
    SummaryRow, PLOT_HEADER, SUMMARY_HEADER,
};
