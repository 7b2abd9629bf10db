//! Training with early stopping, multi-split evaluation, two-stage grid
//! search, ablation studies and result files.

mod evaluate;
mod params_file;
mod report;
mod search;
mod studies;
mod train;

pub use evaluate::{
    evaluate, mean_std, run_indexed, split_seed, Evaluation, ExperimentResult, SplitResult,
};
pub use params_file::ParamsFile;
pub use report::{write_summary_csv, write_timings_csv, RunReport, SummaryRow};
pub use search::{
    grid_search, two_stage_search, CandidateScore, SearchOutcome, SearchSpace, TwoStageOutcome,
};
pub use studies::{
    duplication_study, parameter_sweep, random_binary_block, take_columns, useful_feature_columns,
    DuplicationPoint, SweepPoint,
};
pub use train::{
    accuracy, predict, required_hops, train_on_input, train_once, EpochRecord, PreparedGraph,
    TrainConfig, TrainOutcome,
};
