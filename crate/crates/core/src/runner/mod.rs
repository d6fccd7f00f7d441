//! Experiment orchestration: the dataset × model × metric matrix, the
//! sample-size sweep, report files and dataset download.

mod config;
mod fetch;
mod matrix;
mod report;

pub use config::{resolve_dataset, BackendChoice, DatasetInfo, DatasetSource, ExperimentConfig, DATASET_NAMES};
pub use fetch::{fetch_census, prepare_census, FetchManifest, FetchOptions, PreparedCensus};
pub use matrix::{run_matrix, run_sample_size, summarize, CellResult, GroupSummary, ResultTable, Skip};
pub use report::{emit_reports, render_reports, RenderedReports, REPORT_FILES};
