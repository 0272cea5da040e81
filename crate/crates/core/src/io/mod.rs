//! File formats: subject CSV, posterior draws, run files and reports.

pub mod config;
pub mod dataset;
pub mod draws;
pub mod metadata;
pub mod report;

pub use config::ConfigFile;
pub use dataset::{parse_dataset_csv, read_dataset, write_dataset, AgeCenter, ParsedDataset, DATASET_COLUMNS};
pub use draws::{parse_draws, read_draws, write_draws};
pub use metadata::{Metadata, VERSION};
pub use report::{
    write_comparison, write_curves, write_decomposition, write_diagnostics, write_incidence, write_summary, OutputDir,
};
