//! Synthetic data, image corpora, experiment orchestration and file formats.

pub mod experiment;
pub mod images;
pub mod io;
pub mod sim;

pub use experiment::{
    run_experiment, write_outputs, DataSource, ExperimentConfig, ResultRow, ResultTable, Window,
};
pub use images::{ingest_images, Channel};
pub use io::{read_field, write_field};
pub use sim::{simulate_field, ArTerm, SimConfig, TrendSpec};
