//! Config-driven runs: generate a dataset, train a model, roll it out.

mod config;
mod data;
mod model;

pub use config::{
    AtlasSection, AutoencoderSection, DataConfig, ExperimentConfig, KsDataConfig, NetSection, RolloutSection,
    ScheduleSection, SystemId, PRESET_NAMES,
};
pub use data::{
    generate_data, prepare_output_dir, read_dataset_dir, read_matrix_csv, write_dataset_dir, write_matrix_csv,
    DataBundle, DataManifest, DATA_FORMAT,
};
pub use model::{train_model, ChartSummary, LossHistories, Model, ModelManifest, MODEL_FORMAT};
