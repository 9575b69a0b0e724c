//! File formats and run configuration.

pub mod config;
pub mod mtx;
pub mod preset;
pub mod snapshot;

pub use config::{TrainOptions, CONFIG_KEYS};
pub use mtx::{read_matrix_market, read_side_info, read_test_set, write_matrix_market};
pub use preset::Preset;
pub use snapshot::{read_snapshot, restore_session, write_snapshot, Snapshot};
