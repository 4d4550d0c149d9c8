//! File formats, dataset handling, batch evaluation and the command line for `egoloc-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod wav;

pub use config::{load_config, parse_config};
pub use dataset::{write_task, Dataset, WriteOptions};
pub use error::{IoError, Result};
pub use evaluate::{evaluate_pipeline, localize_dataset, BatchOutput, Evaluation};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavFormat};
