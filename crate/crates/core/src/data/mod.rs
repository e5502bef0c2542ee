//! Ground-truth generators, training-data draws, MNIST ingestion and the
//! dataset file formats.

pub mod formats;
pub mod idx;
pub mod mnist;
pub mod synth;

pub use formats::{read_bmat, read_dataset, read_text_dataset, write_bmat, write_text_dataset, TruthFile};
pub use idx::{parse_idx1, parse_idx3, serialize_idx1, serialize_idx3, IdxImages};
pub use mnist::{mnist_ingest, preprocess_image, MnistData, PixelReport, PATCH_COLS, PATCH_ROWS};
pub use synth::{draw_training_data, gen_block, gen_lattice, DrawInfo, GroundTruth, TrainingData};
