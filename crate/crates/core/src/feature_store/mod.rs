//! Feature matrices, the FTRX file format, CSV import and checkpoint manifests.

mod ftrx;
mod import;
mod manifest;
mod matrix;

pub use ftrx::{
    decode_ftrx, encode_ftrx, read_ftrx, read_ftrx_header, write_ftrx, FtrxHeader, HEADER_LEN,
    MAGIC, VERSION,
};
pub use import::{import_csv, import_csv_reader, CsvImport};
pub use manifest::{load_manifest, CheckpointRecord, Manifest};
pub use matrix::FeatureMatrix;
