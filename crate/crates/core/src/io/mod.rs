//! On-disk formats: DIPE probability tensors, RLE masks, and the manifest.

mod dataset;
mod manifest;
mod rle;
mod tensor;
mod tensor_file;

pub use dataset::Dataset;
pub use manifest::{
    load_manifest, prediction_path, validate_manifest, write_manifest, Manifest, ManifestFile,
    ModelEntry, ModelRecord, SliceEntry, SliceRecord, DEFAULT_TRUTH_CSV,
};
pub use rle::{decode_rle, encode_rle, read_rle_csv, write_rle_csv, RleRow, RleTable};
pub use tensor::{Dims, MaskSet, Plane, ProbabilityMap, SliceId};
pub use tensor_file::{
    decode_probability_map, encode_probability_map, read_dims, read_probability_map,
    write_probability_map, FORMAT_VERSION, HEADER_LEN, MAGIC,
};

pub(crate) use rle::encode_bits;
