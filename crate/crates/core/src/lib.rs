pub mod apps;
pub mod binary;
pub mod bitstream;
pub mod corpus;
pub mod costmodel;
pub mod crossbar;
pub mod error;
pub mod image;
pub mod imsng;
pub mod metrics;
pub mod ops;
pub mod sng;
pub mod source;
pub mod stob;
pub mod sweep;

pub use bitstream::{estimate_value, scc, BitStream};
pub use error::{Error, Result};
pub use image::GrayImage;
pub use source::{
    derive_seed, Lfsr, RandomBlock, RandomSource, Sobol, SoftwareUniform, SourceSpec, TrngModel, WordMode,
};
