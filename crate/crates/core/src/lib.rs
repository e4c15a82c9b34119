//! Label-free video feature learning toolkit.
//!
//! The crate expresses both handcrafted dense-trajectory descriptors
//! (HOG/HOF/MBH) and learned two-stream descriptors (LOP/LOF) as
//! convolution-pooling cascades over rank-4 volumes, learns filter banks
//! with PCA whitening and independent subspace analysis under an
//! orthogonality constraint, and classifies videos through Fisher-vector
//! encoding and linear SVMs. A seeded synthetic benchmark makes the
//! pipeline verifiable end to end on one CPU.

pub mod binio;
pub mod encode;
pub mod error;
pub mod handcrafted;
pub mod isa;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod two_stream;
pub mod video;

pub use error::{Error, Result};
