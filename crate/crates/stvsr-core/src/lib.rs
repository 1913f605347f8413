//! Space-time video super-resolution engine core.
//!
//! Maps a low-frame-rate, low-resolution RGB frame sequence directly to a
//! high-frame-rate, 4× high-resolution sequence in one stage:
//!
//! ```text
//! LR frames ──► feature extractor ──► feature temporal interpolation
//!           ──► bidirectional deformable ConvLSTM ──► HR reconstructor
//! ```
//!
//! The crate is `no_std` + `alloc`: it contains the differentiable tensor
//! core, the alignment/recurrence/reconstruction modules, synthetic data
//! generation, metrics, and the Adam/cosine training loop. Everything that
//! touches the filesystem (PNG frames, checkpoint files, config files) lives
//! in the companion CLI crate.
//!
//! All numeric code is generic over [`Scalar`] (`f32` for training and
//! inference, `f64` for finite-difference gradient checking).

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

// The test harness itself needs std (panic capture, printing); the library
// proper never does.
#[cfg(test)]
extern crate std;

pub mod checkpoint;
pub mod data;
pub mod dconvlstm;
pub mod deform;
pub mod gradcheck;
pub mod interp;
pub mod metrics;
pub mod network;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod train;

pub use tape::{Tape, Var};
pub use tensor::{Scalar, Tensor};
