//! Radar-camera fusion detection in the bird's-eye-view polar domain.
//!
//! The crate covers the whole pipeline: warping a front camera image onto
//! the ground plane and resampling it onto a range-azimuth raster
//! ([`geometry`]), stacking and MIMO-realigning a complex range-Doppler
//! cube ([`radar`]), the dual-branch fusion network ([`net`]) built on a
//! small tensor engine ([`tensor`]), the detection loss ([`loss`]),
//! decoding and scoring ([`eval`]) and the experiment harness
//! ([`harness`]).

pub mod eval;
pub mod geometry;
pub mod harness;
pub mod loss;
pub mod net;
pub mod radar;
pub mod tensor;

pub use tensor::{ConvSpec, Graph, Tensor, Var};
