//! Simulation and inverse design of multi-plane light conversion (MPLC)
//! devices: Gaussian beam arrays, angular spectrum propagation through
//! stacks of phase masks, wavefront-matching optimization, and the tooling
//! around a physical build (geometry planning, alignment, tolerance checks).

pub mod alignment;
pub mod beams;
pub mod design;
pub mod error;
mod fft;
pub mod field;
mod fit;
pub mod geometry;
pub mod io;
pub mod matrix;
pub mod perturb;
pub mod propagation;
pub mod unitary;
pub mod wfm;

pub use error::{Error, Result};
pub use field::{ComplexField, SamplingGrid};
pub use matrix::TransferMatrix;
pub use propagation::{BandLimit, Cascade, PhaseMask, PhaseMaskStack, Propagator};
