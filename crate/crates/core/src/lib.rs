//! Design and analysis toolkit for dual-color, fiber-coupled laser-diode
//! stimulation units.
//!
//! * [`beam`]: simple astigmatic Gaussian beams and flat-interface optics.
//! * [`stack`]: diode presets and the layered light path of a unit.
//! * [`coupling`]: power coupled into an offset circular fiber core.
//! * [`design`]: pathway curves, longest-pathway solving, corner sweeps and
//!   Monte Carlo tolerance analysis.
//! * [`profile`]: rendered intensity images, illuminated masks and overlap.
//! * [`stim`]: stimulation pulse trains, ladders and chirps.
//! * [`stats`]: PSTHs and optogenetic tagging statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beam;
pub mod coupling;
pub mod design;
pub mod error;
pub mod profile;
pub mod quadrature;
pub mod stack;
pub mod stats;
pub mod stim;

pub use error::{Error, Result};
