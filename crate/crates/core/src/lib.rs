// Range checks are written so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod grid;
pub mod groundstate;
pub mod io;
pub mod numerics;
pub mod params;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use params::ProblemParams;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/ground_states.md")]
    pub mod ground_states {}
    #[doc = include_str!("../../../book/src/variational.md")]
    pub mod variational {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    pub mod spectra {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
