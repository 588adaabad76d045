pub mod acoustics;
pub mod boussinesq;
pub mod error;
pub mod euler_fv;
pub mod grid;
pub mod harness;
pub mod params;
pub mod potential;
pub mod relenergy;
pub mod snapshot;
pub mod spectral;
pub mod sponge;
pub mod thermo;

pub use error::{Error, Result};
