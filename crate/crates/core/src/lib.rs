pub mod closed_form;
pub mod estimation;
pub mod error;
pub mod fisher;
pub mod fock;
pub mod interferometer;
pub mod linalg;
pub mod optics;
pub mod scenario;
pub mod spectral;
pub mod states;

pub use error::{Error, Result};
