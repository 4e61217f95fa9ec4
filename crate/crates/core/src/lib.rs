//! Co-design toolkit for memristor analog computing.
//!
//! * [`ivdata`] reads multi-cycle I-V sweeps into conductance curves.
//! * [`nonideality`] extracts the monotonic and stochastic non-ideality
//!   factors and the usability score.
//! * [`memsim`] applies a device profile to network weights and simulates
//!   crossbar matrix-vector products.
//! * [`neural`] trains small dense networks with multinomial weight noise.
//! * [`bayesopt`] runs Gaussian-process ask/tell campaigns over finite grids.
//! * [`certify`] evaluates the certified perturbation radius of multinomial
//!   smoothing and checks it by exhaustive enumeration on tiny networks.

pub mod bayesopt;
pub mod certify;
pub mod error;
pub mod experiments;
pub mod ivdata;
pub mod matrix;
pub mod memsim;
pub mod neural;
pub mod nonideality;
pub mod rng;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
