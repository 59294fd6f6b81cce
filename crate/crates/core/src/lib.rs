//! Time-domain separation of outgoing and incoming sound fields on a sphere.
//!
//! A spherical array measures pressure and radial velocity (or pressure on
//! two concentric spheres). [`Separator`] turns each sample frame into the
//! spherical harmonic coefficients of the field radiated by sources inside
//! the sphere and of the field arriving from outside, with a fixed latency
//! of one FIR history.

pub mod error;
pub mod experiment;
pub mod filters;
pub mod freqref;
pub mod harmonics;
pub mod io;
pub mod metrics;
pub mod sampling;
pub mod scenesim;
pub mod separator;

pub use error::{Error, Result};
pub use filters::{build_filter_bank, Filter, FilterBank, Quadrature};
pub use harmonics::{Complex64, HarmonicIndex, MAX_ORDER};
pub use metrics::{ErrorEnergy, SeparationReport, XiTable};
pub use sampling::{gauss_scheme, Direction, SamplingScheme, ShCoefficients};
pub use scenesim::{Layout, Measurements};
pub use separator::{reconstruct, CoefficientFrame, FieldFrame, InputFrame, MidsphereApprox, Separator, SeparatorConfig, TwoSphereFrame};
