//! Berry connection and curvature of one-photon ionization over complex
//! light-polarization space.
//!
//! The molecule enters only through its continuum dipole `D(k̂)`
//! ([`molecule::DipoleField`]). From it the crate builds the Gram tensor
//! `Q_ij = |Ẽ|² ∫dΘ_k D_i* D_j`, the connection and curvature on the sphere of
//! circular-polarization orientations ([`berry`]), the propensity pseudovector
//! `Ω_a`, and the two-field extension ([`pumpprobe`]).
//!
//! ```
//! use chiral_berry::{BerryGeometry, HarmonicDipoleModel, QuadratureRule};
//!
//! let model = HarmonicDipoleModel::chiral_demo();
//! let geometry = BerryGeometry::new(&model, &QuadratureRule::for_band_limit(2)).unwrap();
//! let omega = geometry.curvature_tensor().antisym_vector;
//! assert!((omega.z().re + 2.0).abs() < 1e-12);
//! ```

pub mod algebra3;
pub mod berry;
pub mod error;
pub mod molecule;
pub mod polarization;
pub mod pumpprobe;

pub use algebra3::{ComplexMat3, ComplexVec3, LeviCivita};
pub use berry::{
    AmplitudeField, AmplitudeKind, BerryGeometry, ConnectionSample, CurvatureTensor, DensityChannels, LoopPath,
    LoopPhase, StokesOptions, StokesReport,
};
pub use error::{Error, Result};
pub use molecule::{
    gram_tensor, propensity_vector, transform_model, DipoleField, HarmonicDipoleModel, QuadratureRule,
    SampledDipoleModel,
};
pub use num_complex::Complex64;
pub use polarization::{
    CircularPolarization, FormDensities, FormKind, Helicity, LinearPolarization, OrientationPoint, SphereGrid,
};
