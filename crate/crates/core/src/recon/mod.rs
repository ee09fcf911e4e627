//! Inversion of intensity moments into correlation matrices.

pub mod directions;
pub mod inversion;
pub mod pipeline;
pub mod quadrature;
pub mod schur;

pub use directions::{design_directions, harmonic_matrix, legendre_gram, min_line_angle, DirectionSet};
pub use inversion::{
    continuous_inversion, discrete_inversion, discrete_inversion_with_threshold, first_order_inversion,
    synthesize_transformed, DiscreteInversion, COND_ERROR_THRESHOLD, COND_WARN_THRESHOLD,
};
pub use pipeline::{
    reconstruct_correlations, reconstructors, Channels, Diagnostics, ExactReconstructor, LeastSquaresReconstructor,
    MeasurementRecord, ReconstructOptions, Reconstruction, Reconstructor,
};
pub use quadrature::{gauss_legendre, QuadratureGrid};
pub use schur::{
    inverse_schur_correlation, inverse_schur_intensity, schur_multipoles, schur_transform_correlation,
    schur_transform_intensity, MultipoleVector,
};
