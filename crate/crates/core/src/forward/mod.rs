//! The measurement forward model: wave-plate gadget, state rotation,
//! intensity moments and finite-shot detection.

pub mod gadget;
pub mod intensity;
pub mod sampling;

pub use gadget::{
    gadget_decompose, gadget_unitary, plate_unitary, su2_to_euler, GadgetSetting, ModeUnitary, PlateKind,
    PlateSetting,
};
pub use intensity::{
    counter_rotate_state, intensity_models, intensity_moment_direct, intensity_moment_multipole,
    intensity_moments_direct, rotate_state, DirectModel, IntensityModel, MultipoleModel,
};
pub use sampling::{estimate_intensity, sample_counts, simulate_moments, IntensityMomentSet};
