//! Simulation and tomography of SU(2) polarization multipoles for two-mode
//! bosonic fields.
//!
//! The crate is layered bottom-up:
//!
//! * [`angular`]: half-integer labels, Clebsch-Gordan coefficients, Wigner
//!   D-functions, spherical harmonics and Legendre polynomials.
//! * [`fock`]: Fock-layer states, the creation-operator tensors `T_Kq` and the
//!   correlation matrices `G^K`.
//! * [`forward`]: the quarter/half/quarter wave-plate gadget, state rotation,
//!   intensity moments and photon-counting simulation.
//! * [`recon`]: Schur transforms, continuous and discrete inversions,
//!   measurement-direction design and the reconstruction strategies.
//! * [`io`] and [`cli`]: JSON/CSV schemas and the batch driver.

pub mod angular;
pub mod cli;
pub mod error;
pub mod fock;
pub mod forward;
pub mod io;
pub mod recon;
pub mod registry;

pub use angular::{Direction, EulerAngles, HalfInt};
pub use error::{Error, Result};
pub use fock::{CorrelationMatrix, LayerState, TensorIndex, TwoModeState};
