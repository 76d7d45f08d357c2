//! Directional emphasis of ambisonics signals.
//!
//! Signals are spherical-harmonic (SH) coefficient vectors in ACN order.
//! Emphasis multiplies the source field of a signal by a real function on the
//! sphere. The product is exact in the SH domain and raises the degree from
//! `Q̃` to `Q̃ + L̃`, where `L̃` is the degree of the emphasis kernel.

pub mod adaptive;
pub mod cg;
pub mod emphasis;
pub mod error;
pub mod quadrature;
pub mod sh;
pub mod source_field;
pub mod wigner;

pub use adaptive::{
    estimate_kernel, raise_emphasis, AdaptiveOrder, Averaging, CovarianceAccumulator, UpdateSchedule,
};
pub use cg::{build_cg_matrix, build_cg_matrix_lsq, expand_product, load_or_build, CgMatrix};
pub use emphasis::{
    apply_kron, apply_transfer, axisymmetric_kernel, build_transfer_matrix, normalize_kernel,
    project_sweet_zone, BetaPolicy, EmphasisKernel, TransferMatrix,
};
pub use error::{Error, Result};
pub use sh::{Basis, Direction, Kind, ShVector};
pub use source_field::{encode_plane_wave, eval_source_field, gauss_grid, oracle_emphasize, SphereGrid};
