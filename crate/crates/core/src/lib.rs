//! Optimal affine rescaling of a dataset within constrained Gaussian
//! families.
//!
//! A coordinate system with origin `m` and basis `v` is identified with the
//! Gaussian `N(m, Σ)`, `Σ = (v·vᵀ)⁻¹`. How well it suits a dataset `Y` is
//! measured by the cross-entropy of `Y` against that Gaussian, reported as
//! the excess `M(Y‖f)` over the data's own (Mahalanobis) Gaussian. The
//! [`families`] module gives the optimum in closed form for six common
//! constraint sets, [`oracle`] re-derives the same optima numerically, and
//! [`families::whitening_transform`] turns any fitted model into the affine
//! map `y ↦ Σ^{-1/2}(y - m)`.

pub mod cli;
pub mod error;
pub mod families;
pub mod gaussmodel;
pub mod ingest;
pub mod linalg;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use families::{
    family_report, fit, fit_diagonal, fit_fixed_mean, fit_fixed_mean_diagonal,
    fit_fixed_mean_isotropic, fit_full, fit_isotropic, whitening_transform, FamilyKind,
    FamilySpec, FitResult, RescalingTransform, ReportRow,
};
pub use gaussmodel::{
    cross_entropy, estimate_moments, mahalanobis_sq, match_score, self_cross_entropy,
    GaussianModel, Moments, PointSet,
};
pub use linalg::{min_trace_assignment, spd_power, sym_eigen, EigenDecomposition, Matrix, SymMatrix};
