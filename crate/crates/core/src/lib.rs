//! Jet kernels, bundle curvature, normalized frames and unitary-equivalence tests for
//! quotient Hilbert modules along complex submanifolds, computed with truncated
//! multivariate power series over user-defined reproducing kernels.

pub mod equivalence;
pub mod error;
pub mod geometry;
pub mod jet_module;
pub mod jets;
pub mod kernel_dsl;
pub mod linalg;
pub mod multiindex;
pub mod quotient_oracle;

pub use nalgebra::Complex;

/// Double-precision complex scalar used throughout.
pub type C64 = Complex<f64>;

pub use error::{Error, ParseError, Result};
pub use jets::{AffineVarMap, JetMatrix, JetSeries, JetSpace};
pub use kernel_dsl::{builtin_bergman, parse_kernel, pullback_affine, AffineChart, Expr, Kernel, KernelSpec};
pub use linalg::Mat;
pub use multiindex::{enumerate_jet_indices, multi_binom, pochhammer, theta, theta_inv, JetIndexTable, MultiIndex};
pub use equivalence::{
    lemma_em_check, mthm_check, rank1_equiv, rankr_equiv, recover_bergman_weights, EquivOptions, EquivalenceReport,
    Verdict,
};
pub use jet_module::{chart_jet_transform, jet_kernel, module_action_matrix, restrict_to_z, sym_power_matrix};
pub use quotient_oracle::{quotient_kernel_partial, AmbientWeights, MonomialVector};
