//! Dense multipartite density-matrix algebra and numerical certification of
//! whether a state is uniquely determined among all states by its k-body
//! marginals.
//!
//! The crate is organized around five pieces:
//!
//! * [`tensor`] — kets, operators and density matrices tagged with a
//!   [`dims::DimProfile`], partial traces, subsystem permutations, local
//!   unitaries and the pure-reduction factorization.
//! * [`products`] — the three composition products (tensor, Kronecker, and
//!   the partial-merge product) realized as explicit basis-index maps.
//! * [`marginal`] — the k-marginal map as a real-linear operator on Hermitian
//!   space, its null space (the correlation kernel), and closed-form
//!   correlation-matrix families.
//! * [`cert`] — the uniqueness certifier: a linear optimizer over the
//!   spectrahedron of marginal-compatible states, directional screening,
//!   witness verification and an independent feasibility-search oracle.
//! * [`states`] — the concrete state families (W type, generalized GHZ,
//!   the rank-two tripartite mixture and its qudit extension) and the
//!   pipeline composing genuinely entangled uniquely-determined states.

pub mod cert;
pub mod dims;
pub mod eigen;
pub mod hermitian;
pub mod io;
pub mod marginal;
pub mod products;
pub mod sampling;
pub mod states;
pub mod tensor;

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension profile must contain at least one party")]
    EmptyProfile,
    #[error("local dimension {dim} of party {party} is below 2")]
    LocalDimTooSmall { party: usize, dim: usize },
    #[error("total dimension {total} exceeds the configured cap {cap}")]
    DimensionCap { total: usize, cap: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("operator is not Hermitian: max |M - M^dag| entry = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },
    #[error("operator is not positive semidefinite: min eigenvalue = {min_eig:.3e}")]
    NotPositive { min_eig: f64 },
    #[error("trace is not one: trace = {trace:.17}")]
    TraceNotOne { trace: f64 },
    #[error("vector is not normalized: squared norm = {norm_sq:.17}")]
    NotNormalized { norm_sq: f64 },
    #[error("factor {party} is not unitary: max |UU^dag - I| entry = {dev:.3e}")]
    NotUnitary { party: usize, dev: f64 },
    #[error("reduction is not pure: purity = {purity:.12} below threshold")]
    ReductionNotPure { purity: f64 },
    #[error("factorization residual {residual:.3e} exceeds the guarantee")]
    FactorResidual { residual: f64 },
    #[error("marginal order k = {k} out of range for {n} parties (need 1 <= k < n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("kernel dimension {dim} exceeds the configured budget {budget}; use sampled mode")]
    KernelBudget { dim: usize, budget: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("invalid coherence term: {0}")]
    InvalidCoherenceTerm(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("state file error: {0}")]
    StateFile(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Numerical policy shared by the domain types.
///
/// Single source of truth for the validation thresholds; all constructors
/// use [`Tolerances::default`] unless told otherwise.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    /// Max allowed |M - M^dag| entry for Hermitian checks.
    pub tol_herm: f64,
    /// Eigenvalues of a state may dip to -eps_psd * trace.
    pub eps_psd: f64,
    /// A reduction counts as pure when purity exceeds 1 - tol_pure.
    pub tol_pure: f64,
    /// Max allowed |norm^2 - 1| for kets.
    pub tol_norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_herm: 1e-12,
            eps_psd: 1e-9,
            tol_pure: 1e-9,
            tol_norm: 1e-12,
        }
    }
}

static MAX_TOTAL_DIM: AtomicUsize = AtomicUsize::new(4096);

/// Current cap on the total Hilbert-space dimension of any constructed profile.
pub fn max_total_dim() -> usize {
    MAX_TOTAL_DIM.load(Ordering::Relaxed)
}

/// Override the total-dimension cap (process-wide).
pub fn set_max_total_dim(cap: usize) {
    MAX_TOTAL_DIM.store(cap, Ordering::Relaxed);
}

pub use cert::{
    brute_oracle_search, certify_uda, certify_uda_sampled, max_feasible_step, maximize_linear,
    verify_witness, CertConfig, CertMode, UdaStatus, UdaVerdict, Witness,
};
pub use dims::{DimProfile, SubsetSpec};
pub use marginal::{
    all_diff_coherence, correlation_kernel, kernel_dim_formula, kernel_with_group_constraints,
    marginal_constraint_matrix, two_qubit_null_marginal_family, ComposeMode, CorrelationMatrix,
    KernelBasis,
};
pub use products::{kc_compose, kron_compose, tensor_compose};
pub use states::{
    beta_state, compose_gme_uda, generalized_ghz, is_gme_pure, run_pipeline, sigma_state, w_state,
    xi_ket, BetaParams, GmeUdaState, PipelineStep, WParams,
};
pub use tensor::{
    apply_local_unitaries, factorize_pure_reduction, partial_trace, permute_subsystems,
    DensityMatrix, Ket, Operator,
};
