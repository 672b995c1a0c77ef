//! Sparse nonnegative coupled matrix-tensor factorization.
//!
//! A third-order tensor `X ≈ ⟦U1, V, W⟧` and a side matrix `Y ≈ U1 U2ᵀ` are
//! factorized jointly with nonnegative factors. The main solver, Cut-CD,
//! runs coordinate descent over one factor column at a time and updates only
//! the elements whose normalized importance reaches the column's cut-off.
//! GCD, CCD++ and projected ALS are included as baselines, along with an
//! L2,1-regularized Cut-CD variant for sparser factors.
//!
//! ```
//! use cutcd::{fit_cutcd, synth_generate, SolverConfig, SynthSpec, ValueMode};
//!
//! let data = synth_generate(&SynthSpec {
//!     mode_lengths: (8, 8, 8, 4),
//!     density: 0.2,
//!     rank: 2,
//!     value_mode: ValueMode::Planted,
//!     noise_sigma: 0.0,
//!     seed: 1,
//! })
//! .unwrap();
//! let fit = fit_cutcd(&data.tensor, &data.matrix, &SolverConfig { max_iters: 5, ..SolverConfig::with_rank(2) }).unwrap();
//! assert!(fit.model.is_nonnegative());
//! ```

pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod solvers;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::{gram, hadamard, khatri_rao, FactorMatrix, Matrix, SideMatrix};
pub use metrics::{nrv, pattern_distinctiveness, precision_recall_f1, rmse, RecommendationScores, TestSet};
pub use model::{
    cd_delta, grad, grad_u1, grad_u2, grad_v, grad_w, l21_norm, loss, loss_sc, objective, objective_sc, sc_reweight,
    CoupledModel, Factor, FactorSystem, GradState, ScPenalty,
};
pub use solvers::{
    fit, fit_als, fit_ccdpp, fit_cutcd, fit_cutcd_sc, fit_from, fit_gcd, Counters, CutoffRule, Fit, IterTrace,
    SelectionMask, SolverConfig, SolverKind,
};
pub use synth::{sample_from_model, synth_generate, train_test_split, SynthData, SynthSpec, ValueMode};
pub use tensor::{dense_reconstruct, mttkrp, mttkrp_column, DenseTensor3, Mode, SparseTensor3};
