//! Comparability of random permutations in the strong Bruhat order.
//!
//! Two permutations satisfy `π ≤ τ` exactly when every top-left prefix count
//! of `τ`'s permutation matrix is at most the corresponding count of `π`'s,
//! i.e. when the two-parameter field `Z(a, b) = X(a, b) − Y(a, b)` never goes
//! negative. The crate provides:
//!
//! - [`perm`]: permutations, prefix-count tables, uniform sampling, symmetries
//! - [`order`]: strong and weak order tests, covers, exhaustive counts
//! - [`zproc`]: the field `Z`, rectangle sums and maximal-deviation statistics
//! - [`dist`]: exact hypergeometric laws of box counts and their tail bounds
//! - [`estimate`]: Monte Carlo estimators, scaling fits, Gaussian sheets
//! - [`fkg`]: exact checks of positive correlation for Bruhat-monotone events
//! - [`cli`]: configuration, run manifests and the experiment pipelines
//!
//! All Monte Carlo work draws from counter-based streams keyed by
//! `(seed, trial)`, so results do not depend on the number of workers.

pub mod cli;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod fkg;
pub mod order;
pub mod parallel;
pub mod perm;
pub mod rng;
pub mod zproc;

pub use error::{Error, Result};
pub use order::{is_leq_strong, ComparabilityVerdict};
pub use parallel::Executor;
pub use perm::{DominanceTable, Permutation, Symmetry};
pub use rng::StreamKey;
pub use zproc::{Rectangle, ZTable};
