//! Normal geodesics, Jacobi fields, conjugate covectors and Maslov indices
//! of sub-Riemannian structures on `ℝⁿ` given by polynomial generating
//! families.
//!
//! * [`structure`]: generating families, the Hamiltonian `H = ½ Σ ⟨p, X_k⟩²`
//!   and its exact jet.
//! * [`flow`]: the Hamiltonian flow with its fundamental matrix, the
//!   exponential map and its differential.
//! * [`jacobi`]: Jacobi fields in Darboux coordinates, the orthogonal
//!   decomposition and the regularity check at conjugate covectors.
//! * [`maslov`]: Lagrangian frames, Jacobi curves, crossing forms and
//!   conjugate counting.
//! * [`heisenberg`]: closed forms on the Heisenberg group used as an exact
//!   oracle, the conjugate locus and collision finding.
//! * [`verify`]: invariant batteries shared by the `verify` subcommand and
//!   the acceptance tests.
//!
//! ```
//! use subriem::{flow, structure::Structure};
//!
//! let h = Structure::heisenberg();
//! let q = flow::exp_map(&h, &[0.0; 3], &[1.0, 0.0, std::f64::consts::TAU], 1e-10).unwrap();
//! assert!((q[2] - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-9);
//! ```

pub mod cli;
pub mod error;
pub mod flow;
pub mod heisenberg;
pub mod integrator;
pub mod jacobi;
pub mod linalg;
pub mod maslov;
pub mod output;
pub mod structure;
pub mod verify;

pub use error::{Error, Result};
