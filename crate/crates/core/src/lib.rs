//! Piecewise-linear Galerkin laboratory for the Laplacian with nonlocal Robin
//! boundary conditions.
//!
//! The form being discretized is
//!
//! ```text
//! E(u, v) = ∫_Ω ∇u·∇v dx + ∫_∂Ω u v dκ + ∬_{∂Ω×∂Ω∖diag} (u(x) − u(y))(v(x) − v(y)) dθ
//! ```
//!
//! where `κ` is a boundary measure and `θ` a symmetric jump measure off the
//! diagonal. Everything is assembled with nodal (lumped) quadrature so that the
//! operator matrix is an M-matrix on the structured non-obtuse meshes provided
//! here, which lets positivity, sub-Markov and domination properties of the heat
//! semigroup be checked entrywise.
//!
//! Modules, bottom-up:
//!
//! * [`mesh`]: interval and rectangle meshes with boundary topology.
//! * [`measures`]: boundary measures, jump measures, the marginal `θ̂`.
//! * [`forms`]: stiffness, lumped mass, boundary mass, jump and coupling matrices.
//! * [`spectral`]: generalized eigendecomposition, propagators, resolvents.
//! * [`checks`]: entrywise positivity, sub-Markov and domination checks.
//! * [`capacity`]: discrete relative capacity and the closability probe.
//! * [`convergence`]: resolvent convergence under scaling and γ-consistency.

// argument checks are written `!(x > 0.0)` on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod checks;
pub mod convergence;
mod error;
pub mod forms;
pub mod linalg;
pub mod measures;
pub mod mesh;
pub mod spectral;

pub use error::{Error, Result};
