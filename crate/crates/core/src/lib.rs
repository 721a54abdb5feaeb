//! Numerical laboratory for the Kähler-Ricci flow on U(n)-invariant metrics
//! on ℂⁿ and on rotationally symmetric surfaces.
//!
//! Conventions used throughout the crate:
//!
//! * A radial Kähler metric is given by a potential `P(ρ)`, `ρ = log|z|²`.
//!   Its two metric eigenvalues are `λ_t = P′e^{−ρ}` (tangential, multiplicity
//!   `n − 1`) and `λ_r = P″e^{−ρ}` (radial). The coefficient matrix `g_{ij̄}`
//!   is read as a Riemannian metric on ℝ²ⁿ, so `g_{ij̄} = δ_{ij}` is Euclidean.
//! * Scalar curvature, Laplacian, gradient norms and Ricci eigenvalues are the
//!   Riemannian ones of that metric. In these units `R = Δf` and the flow
//!   `∂ₜg_{ij̄} = −R_{ij̄}` coincides with `∂ₜg = −2Rc`.
//! * Flow speed is expressed by a factor `c` in `∂ₜg = −c·Rc`; `c = 2` is the
//!   speed at which the evolution identities hold literally in time `t`.

pub mod blowup;
pub mod entropy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod numerics;
pub mod presets;

pub use error::{Error, Result};
