//! Numerical semi-Riemannian geometry on quaternionic sphere models.
//!
//! The library constructs Lorentzian metrics on the quaternions, SU(2), S⁷,
//! Sp(2) and the Gromoll–Meyer sphere by Cheeger-deforming circle actions with
//! a negative parameter, and verifies their curvature, causal and completeness
//! properties against independent finite-difference oracles.
//!
//! Layering, bottom up:
//!
//! - [`quat`] — exact quaternion arithmetic; everything else bottoms out here.
//! - [`models`] — the manifold models as constraint sets in quaternionic
//!   ambient spaces, their group actions and tangent machinery.
//! - [`cheeger`] — orbit tensor, deformed metric evaluation, closed-form
//!   sectional and Ricci curvature of the deformed metrics.
//! - [`curvature`] — chart-based finite-difference curvature oracle and the
//!   submersion tensors A, A*, S.
//! - [`geodesic`] — geodesic integration with conserved-quantity monitors,
//!   holonomy transport, completeness and dual-leaf probes.
//! - [`starbundle`] — the Sp(2) star diagram: projections, Kaluza–Klein
//!   metrics, quotient metrics on the exotic sphere, orbit-space isometry.

pub mod cheeger;
pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod linalg;
pub mod models;
pub mod quat;
pub mod rational;
pub mod sample;
pub mod starbundle;
pub mod tol;

pub use cheeger::{CausalClass, MetricKind, MetricSpec, OrbitTensor};
pub use error::GeoError;
pub use models::{ActionTag, ManifoldPoint, Model, TangentVector};
pub use quat::Quaternion;
