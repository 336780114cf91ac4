//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeoError {
    #[error("ambient point is not within {max_dist} of the {model} constraint set (residual {residual:.3e})")]
    NotNearManifold {
        model: &'static str,
        residual: f64,
        max_dist: f64,
    },

    #[error("degenerate row in orthonormalization (norm {norm:.3e})")]
    DegenerateRow { norm: f64 },

    #[error("group element is not a unit quaternion in the admissible subgroup (|q| = {norm})")]
    BadGroupElement { norm: f64 },

    #[error("metric is degenerate at the requested point: {context}")]
    DegenerateMetric { context: &'static str },

    #[error("deformation parameter is singular: |1 + t P| = {magnitude:.3e}")]
    SingularDeformation { magnitude: f64 },

    #[error("bad parameter: {context}")]
    BadParameter { context: &'static str },

    #[error("point is not a fixed point of the action")]
    NotFixedPoint,

    #[error("direction fails the fake-horizontal criterion")]
    BadDirection,

    #[error("point is not in the principal stratum of the action")]
    NotPrincipal,

    #[error("plane is degenerate (|denominator| = {denominator:.3e})")]
    DegeneratePlane { denominator: f64 },

    #[error("adaptive step underflow below {limit:.1e} during integration")]
    StepUnderflow { limit: f64 },

    #[error("connection averaging quadrature unstable (doubling residual {residual:.3e})")]
    QuadratureUnstable { residual: f64 },

    #[error("geodesic shooting failed to reduce orbit distance below {tol:.1e} (best {best:.3e})")]
    ShootingFailed { tol: f64, best: f64 },

    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;
