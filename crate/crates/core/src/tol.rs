//! Centralized numerical tolerances and step sizes.
//!
//! Every threshold used by the library is defined here with its rationale, so
//! that no module carries ad-hoc magic numbers.

/// Membership tolerance for constraint-set invariants.
///
/// One order above the float error accumulated by the composed Hamilton
/// products that produce and repair points.
pub const EPS_MEM: f64 = 1e-9;

/// Fixed-point displacement tolerance for isotropy scans.
///
/// Action displacements at genuinely fixed points are exact zeros of the
/// Hamilton product; 1e-6 leaves three orders of headroom over roundoff
/// while staying far below any generic orbit displacement.
pub const EPS_FIX: f64 = 1e-6;

/// Central-difference step for action fields.
///
/// Balances O(h²) truncation against O(eps/h) roundoff near a 1e-10 total.
pub const H_ACT: f64 = 1e-5;

/// Half-width of the light-like band in causal classification.
///
/// Matches the metric-evaluation noise floor.
pub const EPS_NULL: f64 = 1e-9;

/// Chart step for first derivatives of metric components.
pub const H_CHART: f64 = 1e-4;

/// Chart step for the second-difference Riemann stencil.
///
/// Second differences lose half the digits; the larger step plus one level
/// of Richardson extrapolation recovers about two of them.
pub const H_CHART2: f64 = 1e-3;

/// Absolute tolerance for Riemann tensor symmetry checks on unit-scale input.
pub const TOL_CURV: f64 = 1e-4;

/// Determinant threshold below which a metric Gram matrix counts as singular.
pub const DEGENERATE_DET: f64 = 1e-12;

/// Denominator threshold for rejecting degenerate planes in sectional curvature.
pub const DEGENERATE_PLANE: f64 = 1e-10;

/// Threshold on the fake-horizontal map norm after normalizing |X| = 1.
///
/// The quantity is exactly zero or order one on these models.
pub const EPS_FAKE: f64 = 1e-6;

/// Chart radius for retraction-based local coordinates.
pub const CHART_RADIUS: f64 = 0.05;

/// Re-center the integration chart when |u| exceeds this.
///
/// Keeps finite-difference stencils inside the chart.
pub const CHART_HOP_RADIUS: f64 = 0.03;

/// Default geodesic integration step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Adaptive halving aborts once the step reaches this.
pub const STEP_UNDERFLOW: f64 = 1e-8;

/// Lower bound on the squared orbit-tensor scale below which a point is
/// treated as fixed (the vertical space has collapsed).
pub const EPS_ORBIT_COLLAPSE: f64 = 1e-18;

/// Circle nodes for connection averaging; spectrally accurate for smooth
/// integrands, guarded by a doubling test.
pub const N_QUAD: usize = 256;

/// Residual allowed when doubling the averaging quadrature.
pub const QUAD_DOUBLING: f64 = 1e-8;

/// Endpoint orbit-distance tolerance for orbit-to-orbit geodesic shooting.
pub const SHOOT_TOL: f64 = 1e-5;

/// Maximum distance from the constraint set accepted by retractions.
pub const RETRACT_MAX_DIST: f64 = 0.1;

/// Row norm below which quaternionic Gram-Schmidt refuses to normalize.
pub const RETRACT_DEGENERATE_ROW: f64 = 1e-8;

/// Margin on the Lorentz-regime condition r²P > 1 used when sampling
/// principal points for deformed metrics: points with 1 + tP > -LORENTZ_MARGIN
/// sit in (or too close to) the collapsed collar where the deformation is not
/// Lorentzian and charts degenerate.
pub const LORENTZ_MARGIN: f64 = 0.05;
