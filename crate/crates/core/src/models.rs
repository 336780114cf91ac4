//! The manifold models as constraint sets in quaternionic ambient spaces,
//! their circle and SU(2) actions, tangent projections, retractions and
//! vertical/horizontal splittings.
//!
//! Points are tuples of quaternions:
//!
//! - `Minkowski` — all of ℍ ≅ ℝ⁴ (no constraint).
//! - `Su2`      — unit quaternions.
//! - `S7`       — unit pairs (a, b) ∈ ℍ².
//! - `Sp2`      — tuples (a, c, b, d) with rows (a, c), (b, d) orthonormal:
//!                |a|²+|c|² = 1, |b|²+|d|² = 1, a·conj(b) + c·conj(d) = 0.
//! - `SigmaRep` — an Sp2 tuple used as a representative of its orbit under
//!                the star action; tangent vectors are star-horizontal.

use crate::cheeger::MetricSpec;
use crate::error::{GeoError, Result};
use crate::linalg::{self, AmbVec};
use crate::quat::{self, inner, qexp, Quaternion};
use crate::tol;
use arrayvec::ArrayVec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub type Coords = ArrayVec<Quaternion, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Minkowski,
    Su2,
    S7,
    Sp2,
    /// Gromoll-Meyer sphere point, carried as an Sp2 representative.
    SigmaRep,
}

impl Model {
    pub fn quaternion_count(self) -> usize {
        match self {
            Model::Minkowski | Model::Su2 => 1,
            Model::S7 => 2,
            Model::Sp2 | Model::SigmaRep => 4,
        }
    }

    pub fn ambient_dim(self) -> usize {
        4 * self.quaternion_count()
    }

    /// Dimension of the tangent space handed out by [`project_tangent`]
    /// (for `SigmaRep` this is the quotient dimension).
    pub fn tangent_dim(self) -> usize {
        match self {
            Model::Minkowski => 4,
            Model::Su2 => 3,
            Model::S7 => 7,
            Model::Sp2 => 10,
            Model::SigmaRep => 7,
        }
    }
}

/// Group actions on the models. Circle-scoped actions only accept elements
/// of span{1, i}; the Sp2 actions accept any unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionTag {
    /// q · a = q a q̄ on Su2 (almost semi-free; fixes the complex circle).
    Su2Conj,
    /// q · a = q a on Su2 (free; totally geodesic fibers).
    Su2Hopf,
    /// q · (a, b) = (q a q̄, q b q̄) on S7.
    S7Star,
    /// (a, c, b, d) ↦ (a, c q̄, b, d q̄) on Sp2 (principal bundle action).
    Sp2Bullet,
    /// (a, c, b, d) ↦ (q a q̄, q c, q b q̄, q d) on Sp2 (free).
    Sp2Star,
    /// The bullet action descended to star-orbit representatives.
    SigmaBullet,
}

impl ActionTag {
    pub fn model(self) -> Model {
        match self {
            ActionTag::Su2Conj | ActionTag::Su2Hopf => Model::Su2,
            ActionTag::S7Star => Model::S7,
            ActionTag::Sp2Bullet | ActionTag::Sp2Star => Model::Sp2,
            ActionTag::SigmaBullet => Model::SigmaRep,
        }
    }

    /// Whether group elements are restricted to the circle span{1, i}.
    pub fn circle_scoped(self) -> bool {
        !matches!(self, ActionTag::Sp2Bullet | ActionTag::Sp2Star)
    }
}

/// A point on one of the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub model: Model,
    pub coords: Coords,
}

/// A tangent vector in ambient coordinates attached to a base point.
///
/// `fiber_t` is the optional fiber coordinate of the horizontal lift used by
/// the explicit Lorentzian coordinate models (the ∂_θ component).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub ambient: Coords,
    pub fiber_t: Option<f64>,
}

impl ManifoldPoint {
    pub fn new(model: Model, coords: Coords) -> Self {
        Self { model, coords }
    }

    pub fn su2(a: Quaternion) -> Self {
        let mut c = Coords::new();
        c.push(a);
        Self::new(Model::Su2, c)
    }

    pub fn minkowski(q: Quaternion) -> Self {
        let mut c = Coords::new();
        c.push(q);
        Self::new(Model::Minkowski, c)
    }

    pub fn s7(a: Quaternion, b: Quaternion) -> Self {
        let mut c = Coords::new();
        c.push(a);
        c.push(b);
        Self::new(Model::S7, c)
    }

    pub fn sp2(a: Quaternion, c: Quaternion, b: Quaternion, d: Quaternion) -> Self {
        let mut t = Coords::new();
        t.push(a);
        t.push(c);
        t.push(b);
        t.push(d);
        Self::new(Model::Sp2, t)
    }

    pub fn to_amb(&self) -> AmbVec {
        coords_to_amb(&self.coords)
    }

    /// Maximum membership-constraint residual.
    pub fn membership_residual(&self) -> f64 {
        constraints(self.model, &self.to_amb())
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }

    pub fn is_member(&self, tol: f64) -> bool {
        self.membership_residual() <= tol
    }
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, ambient: Coords) -> Self {
        Self {
            base,
            ambient,
            fiber_t: None,
        }
    }

    pub fn zero(base: &ManifoldPoint) -> Self {
        let mut c = Coords::new();
        for _ in 0..base.model.quaternion_count() {
            c.push(quat::ZERO);
        }
        Self::new(base.clone(), c)
    }

    pub fn to_amb(&self) -> AmbVec {
        coords_to_amb(&self.ambient)
    }

    pub fn from_amb(base: &ManifoldPoint, v: &AmbVec) -> Self {
        Self::new(base.clone(), amb_to_coords(v))
    }

    /// Ambient (Euclidean) norm.
    pub fn ambient_norm(&self) -> f64 {
        self.to_amb().norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for q in &mut out.ambient {
            *q = q.scale(s);
        }
        out
    }

    pub fn add(&self, o: &TangentVector) -> Self {
        let mut out = self.clone();
        for (q, r) in out.ambient.iter_mut().zip(o.ambient.iter()) {
            *q = *q + *r;
        }
        out
    }

    pub fn sub(&self, o: &TangentVector) -> Self {
        let mut out = self.clone();
        for (q, r) in out.ambient.iter_mut().zip(o.ambient.iter()) {
            *q = *q - *r;
        }
        out
    }

    /// Ambient inner product with another vector at the same base.
    pub fn dot(&self, o: &TangentVector) -> f64 {
        self.to_amb().dot(&o.to_amb())
    }
}

pub fn coords_to_amb(coords: &Coords) -> AmbVec {
    let mut v = AmbVec::zeros(4 * coords.len());
    for (k, q) in coords.iter().enumerate() {
        v[4 * k] = q.w;
        v[4 * k + 1] = q.x;
        v[4 * k + 2] = q.y;
        v[4 * k + 3] = q.z;
    }
    v
}

pub fn amb_to_coords(v: &AmbVec) -> Coords {
    let mut c = Coords::new();
    for k in 0..v.n / 4 {
        c.push(Quaternion::new(
            v[4 * k],
            v[4 * k + 1],
            v[4 * k + 2],
            v[4 * k + 3],
        ));
    }
    c
}

// ---------------------------------------------------------------------------
// Constraints
// ---------------------------------------------------------------------------

fn amb_quat(v: &AmbVec, k: usize) -> Quaternion {
    Quaternion::new(v[4 * k], v[4 * k + 1], v[4 * k + 2], v[4 * k + 3])
}

fn set_amb_quat(v: &mut AmbVec, k: usize, q: Quaternion) {
    v[4 * k] = q.w;
    v[4 * k + 1] = q.x;
    v[4 * k + 2] = q.y;
    v[4 * k + 3] = q.z;
}

/// Membership-constraint residuals (all quadratic in the ambient point).
pub fn constraints(model: Model, x: &AmbVec) -> ArrayVec<f64, 6> {
    let mut out = ArrayVec::new();
    match model {
        Model::Minkowski => {}
        Model::Su2 => {
            out.push(amb_quat(x, 0).norm_sq() - 1.0);
        }
        Model::S7 => {
            out.push(amb_quat(x, 0).norm_sq() + amb_quat(x, 1).norm_sq() - 1.0);
        }
        Model::Sp2 | Model::SigmaRep => {
            let (a, c, b, d) = (
                amb_quat(x, 0),
                amb_quat(x, 1),
                amb_quat(x, 2),
                amb_quat(x, 3),
            );
            out.push(a.norm_sq() + c.norm_sq() - 1.0);
            out.push(b.norm_sq() + d.norm_sq() - 1.0);
            let f = a * b.conj() + c * d.conj();
            out.push(f.w);
            out.push(f.x);
            out.push(f.y);
            out.push(f.z);
        }
    }
    out
}

/// Gradients of the membership constraints at `x` (linear in `x`).
pub fn constraint_grads(model: Model, x: &AmbVec) -> ArrayVec<AmbVec, 6> {
    let n = x.n;
    let mut out = ArrayVec::new();
    match model {
        Model::Minkowski => {}
        Model::Su2 | Model::S7 => {
            out.push(x.scale(2.0));
        }
        Model::Sp2 | Model::SigmaRep => {
            let (a, c, b, d) = (
                amb_quat(x, 0),
                amb_quat(x, 1),
                amb_quat(x, 2),
                amb_quat(x, 3),
            );
            let mut g1 = AmbVec::zeros(n);
            set_amb_quat(&mut g1, 0, a.scale(2.0));
            set_amb_quat(&mut g1, 1, c.scale(2.0));
            out.push(g1);
            let mut g2 = AmbVec::zeros(n);
            set_amb_quat(&mut g2, 2, b.scale(2.0));
            set_amb_quat(&mut g2, 3, d.scale(2.0));
            out.push(g2);
            // Components of F = a·conj(b) + c·conj(d). The derivative in
            // direction (da, dc, db, dd) is da·conj(b) + a·conj(db) +
            // dc·conj(d) + c·conj(dd); gradients are read off column-wise.
            let basis = [quat::ONE, quat::I, quat::J, quat::K];
            for m in 0..4 {
                let mut g = AmbVec::zeros(n);
                for (j, e) in basis.iter().enumerate() {
                    let da = *e * b.conj(); // ∂F/∂a_j
                    let db = a * e.conj(); // ∂F/∂b_j
                    let dc = *e * d.conj(); // ∂F/∂c_j
                    let dd = c * e.conj(); // ∂F/∂d_j
                    let pick = |q: Quaternion| match m {
                        0 => q.w,
                        1 => q.x,
                        2 => q.y,
                        _ => q.z,
                    };
                    g[j] = pick(da);
                    g[4 + j] = pick(dc);
                    g[8 + j] = pick(db);
                    g[12 + j] = pick(dd);
                }
                out.push(g);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Retraction and tangent projection
// ---------------------------------------------------------------------------

fn retract_amb(model: Model, x: &AmbVec, check_near: bool) -> Result<AmbVec> {
    match model {
        Model::Minkowski => Ok(*x),
        Model::Su2 | Model::S7 => {
            let n = x.norm();
            if n < tol::RETRACT_DEGENERATE_ROW {
                return Err(GeoError::DegenerateRow { norm: n });
            }
            if check_near && (n - 1.0).abs() > tol::RETRACT_MAX_DIST {
                return Err(GeoError::NotNearManifold {
                    model: model_name(model),
                    residual: (n - 1.0).abs(),
                    max_dist: tol::RETRACT_MAX_DIST,
                });
            }
            Ok(x.scale(1.0 / n))
        }
        Model::Sp2 | Model::SigmaRep => {
            let (a, c, b, d) = (
                amb_quat(x, 0),
                amb_quat(x, 1),
                amb_quat(x, 2),
                amb_quat(x, 3),
            );
            if check_near {
                let worst = constraints(Model::Sp2, x)
                    .iter()
                    .fold(0.0f64, |m, r| m.max(r.abs()));
                if worst > tol::RETRACT_MAX_DIST {
                    return Err(GeoError::NotNearManifold {
                        model: model_name(model),
                        residual: worst,
                        max_dist: tol::RETRACT_MAX_DIST,
                    });
                }
            }
            // Row-wise right-module Gram-Schmidt. The projection coefficient
            // is the full quaternion b·conj(a) + d·conj(c), not just its real
            // part: the row-orthogonality constraint is quaternion-valued.
            let n1 = (a.norm_sq() + c.norm_sq()).sqrt();
            if n1 < tol::RETRACT_DEGENERATE_ROW {
                return Err(GeoError::DegenerateRow { norm: n1 });
            }
            let (a1, c1) = (a.scale(1.0 / n1), c.scale(1.0 / n1));
            let mu = b * a1.conj() + d * c1.conj();
            let (b1, d1) = (b - mu * a1, d - mu * c1);
            let n2 = (b1.norm_sq() + d1.norm_sq()).sqrt();
            if n2 < tol::RETRACT_DEGENERATE_ROW {
                return Err(GeoError::DegenerateRow { norm: n2 });
            }
            let mut out = AmbVec::zeros(16);
            set_amb_quat(&mut out, 0, a1);
            set_amb_quat(&mut out, 1, c1);
            set_amb_quat(&mut out, 2, b1.scale(1.0 / n2));
            set_amb_quat(&mut out, 3, d1.scale(1.0 / n2));
            Ok(out)
        }
    }
}

fn model_name(model: Model) -> &'static str {
    match model {
        Model::Minkowski => "minkowski",
        Model::Su2 => "su2",
        Model::S7 => "s7",
        Model::Sp2 => "sp2",
        Model::SigmaRep => "sigma7",
    }
}

/// Retract an ambient tuple onto the constraint set.
///
/// Spheres rescale to unit norm; Sp2 runs quaternionic Gram-Schmidt on the
/// rows. Fails with `NotNearManifold` if the input is farther than 0.1 from
/// the constraint set.
pub fn retract(model: Model, raw: &ManifoldPoint) -> Result<ManifoldPoint> {
    let out = retract_amb(model, &raw.to_amb(), true)?;
    Ok(ManifoldPoint::new(model, amb_to_coords(&out)))
}

/// Retraction without the nearness precondition, for samplers that start from
/// Gaussian ambient tuples.
pub fn retract_far(model: Model, raw: &ManifoldPoint) -> Result<ManifoldPoint> {
    let out = retract_amb(model, &raw.to_amb(), false)?;
    Ok(ManifoldPoint::new(model, amb_to_coords(&out)))
}

pub(crate) fn retract_amb_unchecked(model: Model, x: &AmbVec) -> Result<AmbVec> {
    retract_amb(model, x, false)
}

/// Orthogonal projection (ambient inner product) onto the tangent space at
/// `p`: the null space of the constraint Jacobian. For `SigmaRep`, the result
/// is additionally projected star-horizontal, the canonical representative of
/// a quotient tangent vector. Idempotent.
pub fn project_tangent(p: &ManifoldPoint, v: &Coords) -> TangentVector {
    let out = project_tangent_amb(p.model, &p.to_amb(), &coords_to_amb(v));
    TangentVector::from_amb(p, &out)
}

pub(crate) fn project_tangent_amb(model: Model, x: &AmbVec, v: &AmbVec) -> AmbVec {
    let grads = constraint_grads(model, x);
    let mut out = *v;
    if !grads.is_empty() {
        let k = grads.len();
        let gram = DMatrix::from_fn(k, k, |i, j| grads[i].dot(&grads[j]));
        let rhs = DVector::from_fn(k, |i, _| grads[i].dot(v));
        if let Some(lambda) = linalg::solve(&gram, &rhs) {
            for i in 0..k {
                out = out.axpy(-lambda[i], &grads[i]);
            }
        }
    }
    if model == Model::SigmaRep {
        out = project_star_horizontal(x, &out);
    }
    out
}

/// Subtract the span of the star action fields (ambient-orthogonal within the
/// Sp2 tangent space).
pub(crate) fn project_star_horizontal(x: &AmbVec, v: &AmbVec) -> AmbVec {
    let fields = [
        field_formula_amb(ActionTag::Sp2Star, quat::I, x),
        field_formula_amb(ActionTag::Sp2Star, quat::J, x),
        field_formula_amb(ActionTag::Sp2Star, quat::K, x),
    ];
    let basis = linalg::orthonormalize(&fields, 1e-12);
    let mut out = *v;
    for b in &basis {
        let c = out.dot(b);
        out = out.axpy(-c, b);
    }
    out
}

/// An ambient-orthonormal basis of the tangent space at `p` (star-horizontal
/// for `SigmaRep`), built by projecting ambient basis vectors.
pub fn tangent_basis(p: &ManifoldPoint) -> Vec<TangentVector> {
    let x = p.to_amb();
    let n = x.n;
    let mut proj = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = AmbVec::zeros(n);
        e[j] = 1.0;
        proj.push(project_tangent_amb(p.model, &x, &e));
    }
    let basis = linalg::orthonormalize(&proj, 1e-8);
    debug_assert_eq!(basis.len(), p.model.tangent_dim());
    basis
        .into_iter()
        .map(|b| TangentVector::from_amb(p, &b))
        .collect()
}

// ---------------------------------------------------------------------------
// Group actions
// ---------------------------------------------------------------------------

fn check_group_element(action: ActionTag, q: Quaternion) -> Result<()> {
    let n = q.norm();
    if (n - 1.0).abs() > tol::EPS_MEM {
        return Err(GeoError::BadGroupElement { norm: n });
    }
    if action.circle_scoped() && !q.is_complex(tol::EPS_MEM) {
        return Err(GeoError::BadGroupElement { norm: n });
    }
    Ok(())
}

/// Apply the action of the unit quaternion `q` to `p`.
///
/// All the actions are restrictions of ambient linear isometries, so they
/// preserve membership exactly up to roundoff.
pub fn act(action: ActionTag, q: Quaternion, p: &ManifoldPoint) -> Result<ManifoldPoint> {
    if p.model != action.model() {
        return Err(GeoError::BadConfig(format!(
            "action {action:?} does not act on model {:?}",
            p.model
        )));
    }
    check_group_element(action, q)?;
    Ok(ManifoldPoint::new(p.model, act_coords(action, q, &p.coords)))
}

/// The linear map underlying the action, applied to an arbitrary coordinate
/// tuple (used both for points and for pushing forward tangent vectors).
pub fn act_coords(action: ActionTag, q: Quaternion, c: &Coords) -> Coords {
    let qc = q.conj();
    let mut out = Coords::new();
    match action {
        ActionTag::Su2Conj => out.push(q * c[0] * qc),
        ActionTag::Su2Hopf => out.push(q * c[0]),
        ActionTag::S7Star => {
            out.push(q * c[0] * qc);
            out.push(q * c[1] * qc);
        }
        ActionTag::Sp2Bullet | ActionTag::SigmaBullet => {
            out.push(c[0]);
            out.push(c[1] * qc);
            out.push(c[2]);
            out.push(c[3] * qc);
        }
        ActionTag::Sp2Star => {
            out.push(q * c[0] * qc);
            out.push(q * c[1]);
            out.push(q * c[2] * qc);
            out.push(q * c[3]);
        }
    }
    out
}

/// Derivative of the action at the identity for the algebra element `u`
/// (pure imaginary), applied to an arbitrary tuple. Linear in the tuple, so
/// it also computes ambient directional derivatives of action fields.
pub fn field_formula(action: ActionTag, u: Quaternion, c: &Coords) -> Coords {
    let mut out = Coords::new();
    match action {
        ActionTag::Su2Conj => out.push(u * c[0] - c[0] * u),
        ActionTag::Su2Hopf => out.push(u * c[0]),
        ActionTag::S7Star => {
            out.push(u * c[0] - c[0] * u);
            out.push(u * c[1] - c[1] * u);
        }
        ActionTag::Sp2Bullet | ActionTag::SigmaBullet => {
            out.push(quat::ZERO);
            out.push(-(c[1] * u));
            out.push(quat::ZERO);
            out.push(-(c[3] * u));
        }
        ActionTag::Sp2Star => {
            out.push(u * c[0] - c[0] * u);
            out.push(u * c[1]);
            out.push(u * c[2] - c[2] * u);
            out.push(u * c[3]);
        }
    }
    out
}

pub(crate) fn field_formula_amb(action: ActionTag, u: Quaternion, x: &AmbVec) -> AmbVec {
    coords_to_amb(&field_formula(action, u, &amb_to_coords(x)))
}

/// Action field of the algebra element `u` at `p`, by the central difference
/// of `s ↦ act(qexp(s u), p)` with step [`tol::H_ACT`].
///
/// Vanishes exactly at fixed points. The closed form [`killing_field`] agrees
/// with this to ~1e-8 and is what the metric and curvature paths use.
pub fn action_field(action: ActionTag, u: Quaternion, p: &ManifoldPoint) -> Result<TangentVector> {
    if p.model != action.model() {
        return Err(GeoError::BadConfig(format!(
            "action {action:?} does not act on model {:?}",
            p.model
        )));
    }
    let h = tol::H_ACT;
    let plus = act_coords(action, qexp(u.scale(h)), &p.coords);
    let minus = act_coords(action, qexp(u.scale(-h)), &p.coords);
    let mut diff = coords_to_amb(&plus).sub(&coords_to_amb(&minus)).scale(1.0 / (2.0 * h));
    if p.model == Model::SigmaRep {
        diff = project_star_horizontal(&p.to_amb(), &diff);
    }
    Ok(TangentVector::from_amb(p, &diff))
}

/// Closed-form action field (exact derivative of the linear action). For
/// `SigmaRep` the representative is the star-horizontal part.
pub fn killing_field(action: ActionTag, u: Quaternion, p: &ManifoldPoint) -> TangentVector {
    let mut v = coords_to_amb(&field_formula(action, u, &p.coords));
    if p.model == Model::SigmaRep {
        v = project_star_horizontal(&p.to_amb(), &v);
    }
    TangentVector::from_amb(p, &v)
}

/// The circle generator field (algebra element `i`).
pub fn circle_field(action: ActionTag, p: &ManifoldPoint) -> TangentVector {
    killing_field(action, quat::I, p)
}

/// Orbit tensor value `P = g(K, K) / Q(i, i)` of the circle action at `p`
/// w.r.t. the ambient metric, or `None` where the orbit collapses.
pub fn orbit_tensor_value(p: &ManifoldPoint, action: ActionTag) -> Option<f64> {
    let k = circle_field(action, p);
    let n2 = k.to_amb().dot(&k.to_amb());
    if n2 <= tol::EPS_ORBIT_COLLAPSE {
        None
    } else {
        Some(n2)
    }
}

/// Spanning set of the orbit tangent space at `p` (empty at fixed points).
pub fn vertical_space(action: ActionTag, p: &ManifoldPoint) -> Vec<TangentVector> {
    let gens: &[Quaternion] = if action.circle_scoped() {
        &[quat::I]
    } else {
        &[quat::I, quat::J, quat::K]
    };
    gens.iter()
        .map(|&u| killing_field(action, u, p))
        .filter(|f| f.ambient_norm() > 1e-9)
        .collect()
}

/// Basis of the metric-orthogonal complement of the vertical space inside the
/// tangent space at `p`.
pub fn horizontal_space(
    action: ActionTag,
    p: &ManifoldPoint,
    metric: &MetricSpec,
) -> Result<Vec<TangentVector>> {
    let tangent = tangent_basis(p);
    let d = tangent.len();
    let gram = DMatrix::from_fn(d, d, |i, j| {
        crate::cheeger::metric_eval(metric, &tangent[i], &tangent[j]).unwrap_or(f64::NAN)
    });
    let det = gram.determinant();
    if !det.is_finite() || det.abs() < tol::DEGENERATE_DET {
        return Err(GeoError::DegenerateMetric {
            context: "tangent Gram matrix is singular in horizontal_space",
        });
    }
    let vertical = vertical_space(action, p);
    if vertical.is_empty() {
        return Ok(tangent);
    }
    // Null space of the (vertical × tangent) pairing matrix.
    let a = DMatrix::from_fn(vertical.len(), d, |i, j| {
        crate::cheeger::metric_eval(metric, &tangent[j], &vertical[i]).unwrap_or(f64::NAN)
    });
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax.max(1.0))
        .count();
    let mut out = Vec::new();
    for row in rank..d {
        let mut w = AmbVec::zeros(p.model.ambient_dim());
        for j in 0..d {
            w = w.axpy(v_t[(row, j)], &tangent[j].to_amb());
        }
        out.push(TangentVector::from_amb(p, &w));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Isotropy scan
// ---------------------------------------------------------------------------

/// Isotropy classification measured by a circle grid scan.
#[derive(Debug, Clone, PartialEq)]
pub enum Isotropy {
    Trivial,
    Z2,
    FullCircle,
    Other(Vec<f64>),
}

/// Evaluate the circle action on a uniform grid of `n_grid` angles and
/// classify the set of angles that move `p` by less than [`tol::EPS_FIX`].
pub fn isotropy_scan(
    action: ActionTag,
    p: &ManifoldPoint,
    n_grid: usize,
) -> Result<Isotropy> {
    if n_grid < 360 {
        return Err(GeoError::BadConfig(format!(
            "isotropy scan needs n_grid >= 360, got {n_grid}"
        )));
    }
    if p.model == Model::SigmaRep {
        return Err(GeoError::BadConfig(
            "isotropy scan on star-orbit representatives requires the quotient orbit distance; \
             use starbundle::sigma_isotropy_scan"
                .into(),
        ));
    }
    let x = p.to_amb();
    let mut fixed = Vec::new();
    for k in 0..n_grid {
        let theta = std::f64::consts::TAU * (k as f64) / (n_grid as f64);
        let q = qexp(quat::I.scale(theta));
        let moved = act_coords(action, q, &p.coords);
        let disp = coords_to_amb(&moved).sub(&x).norm();
        if disp < tol::EPS_FIX {
            fixed.push((k, theta));
        }
    }
    Ok(classify_fixed_angles(&fixed, n_grid))
}

fn classify_fixed_angles(fixed: &[(usize, f64)], n_grid: usize) -> Isotropy {
    if fixed.len() == n_grid {
        return Isotropy::FullCircle;
    }
    match fixed {
        [(0, _)] => Isotropy::Trivial,
        [(0, _), (k, _)] if n_grid % 2 == 0 && *k == n_grid / 2 => Isotropy::Z2,
        _ => Isotropy::Other(fixed.iter().map(|&(_, t)| t).collect()),
    }
}

// ---------------------------------------------------------------------------
// Minkowski metric
// ---------------------------------------------------------------------------

/// Flat Lorentzian metric on ℍ in the lift parametrization,
/// `-t' t'' c² + ⟨Im v, Im w⟩` with `c² = r⁻⁴(r² - 1)`; the `t`-components
/// are the real parts. Requires `r > 1`.
pub fn minkowski_metric(v: &TangentVector, w: &TangentVector, r: f64) -> Result<f64> {
    if r <= 1.0 {
        return Err(GeoError::BadParameter {
            context: "minkowski metric requires r > 1",
        });
    }
    if v.base != w.base {
        return Err(GeoError::BadConfig(
            "metric arguments based at different points".into(),
        ));
    }
    let c2 = (r * r - 1.0) / r.powi(4);
    let (p, q) = (v.ambient[0], w.ambient[0]);
    Ok(-p.re() * q.re() * c2 + inner(p.im(), q.im()))
}
