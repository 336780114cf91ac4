//! Cheeger deformation machinery with negative parameter.
//!
//! A circle action with orbit tensor `P` deforms the base metric `g` into
//! `g_t(v, w) = g(C_t v, w)` where `C_t` rescales the vertical part by
//! `(1 + tP)⁻¹`. For `t = -r²` with `r²P > 1` the vertical direction turns
//! time-like and the metric is Lorentzian on the regular stratum. This module
//! evaluates the deformed metrics, their closed-form sectional and Ricci
//! curvature, causal classification, and the fixed-point metric extension.

use crate::curvature;
use crate::error::{GeoError, Result};
use crate::models::{
    self, ActionTag, ManifoldPoint, Model, TangentVector,
};
use crate::quat;
use crate::tol;
use serde::{Deserialize, Serialize};

/// Causal type of a tangent vector under a semi-Riemannian metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalClass {
    TimeLike,
    LightLike,
    SpaceLike,
    Zero,
}

/// Which metric to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Restriction of the ambient quaternionic inner product.
    Ambient,
    /// Cheeger deformation of the ambient metric along a circle action.
    /// On the Minkowski model this is the flat Lorentzian metric
    /// `diag(-c², 1, 1, 1)` with `c² = r⁻⁴(r² - 1)`, `r² = -t`.
    Cheeger(f64),
    /// Globally non-degenerate Lorentzian metric that rescales a unit line
    /// field by `(1 + t)⁻¹`; on Su2 the line is `i·a`, on S7 `(i·a, i·b)`.
    /// At fixed points of the conjugation actions the line field is a
    /// fake-horizontal direction, so this extends the Cheeger metric's causal
    /// structure across the collapsed locus.
    FixedLorentz(f64),
    /// Kaluza-Klein bundle metric; evaluated in `starbundle`.
    KaluzaKlein(f64),
    /// Riemannian quotient metric on star-orbit representatives
    /// (equals `Ambient` on star-horizontal vectors).
    QuotientSubmersion,
}

/// A metric specification: kind plus the model/action it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub model: Model,
    pub action: Option<ActionTag>,
}

impl MetricSpec {
    pub fn ambient(model: Model) -> Self {
        Self {
            kind: MetricKind::Ambient,
            model,
            action: None,
        }
    }

    pub fn cheeger(model: Model, action: ActionTag, t: f64) -> Self {
        Self {
            kind: MetricKind::Cheeger(t),
            model,
            action: Some(action),
        }
    }

    pub fn fixed_lorentz(model: Model, t: f64) -> Self {
        Self {
            kind: MetricKind::FixedLorentz(t),
            model,
            action: None,
        }
    }

    pub fn quotient() -> Self {
        Self {
            kind: MetricKind::QuotientSubmersion,
            model: Model::SigmaRep,
            action: Some(ActionTag::SigmaBullet),
        }
    }

    /// The circle action the deformation refers to, defaulting to the
    /// model's standard one for monitors that need a Killing field.
    pub fn action_or_default(&self) -> Option<ActionTag> {
        self.action.or(match self.model {
            Model::Su2 => Some(ActionTag::Su2Conj),
            Model::S7 => Some(ActionTag::S7Star),
            Model::SigmaRep => Some(ActionTag::SigmaBullet),
            Model::Sp2 => Some(ActionTag::Sp2Bullet),
            Model::Minkowski => None,
        })
    }
}

/// Orbit tensor of a circle action at a point: `g(U*, V*) = Q(P U, V)`.
/// For the one-dimensional algebra this is the scalar `P = g(K, K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitTensor {
    /// 0 at fixed points, 1 on the regular stratum.
    pub dim: usize,
    pub value: f64,
}

/// Orbit tensor at `p` with respect to `base` (Riemannian there).
pub fn orbit_tensor(
    p: &ManifoldPoint,
    action: ActionTag,
    base: &MetricSpec,
) -> Result<OrbitTensor> {
    let k = models::circle_field(action, p);
    if k.to_amb().dot(&k.to_amb()) <= tol::EPS_ORBIT_COLLAPSE {
        return Ok(OrbitTensor { dim: 0, value: 0.0 });
    }
    let value = metric_eval(base, &k, &k)?;
    Ok(OrbitTensor { dim: 1, value })
}

/// Deformed orbit tensor `P_t = P (1 + tP)⁻¹`.
pub fn p_t(p: OrbitTensor, t: f64) -> Result<f64> {
    if p.dim == 0 {
        return Err(GeoError::DegenerateMetric {
            context: "orbit tensor has rank zero at a fixed point",
        });
    }
    let denom = 1.0 + t * p.value;
    if denom.abs() < tol::DEGENERATE_DET {
        return Err(GeoError::SingularDeformation {
            magnitude: denom.abs(),
        });
    }
    Ok(p.value / denom)
}

/// Split `v` into its base-metric horizontal part and vertical coefficient:
/// `v = X + u·K` with `X ⊥ K`. Returns `(X, u, K, P)`.
pub(crate) fn vertical_split(
    action: ActionTag,
    v: &TangentVector,
) -> Option<(TangentVector, f64, TangentVector, f64)> {
    let k = models::circle_field(action, &v.base);
    let p = k.dot(&k);
    if p <= tol::EPS_ORBIT_COLLAPSE {
        return None;
    }
    let u = v.dot(&k) / p;
    let x = v.sub(&k.scale(u));
    Some((x, u, k, p))
}

/// Metric tensor application `C_t(X + U*) = X + ((1 + tP)⁻¹ U)*`.
///
/// At fixed points the vertical space is empty and `C_t` is the identity.
pub fn c_t_apply(
    v: &TangentVector,
    t: f64,
    action: ActionTag,
    _base: &MetricSpec,
) -> Result<TangentVector> {
    match vertical_split(action, v) {
        None => Ok(v.clone()),
        Some((x, u, k, p)) => {
            let denom = 1.0 + t * p;
            if denom.abs() < tol::DEGENERATE_DET {
                return Err(GeoError::SingularDeformation {
                    magnitude: denom.abs(),
                });
            }
            Ok(x.add(&k.scale(u / denom)))
        }
    }
}

/// Inverse reparametrization `C_t⁻¹(X + U*) = X + ((1 + tP) U)*`.
pub fn c_t_inverse_apply(
    v: &TangentVector,
    t: f64,
    action: ActionTag,
) -> TangentVector {
    match vertical_split(action, v) {
        None => v.clone(),
        Some((x, u, k, p)) => x.add(&k.scale(u * (1.0 + t * p))),
    }
}

/// Evaluate the metric `spec` on two tangent vectors at the same base point.
pub fn metric_eval(spec: &MetricSpec, v: &TangentVector, w: &TangentVector) -> Result<f64> {
    if v.base != w.base {
        return Err(GeoError::BadConfig(
            "metric arguments based at different points".into(),
        ));
    }
    let ambient = v.dot(w);
    match spec.kind {
        MetricKind::Ambient | MetricKind::QuotientSubmersion => Ok(ambient),
        MetricKind::Cheeger(t) if t == 0.0 => Ok(ambient),
        MetricKind::Cheeger(t) => {
            if spec.model == Model::Minkowski {
                // Flat Lorentzian tensor in the lift parametrization.
                let r2 = -t;
                if r2 <= 1.0 {
                    return Err(GeoError::BadParameter {
                        context: "Minkowski deformation requires t = -r² with r² > 1",
                    });
                }
                let r = r2.sqrt();
                return models::minkowski_metric(v, w, r);
            }
            let action = spec.action.ok_or(GeoError::BadConfig(
                "Cheeger metric needs an action".into(),
            ))?;
            match vertical_split(action, v) {
                None => Err(GeoError::DegenerateMetric {
                    context: "Cheeger deformation at a fixed point; use FixedLorentz there",
                }),
                Some((xv, uv, k, p)) => {
                    let denom = 1.0 + t * p;
                    if denom.abs() < tol::DEGENERATE_DET {
                        return Err(GeoError::DegenerateMetric {
                            context: "deformation parameter hits the signature-switch locus",
                        });
                    }
                    let uw = w.dot(&k) / p;
                    let xw = w.sub(&k.scale(uw));
                    Ok(xv.dot(&xw) + uv * uw * p / denom)
                }
            }
        }
        MetricKind::FixedLorentz(t) => {
            let denom = 1.0 + t;
            if denom.abs() < tol::DEGENERATE_DET {
                return Err(GeoError::DegenerateMetric {
                    context: "fixed metric requires 1 + t != 0",
                });
            }
            let line = fixed_line_field(&v.base)?;
            let lv = v.dot(&line);
            let lw = w.dot(&line);
            Ok(ambient + (1.0 / denom - 1.0) * lv * lw)
        }
        MetricKind::KaluzaKlein(_) => Err(GeoError::BadConfig(
            "Kaluza-Klein metrics are evaluated through starbundle::kaluza_klein_eval".into(),
        )),
    }
}

/// Unit line field rescaled by the fixed metric: `i·a` on Su2, `(i·a, i·b)`
/// on S7. Both are global, invariant under the conjugation circle, and agree
/// with the fake-horizontal direction at the action's fixed points.
fn fixed_line_field(p: &ManifoldPoint) -> Result<TangentVector> {
    let mut c = models::Coords::new();
    match p.model {
        Model::Su2 => c.push(quat::I * p.coords[0]),
        Model::S7 => {
            c.push(quat::I * p.coords[0]);
            c.push(quat::I * p.coords[1]);
        }
        _ => {
            return Err(GeoError::BadConfig(
                "fixed Lorentzian metric is defined on Su2 and S7".into(),
            ))
        }
    }
    Ok(TangentVector::new(p.clone(), c))
}

/// Causal classification of `v` under `spec`, with a ±[`tol::EPS_NULL`] band
/// for the light-like case.
pub fn causal_classify(spec: &MetricSpec, v: &TangentVector) -> Result<CausalClass> {
    if v.ambient_norm() < 1e-12 {
        return Ok(CausalClass::Zero);
    }
    let q = metric_eval(spec, v, v)?;
    Ok(if q < -tol::EPS_NULL {
        CausalClass::TimeLike
    } else if q > tol::EPS_NULL {
        CausalClass::SpaceLike
    } else {
        CausalClass::LightLike
    })
}

// ---------------------------------------------------------------------------
// Closed-form curvature of the deformed metric
// ---------------------------------------------------------------------------

/// Ingredients of the `z_t` term at a point, for circle actions.
///
/// With `v = X + U·K`, `w = Y + V·K` the quantity
/// `β = -g(∇_X K, Y) + (U/2) dP(Y) - (V/2) dP(X)` is antisymmetric and
/// `z_t = 3t (1 + tP)⁻¹ β²`. The `dP` terms vanish when the orbit tensor is
/// constant, recovering the usual `3t ||(1+tP)^{-1/2} P ∇^v_X Y||²` shape of
/// the deformation formula; with a position-dependent `P` they are required
/// for the closed form to match the finite-difference oracle.
fn z_beta(action: ActionTag, v: &TangentVector, w: &TangentVector) -> Result<f64> {
    if action == ActionTag::SigmaBullet {
        return Err(GeoError::BadConfig(
            "closed-form deformation curvature is provided for the embedded circle actions".into(),
        ));
    }
    let (xv, uv, k, _p) =
        vertical_split(action, v).ok_or(GeoError::DegenerateMetric {
            context: "z_t at a fixed point",
        })?;
    let (xw, uw, _, _) = vertical_split(action, w).unwrap();
    let base = &v.base;
    // ∇_X K: the Killing field is linear in the ambient point, so its ambient
    // derivative along X is the same linear formula applied to X; pairing
    // against the tangent vector Y needs no projection.
    let dk_x = TangentVector::new(
        base.clone(),
        models::field_formula(action, quat::I, &xv.ambient),
    );
    // dP(Z) = 2 <D_Z K, K>
    let dp_x = 2.0 * grad_k_dot(action, &xv, &k);
    let dp_y = 2.0 * grad_k_dot(action, &xw, &k);
    let beta = -dk_x.dot(&xw) + 0.5 * uv * dp_y - 0.5 * uw * dp_x;
    Ok(beta)
}

fn grad_k_dot(action: ActionTag, z: &TangentVector, k: &TangentVector) -> f64 {
    let dk = models::field_formula(action, quat::I, &z.ambient);
    TangentVector::new(z.base.clone(), dk).dot(k)
}

/// The deformation correction `z_t(v, w)`; non-negative for `t ≥ 0` and for
/// the Lorentzian regime `t = -r²`, `r²P > 1`.
pub fn z_t(
    v: &TangentVector,
    w: &TangentVector,
    t: f64,
    action: ActionTag,
    _base: &MetricSpec,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let (_, _, _, p) = vertical_split(action, v).ok_or(GeoError::DegenerateMetric {
        context: "z_t at a fixed point",
    })?;
    let denom = 1.0 + t * p;
    if denom.abs() < tol::DEGENERATE_DET {
        return Err(GeoError::SingularDeformation {
            magnitude: denom.abs(),
        });
    }
    let beta = z_beta(action, v, w)?;
    Ok(3.0 * t / denom * beta * beta)
}

/// Unreduced sectional curvature of the base metric on the plane `(v, w)`.
///
/// Exact for the round sphere models; the quotient metric on star-orbit
/// representatives goes through the finite-difference oracle.
pub fn kappa_0(v: &TangentVector, w: &TangentVector, base: &MetricSpec) -> Result<f64> {
    match (base.kind, base.model) {
        (MetricKind::Ambient, Model::Su2) | (MetricKind::Ambient, Model::S7) => {
            let g_vv = v.dot(v);
            let g_ww = w.dot(w);
            let g_vw = v.dot(w);
            Ok(g_vv * g_ww - g_vw * g_vw)
        }
        (MetricKind::Ambient, Model::Minkowski) => Ok(0.0),
        _ => curvature::unreduced_sectional_numeric(base, v, w),
    }
}

/// Closed-form unreduced sectional curvature of the deformed metric on the
/// `C_t⁻¹`-reparametrized plane:
/// `κ_t(v, w) = R_{g_t}(C_t⁻¹v, C_t⁻¹w, C_t⁻¹w, C_t⁻¹v) = κ₀(v, w) + z_t(v, w)`
/// (the Lie-bracket term vanishes identically for the abelian circle algebra).
pub fn kappa_t(
    v: &TangentVector,
    w: &TangentVector,
    t: f64,
    action: ActionTag,
    base: &MetricSpec,
) -> Result<f64> {
    let k0 = kappa_0(v, w, base)?;
    if t == 0.0 {
        return Ok(k0);
    }
    Ok(k0 + z_t(v, w, t, action, base)?)
}

// ---------------------------------------------------------------------------
// Closed-form Ricci curvature
// ---------------------------------------------------------------------------

/// Frame data shared by the closed-form Ricci evaluations: a base-metric
/// orthonormal horizontal basis plus the unit vertical direction.
struct RicciFrame {
    horizontal: Vec<TangentVector>,
    e_vert: TangentVector,
}

fn ricci_frame(p: &ManifoldPoint, action: ActionTag) -> Result<RicciFrame> {
    let base = MetricSpec::ambient(p.model);
    let k = models::circle_field(action, p);
    let p_val = k.dot(&k);
    if p_val <= tol::EPS_ORBIT_COLLAPSE {
        return Err(GeoError::DegenerateMetric {
            context: "closed-form Ricci at a fixed point",
        });
    }
    let horizontal = models::horizontal_space(action, p, &base)?;
    let horizontal = orthonormalize_tangent(p, &horizontal);
    Ok(RicciFrame {
        horizontal,
        e_vert: k.scale(1.0 / p_val.sqrt()),
    })
}

fn orthonormalize_tangent(p: &ManifoldPoint, vecs: &[TangentVector]) -> Vec<TangentVector> {
    let raw: Vec<_> = vecs.iter().map(|v| v.to_amb()).collect();
    crate::linalg::orthonormalize(&raw, 1e-10)
        .into_iter()
        .map(|b| TangentVector::from_amb(p, &b))
        .collect()
}

/// Terms of the deformed-metric Ricci display, computed numerically.
#[derive(Debug, Clone)]
pub struct RicciTerms {
    /// Horizontal Ricci of the base metric, `Σ_i R(e_i, X, X, e_i)`.
    pub ric_h: f64,
    /// `Σ_i |A*_{e_i} U*|²` over the horizontal frame.
    pub sum_astar_vert: f64,
    /// `|A*_X e_vert|²`.
    pub astar_x_vert: f64,
    /// `Σ_i |A_X e_i|²`.
    pub sum_a_x: f64,
}

fn ricci_terms(
    p: &ManifoldPoint,
    action: ActionTag,
    x: &TangentVector,
    u_star: &TangentVector,
    frame: &RicciFrame,
) -> Result<RicciTerms> {
    let base = MetricSpec::ambient(p.model);
    let ric_h = curvature::horizontal_ricci_numeric(&base, x, &frame.horizontal)?;
    let mut sum_astar_vert = 0.0;
    let mut sum_a_x = 0.0;
    for e in &frame.horizontal {
        let astar = curvature::a_star(e, u_star, action, &base)?;
        sum_astar_vert += astar.dot(&astar);
        let a = curvature::oneill_a(x, e, action, &base)?;
        sum_a_x += a.dot(&a);
    }
    let astar_xv = curvature::a_star(x, &frame.e_vert, action, &base)?;
    Ok(RicciTerms {
        ric_h,
        sum_astar_vert,
        astar_x_vert: astar_xv.dot(&astar_xv),
        sum_a_x,
    })
}

/// Assemble the deformed-metric Ricci value from its terms; shared by the
/// Su2 and the general display (they are algebraically equal).
pub fn ricci_display(terms: &RicciTerms, r: f64) -> f64 {
    let f = 1.0 - r * r; // negative in the Lorentzian regime
    terms.ric_h + terms.sum_astar_vert / (f * f) - terms.astar_x_vert / f
        - 3.0 * r * r / f * terms.sum_a_x
}

/// Closed-form Ricci of the `-r²` deformation on Su2 with the conjugation
/// action: `Ric^h(X) + (1-r²)⁻²Σ|A*_{e_i}U*|² - (1-r²)⁻¹|A*_X e₃|²
/// - 3r²(1-r²)⁻¹Σ|A_X e_i|²` with numerically computed ingredients.
pub fn ricci_closed_su2(v: &TangentVector, r: f64) -> Result<f64> {
    ricci_closed_general(v, r, Model::Su2, ActionTag::Su2Conj)
}

/// The same display for any circle action, with
/// `Ric_{M/G}(X) = Ric^h(X) + 3 Σ|A_X e_i|²` folded back in.
pub fn ricci_closed_general(
    v: &TangentVector,
    r: f64,
    model: Model,
    action: ActionTag,
) -> Result<f64> {
    if r * r <= 1.0 {
        return Err(GeoError::BadParameter {
            context: "closed-form Ricci requires r² > 1",
        });
    }
    if v.base.model != model {
        return Err(GeoError::BadConfig("vector is not on the stated model".into()));
    }
    let p = &v.base;
    let frame = ricci_frame(p, action)?;
    let (x, u, k, p_val) = vertical_split(action, v).ok_or(GeoError::DegenerateMetric {
        context: "closed-form Ricci at a fixed point",
    })?;
    let _ = p_val;
    let u_star = k.scale(u);
    let terms = ricci_terms(p, action, &x, &u_star, &frame)?;
    Ok(ricci_display(&terms, r))
}

/// A tangent vector on the product `M × S¹` with the metric `g - r⁻²Q`.
#[derive(Debug, Clone)]
pub struct ProductTangent {
    /// Component along `M` in ambient coordinates.
    pub m_part: TangentVector,
    /// Coefficient of the unit circle direction.
    pub circle_part: f64,
}

/// Terms of the product-metric Ricci display.
#[derive(Debug, Clone)]
pub struct ProductRicciTerms {
    pub ric_h: f64,
    /// `|A*_X e_n*|²` (vertizontal curvature coefficient term).
    pub astar_x_vert: f64,
    /// `Σ_i |A*_{e_i} W*|²`.
    pub sum_astar_w: f64,
    /// `Σ_i |A*_{e_i} U*|²`.
    pub sum_astar_u: f64,
    /// `Σ_i g(A_X(A*_{e_i} e_n*), r⁻²W* + U*)`.
    pub cross: f64,
}

/// Assemble the product display
/// `{((r²-1)(n-1)+r⁶)/(r⁴(r²-1))}|A*_X e_n*|² + Ric^h(X)
/// + r⁻²{Σ|A*_{e_i}W*|² + |A*_{e_i}U*|²} + 4r⁻² Σ g(A_X(A*_{e_i}e_n*), r⁻²W*+U*)`.
pub fn ricci_product_display(terms: &ProductRicciTerms, r: f64, n: usize) -> f64 {
    let r2 = r * r;
    let coeff = ((r2 - 1.0) * (n as f64 - 1.0) + r2.powi(3)) / (r2 * r2 * (r2 - 1.0));
    coeff * terms.astar_x_vert
        + terms.ric_h
        + (terms.sum_astar_w + terms.sum_astar_u) / r2
        + 4.0 / r2 * terms.cross
}

/// Closed-form Ricci of `(M × S¹, g - r⁻²Q)` evaluated through the twisted
/// splitting: vertical `{(U*, U)}`, horizontal `{(X + r⁻²W*, W)}`. The
/// display's derivation assumes unit orbit tensor and totally geodesic
/// fibers, so the action must have `P ≈ 1` (the free Hopf action).
pub fn ricci_product(
    v: &ProductTangent,
    r: f64,
    model: Model,
    action: ActionTag,
) -> Result<f64> {
    if r * r <= 1.0 {
        return Err(GeoError::BadParameter {
            context: "product Ricci requires r² > 1",
        });
    }
    let p = &v.m_part.base;
    if p.model != model {
        return Err(GeoError::BadConfig("vector is not on the stated model".into()));
    }
    let (_, _, k, p_val) =
        vertical_split(action, &v.m_part).ok_or(GeoError::NotPrincipal)?;
    if (p_val - 1.0).abs() > 1e-6 {
        return Err(GeoError::BadConfig(
            "product display assumes a unit orbit tensor (use the free Hopf action)".into(),
        ));
    }
    let r2 = r * r;
    // Decompose (ξ, s): U from orthogonality against (K, 1) in g - r⁻²Q,
    // then W = s - U and X = ξ - (U + r⁻²W)·K.
    let xi_k = v.m_part.dot(&k);
    let u = (xi_k - v.circle_part / r2) / (1.0 - 1.0 / r2);
    let w = v.circle_part - u;
    let x = v.m_part.sub(&k.scale(u + w / r2));
    let terms = ricci_product_terms(p, action, &x, w, u, &k, r)?;
    let n = p.model.tangent_dim();
    Ok(ricci_product_display(&terms, r, n))
}

fn ricci_product_terms(
    p: &ManifoldPoint,
    action: ActionTag,
    x: &TangentVector,
    w: f64,
    u: f64,
    k: &TangentVector,
    r: f64,
) -> Result<ProductRicciTerms> {
    let base = MetricSpec::ambient(p.model);
    let frame = ricci_frame(p, action)?;
    let ric_h = curvature::horizontal_ricci_numeric(&base, x, &frame.horizontal)?;
    let astar_xv = curvature::a_star(x, &frame.e_vert, action, &base)?;
    // r⁻²W* + U* against which the cross term pairs
    let mix = k.scale(w / (r * r) + u);
    let mut sum_astar_w = 0.0;
    let mut sum_astar_u = 0.0;
    let mut cross = 0.0;
    for e in &frame.horizontal {
        let astar_w = curvature::a_star(e, &k.scale(w), action, &base)?;
        sum_astar_w += astar_w.dot(&astar_w);
        let astar_u = curvature::a_star(e, &k.scale(u), action, &base)?;
        sum_astar_u += astar_u.dot(&astar_u);
        let astar_en = curvature::a_star(e, &frame.e_vert, action, &base)?;
        let a_x = curvature::oneill_a(x, &astar_en, action, &base)?;
        cross += a_x.dot(&mix);
    }
    Ok(ProductRicciTerms {
        ric_h,
        astar_x_vert: astar_xv.dot(&astar_xv),
        sum_astar_w,
        sum_astar_u,
        cross,
    })
}

// ---------------------------------------------------------------------------
// Fixed-point metric extension
// ---------------------------------------------------------------------------

/// Evaluate the fixed metric `g̃ = g|_{span{X}⊥} + (1-r²)⁻¹ g|_{span{X}}`
/// at a fixed point of the action, given a fake-horizontal direction `X`.
pub fn fixed_metric_eval(
    action: ActionTag,
    v: &TangentVector,
    w: &TangentVector,
    r: f64,
    chosen_x: &TangentVector,
) -> Result<f64> {
    let p = &v.base;
    if !models::vertical_space(action, p).is_empty() {
        return Err(GeoError::NotFixedPoint);
    }
    if crate::geodesic::fake_horizontal_classify(action, p, chosen_x)?
        != crate::geodesic::FakeHorizontal::FullAlgebra
    {
        return Err(GeoError::BadDirection);
    }
    let f = 1.0 - r * r;
    let xn = chosen_x.ambient_norm();
    let xhat = chosen_x.scale(1.0 / xn);
    let lv = v.dot(&xhat);
    let lw = w.dot(&xhat);
    Ok(v.dot(w) + (1.0 / f - 1.0) * lv * lw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ManifoldPoint, Model};
    use crate::quat::{qexp, I, J, K, ONE};
    use crate::sample::Sampler;
    use approx::assert_relative_eq;

    fn su2_tangent(p: &ManifoldPoint, q: quat::Quaternion) -> TangentVector {
        let mut c = models::Coords::new();
        c.push(q);
        models::project_tangent(p, &c)
    }

    #[test]
    fn orbit_tensor_examples() {
        let base = MetricSpec::ambient(Model::Su2);
        let t = orbit_tensor(&ManifoldPoint::su2(J), ActionTag::Su2Conj, &base).unwrap();
        assert_eq!(t.dim, 1);
        assert_relative_eq!(t.value, 4.0, epsilon = 1e-13);
        let t = orbit_tensor(&ManifoldPoint::su2(ONE), ActionTag::Su2Conj, &base).unwrap();
        assert_eq!(t.dim, 0);
        // Hopf: constant along the manifold
        let mut rng = Sampler::new(11);
        for _ in 0..200 {
            let p = rng.point(Model::Su2);
            let t = orbit_tensor(&p, ActionTag::Su2Hopf, &base).unwrap();
            assert_relative_eq!(t.value, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn p_t_substitutions() {
        let p1 = OrbitTensor { dim: 1, value: 1.0 };
        assert_relative_eq!(p_t(p1, -2.0).unwrap(), -1.0);
        assert_relative_eq!(p_t(p1, 0.0).unwrap(), 1.0);
        let p4 = OrbitTensor { dim: 1, value: 4.0 };
        assert_relative_eq!(p_t(p4, -1.0).unwrap(), -4.0 / 3.0);
        assert!(matches!(
            p_t(p1, -1.0),
            Err(GeoError::SingularDeformation { .. })
        ));
    }

    #[test]
    fn c_t_apply_cases() {
        let base = MetricSpec::ambient(Model::Su2);
        // point with unit orbit tensor: a = (√3/2, 0, 1/2, 0)
        let a = quat::Quaternion::new(3.0f64.sqrt() / 2.0, 0.0, 0.5, 0.0);
        let p = ManifoldPoint::su2(a);
        let k = models::circle_field(ActionTag::Su2Conj, &p);
        assert_relative_eq!(k.dot(&k), 1.0, epsilon = 1e-14);
        // vertical rescales by (1 - r²)⁻¹ = -1 at r² = 2
        let ct = c_t_apply(&k, -2.0, ActionTag::Su2Conj, &base).unwrap();
        assert!(ct.add(&k).ambient_norm() < 1e-12);
        // horizontal vectors are untouched
        let h = models::horizontal_space(ActionTag::Su2Conj, &p, &base).unwrap();
        for v in &h {
            let ct = c_t_apply(v, -2.0, ActionTag::Su2Conj, &base).unwrap();
            assert!(ct.sub(v).ambient_norm() < 1e-12);
        }
    }

    #[test]
    fn metric_eval_symmetric_bilinear_and_s1_invariant() {
        let mut rng = Sampler::new(13);
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        for _ in 0..200 {
            let p = rng.principal_point(Model::Su2, ActionTag::Su2Conj, -2.0);
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            let vw = metric_eval(&spec, &v, &w).unwrap();
            let wv = metric_eval(&spec, &w, &v).unwrap();
            assert_relative_eq!(vw, wv, epsilon = 1e-10);
            // bilinearity
            let s = rng.uniform(-2.0, 2.0);
            let sv = metric_eval(&spec, &v.scale(s), &w).unwrap();
            assert_relative_eq!(sv, s * vw, epsilon = 1e-9 * (1.0 + vw.abs()));
            // invariance under the action differential (the action is linear)
            let q = rng.circle_element();
            let p2 = models::act(ActionTag::Su2Conj, q, &p).unwrap();
            let dv = TangentVector::new(p2.clone(), models::act_coords(ActionTag::Su2Conj, q, &v.ambient));
            let dw = TangentVector::new(p2.clone(), models::act_coords(ActionTag::Su2Conj, q, &w.ambient));
            let moved = metric_eval(&spec, &dv, &dw).unwrap();
            assert_relative_eq!(moved, vw, epsilon = 1e-8 * (1.0 + vw.abs()));
        }
    }

    #[test]
    fn metric_eval_vertical_unit_frozen_value() {
        // vertical unit with P = 1: value 1/(1-2) = -1
        let a = quat::Quaternion::new(3.0f64.sqrt() / 2.0, 0.0, 0.5, 0.0);
        let p = ManifoldPoint::su2(a);
        let k = models::circle_field(ActionTag::Su2Conj, &p);
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        assert_relative_eq!(metric_eval(&spec, &k, &k).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn metric_eval_t_zero_is_base() {
        let mut rng = Sampler::new(17);
        for _ in 0..100 {
            let p = rng.point(Model::Su2);
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, 0.0);
            assert_eq!(metric_eval(&spec, &v, &w).unwrap(), v.dot(&w));
        }
    }

    #[test]
    fn metric_eval_errors_at_fixed_points() {
        let p = ManifoldPoint::su2(ONE);
        let v = su2_tangent(&p, I);
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        assert!(matches!(
            metric_eval(&spec, &v, &v),
            Err(GeoError::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn su2_explicit_display_matches_c_t_route() {
        // Frozen cross-check at a = j, v = w = 2k, r² = 2: both routes -4/7.
        let p = ManifoldPoint::su2(J);
        let v = su2_tangent(&p, K.scale(2.0));
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        let via_ct = metric_eval(&spec, &v, &v).unwrap();
        assert_relative_eq!(via_ct, -4.0 / 7.0, epsilon = 1e-12);
        let via_display = su2_display_eval(&v, &v, 2.0f64.sqrt());
        assert_relative_eq!(via_display, -4.0 / 7.0, epsilon = 1e-12);
        // random agreement
        let mut rng = Sampler::new(19);
        for _ in 0..300 {
            let p = rng.principal_point(Model::Su2, ActionTag::Su2Conj, -2.0);
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            let a = metric_eval(&spec, &v, &w).unwrap();
            let b = su2_display_eval(&v, &w, 2.0f64.sqrt());
            assert_relative_eq!(a, b, epsilon = 1e-9 * (1.0 + a.abs()));
        }
    }

    /// Independent evaluation through the explicit coordinate display
    /// `⟨X, Y⟩ - t t' r⁻²` with `v = X i a + t (i a - a i)` and the lift
    /// constraint `Re((1 + a i ā i) X̄) = -r⁻² t`.
    fn su2_display_eval(v: &TangentVector, w: &TangentVector, r: f64) -> f64 {
        let a = v.base.coords[0];
        let decompose = |vec: &TangentVector| -> (quat::Quaternion, f64) {
            let k = I * a - a * I;
            let ia_inv = (I * a).conj();
            // X(t) = (v - t K)(i a)⁻¹; f(t) = Re((1 + a i ā i) conj(X)) + r⁻² t
            let coeff = ONE + a * I * a.conj() * I;
            let f = |t: f64| -> f64 {
                let x = (vec.ambient[0] - k.scale(t)) * ia_inv;
                (coeff * x.conj()).re() + t / (r * r)
            };
            // linear in t: solve by two evaluations
            let f0 = f(0.0);
            let f1 = f(1.0);
            let t = -f0 / (f1 - f0);
            let x = (vec.ambient[0] - k.scale(t)) * ia_inv;
            (x, t)
        };
        let (x, t) = decompose(v);
        let (y, t2) = decompose(w);
        crate::quat::inner(x, y) - t * t2 / (r * r)
    }

    #[test]
    fn causal_classification_cases() {
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        let p = ManifoldPoint::su2(J);
        let k = models::circle_field(ActionTag::Su2Conj, &p);
        assert_eq!(causal_classify(&spec, &k).unwrap(), CausalClass::TimeLike);
        let h = models::horizontal_space(ActionTag::Su2Conj, &p, &MetricSpec::ambient(Model::Su2))
            .unwrap();
        assert_eq!(causal_classify(&spec, &h[0]).unwrap(), CausalClass::SpaceLike);
        // tune the mixing coefficient for a null vector:
        // |X|² + u² P/(1-r²P) = 0
        let p_val = k.dot(&k);
        let x = &h[0];
        let u = (-x.dot(x) * (1.0 - 2.0 * p_val) / p_val).sqrt();
        let null = x.add(&k.scale(u / p_val.sqrt() / p_val.sqrt() * p_val));
        let q = metric_eval(&spec, &null, &null).unwrap();
        // construction check, then classification
        assert!(q.abs() < 1e-9, "null construction q = {q}");
        assert_eq!(causal_classify(&spec, &null).unwrap(), CausalClass::LightLike);
        assert_eq!(
            causal_classify(&spec, &TangentVector::zero(&p)).unwrap(),
            CausalClass::Zero
        );
    }

    #[test]
    fn z_t_sign_and_zero_cases() {
        let mut rng = Sampler::new(23);
        let base = MetricSpec::ambient(Model::Su2);
        for _ in 0..100 {
            let p = rng.point(Model::Su2);
            if models::orbit_tensor_value(&p, ActionTag::Su2Conj).is_none() {
                continue;
            }
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            assert_eq!(z_t(&v, &w, 0.0, ActionTag::Su2Conj, &base).unwrap(), 0.0);
            for t in [0.5, 1.0, 2.0] {
                let z = z_t(&v, &w, t, ActionTag::Su2Conj, &base).unwrap();
                assert!(z >= 0.0, "z_t must be non-negative for t >= 0, got {z}");
            }
        }
    }

    #[test]
    fn kappa_round_unit_sphere() {
        let mut rng = Sampler::new(29);
        let base = MetricSpec::ambient(Model::Su2);
        let p = rng.point(Model::Su2);
        let h = models::horizontal_space(ActionTag::Su2Conj, &p, &base).unwrap();
        let on = super::orthonormalize_tangent(&p, &h);
        let k = kappa_t(&on[0], &on[1], 0.0, ActionTag::Su2Conj, &base).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fixed_metric_cases() {
        let p = ManifoldPoint::su2(ONE);
        let x = su2_tangent(&p, I);
        let v = su2_tangent(&p, J);
        let r = 2.0f64.sqrt();
        // along the chosen line: (1-r²)⁻¹|X|²
        let val = fixed_metric_eval(ActionTag::Su2Conj, &x, &x, r, &x).unwrap();
        assert_relative_eq!(val, -1.0, epsilon = 1e-12);
        // orthogonal block untouched
        let val = fixed_metric_eval(ActionTag::Su2Conj, &v, &v, r, &x).unwrap();
        assert_relative_eq!(val, 1.0, epsilon = 1e-12);
        // signature (2, 1) on a frame at the fixed point
        let basis = models::tangent_basis(&p);
        let g = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
            fixed_metric_eval(ActionTag::Su2Conj, &basis[i], &basis[j], r, &x).unwrap()
        });
        assert_eq!(crate::linalg::metric_index(&g), 1);
        // rejects non-fixed base and bad directions
        assert!(matches!(
            fixed_metric_eval(ActionTag::Su2Conj, &v, &v, r, &v),
            Err(GeoError::BadDirection)
        ));
        let q = ManifoldPoint::su2(J);
        let vq = su2_tangent(&q, I);
        assert!(matches!(
            fixed_metric_eval(ActionTag::Su2Conj, &vq, &vq, r, &vq),
            Err(GeoError::NotFixedPoint)
        ));
    }

    #[test]
    fn fixed_lorentz_metric_is_invariant_and_lorentzian() {
        let mut rng = Sampler::new(31);
        let spec = MetricSpec::fixed_lorentz(Model::Su2, -2.0);
        for _ in 0..100 {
            let p = rng.point(Model::Su2);
            let basis = models::tangent_basis(&p);
            let g = nalgebra::DMatrix::from_fn(3, 3, |i, j| {
                metric_eval(&spec, &basis[i], &basis[j]).unwrap()
            });
            assert_eq!(crate::linalg::metric_index(&g), 1, "index 1 everywhere");
            // invariance under the conjugation circle
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            let q = rng.circle_element();
            let p2 = models::act(ActionTag::Su2Conj, q, &p).unwrap();
            let dv = TangentVector::new(p2.clone(), models::act_coords(ActionTag::Su2Conj, q, &v.ambient));
            let dw = TangentVector::new(p2, models::act_coords(ActionTag::Su2Conj, q, &w.ambient));
            let a = metric_eval(&spec, &v, &w).unwrap();
            let b = metric_eval(&spec, &dv, &dw).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn metric_spec_serde_schema() {
        let spec = MetricSpec::cheeger(Model::Su2, ActionTag::Su2Conj, -2.0);
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            s,
            r#"{"kind":{"cheeger":-2.0},"model":"su2","action":"su2-conj"}"#
        );
        let back: MetricSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let q = qexp(I.scale(0.3));
        let _ = q;
    }
}
