//! Chart-based finite-difference curvature oracle and submersion tensors.
//!
//! Charts are retraction-based: `φ(u) = retract(center + Σ uᵢ frameᵢ)` with an
//! ambient-orthonormal tangent frame. Metric components are pulled back by
//! numeric pushforwards, Christoffel symbols come from first differences, and
//! the Riemann tensor from direct second differences of the metric with one
//! level of Richardson extrapolation. None of this shares code with the
//! closed-form curvature formulas it is used to check.

use crate::cheeger::{self, MetricKind, MetricSpec};
use crate::error::{GeoError, Result};
use crate::linalg::AmbVec;
use crate::models::{self, ActionTag, ManifoldPoint, Model, TangentVector};
use crate::quat;
use crate::tol;
use nalgebra::DMatrix;
use serde::Serialize;

/// Retraction-based local coordinates around a point.
#[derive(Debug, Clone)]
pub struct Chart {
    pub center: ManifoldPoint,
    /// Ambient-orthonormal basis of the tangent space at the center.
    pub frame: Vec<TangentVector>,
    pub radius: f64,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    /// Chart parametrization; `φ(0)` is the center exactly.
    pub fn point(&self, u: &[f64]) -> Result<ManifoldPoint> {
        let mut x = self.center.to_amb();
        for (c, f) in u.iter().zip(&self.frame) {
            x = x.axpy(*c, &f.to_amb());
        }
        let y = models::retract_amb_unchecked(self.center.model, &x)?;
        Ok(ManifoldPoint::new(self.center.model, models::amb_to_coords(&y)))
    }

    /// Pushforward `dφ_u(e_i)` by central differences with step [`tol::H_CHART`],
    /// projected onto the tangent space at `φ(u)`.
    pub fn pushforward(&self, u: &[f64], i: usize) -> Result<TangentVector> {
        let h = tol::H_CHART;
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[i] += h;
        um[i] -= h;
        let pp = self.point(&up)?;
        let pm = self.point(&um)?;
        let at = self.point(u)?;
        let diff = pp.to_amb().sub(&pm.to_amb()).scale(1.0 / (2.0 * h));
        Ok(TangentVector::from_amb(
            &at,
            &models::project_tangent_amb(at.model, &at.to_amb(), &diff),
        ))
    }
}

/// Build a chart at `p`, checking that `spec` is non-degenerate there.
pub fn build_chart(p: &ManifoldPoint, spec: &MetricSpec) -> Result<Chart> {
    let chart = Chart {
        center: p.clone(),
        frame: models::tangent_basis(p),
        radius: tol::CHART_RADIUS,
    };
    // fail early on degenerate metrics
    let _ = metric_components(&chart, &vec![0.0; chart.dim()], spec)?;
    Ok(chart)
}

/// Metric evaluation at a fixed point of the manifold, specialized for the
/// chart stencils (the Killing data is computed once per point).
pub(crate) struct MetricAtPoint {
    kind: MetricAtPointKind,
}

enum MetricAtPointKind {
    Dot,
    /// `<v,w> + (1/(1+tP) - 1) <v,K><w,K>/P`
    Cheeger { k: AmbVec, p: f64, t: f64 },
    /// Flat Lorentzian `diag(-c², 1, 1, 1)`.
    MinkowskiLift { c2: f64 },
    /// `<v,w> + (1/(1+t) - 1) <v,L><w,L>` for a unit line field L.
    Line { l: AmbVec, t: f64 },
}

impl MetricAtPoint {
    pub fn new(spec: &MetricSpec, at: &ManifoldPoint) -> Result<Self> {
        let kind = match spec.kind {
            MetricKind::Ambient | MetricKind::QuotientSubmersion => MetricAtPointKind::Dot,
            MetricKind::Cheeger(t) if t == 0.0 => MetricAtPointKind::Dot,
            MetricKind::Cheeger(t) => {
                if spec.model == Model::Minkowski {
                    let r2 = -t;
                    if r2 <= 1.0 {
                        return Err(GeoError::BadParameter {
                            context: "Minkowski deformation requires t = -r² with r² > 1",
                        });
                    }
                    MetricAtPointKind::MinkowskiLift {
                        c2: (r2 - 1.0) / (r2 * r2),
                    }
                } else {
                    let action = spec.action.ok_or(GeoError::BadConfig(
                        "Cheeger metric needs an action".into(),
                    ))?;
                    let k = models::circle_field(action, at);
                    let p = k.dot(&k);
                    if p <= tol::EPS_ORBIT_COLLAPSE {
                        return Err(GeoError::DegenerateMetric {
                            context: "Cheeger deformation at a fixed point",
                        });
                    }
                    MetricAtPointKind::Cheeger {
                        k: k.to_amb(),
                        p,
                        t,
                    }
                }
            }
            MetricKind::FixedLorentz(t) => {
                let mut c = models::Coords::new();
                match at.model {
                    Model::Su2 => c.push(quat::I * at.coords[0]),
                    Model::S7 => {
                        c.push(quat::I * at.coords[0]);
                        c.push(quat::I * at.coords[1]);
                    }
                    _ => {
                        return Err(GeoError::BadConfig(
                            "fixed Lorentzian metric is defined on Su2 and S7".into(),
                        ))
                    }
                }
                MetricAtPointKind::Line {
                    l: models::coords_to_amb(&c),
                    t,
                }
            }
            MetricKind::KaluzaKlein(_) => {
                return Err(GeoError::BadConfig(
                    "Kaluza-Klein metrics are evaluated through starbundle".into(),
                ))
            }
        };
        Ok(Self { kind })
    }

    pub fn eval(&self, v: &AmbVec, w: &AmbVec) -> f64 {
        match &self.kind {
            MetricAtPointKind::Dot => v.dot(w),
            MetricAtPointKind::Cheeger { k, p, t } => {
                let factor = 1.0 / (1.0 + t * p);
                v.dot(w) + (factor - 1.0) * v.dot(k) * w.dot(k) / p
            }
            MetricAtPointKind::MinkowskiLift { c2 } => {
                -v[0] * w[0] * c2 + v[1] * w[1] + v[2] * w[2] + v[3] * w[3]
            }
            MetricAtPointKind::Line { l, t } => {
                v.dot(w) + (1.0 / (1.0 + t) - 1.0) * v.dot(l) * w.dot(l)
            }
        }
    }
}

/// Pulled-back metric components `g_ij(u)` on the chart.
pub fn metric_components(chart: &Chart, u: &[f64], spec: &MetricSpec) -> Result<DMatrix<f64>> {
    let d = chart.dim();
    let at = chart.point(u)?;
    let metric = MetricAtPoint::new(spec, &at)?;
    let mut push = Vec::with_capacity(d);
    for i in 0..d {
        push.push(chart.pushforward(u, i)?.to_amb());
    }
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let val = metric.eval(&push[i], &push[j]);
            g[(i, j)] = val;
            g[(j, i)] = val;
        }
    }
    let det = g.determinant();
    if !det.is_finite() || det.abs() < tol::DEGENERATE_DET {
        return Err(GeoError::DegenerateMetric {
            context: "chart metric components are singular",
        });
    }
    Ok(g)
}

/// Rank-3 array `Γ[k][i][j]` with the last two indices symmetric.
#[derive(Debug, Clone, Serialize)]
pub struct Tensor3 {
    pub d: usize,
    v: Vec<f64>,
}

impl Tensor3 {
    fn zeros(d: usize) -> Self {
        Self {
            d,
            v: vec![0.0; d * d * d],
        }
    }
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.v[(k * self.d + i) * self.d + j]
    }
    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, x: f64) {
        self.v[(k * self.d + i) * self.d + j] = x;
    }
}

/// Rank-4 array `R[i][j][k][l]`.
#[derive(Debug, Clone, Serialize)]
pub struct Tensor4 {
    pub d: usize,
    v: Vec<f64>,
}

impl Tensor4 {
    fn zeros(d: usize) -> Self {
        Self {
            d,
            v: vec![0.0; d * d * d * d],
        }
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.v[((i * self.d + j) * self.d + k) * self.d + l]
    }
    #[inline]
    fn set(&mut self, i: usize, j: usize, k: usize, l: usize, x: f64) {
        self.v[((i * self.d + j) * self.d + k) * self.d + l] = x;
    }
    pub fn max_abs(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn d_metric(chart: &Chart, u: &[f64], spec: &MetricSpec, i: usize, h: f64) -> Result<DMatrix<f64>> {
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    up[i] += h;
    um[i] -= h;
    Ok((metric_components(chart, &up, spec)? - metric_components(chart, &um, spec)?)
        .scale(1.0 / (2.0 * h)))
}

/// Christoffel symbols `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il - ∂_l g_ij)`
/// from central differences with step [`tol::H_CHART`].
pub fn christoffel(chart: &Chart, u: &[f64], spec: &MetricSpec) -> Result<Tensor3> {
    let d = chart.dim();
    let g = metric_components(chart, u, spec)?;
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(GeoError::DegenerateMetric {
            context: "metric not invertible for Christoffel symbols",
        })?;
    let mut dg = Vec::with_capacity(d);
    for i in 0..d {
        dg.push(d_metric(chart, u, spec, i, tol::H_CHART)?);
    }
    Ok(christoffel_from_derivatives(&g_inv, &dg))
}

fn christoffel_from_derivatives(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Tensor3 {
    let d = g_inv.nrows();
    let mut gamma = Tensor3::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                let val = 0.5 * s;
                gamma.set(k, i, j, val);
                gamma.set(k, j, i, val);
            }
        }
    }
    gamma
}

/// Second derivatives `∂_i ∂_j g` by the 4-point cross stencil with one level
/// of Richardson extrapolation (steps `h` and `h/2`).
fn d2_metric(
    chart: &Chart,
    u: &[f64],
    spec: &MetricSpec,
    i: usize,
    j: usize,
) -> Result<DMatrix<f64>> {
    let stencil = |h: f64| -> Result<DMatrix<f64>> {
        if i == j {
            let mut up = u.to_vec();
            let mut um = u.to_vec();
            up[i] += h;
            um[i] -= h;
            let center = metric_components(chart, u, spec)?;
            Ok((metric_components(chart, &up, spec)? + metric_components(chart, &um, spec)?
                - center.scale(2.0))
            .scale(1.0 / (h * h)))
        } else {
            let mut pp = u.to_vec();
            let mut pm = u.to_vec();
            let mut mp = u.to_vec();
            let mut mm = u.to_vec();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            Ok((metric_components(chart, &pp, spec)? + metric_components(chart, &mm, spec)?
                - metric_components(chart, &pm, spec)?
                - metric_components(chart, &mp, spec)?)
            .scale(1.0 / (4.0 * h * h)))
        }
    };
    let coarse = stencil(tol::H_CHART2)?;
    let fine = stencil(tol::H_CHART2 / 2.0)?;
    Ok(fine.scale(4.0 / 3.0) - coarse.scale(1.0 / 3.0))
}

/// Full curvature data at a chart point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub dim: usize,
    /// `g_ij` at the point.
    pub metric: Vec<Vec<f64>>,
    pub christoffel: Tensor3,
    /// Fully lowered `R(∂_i, ∂_j, ∂_k, ∂_l) = g(R(∂_i,∂_j)∂_k, ∂_l)`.
    pub riemann: Tensor4,
    /// `Ric_jk = R^i_{ijk}` (trace over the first slot; frame-free).
    pub ricci: Vec<Vec<f64>>,
    pub scalar: f64,
    /// Max residuals of the last-pair antisymmetry / pair-swap / first-Bianchi
    /// identities, for reporting.
    pub symmetry_residuals: [f64; 3],
}

/// Curvature of `spec` at the center of `chart` (chart coordinates).
pub fn curvature_report(chart: &Chart, spec: &MetricSpec) -> Result<CurvatureReport> {
    let d = chart.dim();
    let u = vec![0.0; d];
    let g = metric_components(chart, &u, spec)?;
    let g_inv = g.clone().try_inverse().ok_or(GeoError::DegenerateMetric {
        context: "metric not invertible in curvature report",
    })?;
    let mut dg = Vec::with_capacity(d);
    for i in 0..d {
        dg.push(d_metric(chart, &u, spec, i, tol::H_CHART)?);
    }
    let gamma = christoffel_from_derivatives(&g_inv, &dg);
    // ∂_i g^{lm} = -g^{la} ∂_i g_ab g^{bm}
    let mut dg_inv = Vec::with_capacity(d);
    for i in 0..d {
        dg_inv.push(-(&g_inv * &dg[i] * &g_inv));
    }
    let mut d2g = vec![vec![DMatrix::zeros(0, 0); d]; d];
    for i in 0..d {
        for j in i..d {
            let m = d2_metric(chart, &u, spec, i, j)?;
            d2g[j][i] = m.clone();
            d2g[i][j] = m;
        }
    }
    // ∂_i Γ^l_{jk} = ∂_i g^{lm} Γ_{jk,m} + ½ g^{lm}(∂_i∂_j g_km + ∂_i∂_k g_jm - ∂_i∂_m g_jk)
    let gamma_lower = |j: usize, k: usize, m: usize| -> f64 {
        0.5 * (dg[j][(k, m)] + dg[k][(j, m)] - dg[m][(j, k)])
    };
    let dgamma = {
        let mut t = vec![Tensor3::zeros(d); d]; // t[i][l][j][k] = ∂_i Γ^l_{jk}
        for (i, ti) in t.iter_mut().enumerate() {
            for l in 0..d {
                for j in 0..d {
                    for k in j..d {
                        let mut s = 0.0;
                        for m in 0..d {
                            s += dg_inv[i][(l, m)] * gamma_lower(j, k, m)
                                + 0.5
                                    * g_inv[(l, m)]
                                    * (d2g[i][j][(k, m)] + d2g[i][k][(j, m)] - d2g[i][m][(j, k)]);
                        }
                        ti.set(l, j, k, s);
                        ti.set(l, k, j, s);
                    }
                }
            }
        }
        t
    };
    // R^l_{ijk} = ∂_i Γ^l_{jk} - ∂_j Γ^l_{ik} + Γ^l_{im}Γ^m_{jk} - Γ^l_{jm}Γ^m_{ik}
    let mut upper = Tensor4::zeros(d);
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = dgamma[i].get(l, j, k) - dgamma[j].get(l, i, k);
                    for m in 0..d {
                        s += gamma.get(l, i, m) * gamma.get(m, j, k)
                            - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    upper.set(l, i, j, k, s);
                }
            }
        }
    }
    // lower: R_{ijkl} = g_{lm} R^m_{ijk}
    let mut riemann = Tensor4::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += g[(l, m)] * upper.get(m, i, j, k);
                    }
                    riemann.set(i, j, k, l, s);
                }
            }
        }
    }
    // Ricci: trace over the first slot of the (3,1) tensor.
    let mut ricci = DMatrix::zeros(d, d);
    for j in 0..d {
        for k in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                s += upper.get(i, i, j, k);
            }
            ricci[(j, k)] = s;
        }
    }
    let scalar = (0..d)
        .map(|j| (0..d).map(|k| g_inv[(j, k)] * ricci[(j, k)]).sum::<f64>())
        .sum();
    // symmetry residuals: last-pair antisymmetry, pair swap, first Bianchi
    let mut res = [0.0f64; 3];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    res[0] = res[0]
                        .max((riemann.get(i, j, k, l) + riemann.get(i, j, l, k)).abs());
                    res[1] = res[1]
                        .max((riemann.get(i, j, k, l) - riemann.get(k, l, i, j)).abs());
                    res[2] = res[2].max(
                        (riemann.get(i, j, k, l)
                            + riemann.get(j, k, i, l)
                            + riemann.get(k, i, j, l))
                        .abs(),
                    );
                }
            }
        }
    }
    Ok(CurvatureReport {
        dim: d,
        metric: to_rows(&g),
        christoffel: gamma,
        riemann,
        ricci: to_rows(&ricci),
        scalar,
        symmetry_residuals: res,
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Curvature report at a point (builds the chart internally).
pub fn curvature_report_at(p: &ManifoldPoint, spec: &MetricSpec) -> Result<CurvatureReport> {
    let chart = build_chart(p, spec)?;
    curvature_report(&chart, spec)
}

/// Chart-frame coordinates of a tangent vector (the frame is
/// ambient-orthonormal, so these are plain inner products).
pub fn frame_coords(chart: &Chart, v: &TangentVector) -> Vec<f64> {
    chart.frame.iter().map(|f| f.dot(v)).collect()
}

/// Contract the lowered Riemann tensor: `R(a, b, c, e)`.
pub fn riemann_contract(report: &CurvatureReport, a: &[f64], b: &[f64], c: &[f64], e: &[f64]) -> f64 {
    let d = report.dim;
    let mut s = 0.0;
    for i in 0..d {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            if b[j] == 0.0 {
                continue;
            }
            for k in 0..d {
                for l in 0..d {
                    s += a[i] * b[j] * c[k] * e[l] * report.riemann.get(i, j, k, l);
                }
            }
        }
    }
    s
}

/// `Ric(v, v)` from a report and chart coordinates.
pub fn ricci_quadratic(report: &CurvatureReport, v: &[f64]) -> f64 {
    let d = report.dim;
    let mut s = 0.0;
    for j in 0..d {
        for k in 0..d {
            s += v[j] * v[k] * report.ricci[j][k];
        }
    }
    s
}

/// Numeric unreduced sectional curvature `R(v, w, w, v)` of `spec`.
pub fn unreduced_sectional_numeric(
    spec: &MetricSpec,
    v: &TangentVector,
    w: &TangentVector,
) -> Result<f64> {
    let chart = build_chart(&v.base, spec)?;
    let report = curvature_report(&chart, spec)?;
    let cv = frame_coords(&chart, v);
    let cw = frame_coords(&chart, w);
    Ok(riemann_contract(&report, &cv, &cw, &cw, &cv))
}

/// Reduced sectional curvature with the signed denominator
/// `|v|²|w|² - g(v,w)²`; rejects degenerate planes.
pub fn sectional_numeric(spec: &MetricSpec, v: &TangentVector, w: &TangentVector) -> Result<f64> {
    let g_vv = cheeger::metric_eval(spec, v, v)?;
    let g_ww = cheeger::metric_eval(spec, w, w)?;
    let g_vw = cheeger::metric_eval(spec, v, w)?;
    let denom = g_vv * g_ww - g_vw * g_vw;
    if denom.abs() < tol::DEGENERATE_PLANE {
        return Err(GeoError::DegeneratePlane {
            denominator: denom.abs(),
        });
    }
    Ok(unreduced_sectional_numeric(spec, v, w)? / denom)
}

/// Horizontal Ricci `Σ_i R(e_i, X, X, e_i)` of the base metric over the
/// supplied horizontal frame, from one chart-based curvature report.
pub fn horizontal_ricci_numeric(
    base: &MetricSpec,
    x: &TangentVector,
    horizontal: &[TangentVector],
) -> Result<f64> {
    let chart = build_chart(&x.base, base)?;
    let report = curvature_report(&chart, base)?;
    let cx = frame_coords(&chart, x);
    let mut s = 0.0;
    for e in horizontal {
        let ce = frame_coords(&chart, e);
        s += riemann_contract(&report, &ce, &cx, &cx, &ce);
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Submersion tensors A, A*, S
// ---------------------------------------------------------------------------

fn require_principal(action: ActionTag, p: &ManifoldPoint) -> Result<(TangentVector, f64)> {
    let k = models::circle_field(action, p);
    let p_val = k.dot(&k);
    if p_val <= tol::EPS_ORBIT_COLLAPSE {
        return Err(GeoError::NotPrincipal);
    }
    Ok((k, p_val))
}

/// Value of the local horizontal field extending the constant ambient vector
/// `x0` at the nearby point `q` (tangent projection, then subtract the
/// vertical component with respect to the base metric).
fn horizontal_field_at(
    action: ActionTag,
    q: &ManifoldPoint,
    x0: &AmbVec,
    base: &MetricAtPoint,
) -> AmbVec {
    let tangent = models::project_tangent_amb(q.model, &q.to_amb(), x0);
    let k = models::circle_field(action, q).to_amb();
    let p = base.eval(&k, &k);
    if p <= tol::EPS_ORBIT_COLLAPSE {
        return tangent;
    }
    let u = base.eval(&tangent, &k) / p;
    tangent.axpy(-u, &k)
}

/// O'Neill tensor `A_X Y = ½ [X̃, Ỹ]^v` for horizontal `X`, `Y` at a regular
/// point: the bracket of the projected constant-ambient horizontal extensions
/// is computed by central differences along retraction curves, and half its
/// vertical part is returned. Antisymmetric in `(X, Y)`.
pub fn oneill_a(
    x: &TangentVector,
    y: &TangentVector,
    action: ActionTag,
    base: &MetricSpec,
) -> Result<TangentVector> {
    let p = &x.base;
    let (k, p_val) = require_principal(action, p)?;
    let metric = MetricAtPoint::new(base, p)?;
    let h = 1e-5;
    let x_amb = x.to_amb();
    let y_amb = y.to_amb();
    let deriv_along = |dir: &AmbVec, field0: &AmbVec| -> Result<AmbVec> {
        let xp = models::retract_amb_unchecked(p.model, &p.to_amb().axpy(h, dir))?;
        let xm = models::retract_amb_unchecked(p.model, &p.to_amb().axpy(-h, dir))?;
        let qp = ManifoldPoint::new(p.model, models::amb_to_coords(&xp));
        let qm = ManifoldPoint::new(p.model, models::amb_to_coords(&xm));
        let fp = horizontal_field_at(action, &qp, field0, &metric);
        let fm = horizontal_field_at(action, &qm, field0, &metric);
        Ok(fp.sub(&fm).scale(1.0 / (2.0 * h)))
    };
    // [X̃, Ỹ] = D_X Ỹ - D_Y X̃ along manifold curves
    let bracket = deriv_along(&x_amb, &y_amb)?.sub(&deriv_along(&y_amb, &x_amb)?);
    // vertical part w.r.t. the base metric, halved
    let k_amb = k.to_amb();
    let coeff = metric.eval(&bracket, &k_amb) / p_val;
    Ok(TangentVector::from_amb(p, &k_amb.scale(0.5 * coeff)))
}

/// Metric dual `A*_X V`, the horizontal vector with
/// `g(A*_X V, Y) = -g(A_X Y, V)` for all horizontal `Y`.
pub fn a_star(
    x: &TangentVector,
    v_vert: &TangentVector,
    action: ActionTag,
    base: &MetricSpec,
) -> Result<TangentVector> {
    let p = &x.base;
    require_principal(action, p)?;
    let horizontal = models::horizontal_space(action, p, base)?;
    let on = crate::linalg::orthonormalize(
        &horizontal.iter().map(|h| h.to_amb()).collect::<Vec<_>>(),
        1e-10,
    );
    let metric = MetricAtPoint::new(base, p)?;
    let v_amb = v_vert.to_amb();
    let mut out = AmbVec::zeros(p.model.ambient_dim());
    for e in &on {
        let ev = TangentVector::from_amb(p, e);
        let a = oneill_a(x, &ev, action, base)?;
        let c = -metric.eval(&a.to_amb(), &v_amb);
        out = out.axpy(c, e);
    }
    Ok(TangentVector::from_amb(p, &out))
}

/// Shape operator `S_X(V) = -(∇_V X̃)^v` for the basic extension `X̃` of the
/// horizontal `X` along the orbit direction `V`; vanishes when the orbits are
/// totally geodesic. The basic extension along an orbit is the action
/// pushforward of `X`, so its derivative is the action-field formula applied
/// to `X`.
pub fn shape_s(
    x: &TangentVector,
    v_vert: &TangentVector,
    action: ActionTag,
    base: &MetricSpec,
) -> Result<TangentVector> {
    let p = &x.base;
    let (k, p_val) = require_principal(action, p)?;
    let metric = MetricAtPoint::new(base, p)?;
    // V = s·K
    let s_coeff = metric.eval(&v_vert.to_amb(), &k.to_amb()) / metric.eval(&k.to_amb(), &k.to_amb());
    let deriv = models::field_formula(action, quat::I, &x.ambient);
    let tangent = models::project_tangent(p, &deriv).scale(s_coeff);
    let coeff = metric.eval(&tangent.to_amb(), &k.to_amb()) / p_val;
    let _ = metric;
    Ok(TangentVector::from_amb(p, &k.to_amb().scale(-coeff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheeger::MetricSpec;
    use crate::models::{ManifoldPoint, Model};
    use crate::quat::{I, J, ONE};
    use crate::sample::Sampler;
    use approx::assert_relative_eq;

    #[test]
    fn chart_basics() {
        let spec = MetricSpec::ambient(Model::Su2);
        let chart = build_chart(&ManifoldPoint::su2(ONE), &spec).unwrap();
        assert_eq!(chart.dim(), 3);
        // frame Gram is the identity
        for i in 0..3 {
            for j in 0..3 {
                let g = chart.frame[i].dot(&chart.frame[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10);
            }
        }
        // parametrization at zero returns the center exactly
        let p0 = chart.point(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p0, chart.center);
        // Sp2: ten-vector frame
        let mut rng = Sampler::new(41);
        let m = rng.point(Model::Sp2);
        let chart = build_chart(&m, &MetricSpec::ambient(Model::Sp2)).unwrap();
        assert_eq!(chart.dim(), 10);
    }

    #[test]
    fn metric_components_identity_and_signature() {
        let mut rng = Sampler::new(43);
        let p = rng.point(Model::Su2);
        let spec = MetricSpec::ambient(Model::Su2);
        let chart = build_chart(&p, &spec).unwrap();
        let g = metric_components(&chart, &[0.0; 3], &spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-8, "ambient Gram at center");
            }
        }
        // one negative eigenvalue under the Lorentzian deformation
        let p = rng.principal_point(Model::Su2, crate::models::ActionTag::Su2Conj, -2.0);
        let spec = MetricSpec::cheeger(Model::Su2, crate::models::ActionTag::Su2Conj, -2.0);
        let chart = build_chart(&p, &spec).unwrap();
        let g = metric_components(&chart, &[0.0; 3], &spec).unwrap();
        assert_eq!(crate::linalg::metric_index(&g), 1);
        // symmetry by construction
        assert!((g.clone() - g.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn christoffel_flat_and_symmetric() {
        let spec = MetricSpec::cheeger(Model::Minkowski, crate::models::ActionTag::Su2Conj, -2.0);
        // Minkowski spec ignores the action; build at an arbitrary point
        let p = ManifoldPoint::minkowski(crate::quat::Quaternion::new(0.2, -0.3, 0.5, 0.1));
        let chart = build_chart(&p, &spec).unwrap();
        let gamma = christoffel(&chart, &[0.01, -0.02, 0.0, 0.03], &spec).unwrap();
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        gamma.get(k, i, j).abs() < 1e-6,
                        "flat metric has vanishing Christoffel symbols"
                    );
                }
            }
        }
        // symmetry in the lower pair on a curved example
        let mut rng = Sampler::new(47);
        let p = rng.point(Model::Su2);
        let spec = MetricSpec::ambient(Model::Su2);
        let chart = build_chart(&p, &spec).unwrap();
        let gamma = christoffel(&chart, &[0.01, 0.0, -0.01], &spec).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((gamma.get(k, i, j) - gamma.get(k, j, i)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn christoffel_metric_compatibility() {
        // ∂_i g_jk = Γ_{ij,k} + Γ_{ik,j} residual (recomposed with the metric)
        let mut rng = Sampler::new(53);
        let p = rng.point(Model::Su2);
        let spec = MetricSpec::ambient(Model::Su2);
        let chart = build_chart(&p, &spec).unwrap();
        let u = [0.005, -0.004, 0.002];
        let g = metric_components(&chart, &u, &spec).unwrap();
        let gamma = christoffel(&chart, &u, &spec).unwrap();
        for i in 0..3 {
            let dg = d_metric(&chart, &u, &spec, i, tol::H_CHART).unwrap();
            for j in 0..3 {
                for k in 0..3 {
                    let mut recomposed = 0.0;
                    for m in 0..3 {
                        recomposed += g[(m, k)] * gamma.get(m, i, j) + g[(j, m)] * gamma.get(m, i, k);
                    }
                    assert!(
                        (dg[(j, k)] - recomposed).abs() < 1e-5,
                        "compatibility residual {}",
                        (dg[(j, k)] - recomposed).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn round_su2_sectional_is_one() {
        let mut rng = Sampler::new(59);
        let spec = MetricSpec::ambient(Model::Su2);
        for _ in 0..5 {
            let p = rng.point(Model::Su2);
            let report = curvature_report_at(&p, &spec).unwrap();
            let chart = build_chart(&p, &spec).unwrap();
            let v = rng.tangent(&p);
            let w = rng.tangent(&p);
            let denom = v.dot(&v) * w.dot(&w) - v.dot(&w).powi(2);
            if denom.abs() < 1e-2 {
                continue;
            }
            let cv = frame_coords(&chart, &v);
            let cw = frame_coords(&chart, &w);
            let sec = riemann_contract(&report, &cv, &cw, &cw, &cv) / denom;
            assert!((sec - 1.0).abs() < 1e-4, "round sectional {sec}");
        }
    }

    #[test]
    fn minkowski_riemann_vanishes() {
        let spec = MetricSpec {
            kind: crate::cheeger::MetricKind::Cheeger(-2.0),
            model: Model::Minkowski,
            action: None,
        };
        let mut rng = Sampler::new(61);
        let p = rng.point(Model::Minkowski);
        let report = curvature_report_at(&p, &spec).unwrap();
        assert!(report.riemann.max_abs() < 1e-6, "flat spacetime");
    }

    #[test]
    fn riemann_symmetries_on_models() {
        let mut rng = Sampler::new(67);
        let cases: Vec<(ManifoldPoint, MetricSpec)> = vec![
            (rng.point(Model::Su2), MetricSpec::ambient(Model::Su2)),
            (
                rng.principal_point(Model::Su2, crate::models::ActionTag::Su2Conj, -2.0),
                MetricSpec::cheeger(Model::Su2, crate::models::ActionTag::Su2Conj, -2.0),
            ),
            (rng.point(Model::Su2), MetricSpec::fixed_lorentz(Model::Su2, -2.0)),
            (rng.point(Model::S7), MetricSpec::ambient(Model::S7)),
        ];
        for (p, spec) in cases {
            let report = curvature_report_at(&p, &spec).unwrap();
            for (name, r) in ["antisym", "pair-swap", "bianchi"]
                .iter()
                .zip(report.symmetry_residuals)
            {
                assert!(
                    r < tol::TOL_CURV,
                    "{name} residual {r} for {:?}/{:?}",
                    p.model,
                    spec.kind
                );
            }
        }
    }

    #[test]
    fn s7_scalar_curvature() {
        let mut rng = Sampler::new(71);
        let p = rng.point(Model::S7);
        let report = curvature_report_at(&p, &MetricSpec::ambient(Model::S7)).unwrap();
        assert_relative_eq!(report.scalar, 42.0, max_relative = 1e-3);
    }

    #[test]
    fn oneill_a_antisymmetry_and_duality() {
        let mut rng = Sampler::new(73);
        let base = MetricSpec::ambient(Model::Su2);
        let action = crate::models::ActionTag::Su2Hopf;
        for _ in 0..10 {
            let p = rng.point(Model::Su2);
            let hor = models::horizontal_space(action, &p, &base).unwrap();
            let x = &hor[0];
            let y = &hor[1];
            let a_xx = oneill_a(x, x, action, &base).unwrap();
            assert!(a_xx.ambient_norm() < 1e-6, "A_XX = 0");
            let a_xy = oneill_a(x, y, action, &base).unwrap();
            let a_yx = oneill_a(y, x, action, &base).unwrap();
            assert!(a_xy.add(&a_yx).ambient_norm() < 1e-6, "antisymmetry");
            // duality g(A_X Y, V) = -g(Y, A*_X V)
            let k = models::circle_field(action, &p);
            let lhs = a_xy.dot(&k);
            let astar = a_star(x, &k, action, &base).unwrap();
            let rhs = -y.dot(&astar);
            assert!((lhs - rhs).abs() < 1e-6, "duality {lhs} vs {rhs}");
            // A* lands horizontal
            assert!(astar.dot(&k).abs() < 1e-8);
        }
    }

    #[test]
    fn hopf_shape_vanishes_conjugation_does_not() {
        let mut rng = Sampler::new(79);
        let base = MetricSpec::ambient(Model::Su2);
        for _ in 0..20 {
            let p = rng.point(Model::Su2);
            let k = models::circle_field(crate::models::ActionTag::Su2Hopf, &p);
            let hor =
                models::horizontal_space(crate::models::ActionTag::Su2Hopf, &p, &base).unwrap();
            let s = shape_s(&hor[0], &k, crate::models::ActionTag::Su2Hopf, &base).unwrap();
            assert!(s.ambient_norm() < 1e-6, "totally geodesic Hopf fibers");
        }
        // conjugation orbits are small circles: the shape operator is nonzero
        // away from the great-circle locus
        let a = crate::quat::Quaternion::new(0.8, 0.0, 0.6, 0.0);
        let p = ManifoldPoint::su2(a);
        let k = models::circle_field(crate::models::ActionTag::Su2Conj, &p);
        let hor = models::horizontal_space(crate::models::ActionTag::Su2Conj, &p, &base).unwrap();
        let mut any = 0.0f64;
        for h in &hor {
            let s = shape_s(h, &k, crate::models::ActionTag::Su2Conj, &base).unwrap();
            any = any.max(s.ambient_norm());
        }
        assert!(any > 1e-3, "conjugation orbits are not totally geodesic");
    }

    #[test]
    fn hopf_fat_relation() {
        // |A*_X V| for unit horizontal X and unit vertical V equals 1 on the
        // Hopf bundle (vertizontal curvature one).
        let mut rng = Sampler::new(83);
        let base = MetricSpec::ambient(Model::Su2);
        let action = crate::models::ActionTag::Su2Hopf;
        for _ in 0..10 {
            let p = rng.point(Model::Su2);
            let hor = models::horizontal_space(action, &p, &base).unwrap();
            let on = crate::linalg::orthonormalize(
                &hor.iter().map(|h| h.to_amb()).collect::<Vec<_>>(),
                1e-10,
            );
            let x = TangentVector::from_amb(&p, &on[0]);
            let k = models::circle_field(action, &p);
            let astar = a_star(&x, &k, action, &base).unwrap();
            assert_relative_eq!(astar.dot(&astar), 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn rejects_fixed_points() {
        let base = MetricSpec::ambient(Model::Su2);
        let p = ManifoldPoint::su2(ONE);
        let x = models::project_tangent(&p, &{
            let mut c = models::Coords::new();
            c.push(J);
            c
        });
        assert!(matches!(
            oneill_a(&x, &x, crate::models::ActionTag::Su2Conj, &base),
            Err(GeoError::NotPrincipal)
        ));
        let _ = I;
    }
}
