//! Geodesic integration with conserved-quantity monitoring, holonomy and
//! dual-holonomy transport, completeness and dual-leaf probes, and the
//! fake-horizontal classifier at fixed points.
//!
//! Two integration paths:
//!
//! - constant-coefficient and ambient-restriction metrics use the constraint
//!   projection form of the geodesic equation (`ẍ ⊥ T_x M`, with Lagrange
//!   multipliers from the exact quadratic constraints);
//! - deformed metrics run RK4 on the first-order geodesic system in a
//!   retraction chart, re-centering the chart when the coordinates leave the
//!   hop radius.
//!
//! Both are cross-checked against each other on the round metrics.

use crate::cheeger::{self, CausalClass, MetricKind, MetricSpec};
use crate::curvature::{self, Chart};
use crate::error::{GeoError, Result};
use crate::linalg::AmbVec;
use crate::models::{self, ActionTag, ManifoldPoint, Model, TangentVector};
use crate::quat;
use crate::sample::Sampler;
use crate::tol;

/// Integrator configuration. `step` must lie in (0, 1e-2].
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_param: f64,
    pub chart_hop_radius: f64,
    /// Relative per-step energy jump that triggers adaptive halving.
    pub tol_cons: f64,
    /// Record roughly this many samples along the trace.
    pub max_samples: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: tol::DEFAULT_STEP,
            max_param: 10.0,
            chart_hop_radius: tol::CHART_HOP_RADIUS,
            tol_cons: 1e-6,
            max_samples: 1000,
        }
    }
}

/// Sampled solution of the geodesic equation with monitors.
#[derive(Debug, Clone)]
pub struct GeodesicTrace {
    /// (affine parameter, point, velocity)
    pub samples: Vec<(f64, ManifoldPoint, TangentVector)>,
    /// `g(γ', γ')` per sample.
    pub energy: Vec<f64>,
    /// `g(γ', K*)` per sample, `K*` the circle action field.
    pub killing_charge: Vec<f64>,
    /// Causal class of the initial velocity.
    pub causal: CausalClass,
    /// Set when integration stopped early (degenerate locus, step underflow).
    pub abort: Option<GeoError>,
}

impl GeodesicTrace {
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy
            .iter()
            .fold(0.0f64, |m, &e| m.max((e - e0).abs()))
    }

    pub fn killing_drift(&self) -> f64 {
        let k0 = self.killing_charge.first().copied().unwrap_or(0.0);
        self.killing_charge
            .iter()
            .fold(0.0f64, |m, &k| m.max((k - k0).abs()))
    }

    pub fn max_membership_residual(&self) -> f64 {
        self.samples
            .iter()
            .fold(0.0f64, |m, (_, p, _)| m.max(p.membership_residual()))
    }

    pub fn endpoint(&self) -> &(f64, ManifoldPoint, TangentVector) {
        self.samples.last().expect("trace has at least one sample")
    }
}

fn killing_monitor(spec: &MetricSpec, p: &ManifoldPoint, v: &TangentVector) -> f64 {
    match spec.action_or_default() {
        Some(action) => {
            let k = models::circle_field(action, p);
            cheeger::metric_eval(spec, v, &k).unwrap_or(f64::NAN)
        }
        None => {
            // Minkowski: charge of the time-translation field.
            let mut c = models::Coords::new();
            c.push(quat::ONE);
            let k = TangentVector::new(p.clone(), c);
            cheeger::metric_eval(spec, v, &k).unwrap_or(f64::NAN)
        }
    }
}

/// Integrate the geodesic of `spec` from `p` with initial velocity `v`.
///
/// Degenerate-locus encounters and step underflow are recorded in
/// `trace.abort` rather than discarding the partial trace.
pub fn integrate(
    p: &ManifoldPoint,
    v: &TangentVector,
    spec: &MetricSpec,
    cfg: &IntegratorConfig,
) -> Result<GeodesicTrace> {
    if !(cfg.step > 0.0 && cfg.step <= 1e-2) {
        return Err(GeoError::BadConfig(format!(
            "integrator step must lie in (0, 1e-2], got {}",
            cfg.step
        )));
    }
    if cfg.chart_hop_radius >= tol::CHART_RADIUS {
        return Err(GeoError::BadConfig(
            "chart hop radius must stay below the chart radius".into(),
        ));
    }
    let affine_path = matches!(
        (spec.kind, spec.model),
        (MetricKind::Ambient, _)
            | (MetricKind::QuotientSubmersion, _)
            | (MetricKind::Cheeger(_), Model::Minkowski)
    ) || matches!(spec.kind, MetricKind::Cheeger(t) if t == 0.0);
    if affine_path {
        integrate_projection(p, v, spec, cfg)
    } else {
        integrate_chart(p, v, spec, cfg)
    }
}

/// Constraint-projection integrator: exact for ambient-restriction metrics
/// (the geodesic condition is `ẍ ⊥ T_x M`) and for constant-coefficient
/// metrics on the flat model (straight lines).
fn integrate_projection(
    p: &ManifoldPoint,
    v: &TangentVector,
    spec: &MetricSpec,
    cfg: &IntegratorConfig,
) -> Result<GeodesicTrace> {
    let model = p.model;
    let mut x = p.to_amb();
    let mut vel = v.to_amb();
    let mut trace = fresh_trace(spec, p, v)?;
    let n_steps = (cfg.max_param / cfg.step).ceil() as usize;
    let stride = (n_steps / cfg.max_samples).max(1);
    let h = cfg.max_param / n_steps as f64;
    for step in 1..=n_steps {
        let acc = |x: &AmbVec, v: &AmbVec| -> AmbVec { projection_acceleration(model, x, v) };
        // RK4 on (x, v)
        let k1x = vel;
        let k1v = acc(&x, &vel);
        let x2 = x.axpy(0.5 * h, &k1x);
        let v2 = vel.axpy(0.5 * h, &k1v);
        let k2x = v2;
        let k2v = acc(&x2, &v2);
        let x3 = x.axpy(0.5 * h, &k2x);
        let v3 = vel.axpy(0.5 * h, &k2v);
        let k3x = v3;
        let k3v = acc(&x3, &v3);
        let x4 = x.axpy(h, &k3x);
        let v4 = vel.axpy(h, &k3v);
        let k4x = v4;
        let k4v = acc(&x4, &v4);
        x = x
            .axpy(h / 6.0, &k1x)
            .axpy(h / 3.0, &k2x)
            .axpy(h / 3.0, &k3x)
            .axpy(h / 6.0, &k4x);
        vel = vel
            .axpy(h / 6.0, &k1v)
            .axpy(h / 3.0, &k2v)
            .axpy(h / 3.0, &k3v)
            .axpy(h / 6.0, &k4v);
        // repair constraint drift
        x = models::retract_amb_unchecked(model, &x)?;
        vel = models::project_tangent_amb(model, &x, &vel);
        if step % stride == 0 || step == n_steps {
            let point = ManifoldPoint::new(model, models::amb_to_coords(&x));
            let velocity = TangentVector::from_amb(&point, &vel);
            record_sample(&mut trace, spec, step as f64 * h, point, velocity);
        }
    }
    Ok(trace)
}

/// `ẍ = -Σ λ_k ∇c_k` with `λ` solving `⟨∇c_i, ∇c_j⟩ λ_j = H_i(v, v)`,
/// where `H_i(v, v)` is the (exact) second derivative of the quadratic
/// constraint `c_i` along the straight line with velocity `v`.
fn projection_acceleration(model: Model, x: &AmbVec, v: &AmbVec) -> AmbVec {
    let grads = models::constraint_grads(model, x);
    if grads.is_empty() {
        return AmbVec::zeros(x.n);
    }
    let k = grads.len();
    let hess = constraint_hessian_quadratic(model, v);
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| grads[i].dot(&grads[j]));
    let rhs = nalgebra::DVector::from_fn(k, |i, _| hess[i]);
    let mut acc = AmbVec::zeros(x.n);
    if let Some(lambda) = crate::linalg::solve(&gram, &rhs) {
        for i in 0..k {
            acc = acc.axpy(-lambda[i], &grads[i]);
        }
    }
    acc
}

/// `d²/ds² c(x + s v)` for the quadratic membership constraints (independent
/// of `x`).
fn constraint_hessian_quadratic(model: Model, v: &AmbVec) -> arrayvec::ArrayVec<f64, 6> {
    // The constraints are quadratic forms, so the second derivative along a
    // line equals twice the same form evaluated on the velocity, with the
    // constant offset dropped.
    let mut shifted = models::constraints(model, v);
    match model {
        Model::Su2 | Model::S7 => {
            if let Some(c) = shifted.get_mut(0) {
                *c = 2.0 * (*c + 1.0);
            }
        }
        Model::Sp2 | Model::SigmaRep => {
            shifted[0] = 2.0 * (shifted[0] + 1.0);
            shifted[1] = 2.0 * (shifted[1] + 1.0);
            for c in shifted.iter_mut().skip(2) {
                *c *= 2.0;
            }
        }
        Model::Minkowski => {}
    }
    shifted
}

/// Chart-based RK4 on the first-order geodesic system
/// `u' = u̇`, `u̇'ᵏ = -Γᵏ_ij u̇ⁱ u̇ʲ`.
fn integrate_chart(
    p: &ManifoldPoint,
    v: &TangentVector,
    spec: &MetricSpec,
    cfg: &IntegratorConfig,
) -> Result<GeodesicTrace> {
    let mut trace = fresh_trace(spec, p, v)?;
    let mut chart = match curvature::build_chart(p, spec) {
        Ok(c) => c,
        Err(e) => {
            trace.abort = Some(e);
            return Ok(trace);
        }
    };
    let d = chart.dim();
    let mut u = vec![0.0; d];
    let mut udot = curvature::frame_coords(&chart, v);
    let mut s = 0.0;
    let mut h = cfg.step;
    let n_steps = (cfg.max_param / cfg.step).ceil() as usize;
    let stride = (n_steps / cfg.max_samples).max(1);
    let mut step_count = 0usize;
    let mut energy_prev = match chart_energy(&chart, &u, &udot, spec) {
        Ok(e) => e,
        Err(e) => {
            trace.abort = Some(e);
            return Ok(trace);
        }
    };
    let energy_scale = energy_prev.abs().max(1.0);
    while s < cfg.max_param {
        let rhs = |uu: &[f64], vv: &[f64]| -> Result<Vec<f64>> {
            let gamma = curvature::christoffel(&chart, uu, spec)?;
            let mut acc = vec![0.0; d];
            for k in 0..d {
                let mut a = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        a -= gamma.get(k, i, j) * vv[i] * vv[j];
                    }
                }
                acc[k] = a;
            }
            Ok(acc)
        };
        let attempt = |h: f64, u: &[f64], udot: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
            let k1u = udot.to_vec();
            let k1v = rhs(u, udot)?;
            let u2: Vec<f64> = u.iter().zip(&k1u).map(|(a, b)| a + 0.5 * h * b).collect();
            let v2: Vec<f64> = udot.iter().zip(&k1v).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2u = v2.clone();
            let k2v = rhs(&u2, &v2)?;
            let u3: Vec<f64> = u.iter().zip(&k2u).map(|(a, b)| a + 0.5 * h * b).collect();
            let v3: Vec<f64> = udot.iter().zip(&k2v).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3u = v3.clone();
            let k3v = rhs(&u3, &v3)?;
            let u4: Vec<f64> = u.iter().zip(&k3u).map(|(a, b)| a + h * b).collect();
            let v4: Vec<f64> = udot.iter().zip(&k3v).map(|(a, b)| a + h * b).collect();
            let k4u = v4.clone();
            let k4v = rhs(&u4, &v4)?;
            let un: Vec<f64> = (0..d)
                .map(|i| u[i] + h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]))
                .collect();
            let vn: Vec<f64> = (0..d)
                .map(|i| udot[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]))
                .collect();
            Ok((un, vn))
        };
        // adaptive halving on energy-drift spikes
        let accepted = loop {
            match attempt(h, &u, &udot) {
                Ok((un, vn)) => {
                    let e = match chart_energy(&chart, &un, &vn, spec) {
                        Ok(e) => e,
                        Err(err) => {
                            trace.abort = Some(err);
                            return Ok(trace);
                        }
                    };
                    if (e - energy_prev).abs() <= cfg.tol_cons * energy_scale || h <= cfg.step / 8.0
                    {
                        break (un, vn, e);
                    }
                    h *= 0.5;
                    if h < tol::STEP_UNDERFLOW {
                        trace.abort = Some(GeoError::StepUnderflow {
                            limit: tol::STEP_UNDERFLOW,
                        });
                        return Ok(trace);
                    }
                }
                Err(e) => {
                    trace.abort = Some(e);
                    return Ok(trace);
                }
            }
        };
        let (un, vn, e) = accepted;
        u = un;
        udot = vn;
        s += h;
        energy_prev = e;
        h = (h * 2.0).min(cfg.step);
        step_count += 1;
        // re-center the chart when the coordinates drift out
        let u_norm = u.iter().map(|c| c * c).sum::<f64>().sqrt();
        let record_now = step_count % stride == 0 || s >= cfg.max_param;
        if u_norm > cfg.chart_hop_radius || record_now {
            let (point, velocity) = match chart_state(&chart, &u, &udot) {
                Ok(pv) => pv,
                Err(e) => {
                    trace.abort = Some(e);
                    return Ok(trace);
                }
            };
            if record_now {
                record_sample(&mut trace, spec, s, point.clone(), velocity.clone());
            }
            if u_norm > cfg.chart_hop_radius {
                chart = match curvature::build_chart(&point, spec) {
                    Ok(c) => c,
                    Err(e) => {
                        trace.abort = Some(e);
                        return Ok(trace);
                    }
                };
                u = vec![0.0; d];
                udot = curvature::frame_coords(&chart, &velocity);
            }
        }
    }
    Ok(trace)
}

fn chart_energy(chart: &Chart, u: &[f64], udot: &[f64], spec: &MetricSpec) -> Result<f64> {
    let g = curvature::metric_components(chart, u, spec)?;
    let d = chart.dim();
    let mut e = 0.0;
    for i in 0..d {
        for j in 0..d {
            e += g[(i, j)] * udot[i] * udot[j];
        }
    }
    Ok(e)
}

/// Current ambient point and velocity of the chart state.
fn chart_state(chart: &Chart, u: &[f64], udot: &[f64]) -> Result<(ManifoldPoint, TangentVector)> {
    let point = chart.point(u)?;
    let mut vel = AmbVec::zeros(point.model.ambient_dim());
    for (i, c) in udot.iter().enumerate() {
        if *c != 0.0 {
            let push = chart.pushforward(u, i)?;
            vel = vel.axpy(*c, &push.to_amb());
        }
    }
    let vel = models::project_tangent_amb(point.model, &point.to_amb(), &vel);
    let velocity = TangentVector::from_amb(&point, &vel);
    Ok((point, velocity))
}

fn fresh_trace(spec: &MetricSpec, p: &ManifoldPoint, v: &TangentVector) -> Result<GeodesicTrace> {
    let causal = cheeger::causal_classify(spec, v).unwrap_or(CausalClass::Zero);
    let mut trace = GeodesicTrace {
        samples: Vec::new(),
        energy: Vec::new(),
        killing_charge: Vec::new(),
        causal,
        abort: None,
    };
    record_sample(&mut trace, spec, 0.0, p.clone(), v.clone());
    Ok(trace)
}

fn record_sample(
    trace: &mut GeodesicTrace,
    spec: &MetricSpec,
    s: f64,
    point: ManifoldPoint,
    velocity: TangentVector,
) {
    let e = cheeger::metric_eval(spec, &velocity, &velocity).unwrap_or(f64::NAN);
    let k = killing_monitor(spec, &point, &velocity);
    trace.energy.push(e);
    trace.killing_charge.push(k);
    trace.samples.push((s, point, velocity));
}

// ---------------------------------------------------------------------------
// Completeness probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CompletenessReport {
    pub n_traces: usize,
    pub aborts: usize,
    pub max_energy_drift: f64,
    pub max_killing_drift: f64,
    pub max_membership_residual: f64,
    pub max_ambient_speed: f64,
}

/// Integrate `n_traces` random time-like plus `n_traces` space-like geodesics
/// to the affine horizon and report violations. Completeness evidence is zero
/// aborts with bounded ambient velocity.
pub fn completeness_probe(
    model: Model,
    spec: &MetricSpec,
    n_traces: usize,
    horizon: f64,
    seed: u64,
    step: f64,
) -> Result<CompletenessReport> {
    use rayon::prelude::*;
    let cfg = IntegratorConfig {
        step,
        max_param: horizon,
        ..Default::default()
    };
    let jobs: Vec<(u64, CausalClass)> = (0..n_traces as u64)
        .map(|i| (i, CausalClass::TimeLike))
        .chain((0..n_traces as u64).map(|i| (i + n_traces as u64, CausalClass::SpaceLike)))
        .collect();
    let traces: Vec<GeodesicTrace> = jobs
        .par_iter()
        .map(|(i, want)| {
            let mut rng = Sampler::for_index(seed, *i);
            let (p, v) = sample_causal_state(&mut rng, model, spec, *want);
            integrate(&p, &v, spec, &cfg)
        })
        .collect::<Result<_>>()?;
    let mut report = CompletenessReport {
        n_traces: traces.len(),
        aborts: 0,
        max_energy_drift: 0.0,
        max_killing_drift: 0.0,
        max_membership_residual: 0.0,
        max_ambient_speed: 0.0,
    };
    for t in &traces {
        if t.abort.is_some() {
            report.aborts += 1;
        }
        report.max_energy_drift = report.max_energy_drift.max(t.energy_drift());
        report.max_killing_drift = report.max_killing_drift.max(t.killing_drift());
        report.max_membership_residual = report
            .max_membership_residual
            .max(t.max_membership_residual());
        for (_, _, v) in &t.samples {
            report.max_ambient_speed = report.max_ambient_speed.max(v.ambient_norm());
        }
    }
    Ok(report)
}

/// Rejection-sample a point and a unit-scale velocity of the requested causal
/// class under `spec`.
pub fn sample_causal_state(
    rng: &mut Sampler,
    model: Model,
    spec: &MetricSpec,
    want: CausalClass,
) -> (ManifoldPoint, TangentVector) {
    loop {
        let p = match spec.kind {
            MetricKind::Cheeger(t) if t < 0.0 && model != Model::Minkowski => {
                rng.principal_point(model, spec.action.expect("cheeger needs action"), t)
            }
            _ => rng.point(model),
        };
        for _ in 0..64 {
            let v = rng.tangent(&p);
            let n = v.ambient_norm();
            if n < 1e-9 {
                continue;
            }
            let v = v.scale(1.0 / n);
            if let Ok(class) = cheeger::causal_classify(spec, &v) {
                if class == want {
                    return (p, v);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Holonomy and dual holonomy transport
// ---------------------------------------------------------------------------

/// Derivative of the tangent projector along a curve, applied to `x`:
/// central difference of the analytic projector at `q ± δ q̇`.
fn projector_dot(model: Model, q: &AmbVec, qdot: &AmbVec, x: &AmbVec) -> AmbVec {
    let delta = 1e-6;
    let qp = models::retract_amb_unchecked(model, &q.axpy(delta, qdot)).unwrap_or(*q);
    let qm = models::retract_amb_unchecked(model, &q.axpy(-delta, qdot)).unwrap_or(*q);
    let pp = models::project_tangent_amb(model, &qp, x);
    let pm = models::project_tangent_amb(model, &qm, x);
    pp.sub(&pm).scale(1.0 / (2.0 * delta))
}

/// Transport a horizontal vector along the orbit curve
/// `γ(s) = act(qexp(i s), p)` by the basic-field equation
/// `∇_{γ̇} X = -A*_X γ̇ - S_X(γ̇)`.
///
/// Returns samples `(s, X(s))`; the solution stays horizontal to ~1e-6.
pub fn holonomy_transport(
    x0: &TangentVector,
    p: &ManifoldPoint,
    action: ActionTag,
    base: &MetricSpec,
    s_max: f64,
    n_steps: usize,
) -> Result<Vec<(f64, TangentVector)>> {
    let model = p.model;
    let gamma = |s: f64| -> ManifoldPoint {
        models::act(action, quat::qexp(quat::I.scale(s)), p).expect("orbit curve")
    };
    let h = s_max / n_steps as f64;
    let mut x = x0.to_amb();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((0.0, x0.clone()));
    for step in 0..n_steps {
        let s = step as f64 * h;
        let rhs = |s: f64, x: &AmbVec| -> Result<AmbVec> {
            let q = gamma(s);
            let q_amb = q.to_amb();
            let xt = TangentVector::from_amb(&q, x);
            let qdot = models::circle_field(action, &q);
            let astar = curvature::a_star(&xt, &qdot, action, base)?;
            let shape = curvature::shape_s(&xt, &qdot, action, base)?;
            let tangent_part = astar.add(&shape).scale(-1.0);
            let correction = projector_dot(model, &q_amb, &qdot.to_amb(), x);
            Ok(tangent_part.to_amb().add(&correction))
        };
        let k1 = rhs(s, &x)?;
        let k2 = rhs(s + 0.5 * h, &x.axpy(0.5 * h, &k1))?;
        let k3 = rhs(s + 0.5 * h, &x.axpy(0.5 * h, &k2))?;
        let k4 = rhs(s + h, &x.axpy(h, &k3))?;
        x = x
            .axpy(h / 6.0, &k1)
            .axpy(h / 3.0, &k2)
            .axpy(h / 3.0, &k3)
            .axpy(h / 6.0, &k4);
        let q_next = gamma(s + h);
        out.push((s + h, TangentVector::from_amb(&q_next, &x)));
    }
    Ok(out)
}

/// Transport a vertical vector along a horizontal geodesic of the base
/// metric by the dual-holonomy equation `∇_{ċ} ν = S_{ċ} ν - A*_{ċ} ν`.
///
/// The base geodesic is integrated in lockstep via the projection path.
pub fn dual_holonomy_transport(
    nu0: &TangentVector,
    p: &ManifoldPoint,
    x_dir: &TangentVector,
    action: ActionTag,
    base: &MetricSpec,
    s_max: f64,
    n_steps: usize,
) -> Result<Vec<(f64, ManifoldPoint, TangentVector)>> {
    let model = p.model;
    let h = s_max / n_steps as f64;
    let mut q = p.to_amb();
    let mut qdot = x_dir.to_amb();
    let mut nu = nu0.to_amb();
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push((0.0, p.clone(), nu0.clone()));
    for step in 0..n_steps {
        let rhs_nu = |q_amb: &AmbVec, qdot_amb: &AmbVec, nu: &AmbVec| -> Result<AmbVec> {
            let point = ManifoldPoint::new(model, models::amb_to_coords(q_amb));
            let cdot = TangentVector::from_amb(&point, qdot_amb);
            let nu_t = TangentVector::from_amb(&point, nu);
            let shape = curvature::shape_s(&cdot, &nu_t, action, base)?;
            let astar = curvature::a_star(&cdot, &nu_t, action, base)?;
            let tangent_part = shape.sub(&astar);
            let correction = projector_dot(model, q_amb, qdot_amb, nu);
            Ok(tangent_part.to_amb().add(&correction))
        };
        // joint RK4 on (q, qdot, nu)
        let acc = |x: &AmbVec, v: &AmbVec| projection_acceleration(model, x, v);
        let k1q = qdot;
        let k1v = acc(&q, &qdot);
        let k1n = rhs_nu(&q, &qdot, &nu)?;
        let q2 = q.axpy(0.5 * h, &k1q);
        let v2 = qdot.axpy(0.5 * h, &k1v);
        let n2 = nu.axpy(0.5 * h, &k1n);
        let k2q = v2;
        let k2v = acc(&q2, &v2);
        let k2n = rhs_nu(&q2, &v2, &n2)?;
        let q3 = q.axpy(0.5 * h, &k2q);
        let v3 = qdot.axpy(0.5 * h, &k2v);
        let n3 = nu.axpy(0.5 * h, &k2n);
        let k3q = v3;
        let k3v = acc(&q3, &v3);
        let k3n = rhs_nu(&q3, &v3, &n3)?;
        let q4 = q.axpy(h, &k3q);
        let v4 = qdot.axpy(h, &k3v);
        let n4 = nu.axpy(h, &k3n);
        let k4q = v4;
        let k4v = acc(&q4, &v4);
        let k4n = rhs_nu(&q4, &v4, &n4)?;
        q = q
            .axpy(h / 6.0, &k1q)
            .axpy(h / 3.0, &k2q)
            .axpy(h / 3.0, &k3q)
            .axpy(h / 6.0, &k4q);
        qdot = qdot
            .axpy(h / 6.0, &k1v)
            .axpy(h / 3.0, &k2v)
            .axpy(h / 3.0, &k3v)
            .axpy(h / 6.0, &k4v);
        nu = nu
            .axpy(h / 6.0, &k1n)
            .axpy(h / 3.0, &k2n)
            .axpy(h / 3.0, &k3n)
            .axpy(h / 6.0, &k4n);
        q = models::retract_amb_unchecked(model, &q)?;
        qdot = models::project_tangent_amb(model, &q, &qdot);
        let point = ManifoldPoint::new(model, models::amb_to_coords(&q));
        out.push((
            (step + 1) as f64 * h,
            point.clone(),
            TangentVector::from_amb(&point, &nu),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dual leaf probe
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DualLeafReport {
    pub vertical_dim: usize,
    /// Rank of span{A_X Y} over the horizontal frame at the base point.
    pub a_span_rank: usize,
    /// Rank of the tangent-projected endpoint cloud of the horizontal walks.
    pub walk_span_rank: usize,
    pub manifold_dim: usize,
    /// `a_span_rank == vertical_dim` and the walk cloud fills a neighborhood.
    pub single_leaf_evidence: bool,
}

/// Random piecewise-horizontal walk probe for the dual foliation.
pub fn dual_leaf_probe(
    p: &ManifoldPoint,
    action: ActionTag,
    base: &MetricSpec,
    n_steps: usize,
    seed: u64,
) -> Result<DualLeafReport> {
    let vertical = models::vertical_space(action, p);
    let vertical_dim = vertical.len();
    // rank of span{A_X Y}
    let horizontal = models::horizontal_space(action, p, base)?;
    let mut a_vals = Vec::new();
    for i in 0..horizontal.len() {
        for j in (i + 1)..horizontal.len() {
            let a = curvature::oneill_a(&horizontal[i], &horizontal[j], action, base)?;
            a_vals.push(a.to_amb());
        }
    }
    let a_span_rank = crate::linalg::span_rank(&a_vals, 1e-6);
    let hor_project = |q: &ManifoldPoint, w: &AmbVec| -> AmbVec {
        let tangent = models::project_tangent_amb(q.model, &q.to_amb(), w);
        let k = models::circle_field(action, q);
        let p_val = k.to_amb().dot(&k.to_amb());
        if p_val <= tol::EPS_ORBIT_COLLAPSE {
            tangent
        } else {
            let u = tangent.dot(&k.to_amb()) / p_val;
            tangent.axpy(-u, &k.to_amb())
        }
    };
    let walk_span_rank = horizontal_walk_rank(p, n_steps, seed, &hor_project)?;
    let manifold_dim = p.model.tangent_dim();
    Ok(DualLeafReport {
        vertical_dim,
        a_span_rank,
        walk_span_rank,
        manifold_dim,
        single_leaf_evidence: a_span_rank == vertical_dim && walk_span_rank == manifold_dim,
    })
}

/// Integrable test double: the flat model with the constant real direction as
/// the "vertical"; horizontal walks stay inside the imaginary hyperplane, the
/// A-tensor vanishes, and the dual leaf has codimension one.
pub fn dual_leaf_probe_flat_fixture(n_steps: usize, seed: u64) -> Result<DualLeafReport> {
    let p = ManifoldPoint::minkowski(quat::ZERO);
    let hor_project = |_q: &ManifoldPoint, w: &AmbVec| -> AmbVec {
        let mut out = *w;
        out[0] = 0.0; // kill the translation direction
        out
    };
    let walk_span_rank = horizontal_walk_rank(&p, n_steps, seed, &hor_project)?;
    Ok(DualLeafReport {
        vertical_dim: 1,
        a_span_rank: 0,
        walk_span_rank,
        manifold_dim: 4,
        single_leaf_evidence: false,
    })
}

fn horizontal_walk_rank(
    p: &ManifoldPoint,
    n_steps: usize,
    seed: u64,
    hor_project: &dyn Fn(&ManifoldPoint, &AmbVec) -> AmbVec,
) -> Result<usize> {
    let model = p.model;
    let dim = model.tangent_dim();
    let n_walks = 6 * dim;
    let total_len = 0.3;
    let h = total_len / n_steps as f64;
    let mut displacements = Vec::with_capacity(n_walks);
    for w in 0..n_walks {
        let mut rng = Sampler::for_index(seed, w as u64);
        let mut x = p.to_amb();
        for _ in 0..n_steps {
            let mut dir = AmbVec::zeros(x.n);
            for i in 0..x.n {
                dir[i] = rng.normal();
            }
            let q = ManifoldPoint::new(model, models::amb_to_coords(&x));
            let dir = hor_project(&q, &dir);
            let n = dir.norm();
            if n < 1e-9 {
                continue;
            }
            let dir = dir.scale(1.0 / n);
            // short horizontal flow with re-projection at substeps
            let substeps = 4;
            for _ in 0..substeps {
                let q = ManifoldPoint::new(model, models::amb_to_coords(&x));
                let d = hor_project(&q, &dir);
                let d = d.scale(1.0 / d.norm().max(1e-12));
                x = models::retract_amb_unchecked(model, &x.axpy(h / substeps as f64, &d))?;
            }
        }
        let disp = x.sub(&p.to_amb());
        displacements.push(models::project_tangent_amb(model, &p.to_amb(), &disp));
    }
    Ok(crate::linalg::span_rank(&displacements, 0.05))
}

// ---------------------------------------------------------------------------
// Fake-horizontal classifier
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FakeHorizontal {
    /// The isotropy algebra of the direction is the full circle algebra; the
    /// deformed-metric geodesic from it is time-like for positive parameter.
    FullAlgebra,
    TrivialAlgebra,
}

/// Classify a direction `x_dir` at a fixed point of the action by the norm of
/// `S̃_X(i) = ∇_X i*`, the derivative of the action field along the geodesic
/// direction, computed by central differences. Invariant under rescaling.
pub fn fake_horizontal_classify(
    action: ActionTag,
    p: &ManifoldPoint,
    x_dir: &TangentVector,
) -> Result<FakeHorizontal> {
    if !models::vertical_space(action, p).is_empty() {
        return Err(GeoError::NotFixedPoint);
    }
    let n = x_dir.ambient_norm();
    if n < 1e-12 {
        return Err(GeoError::BadDirection);
    }
    let x = x_dir.scale(1.0 / n);
    let h = tol::H_ACT;
    let model = p.model;
    let xp = models::retract_amb_unchecked(model, &p.to_amb().axpy(h, &x.to_amb()))?;
    let xm = models::retract_amb_unchecked(model, &p.to_amb().axpy(-h, &x.to_amb()))?;
    let kp = models::circle_field(action, &ManifoldPoint::new(model, models::amb_to_coords(&xp)));
    let km = models::circle_field(action, &ManifoldPoint::new(model, models::amb_to_coords(&xm)));
    let deriv = kp.to_amb().sub(&km.to_amb()).scale(1.0 / (2.0 * h));
    let deriv = models::project_tangent_amb(model, &p.to_amb(), &deriv);
    Ok(if deriv.norm() < tol::EPS_FAKE {
        FakeHorizontal::FullAlgebra
    } else {
        FakeHorizontal::TrivialAlgebra
    })
}
