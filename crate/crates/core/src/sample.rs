//! Deterministic seeded sampling.
//!
//! All random points and directions come from a counter-based generator:
//! sample `k` of a run with seed `s` is drawn from an independent ChaCha
//! stream keyed by `(s, k)`, so sweeps are reproducible bit-for-bit across
//! platforms and independent of thread scheduling.

use crate::models::{ActionTag, ManifoldPoint, Model, TangentVector};
use crate::quat::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded sampler; cheap to construct per sample index.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for sample `index` of a seeded sweep.
    pub fn for_index(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        Self { rng }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Standard normal via Box-Muller (two uniforms; platform-stable).
    pub fn normal(&mut self) -> f64 {
        let u1: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.rng.gen_range(0.0..std::f64::consts::TAU);
        (-2.0 * u1.ln()).sqrt() * u2.cos()
    }

    pub fn gaussian_quaternion(&mut self) -> Quaternion {
        Quaternion::new(self.normal(), self.normal(), self.normal(), self.normal())
    }

    /// Quaternion with components uniform in [-1, 1].
    pub fn quaternion_ball(&mut self) -> Quaternion {
        Quaternion::new(
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
            self.uniform(-1.0, 1.0),
        )
    }

    /// Uniform unit quaternion (normalized Gaussian).
    pub fn unit_quaternion(&mut self) -> Quaternion {
        loop {
            let q = self.gaussian_quaternion();
            if q.norm() > 1e-6 {
                return q.normalized();
            }
        }
    }

    /// Uniform element of the circle span{1, i}.
    pub fn circle_element(&mut self) -> Quaternion {
        let theta = self.uniform(-std::f64::consts::PI, std::f64::consts::PI);
        crate::quat::qexp(crate::quat::I.scale(theta))
    }

    /// Uniform point on the model (Gaussian ambient + retraction; exact
    /// uniform measure on the spheres, Haar-like on Sp(2)).
    pub fn point(&mut self, model: Model) -> ManifoldPoint {
        loop {
            let mut coords = arrayvec::ArrayVec::<Quaternion, 4>::new();
            for _ in 0..model.quaternion_count() {
                coords.push(self.gaussian_quaternion());
            }
            let raw = ManifoldPoint { model, coords };
            if let Ok(p) = crate::models::retract_far(model, &raw) {
                return p;
            }
        }
    }

    /// Random tangent vector at `p` with Gaussian ambient components.
    pub fn tangent(&mut self, p: &ManifoldPoint) -> TangentVector {
        let mut coords = arrayvec::ArrayVec::<Quaternion, 4>::new();
        for _ in 0..p.model.quaternion_count() {
            coords.push(self.gaussian_quaternion());
        }
        crate::models::project_tangent(p, &coords)
    }

    /// Random point in the Lorentz regime of the `t = -r²` deformation:
    /// rejection-samples until `1 + t·P` is safely negative, so the deformed
    /// metric is Lorentzian (outside the collapsed collar around the fixed set).
    pub fn principal_point(&mut self, model: Model, action: ActionTag, t: f64) -> ManifoldPoint {
        loop {
            let p = self.point(model);
            let pt = crate::models::orbit_tensor_value(&p, action);
            if let Some(pval) = pt {
                if 1.0 + t * pval < -crate::tol::LORENTZ_MARGIN {
                    return p;
                }
            }
        }
    }
}
