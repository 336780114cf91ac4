//! Exact quaternion arithmetic.
//!
//! All manifold computations in this crate bottom out in the Hamilton product
//! on `w + x i + y j + z k`. Quaternions are plain value types; every
//! operation is a pure function, so sweeps parallelize freely.

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeTuple;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::{Add, Mul, Neg, Sub};

/// A quaternion `w + x i + y j + z k` over `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);
pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Purely real quaternion.
    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Real part.
    pub fn re(self) -> f64 {
        self.w
    }

    /// Imaginary part as a quaternion.
    pub fn im(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    pub fn is_zero(self) -> bool {
        self.w == 0.0 && self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    /// Multiplicative inverse `conj(q) / |q|²`. Returns zero for the zero quaternion.
    pub fn inverse(self) -> Self {
        let n2 = self.norm_sq();
        if n2 == 0.0 {
            return ZERO;
        }
        self.conj().scale(1.0 / n2)
    }

    /// Whether the quaternion lies in the complex line `span{1, i}`.
    pub fn is_complex(self, tol: f64) -> bool {
        self.y.abs() <= tol && self.z.abs() <= tol
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return ZERO;
        }
        self.scale(1.0 / n)
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.w + rhs.w,
            self.x + rhs.x,
            self.y + rhs.y,
            self.z + rhs.z,
        )
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(
            self.w - rhs.w,
            self.x - rhs.x,
            self.y - rhs.y,
            self.z - rhs.z,
        )
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl Mul for Quaternion {
    type Output = Self;
    /// Hamilton product.
    fn mul(self, r: Self) -> Self {
        Self::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// Hamilton product as a free function, for iterator chains.
pub fn mul(p: Quaternion, q: Quaternion) -> Quaternion {
    p * q
}

/// Euclidean inner product `Re(p · conj(q))`; symmetric, bilinear,
/// positive-definite, and equal to the componentwise dot product.
pub fn inner(p: Quaternion, q: Quaternion) -> f64 {
    p.w * q.w + p.x * q.x + p.y * q.y + p.z * q.z
}

/// Quaternion exponential `e^{Re q} (cos|Im q| + sin|Im q| · Im q / |Im q|)`.
///
/// For pure-imaginary unit `u`, `qexp(θu)` is the unit quaternion rotating by
/// `θ` in the `{1, u}` plane; the `|Im q| = 0` branch returns `e^{Re q}`.
pub fn qexp(q: Quaternion) -> Quaternion {
    let s = q.re().exp();
    let im = q.im();
    let theta = im.norm();
    if theta == 0.0 {
        return Quaternion::real(s);
    }
    let axis = im.scale(1.0 / theta);
    (Quaternion::real(theta.cos()) + axis.scale(theta.sin())).scale(s)
}

/// Quaternionic commutator `[v, a] = v a - a v`; vanishes iff `v`, `a` commute.
pub fn commutator(v: Quaternion, a: Quaternion) -> Quaternion {
    v * a - a * v
}

/// Conjugation operator `C_ā(x) = ā x a`; linear in `x`, scales norms by |a|².
pub fn conj_op(a: Quaternion, x: Quaternion) -> Quaternion {
    a.conj() * x * a
}

// Serialize as the flat 4-tuple [w, x, y, z]; field order is part of the
// external JSON schema.
impl Serialize for Quaternion {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        t.serialize_element(&self.w)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&self.z)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct QVisitor;
        impl<'de> Visitor<'de> for QVisitor {
            type Value = Quaternion;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a [w, x, y, z] quadruple")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Quaternion, A::Error> {
                let w = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(0, &self))?;
                let x = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(1, &self))?;
                let y = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(2, &self))?;
                let z = seq
                    .next_element()?
                    .ok_or_else(|| serde::de::Error::invalid_length(3, &self))?;
                Ok(Quaternion::new(w, x, y, z))
            }
        }
        deserializer.deserialize_tuple(4, QVisitor)
    }
}
