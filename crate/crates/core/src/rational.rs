//! Exact rational quaternions for the algebraic identity test-suite.
//!
//! The horizontality lemmas reduce to polynomial identities in quaternion
//! components; checking them over rationals removes floating-point doubt.
//! Curvature work needs transcendental functions, so this mode exists only
//! for the identity checks.

use std::ops::{Add, Mul, Neg, Sub};

/// Reduced fraction over i128.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rat {
    pub num: i128,
    pub den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Rat {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Self {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn int(n: i128) -> Self {
        Self { num: n, den: 1 }
    }

    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    pub fn is_zero(self) -> bool {
        self.num == 0
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, r: Rat) -> Rat {
        Rat::new(self.num * r.den + r.num * self.den, self.den * r.den)
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, r: Rat) -> Rat {
        Rat::new(self.num * r.den - r.num * self.den, self.den * r.den)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, r: Rat) -> Rat {
        Rat::new(self.num * r.num, self.den * r.den)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat {
            num: -self.num,
            den: self.den,
        }
    }
}

/// Quaternion with exact rational components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RQuat {
    pub w: Rat,
    pub x: Rat,
    pub y: Rat,
    pub z: Rat,
}

impl RQuat {
    pub fn new(w: Rat, x: Rat, y: Rat, z: Rat) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_ints(w: i128, x: i128, y: i128, z: i128) -> Self {
        Self::new(Rat::int(w), Rat::int(x), Rat::int(y), Rat::int(z))
    }

    pub const I: RQuat = RQuat {
        w: Rat::ZERO,
        x: Rat::ONE,
        y: Rat::ZERO,
        z: Rat::ZERO,
    };

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(self) -> Rat {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// Re(p · conj(q)), the exact inner product.
    pub fn inner(self, q: RQuat) -> Rat {
        self.w * q.w + self.x * q.x + self.y * q.y + self.z * q.z
    }

    pub fn is_zero(self) -> bool {
        self.w.is_zero() && self.x.is_zero() && self.y.is_zero() && self.z.is_zero()
    }
}

impl Add for RQuat {
    type Output = RQuat;
    fn add(self, r: RQuat) -> RQuat {
        RQuat::new(self.w + r.w, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl Sub for RQuat {
    type Output = RQuat;
    fn sub(self, r: RQuat) -> RQuat {
        RQuat::new(self.w - r.w, self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl Mul for RQuat {
    type Output = RQuat;
    fn mul(self, r: RQuat) -> RQuat {
        RQuat::new(
            self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        )
    }
}

impl Neg for RQuat {
    type Output = RQuat;
    fn neg(self) -> RQuat {
        RQuat::new(-self.w, -self.x, -self.y, -self.z)
    }
}
