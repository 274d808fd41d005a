//! Rational enclosures for irrational quantities such as `√d` and `r^α`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::scalar::Q;

/// Binary digits of precision used for root enclosures.
pub const ENCLOSURE_BITS: u32 = 64;

/// A closed rational interval `[lo, hi]` known to contain some real value.
#[derive(Clone, Debug, PartialEq)]
pub struct Enclosure {
    pub lo: Q,
    pub hi: Q,
}

impl Enclosure {
    pub fn exact(v: Q) -> Self {
        Self { lo: v.clone(), hi: v }
    }

    /// Product of two enclosures of nonnegative values.
    pub fn mul_nonneg(&self, other: &Enclosure) -> Enclosure {
        Enclosure { lo: &self.lo * &other.lo, hi: &self.hi * &other.hi }
    }

    /// Scale by a nonnegative rational.
    pub fn scale(&self, c: &Q) -> Enclosure {
        Enclosure { lo: &self.lo * c, hi: &self.hi * c }
    }

    pub fn mid_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        ((&self.lo + &self.hi) / Q::from_integer(2.into())).to_f64().unwrap_or(f64::NAN)
    }
}

/// Enclosure of `v^(1/k)` for `v ≥ 0`.
pub fn root_enclosure(v: &Q, k: u32) -> Enclosure {
    assert!(!v.is_negative(), "root of a negative value");
    assert!(k >= 1);
    if k == 1 || v.is_zero() {
        return Enclosure::exact(v.clone());
    }
    // v^(1/k) = (a b^(k-1))^(1/k) / b with v = a/b
    let a = v.numer();
    let b = v.denom();
    let scale = BigInt::one() << (ENCLOSURE_BITS as usize);
    let radicand = a * b.pow(k - 1) * scale.pow(k);
    let r = radicand.nth_root(k);
    let den = b * &scale;
    let lo = Q::new(r.clone(), den.clone());
    let exact = r.pow(k) == radicand;
    let hi = if exact { lo.clone() } else { Q::new(r + 1u32, den) };
    Enclosure { lo, hi }
}

/// Enclosure of `v^(p/q)` for `v ≥ 0` and positive integers `p, q`.
pub fn pow_enclosure(v: &Q, p: u32, q: u32) -> Enclosure {
    let vp = num_traits::pow::pow(v.clone(), p as usize);
    root_enclosure(&vp, q)
}

/// Largest multiple of `2^-bits` that is ≤ `v`.
pub fn dyadic_floor(v: &Q, bits: u32) -> Q {
    let scale = BigInt::one() << (bits as usize);
    let scaled = v * Q::from_integer(scale.clone());
    Q::new(scaled.floor().to_integer(), scale)
}

/// Smallest multiple of `2^-bits` that is ≥ `v`.
pub fn dyadic_ceil(v: &Q, bits: u32) -> Q {
    let scale = BigInt::one() << (bits as usize);
    let scaled = v * Q::from_integer(scale.clone());
    Q::new(scaled.ceil().to_integer(), scale)
}

/// Largest power of two (possibly negative exponent) that is ≤ `v`, for `v > 0`.
pub fn pow2_floor(v: &Q) -> Q {
    assert!(v.is_positive());
    let two = Q::from_integer(2.into());
    let mut p = Q::one();
    while &p > v {
        p /= &two;
    }
    while &(&p * &two) <= v {
        p *= &two;
    }
    p
}
