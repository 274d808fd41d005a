use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::NumericsError;

/// Exact rational type used throughout the crate.
pub type Q = BigRational;

/// Which arithmetic a value lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Exact,
    Float,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Exact => f.write_str("exact"),
            Backend::Float => f.write_str("f64"),
        }
    }
}

/// A real number in one of two backends. Arithmetic never mixes them.
#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Exact(Q),
    Float(f64),
}

impl Scalar {
    pub fn exact(q: Q) -> Self {
        Scalar::Exact(q)
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(Q::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(v: i64) -> Self {
        Scalar::Exact(Q::from_integer(BigInt::from(v)))
    }

    pub fn float(v: f64) -> Self {
        Scalar::Float(v)
    }

    pub fn zero_like(backend: Backend) -> Self {
        match backend {
            Backend::Exact => Scalar::Exact(Q::zero()),
            Backend::Float => Scalar::Float(0.0),
        }
    }

    pub fn one_like(backend: Backend) -> Self {
        match backend {
            Backend::Exact => Scalar::Exact(Q::one()),
            Backend::Float => Scalar::Float(1.0),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Scalar::Exact(_) => Backend::Exact,
            Scalar::Float(_) => Backend::Float,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Scalar::Exact(q) => Some(q),
            Scalar::Float(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            Scalar::Float(v) => *v,
        }
    }

    /// Convert into the given backend. Exact to float rounds; float to exact is lossless.
    pub fn convert(&self, backend: Backend) -> Result<Scalar, NumericsError> {
        match (self, backend) {
            (Scalar::Exact(q), Backend::Float) => Ok(Scalar::Float(q.to_f64().unwrap_or(f64::NAN))),
            (Scalar::Float(v), Backend::Exact) => Q::from_float(*v).map(Scalar::Exact).ok_or(NumericsError::NonFinite),
            (s, _) => Ok(s.clone()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(q) => q.is_zero(),
            Scalar::Float(v) => *v == 0.0,
        }
    }

    fn pair<'a>(&'a self, other: &'a Scalar) -> Result<Pair<'a>, NumericsError> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Ok(Pair::Exact(a, b)),
            (Scalar::Float(a), Scalar::Float(b)) => Ok(Pair::Float(*a, *b)),
            _ => Err(NumericsError::BackendMismatch { left: self.backend(), right: other.backend() }),
        }
    }

    pub fn add(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        Ok(match self.pair(other)? {
            Pair::Exact(a, b) => Scalar::Exact(a + b),
            Pair::Float(a, b) => Scalar::Float(a + b),
        })
    }

    pub fn sub(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        Ok(match self.pair(other)? {
            Pair::Exact(a, b) => Scalar::Exact(a - b),
            Pair::Float(a, b) => Scalar::Float(a - b),
        })
    }

    pub fn mul(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        Ok(match self.pair(other)? {
            Pair::Exact(a, b) => Scalar::Exact(a * b),
            Pair::Float(a, b) => Scalar::Float(a * b),
        })
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar, NumericsError> {
        if other.is_zero() {
            return Err(NumericsError::DivisionByZero);
        }
        Ok(match self.pair(other)? {
            Pair::Exact(a, b) => Scalar::Exact(a / b),
            Pair::Float(a, b) => Scalar::Float(a / b),
        })
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(-q),
            Scalar::Float(v) => Scalar::Float(-v),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(q) => Scalar::Exact(q.abs()),
            Scalar::Float(v) => Scalar::Float(v.abs()),
        }
    }

    pub fn relu(&self) -> Scalar {
        match self {
            Scalar::Exact(q) if q.is_negative() => Scalar::Exact(Q::zero()),
            Scalar::Float(v) if *v < 0.0 => Scalar::Float(0.0),
            s => s.clone(),
        }
    }

    pub fn try_cmp(&self, other: &Scalar) -> Result<std::cmp::Ordering, NumericsError> {
        match self.pair(other)? {
            Pair::Exact(a, b) => Ok(a.cmp(b)),
            Pair::Float(a, b) => a.partial_cmp(&b).ok_or(NumericsError::NonFinite),
        }
    }
}

enum Pair<'a> {
    Exact(&'a Q, &'a Q),
    Float(f64, f64),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(q) => write!(f, "{}", q),
            Scalar::Float(v) => write!(f, "{}", v),
        }
    }
}

impl From<Q> for Scalar {
    fn from(q: Q) -> Self {
        Scalar::Exact(q)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

/// Parse `p/q` or a bare integer `p` into an exact rational. Decimal notation is rejected.
pub fn parse_rational(text: &str) -> Result<Q, NumericsError> {
    let t = text.trim();
    let bad = || NumericsError::Parse(t.to_string());
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| bad())?;
    let den = BigInt::from_str(den).map_err(|_| bad())?;
    if den.is_zero() {
        return Err(NumericsError::DivisionByZero);
    }
    Ok(Q::new(num, den))
}

/// Build an exact rational from small integers.
pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational `2^e` for any signed exponent.
pub fn pow2(e: i64) -> Q {
    let p = BigInt::one() << (e.unsigned_abs() as usize);
    if e >= 0 {
        Q::from_integer(p)
    } else {
        Q::new(BigInt::one(), p)
    }
}

pub fn qint(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Arithmetic needed by the compiled evaluators; implemented for exact rationals and f64.
pub trait Field: Clone + PartialOrd + fmt::Debug {
    fn additive_zero() -> Self;
    fn from_q(q: &Q) -> Self;
    fn from_f64(v: f64) -> Self;
    fn vanishes(&self) -> bool;
    fn add_to(&mut self, v: &Self);
    fn sub_from(&mut self, v: &Self);
    fn add_prod(&mut self, a: &Self, b: &Self);
    fn relu_in_place(&mut self);
}

impl Field for Q {
    fn additive_zero() -> Self {
        Zero::zero()
    }
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn from_f64(v: f64) -> Self {
        Q::from_float(v).expect("finite weight")
    }
    fn vanishes(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_to(&mut self, v: &Self) {
        *self += v;
    }
    fn sub_from(&mut self, v: &Self) {
        *self -= v;
    }
    fn add_prod(&mut self, a: &Self, b: &Self) {
        if !Zero::is_zero(b) {
            *self += a * b;
        }
    }
    fn relu_in_place(&mut self) {
        if self.is_negative() {
            *self = Zero::zero();
        }
    }
}

impl Field for f64 {
    fn additive_zero() -> Self {
        0.0
    }
    fn from_q(q: &Q) -> Self {
        q.to_f64().unwrap_or(f64::NAN)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn vanishes(&self) -> bool {
        *self == 0.0
    }
    fn add_to(&mut self, v: &Self) {
        *self += *v;
    }
    fn sub_from(&mut self, v: &Self) {
        *self -= *v;
    }
    fn add_prod(&mut self, a: &Self, b: &Self) {
        *self += *a * *b;
    }
    fn relu_in_place(&mut self) {
        if *self < 0.0 {
            *self = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values_are_reduced() {
        let s = Scalar::ratio(6, -8);
        let q = s.as_exact().unwrap();
        assert_eq!(q.numer(), &BigInt::from(-3));
        assert_eq!(q.denom(), &BigInt::from(4));
    }

    #[test]
    fn mixing_backends_is_an_error() {
        let a = Scalar::ratio(1, 2);
        let b = Scalar::float(0.5);
        assert!(matches!(a.add(&b), Err(NumericsError::BackendMismatch { .. })));
        assert!(a.mul(&Scalar::ratio(2, 3)).is_ok());
    }

    #[test]
    fn parse_accepts_fractions_only() {
        assert_eq!(parse_rational("3/12").unwrap(), q(1, 4));
        assert_eq!(parse_rational("-7").unwrap(), qint(-7));
        assert!(parse_rational("0.5").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn pow2_signs() {
        assert_eq!(pow2(3), qint(8));
        assert_eq!(pow2(-3), q(1, 8));
        assert_eq!(pow2(0), qint(1));
    }
}
