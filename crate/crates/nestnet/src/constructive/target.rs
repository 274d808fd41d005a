use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{invalid, ConstructError};
use crate::numerics::{dyadic_ceil, pow_enclosure, q, qint, root_enclosure, Enclosure, ENCLOSURE_BITS, Q};

/// A nondecreasing modulus of continuity `ω` with `ω(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum ModulusSpec {
    /// `ω(r) = λ r^α` with `λ > 0` and `α = num/den ∈ (0, 1]`.
    Lipschitz { lambda: Q, alpha_num: u32, alpha_den: u32 },
    /// Step table `(r_i, ω_i)` sorted by `r`, starting at `(0, 0)`. Past the last entry `ω` stays at
    /// the last value.
    Table(Vec<(Q, Q)>),
}

impl ModulusSpec {
    pub fn lipschitz(lambda: Q) -> Self {
        ModulusSpec::Lipschitz { lambda, alpha_num: 1, alpha_den: 1 }
    }

    pub fn holder(lambda: Q, alpha_num: u32, alpha_den: u32) -> Self {
        ModulusSpec::Lipschitz { lambda, alpha_num, alpha_den }
    }

    pub fn validate(&self) -> Result<(), ConstructError> {
        match self {
            ModulusSpec::Lipschitz { lambda, alpha_num, alpha_den } => {
                if !lambda.is_positive() {
                    return Err(invalid("Lipschitz constant must be positive"));
                }
                if *alpha_num == 0 || alpha_num > alpha_den {
                    return Err(invalid("exponent must lie in (0, 1]"));
                }
            }
            ModulusSpec::Table(rows) => {
                if rows.first() != Some(&(Q::zero(), Q::zero())) {
                    return Err(invalid("modulus table must start at (0, 0)"));
                }
                for w in rows.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
                        return Err(invalid("modulus table must be increasing in r and nondecreasing in ω"));
                    }
                }
            }
        }
        Ok(())
    }

    fn enclose(&self, r: &Q) -> Enclosure {
        match self {
            ModulusSpec::Lipschitz { lambda, alpha_num, alpha_den } => {
                pow_enclosure(r, *alpha_num, *alpha_den).scale(lambda)
            }
            ModulusSpec::Table(rows) => {
                // the table only bounds ω between entries
                let below = rows.iter().rev().find(|(x, _)| x <= r).map(|(_, w)| w.clone()).unwrap_or_default();
                let above = rows.iter().find(|(x, _)| x >= r).map(|(_, w)| w.clone());
                let hi = above.unwrap_or_else(|| rows.last().map(|(_, w)| w.clone()).unwrap_or_default());
                Enclosure { lo: below, hi }
            }
        }
    }

    /// Rational upper bound of `ω(r)`.
    pub fn upper(&self, r: &Q) -> Q {
        self.enclose(r).hi
    }

    /// Rational lower bound of `ω(r)`.
    pub fn lower(&self, r: &Q) -> Q {
        self.enclose(r).lo
    }

    /// Upper bound of `ω(√m · r)`.
    pub fn upper_at_sqrt(&self, m: u32, r: &Q) -> Q {
        self.upper(&(root_enclosure(&qint(m as i64), 2).hi * r))
    }

    /// Lower bound of `ω(√m · r)`.
    pub fn lower_at_sqrt(&self, m: u32, r: &Q) -> Q {
        self.lower(&(root_enclosure(&qint(m as i64), 2).lo * r))
    }

    /// Lower bound of `ω(n^(-e/d))`.
    pub fn lower_at_rate(&self, n: u64, e: u32, d: u32) -> Q {
        let base = Q::new(1.into(), num_bigint::BigInt::from(n));
        self.lower(&pow_enclosure(&base, e, d).lo)
    }

    /// Upper bound of `ω(n^(-e/d))`.
    pub fn upper_at_rate(&self, n: u64, e: u32, d: u32) -> Q {
        let base = Q::new(1.into(), num_bigint::BigInt::from(n));
        self.upper(&pow_enclosure(&base, e, d).hi)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ModulusSpec::Table(rows) if rows.iter().all(|(_, w)| w.is_zero()))
    }
}

/// The region `[0,1]^d` minus bands `(k/K - δ, k/K)` along each axis, `k = 1..K-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriflingRegion {
    pub d: usize,
    pub k: u64,
    pub delta: Q,
}

impl TriflingRegion {
    pub fn new(d: usize, k: u64, delta: Q) -> Result<Self, ConstructError> {
        if d == 0 || k == 0 {
            return Err(invalid("dimension and K must be positive"));
        }
        if !delta.is_positive() || &delta * Q::from_integer((3 * k).into()) > Q::one() {
            return Err(invalid("band width must lie in (0, 1/(3K)]"));
        }
        Ok(Self { d, k, delta })
    }

    /// True when the coordinate lies in one of the open bands.
    pub fn coord_in_band(&self, x: &Q) -> bool {
        let kq = Q::from_integer(self.k.into());
        // x ∈ (j/K - δ, j/K)  ⟺  Kx ∈ (j - Kδ, j)
        let t = x * &kq;
        let j = t.floor() + Q::one();
        let jv = j.to_integer();
        if jv < 1.into() || jv > (self.k - 1).into() {
            return false;
        }
        t > j - &self.delta * kq
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        x.iter().any(|c| self.coord_in_band(c))
    }
}

type ExactFn = Arc<dyn Fn(&[Q]) -> Q + Send + Sync>;
type FloatFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A continuous target on `[0,1]^d` with exact and floating-point evaluators and a modulus.
#[derive(Clone)]
pub struct TargetFunction {
    name: String,
    d: usize,
    exact: ExactFn,
    approx: FloatFn,
    modulus: ModulusSpec,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction").field("name", &self.name).field("d", &self.d).finish()
    }
}

impl TargetFunction {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        exact: impl Fn(&[Q]) -> Q + Send + Sync + 'static,
        approx: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        modulus: ModulusSpec,
    ) -> Result<Self, ConstructError> {
        if d == 0 {
            return Err(invalid("dimension must be positive"));
        }
        modulus.validate()?;
        Ok(Self { name: name.into(), d, exact: Arc::new(exact), approx: Arc::new(approx), modulus })
    }

    /// `x ↦ |x - c|` on `[0,1]`.
    pub fn abs_shift(c: Q) -> Self {
        let cf = c.to_f64().unwrap_or(f64::NAN);
        let ce = c.clone();
        Self::new(
            format!("abs-shift:{c}"),
            1,
            move |x| (&x[0] - &ce).abs(),
            move |x| (x[0] - cf).abs(),
            ModulusSpec::lipschitz(Q::one()),
        )
        .expect("valid target")
    }

    /// `(x, y) ↦ |x - y|` on `[0,1]^2`, with `ω(r) = √2 r` rounded up to a dyadic rational.
    pub fn hinge2() -> Self {
        let lambda = dyadic_ceil(&root_enclosure(&qint(2), 2).hi, ENCLOSURE_BITS);
        Self::new("hinge2", 2, |x| (&x[0] - &x[1]).abs(), |x| (x[0] - x[1]).abs(), ModulusSpec::lipschitz(lambda))
            .expect("valid target")
    }

    /// The constant `c` on `[0,1]^d`.
    pub fn constant(d: usize, c: Q) -> Self {
        let cf = c.to_f64().unwrap_or(f64::NAN);
        Self::new(
            format!("const:{c}"),
            d,
            move |_| c.clone(),
            move |_| cf,
            ModulusSpec::Table(vec![(Q::zero(), Q::zero())]),
        )
        .expect("valid target")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modulus(&self) -> &ModulusSpec {
        &self.modulus
    }

    pub fn eval_exact(&self, x: &[Q]) -> Q {
        (self.exact)(x)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        (self.approx)(x)
    }

    /// Spot-check `|f(x) - f(y)| ≤ ω(|x - y|)` on random rational pairs.
    pub fn check_modulus(&self, samples: usize, seed: u64) -> Result<(), ConstructError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let den = 1i64 << 20;
        for _ in 0..samples {
            let x: Vec<Q> = (0..self.d).map(|_| q(rng.gen_range(0..=den), den)).collect();
            let y: Vec<Q> = (0..self.d).map(|_| q(rng.gen_range(0..=den), den)).collect();
            let dist2: Q = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            let dist = root_enclosure(&dist2, 2).hi;
            let gap = (self.eval_exact(&x) - self.eval_exact(&y)).abs();
            if gap > self.modulus.upper(&dist) {
                return Err(ConstructError::InconsistentModulus(format!(
                    "{} varies by {} over distance {}",
                    self.name, gap, dist
                )));
            }
        }
        Ok(())
    }
}
