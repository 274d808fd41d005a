use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::basic::mid_net;
use super::builder::{affine_net, scalar_affine, Terms};
use super::fit::point_fit_net_with;
use super::floor::{phi1_grid_net_with, replicate};
use super::target::TargetFunction;
use super::{invalid, BuildLimits, ConstructError};
use crate::ir::{compose, parallel, AffineMap, Compiled, NestNet};
use crate::numerics::{dyadic_ceil, pow2, qint, ExactPwl, PiecewiseLinear1D, ENCLOSURE_BITS, Q};

/// Which `L^p` norm the approximator is tuned for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PNorm {
    Finite(u32),
    Infinity,
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => write!(f, "inf"),
        }
    }
}

/// Scalar pieces of the interior network, kept for fast structured evaluation.
#[derive(Clone, Debug)]
pub struct ApproximatorParts {
    /// Grid index along one axis.
    pub phi1: NestNet,
    /// `t ↦ ψ2(2K^d t) + f(0) - W`.
    pub head: NestNet,
    pub psi1: AffineMap,
    pub phi1_exec: Compiled<Q>,
    pub head_exec: Compiled<Q>,
}

/// A constructed approximator together with the quantities used to build it.
#[derive(Clone, Debug)]
pub struct Approximator {
    pub net: NestNet,
    /// The network before any median rounds.
    pub interior: NestNet,
    /// `None` when the target is constant.
    pub parts: Option<ApproximatorParts>,
    pub n: u32,
    pub s: u32,
    pub d: usize,
    pub k: u64,
    pub delta: Q,
    pub p: PNorm,
    pub eps: Q,
    pub shift: Q,
    pub f0: Q,
    pub mid_rounds: usize,
}

impl Approximator {
    /// Evaluate through the scalar parts instead of the full network. Agrees with `net` exactly.
    pub fn eval_structured(&self, x: &[Q]) -> Q {
        self.eval_round(self.mid_rounds, &mut x.to_vec())
    }

    fn eval_round(&self, round: usize, x: &mut Vec<Q>) -> Q {
        if round == 0 {
            return self.eval_interior(x);
        }
        let axis = round - 1;
        let orig = x[axis].clone();
        x[axis] = &orig - &self.delta;
        let a = self.eval_round(round - 1, x);
        x[axis] = orig.clone();
        let b = self.eval_round(round - 1, x);
        x[axis] = &orig + &self.delta;
        let c = self.eval_round(round - 1, x);
        x[axis] = orig;
        let mut v = [a, b, c];
        v.sort();
        v[1].clone()
    }

    fn eval_interior(&self, x: &[Q]) -> Q {
        let Some(parts) = &self.parts else {
            return self.f0.clone();
        };
        let t = x
            .iter()
            .enumerate()
            .map(|(i, xi)| parts.phi1_exec.eval1(xi) * parts.psi1.weight(0, i).as_exact().expect("exact map"))
            .sum::<Q>();
        parts.head_exec.eval1(&t)
    }
}

/// Largest `K` with `K^d ≤ n^(s+1)`.
pub fn grid_side(n: u32, s: u32, d: usize) -> u64 {
    let target = BigInt::from(n).pow(s + 1);
    let mut k: u64 = target.nth_root(d as u32).to_u64().unwrap_or(u64::MAX);
    while BigInt::from(k + 1).pow(d as u32) <= target {
        k += 1;
    }
    while k > 0 && BigInt::from(k).pow(d as u32) > target {
        k -= 1;
    }
    k
}

/// `x ↦ Σ_{i<d} x_i / K^i + x_d / (2K^d)`, injective from `{0..K-1}^d` into `{j/(2K^d)}`.
pub fn psi1_map(d: usize, k: u64) -> AffineMap {
    let kq = qint(k as i64);
    let mut w = Vec::with_capacity(d);
    let mut scale = Q::one();
    for _ in 0..d.saturating_sub(1) {
        scale /= &kq;
        w.push(scale.clone());
    }
    w.push(&scale / (&kq * qint(2)));
    AffineMap::exact(1, d, w, vec![Q::zero()])
}

/// Piecewise-linear `g` on `[0,1]` with breakpoints `j/(2K^d)`: the grid values on the first set,
/// linear over each connecting interval, and `at_one` at `1`. `values` is indexed by `β` in
/// lexicographic order with `β_1` most significant.
pub fn g_builder(values: &[Q], at_one: &Q, k: u64, d: usize) -> Result<PiecewiseLinear1D, ConstructError> {
    let blocks = k.checked_pow(d as u32 - 1).ok_or_else(|| invalid("K^d overflows"))? as usize;
    let k_us = k as usize;
    if values.len() != blocks * k_us {
        return Err(ConstructError::DimMismatch(format!("expected {} grid values", blocks * k_us)));
    }
    if values.iter().chain([at_one]).any(|v| v.is_negative()) {
        return Err(invalid("grid values must be nonnegative"));
    }
    let total = 2 * blocks * k_us;
    let denom = qint(total as i64);
    let gap = qint(k as i64 + 1);
    let mut xs = Vec::with_capacity(total + 1);
    let mut ys = Vec::with_capacity(total + 1);
    for i in 0..blocks {
        for j in 0..k_us {
            xs.push(qint((2 * k_us * i + j) as i64) / &denom);
            ys.push(values[i * k_us + j].clone());
        }
        let left = &values[i * k_us + k_us - 1];
        let right = if i + 1 == blocks { at_one } else { &values[(i + 1) * k_us] };
        for j in k_us..2 * k_us {
            let off = qint((j - (k_us - 1)) as i64);
            xs.push(qint((2 * k_us * i + j) as i64) / &denom);
            ys.push(left + (right - left) * off / &gap);
        }
    }
    xs.push(Q::one());
    ys.push(at_one.clone());
    Ok(ExactPwl::new(xs, ys, Q::zero(), Q::zero())?.into())
}

fn constant_approximator(f: &TargetFunction, n: u32, s: u32, k: u64, delta: Q, p: PNorm) -> Approximator {
    let d = f.dim();
    let f0 = f.eval_exact(&vec![Q::zero(); d]);
    let net = affine_net(d, vec![(Vec::new(), f0.clone())]);
    Approximator {
        interior: net.clone(),
        net,
        parts: None,
        n,
        s,
        d,
        k,
        delta,
        p,
        eps: Q::zero(),
        shift: Q::zero(),
        f0,
        mid_rounds: 0,
    }
}

/// The height-`s` network that approximates `f` off the bands of width `δ`.
pub fn approximator_interior(f: &TargetFunction, n: u32, s: u32, delta: &Q) -> Result<Approximator, ConstructError> {
    interior_with(f, n, s, delta, PNorm::Finite(1), &BuildLimits::default())
}

fn interior_with(
    f: &TargetFunction,
    n: u32,
    s: u32,
    delta: &Q,
    p: PNorm,
    limits: &BuildLimits,
) -> Result<Approximator, ConstructError> {
    if n == 0 || s == 0 {
        return Err(invalid("n and s must be positive"));
    }
    let d = f.dim();
    let k = grid_side(n, s, d);
    if k == 0 {
        return Err(invalid("grid side K is zero"));
    }
    let kq = qint(k as i64);
    if !delta.is_positive() || delta * qint(3) * &kq > Q::one() {
        return Err(invalid("δ must lie in (0, 1/(3K)]"));
    }
    let omega = f.modulus();
    let spread = omega.upper_at_sqrt(d as u32, &Q::one());
    if spread.is_zero() {
        return Ok(constant_approximator(f, n, s, k, delta.clone(), p));
    }
    let shift = dyadic_ceil(&spread, ENCLOSURE_BITS);
    let f0 = f.eval_exact(&vec![Q::zero(); d]);

    let blocks = k.pow(d as u32 - 1) as usize;
    let mut values = Vec::with_capacity(blocks * k as usize);
    let mut beta = vec![0u64; d];
    for _ in 0..blocks * k as usize {
        let x: Vec<Q> = beta.iter().map(|b| qint(*b as i64) / &kq).collect();
        values.push(f.eval_exact(&x) - &f0 + &shift);
        for t in (0..d).rev() {
            beta[t] += 1;
            if beta[t] < k {
                break;
            }
            beta[t] = 0;
        }
    }
    let at_one = f.eval_exact(&vec![Q::one(); d]) - &f0 + &shift;
    if values.iter().chain([&at_one]).any(|v| v.is_negative()) {
        return Err(ConstructError::InconsistentModulus(format!(
            "{} varies by more than ω(√d) from its value at the origin",
            f.name()
        )));
    }
    let g = g_builder(&values, &at_one, k, d)?.to_exact()?;
    let fine = omega.upper_at_sqrt(d as u32, &(Q::one() / &kq));
    let eps = dyadic_ceil(&fine.max(&spread / &kq), ENCLOSURE_BITS);
    let samples = &g.values()[..g.len() - 1];
    let fit = point_fit_net_with(samples, &eps, 2 * n, s, limits).map_err(|e| match e {
        ConstructError::GapViolated { index } => ConstructError::InconsistentModulus(format!(
            "grid values of {} jump by more than ε = {eps} at index {index}",
            f.name()
        )),
        other => other,
    })?;
    let points = qint(2 * k.pow(d as u32) as i64);
    let head = compose(&scalar_affine(Q::one(), &f0 - &shift), &compose(&fit, &scalar_affine(points, Q::zero()))?)?;

    let phi1 = phi1_grid_net_with(k, delta, n, s, limits)?;
    let grid = replicate(&phi1, d)?;
    let psi1 = psi1_map(d, k);
    let interior = compose(&head, &compose(&NestNet::affine(psi1.clone()), &grid)?)?;
    Ok(Approximator {
        net: interior.clone(),
        interior,
        parts: Some(ApproximatorParts {
            phi1_exec: phi1.compile_exact()?,
            head_exec: head.compile_exact()?,
            phi1,
            head,
            psi1,
        }),
        n,
        s,
        d,
        k,
        delta: delta.clone(),
        p,
        eps,
        shift,
        f0,
        mid_rounds: 0,
    })
}

/// The full approximator for the `L^p` norm: δ chosen from the target's modulus, plus `d` rounds
/// of medians over `±δ` shifts when `p = ∞`.
pub fn approximator_full(f: &TargetFunction, n: u32, s: u32, p: PNorm) -> Result<Approximator, ConstructError> {
    approximator_full_with(f, n, s, p, &BuildLimits::default())
}

pub fn approximator_full_with(
    f: &TargetFunction,
    n: u32,
    s: u32,
    p: PNorm,
    limits: &BuildLimits,
) -> Result<Approximator, ConstructError> {
    if n == 0 || s == 0 {
        return Err(invalid("n and s must be positive"));
    }
    let d = f.dim();
    if p == PNorm::Infinity && d > limits.max_infinity_dim {
        return Err(ConstructError::ResourceGuard {
            what: "dimension for p = ∞",
            value: d.to_string(),
            limit: limits.max_infinity_dim as u64,
        });
    }
    if let PNorm::Finite(0) = p {
        return Err(invalid("p must be at least 1"));
    }
    let k = grid_side(n, s, d);
    let kq = qint(k as i64);
    let omega = f.modulus();
    let spread = omega.upper_at_sqrt(d as u32, &Q::one());
    // largest power of two ≤ 1/(3K)
    let mut e: i64 = 0;
    while pow2(-e) * qint(3) * &kq > Q::one() {
        e += 1;
    }
    if spread.is_zero() {
        return Ok(constant_approximator(f, n, s, k, pow2(-e), p));
    }
    let target = omega.lower_at_rate(n as u64, s + 1, d as u32);
    if target.is_zero() {
        return Err(ConstructError::InconsistentModulus("modulus lower bound vanishes at the target scale".into()));
    }
    let f0 = f.eval_exact(&vec![Q::zero(); d]);
    let w = dyadic_ceil(&spread, ENCLOSURE_BITS);
    let dq = qint(d as i64);
    let admissible = |delta: &Q| -> bool {
        match p {
            PNorm::Finite(pp) => {
                let amp = num_traits::pow::pow(f0.abs() * qint(2) + &w * qint(2), pp as usize);
                &kq * &dq * delta * amp <= num_traits::pow::pow(target.clone(), pp as usize)
            }
            PNorm::Infinity => &dq * omega.upper(delta) <= target,
        }
    };
    const MAX_HALVINGS: i64 = 4096;
    while !admissible(&pow2(-e)) {
        e += 1;
        if e > MAX_HALVINGS {
            return Err(ConstructError::InconsistentModulus("no admissible band width δ".into()));
        }
    }
    let delta = pow2(-e);
    let mut approx = interior_with(f, n, s, &delta, p, limits)?;
    if p == PNorm::Infinity {
        let mid = mid_net();
        let mut cur = approx.interior.clone();
        for axis in 0..d {
            let trip = parallel(&[&cur, &cur, &cur])?;
            let rows: Vec<(Terms, Q)> = [-delta.clone(), Q::zero(), delta.clone()]
                .iter()
                .flat_map(|off| {
                    (0..d).map(move |i| (vec![(i, Q::one())], if i == axis { off.clone() } else { Q::zero() }))
                })
                .collect();
            let shift = affine_net(d, rows);
            cur = compose(&mid, &compose(&trip, &shift)?)?;
        }
        approx.net = cur;
        approx.mid_rounds = d;
    }
    Ok(approx)
}
