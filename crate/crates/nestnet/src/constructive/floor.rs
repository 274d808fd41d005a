use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::builder::{affine_net, scalar_affine, ChainBuilder, Terms, Unit};
use super::{invalid, BuildLimits, ConstructError};
use crate::ir::{compose, parallel, NestNet};
use crate::numerics::{pwl_of_net_on, qint, Q};

/// `log2 C(r, n) = n + n^2 + … + n^r`, the slack exponent of the nested floor network.
pub fn steps_exponent(n: u32, r: u32) -> u64 {
    (1..=r).map(|i| (n as u64).pow(i)).sum()
}

fn pow2(e: u64) -> Q {
    Q::from_integer(BigInt::one() << (e as usize))
}

fn slack(n: u32, r: u32) -> Q {
    pow2(steps_exponent(n, r))
}

fn bits_of(n: u32, r: u32) -> Result<u64, ConstructError> {
    (n as u64).checked_pow(r).ok_or_else(|| invalid("n^r overflows"))
}

fn steps_guard(bits: u64, limits: &BuildLimits) -> Result<(), ConstructError> {
    let cap = 63 - limits.max_steps.leading_zeros() as u64;
    if bits > cap || (1u64 << bits) > limits.max_steps {
        return Err(ConstructError::ResourceGuard {
            what: "floor steps",
            value: format!("2^{bits}"),
            limit: limits.max_steps,
        });
    }
    Ok(())
}

/// Height-1 floor network: `⌊x⌋` on `[ℓ, ℓ+1-δ]` for `ℓ = 0..2^n-1`.
pub fn floor_base(n: u32, delta: &Q) -> Result<NestNet, ConstructError> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !delta.is_positive() || delta >= &Q::one() {
        return Err(invalid("δ must lie in (0, 1)"));
    }
    let (cb, out) = base_layers(n, delta);
    Ok(cb.finish(vec![out])?)
}

// Hidden layers [x, S, σ(t-1+δ̃), σ(t-1)] with t = (x - S)/2^j, one per binary digit.
fn base_layers(n: u32, delta: &Q) -> (ChainBuilder, (Terms, Q)) {
    let dt = delta / pow2(n as u64);
    let one = Q::one();
    let mut cb = ChainBuilder::new(1);
    let j0 = n as u64 - 1;
    let inv = Q::one() / pow2(j0);
    cb.hidden(vec![
        Unit::pass(0),
        Unit::id(Vec::new(), Q::zero()),
        Unit::relu(vec![(0, inv.clone())], &dt - &one),
        Unit::relu(vec![(0, inv)], -one.clone()),
    ]);
    for j in (0..j0).rev() {
        let c = pow2(j + 1) / &dt;
        let inv = Q::one() / pow2(j);
        // t' = (x - S - c(a - b)) / 2^j
        let t: Terms = vec![(0, inv.clone()), (1, -inv.clone()), (2, -&c * &inv), (3, &c * &inv)];
        cb.hidden(vec![
            Unit::pass(0),
            Unit::id(vec![(1, one.clone()), (2, c.clone()), (3, -c.clone())], Q::zero()),
            Unit::relu(t.clone(), &dt - &one),
            Unit::relu(t, -one.clone()),
        ]);
    }
    let c = Q::one() / &dt;
    (cb, (vec![(1, one), (2, c.clone()), (3, -c)], Q::zero()))
}

/// Height-`r` floor network: `⌊x⌋` on `[ℓ, ℓ+1-C(r,n)δ]` for `ℓ = 0..2^(n^r)-1`.
pub fn floor_nested(n: u32, r: u32, delta: &Q) -> Result<NestNet, ConstructError> {
    floor_nested_with(n, r, delta, &BuildLimits::default())
}

pub fn floor_nested_with(n: u32, r: u32, delta: &Q, limits: &BuildLimits) -> Result<NestNet, ConstructError> {
    check_nested(n, r, delta)?;
    steps_guard(bits_of(n, r)?, limits)?;
    floor_unguarded(n, r, delta)
}

fn check_nested(n: u32, r: u32, delta: &Q) -> Result<(), ConstructError> {
    if n == 0 || r == 0 {
        return Err(invalid("n and r must be positive"));
    }
    bits_of(n, r)?;
    if !delta.is_positive() || delta * slack(n, r) >= Q::one() {
        return Err(invalid(format!("δ must lie in (0, 1/C({r},{n}))")));
    }
    Ok(())
}

pub(crate) fn floor_unguarded(n: u32, r: u32, delta: &Q) -> Result<NestNet, ConstructError> {
    let (cb, out) = nested_layers(n, r, delta)?;
    Ok(cb.finish(vec![out])?)
}

// Last hidden layer always carries x at index 0.
fn nested_layers(n: u32, r: u32, delta: &Q) -> Result<(ChainBuilder, (Terms, Q)), ConstructError> {
    if r == 1 {
        return Ok(base_layers(n, delta));
    }
    let g = floor_unguarded(n, r - 1, delta)?;
    let digit_bits = bits_of(n, r - 1)?;
    let one = Q::one();
    let mut cb = ChainBuilder::new(1);
    cb.uses(&g);
    let top = (n - 1) as u64;
    cb.hidden(vec![
        Unit::pass(0),
        Unit::id(Vec::new(), Q::zero()),
        Unit::sub(&g, vec![(0, Q::one() / pow2(top * digit_bits))], Q::zero()),
    ]);
    for j in (0..top).rev() {
        let mj1 = pow2((j + 1) * digit_bits);
        let inv = Q::one() / pow2(j * digit_bits);
        // S' = S + m^(j+1) z, next digit from (x - S') / m^j
        cb.hidden(vec![
            Unit::pass(0),
            Unit::id(vec![(1, one.clone()), (2, mj1.clone())], Q::zero()),
            Unit::sub(&g, vec![(0, inv.clone()), (1, -inv.clone()), (2, -&mj1 * &inv)], Q::zero()),
        ]);
    }
    Ok((cb, (vec![(1, one.clone()), (2, one)], Q::zero())))
}

/// Floor network clamped at `J`: `⌊x⌋` on `[j, j+1-δ]` for `j < J`, and `J` on `[J, J+1]`.
pub fn step_function_net(n: u32, r: u32, delta: &Q, j: u64) -> Result<NestNet, ConstructError> {
    step_function_net_with(n, r, delta, j, &BuildLimits::default())
}

pub fn step_function_net_with(
    n: u32,
    r: u32,
    delta: &Q,
    j: u64,
    limits: &BuildLimits,
) -> Result<NestNet, ConstructError> {
    if n == 0 || r == 0 {
        return Err(invalid("n and r must be positive"));
    }
    if !delta.is_positive() || delta >= &Q::one() {
        return Err(invalid("δ must lie in (0, 1)"));
    }
    let bits = bits_of(n, r)?;
    if j == 0 || (bits < 64 && j > (1u64 << bits)) {
        return Err(invalid(format!("J = {j} out of range for 2^({n}^{r}) steps")));
    }
    if j > limits.max_steps {
        return Err(ConstructError::ResourceGuard {
            what: "step count J",
            value: j.to_string(),
            limit: limits.max_steps,
        });
    }
    step_unguarded(n, r, delta, j)
}

pub(crate) fn step_unguarded(n: u32, r: u32, delta: &Q, j: u64) -> Result<NestNet, ConstructError> {
    let inner_delta = delta / slack(n, r);
    let floor = floor_unguarded(n, r, &inner_delta)?;
    let jq = qint(j as i64);
    let peak = pwl_of_net_on(&floor, &jq, &(&jq + Q::one()))?.to_exact()?.max_abs_on(&jq, &(&jq + Q::one()));
    let m = (peak + &jq) / delta;

    let (mut cb, (floor_terms, floor_bias)) = nested_layers(n, r, &inner_delta)?;
    let one = Q::one();
    // [φ0, σ(x - (J - δ))]
    cb.hidden(vec![Unit::id(floor_terms, floor_bias), Unit::relu(vec![(0, one.clone())], delta - &jq)]);
    // a = φ0 + M h;  [a, σ(a - J)]
    let a: Terms = vec![(0, one.clone()), (1, m)];
    cb.hidden(vec![Unit::id(a.clone(), Q::zero()), Unit::relu(a, -jq)]);
    Ok(cb.finish(vec![(vec![(0, one.clone()), (1, -one)], Q::zero())])?)
}

/// `x ↦ step(2n, s, Kδ, K-1)(Kx)`: the grid index of `x` along one axis, `k` on
/// `[k/K, (k+1)/K - δ]` and `K-1` on `[(K-1)/K, 1]`.
pub fn phi1_grid_net(k: u64, delta: &Q, n: u32, s: u32) -> Result<NestNet, ConstructError> {
    phi1_grid_net_with(k, delta, n, s, &BuildLimits::default())
}

pub(crate) fn phi1_grid_net_with(
    k: u64,
    delta: &Q,
    n: u32,
    s: u32,
    limits: &BuildLimits,
) -> Result<NestNet, ConstructError> {
    if k == 0 {
        return Err(invalid("K must be positive"));
    }
    let kq = qint(k as i64);
    if k == 1 {
        return Ok(affine_net(1, vec![(Vec::new(), Q::zero())]));
    }
    let step = step_function_net_with(2 * n, s, &(delta * &kq), k - 1, limits)?;
    Ok(compose(&step, &scalar_affine(kq, Q::zero()))?)
}

/// `d` copies of a scalar network side by side.
pub(crate) fn replicate(net: &NestNet, d: usize) -> Result<NestNet, ConstructError> {
    let copies: Vec<&NestNet> = std::iter::repeat_n(net, d).collect();
    Ok(parallel(&copies)?)
}
