use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::basic::cpl_units_or_linear;
use super::builder::{ChainBuilder, Terms, Unit};
use super::floor::floor_unguarded;
use super::{invalid, BuildLimits, ConstructError};
use crate::ir::{compose, NestNet};
use crate::numerics::{pow2, qint, ExactPwl, Q};

fn half() -> Q {
    Q::new(1.into(), 2.into())
}

fn scaled(t: &Terms, c: &Q) -> Terms {
    t.iter().map(|(i, w)| (*i, w * c)).collect()
}

/// Append the `2n` stages that map `(r, k)` to the sum of the first `k` binary digits of `r`.
/// `r` and `k` are affine forms over the current last layer. Returns the output form.
fn bit_pair_stages(cb: &mut ChainBuilder, r: (Terms, Q), k: (Terms, Q), n: u32) -> (Terms, Q) {
    let eta = pow2(-(n as i64));
    let one = Q::one;
    let (rt, rb) = r;
    let (kt, kb) = k;
    // A_1 = [r, k, acc, σ(r - ½ + η), σ(r - ½), σ(k), σ(k - 1)]
    cb.hidden(vec![
        Unit::id(rt.clone(), rb.clone()),
        Unit::id(kt.clone(), kb.clone()),
        Unit::id(Vec::new(), Q::zero()),
        Unit::relu(rt.clone(), &rb - half() + &eta),
        Unit::relu(rt, &rb - half()),
        Unit::relu(kt.clone(), kb.clone()),
        Unit::relu(kt, kb - one()),
    ]);
    let inv = Q::one() / &eta;
    for l in 1..=n as i64 {
        // θ = (a3 - a4)/η, ind = a5 - a6;  B = [2r - θ, k, acc, σ(θ + ind - 1)]
        cb.hidden(vec![
            Unit::id(vec![(0, qint(2)), (3, -inv.clone()), (4, inv.clone())], Q::zero()),
            Unit::pass(1),
            Unit::pass(2),
            Unit::relu(vec![(3, inv.clone()), (4, -inv.clone()), (5, one()), (6, -one())], -one()),
        ]);
        if l == n as i64 {
            break;
        }
        cb.hidden(vec![
            Unit::pass(0),
            Unit::pass(1),
            Unit::id(vec![(2, one()), (3, one())], Q::zero()),
            Unit::relu(vec![(0, one())], &eta - half()),
            Unit::relu(vec![(0, one())], -half()),
            Unit::relu(vec![(1, one())], -qint(l)),
            Unit::relu(vec![(1, one())], -qint(l + 1)),
        ]);
    }
    (vec![(2, one()), (3, one())], Q::zero())
}

/// `(bin 0.θ_1…θ_n, k) ↦ θ_1 + … + θ_k`. Width 7, depth `2n`.
pub fn bit_pair_net(n: u32) -> Result<NestNet, ConstructError> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let mut cb = ChainBuilder::new(2);
    let out = bit_pair_stages(&mut cb, (vec![(0, Q::one())], Q::zero()), (vec![(1, Q::one())], Q::zero()), n);
    Ok(cb.finish(vec![out])?)
}

/// `k + bin 0.θ_1…θ_n ↦ θ_1 + … + θ_k` for `k ∈ {0, …, n}`.
pub fn bit_extract_base(n: u32) -> Result<NestNet, ConstructError> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let eta = pow2(-(n as i64));
    let inv = Q::one() / &eta;
    let mut cb = ChainBuilder::new(1);
    // [x, σ(x - ℓ + η), σ(x - ℓ)] for ℓ = 1..n; integer part ψ = Σ (p_ℓ - q_ℓ)/η
    let mut units = vec![Unit::pass(0)];
    let mut int_part: Terms = Vec::new();
    for l in 1..=n as i64 {
        units.push(Unit::relu(vec![(0, Q::one())], &eta - qint(l)));
        units.push(Unit::relu(vec![(0, Q::one())], -qint(l)));
        int_part.push((units.len() - 2, inv.clone()));
        int_part.push((units.len() - 1, -inv.clone()));
    }
    cb.hidden(units);
    let mut frac: Terms = vec![(0, Q::one())];
    frac.extend(scaled(&int_part, &-Q::one()));
    let out = bit_pair_stages(&mut cb, (frac, Q::zero()), (int_part, Q::zero()), n);
    Ok(cb.finish(vec![out])?)
}

/// `k + bin 0.θ_1…θ_N ↦ θ_1 + … + θ_k` with `N = n^s` and `k ∈ {0, …, N}`. Height `s`.
pub fn bit_extract_net(n: u32, s: u32) -> Result<NestNet, ConstructError> {
    bit_extract_net_with(n, s, &BuildLimits::default())
}

pub fn bit_extract_net_with(n: u32, s: u32, limits: &BuildLimits) -> Result<NestNet, ConstructError> {
    if n == 0 || s == 0 {
        return Err(invalid("n and s must be positive"));
    }
    let bits = (n as u64).checked_pow(s).ok_or_else(|| invalid("n^s overflows"))?;
    if bits > limits.max_bits {
        return Err(ConstructError::ResourceGuard { what: "bits", value: bits.to_string(), limit: limits.max_bits });
    }
    bit_extract_unguarded(n, s)
}

pub(crate) fn bit_extract_unguarded(n: u32, s: u32) -> Result<NestNet, ConstructError> {
    if s == 1 {
        return bit_extract_base(n);
    }
    let r = s - 1;
    let m = (n as u64).pow(r);
    let total = m * n as u64;
    let g = bit_extract_unguarded(n, r)?;
    // ⌊·⌋ exact on [ℓ, ℓ + 1 - 2^-N] for ℓ < 2^((2n)^r)
    let slack = super::floor::steps_exponent(2 * n, r);
    let floor_delta = Q::new(BigInt::one(), BigInt::one() << ((total + slack) as usize));
    let fl = floor_unguarded(2 * n, r, &floor_delta)?;

    let one = Q::one;
    let block = Q::from_integer(BigInt::one() << (m as usize));
    let inv_block = Q::one() / &block;
    let mq = qint(m as i64);
    let mut cb = ChainBuilder::new(1);
    cb.uses(&g);
    cb.uses(&fl);
    // [x, k = ⌊x⌋]
    cb.hidden(vec![Unit::pass(0), Unit::sub(&fl, vec![(0, one())], Q::zero())]);
    // A_0 = [frac, k, acc, U = ⌊2^m frac⌋, σ(k), σ(k - m)]
    cb.hidden(vec![
        Unit::id(vec![(0, one()), (1, -one())], Q::zero()),
        Unit::pass(1),
        Unit::id(Vec::new(), Q::zero()),
        Unit::sub(&fl, vec![(0, block.clone()), (1, -block.clone())], Q::zero()),
        Unit::relu(vec![(1, one())], Q::zero()),
        Unit::relu(vec![(1, one())], -mq.clone()),
    ]);
    for i in 0..n as i64 {
        // B_i = [2^m frac - U, k, acc, g(min(σ(k - im), m) + U/2^m)]
        cb.hidden(vec![
            Unit::id(vec![(0, block.clone()), (3, -one())], Q::zero()),
            Unit::pass(1),
            Unit::pass(2),
            Unit::sub(&g, vec![(4, one()), (5, -one()), (3, inv_block.clone())], Q::zero()),
        ]);
        if i + 1 == n as i64 {
            break;
        }
        let next = qint(i + 1) * &mq;
        cb.hidden(vec![
            Unit::pass(0),
            Unit::pass(1),
            Unit::id(vec![(2, one()), (3, one())], Q::zero()),
            Unit::sub(&fl, vec![(0, block.clone())], Q::zero()),
            Unit::relu(vec![(1, one())], -next.clone()),
            Unit::relu(vec![(1, one())], -(next + &mq)),
        ]);
    }
    Ok(cb.finish(vec![(vec![(2, one()), (3, one())], Q::zero())])?)
}

/// `j = i·m + k ↦ θ_{i,0} + … + θ_{i,k}` for an `n × n^s` binary matrix `θ`.
pub fn indexed_bit_sum_net(theta: &[Vec<bool>], n: u32, s: u32) -> Result<NestNet, ConstructError> {
    let be = bit_extract_net(n, s)?;
    indexed_bit_sum_with(theta, n, s, &be)
}

pub(crate) fn indexed_bit_sum_with(
    theta: &[Vec<bool>],
    n: u32,
    s: u32,
    bit_extract: &NestNet,
) -> Result<NestNet, ConstructError> {
    let m = (n as u64).checked_pow(s).ok_or_else(|| invalid("n^s overflows"))? as usize;
    if theta.len() != n as usize || theta.iter().any(|row| row.len() != m) {
        return Err(ConstructError::DimMismatch(format!("expected a {n} × {m} matrix")));
    }
    let mq = qint(m as i64);
    let ramp = Q::new(1.into(), BigInt::from(2 * m));
    let inv = Q::one() / &ramp;
    let step_in: Terms = vec![(0, Q::one() / &mq)];
    // [j, σ(j/m - i + δ), σ(j/m - i)] for i = 1..n-1; block index = Σ (p_i - q_i)/δ
    let mut units = vec![Unit::pass(0)];
    let mut index: Terms = Vec::new();
    for i in 1..n as i64 {
        units.push(Unit::relu(step_in.clone(), &ramp - qint(i)));
        units.push(Unit::relu(step_in.clone(), -qint(i)));
        index.push((units.len() - 2, inv.clone()));
        index.push((units.len() - 1, -inv.clone()));
    }
    let mut cb = ChainBuilder::new(1);
    cb.hidden(units);

    // z_i = bin 0.θ_{i,0}…θ_{i,m-1}, interpolated over i
    let zs: Vec<Q> = theta
        .iter()
        .map(|row| {
            let mut z = Q::zero();
            let mut w = Q::one();
            for bit in row {
                w /= qint(2);
                if *bit {
                    z += &w;
                }
            }
            z
        })
        .collect();
    let xs: Vec<Q> = (0..n as i64).map(qint).collect();
    let code = ExactPwl::new(xs, zs, Q::zero(), Q::zero())?;
    let (cpl, cpl_out, cpl_bias) = cpl_units_or_linear(&code, &index, &Q::zero());

    let mut within: Terms = vec![(0, Q::one())];
    within.extend(scaled(&index, &-mq));
    let mut layer = vec![Unit::id(within, Q::zero())];
    layer.extend(cpl);
    cb.hidden(layer);
    // (k + 1) + z_i
    let mut arg: Terms = vec![(0, Q::one())];
    arg.extend(cpl_out.into_iter().map(|(i, w)| (i + 1, w)));
    let pre = cb.finish(vec![(arg, Q::one() + cpl_bias)])?;
    Ok(compose(bit_extract, &pre)?)
}
