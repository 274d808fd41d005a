use num_traits::{One, Signed, Zero};

use super::basic::cpl_exact;
use super::bits::{bit_extract_unguarded, indexed_bit_sum_with};
use super::builder::{affine_net, ChainBuilder, Unit};
use super::{invalid, BuildLimits, ConstructError};
use crate::ir::{compose, parallel, NestNet};
use crate::numerics::{qint, ExactPwl, Q};

/// The values `⌊y_j/ε⌋·ε` a point-fitting network reproduces at the integers.
pub fn point_fit_targets(y: &[Q], eps: &Q) -> Vec<Q> {
    y.iter().map(|v| Q::from_integer((v / eps).floor().to_integer()) * eps).collect()
}

/// Network with `φ(j) = ⌊y_j/ε⌋·ε` for `j = 0..J-1` and `0 ≤ φ ≤ max y` everywhere.
pub fn point_fit_net(y: &[Q], eps: &Q, n: u32, s: u32) -> Result<NestNet, ConstructError> {
    point_fit_net_with(y, eps, n, s, &BuildLimits::default())
}

pub fn point_fit_net_with(y: &[Q], eps: &Q, n: u32, s: u32, limits: &BuildLimits) -> Result<NestNet, ConstructError> {
    if n == 0 || s == 0 {
        return Err(invalid("n and s must be positive"));
    }
    if y.is_empty() {
        return Err(invalid("at least one sample is required"));
    }
    if !eps.is_positive() {
        return Err(invalid("ε must be positive"));
    }
    let m = (n as u64).checked_pow(s).ok_or_else(|| invalid("n^s overflows"))?;
    let capacity = m.checked_mul(n as u64).ok_or_else(|| invalid("n^(s+1) overflows"))?;
    if y.len() as u64 > capacity {
        return Err(invalid(format!("{} samples exceed n^(s+1) = {capacity}", y.len())));
    }
    if y.len() as u64 > limits.max_points {
        return Err(ConstructError::ResourceGuard {
            what: "fit points",
            value: y.len().to_string(),
            limit: limits.max_points,
        });
    }
    if let Some(i) = y.iter().position(|v| v.is_negative()) {
        return Err(invalid(format!("sample {i} is negative")));
    }
    if let Some(i) = (1..y.len()).find(|&j| (&y[j] - &y[j - 1]).abs() > *eps) {
        return Err(ConstructError::GapViolated { index: i });
    }
    let (m, n_us) = (m as usize, n as usize);
    let top = y.iter().max().cloned().unwrap_or_default();
    let mut levels: Vec<Q> = y.iter().map(|v| Q::from_integer((v / eps).floor().to_integer())).collect();
    let last = levels.last().cloned().unwrap_or_default();
    levels.resize(n_us * m, last);

    // block-constant coarse level a_{im}
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n_us {
        let start = i * m;
        xs.push(qint(start as i64));
        ys.push(levels[start].clone());
        if m > 1 {
            xs.push(qint((start + m - 1) as i64));
            ys.push(levels[start].clone());
        }
    }
    let coarse = cpl_exact(&ExactPwl::new(xs, ys, Q::zero(), Q::zero())?)?;

    let one = Q::one();
    let mut ups = vec![vec![false; m]; n_us];
    let mut downs = vec![vec![false; m]; n_us];
    for i in 0..n_us {
        for l in 1..m {
            let diff = &levels[i * m + l] - &levels[i * m + l - 1];
            ups[i][l] = diff == one;
            downs[i][l] = diff == -one.clone();
        }
    }
    let be = bit_extract_unguarded(n, s)?;
    let up_net = indexed_bit_sum_with(&ups, n, s, &be)?;
    let down_net = indexed_bit_sum_with(&downs, n, s, &be)?;
    let fan_out = affine_net(1, vec![(vec![(0, one.clone())], Q::zero()); 3]);
    let inner = compose(&parallel(&[&coarse, &up_net, &down_net])?, &fan_out)?;

    // min{σ(ε(a + u - d)), M} = σ(·) - σ(· - M)
    let level = vec![(0, eps.clone()), (1, eps.clone()), (2, -eps.clone())];
    let mut cb = ChainBuilder::new(3);
    cb.hidden(vec![Unit::relu(level.clone(), Q::zero()), Unit::relu(level, -top)]);
    let clamp = cb.finish(vec![(vec![(0, one.clone()), (1, -one)], Q::zero())])?;
    Ok(compose(&clamp, &inner)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::q;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_example() {
        let y = vec![qint(0), q(1, 2), qint(1), q(4, 5)];
        let eps = q(1, 2);
        let net = point_fit_net(&y, &eps, 2, 1).unwrap();
        let c = net.compile_exact().unwrap();
        let want = [qint(0), q(1, 2), qint(1), q(1, 2)];
        for (j, w) in want.iter().enumerate() {
            assert_eq!(&c.eval1(&qint(j as i64)), w);
        }
        assert_eq!(point_fit_targets(&y, &eps), want.to_vec());
    }

    #[test]
    fn constant_samples() {
        let y = vec![q(7, 3); 9];
        let net = point_fit_net(&y, &q(1, 4), 3, 1).unwrap();
        for j in 0..9 {
            assert_eq!(net.eval_exact(&[qint(j)]).unwrap()[0], q(9, 4));
        }
    }

    #[test]
    fn random_walk_fit_is_exact_and_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, s) = (3u32, 2u32);
        let eps = q(1, 8);
        let mut y = vec![q(1, 2)];
        for _ in 1..27 {
            let step = q(rng.gen_range(-8..=8), 64);
            let next = (y.last().unwrap() + step).max(Q::zero());
            y.push(next);
        }
        let net = point_fit_net(&y, &eps, n, s).unwrap();
        assert_eq!(net.height().unwrap(), 2);
        assert!(net.param_count().unwrap() as u64 <= 350 * 81 * 4);
        let c = net.compile_exact().unwrap();
        let want = point_fit_targets(&y, &eps);
        for (j, w) in want.iter().enumerate() {
            assert_eq!(&c.eval1(&qint(j as i64)), w);
        }
        let top = y.iter().max().unwrap().clone();
        for _ in 0..200 {
            let x = q(rng.gen_range(-2000..=29000), 1000);
            let v = c.eval1(&x);
            assert!(v >= Q::zero() && v <= top);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            point_fit_net(&[qint(0), qint(2)], &qint(1), 2, 1),
            Err(ConstructError::GapViolated { index: 1 })
        ));
        assert!(point_fit_net(&vec![qint(0); 5], &qint(1), 2, 1).is_err());
        assert!(point_fit_net(&[qint(-1)], &qint(1), 2, 1).is_err());
    }
}
