use std::fmt;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::budget::{budget_for, BoundId};
use super::VerifyError;
use crate::constructive::{floor_nested, point_fit_net, point_fit_targets, step_function_net, steps_exponent};
use crate::ir::NestNet;
use crate::numerics::{pow2, qint, Q};

/// Exact-match count of a network against an integer-valued oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractReport {
    pub checked: u64,
    pub exact: u64,
    /// First mismatch: `(x, expected, got)`.
    pub first_failure: Option<(Q, Q, Q)>,
    pub param_count: usize,
    pub bound: u128,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none() && self.param_count as u128 <= self.bound
    }
}

impl fmt::Display for ContractReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} exact, params {} <= {}", self.exact, self.checked, self.param_count, self.bound)?;
        if let Some((x, want, got)) = &self.first_failure {
            write!(f, "; at x={x} expected {want} got {got}")?;
        }
        Ok(())
    }
}

/// Five points `lo, lo+w/4, lo+w/2, lo+3w/4, lo+w`.
pub fn five_points(lo: &Q, width: &Q) -> Vec<Q> {
    (0..5).map(|i| lo + width * qint(i) / qint(4)).collect()
}

fn tally(net: &NestNet, cases: impl Iterator<Item = (Q, Q)>, bound: u128) -> Result<ContractReport, VerifyError> {
    let exec = net.compile_exact()?;
    let mut r = ContractReport { checked: 0, exact: 0, first_failure: None, param_count: net.param_count()?, bound };
    for (x, want) in cases {
        let got = exec.eval1(&x);
        r.checked += 1;
        if got == want {
            r.exact += 1;
        } else if r.first_failure.is_none() {
            r.first_failure = Some((x, want, got));
        }
    }
    Ok(r)
}

/// Nested floor network on five points of every interval where it must equal `⌊x⌋`.
pub fn check_floor_contract(n: u32, r: u32, delta: &Q) -> Result<ContractReport, VerifyError> {
    let net = floor_nested(n, r, delta)?;
    let width = qint(1) - pow2(steps_exponent(n, r) as i64) * delta;
    let steps = 1u64 << (n as u64).pow(r);
    let cases = (0..steps).flat_map(|l| {
        let lo = qint(l as i64);
        five_points(&lo, &width).into_iter().map(|x| (x.clone(), x.floor()))
    });
    tally(&net, cases, budget_for(BoundId::FloorNested, n, r, 1))
}

/// Clamped step network on `[j, j+1-δ]` for `j < J` and on `[J, J+1]`.
pub fn check_step_contract(n: u32, r: u32, delta: &Q, j: u64) -> Result<ContractReport, VerifyError> {
    let net = step_function_net(n, r, delta, j)?;
    let width = qint(1) - delta;
    let cases = (0..=j).flat_map(|l| {
        let lo = qint(l as i64);
        let w = if l == j { qint(1) } else { width.clone() };
        five_points(&lo, &w).into_iter().map(|x| {
            let want = x.floor().min(qint(j as i64));
            (x, want)
        })
    });
    tally(&net, cases, budget_for(BoundId::Step, n, r, 1))
}

/// A nonnegative sequence whose consecutive differences are at most `eps`, in steps of `eps/64`.
pub fn random_walk(len: usize, eps: &Q, seed: u64) -> Vec<Q> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = eps / qint(64);
    let mut cur: i64 = rng.gen_range(0..=256);
    (0..len)
        .map(|i| {
            if i > 0 {
                cur = (cur + rng.gen_range(-64..=64)).abs();
            }
            &unit * qint(cur)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointFitReport {
    pub points: usize,
    pub exact: usize,
    pub within_eps: usize,
    pub probes: usize,
    pub clamp_ok: usize,
    pub param_count: usize,
    pub bound: u128,
}

impl PointFitReport {
    pub fn passed(&self) -> bool {
        self.exact == self.points
            && self.within_eps == self.points
            && self.clamp_ok == self.probes
            && self.param_count as u128 <= self.bound
    }
}

impl fmt::Display for PointFitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{} exact, {}/{} within eps, clamp {}/{}, params {} <= {}",
            self.exact,
            self.points,
            self.within_eps,
            self.points,
            self.clamp_ok,
            self.probes,
            self.param_count,
            self.bound
        )
    }
}

/// Point-fit network on `y`: exact quantized values at the integers and `0 ≤ φ ≤ max y` at
/// `probes` seeded points of `[-1, J+1]`.
pub fn check_point_fit(
    y: &[Q],
    eps: &Q,
    n: u32,
    s: u32,
    probes: usize,
    seed: u64,
) -> Result<PointFitReport, VerifyError> {
    let net = point_fit_net(y, eps, n, s)?;
    let exec = net.compile_exact()?;
    let want = point_fit_targets(y, eps);
    let mut r = PointFitReport {
        points: y.len(),
        exact: 0,
        within_eps: 0,
        probes,
        clamp_ok: 0,
        param_count: net.param_count()?,
        bound: budget_for(BoundId::PointFit, n, s, 1),
    };
    for (j, (yj, wj)) in y.iter().zip(&want).enumerate() {
        let got = exec.eval1(&qint(j as i64));
        r.exact += (got == *wj) as usize;
        r.within_eps += ((&got - yj).abs() <= *eps) as usize;
    }
    let top = y.iter().max().cloned().unwrap_or_else(Q::zero);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = (y.len() as i64 + 2) * 4096;
    for _ in 0..probes {
        let x = qint(rng.gen_range(0..=span) - 4096) / qint(4096);
        let v = exec.eval1(&x);
        r.clamp_ok += (v >= Q::zero() && v <= top) as usize;
    }
    Ok(r)
}
