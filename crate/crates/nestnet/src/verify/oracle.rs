use std::fmt;

use super::VerifyError;
use crate::constructive::bit_extract_net_with;
use crate::constructive::BuildLimits;
use crate::numerics::{qint, Q};

/// Default cap on the number of `(θ, k)` cases an exhaustive check may run.
pub const DEFAULT_MAX_CASES: u128 = 1 << 20;
/// Environment variable overriding [`DEFAULT_MAX_CASES`].
pub const MAX_CASES_ENV: &str = "NESTNET_MAX_CASES";

/// `θ_1 + … + θ_k` by direct summation.
pub fn oracle_bit_sum(theta: &[bool], k: usize) -> Result<u64, VerifyError> {
    if k > theta.len() {
        return Err(VerifyError::OutOfRange { k, len: theta.len() });
    }
    Ok(theta[..k].iter().filter(|b| **b).count() as u64)
}

pub fn max_cases_from_env() -> u128 {
    std::env::var(MAX_CASES_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_CASES)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitCheckReport {
    pub n: u32,
    pub s: u32,
    pub cases: u64,
    pub exact: u64,
    /// First mismatch: `(θ, k, network output)`.
    pub counterexample: Option<(Vec<bool>, usize, Q)>,
    pub param_count: usize,
}

impl BitCheckReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for BitCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} exact", self.exact, self.cases)?;
        if let Some((theta, k, got)) = &self.counterexample {
            let bits: String = theta.iter().map(|b| if *b { '1' } else { '0' }).collect();
            write!(f, "; first mismatch θ={bits} k={k} got {got}")?;
        }
        Ok(())
    }
}

/// Compare the bit-extraction network against [`oracle_bit_sum`] on every `(θ, k)`.
pub fn exhaustive_bit_check(n: u32, s: u32) -> Result<BitCheckReport, VerifyError> {
    exhaustive_bit_check_with(n, s, max_cases_from_env())
}

pub fn exhaustive_bit_check_with(n: u32, s: u32, max_cases: u128) -> Result<BitCheckReport, VerifyError> {
    let bits = (n as u128).checked_pow(s).unwrap_or(u128::MAX);
    let cases = if bits >= 100 { u128::MAX } else { (1u128 << bits).saturating_mul(bits + 1) };
    if cases > max_cases {
        return Err(VerifyError::BudgetExceeded { cases, budget: max_cases });
    }
    let len = bits as usize;
    let limits = BuildLimits { max_bits: bits as u64, ..BuildLimits::default() };
    let net = bit_extract_net_with(n, s, &limits)?;
    let exec = net.compile_exact()?;
    let mut report =
        BitCheckReport { n, s, cases: cases as u64, exact: 0, counterexample: None, param_count: net.param_count()? };
    let unit = Q::new(1.into(), num_bigint::BigInt::from(1u8) << len);
    for code in 0u64..(1u64 << len) {
        let theta: Vec<bool> = (0..len).map(|i| code >> (len - 1 - i) & 1 == 1).collect();
        let frac = qint(code as i64) * &unit;
        for k in 0..=len {
            let want = oracle_bit_sum(&theta, k)?;
            let got = exec.eval1(&(qint(k as i64) + &frac));
            if got == qint(want as i64) {
                report.exact += 1;
            } else if report.counterexample.is_none() {
                report.counterexample = Some((theta.clone(), k, got));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_bit_sum(&[true, false, true], 2).unwrap(), 1);
        assert_eq!(oracle_bit_sum(&[true, true], 0).unwrap(), 0);
        assert_eq!(oracle_bit_sum(&[true; 9], 9).unwrap(), 9);
        assert!(oracle_bit_sum(&[true], 2).is_err());
    }

    #[test]
    fn small_exhaustive_checks() {
        let r = exhaustive_bit_check_with(2, 1, DEFAULT_MAX_CASES).unwrap();
        assert!(r.passed());
        assert_eq!(r.cases, 12);
        let r = exhaustive_bit_check_with(2, 2, DEFAULT_MAX_CASES).unwrap();
        assert_eq!(r.to_string(), "80/80 exact");
        assert!(matches!(exhaustive_bit_check_with(3, 2, 100), Err(VerifyError::BudgetExceeded { .. })));
    }
}
