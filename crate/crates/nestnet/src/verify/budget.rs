use std::fmt;
use std::str::FromStr;

use super::VerifyError;
use crate::ir::NestNet;

/// Parameter budgets of the constructive builders.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundId {
    Step,
    FloorNested,
    BitExtractBase,
    BitExtract,
    IndexedBitSum,
    PointFit,
    Interior,
    FullPFinite,
    FullPInfty,
}

impl BoundId {
    pub const ALL: [BoundId; 9] = [
        BoundId::Step,
        BoundId::FloorNested,
        BoundId::BitExtractBase,
        BoundId::BitExtract,
        BoundId::IndexedBitSum,
        BoundId::PointFit,
        BoundId::Interior,
        BoundId::FullPFinite,
        BoundId::FullPInfty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::Step => "step",
            BoundId::FloorNested => "floor_nested",
            BoundId::BitExtractBase => "bit_extract_base",
            BoundId::BitExtract => "bit_extract",
            BoundId::IndexedBitSum => "indexed_bit_sum",
            BoundId::PointFit => "point_fit",
            BoundId::Interior => "interior",
            BoundId::FullPFinite => "full_p_finite",
            BoundId::FullPInfty => "full_p_infty",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundId {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundId::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| VerifyError::UnknownBound(s.to_string()))
    }
}

/// Budget value. `s` plays the role of `r` for the floor and step budgets.
pub fn budget_for(id: BoundId, n: u32, s: u32, d: usize) -> u128 {
    let (n, s, d) = (n as u128, s as u128, d as u128);
    let sq = (s + 7) * (s + 7);
    match id {
        BoundId::Step => 36 * (s + 7) * n,
        BoundId::FloorNested => (12 * s + 68) * n,
        BoundId::BitExtractBase => 128 * n + 294,
        BoundId::BitExtract => 57 * sq * (n + 1),
        BoundId::IndexedBitSum => 58 * sq * (n + 1),
        BoundId::PointFit => 350 * sq * (n + 1),
        BoundId::Interior => 355 * d * d * sq * (2 * n + 1),
        BoundId::FullPFinite => 1000 * d * d * sq * (n + 1),
        BoundId::FullPInfty => 10u128.pow(d as u32 + 3) * d * d * sq * (n + 1),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundCheck {
    pub id: BoundId,
    pub count: u128,
    pub bound: u128,
    pub pass: bool,
}

impl fmt::Display for BoundCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "ok" } else { "EXCEEDED" };
        write!(f, "{}: {} <= {} {}", self.id, self.count, self.bound, verdict)
    }
}

/// Compare a network's parameter count against a named budget.
pub fn check_param_bound(net: &NestNet, id: &str, n: u32, s: u32, d: usize) -> Result<BoundCheck, VerifyError> {
    let id: BoundId = id.parse()?;
    let count = net.param_count()? as u128;
    let bound = budget_for(id, n, s, d);
    Ok(BoundCheck { id, count, bound, pass: count <= bound })
}
