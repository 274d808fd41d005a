use std::collections::HashMap;

use num_traits::{Signed, ToPrimitive, Zero};

use super::grid::{guaranteed_bound, ErrorDecomposition, ErrorReport, GridMode, GridSpec, LpAccumulator, Odometer};
use super::VerifyError;
use crate::constructive::{Approximator, PNorm, TargetFunction};
use crate::numerics::{qint, Scalar, Q};

/// Interned index values along the axes, shared by every shifted copy.
struct AxisTable {
    values: Vec<Q>,
    /// `ids[variant][coordinate]`
    ids: Vec<Vec<u32>>,
}

fn axis_table(a: &Approximator, coords: &[Q], offsets: &[Q]) -> AxisTable {
    let mut lookup: HashMap<Q, u32> = HashMap::new();
    let mut values = Vec::new();
    let mut intern = |v: Q| -> u32 {
        *lookup.entry(v.clone()).or_insert_with(|| {
            values.push(v);
            (values.len() - 1) as u32
        })
    };
    let ids = offsets
        .iter()
        .map(|off| {
            coords
                .iter()
                .map(|c| {
                    let x = c + off;
                    let v = match &a.parts {
                        Some(p) => p.phi1_exec.eval1(&x),
                        None => Q::zero(),
                    };
                    intern(v)
                })
                .collect()
        })
        .collect();
    AxisTable { values, ids }
}

/// Grid errors of a constructed approximator, evaluated through its scalar parts.
///
/// Every value is computed exactly; `f64` is used only to rank candidate points, and the
/// reported sup is re-scored exactly on all points within `1e-9` of the screened maximum.
pub fn measure_approximator(
    a: &Approximator,
    f: &TargetFunction,
    grid: &GridSpec,
    p_list: &[PNorm],
) -> Result<ErrorReport, VerifyError> {
    let d = f.dim();
    if a.d != d || grid.d != d {
        return Err(VerifyError::DimMismatch { net: a.d, target: d });
    }
    let coords = grid.axis_coords()?;
    let coords_f: Vec<f64> = coords.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
    let offsets: Vec<Q> =
        if a.mid_rounds > 0 { vec![-a.delta.clone(), Q::zero(), a.delta.clone()] } else { vec![Q::zero()] };
    let center = if a.mid_rounds > 0 { 1 } else { 0 };
    let axes = axis_table(a, &coords, &offsets);
    let dn = axes.values.len();

    // value of the interior network at every tuple of index values
    let tuples = dn.checked_pow(d as u32).expect("index table fits in memory");
    let weights: Vec<Q> = match &a.parts {
        Some(p) => (0..d).map(|i| p.psi1.weight(0, i).as_exact().cloned().unwrap_or_default()).collect(),
        None => vec![Q::zero(); d],
    };
    let mut interior_vals: Vec<Q> = Vec::with_capacity(tuples);
    let mut head_memo: HashMap<Q, Q> = HashMap::new();
    for code in 0..tuples {
        let mut rest = code;
        let mut t = Q::zero();
        for w in weights.iter().rev() {
            t += w * &axes.values[rest % dn];
            rest /= dn;
        }
        let v = match &a.parts {
            Some(p) => head_memo.entry(t).or_insert_with_key(|t| p.head_exec.eval1(t)).clone(),
            None => a.f0.clone(),
        };
        interior_vals.push(v);
    }
    let mut sorted: Vec<Q> = interior_vals.clone();
    sorted.sort();
    sorted.dedup();
    let rank_of: Vec<u32> =
        interior_vals.iter().map(|v| sorted.binary_search(v).expect("value present") as u32).collect();
    let value_f: Vec<f64> = sorted.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();

    let rank_at = |ix: &[usize]| -> u32 {
        let mut combo = vec![center; d];
        eval_rank(a.mid_rounds, &mut combo, ix, &axes.ids, dn, &rank_of)
    };

    let kq = a.k as f64;
    let region = match &grid.mode {
        GridMode::OutsideTrifling(r) => Some(r.clone()),
        GridMode::FullCube => grid.band_probes.clone(),
    };
    let in_band: Vec<bool> =
        coords.iter().map(|c| region.as_ref().map(|r| r.coord_in_band(c)).unwrap_or(false)).collect();

    let mut acc = LpAccumulator::new(p_list);
    let mut best = f64::NEG_INFINITY;
    let mut offset_err = 0.0f64;
    let mut points = 0u64;
    let mut x = vec![0.0; d];
    let mut vertex = vec![0.0; d];
    let mut odo = Odometer::new(d, coords.len());
    while let Some(ix) = odo.current() {
        for t in 0..d {
            x[t] = coords_f[ix[t]];
        }
        let fx = f.eval_f64(&x);
        let err = (value_f[rank_at(ix) as usize] - fx).abs();
        acc.push(err);
        best = best.max(err);
        if a.k > 0 && ix.iter().all(|i| !in_band[*i]) {
            for t in 0..d {
                vertex[t] = ((x[t] * kq).floor().min(kq - 1.0)) / kq;
            }
            offset_err = offset_err.max((fx - f.eval_f64(&vertex)).abs());
        }
        points += 1;
        odo.advance();
    }

    // exact re-scoring of near-maximal points
    let cut = best - 1e-9;
    let mut sup = Q::zero();
    let mut argmax: Vec<Q> = Vec::new();
    let mut odo = Odometer::new(d, coords.len());
    while let Some(ix) = odo.current() {
        for t in 0..d {
            x[t] = coords_f[ix[t]];
        }
        let r = rank_at(ix) as usize;
        if (value_f[r] - f.eval_f64(&x)).abs() >= cut {
            let xq: Vec<Q> = ix.iter().map(|i| coords[*i].clone()).collect();
            let err = (&sorted[r] - f.eval_exact(&xq)).abs();
            if err > sup || argmax.is_empty() {
                sup = err;
                argmax = xq;
            }
        }
        odo.advance();
    }

    let decomposition = a.parts.as_ref().map(|_| {
        let kq = qint(a.k as i64);
        let mut quant = 0.0f64;
        let mut odo = Odometer::new(d, a.k as usize);
        while let Some(beta) = odo.current() {
            let xq: Vec<Q> = beta.iter().map(|b| qint(*b as i64) / &kq).collect();
            let v = a.eval_structured(&xq);
            quant = quant.max((v - f.eval_exact(&xq)).abs().to_f64().unwrap_or(f64::NAN));
            odo.advance();
        }
        ErrorDecomposition { quantization: quant, grid_offset: offset_err }
    });

    let factor = match (&grid.mode, a.mid_rounds) {
        (GridMode::OutsideTrifling(_), _) => Some(6),
        (GridMode::FullCube, r) if r > 0 => Some(7),
        _ => None,
    };
    let bound = factor.map(|c| guaranteed_bound(c, a.n, a.s, d, f.modulus()));
    Ok(ErrorReport {
        sup_error: Scalar::Exact(sup.abs()),
        argmax,
        lp_errors: acc.finish(),
        bound,
        n: Some(a.n),
        s: Some(a.s),
        d,
        k: Some(a.k),
        delta: Some(a.delta.clone()),
        param_count: a.net.param_count()?,
        points,
        decomposition,
    })
}

fn eval_rank(round: usize, combo: &mut [usize], ix: &[usize], ids: &[Vec<u32>], dn: usize, rank_of: &[u32]) -> u32 {
    if round == 0 {
        let mut code = 0usize;
        for (t, i) in ix.iter().enumerate() {
            code = code * dn + ids[combo[t]][*i] as usize;
        }
        return rank_of[code];
    }
    let axis = round - 1;
    let saved = combo[axis];
    let mut r = [0u32; 3];
    for (v, slot) in r.iter_mut().enumerate() {
        combo[axis] = v;
        *slot = eval_rank(round - 1, combo, ix, ids, dn, rank_of);
    }
    combo[axis] = saved;
    r.sort_unstable();
    r[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructive::{approximator_full, approximator_interior, TriflingRegion};
    use crate::numerics::q;
    use crate::verify::measure_error;

    #[test]
    fn structured_matches_direct_measurement() {
        let f = TargetFunction::abs_shift(q(1, 3));
        let a = approximator_interior(&f, 2, 1, &q(1, 16)).unwrap();
        let region = TriflingRegion::new(1, a.k, a.delta.clone()).unwrap();
        let grid = GridSpec::outside(region, 129);
        let ps = [PNorm::Finite(1), PNorm::Finite(2)];
        let fast = measure_approximator(&a, &f, &grid, &ps).unwrap();
        let slow = measure_error(&a.net, &f, &grid, &ps).unwrap();
        assert_eq!(fast.sup_error, slow.sup_error);
        assert_eq!(fast.points, slow.points);
        for p in ps {
            assert!((fast.lp(p).unwrap() - slow.lp(p).unwrap()).abs() < 1e-12);
        }
        assert_eq!(fast.within_bound(), Some(true));
    }

    #[test]
    fn sup_chain_on_full_grid_with_probes() {
        let f = TargetFunction::hinge2();
        let a = approximator_full(&f, 2, 1, PNorm::Infinity).unwrap();
        let region = TriflingRegion::new(2, a.k, a.delta.clone()).unwrap();
        let grid = GridSpec::full_cube(2, 17).with_band_probes(region);
        let fast = measure_approximator(&a, &f, &grid, &[PNorm::Finite(1)]).unwrap();
        let slow = measure_error(&a.net, &f, &grid, &[PNorm::Finite(1)]).unwrap();
        assert_eq!(fast.sup_error, slow.sup_error);
        assert_eq!(fast.within_bound(), Some(true));
        let dec = fast.decomposition.unwrap();
        assert!(dec.quantization >= 0.0 && dec.grid_offset > 0.0);
    }
}
