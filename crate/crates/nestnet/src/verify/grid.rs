use num_traits::{Signed, ToPrimitive, Zero};

use super::VerifyError;
use crate::constructive::{ModulusSpec, PNorm, TargetFunction, TriflingRegion};
use crate::ir::NestNet;
use crate::numerics::{qint, root_enclosure, Scalar, Q};

#[derive(Clone, Debug, PartialEq)]
pub enum GridMode {
    FullCube,
    OutsideTrifling(TriflingRegion),
}

/// Tensor grid on `[0,1]^d` with `points_per_axis` equispaced coordinates per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub points_per_axis: usize,
    pub mode: GridMode,
    /// In full-cube mode, extra coordinates placed strictly inside these bands.
    pub band_probes: Option<TriflingRegion>,
}

impl GridSpec {
    pub fn full_cube(d: usize, points_per_axis: usize) -> Self {
        Self { d, points_per_axis, mode: GridMode::FullCube, band_probes: None }
    }

    pub fn outside(region: TriflingRegion, points_per_axis: usize) -> Self {
        Self { d: region.d, points_per_axis, mode: GridMode::OutsideTrifling(region), band_probes: None }
    }

    pub fn with_band_probes(mut self, region: TriflingRegion) -> Self {
        self.band_probes = Some(region);
        self
    }

    /// The grid with every axis interval halved; contains the original points.
    pub fn refined(&self) -> Self {
        Self { points_per_axis: 2 * self.points_per_axis - 1, ..self.clone() }
    }

    /// Sorted coordinates used along every axis.
    pub fn axis_coords(&self) -> Result<Vec<Q>, VerifyError> {
        if self.points_per_axis < 2 {
            return Err(VerifyError::GridTooSmall);
        }
        let last = qint(self.points_per_axis as i64 - 1);
        let mut coords: Vec<Q> = (0..self.points_per_axis).map(|i| qint(i as i64) / &last).collect();
        match &self.mode {
            GridMode::FullCube => {
                if let Some(region) = &self.band_probes {
                    let kq = qint(region.k as i64);
                    for k in 1..region.k {
                        let edge = qint(k as i64) / &kq;
                        for (a, b) in [(1, 4), (1, 2), (3, 4)] {
                            coords.push(&edge - &region.delta * qint(a) / qint(b));
                        }
                    }
                    coords.sort();
                    coords.dedup();
                }
            }
            GridMode::OutsideTrifling(region) => coords.retain(|c| !region.coord_in_band(c)),
        }
        Ok(coords)
    }

    pub fn point_count(&self) -> Result<u64, VerifyError> {
        Ok((self.axis_coords()?.len() as u64).pow(self.d as u32))
    }
}

/// Odometer over index tuples of a tensor grid.
pub(crate) struct Odometer {
    idx: Vec<usize>,
    len: usize,
    done: bool,
}

impl Odometer {
    pub fn new(d: usize, len: usize) -> Self {
        Self { idx: vec![0; d], len, done: len == 0 }
    }

    pub fn current(&self) -> Option<&[usize]> {
        (!self.done).then_some(self.idx.as_slice())
    }

    pub fn advance(&mut self) {
        for t in (0..self.idx.len()).rev() {
            self.idx[t] += 1;
            if self.idx[t] < self.len {
                return;
            }
            self.idx[t] = 0;
        }
        self.done = true;
    }
}

/// Informational split of the error into a quantization part and a grid-offset part.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecomposition {
    /// Largest `|φ(x_β) - f(x_β)|` over grid vertices `x_β = β/K`.
    pub quantization: f64,
    /// Largest `|f(x) - f(x_β(x))|` over evaluated points outside the bands.
    pub grid_offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub sup_error: Scalar,
    pub argmax: Vec<Q>,
    pub lp_errors: Vec<(PNorm, f64)>,
    /// The guaranteed bound for this grid mode, when the construction parameters are known.
    pub bound: Option<Q>,
    pub n: Option<u32>,
    pub s: Option<u32>,
    pub d: usize,
    pub k: Option<u64>,
    pub delta: Option<Q>,
    pub param_count: usize,
    pub points: u64,
    pub decomposition: Option<ErrorDecomposition>,
}

impl ErrorReport {
    pub fn sup_f64(&self) -> f64 {
        self.sup_error.to_f64()
    }

    pub fn lp(&self, p: PNorm) -> Option<f64> {
        self.lp_errors.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }

    pub fn within_bound(&self) -> Option<bool> {
        let sup = self.sup_error.as_exact()?;
        self.bound.as_ref().map(|b| sup <= b)
    }
}

/// `c·√d·ω(n^(-(s+1)/d))`, rounded up.
pub fn guaranteed_bound(factor: u32, n: u32, s: u32, d: usize, modulus: &ModulusSpec) -> Q {
    let root_d = root_enclosure(&qint(d as i64), 2).hi;
    qint(factor as i64) * root_d * modulus.upper_at_rate(n as u64, s + 1, d as u32)
}

pub(crate) struct LpAccumulator {
    ps: Vec<PNorm>,
    sums: Vec<f64>,
    count: u64,
}

impl LpAccumulator {
    pub fn new(ps: &[PNorm]) -> Self {
        Self { ps: ps.to_vec(), sums: vec![0.0; ps.len()], count: 0 }
    }

    pub fn push(&mut self, err: f64) {
        self.count += 1;
        for (p, s) in self.ps.iter().zip(self.sums.iter_mut()) {
            match p {
                PNorm::Finite(k) => *s += err.powi(*k as i32),
                PNorm::Infinity => *s = s.max(err),
            }
        }
    }

    pub fn finish(&self) -> Vec<(PNorm, f64)> {
        self.ps
            .iter()
            .zip(&self.sums)
            .map(|(p, s)| match p {
                PNorm::Finite(k) => (*p, (s / self.count.max(1) as f64).powf(1.0 / *k as f64)),
                PNorm::Infinity => (*p, *s),
            })
            .collect()
    }
}

/// Grid errors of an arbitrary network, evaluated exactly at every point.
pub fn measure_error(
    net: &NestNet,
    f: &TargetFunction,
    grid: &GridSpec,
    p_list: &[PNorm],
) -> Result<ErrorReport, VerifyError> {
    if net.input_dim() != f.dim() || grid.d != f.dim() || net.output_dim() != 1 {
        return Err(VerifyError::DimMismatch { net: net.input_dim(), target: f.dim() });
    }
    let exec = net.compile_exact()?;
    let coords = grid.axis_coords()?;
    let mut odo = Odometer::new(grid.d, coords.len());
    let mut acc = LpAccumulator::new(p_list);
    let mut sup = Q::zero();
    let mut argmax = Vec::new();
    let mut points = 0;
    while let Some(ix) = odo.current() {
        let x: Vec<Q> = ix.iter().map(|i| coords[*i].clone()).collect();
        let v = exec.eval(&x).map_err(crate::ir::IrError::from)?.swap_remove(0);
        let err = (v - f.eval_exact(&x)).abs();
        acc.push(err.to_f64().unwrap_or(f64::INFINITY));
        if err > sup || argmax.is_empty() {
            sup = err;
            argmax = x;
        }
        points += 1;
        odo.advance();
    }
    Ok(ErrorReport {
        sup_error: Scalar::Exact(sup),
        argmax,
        lp_errors: acc.finish(),
        bound: None,
        n: None,
        s: None,
        d: grid.d,
        k: None,
        delta: None,
        param_count: net.param_count()?,
        points,
        decomposition: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructive::cpl_to_net;
    use crate::numerics::{q, ExactPwl};

    #[test]
    fn outside_grid_skips_bands_and_full_cube_probes_them() {
        let region = TriflingRegion::new(1, 4, q(1, 16)).unwrap();
        let out = GridSpec::outside(region.clone(), 101).axis_coords().unwrap();
        assert!(out.iter().all(|c| !region.coord_in_band(c)));
        assert!(out.len() < 101);
        let full = GridSpec::full_cube(1, 101).with_band_probes(region.clone()).axis_coords().unwrap();
        assert!(full.iter().filter(|c| region.coord_in_band(c)).count() >= 9);
    }

    #[test]
    fn exact_copy_of_linear_target_has_zero_error() {
        let f = TargetFunction::new("x/2", 1, |x| &x[0] / qint(2), |x| x[0] / 2.0, ModulusSpec::lipschitz(q(1, 2)))
            .unwrap();
        let pwl = ExactPwl::new(vec![qint(0)], vec![qint(0)], q(1, 2), q(1, 2)).unwrap();
        let net = cpl_to_net(&pwl.into()).unwrap();
        let r = measure_error(&net, &f, &GridSpec::full_cube(1, 33), &[PNorm::Finite(1), PNorm::Infinity]).unwrap();
        assert!(r.sup_error.is_zero());
        assert_eq!(r.points, 33);
    }

    #[test]
    fn l1_below_sup_and_refinement_monotone() {
        let f = TargetFunction::abs_shift(q(1, 3));
        let net = NestNet::affine(crate::ir::AffineMap::exact(1, 1, vec![q(1, 5)], vec![q(1, 7)]));
        let g = GridSpec::full_cube(1, 17);
        let a = measure_error(&net, &f, &g, &[PNorm::Finite(1)]).unwrap();
        let b = measure_error(&net, &f, &g.refined(), &[PNorm::Finite(1)]).unwrap();
        assert!(a.lp(PNorm::Finite(1)).unwrap() <= a.sup_f64());
        assert!(b.sup_f64() >= a.sup_f64());
        let two = GridSpec::full_cube(2, 5);
        assert!(measure_error(&net, &f, &two, &[]).is_err());
    }
}
