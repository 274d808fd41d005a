use super::grid::{ErrorReport, GridSpec};
use super::structured::measure_approximator;
use super::VerifyError;
use crate::constructive::{approximator_full, PNorm, TargetFunction, TriflingRegion};
use crate::numerics::Q;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: u32,
    pub k: u64,
    pub delta: Q,
    pub params: usize,
    pub sup_error: f64,
    pub lp_error: Option<f64>,
    pub bound: Q,
    pub within_bound: bool,
    pub wall_ms: u128,
    pub report: ErrorReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingStudy {
    pub s: u32,
    pub p: PNorm,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log(sup error)` against `log(params)`; `None` with fewer than two
    /// nonzero errors.
    pub slope: Option<f64>,
}

impl ScalingStudy {
    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.within_bound)
    }
}

/// Build the full approximator for every `n` and measure it.
///
/// `p = ∞` is measured on the whole cube with extra coordinates inside the bands; finite `p`
/// is measured off the bands.
pub fn scaling_study(
    f: &TargetFunction,
    s: u32,
    p: PNorm,
    n_list: &[u32],
    points_per_axis: usize,
) -> Result<ScalingStudy, VerifyError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(VerifyError::BadNList);
    }
    let d = f.dim();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let start = std::time::Instant::now();
        let a = approximator_full(f, n, s, p)?;
        let region = TriflingRegion::new(d, a.k, a.delta.clone())?;
        let (grid, ps) = match p {
            PNorm::Infinity => (GridSpec::full_cube(d, points_per_axis).with_band_probes(region), vec![]),
            PNorm::Finite(_) => (GridSpec::outside(region, points_per_axis), vec![p]),
        };
        let report = measure_approximator(&a, f, &grid, &ps)?;
        let bound = report.bound.clone().expect("full approximator carries a bound");
        rows.push(ScalingRow {
            n,
            k: a.k,
            delta: a.delta.clone(),
            params: report.param_count,
            sup_error: report.sup_f64(),
            lp_error: ps.first().and_then(|q| report.lp(*q)),
            within_bound: report.within_bound() == Some(true),
            bound,
            wall_ms: start.elapsed().as_millis(),
            report,
        });
    }
    let slope = loglog_slope(rows.iter().map(|r| (r.params as f64, r.sup_error)));
    Ok(ScalingStudy { s, p, rows, slope })
}

fn loglog_slope(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{q, qint};

    #[test]
    fn slope_of_power_law() {
        let s = loglog_slope([(10.0, 1.0), (100.0, 0.01), (1000.0, 1e-4)].into_iter()).unwrap();
        assert!((s + 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope([(10.0, 0.0), (20.0, 0.0)].into_iter()), None);
    }

    #[test]
    fn rejects_unsorted_n() {
        let f = TargetFunction::abs_shift(q(1, 3));
        assert_eq!(scaling_study(&f, 1, PNorm::Infinity, &[3, 2], 9), Err(VerifyError::BadNList));
        assert_eq!(scaling_study(&f, 1, PNorm::Infinity, &[], 9), Err(VerifyError::BadNList));
    }

    #[test]
    fn small_study_bound_column() {
        let f = TargetFunction::abs_shift(q(1, 3));
        let st = scaling_study(&f, 2, PNorm::Infinity, &[2, 3], 65).unwrap();
        for r in &st.rows {
            assert!(r.within_bound);
            let n = qint(r.n as i64);
            assert_eq!(r.bound, qint(7) / (&n * &n * &n));
        }
        let c = TargetFunction::constant(1, q(2, 5));
        let st = scaling_study(&c, 1, PNorm::Finite(2), &[2, 3], 33).unwrap();
        assert!(st.rows.iter().all(|r| r.sup_error == 0.0 && r.within_bound));
        assert_eq!(st.slope, None);
    }
}
