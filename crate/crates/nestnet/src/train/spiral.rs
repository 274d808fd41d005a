use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pairs(&self) -> Vec<(&[f64], usize)> {
        self.x.iter().map(|v| v.as_slice()).zip(self.y.iter().copied()).collect()
    }

    /// Per-feature mean and standard deviation.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.x.first().map_or(0, Vec::len);
        let m = self.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for v in &self.x {
            for (a, b) in mean.iter_mut().zip(v) {
                *a += b / m;
            }
        }
        let mut var = vec![0.0; d];
        for v in &self.x {
            for ((a, b), mu) in var.iter_mut().zip(v).zip(&mean) {
                *a += (b - mu).powi(2) / m;
            }
        }
        (mean, var.into_iter().map(f64::sqrt).collect())
    }

    pub fn standardized_with(&self, mean: &[f64], std: &[f64]) -> Dataset {
        let x = self
            .x
            .iter()
            .map(|v| {
                v.iter().zip(mean).zip(std).map(|((a, m), s)| if *s > 0.0 { (a - m) / s } else { a - m }).collect()
            })
            .collect();
        Dataset { x, y: self.y.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpiralConfig {
    /// Radius offsets of the two arms.
    pub a: [f64; 2],
    /// Radial growth per radian.
    pub b: f64,
    /// The angle runs over `[0, turns·π]`.
    pub turns: f64,
    /// Tube radius after normalization.
    pub eps: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        Self { a: [0.0, 1.0], b: 1.0 / PI, turns: 30.0, eps: 0.005, samples_per_class: 5000, seed: 0 }
    }
}

impl SpiralConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.eps.is_nan()
            || self.eps <= 0.0
            || self.samples_per_class == 0
            || self.turns.is_nan()
            || self.turns <= 0.0
        {
            return Err(TrainError::InvalidConfig("spiral needs eps > 0, turns > 0 and samples > 0".into()));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        2.0 * (self.turns + 2.0)
    }

    /// Point of arm `class` at angle `theta`, in the unit square.
    pub fn curve_point(&self, class: usize, theta: f64) -> [f64; 2] {
        let r = self.a[class] + self.b * theta;
        [r * theta.cos() / self.scale() + 0.5, r * theta.sin() / self.scale() + 0.5]
    }
}

/// Two interleaved spiral tubes, class-major order.
pub fn spiral_dataset(cfg: &SpiralConfig) -> Result<Dataset, TrainError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = Vec::with_capacity(2 * cfg.samples_per_class);
    let mut y = Vec::with_capacity(2 * cfg.samples_per_class);
    for class in 0..2 {
        for _ in 0..cfg.samples_per_class {
            let theta = rng.gen_range(0.0..=cfg.turns * PI);
            let [cx, cy] = cfg.curve_point(class, theta);
            let rho = cfg.eps * rng.gen::<f64>().sqrt();
            let phi = rng.gen_range(0.0..2.0 * PI);
            x.push(vec![cx + rho * phi.cos(), cy + rho * phi.sin()]);
            y.push(class);
        }
    }
    Ok(Dataset { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_anchors() {
        let cfg = SpiralConfig::default();
        assert_eq!(cfg.curve_point(0, 0.0), [0.5, 0.5]);
        assert_eq!(cfg.curve_point(1, 0.0), [0.515625, 0.5]);
    }

    #[test]
    fn samples_stay_in_tube() {
        let cfg = SpiralConfig { samples_per_class: 200, seed: 7, ..SpiralConfig::default() };
        let data = spiral_dataset(&cfg).unwrap();
        assert_eq!(data.len(), 400);
        let dense: Vec<Vec<[f64; 2]>> = (0..2)
            .map(|c| (0..=600_000).map(|i| cfg.curve_point(c, cfg.turns * PI * i as f64 / 600_000.0)).collect())
            .collect();
        for (p, c) in data.x.iter().zip(&data.y) {
            let dist = dense[*c]
                .iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::MAX, f64::min);
            assert!(dist <= cfg.eps + 1e-6, "{dist}");
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert_eq!(spiral_dataset(&cfg).unwrap(), data);
        assert!(SpiralConfig { eps: 0.0, ..cfg }.validate().is_err());
    }

    #[test]
    fn standardization() {
        let d = Dataset { x: vec![vec![1.0, 5.0], vec![3.0, 5.0]], y: vec![0, 1] };
        let (m, s) = d.moments();
        assert_eq!((m, s.clone()), (vec![2.0, 5.0], vec![1.0, 0.0]));
        let z = d.standardized_with(&[2.0, 5.0], &s);
        assert_eq!(z.x, vec![vec![-1.0, 0.0], vec![1.0, 0.0]]);
    }
}
