use super::IrError;
use crate::numerics::{Backend, NumericsError, Scalar, Q};

/// `x ↦ W x + b` with `W` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    rows: usize,
    cols: usize,
    weights: Vec<Scalar>,
    bias: Vec<Scalar>,
}

impl AffineMap {
    pub fn new(rows: usize, cols: usize, weights: Vec<Scalar>, bias: Vec<Scalar>) -> Result<Self, IrError> {
        if rows == 0 || cols == 0 {
            return Err(IrError::DimMismatch { expected: 1, found: 0 });
        }
        if weights.len() != rows * cols {
            return Err(IrError::DimMismatch { expected: rows * cols, found: weights.len() });
        }
        if bias.len() != rows {
            return Err(IrError::DimMismatch { expected: rows, found: bias.len() });
        }
        let b = weights[0].backend();
        if let Some(s) = weights.iter().chain(&bias).find(|s| s.backend() != b) {
            return Err(NumericsError::BackendMismatch { left: b, right: s.backend() }.into());
        }
        Ok(Self { rows, cols, weights, bias })
    }

    /// Exact map from rationals. Panics on inconsistent lengths.
    pub fn exact(rows: usize, cols: usize, weights: Vec<Q>, bias: Vec<Q>) -> Self {
        assert_eq!(weights.len(), rows * cols, "weight count");
        assert_eq!(bias.len(), rows, "bias count");
        assert!(rows > 0 && cols > 0, "empty affine map");
        Self {
            rows,
            cols,
            weights: weights.into_iter().map(Scalar::Exact).collect(),
            bias: bias.into_iter().map(Scalar::Exact).collect(),
        }
    }

    /// Float map. Panics on inconsistent lengths.
    pub fn float(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Self {
        assert_eq!(weights.len(), rows * cols, "weight count");
        assert_eq!(bias.len(), rows, "bias count");
        Self {
            rows,
            cols,
            weights: weights.into_iter().map(Scalar::Float).collect(),
            bias: bias.into_iter().map(Scalar::Float).collect(),
        }
    }

    pub fn identity(n: usize, backend: Backend) -> Self {
        let mut w = vec![Scalar::zero_like(backend); n * n];
        for i in 0..n {
            w[i * n + i] = Scalar::one_like(backend);
        }
        Self { rows: n, cols: n, weights: w, bias: vec![Scalar::zero_like(backend); n] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[Scalar] {
        &self.weights
    }

    pub fn bias(&self) -> &[Scalar] {
        &self.bias
    }

    pub fn weight(&self, r: usize, c: usize) -> &Scalar {
        &self.weights[r * self.cols + c]
    }

    pub fn bias_at(&self, r: usize) -> &Scalar {
        &self.bias[r]
    }

    pub fn param_count(&self) -> usize {
        (self.cols + 1) * self.rows
    }

    /// Backend shared by every entry, or `None` when mixed.
    pub fn backend(&self) -> Option<Backend> {
        let b = self.weights.first()?.backend();
        self.weights.iter().chain(&self.bias).all(|s| s.backend() == b).then_some(b)
    }

    pub fn to_backend(&self, backend: Backend) -> Result<AffineMap, IrError> {
        let conv = |v: &[Scalar]| v.iter().map(|s| s.convert(backend)).collect::<Result<Vec<_>, _>>();
        Ok(Self { rows: self.rows, cols: self.cols, weights: conv(&self.weights)?, bias: conv(&self.bias)? })
    }

    /// `outer ∘ self`.
    pub fn then(&self, outer: &AffineMap) -> Result<AffineMap, IrError> {
        if outer.cols != self.rows {
            return Err(IrError::DimMismatch { expected: self.rows, found: outer.cols });
        }
        let b = self.backend().ok_or(NumericsError::InvalidNet("mixed backend".into()))?;
        let mut w = Vec::with_capacity(outer.rows * self.cols);
        let mut bias = Vec::with_capacity(outer.rows);
        for r in 0..outer.rows {
            for c in 0..self.cols {
                let mut acc = Scalar::zero_like(b);
                for k in 0..self.rows {
                    let o = outer.weight(r, k);
                    if o.is_zero() {
                        continue;
                    }
                    acc = acc.add(&o.mul(self.weight(k, c))?)?;
                }
                w.push(acc);
            }
            let mut acc = outer.bias[r].clone();
            for k in 0..self.rows {
                let o = outer.weight(r, k);
                if !o.is_zero() {
                    acc = acc.add(&o.mul(&self.bias[k])?)?;
                }
            }
            bias.push(acc);
        }
        AffineMap::new(outer.rows, self.cols, w, bias)
    }

    /// Block-diagonal stacking.
    pub fn block_diag(maps: &[&AffineMap]) -> Result<AffineMap, IrError> {
        let first = maps.first().ok_or(IrError::Empty)?;
        let b = first.backend().ok_or(NumericsError::InvalidNet("mixed backend".into()))?;
        let rows: usize = maps.iter().map(|m| m.rows).sum();
        let cols: usize = maps.iter().map(|m| m.cols).sum();
        let mut w = vec![Scalar::zero_like(b); rows * cols];
        let mut bias = Vec::with_capacity(rows);
        let (mut r0, mut c0) = (0, 0);
        for m in maps {
            if m.backend() != Some(b) {
                return Err(NumericsError::BackendMismatch { left: b, right: m.weights[0].backend() }.into());
            }
            for r in 0..m.rows {
                for c in 0..m.cols {
                    w[(r0 + r) * cols + c0 + c] = m.weight(r, c).clone();
                }
            }
            bias.extend(m.bias.iter().cloned());
            r0 += m.rows;
            c0 += m.cols;
        }
        AffineMap::new(rows, cols, w, bias)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::qint;

    #[test]
    fn param_count_formula() {
        let m = AffineMap::exact(3, 2, vec![qint(0); 6], vec![qint(0); 3]);
        assert_eq!(m.param_count(), 9);
    }

    #[test]
    fn fused_composition() {
        let inner = AffineMap::exact(2, 1, vec![qint(2), qint(-1)], vec![qint(1), qint(0)]);
        let outer = AffineMap::exact(1, 2, vec![qint(3), qint(1)], vec![qint(5)]);
        let f = inner.then(&outer).unwrap();
        // 3(2x+1) + (-x) + 5 = 5x + 8
        assert_eq!(f.weight(0, 0), &Scalar::int(5));
        assert_eq!(f.bias_at(0), &Scalar::int(8));
    }

    #[test]
    fn mixed_backends_rejected() {
        let r = AffineMap::new(1, 1, vec![Scalar::int(1)], vec![Scalar::float(0.0)]);
        assert!(r.is_err());
    }
}
