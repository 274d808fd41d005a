use std::collections::HashMap;

use num_traits::{Signed, Zero};

use super::scalar::{Backend, Scalar, Q};
use super::NumericsError;
use crate::ir::{Activation, Chain, NestNet, NetId};

/// Height limit for symbolic flattening.
pub const FLATTEN_HEIGHT_LIMIT: usize = 4;
/// Breakpoint limit for any intermediate piecewise-linear function during flattening.
pub const FLATTEN_BREAKPOINT_LIMIT: usize = 1_000_000;

/// Continuous piecewise-linear function of one variable, stored as breakpoints,
/// values at the breakpoints and the two tail slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear1D {
    breakpoints: Vec<Scalar>,
    values: Vec<Scalar>,
    left_slope: Scalar,
    right_slope: Scalar,
}

impl PiecewiseLinear1D {
    pub fn new(
        breakpoints: Vec<Scalar>,
        values: Vec<Scalar>,
        left_slope: Scalar,
        right_slope: Scalar,
    ) -> Result<Self, NumericsError> {
        if breakpoints.is_empty() {
            return Err(NumericsError::InvalidPwl("at least one breakpoint is required".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(NumericsError::InvalidPwl(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        let backend = left_slope.backend();
        for s in breakpoints.iter().chain(values.iter()).chain([&right_slope]) {
            if s.backend() != backend {
                return Err(NumericsError::BackendMismatch { left: backend, right: s.backend() });
            }
            if let Scalar::Float(v) = s {
                if !v.is_finite() {
                    return Err(NumericsError::NonFinite);
                }
            }
        }
        for w in breakpoints.windows(2) {
            if w[0].try_cmp(&w[1])? != std::cmp::Ordering::Less {
                return Err(NumericsError::InvalidPwl("breakpoints must be strictly increasing".into()));
            }
        }
        Ok(Self { breakpoints, values, left_slope, right_slope })
    }

    pub fn breakpoints(&self) -> &[Scalar] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn left_slope(&self) -> &Scalar {
        &self.left_slope
    }

    pub fn right_slope(&self) -> &Scalar {
        &self.right_slope
    }

    pub fn backend(&self) -> Backend {
        self.left_slope.backend()
    }

    pub fn to_exact(&self) -> Result<ExactPwl, NumericsError> {
        let get = |s: &Scalar| s.as_exact().cloned().ok_or(NumericsError::FloatBackend);
        Ok(ExactPwl {
            xs: self.breakpoints.iter().map(get).collect::<Result<_, _>>()?,
            ys: self.values.iter().map(get).collect::<Result<_, _>>()?,
            left: get(&self.left_slope)?,
            right: get(&self.right_slope)?,
        })
    }

    pub fn to_float(&self) -> PiecewiseLinear1D {
        let f = |s: &Scalar| Scalar::Float(s.to_f64());
        PiecewiseLinear1D {
            breakpoints: self.breakpoints.iter().map(f).collect(),
            values: self.values.iter().map(f).collect(),
            left_slope: f(&self.left_slope),
            right_slope: f(&self.right_slope),
        }
    }
}

impl From<ExactPwl> for PiecewiseLinear1D {
    fn from(p: ExactPwl) -> Self {
        PiecewiseLinear1D {
            breakpoints: p.xs.into_iter().map(Scalar::Exact).collect(),
            values: p.ys.into_iter().map(Scalar::Exact).collect(),
            left_slope: Scalar::Exact(p.left),
            right_slope: Scalar::Exact(p.right),
        }
    }
}

/// Evaluate a piecewise-linear function. The argument must share the function's backend.
pub fn pwl_eval(f: &PiecewiseLinear1D, x: &Scalar) -> Result<Scalar, NumericsError> {
    if x.backend() != f.backend() {
        return Err(NumericsError::BackendMismatch { left: f.backend(), right: x.backend() });
    }
    match x {
        Scalar::Exact(xq) => Ok(Scalar::Exact(f.to_exact()?.eval(xq))),
        Scalar::Float(xv) => {
            if !xv.is_finite() {
                return Err(NumericsError::NonFinite);
            }
            let xs: Vec<f64> = f.breakpoints.iter().map(Scalar::to_f64).collect();
            let ys: Vec<f64> = f.values.iter().map(Scalar::to_f64).collect();
            Ok(Scalar::Float(eval_f64(&xs, &ys, f.left_slope.to_f64(), f.right_slope.to_f64(), *xv)))
        }
    }
}

fn eval_f64(xs: &[f64], ys: &[f64], left: f64, right: f64, x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0] + left * (x - xs[0]);
    }
    if x >= xs[last] {
        return ys[last] + right * (x - xs[last]);
    }
    let i = xs.partition_point(|b| *b <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// Maximum of `|f|` over the closed interval `[lo, hi]`.
pub fn pwl_max_on(f: &PiecewiseLinear1D, lo: &Scalar, hi: &Scalar) -> Result<Scalar, NumericsError> {
    if lo.backend() != f.backend() || hi.backend() != f.backend() {
        return Err(NumericsError::BackendMismatch { left: f.backend(), right: lo.backend() });
    }
    if lo.try_cmp(hi)? == std::cmp::Ordering::Greater {
        return Err(NumericsError::EmptyInterval);
    }
    match f.backend() {
        Backend::Exact => {
            let p = f.to_exact()?;
            Ok(Scalar::Exact(p.max_abs_on(lo.as_exact().unwrap(), hi.as_exact().unwrap())))
        }
        Backend::Float => {
            let (l, h) = (lo.to_f64(), hi.to_f64());
            let xs: Vec<f64> = f.breakpoints.iter().map(Scalar::to_f64).collect();
            let ys: Vec<f64> = f.values.iter().map(Scalar::to_f64).collect();
            let ev = |x| eval_f64(&xs, &ys, f.left_slope.to_f64(), f.right_slope.to_f64(), x);
            let mut best = ev(l).abs().max(ev(h).abs());
            for (x, y) in xs.iter().zip(&ys) {
                if *x > l && *x < h {
                    best = best.max(y.abs());
                }
            }
            Ok(Scalar::Float(best))
        }
    }
}

/// Exact piecewise-linear function; the working representation for symbolic algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactPwl {
    pub(crate) xs: Vec<Q>,
    pub(crate) ys: Vec<Q>,
    pub(crate) left: Q,
    pub(crate) right: Q,
}

impl ExactPwl {
    pub fn new(xs: Vec<Q>, ys: Vec<Q>, left: Q, right: Q) -> Result<Self, NumericsError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(NumericsError::InvalidPwl("breakpoint and value counts must match and be nonzero".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NumericsError::InvalidPwl("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { xs, ys, left, right })
    }

    pub fn affine(slope: Q, intercept: Q) -> Self {
        Self { xs: vec![Q::zero()], ys: vec![intercept], left: slope.clone(), right: slope }
    }

    pub fn constant(c: Q) -> Self {
        Self::affine(Q::zero(), c)
    }

    pub fn identity() -> Self {
        Self::affine(Q::from_integer(1.into()), Q::zero())
    }

    /// `x` clipped to `[lo, hi]`.
    pub fn clamp(lo: Q, hi: Q) -> Self {
        if lo == hi {
            return Self::constant(lo);
        }
        Self { xs: vec![lo.clone(), hi.clone()], ys: vec![lo, hi], left: Q::zero(), right: Q::zero() }
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.xs
    }

    pub fn values(&self) -> &[Q] {
        &self.ys
    }

    pub fn left_slope(&self) -> &Q {
        &self.left
    }

    pub fn right_slope(&self) -> &Q {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn eval(&self, x: &Q) -> Q {
        let last = self.xs.len() - 1;
        if *x <= self.xs[0] {
            return &self.ys[0] + &self.left * (x - &self.xs[0]);
        }
        if *x >= self.xs[last] {
            return &self.ys[last] + &self.right * (x - &self.xs[last]);
        }
        let i = self.xs.partition_point(|b| b <= x) - 1;
        let slope = self.slope(i);
        &self.ys[i] + slope * (x - &self.xs[i])
    }

    fn slope(&self, i: usize) -> Q {
        (&self.ys[i + 1] - &self.ys[i]) / (&self.xs[i + 1] - &self.xs[i])
    }

    /// Range of values when both tails are flat.
    pub fn bounded_range(&self) -> Option<(Q, Q)> {
        if !self.left.is_zero() || !self.right.is_zero() {
            return None;
        }
        let lo = self.ys.iter().min().unwrap().clone();
        let hi = self.ys.iter().max().unwrap().clone();
        Some((lo, hi))
    }

    /// `bias + Σ c_i f_i`.
    pub fn lincomb(terms: &[(Q, &ExactPwl)], bias: &Q) -> ExactPwl {
        let terms: Vec<&(Q, &ExactPwl)> = terms.iter().filter(|(c, _)| !c.is_zero()).collect();
        if terms.is_empty() {
            return Self::constant(bias.clone());
        }
        if terms.len() == 1 {
            let (c, f) = terms[0];
            return ExactPwl {
                xs: f.xs.clone(),
                ys: f.ys.iter().map(|y| c * y + bias).collect(),
                left: c * &f.left,
                right: c * &f.right,
            };
        }
        let mut xs: Vec<Q> = terms.iter().flat_map(|(_, f)| f.xs.iter().cloned()).collect();
        xs.sort();
        xs.dedup();
        let mut ys = vec![bias.clone(); xs.len()];
        let mut left = Q::zero();
        let mut right = Q::zero();
        for (c, f) in terms {
            let vals = f.eval_sorted(&xs);
            for (y, v) in ys.iter_mut().zip(vals) {
                *y += c * v;
            }
            left += c * &f.left;
            right += c * &f.right;
        }
        ExactPwl { xs, ys, left, right }.simplify()
    }

    /// Evaluate at an increasing list of points with a single sweep.
    fn eval_sorted(&self, pts: &[Q]) -> Vec<Q> {
        let mut out = Vec::with_capacity(pts.len());
        let mut i = 0usize;
        let last = self.xs.len() - 1;
        for x in pts {
            if *x <= self.xs[0] {
                out.push(&self.ys[0] + &self.left * (x - &self.xs[0]));
                continue;
            }
            if *x >= self.xs[last] {
                out.push(&self.ys[last] + &self.right * (x - &self.xs[last]));
                continue;
            }
            while self.xs[i + 1] <= *x {
                i += 1;
            }
            if *x == self.xs[i] {
                out.push(self.ys[i].clone());
            } else {
                out.push(&self.ys[i] + self.slope(i) * (x - &self.xs[i]));
            }
        }
        out
    }

    /// `max(f, 0)`.
    pub fn relu(&self) -> ExactPwl {
        let n = self.xs.len();
        let mut xs = Vec::with_capacity(n + 4);
        let mut ys = Vec::with_capacity(n + 4);
        let zero = Q::zero();
        if !self.left.is_zero() && self.ys[0].signum() == self.left.signum() && !self.ys[0].is_zero() {
            xs.push(&self.xs[0] - &self.ys[0] / &self.left);
            ys.push(zero.clone());
        }
        for i in 0..n {
            xs.push(self.xs[i].clone());
            ys.push(if self.ys[i].is_negative() { zero.clone() } else { self.ys[i].clone() });
            if i + 1 < n {
                let (a, b) = (&self.ys[i], &self.ys[i + 1]);
                if (a.is_negative() && b.is_positive()) || (a.is_positive() && b.is_negative()) {
                    let t = a / (a - b);
                    xs.push(&self.xs[i] + t * (&self.xs[i + 1] - &self.xs[i]));
                    ys.push(zero.clone());
                }
            }
        }
        let yl = &self.ys[n - 1];
        if !self.right.is_zero() && !yl.is_zero() && yl.signum() != self.right.signum() {
            xs.push(&self.xs[n - 1] - yl / &self.right);
            ys.push(zero.clone());
        }
        let left = if self.left.is_negative() { self.left.clone() } else { zero.clone() };
        let right = if self.right.is_positive() { self.right.clone() } else { zero };
        ExactPwl { xs, ys, left, right }.simplify()
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &ExactPwl, inner: &ExactPwl) -> ExactPwl {
        let n = inner.xs.len();
        let g = &outer.xs;
        let mut pts: Vec<Q> = inner.xs.clone();
        // breakpoints of `outer` strictly inside the value range of a piece are pulled back
        let lower = |v: &Q| g.partition_point(|c| c <= v);
        let upper = |v: &Q| g.partition_point(|c| c < v);
        if inner.left.is_positive() {
            for c in &g[..upper(&inner.ys[0])] {
                pts.push(&inner.xs[0] + (c - &inner.ys[0]) / &inner.left);
            }
        } else if inner.left.is_negative() {
            for c in &g[lower(&inner.ys[0])..] {
                pts.push(&inner.xs[0] + (c - &inner.ys[0]) / &inner.left);
            }
        }
        for i in 0..n.saturating_sub(1) {
            let (ya, yb) = (&inner.ys[i], &inner.ys[i + 1]);
            if ya == yb {
                continue;
            }
            let (lo, hi) = if ya < yb { (ya, yb) } else { (yb, ya) };
            let span = &inner.xs[i + 1] - &inner.xs[i];
            let dy = yb - ya;
            for c in &g[lower(lo)..upper(hi)] {
                pts.push(&inner.xs[i] + (c - ya) * &span / &dy);
            }
        }
        if inner.right.is_positive() {
            for c in &g[lower(&inner.ys[n - 1])..] {
                pts.push(&inner.xs[n - 1] + (c - &inner.ys[n - 1]) / &inner.right);
            }
        } else if inner.right.is_negative() {
            for c in &g[..upper(&inner.ys[n - 1])] {
                pts.push(&inner.xs[n - 1] + (c - &inner.ys[n - 1]) / &inner.right);
            }
        }
        pts.sort();
        pts.dedup();
        let hv = inner.eval_sorted(&pts);
        let ys: Vec<Q> = hv.iter().map(|v| outer.eval(v)).collect();
        let left = if inner.left.is_positive() {
            &inner.left * &outer.left
        } else if inner.left.is_negative() {
            &inner.left * &outer.right
        } else {
            Q::zero()
        };
        let right = if inner.right.is_positive() {
            &inner.right * &outer.right
        } else if inner.right.is_negative() {
            &inner.right * &outer.left
        } else {
            Q::zero()
        };
        ExactPwl { xs: pts, ys, left, right }.simplify()
    }

    /// Drop breakpoints across which the function is linear.
    pub fn simplify(self) -> ExactPwl {
        let n = self.xs.len();
        if n <= 1 {
            return self;
        }
        let seg: Vec<Q> = (0..n - 1).map(|i| self.slope(i)).collect();
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let before = if i == 0 { &self.left } else { &seg[i - 1] };
            let after = if i == n - 1 { &self.right } else { &seg[i] };
            keep.push(before != after);
        }
        if !keep.iter().any(|k| *k) {
            keep[0] = true;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, k) in keep.into_iter().enumerate() {
            if k {
                xs.push(self.xs[i].clone());
                ys.push(self.ys[i].clone());
            }
        }
        ExactPwl { xs, ys, left: self.left, right: self.right }
    }

    /// Exact maximum of `|f|` on `[lo, hi]`.
    pub fn max_abs_on(&self, lo: &Q, hi: &Q) -> Q {
        let mut best = self.eval(lo).abs().max(self.eval(hi).abs());
        for (x, y) in self.xs.iter().zip(&self.ys) {
            if x > lo && x < hi {
                let a = y.abs();
                if a > best {
                    best = a;
                }
            }
        }
        best
    }
}

/// Symbolic flattening of a scalar network into a piecewise-linear function valid on all of ℝ.
pub fn pwl_of_net(net: &NestNet) -> Result<PiecewiseLinear1D, NumericsError> {
    exact_pwl_of_net(net, None).map(Into::into)
}

/// Flatten a scalar network on `[lo, hi]`. The result agrees with the network on the interval
/// and is constant outside it.
pub fn pwl_of_net_on(net: &NestNet, lo: &Q, hi: &Q) -> Result<PiecewiseLinear1D, NumericsError> {
    if lo > hi {
        return Err(NumericsError::EmptyInterval);
    }
    exact_pwl_of_net(net, Some((lo.clone(), hi.clone()))).map(Into::into)
}

pub(crate) fn exact_pwl_of_net(net: &NestNet, window: Option<(Q, Q)>) -> Result<ExactPwl, NumericsError> {
    if net.input_dim() != 1 || net.output_dim() != 1 {
        return Err(NumericsError::NotScalar { inputs: net.input_dim(), outputs: net.output_dim() });
    }
    let report = net.validate();
    if !report.is_empty() {
        return Err(NumericsError::InvalidNet(report[0].to_string()));
    }
    if net.backend() != Some(Backend::Exact) {
        return Err(NumericsError::FloatBackend);
    }
    let h = net.height().map_err(|e| NumericsError::InvalidNet(e.to_string()))?;
    if h > FLATTEN_HEIGHT_LIMIT {
        return Err(NumericsError::HeightLimit { height: h, limit: FLATTEN_HEIGHT_LIMIT });
    }
    let input = match window {
        Some((lo, hi)) => ExactPwl::clamp(lo, hi),
        None => ExactPwl::identity(),
    };
    let mut fl = Flattener { net, memo: HashMap::new() };
    fl.chain(net.root_chain(), &input)
}

struct Flattener<'a> {
    net: &'a NestNet,
    memo: HashMap<(NetId, Option<(Q, Q)>), ExactPwl>,
}

impl Flattener<'_> {
    fn chain(&mut self, chain: &Chain, input: &ExactPwl) -> Result<ExactPwl, NumericsError> {
        let mut cur = vec![input.clone()];
        for (li, layer) in chain.layers().iter().enumerate() {
            let mut next = Vec::with_capacity(layer.rows());
            for r in 0..layer.rows() {
                let terms: Vec<(Q, &ExactPwl)> = (0..layer.cols())
                    .filter_map(|c| {
                        let w = layer.weight(r, c).as_exact()?;
                        (!w.is_zero()).then(|| (w.clone(), &cur[c]))
                    })
                    .collect();
                let b = layer.bias_at(r).as_exact().ok_or(NumericsError::FloatBackend)?;
                next.push(ExactPwl::lincomb(&terms, b));
            }
            if let Some(acts) = chain.activations().get(li) {
                for (f, act) in next.iter_mut().zip(acts) {
                    match act {
                        Activation::Identity => {}
                        Activation::ReLU => *f = f.relu(),
                        Activation::SubNet(id) => {
                            let range = f.bounded_range();
                            let g = self.sub(*id, range)?;
                            *f = ExactPwl::compose(&g, f);
                        }
                    }
                    if f.len() > FLATTEN_BREAKPOINT_LIMIT {
                        return Err(NumericsError::TooManyBreakpoints { limit: FLATTEN_BREAKPOINT_LIMIT });
                    }
                }
            }
            cur = next;
        }
        Ok(cur.pop().expect("scalar output"))
    }

    fn sub(&mut self, id: NetId, range: Option<(Q, Q)>) -> Result<ExactPwl, NumericsError> {
        let key = (id, range.clone());
        if let Some(p) = self.memo.get(&key) {
            return Ok(p.clone());
        }
        let chain = self
            .net
            .chain_of(id)
            .ok_or_else(|| NumericsError::InvalidNet(format!("dangling sub-network {id}")))?
            .clone();
        let input = match range {
            Some((lo, hi)) => ExactPwl::clamp(lo, hi),
            None => ExactPwl::identity(),
        };
        let p = self.chain(&chain, &input)?;
        self.memo.insert(key, p.clone());
        Ok(p)
    }
}
