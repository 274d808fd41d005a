use num_traits::{One, Zero};

use super::builder::{affine_net, ChainBuilder, Terms, Unit};
use super::ConstructError;
use crate::ir::NestNet;
use crate::numerics::{Backend, ExactPwl, NumericsError, PiecewiseLinear1D, Scalar, Q};

fn exact_of(f: &PiecewiseLinear1D) -> Result<ExactPwl, NumericsError> {
    match f.backend() {
        Backend::Exact => f.to_exact(),
        Backend::Float => {
            let cv = |s: &Scalar| Q::from_float(s.to_f64()).ok_or(NumericsError::NonFinite);
            ExactPwl::new(
                f.breakpoints().iter().map(cv).collect::<Result<_, _>>()?,
                f.values().iter().map(cv).collect::<Result<_, _>>()?,
                cv(f.left_slope())?,
                cv(f.right_slope())?,
            )
        }
    }
}

/// One-hidden-layer network realizing a continuous piecewise-linear function exactly.
pub fn cpl_to_net(f: &PiecewiseLinear1D) -> Result<NestNet, ConstructError> {
    let e = exact_of(f)?;
    let net = cpl_exact(&e)?;
    Ok(match f.backend() {
        Backend::Exact => net,
        Backend::Float => net.to_backend(Backend::Float)?,
    })
}

pub(crate) fn cpl_exact(f: &ExactPwl) -> Result<NestNet, ConstructError> {
    cpl_with_input(f, vec![(0, Q::one())], Q::zero(), 1)
}

/// Realize `f(Σ w·x + b)` for an affine pre-form over `input_dim` inputs.
pub(crate) fn cpl_with_input(f: &ExactPwl, form: Terms, shift: Q, input_dim: usize) -> Result<NestNet, ConstructError> {
    let (units, out_terms, out_bias) = cpl_units(f, &form, &shift);
    if units.is_empty() {
        let slope = f.left_slope();
        let mut terms: Terms = form.iter().map(|(c, w)| (*c, w * slope)).collect();
        terms.retain(|(_, w)| !w.is_zero());
        let bias = &out_bias + &shift * slope;
        return Ok(affine_net(input_dim, vec![(terms, bias)]));
    }
    let mut cb = ChainBuilder::new(input_dim);
    cb.hidden(units);
    Ok(cb.finish(vec![(out_terms, out_bias)])?)
}

/// Hidden units `σ(±(u - x_i))` with output coefficients such that `f(u) = out + Σ c_i h_i`,
/// where `u = Σ w·x + b`. Returns no units when `f` is affine, in which case the output
/// bias is `f(0)` and the slope is the common slope.
pub(crate) fn cpl_units(f: &ExactPwl, form: &Terms, shift: &Q) -> (Vec<Unit>, Terms, Q) {
    let f = f.clone().simplify();
    let xs = f.breakpoints();
    let ys = f.values();
    let n = xs.len();
    let affine = n == 1 && f.left_slope() == f.right_slope();
    if affine {
        let bias = &ys[0] - f.left_slope() * &xs[0];
        return (Vec::new(), Vec::new(), bias);
    }
    let slope_after = |i: usize| -> Q {
        if i + 1 < n {
            (&ys[i + 1] - &ys[i]) / (&xs[i + 1] - &xs[i])
        } else {
            f.right_slope().clone()
        }
    };
    let scaled = |c: &Q| -> Terms { form.iter().map(|(k, w)| (*k, w * c)).collect() };
    let mut units = Vec::new();
    let mut out = Vec::new();
    // f(u) = v_1 - s_L σ(x_1 - u) + Σ (s_i - s_{i-1}) σ(u - x_i),  s_0 = 0
    if !f.left_slope().is_zero() {
        units.push(Unit::relu(scaled(&-Q::one()), &xs[0] - shift));
        out.push((units.len() - 1, -f.left_slope().clone()));
    }
    let mut prev = Q::zero();
    for (i, x) in xs.iter().enumerate() {
        let s = slope_after(i);
        let c = &s - &prev;
        if !c.is_zero() {
            units.push(Unit::relu(scaled(&Q::one()), shift - x));
            out.push((units.len() - 1, c));
        }
        prev = s;
    }
    (units, out, ys[0].clone())
}

/// Like [`cpl_units`], but an affine `f` yields one identity unit carrying `u`.
pub(crate) fn cpl_units_or_linear(f: &ExactPwl, form: &Terms, shift: &Q) -> (Vec<Unit>, Terms, Q) {
    let (units, out, bias) = cpl_units(f, form, shift);
    if !units.is_empty() {
        return (units, out, bias);
    }
    let slope = f.left_slope().clone();
    (vec![Unit::id(form.clone(), shift.clone())], vec![(0, slope)], bias)
}

fn pair_units() -> Vec<Unit> {
    let one = Q::one();
    let m = -Q::one();
    vec![
        Unit::relu(vec![(0, one.clone()), (1, one.clone())], Q::zero()),
        Unit::relu(vec![(0, m.clone()), (1, m.clone())], Q::zero()),
        Unit::relu(vec![(0, one.clone()), (1, m.clone())], Q::zero()),
        Unit::relu(vec![(0, m), (1, one)], Q::zero()),
    ]
}

fn half() -> Q {
    Q::new(1.into(), 2.into())
}

/// `(a, b) ↦ min(a, b)` with one hidden layer of width 4.
pub fn min_pair_net() -> NestNet {
    let h = half();
    let mut cb = ChainBuilder::new(2);
    cb.hidden(pair_units());
    cb.finish(vec![(vec![(0, h.clone()), (1, -h.clone()), (2, -h.clone()), (3, -h)], Q::zero())])
        .expect("valid min network")
}

/// `(a, b) ↦ max(a, b)` with one hidden layer of width 4.
pub fn max_pair_net() -> NestNet {
    let h = half();
    let mut cb = ChainBuilder::new(2);
    cb.hidden(pair_units());
    cb.finish(vec![(vec![(0, h.clone()), (1, -h.clone()), (2, h.clone()), (3, h)], Q::zero())])
        .expect("valid max network")
}

/// `(a, b, c) ↦` the median of the three inputs. Width 6, depth 2.
pub fn mid_net() -> NestNet {
    let one = Q::one;
    let m = || -Q::one();
    let h = half();
    let mut cb = ChainBuilder::new(3);
    // σ(a-b), σ(b-a), σ(a+b), σ(-a-b), σ(c), σ(-c)
    cb.hidden(vec![
        Unit::relu(vec![(0, one()), (1, m())], Q::zero()),
        Unit::relu(vec![(0, m()), (1, one())], Q::zero()),
        Unit::relu(vec![(0, one()), (1, one())], Q::zero()),
        Unit::relu(vec![(0, m()), (1, m())], Q::zero()),
        Unit::relu(vec![(2, one())], Q::zero()),
        Unit::relu(vec![(2, m())], Q::zero()),
    ]);
    // P = max(a,b) = ½(h2 - h3 + h0 + h1), Q = min(a,b) = ½(h2 - h3 - h0 - h1), c = h4 - h5
    let p: Terms = vec![(2, h.clone()), (3, -h.clone()), (0, h.clone()), (1, h.clone())];
    let q: Terms = vec![(2, h.clone()), (3, -h.clone()), (0, -h.clone()), (1, -h.clone())];
    let c: Terms = vec![(4, one()), (5, m())];
    let neg = |t: &Terms| -> Terms { t.iter().map(|(i, w)| (*i, -w)).collect() };
    let cat = |a: &Terms, b: &Terms| -> Terms { a.iter().chain(b.iter()).cloned().collect() };
    cb.hidden(vec![
        Unit::relu(cat(&p, &neg(&c)), Q::zero()),
        Unit::relu(cat(&c, &neg(&p)), Q::zero()),
        Unit::relu(cat(&q, &neg(&c)), Q::zero()),
        Unit::relu(cat(&c, &neg(&q)), Q::zero()),
        Unit::relu(vec![(2, one())], Q::zero()),
        Unit::relu(vec![(3, one())], Q::zero()),
    ]);
    // mid = ½(a+b) - ½|P - c| + ½|Q - c|
    cb.finish(vec![(
        vec![(4, h.clone()), (5, -h.clone()), (0, -h.clone()), (1, -h.clone()), (2, h.clone()), (3, h)],
        Q::zero(),
    )])
    .expect("valid mid network")
}
