use std::collections::HashMap;

use num_traits::One;

use super::{Activation, Chain, NestNet, NetId};
use crate::numerics::{Field, NumericsError, Scalar, Q};

#[derive(Clone, Debug)]
enum Coef<F> {
    One,
    MinusOne,
    Val(F),
}

#[derive(Clone, Debug)]
struct Row<F> {
    terms: Vec<(usize, Coef<F>)>,
    bias: Option<F>,
}

#[derive(Clone, Copy, Debug)]
enum Act {
    Id,
    Relu,
    Sub(usize),
}

#[derive(Clone, Debug)]
struct Layer<F> {
    rows: Vec<Row<F>>,
    acts: Option<Vec<Act>>,
}

/// A network lowered to sparse rows for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled<F> {
    chains: Vec<Vec<Layer<F>>>,
    input_dim: usize,
    output_dim: usize,
}

fn lower<F: Field>(s: &Scalar) -> F {
    match s {
        Scalar::Exact(q) => F::from_q(q),
        Scalar::Float(v) => F::from_f64(*v),
    }
}

impl<F: Field> Compiled<F> {
    pub(crate) fn new(net: &NestNet) -> Self {
        let mut index: HashMap<NetId, usize> = HashMap::new();
        let mut order: Vec<&Chain> = vec![net.root_chain()];
        let mut stack: Vec<&Chain> = vec![net.root_chain()];
        while let Some(c) = stack.pop() {
            for id in c.sub_refs() {
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(id) {
                    let sub = &net.registry()[&id];
                    e.insert(order.len());
                    order.push(sub);
                    stack.push(sub);
                }
            }
        }
        let one = F::from_q(&Q::one());
        let minus_one = F::from_q(&-Q::one());
        let chains = order
            .iter()
            .map(|c| {
                c.layers()
                    .iter()
                    .enumerate()
                    .map(|(li, l)| {
                        let rows = (0..l.rows())
                            .map(|r| {
                                let terms = (0..l.cols())
                                    .filter_map(|col| {
                                        let w = l.weight(r, col);
                                        if w.is_zero() {
                                            return None;
                                        }
                                        let v: F = lower(w);
                                        let coef = if v == one {
                                            Coef::One
                                        } else if v == minus_one {
                                            Coef::MinusOne
                                        } else {
                                            Coef::Val(v)
                                        };
                                        Some((col, coef))
                                    })
                                    .collect();
                                let b = l.bias_at(r);
                                Row { terms, bias: (!b.is_zero()).then(|| lower(b)) }
                            })
                            .collect();
                        let acts = c.activations().get(li).map(|v| {
                            v.iter()
                                .map(|a| match a {
                                    Activation::Identity => Act::Id,
                                    Activation::ReLU => Act::Relu,
                                    Activation::SubNet(id) => Act::Sub(index[id]),
                                })
                                .collect()
                        });
                        Layer { rows, acts }
                    })
                    .collect()
            })
            .collect();
        Self { chains, input_dim: net.input_dim(), output_dim: net.output_dim() }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn eval(&self, x: &[F]) -> Result<Vec<F>, NumericsError> {
        if x.len() != self.input_dim {
            return Err(NumericsError::InvalidNet(format!("expected {} inputs, got {}", self.input_dim, x.len())));
        }
        Ok(self.run(0, x))
    }

    /// Evaluate a scalar network at one point.
    pub fn eval1(&self, x: &F) -> F {
        debug_assert_eq!(self.input_dim, 1);
        self.run(0, std::slice::from_ref(x)).swap_remove(0)
    }

    fn run(&self, ci: usize, x: &[F]) -> Vec<F> {
        let mut cur: Vec<F> = x.to_vec();
        for layer in &self.chains[ci] {
            let mut next: Vec<F> = Vec::with_capacity(layer.rows.len());
            for row in &layer.rows {
                let mut acc = row.bias.clone().unwrap_or_else(F::additive_zero);
                for (c, coef) in &row.terms {
                    match coef {
                        Coef::One => acc.add_to(&cur[*c]),
                        Coef::MinusOne => acc.sub_from(&cur[*c]),
                        Coef::Val(w) => acc.add_prod(w, &cur[*c]),
                    }
                }
                next.push(acc);
            }
            if let Some(acts) = &layer.acts {
                for (v, a) in next.iter_mut().zip(acts) {
                    match a {
                        Act::Id => {}
                        Act::Relu => v.relu_in_place(),
                        Act::Sub(k) => {
                            let out = self.run(*k, std::slice::from_ref(v));
                            *v = out.into_iter().next().expect("scalar sub-network");
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }
}
