use num_traits::{One, Zero};

use crate::ir::{Activation, AffineMap, IrError, NestNet};
use crate::numerics::Q;

/// Sparse linear form over the previous layer: `(input index, coefficient)` pairs.
pub(crate) type Terms = Vec<(usize, Q)>;

/// One hidden neuron: pre-activation `Σ w·h + b` and its activation.
pub(crate) struct Unit {
    pub terms: Terms,
    pub bias: Q,
    pub act: Activation,
}

impl Unit {
    pub fn id(terms: Terms, bias: Q) -> Self {
        Self { terms, bias, act: Activation::Identity }
    }

    pub fn relu(terms: Terms, bias: Q) -> Self {
        Self { terms, bias, act: Activation::ReLU }
    }

    pub fn sub(net: &NestNet, terms: Terms, bias: Q) -> Self {
        Self { terms, bias, act: net.as_activation() }
    }

    /// Identity neuron copying input `i`.
    pub fn pass(i: usize) -> Self {
        Self::id(vec![(i, Q::one())], Q::zero())
    }
}

/// Layer-by-layer assembly of an exact chain.
pub(crate) struct ChainBuilder {
    width: usize,
    layers: Vec<AffineMap>,
    acts: Vec<Vec<Activation>>,
    subs: Vec<NestNet>,
}

impl ChainBuilder {
    pub fn new(input_dim: usize) -> Self {
        Self { width: input_dim, layers: Vec::new(), acts: Vec::new(), subs: Vec::new() }
    }

    /// Register a network used as an activation somewhere in this chain.
    pub fn uses(&mut self, net: &NestNet) {
        if !self.subs.iter().any(|s| s.id() == net.id()) {
            self.subs.push(net.clone());
        }
    }

    pub fn hidden(&mut self, units: Vec<Unit>) {
        let cols = self.width;
        let rows: Vec<(Terms, Q)> = units.iter().map(|u| (u.terms.clone(), u.bias.clone())).collect();
        self.layers.push(dense(cols, rows));
        self.acts.push(units.into_iter().map(|u| u.act).collect());
        self.width = self.acts.last().unwrap().len();
    }

    pub fn finish(self, outputs: Vec<(Terms, Q)>) -> Result<NestNet, IrError> {
        let mut layers = self.layers;
        layers.push(dense(self.width, outputs));
        let subs: Vec<&NestNet> = self.subs.iter().collect();
        NestNet::build(layers, self.acts, &subs)
    }
}

pub(crate) fn dense(cols: usize, rows: Vec<(Terms, Q)>) -> AffineMap {
    let n = rows.len();
    let mut w = vec![Q::zero(); n * cols];
    let mut b = Vec::with_capacity(n);
    for (r, (terms, bias)) in rows.into_iter().enumerate() {
        for (c, v) in terms {
            assert!(c < cols, "column {c} out of range for width {cols}");
            w[r * cols + c] += v;
        }
        b.push(bias);
    }
    AffineMap::exact(n, cols, w, b)
}

/// Affine network `x ↦ W x + b` from dense rows.
pub(crate) fn affine_net(cols: usize, rows: Vec<(Terms, Q)>) -> NestNet {
    NestNet::affine(dense(cols, rows))
}

/// Scalar affine network `x ↦ a x + b`.
pub(crate) fn scalar_affine(a: Q, b: Q) -> NestNet {
    affine_net(1, vec![(vec![(0, a)], b)])
}
