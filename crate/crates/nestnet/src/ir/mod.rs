//! The nested-network intermediate representation.
//!
//! A [`NestNet`] is a chain `L_0, g_1, L_1, …, g_m, L_m` of affine maps and activation
//! vectors. An activation entry is the identity, a ReLU, or a reference to another
//! registered scalar network. All referenced chains live in a flat registry keyed by
//! [`NetId`], so a network that is used as an activation in several places is stored
//! (and counted) once.

mod affine;
mod eval;
mod ops;

pub use affine::AffineMap;
pub use eval::Compiled;
pub use ops::{compose, parallel, structurally_equal, DEFAULT_EXPAND_HEIGHT_LIMIT};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{Backend, NumericsError, Scalar, Q};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Registry identity of a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetId(u64);

impl NetId {
    pub fn fresh() -> Self {
        NetId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    ReLU,
    SubNet(NetId),
}

/// The alternating layer sequence of one network, without its registry.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    layers: Vec<AffineMap>,
    activations: Vec<Vec<Activation>>,
}

impl Chain {
    /// No validation here; see [`NestNet::validate`].
    pub fn new(layers: Vec<AffineMap>, activations: Vec<Vec<Activation>>) -> Self {
        Self { layers, activations }
    }

    pub fn layers(&self) -> &[AffineMap] {
        &self.layers
    }

    pub fn activations(&self) -> &[Vec<Activation>] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, AffineMap::cols)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, AffineMap::rows)
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.activations.len()
    }

    pub fn own_param_count(&self) -> usize {
        self.layers.iter().map(AffineMap::param_count).sum()
    }

    pub(crate) fn sub_refs(&self) -> impl Iterator<Item = NetId> + '_ {
        self.activations.iter().flatten().filter_map(|a| match a {
            Activation::SubNet(id) => Some(*id),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum IrError {
    #[error("invalid network: {0}")]
    Invalid(Violation),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("height {height} exceeds limit {limit}")]
    HeightLimit { height: usize, limit: usize },
    #[error("registry id {0} refers to two different networks")]
    RegistryCollision(NetId),
    #[error("empty list of networks")]
    Empty,
    #[error(transparent)]
    Numeric(#[from] NumericsError),
}

/// One well-formedness problem found by [`NestNet::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoLayers { net: NetId },
    LayerCount { net: NetId, layers: usize, activation_vectors: usize },
    LayerDims { net: NetId, layer: usize, expected: usize, found: usize },
    ActivationLength { net: NetId, layer: usize, expected: usize, found: usize },
    DanglingSubNet { net: NetId, layer: usize, neuron: usize, target: NetId },
    NonScalarSubNet { target: NetId, inputs: usize, outputs: usize },
    Cycle { path: Vec<NetId> },
    MixedBackend { net: NetId, layer: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLayers { net } => write!(f, "{net}: no affine layers"),
            Violation::LayerCount { net, layers, activation_vectors } => write!(
                f,
                "{net}: {layers} affine maps need {} activation vectors, found {activation_vectors}",
                layers.saturating_sub(1)
            ),
            Violation::LayerDims { net, layer, expected, found } => {
                write!(f, "{net}: affine map {layer} expects input dim {expected}, found {found}")
            }
            Violation::ActivationLength { net, layer, expected, found } => {
                write!(f, "{net}: activation vector {layer} has length {found}, layer width is {expected}")
            }
            Violation::DanglingSubNet { net, layer, neuron, target } => {
                write!(f, "{net}: activation {layer}/{neuron} references unregistered {target}")
            }
            Violation::NonScalarSubNet { target, inputs, outputs } => {
                write!(f, "sub-network {target} maps {inputs} -> {outputs}, expected 1 -> 1")
            }
            Violation::Cycle { path } => {
                let p: Vec<String> = path.iter().map(ToString::to_string).collect();
                write!(f, "sub-network cycle {}", p.join(" -> "))
            }
            Violation::MixedBackend { net, layer } => write!(f, "{net}: affine map {layer} mixes backends"),
        }
    }
}

/// A nested network: a root chain plus the registry of every chain it may reference.
#[derive(Clone, Debug)]
pub struct NestNet {
    id: NetId,
    chain: Arc<Chain>,
    registry: Arc<BTreeMap<NetId, Arc<Chain>>>,
}

impl NestNet {
    /// Build from layers, activation vectors and the networks used as activations.
    pub fn build(
        layers: Vec<AffineMap>,
        activations: Vec<Vec<Activation>>,
        subnets: &[&NestNet],
    ) -> Result<NestNet, IrError> {
        let mut registry = BTreeMap::new();
        for s in subnets {
            merge_into(&mut registry, s.id, &s.chain)?;
            for (id, c) in s.registry.iter() {
                merge_into(&mut registry, *id, c)?;
            }
        }
        let net = NestNet {
            id: NetId::fresh(),
            chain: Arc::new(Chain::new(layers, activations)),
            registry: Arc::new(registry),
        }
        .pruned();
        net.check()?;
        Ok(net)
    }

    /// A network with no hidden layers.
    pub fn affine(map: AffineMap) -> NestNet {
        NestNet { id: NetId::fresh(), chain: Arc::new(Chain::new(vec![map], vec![])), registry: Arc::default() }
    }

    /// Assemble without any checks. Used for deserialization and for exercising validation.
    pub fn from_raw_parts(root: Chain, registry: BTreeMap<NetId, Chain>) -> NestNet {
        NestNet {
            id: NetId::fresh(),
            chain: Arc::new(root),
            registry: Arc::new(registry.into_iter().map(|(k, v)| (k, Arc::new(v))).collect()),
        }
    }

    pub(crate) fn from_shared(chain: Chain, registry: BTreeMap<NetId, Arc<Chain>>) -> NestNet {
        NestNet { id: NetId::fresh(), chain: Arc::new(chain), registry: Arc::new(registry) }
    }

    /// Keep only registry entries reachable from the root.
    fn pruned(self) -> NestNet {
        let reach = self.reachable();
        if reach.len() == self.registry.len() {
            return self;
        }
        let registry = self.registry.iter().filter(|(k, _)| reach.contains(k)).map(|(k, v)| (*k, v.clone())).collect();
        NestNet { registry: Arc::new(registry), ..self }
    }

    fn check(&self) -> Result<(), IrError> {
        match self.validate().into_iter().next() {
            Some(v) => Err(IrError::Invalid(v)),
            None => Ok(()),
        }
    }

    pub fn id(&self) -> NetId {
        self.id
    }

    pub fn root_chain(&self) -> &Chain {
        &self.chain
    }

    pub fn layers(&self) -> &[AffineMap] {
        &self.chain.layers
    }

    pub fn activations(&self) -> &[Vec<Activation>] {
        &self.chain.activations
    }

    pub fn registry(&self) -> &BTreeMap<NetId, Arc<Chain>> {
        &self.registry
    }

    pub fn chain_of(&self, id: NetId) -> Option<&Arc<Chain>> {
        self.registry.get(&id)
    }

    /// View a registered sub-network as a network of its own.
    pub fn sub_net(&self, id: NetId) -> Option<NestNet> {
        let chain = self.registry.get(&id)?.clone();
        Some(NestNet { id, chain, registry: self.registry.clone() }.pruned())
    }

    pub fn input_dim(&self) -> usize {
        self.chain.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.chain.output_dim()
    }

    /// Number of hidden layers of the root chain.
    pub fn depth(&self) -> usize {
        self.chain.depth()
    }

    /// Largest activation vector of the root chain.
    pub fn width(&self) -> usize {
        self.chain.activations.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Backend of the weights, if uniform.
    pub fn backend(&self) -> Option<Backend> {
        let mut found = None;
        for c in std::iter::once(&self.chain).chain(self.registry.values()) {
            for l in &c.layers {
                match (found, l.backend()) {
                    (_, None) => return None,
                    (None, b) => found = b,
                    (Some(a), Some(b)) if a != b => return None,
                    _ => {}
                }
            }
        }
        found
    }

    /// Ids reachable from the root through activation references.
    pub fn reachable(&self) -> BTreeSet<NetId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<NetId> = self.chain.sub_refs().collect();
        while let Some(id) = stack.pop() {
            if id == self.id && !self.registry.contains_key(&id) {
                continue;
            }
            if seen.insert(id) {
                if let Some(c) = self.registry.get(&id) {
                    stack.extend(c.sub_refs());
                }
            }
        }
        seen
    }

    /// All well-formedness violations; empty iff the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        check_chain(self.id, &self.chain, &self.registry, &mut out);
        let reach = self.reachable();
        for id in &reach {
            if let Some(c) = self.registry.get(id) {
                check_chain(*id, c, &self.registry, &mut out);
                if c.input_dim() != 1 || c.output_dim() != 1 {
                    out.push(Violation::NonScalarSubNet {
                        target: *id,
                        inputs: c.input_dim(),
                        outputs: c.output_dim(),
                    });
                }
            }
        }
        if let Some(path) = self.find_cycle() {
            out.push(Violation::Cycle { path });
        }
        out
    }

    fn find_cycle(&self) -> Option<Vec<NetId>> {
        // root id may be referenced by a registry entry through a raw-built registry
        let mut state: HashMap<NetId, u8> = HashMap::new();
        let mut path = vec![self.id];
        fn dfs(
            net: &NestNet,
            chain: &Chain,
            state: &mut HashMap<NetId, u8>,
            path: &mut Vec<NetId>,
        ) -> Option<Vec<NetId>> {
            for t in chain.sub_refs() {
                if let Some(pos) = path.iter().position(|p| *p == t) {
                    let mut cyc = path[pos..].to_vec();
                    cyc.push(t);
                    return Some(cyc);
                }
                if state.get(&t) == Some(&2) {
                    continue;
                }
                let target = if t == net.id { Some(&net.chain) } else { net.registry.get(&t) };
                if let Some(c) = target {
                    path.push(t);
                    if let Some(cyc) = dfs(net, c, state, path) {
                        return Some(cyc);
                    }
                    path.pop();
                    state.insert(t, 2);
                }
            }
            None
        }
        dfs(self, &self.chain, &mut state, &mut path)
    }

    /// 1 for networks whose activations are only identity/ReLU (including affine-only),
    /// otherwise one more than the tallest referenced sub-network.
    pub fn height(&self) -> Result<usize, IrError> {
        self.check()?;
        let mut memo = HashMap::new();
        Ok(chain_height(&self.chain, &self.registry, &mut memo))
    }

    /// Parameters of the root chain plus those of every distinct reachable sub-network, each once.
    pub fn param_count(&self) -> Result<usize, IrError> {
        self.check()?;
        Ok(self.param_count_unchecked())
    }

    pub(crate) fn param_count_unchecked(&self) -> usize {
        let subs: usize =
            self.reachable().iter().filter_map(|id| self.registry.get(id)).map(|c| c.own_param_count()).sum();
        self.chain.own_param_count() + subs
    }

    /// Number of activation entries referencing each reachable sub-network.
    pub fn use_counts(&self) -> BTreeMap<NetId, usize> {
        let mut counts = BTreeMap::new();
        for id in self.chain.sub_refs() {
            *counts.entry(id).or_insert(0) += 1;
        }
        for id in self.reachable() {
            if let Some(c) = self.registry.get(&id) {
                for t in c.sub_refs() {
                    *counts.entry(t).or_insert(0) += 1;
                }
            }
        }
        counts
    }

    /// Evaluate on a vector of scalars sharing one backend.
    pub fn eval(&self, x: &[Scalar]) -> Result<Vec<Scalar>, IrError> {
        if x.len() != self.input_dim() {
            return Err(IrError::DimMismatch { expected: self.input_dim(), found: x.len() });
        }
        let Some(first) = x.first() else {
            return Err(IrError::DimMismatch { expected: self.input_dim(), found: 0 });
        };
        let backend = first.backend();
        if let Some(bad) = x.iter().find(|s| s.backend() != backend) {
            return Err(NumericsError::BackendMismatch { left: backend, right: bad.backend() }.into());
        }
        match self.backend() {
            Some(b) if b == backend => {}
            Some(b) => return Err(NumericsError::BackendMismatch { left: b, right: backend }.into()),
            None => return Err(NumericsError::InvalidNet("mixed weight backends".into()).into()),
        }
        match backend {
            Backend::Exact => {
                let xs: Vec<Q> = x.iter().map(|s| s.as_exact().unwrap().clone()).collect();
                Ok(self.eval_exact(&xs)?.into_iter().map(Scalar::Exact).collect())
            }
            Backend::Float => {
                let xs: Vec<f64> = x.iter().map(Scalar::to_f64).collect();
                Ok(self.eval_f64(&xs)?.into_iter().map(Scalar::Float).collect())
            }
        }
    }

    pub fn eval_exact(&self, x: &[Q]) -> Result<Vec<Q>, IrError> {
        Ok(self.compile_exact()?.eval(x)?)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>, IrError> {
        Ok(self.compile_f64()?.eval(x)?)
    }

    /// Compile for repeated exact evaluation.
    pub fn compile_exact(&self) -> Result<Compiled<Q>, IrError> {
        self.check()?;
        if self.backend() != Some(Backend::Exact) {
            return Err(NumericsError::FloatBackend.into());
        }
        Ok(Compiled::new(self))
    }

    /// Compile for repeated float evaluation. Exact weights are rounded.
    pub fn compile_f64(&self) -> Result<Compiled<f64>, IrError> {
        self.check()?;
        Ok(Compiled::new(self))
    }

    /// Copy with every weight converted to the given backend. Sub-network ids are kept.
    pub fn to_backend(&self, backend: Backend) -> Result<NestNet, IrError> {
        let conv = |c: &Chain| -> Result<Chain, IrError> {
            let layers = c.layers.iter().map(|l| l.to_backend(backend)).collect::<Result<_, _>>()?;
            Ok(Chain::new(layers, c.activations.clone()))
        };
        let registry = self
            .registry
            .iter()
            .map(|(k, v)| Ok((*k, Arc::new(conv(v)?))))
            .collect::<Result<BTreeMap<_, _>, IrError>>()?;
        Ok(NestNet { id: self.id, chain: Arc::new(conv(&self.chain)?), registry: Arc::new(registry) })
    }

    /// Inline every sub-network activation, giving an equivalent height-1 network.
    pub fn expand(&self) -> Result<NestNet, IrError> {
        self.expand_with_limit(DEFAULT_EXPAND_HEIGHT_LIMIT)
    }

    pub fn expand_with_limit(&self, limit: usize) -> Result<NestNet, IrError> {
        ops::expand(self, limit)
    }

    /// Activation entry referencing this network.
    pub fn as_activation(&self) -> Activation {
        Activation::SubNet(self.id)
    }
}

impl PartialEq for NestNet {
    fn eq(&self, other: &Self) -> bool {
        structurally_equal(self, other)
    }
}

fn merge_into(reg: &mut BTreeMap<NetId, Arc<Chain>>, id: NetId, chain: &Arc<Chain>) -> Result<(), IrError> {
    match reg.get(&id) {
        Some(existing) if Arc::ptr_eq(existing, chain) || **existing == **chain => Ok(()),
        Some(_) => Err(IrError::RegistryCollision(id)),
        None => {
            reg.insert(id, chain.clone());
            Ok(())
        }
    }
}

pub(crate) fn merge_registries(nets: &[&NestNet]) -> Result<BTreeMap<NetId, Arc<Chain>>, IrError> {
    let mut reg = BTreeMap::new();
    for n in nets {
        for (id, c) in n.registry.iter() {
            merge_into(&mut reg, *id, c)?;
        }
    }
    Ok(reg)
}

fn check_chain(id: NetId, c: &Chain, reg: &BTreeMap<NetId, Arc<Chain>>, out: &mut Vec<Violation>) {
    if c.layers.is_empty() {
        out.push(Violation::NoLayers { net: id });
        return;
    }
    if c.activations.len() + 1 != c.layers.len() {
        out.push(Violation::LayerCount { net: id, layers: c.layers.len(), activation_vectors: c.activations.len() });
        return;
    }
    for (i, l) in c.layers.iter().enumerate() {
        if l.backend().is_none() {
            out.push(Violation::MixedBackend { net: id, layer: i });
        }
        if i > 0 {
            let prev = c.layers[i - 1].rows();
            if l.cols() != prev {
                out.push(Violation::LayerDims { net: id, layer: i, expected: prev, found: l.cols() });
            }
        }
    }
    for (i, acts) in c.activations.iter().enumerate() {
        let w = c.layers[i].rows();
        if acts.len() != w {
            out.push(Violation::ActivationLength { net: id, layer: i, expected: w, found: acts.len() });
        }
        for (j, a) in acts.iter().enumerate() {
            if let Activation::SubNet(t) = a {
                if !reg.contains_key(t) {
                    out.push(Violation::DanglingSubNet { net: id, layer: i, neuron: j, target: *t });
                }
            }
        }
    }
}

fn chain_height(c: &Chain, reg: &BTreeMap<NetId, Arc<Chain>>, memo: &mut HashMap<NetId, usize>) -> usize {
    let mut tallest = 0;
    for id in c.sub_refs() {
        let h = match memo.get(&id) {
            Some(h) => *h,
            None => {
                let h = chain_height(&reg[&id], reg, memo);
                memo.insert(id, h);
                h
            }
        };
        tallest = tallest.max(h);
    }
    1 + tallest
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{q, qint};

    fn relu_unit() -> NestNet {
        NestNet::build(
            vec![
                AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
                AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
            ],
            vec![vec![Activation::ReLU]],
            &[],
        )
        .unwrap()
    }

    /// Scalar network with `p` parameters: 1 -> h -> 1 with h = (p - 1) / 3.
    fn ten_param_sub() -> NestNet {
        NestNet::build(
            vec![
                AffineMap::exact(3, 1, vec![qint(1), qint(-1), qint(2)], vec![qint(0), qint(1), qint(-1)]),
                AffineMap::exact(1, 3, vec![qint(1), qint(1), qint(-1)], vec![qint(0)]),
            ],
            vec![vec![Activation::ReLU; 3]],
            &[],
        )
        .unwrap()
    }

    fn nine_neuron_net(a: &NestNet, b: &NestNet) -> NestNet {
        let l0 = AffineMap::exact(4, 1, vec![qint(1); 4], vec![qint(0); 4]);
        let l1 = AffineMap::exact(5, 4, vec![q(1, 2); 20], vec![qint(0); 5]);
        let l2 = AffineMap::exact(1, 5, vec![qint(1); 5], vec![qint(0)]);
        let g1 = vec![a.as_activation(), b.as_activation(), a.as_activation(), b.as_activation()];
        let g2 = vec![a.as_activation(), b.as_activation(), a.as_activation(), b.as_activation(), a.as_activation()];
        NestNet::build(vec![l0, l1, l2], vec![g1, g2], &[a, b]).unwrap()
    }

    #[test]
    fn affine_only_counts_and_height() {
        let n = NestNet::affine(AffineMap::exact(3, 2, vec![qint(1); 6], vec![qint(0); 3]));
        assert_eq!(n.param_count().unwrap(), 9);
        assert_eq!(n.height().unwrap(), 1);
        assert!(n.validate().is_empty());
    }

    #[test]
    fn distinct_subnets_counted_once() {
        let a = ten_param_sub();
        let b = ten_param_sub();
        assert_eq!(a.param_count().unwrap(), 10);
        let two = nine_neuron_net(&a, &b);
        assert_eq!(two.param_count().unwrap(), 8 + 25 + 6 + 10 + 10);
        assert_eq!(two.height().unwrap(), 2);
        let one = nine_neuron_net(&a, &a);
        assert_eq!(one.param_count().unwrap(), 8 + 25 + 6 + 10);
    }

    #[test]
    fn standard_net_has_height_one() {
        assert_eq!(relu_unit().height().unwrap(), 1);
        let r = relu_unit();
        let nested = NestNet::build(
            vec![
                AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
                AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
            ],
            vec![vec![r.as_activation()]],
            &[&r],
        )
        .unwrap();
        assert_eq!(nested.height().unwrap(), 2);
    }

    #[test]
    fn validate_reports_dimension_mismatch() {
        let root = Chain::new(
            vec![
                AffineMap::exact(3, 2, vec![qint(1); 6], vec![qint(0); 3]),
                AffineMap::exact(1, 4, vec![qint(1); 4], vec![qint(0)]),
            ],
            vec![vec![Activation::ReLU; 4]],
        );
        let n = NestNet::from_raw_parts(root, BTreeMap::new());
        let v = n.validate();
        assert!(v.iter().any(|x| matches!(x, Violation::ActivationLength { expected: 3, found: 4, .. })));
        assert!(v.iter().any(|x| matches!(x, Violation::LayerDims { .. })));
        assert!(n.height().is_err());
    }

    #[test]
    fn validate_reports_cycles_and_dangling() {
        let a = NetId::fresh();
        let b = NetId::fresh();
        let unit = |t: NetId| {
            Chain::new(
                vec![
                    AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
                    AffineMap::exact(1, 1, vec![qint(1)], vec![qint(0)]),
                ],
                vec![vec![Activation::SubNet(t)]],
            )
        };
        let mut reg = BTreeMap::new();
        reg.insert(a, unit(b));
        reg.insert(b, unit(a));
        let n = NestNet::from_raw_parts(unit(a), reg);
        assert!(n.validate().iter().any(|v| matches!(v, Violation::Cycle { .. })));

        let ghost = NetId::fresh();
        let n = NestNet::from_raw_parts(unit(ghost), BTreeMap::new());
        assert!(n.validate().iter().any(|v| matches!(v, Violation::DanglingSubNet { .. })));
    }

    #[test]
    fn eval_basics() {
        let r = relu_unit();
        assert_eq!(r.eval(&[Scalar::int(-1)]).unwrap(), vec![Scalar::int(0)]);
        assert_eq!(r.eval(&[Scalar::ratio(3, 2)]).unwrap(), vec![Scalar::ratio(3, 2)]);
        assert!(r.eval(&[Scalar::float(1.0)]).is_err());
        assert!(r.eval(&[Scalar::int(1), Scalar::int(2)]).is_err());
        let id = NestNet::affine(AffineMap::identity(2, Backend::Exact));
        let x = vec![Scalar::ratio(1, 3), Scalar::int(-4)];
        assert_eq!(id.eval(&x).unwrap(), x);
    }
}
