use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::{merge_registries, Activation, AffineMap, Chain, IrError, NestNet, NetId};
use crate::numerics::{Backend, NumericsError};

pub const DEFAULT_EXPAND_HEIGHT_LIMIT: usize = 4;

/// `outer ∘ inner`, with the last affine map of `inner` fused into the first of `outer`.
pub fn compose(outer: &NestNet, inner: &NestNet) -> Result<NestNet, IrError> {
    if outer.input_dim() != inner.output_dim() {
        return Err(IrError::DimMismatch { expected: inner.output_dim(), found: outer.input_dim() });
    }
    let registry = merge_registries(&[outer, inner])?;
    let il = inner.layers();
    let ol = outer.layers();
    let fused = il[il.len() - 1].then(&ol[0])?;
    let mut layers: Vec<AffineMap> = il[..il.len() - 1].to_vec();
    layers.push(fused);
    layers.extend(ol[1..].iter().cloned());
    let mut acts = inner.activations().to_vec();
    acts.extend(outer.activations().iter().cloned());
    Ok(NestNet::from_shared(Chain::new(layers, acts), registry))
}

/// Block-diagonal stacking. Shallower members are padded with identity stages after their output.
pub fn parallel(nets: &[&NestNet]) -> Result<NestNet, IrError> {
    match nets {
        [] => return Err(IrError::Empty),
        [one] => return Ok((*one).clone()),
        _ => {}
    }
    let registry = merge_registries(nets)?;
    let depth = nets.iter().map(|n| n.depth()).max().unwrap_or(0);
    let padded: Vec<Chain> =
        nets.iter().map(|n| pad_chain(n.root_chain(), depth, backend_of(n)?)).collect::<Result<_, IrError>>()?;
    let mut layers = Vec::with_capacity(depth + 1);
    let mut acts = Vec::with_capacity(depth);
    for i in 0..=depth {
        let maps: Vec<&AffineMap> = padded.iter().map(|c| &c.layers()[i]).collect();
        layers.push(AffineMap::block_diag(&maps)?);
        if i < depth {
            acts.push(padded.iter().flat_map(|c| c.activations()[i].iter().copied()).collect());
        }
    }
    Ok(NestNet::from_shared(Chain::new(layers, acts), registry))
}

fn backend_of(n: &NestNet) -> Result<Backend, IrError> {
    n.backend().ok_or_else(|| NumericsError::InvalidNet("mixed weight backends".into()).into())
}

fn pad_chain(c: &Chain, depth: usize, backend: Backend) -> Result<Chain, IrError> {
    let mut layers = c.layers().to_vec();
    let mut acts = c.activations().to_vec();
    let o = c.output_dim();
    while acts.len() < depth {
        acts.push(vec![Activation::Identity; o]);
        layers.push(AffineMap::identity(o, backend));
    }
    Ok(Chain::new(layers, acts))
}

pub(super) fn expand(net: &NestNet, limit: usize) -> Result<NestNet, IrError> {
    let h = net.height()?;
    if h > limit {
        return Err(IrError::HeightLimit { height: h, limit });
    }
    if h == 1 {
        return Ok(net.clone());
    }
    let backend = backend_of(net)?;
    let mut memo: HashMap<NetId, Chain> = HashMap::new();
    let chain = expand_chain(net.root_chain(), net, backend, &mut memo)?;
    Ok(NestNet::from_shared(chain, BTreeMap::new()))
}

fn expand_chain(
    chain: &Chain,
    net: &NestNet,
    backend: Backend,
    memo: &mut HashMap<NetId, Chain>,
) -> Result<Chain, IrError> {
    let src_layers = chain.layers();
    let mut layers = vec![src_layers[0].clone()];
    let mut acts: Vec<Vec<Activation>> = Vec::new();
    for (i, g) in chain.activations().iter().enumerate() {
        if g.iter().all(|a| !matches!(a, Activation::SubNet(_))) {
            acts.push(g.clone());
            layers.push(src_layers[i + 1].clone());
            continue;
        }
        let mut blocks = Vec::with_capacity(g.len());
        for a in g {
            let block = match a {
                Activation::SubNet(id) => {
                    if !memo.contains_key(id) {
                        let sub = net.chain_of(*id).expect("validated").clone();
                        let e = expand_chain(&sub, net, backend, memo)?;
                        memo.insert(*id, e);
                    }
                    memo[id].clone()
                }
                prim => Chain::new(
                    vec![AffineMap::identity(1, backend), AffineMap::identity(1, backend)],
                    vec![vec![*prim]],
                ),
            };
            blocks.push(block);
        }
        let d = blocks.iter().map(Chain::depth).max().unwrap_or(0);
        let blocks: Vec<Chain> = blocks.iter().map(|b| pad_chain(b, d, backend)).collect::<Result<_, _>>()?;
        let w = g.len();
        acts.push(vec![Activation::Identity; w]);
        for k in 0..=d {
            let maps: Vec<&AffineMap> = blocks.iter().map(|b| &b.layers()[k]).collect();
            layers.push(AffineMap::block_diag(&maps)?);
            if k < d {
                acts.push(blocks.iter().flat_map(|b| b.activations()[k].iter().copied()).collect());
            }
        }
        acts.push(vec![Activation::Identity; w]);
        layers.push(src_layers[i + 1].clone());
    }
    Ok(Chain::new(layers, acts))
}

/// Equality of layers and activation structure, treating registry ids as names only.
pub fn structurally_equal(a: &NestNet, b: &NestNet) -> bool {
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    eq_chain(a.root_chain(), a, b.root_chain(), b, &mut fwd, &mut back)
}

fn eq_chain(
    ca: &Chain,
    na: &NestNet,
    cb: &Chain,
    nb: &NestNet,
    fwd: &mut HashMap<NetId, NetId>,
    back: &mut HashMap<NetId, NetId>,
) -> bool {
    if ca.layers() != cb.layers() || ca.activations().len() != cb.activations().len() {
        return false;
    }
    for (ga, gb) in ca.activations().iter().zip(cb.activations()) {
        if ga.len() != gb.len() {
            return false;
        }
        for (x, y) in ga.iter().zip(gb) {
            match (x, y) {
                (Activation::Identity, Activation::Identity) | (Activation::ReLU, Activation::ReLU) => {}
                (Activation::SubNet(p), Activation::SubNet(q)) => match (fwd.get(p), back.get(q)) {
                    (Some(m), _) if m != q => return false,
                    (_, Some(m)) if m != p => return false,
                    (Some(_), Some(_)) => {}
                    _ => {
                        fwd.insert(*p, *q);
                        back.insert(*q, *p);
                        let (Some(sa), Some(sb)) = (na.chain_of(*p), nb.chain_of(*q)) else {
                            return false;
                        };
                        let (sa, sb): (Arc<Chain>, Arc<Chain>) = (sa.clone(), sb.clone());
                        if !eq_chain(&sa, na, &sb, nb, fwd, back) {
                            return false;
                        }
                    }
                },
                _ => return false,
            }
        }
    }
    true
}
