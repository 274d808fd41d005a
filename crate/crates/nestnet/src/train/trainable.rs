use std::collections::BTreeMap;
use std::ops::Range;

use super::TrainError;
use crate::ir::{Activation, AffineMap, Chain, NestNet, NetId};
use crate::numerics::Backend;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Act {
    Id,
    Relu,
    Sub(usize),
}

#[derive(Clone, Debug)]
struct PlanLayer {
    rows: usize,
    cols: usize,
    /// First slot of the row-major weights; the bias follows them.
    offset: usize,
    acts: Option<Vec<Act>>,
    /// Tape position of this layer's input.
    input_at: usize,
    /// Tape position of the pre-activations (hidden layers only).
    pre_at: usize,
    /// Tape position of each unit's sub-network tape (sub-network units only).
    sub_at: Vec<usize>,
}

#[derive(Clone, Debug)]
struct PlanChain {
    id: NetId,
    layers: Vec<PlanLayer>,
    slots: Range<usize>,
    tape_len: usize,
}

/// A float network with a flat parameter vector.
///
/// Every registered chain owns one block of slots, so a sub-network used at many sites has
/// a single set of parameters and receives the sum of all per-site gradients.
#[derive(Clone, Debug)]
pub struct TrainableNet {
    chains: Vec<PlanChain>,
    params: Vec<f64>,
    root_id: NetId,
}

fn tape_len(ci: usize, order: &[(NetId, &Chain)], index: &BTreeMap<NetId, usize>, memo: &mut [Option<usize>]) -> usize {
    if let Some(v) = memo[ci] {
        return v;
    }
    let chain = order[ci].1;
    let mut len = 0;
    for (l, map) in chain.layers().iter().enumerate() {
        len += map.cols();
        if let Some(row) = chain.activations().get(l) {
            len += map.rows();
            for a in row {
                if let Activation::SubNet(s) = a {
                    len += tape_len(index[s], order, index, memo);
                }
            }
        }
    }
    memo[ci] = Some(len);
    len
}

impl TrainableNet {
    pub fn from_net(net: &NestNet) -> Result<Self, TrainError> {
        let net = net.to_backend(Backend::Float)?;
        let mut order: Vec<(NetId, &Chain)> = vec![(net.id(), net.root_chain())];
        order.extend(net.registry().iter().map(|(k, v)| (*k, v.as_ref())));
        let index: BTreeMap<NetId, usize> = order.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        let mut memo = vec![None; order.len()];
        let lens: Vec<usize> = (0..order.len()).map(|i| tape_len(i, &order, &index, &mut memo)).collect();
        let mut params = Vec::new();
        let mut chains = Vec::new();
        for (id, chain) in &order {
            let start = params.len();
            let mut layers = Vec::new();
            let mut at = 0;
            for (l, map) in chain.layers().iter().enumerate() {
                let offset = params.len();
                params.extend(map.weights().iter().chain(map.bias()).map(|s| s.to_f64()));
                let input_at = at;
                at += map.cols();
                let pre_at = at;
                let mut sub_at = Vec::new();
                let acts = chain.activations().get(l).map(|row| {
                    at += map.rows();
                    row.iter()
                        .map(|a| match a {
                            Activation::Identity => Act::Id,
                            Activation::ReLU => Act::Relu,
                            Activation::SubNet(s) => {
                                sub_at.push(at);
                                at += lens[index[s]];
                                Act::Sub(index[s])
                            }
                        })
                        .collect()
                });
                layers.push(PlanLayer { rows: map.rows(), cols: map.cols(), offset, acts, input_at, pre_at, sub_at });
            }
            chains.push(PlanChain { id: *id, layers, slots: start..params.len(), tape_len: at });
        }
        Ok(Self { chains, params, root_id: net.id() })
    }

    /// The current parameters written back into a float network.
    pub fn to_net(&self) -> NestNet {
        let chain_of = |c: &PlanChain| {
            let mut layers = Vec::new();
            let mut acts = Vec::new();
            for l in &c.layers {
                let n = l.rows * l.cols;
                let p = &self.params[l.offset..l.offset + n + l.rows];
                layers.push(AffineMap::float(l.rows, l.cols, p[..n].to_vec(), p[n..].to_vec()));
                if let Some(a) = &l.acts {
                    acts.push(
                        a.iter()
                            .map(|a| match a {
                                Act::Id => Activation::Identity,
                                Act::Relu => Activation::ReLU,
                                Act::Sub(i) => Activation::SubNet(self.chains[*i].id),
                            })
                            .collect(),
                    );
                }
            }
            Chain::new(layers, acts)
        };
        let registry = self.chains[1..].iter().map(|c| (c.id, chain_of(c))).collect();
        NestNet::from_raw_parts(chain_of(&self.chains[0]), registry)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.chains[0].layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.chains[0].layers.last().map_or(0, |l| l.rows)
    }

    pub fn root_id(&self) -> NetId {
        self.root_id
    }

    /// Slot of weight `position` (row-major, bias after the weights) of `layer` in chain `id`.
    pub fn slot(&self, id: NetId, layer: usize, position: usize) -> Option<usize> {
        let c = self.chains.iter().find(|c| c.id == id)?;
        let l = c.layers.get(layer)?;
        (position < l.rows * (l.cols + 1)).then_some(l.offset + position)
    }

    /// Whether the slot belongs to a network used as an activation.
    pub fn is_shared_slot(&self, slot: usize) -> bool {
        !self.chains[0].slots.contains(&slot)
    }

    /// Slot ranges of the sub-networks, keyed by id.
    pub fn shared_blocks(&self) -> Vec<(NetId, Range<usize>)> {
        self.chains[1..].iter().map(|c| (c.id, c.slots.clone())).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut tape = vec![0.0; self.chains[0].tape_len];
        self.forward_taped(x, &mut tape)
    }

    fn forward_taped(&self, x: &[f64], tape: &mut [f64]) -> Vec<f64> {
        tape[..x.len()].copy_from_slice(x);
        let mut out = vec![0.0; self.output_dim()];
        self.fwd(0, tape, &mut out);
        out
    }

    /// Forward pass of chain `ci`; its input must already sit at the start of `tape`.
    fn fwd(&self, ci: usize, tape: &mut [f64], out: &mut [f64]) {
        let p = &self.params;
        let layers = &self.chains[ci].layers;
        for (li, l) in layers.iter().enumerate() {
            let w = &p[l.offset..l.offset + l.rows * l.cols];
            let b = &p[l.offset + l.rows * l.cols..l.offset + l.rows * (l.cols + 1)];
            let Some(acts) = &l.acts else {
                for r in 0..l.rows {
                    let row = &w[r * l.cols..(r + 1) * l.cols];
                    out[r] =
                        b[r] + row.iter().zip(&tape[l.input_at..l.input_at + l.cols]).map(|(a, h)| a * h).sum::<f64>();
                }
                return;
            };
            for r in 0..l.rows {
                let row = &w[r * l.cols..(r + 1) * l.cols];
                tape[l.pre_at + r] =
                    b[r] + row.iter().zip(&tape[l.input_at..l.input_at + l.cols]).map(|(a, h)| a * h).sum::<f64>();
            }
            let next = layers[li + 1].input_at;
            let mut k = 0;
            for (u, a) in acts.iter().enumerate() {
                let z = tape[l.pre_at + u];
                tape[next + u] = match a {
                    Act::Id => z,
                    Act::Relu => z.max(0.0),
                    Act::Sub(s) => {
                        let at = l.sub_at[k];
                        k += 1;
                        let sub = &mut tape[at..at + self.chains[*s].tape_len];
                        sub[0] = z;
                        let mut v = [0.0];
                        self.fwd(*s, sub, &mut v);
                        v[0]
                    }
                };
            }
        }
    }

    /// Pull the gradient stored at `scratch[g_at..]` back through chain `ci`, adding parameter
    /// gradients into `grad`. Returns where the input gradient was written in `scratch`.
    fn bwd(&self, ci: usize, tape: &[f64], scratch: &mut Vec<f64>, g_at: usize, grad: &mut [f64]) -> usize {
        let p = &self.params;
        let layers = &self.chains[ci].layers;
        let mut cur = g_at;
        for l in layers.iter().rev() {
            if let Some(acts) = &l.acts {
                let mut k = l.sub_at.len();
                for u in (0..l.rows).rev() {
                    match acts[u] {
                        Act::Id => {}
                        Act::Relu => {
                            if tape[l.pre_at + u] <= 0.0 {
                                scratch[cur + u] = 0.0;
                            }
                        }
                        Act::Sub(s) => {
                            k -= 1;
                            let at = l.sub_at[k];
                            let base = scratch.len();
                            scratch.push(scratch[cur + u]);
                            let gi = self.bwd(s, &tape[at..at + self.chains[s].tape_len], scratch, base, grad);
                            scratch[cur + u] = scratch[gi];
                            scratch.truncate(base);
                        }
                    }
                }
            }
            let h = &tape[l.input_at..l.input_at + l.cols];
            let n = l.rows * l.cols;
            let gin = scratch.len();
            scratch.resize(gin + l.cols, 0.0);
            for r in 0..l.rows {
                let gr = scratch[cur + r];
                if gr == 0.0 {
                    continue;
                }
                let row = l.offset + r * l.cols;
                for c in 0..l.cols {
                    grad[row + c] += gr * h[c];
                    scratch[gin + c] += p[row + c] * gr;
                }
                grad[l.offset + n + r] += gr;
            }
            cur = gin;
        }
        cur
    }

    /// Mean softmax cross-entropy over the batch and its gradient.
    pub fn forward_backward(&self, batch: &[(&[f64], usize)]) -> Result<(f64, Vec<f64>), TrainError> {
        if batch.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let m = batch.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut tape = vec![0.0; self.chains[0].tape_len];
        let mut scratch = Vec::new();
        for (x, label) in batch {
            if x.len() != self.input_dim() || *label >= self.output_dim() {
                return Err(TrainError::DimMismatch { expected: self.input_dim(), found: x.len() });
            }
            let logits = self.forward_taped(x, &mut tape);
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|v| (v - top).exp()).sum();
            loss += (sum.ln() + top - logits[*label]) / m;
            scratch.clear();
            scratch.extend(
                logits
                    .iter()
                    .enumerate()
                    .map(|(i, v)| ((v - top).exp() / sum - if i == *label { 1.0 } else { 0.0 }) / m),
            );
            self.bwd(0, &tape, &mut scratch, 0, &mut grad);
        }
        if !loss.is_finite() {
            return Err(TrainError::NonFinite { epoch: None });
        }
        Ok((loss, grad))
    }

    /// Mean cross-entropy without gradients.
    pub fn loss(&self, batch: &[(&[f64], usize)]) -> f64 {
        let mut tape = vec![0.0; self.chains[0].tape_len];
        batch
            .iter()
            .map(|(x, label)| {
                let logits = self.forward_taped(x, &mut tape);
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = logits.iter().map(|v| (v - top).exp()).sum();
                sum.ln() + top - logits[*label]
            })
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Index of the largest output; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let out = self.forward(x);
        let mut best = 0;
        for (i, v) in out.iter().enumerate() {
            if *v > out[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub slot: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Compare the analytic gradient with central differences of step `h` on the given slots.
pub fn gradient_check(
    net: &TrainableNet,
    batch: &[(&[f64], usize)],
    slots: &[usize],
    h: f64,
) -> Result<Vec<GradCheck>, TrainError> {
    let (_, grad) = net.forward_backward(batch)?;
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(slots.len());
    for &slot in slots {
        let orig = probe.params[slot];
        probe.params[slot] = orig + h;
        let up = probe.loss(batch);
        probe.params[slot] = orig - h;
        let down = probe.loss(batch);
        probe.params[slot] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad[slot];
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        out.push(GradCheck { slot, analytic, numeric, rel_err: (analytic - numeric).abs() / scale });
    }
    Ok(out)
}
