use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::ir::{Activation, AffineMap, Chain, NestNet, NetId};
use crate::numerics::{Backend, Scalar, Q};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Rational,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    /// `[numerator, denominator]`
    Rational([String; 2]),
    Decimal(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActEntry {
    Named(String),
    Sub { subnet: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<Number>,
    pub bias: Vec<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDoc {
    pub id: u64,
    pub layers: Vec<LayerDoc>,
    pub activations: Vec<Vec<ActEntry>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetDocument {
    pub format: u32,
    pub encoding: Encoding,
    pub root: u64,
    pub nets: Vec<ChainDoc>,
}

fn encode(s: &Scalar) -> Number {
    match s {
        Scalar::Exact(q) => Number::Rational([q.numer().to_string(), q.denom().to_string()]),
        Scalar::Float(v) => Number::Decimal(format!("{v:?}")),
    }
}

fn decode(n: &Number, enc: Encoding) -> Result<Scalar, CliError> {
    match (n, enc) {
        (Number::Rational([p, q]), Encoding::Rational) => {
            let p: BigInt = p.parse().map_err(|_| CliError::Document(format!("bad integer {p:?}")))?;
            let q: BigInt = q.parse().map_err(|_| CliError::Document(format!("bad integer {q:?}")))?;
            if q == BigInt::from(0) {
                return Err(CliError::Document("zero denominator".into()));
            }
            Ok(Scalar::Exact(Q::new(p, q)))
        }
        (Number::Decimal(t), Encoding::F64) => {
            t.parse::<f64>().map(Scalar::Float).map_err(|_| CliError::Document(format!("bad decimal {t:?}")))
        }
        _ => Err(CliError::Document("number does not match the document encoding".into())),
    }
}

fn chain_doc(id: NetId, c: &Chain) -> ChainDoc {
    ChainDoc {
        id: id.raw(),
        layers: c
            .layers()
            .iter()
            .map(|l| LayerDoc {
                rows: l.rows(),
                cols: l.cols(),
                weights: l.weights().iter().map(encode).collect(),
                bias: l.bias().iter().map(encode).collect(),
            })
            .collect(),
        activations: c
            .activations()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|a| match a {
                        Activation::Identity => ActEntry::Named("id".into()),
                        Activation::ReLU => ActEntry::Named("relu".into()),
                        Activation::SubNet(s) => ActEntry::Sub { subnet: s.raw() },
                    })
                    .collect()
            })
            .collect(),
    }
}

pub fn to_document(net: &NestNet) -> Result<NetDocument, CliError> {
    let encoding = match net.backend() {
        Some(Backend::Exact) => Encoding::Rational,
        Some(Backend::Float) => Encoding::F64,
        None => return Err(CliError::Document("network mixes exact and float weights".into())),
    };
    let mut nets = vec![chain_doc(net.id(), net.root_chain())];
    nets.extend(net.registry().iter().map(|(id, c)| chain_doc(*id, c)));
    Ok(NetDocument { format: FORMAT_VERSION, encoding, root: net.id().raw(), nets })
}

/// Rebuild a network. Registry ids are renamed to fresh ones.
pub fn from_document(doc: &NetDocument) -> Result<NestNet, CliError> {
    if doc.format != FORMAT_VERSION {
        return Err(CliError::Document(format!("unsupported format version {}", doc.format)));
    }
    let mut ids: HashMap<u64, NetId> = HashMap::new();
    for c in &doc.nets {
        if ids.insert(c.id, NetId::fresh()).is_some() {
            return Err(CliError::Document(format!("duplicate net id {}", c.id)));
        }
    }
    let mut root = None;
    let mut registry = BTreeMap::new();
    for c in &doc.nets {
        let mut layers = Vec::with_capacity(c.layers.len());
        for l in &c.layers {
            let conv = |v: &[Number]| v.iter().map(|n| decode(n, doc.encoding)).collect::<Result<Vec<_>, _>>();
            layers.push(AffineMap::new(l.rows, l.cols, conv(&l.weights)?, conv(&l.bias)?)?);
        }
        let mut acts = Vec::with_capacity(c.activations.len());
        for row in &c.activations {
            let mut out = Vec::with_capacity(row.len());
            for a in row {
                out.push(match a {
                    ActEntry::Named(t) if t == "id" => Activation::Identity,
                    ActEntry::Named(t) if t == "relu" => Activation::ReLU,
                    ActEntry::Named(t) => return Err(CliError::Document(format!("unknown activation {t:?}"))),
                    ActEntry::Sub { subnet } => Activation::SubNet(
                        *ids.get(subnet).ok_or_else(|| CliError::Document(format!("dangling subnet id {subnet}")))?,
                    ),
                });
            }
            acts.push(out);
        }
        let chain = Chain::new(layers, acts);
        if c.id == doc.root {
            root = Some(chain);
        } else {
            registry.insert(ids[&c.id], chain);
        }
    }
    let root = root.ok_or_else(|| CliError::Document(format!("root id {} not present", doc.root)))?;
    let net = NestNet::from_raw_parts(root, registry);
    if let Some(v) = net.validate().into_iter().next() {
        return Err(CliError::Document(v.to_string()));
    }
    Ok(net)
}

pub fn serialize_net(net: &NestNet) -> Result<Vec<u8>, CliError> {
    serde_json::to_vec_pretty(&to_document(net)?).map_err(|e| CliError::Document(e.to_string()))
}

pub fn deserialize_net(bytes: &[u8]) -> Result<NestNet, CliError> {
    let doc: NetDocument = serde_json::from_slice(bytes).map_err(|e| CliError::Document(e.to_string()))?;
    from_document(&doc)
}
