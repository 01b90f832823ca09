//! Versioned JSON documents and file-backed storage nodes.
//!
//! Output is canonical: keys sorted, no insignificant whitespace, one
//! trailing newline. Field elements are decimal strings. Users, nodes, and
//! slots are numbered from 1 in every document.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::combinatorics::{KSubset, WindowSequence};
use crate::design::AccessStructure;
use crate::error::{Error, Result};
use crate::field::{Fe, Matrix, PrimeField};
use crate::protocol::{EncoderData, ProtocolDescriptor, ProtocolKind, StoringMatrix};

pub const DESCRIPTOR_FORMAT: &str = "dssp-descriptor/1";
pub const SECRETS_FORMAT: &str = "dssp-secrets/1";
pub const NODE_FORMAT: &str = "dssp-node/1";

/// Sorted keys, compact, newline-terminated.
pub fn to_canonical<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&tree)? + "\n")
}

fn check_format(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!("expected format {expected:?}, found {found:?}")));
    }
    Ok(())
}

fn elem_str(v: Fe) -> String {
    v.value().to_string()
}

fn parse_elem(field: PrimeField, text: &str) -> Result<Fe> {
    let v: u64 = text.parse().map_err(|_| Error::Format(format!("{text:?} is not a decimal integer")))?;
    if v >= field.modulus() {
        return Err(Error::Format(format!("{v} is not a canonical element of F_{}", field.modulus())));
    }
    Ok(field.elem(v))
}

fn parse_elems(field: PrimeField, texts: &[String]) -> Result<Vec<Fe>> {
    texts.iter().map(|t| parse_elem(field, t)).collect()
}

fn field_of(q: u64) -> Result<PrimeField> {
    PrimeField::new(q).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorDoc {
    format: String,
    kind: ProtocolKind,
    q: u64,
    n: usize,
    k: Option<usize>,
    access: Vec<Vec<usize>>,
    points: Vec<String>,
    /// Node holding slot 1, 2, ….
    storing: Vec<usize>,
    encoder: EncoderDoc,
    seed: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum EncoderDoc {
    Sdssp {
        /// First slot of each user's block.
        first_slots: Vec<usize>,
    },
    OptimalSo {
        gamma: String,
        matrix: Vec<Vec<String>>,
        sequence: Vec<usize>,
    },
    NearlyOptimal {
        weights: Vec<String>,
        sequence: Vec<usize>,
    },
}

pub fn descriptor_to_json(d: &ProtocolDescriptor) -> Result<String> {
    let encoder = match d.encoder() {
        EncoderData::Sdssp { offsets } => EncoderDoc::Sdssp { first_slots: offsets.iter().map(|o| o + 1).collect() },
        EncoderData::OptimalSo { gamma, encoding, sequence } => EncoderDoc::OptimalSo {
            gamma: elem_str(*gamma),
            matrix: (0..encoding.rows()).map(|r| encoding.row(r).map(elem_str).collect()).collect(),
            sequence: sequence.symbols.clone(),
        },
        EncoderData::NearlyOptimal { weights, sequence } => EncoderDoc::NearlyOptimal {
            weights: weights.iter().copied().map(elem_str).collect(),
            sequence: sequence.symbols.clone(),
        },
    };
    to_canonical(&DescriptorDoc {
        format: DESCRIPTOR_FORMAT.into(),
        kind: d.kind(),
        q: d.field().modulus(),
        n: d.n(),
        k: d.k(),
        access: d.access().sets().iter().map(|s| s.elements().to_vec()).collect(),
        points: d.points().iter().copied().map(elem_str).collect(),
        storing: d.storing().placements().to_vec(),
        encoder,
        seed: d.seed().map(|s| s.to_string()),
    })
}

pub fn descriptor_from_json(text: &str) -> Result<ProtocolDescriptor> {
    let doc: DescriptorDoc = serde_json::from_str(text)?;
    check_format(&doc.format, DESCRIPTOR_FORMAT)?;
    let field = field_of(doc.q)?;
    let sets = doc.access.into_iter().map(KSubset::new).collect::<Result<Vec<_>>>()?;
    let access = AccessStructure::new(sets)?;
    let points = parse_elems(field, &doc.points)?;
    let storing = StoringMatrix::new(doc.storing, doc.n)?;
    let window = doc.k.unwrap_or(0);
    let encoder = match (doc.encoder, doc.kind) {
        (EncoderDoc::Sdssp { first_slots }, ProtocolKind::Sdssp) => {
            if first_slots.contains(&0) {
                return Err(Error::Format("slots are numbered from 1".into()));
            }
            EncoderData::Sdssp { offsets: first_slots.into_iter().map(|s| s - 1).collect() }
        }
        (EncoderDoc::OptimalSo { gamma, matrix, sequence }, ProtocolKind::OptimalSo) => {
            let rows = matrix.iter().map(|r| parse_elems(field, r)).collect::<Result<Vec<_>>>()?;
            let raw: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|v| v.value()).collect()).collect();
            EncoderData::OptimalSo {
                gamma: parse_elem(field, &gamma)?,
                encoding: Matrix::from_rows(field, &raw)?,
                sequence: WindowSequence { symbols: sequence, window, cyclic: true },
            }
        }
        (EncoderDoc::NearlyOptimal { weights, sequence }, ProtocolKind::NearlyOptimal) => EncoderData::NearlyOptimal {
            weights: parse_elems(field, &weights)?,
            sequence: WindowSequence { symbols: sequence, window, cyclic: false },
        },
        (_, kind) => return Err(Error::Format(format!("encoder section does not match kind {kind}"))),
    };
    let seed = doc
        .seed
        .map(|s| s.parse::<u64>().map_err(|_| Error::Format(format!("bad seed {s:?}"))))
        .transpose()?;
    ProtocolDescriptor::from_parts(doc.kind, field, doc.n, doc.k, access, points, storing, encoder, seed)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretsDoc {
    format: String,
    q: u64,
    secrets: Vec<String>,
}

pub fn secrets_to_json(field: PrimeField, secrets: &[Fe]) -> Result<String> {
    to_canonical(&SecretsDoc {
        format: SECRETS_FORMAT.into(),
        q: field.modulus(),
        secrets: secrets.iter().copied().map(elem_str).collect(),
    })
}

pub fn secrets_from_json(text: &str) -> Result<(PrimeField, Vec<Fe>)> {
    let doc: SecretsDoc = serde_json::from_str(text)?;
    check_format(&doc.format, SECRETS_FORMAT)?;
    let field = field_of(doc.q)?;
    Ok((field, parse_elems(field, &doc.secrets)?))
}

/// The symbols one storage node holds. Slots are 0-based in memory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeShares {
    pub node: usize,
    pub field: PrimeField,
    pub shares: Vec<(usize, Fe)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    format: String,
    node: usize,
    q: u64,
    shares: Vec<ShareDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShareDoc {
    slot: usize,
    value: String,
}

impl NodeShares {
    pub fn to_json(&self) -> Result<String> {
        to_canonical(&NodeDoc {
            format: NODE_FORMAT.into(),
            node: self.node,
            q: self.field.modulus(),
            shares: self.shares.iter().map(|&(slot, v)| ShareDoc { slot: slot + 1, value: elem_str(v) }).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: NodeDoc = serde_json::from_str(text)?;
        check_format(&doc.format, NODE_FORMAT)?;
        let field = field_of(doc.q)?;
        let shares = doc
            .shares
            .iter()
            .map(|s| {
                let slot = s.slot.checked_sub(1).ok_or_else(|| Error::Format("slots are numbered from 1".into()))?;
                Ok((slot, parse_elem(field, &s.value)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NodeShares { node: doc.node, field, shares })
    }
}

/// Where node documents live.
pub trait NodeStore {
    fn write_node(&mut self, shares: &NodeShares) -> Result<()>;
    /// `None` when the node holds no document.
    fn read_node(&self, node: usize) -> Result<Option<NodeShares>>;
}

/// One `node_<i>.json` file per node under a directory.
#[derive(Clone, Debug)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DirStore { root: root.into() }
    }

    pub fn node_path(&self, node: usize) -> PathBuf {
        node_path(&self.root, node)
    }
}

pub fn node_path(root: &Path, node: usize) -> PathBuf {
    root.join(format!("node_{node}.json"))
}

impl NodeStore for DirStore {
    fn write_node(&mut self, shares: &NodeShares) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        fs::write(self.node_path(shares.node), shares.to_json()?)?;
        Ok(())
    }

    fn read_node(&self, node: usize) -> Result<Option<NodeShares>> {
        let path = self.node_path(node);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let doc = NodeShares::from_json(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if doc.node != node {
            return Err(Error::Format(format!("{} claims to be node {}", path.display(), doc.node)));
        }
        Ok(Some(doc))
    }
}

/// Wraps a store and logs every node read.
#[derive(Debug)]
pub struct RecordingStore<S> {
    inner: S,
    reads: RefCell<Vec<usize>>,
}

impl<S> RecordingStore<S> {
    pub fn new(inner: S) -> Self {
        RecordingStore { inner, reads: RefCell::new(Vec::new()) }
    }

    pub fn reads(&self) -> Vec<usize> {
        self.reads.borrow().clone()
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: NodeStore> NodeStore for RecordingStore<S> {
    fn write_node(&mut self, shares: &NodeShares) -> Result<()> {
        self.inner.write_node(shares)
    }

    fn read_node(&self, node: usize) -> Result<Option<NodeShares>> {
        self.reads.borrow_mut().push(node);
        self.inner.read_node(node)
    }
}

/// Writes every node's symbols, including empty nodes.
pub fn store_shares(d: &ProtocolDescriptor, y: &[Fe], store: &mut dyn NodeStore) -> Result<()> {
    for (node, shares) in d.node_shares(y)? {
        store.write_node(&NodeShares { node, field: d.field(), shares })?;
    }
    Ok(())
}

/// Decodes user `j` from the nodes of its access set and nothing else.
pub fn decode_from_store(d: &ProtocolDescriptor, j: usize, store: &dyn NodeStore) -> Result<Fe> {
    let set = d.access().get(j).ok_or_else(|| {
        Error::InvalidParameter(format!("user {} out of range 1..={}", j + 1, d.m()))
    })?;
    let mut reads = Vec::new();
    for &node in set.elements() {
        let Some(doc) = store.read_node(node)? else { continue };
        if doc.field != d.field() {
            return Err(Error::Format(format!("node {node} holds elements of F_{}", doc.field.modulus())));
        }
        reads.extend(doc.shares.into_iter().filter(|&(slot, _)| d.storing().node_of(slot) == Some(node)));
    }
    d.decode(j, &reads)
}
