//! Protocol descriptors: who reads which nodes, how secrets become stored
//! symbols, where each symbol lives, and how a user recovers its secret.
//!
//! Every protocol here decodes the same way. User `j` reads the slots named
//! by its decoder plan and interpolates them at the plan's evaluation points;
//! the secret is the constant term.

mod nearly;
mod optimal;
mod sdssp;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use nearly::{build_nearly, build_nearly_with_budget, minimal_subset_size};
pub use optimal::{build_optimal, build_optimal_with_budget, check_condition, system_matrix};
pub use sdssp::build_sdssp;

use crate::combinatorics::WindowSequence;
use crate::design::AccessStructure;
use crate::error::{Error, Result};
use crate::field::{Fe, Matrix, OpCount, PrimeField};
use crate::shamir::{shamir_decode, shamir_encode_counted, ShamirParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Independent `(t_j, t_j)` Shamir sharing per user.
    Sdssp,
    /// `m = C(n,k)` users, one stored symbol per secret, `y = E·s`.
    OptimalSo,
    /// Any `m`, `m + k - 1` stored symbols, iterative encoder.
    NearlyOptimal,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Sdssp => "sdssp",
            ProtocolKind::OptimalSo => "optimal_so",
            ProtocolKind::NearlyOptimal => "nearly_optimal",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdssp" => Ok(ProtocolKind::Sdssp),
            "optimal_so" | "optimal" => Ok(ProtocolKind::OptimalSo),
            "nearly_optimal" | "nearly" => Ok(ProtocolKind::NearlyOptimal),
            other => Err(Error::InvalidParameter(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Sparse storing matrix: slot `r` is held by node `placements[r]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoringMatrix {
    placements: Vec<usize>,
}

impl StoringMatrix {
    pub fn new(placements: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = placements.iter().find(|&&node| node == 0 || node > n) {
            return Err(Error::InvalidParameter(format!("slot placed on node {bad}, outside 1..={n}")));
        }
        Ok(StoringMatrix { placements })
    }

    pub fn placements(&self) -> &[usize] {
        &self.placements
    }

    /// Number of stored symbols.
    pub fn h(&self) -> usize {
        self.placements.len()
    }

    pub fn node_of(&self, slot: usize) -> Option<usize> {
        self.placements.get(slot).copied()
    }

    /// Slots held by `node`, ascending.
    pub fn slots_on(&self, node: usize) -> Vec<usize> {
        (0..self.placements.len()).filter(|&r| self.placements[r] == node).collect()
    }

    /// Dense 0/1 form, `n` rows by `h` columns.
    pub fn to_dense(&self, n: usize) -> Vec<Vec<u8>> {
        let mut z = vec![vec![0u8; self.h()]; n];
        for (r, &node) in self.placements.iter().enumerate() {
            z[node - 1][r] = 1;
        }
        z
    }
}

/// Kind-specific encoder state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EncoderData {
    /// First slot of each user's share block.
    Sdssp { offsets: Vec<usize> },
    /// Encoding matrix `E` and the cyclic sequence placing `y_r`.
    OptimalSo { gamma: Fe, encoding: Matrix, sequence: WindowSequence },
    /// Each new symbol is `s_j + Σ weights_i (y_{j+i} - s_j)`.
    NearlyOptimal { weights: Vec<Fe>, sequence: WindowSequence },
}

/// Everything needed to encode, store, and decode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolDescriptor {
    kind: ProtocolKind,
    field: PrimeField,
    n: usize,
    k: Option<usize>,
    access: AccessStructure,
    points: Vec<Fe>,
    storing: StoringMatrix,
    encoder: EncoderData,
    seed: Option<u64>,
}

impl ProtocolDescriptor {
    /// Assembles a descriptor and checks that its parts fit together.
    ///
    /// Only shapes are checked; a mis-stored slot passes here and is caught
    /// by the correctness audit.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: ProtocolKind,
        field: PrimeField,
        n: usize,
        k: Option<usize>,
        access: AccessStructure,
        points: Vec<Fe>,
        storing: StoringMatrix,
        encoder: EncoderData,
        seed: Option<u64>,
    ) -> Result<Self> {
        let m = access.len();
        let bad = |msg: String| Err(Error::Format(msg));
        if m == 0 {
            return bad("no users".into());
        }
        if access.max_node() > n {
            return bad(format!("access set uses node {} but n={n}", access.max_node()));
        }
        if storing.placements().iter().any(|&node| node == 0 || node > n) {
            return bad("storing matrix names a node outside 1..=n".into());
        }
        if points.iter().any(|p| p.field() != field) {
            return bad("evaluation point from another field".into());
        }
        let h = storing.h();
        let widest = match (&encoder, kind) {
            (EncoderData::Sdssp { offsets }, ProtocolKind::Sdssp) => {
                let mut next = 0;
                for (j, &off) in offsets.iter().enumerate() {
                    if off != next {
                        return bad(format!("share block of user {} starts at slot {off}", j + 1));
                    }
                    next += access.sets().get(j).map_or(0, |s| s.len());
                }
                if offsets.len() != m || next != h {
                    return bad(format!("share blocks cover {next} slots, storing has {h}"));
                }
                access.sets().iter().map(|s| s.len()).max().unwrap_or(0)
            }
            (EncoderData::OptimalSo { gamma, encoding, sequence }, ProtocolKind::OptimalSo) => {
                let k = k.unwrap_or(0);
                if encoding.field() != field || gamma.field() != field {
                    return bad("encoding data from another field".into());
                }
                if encoding.rows() != m || encoding.cols() != m || h != m {
                    return bad(format!("encoding matrix must be {m}x{m} with {m} slots"));
                }
                if !sequence.cyclic || sequence.len() != m || sequence.window != k {
                    return bad("optimal protocol needs a cyclic sequence of length m".into());
                }
                k
            }
            (EncoderData::NearlyOptimal { weights, sequence }, ProtocolKind::NearlyOptimal) => {
                let k = k.unwrap_or(0);
                if k == 0 || weights.len() + 1 != k || weights.iter().any(|w| w.field() != field) {
                    return bad(format!("iterative encoder needs {} weights", k.saturating_sub(1)));
                }
                if sequence.cyclic || sequence.len() != m + k - 1 || h != m + k - 1 || sequence.window != k {
                    return bad("nearly-optimal protocol needs an acyclic sequence of length m+k-1".into());
                }
                k
            }
            _ => return bad(format!("encoder data does not match protocol kind {kind}")),
        };
        if points.len() < widest {
            return bad(format!("need {widest} evaluation points, got {}", points.len()));
        }
        Ok(ProtocolDescriptor { kind, field, n, k, access, points, storing, encoder, seed })
    }

    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.access.len()
    }

    /// Common access-set size, when all sets have the same size.
    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn access(&self) -> &AccessStructure {
        &self.access
    }

    pub fn points(&self) -> &[Fe] {
        &self.points
    }

    pub fn storing(&self) -> &StoringMatrix {
        &self.storing
    }

    pub fn encoder(&self) -> &EncoderData {
        &self.encoder
    }

    /// Number of stored symbols.
    pub fn h(&self) -> usize {
        self.storing.h()
    }

    /// Seed recorded at build time, if any.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Replaces the storing matrix, keeping everything else.
    pub fn with_storing(self, storing: StoringMatrix) -> Result<Self> {
        let ProtocolDescriptor { kind, field, n, k, access, points, encoder, seed, .. } = self;
        Self::from_parts(kind, field, n, k, access, points, storing, encoder, seed)
    }

    fn check_user(&self, j: usize) -> Result<()> {
        if j >= self.m() {
            return Err(Error::InvalidParameter(format!("user {} out of range 1..={}", j + 1, self.m())));
        }
        Ok(())
    }

    /// The `(slot, point)` pairs user `j` interpolates.
    pub fn decoder_plan(&self, j: usize) -> Result<Vec<(usize, Fe)>> {
        self.check_user(j)?;
        let m = self.m();
        Ok(match &self.encoder {
            EncoderData::Sdssp { offsets } => {
                let t = self.access.sets()[j].len();
                (0..t).map(|i| (offsets[j] + i, self.points[i])).collect()
            }
            EncoderData::OptimalSo { sequence, .. } => {
                (0..sequence.window).map(|r| ((j + r) % m, self.points[r])).collect()
            }
            EncoderData::NearlyOptimal { sequence, .. } => {
                (0..sequence.window).map(|r| (j + r, self.points[r])).collect()
            }
        })
    }

    /// Every slot stored on a node of user `j`'s access set, ascending.
    pub fn readable_slots(&self, j: usize) -> Result<Vec<usize>> {
        self.check_user(j)?;
        let set = &self.access.sets()[j];
        Ok((0..self.h()).filter(|&r| set.contains(self.storing.placements()[r])).collect())
    }

    /// Field elements of randomness consumed per encoding.
    pub fn randomness_len(&self) -> usize {
        match &self.encoder {
            EncoderData::Sdssp { .. } => self.access.sets().iter().map(|s| s.len() - 1).sum(),
            EncoderData::OptimalSo { .. } => 0,
            EncoderData::NearlyOptimal { weights, .. } => weights.len(),
        }
    }

    /// Draws the randomness for one encoding from a seeded ChaCha stream.
    ///
    /// Shamir users each get their own stream, so user `j`'s shares do not
    /// depend on how many symbols other users consume.
    pub fn draw_randomness(&self, seed: u64) -> Vec<Fe> {
        let q = self.field.modulus();
        let mut out = Vec::with_capacity(self.randomness_len());
        match &self.encoder {
            EncoderData::Sdssp { .. } => {
                for (j, set) in self.access.sets().iter().enumerate() {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    out.extend((1..set.len()).map(|_| self.field.elem(rng.gen_range(0..q))));
                }
            }
            EncoderData::OptimalSo { .. } => {}
            EncoderData::NearlyOptimal { weights, .. } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                out.extend(weights.iter().map(|_| self.field.elem(rng.gen_range(0..q))));
            }
        }
        out
    }

    /// Encodes with randomness drawn from `seed`.
    pub fn encode(&self, secrets: &[Fe], seed: u64) -> Result<Vec<Fe>> {
        self.encode_with(secrets, &self.draw_randomness(seed))
    }

    /// Encodes with explicit randomness of length [`Self::randomness_len`].
    pub fn encode_with(&self, secrets: &[Fe], randomness: &[Fe]) -> Result<Vec<Fe>> {
        self.encode_counted(secrets, randomness, &mut OpCount::default())
    }

    /// [`Self::encode_with`], tallying field operations into `ops`.
    pub fn encode_counted(&self, secrets: &[Fe], randomness: &[Fe], ops: &mut OpCount) -> Result<Vec<Fe>> {
        let m = self.m();
        if secrets.len() != m {
            return Err(Error::LengthMismatch { what: "secrets", expected: m, got: secrets.len() });
        }
        if randomness.len() != self.randomness_len() {
            return Err(Error::LengthMismatch {
                what: "randomness",
                expected: self.randomness_len(),
                got: randomness.len(),
            });
        }
        if let Some(bad) = secrets.iter().chain(randomness).find(|v| v.field() != self.field) {
            return Err(Error::FieldMismatch { left: self.field.modulus(), right: bad.field().modulus() });
        }
        match &self.encoder {
            EncoderData::Sdssp { .. } => {
                let mut y = Vec::with_capacity(self.h());
                let mut used = 0;
                for (set, &s) in self.access.sets().iter().zip(secrets) {
                    let t = set.len();
                    let params = ShamirParams::new(self.field, t, self.points[..t].to_vec())?;
                    y.extend(shamir_encode_counted(s, &params, &randomness[used..used + t - 1], ops)?);
                    used += t - 1;
                }
                Ok(y)
            }
            EncoderData::OptimalSo { encoding, .. } => Ok(optimal::encode(encoding, secrets, ops)),
            EncoderData::NearlyOptimal { weights, .. } => {
                Ok(nearly::encode(&self.points, weights, secrets, randomness, ops))
            }
        }
    }

    /// Recovers `s_j` from `(slot, value)` reads.
    pub fn decode(&self, j: usize, reads: &[(usize, Fe)]) -> Result<Fe> {
        let plan = self.decoder_plan(j)?;
        let lookup: HashMap<usize, Fe> = reads.iter().rev().copied().collect();
        let shares = plan
            .iter()
            .map(|&(slot, point)| {
                lookup.get(&slot).map(|&v| (point, v)).ok_or(Error::MissingSlot { user: j, slot })
            })
            .collect::<Result<Vec<_>>>()?;
        shamir_decode(&shares, shares.len())
    }

    /// What user `j` sees of `y`: every slot on its nodes.
    pub fn user_view(&self, j: usize, y: &[Fe]) -> Result<Vec<(usize, Fe)>> {
        if y.len() != self.h() {
            return Err(Error::LengthMismatch { what: "shares", expected: self.h(), got: y.len() });
        }
        Ok(self.readable_slots(j)?.into_iter().map(|r| (r, y[r])).collect())
    }

    /// `y` split by node: every node `1..=n` maps to its `(slot, value)`
    /// pairs, possibly none.
    pub fn node_shares(&self, y: &[Fe]) -> Result<BTreeMap<usize, Vec<(usize, Fe)>>> {
        if y.len() != self.h() {
            return Err(Error::LengthMismatch { what: "shares", expected: self.h(), got: y.len() });
        }
        let mut out: BTreeMap<usize, Vec<(usize, Fe)>> = (1..=self.n).map(|i| (i, Vec::new())).collect();
        for (r, &node) in self.storing.placements().iter().enumerate() {
            out.entry(node).or_default().push((r, y[r]));
        }
        Ok(out)
    }

    /// The linear map `y = E·s` for deterministic linear encoders.
    pub fn linear_map(&self) -> Option<&Matrix> {
        match &self.encoder {
            EncoderData::OptimalSo { encoding, .. } => Some(encoding),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::KSubset;

    fn triangle(q: u64) -> ProtocolDescriptor {
        let sets = vec![
            KSubset::new(vec![1, 2]).unwrap(),
            KSubset::new(vec![2, 3]).unwrap(),
            KSubset::new(vec![1, 3]).unwrap(),
        ];
        build_sdssp(3, sets, q).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [ProtocolKind::Sdssp, ProtocolKind::OptimalSo, ProtocolKind::NearlyOptimal] {
            assert_eq!(kind.name().parse::<ProtocolKind>().unwrap(), kind);
        }
        assert_eq!("optimal".parse::<ProtocolKind>().unwrap(), ProtocolKind::OptimalSo);
        assert!("fast".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn storing_matrix_dense_form() {
        let z = StoringMatrix::new(vec![2, 1, 2], 3).unwrap();
        assert_eq!(z.to_dense(3), vec![vec![0, 1, 0], vec![1, 0, 1], vec![0, 0, 0]]);
        assert_eq!(z.slots_on(2), vec![0, 2]);
        assert!(StoringMatrix::new(vec![4], 3).is_err());
    }

    #[test]
    fn randomness_is_reproducible_and_per_user() {
        let d = triangle(5);
        assert_eq!(d.randomness_len(), 3);
        assert_eq!(d.draw_randomness(7), d.draw_randomness(7));
        let f = d.field();
        let s = [f.elem(1), f.elem(2), f.elem(3)];
        assert_eq!(d.encode(&s, 42).unwrap(), d.encode(&s, 42).unwrap());
    }

    #[test]
    fn decode_reports_missing_slot() {
        let d = triangle(5);
        let f = d.field();
        let y = d.encode(&[f.elem(1), f.elem(2), f.elem(3)], 1).unwrap();
        let mut reads = d.user_view(1, &y).unwrap();
        assert_eq!(d.decode(1, &reads).unwrap(), f.elem(2));
        reads.retain(|&(slot, _)| slot != 3);
        assert_eq!(d.decode(1, &reads), Err(Error::MissingSlot { user: 1, slot: 3 }));
    }

    #[test]
    fn length_checks() {
        let d = triangle(5);
        let f = d.field();
        assert_eq!(
            d.encode_with(&[f.elem(1)], &[]),
            Err(Error::LengthMismatch { what: "secrets", expected: 3, got: 1 })
        );
        assert_eq!(
            d.encode_with(&[f.elem(1); 3], &[]),
            Err(Error::LengthMismatch { what: "randomness", expected: 3, got: 0 })
        );
    }

    #[test]
    fn moved_slot_passes_shape_checks() {
        let d = triangle(5);
        let mut placements = d.storing().placements().to_vec();
        placements[0] = 3;
        let moved = d.clone().with_storing(StoringMatrix::new(placements, 3).unwrap()).unwrap();
        assert_ne!(moved, d);
    }
}
