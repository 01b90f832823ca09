//! Machine checks of a protocol's contracts: every user decodes its own
//! secret, and what a user can read says nothing about anyone else's.
//!
//! Secrecy is decided exactly. Exhaustive enumeration counts, for every
//! possible view of user `j`, how often each value of `s_l` occurs; secrecy
//! holds iff those counts are equal. For a linear encoder `y = E·s` the rank
//! test is equivalent: `s_l` is hidden iff `e_l` is outside the row space of
//! the rows of `E` that user `j` reads.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::design::{check_sperner, max_users, solve_design, Rational};
use crate::error::{Error, Result};
use crate::field::{Fe, Matrix, PrimeField};
use crate::protocol::{ProtocolDescriptor, ProtocolKind};

/// Default cap on enumerated input states.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 1_000_000;

/// The surface the auditor needs from a protocol.
pub trait Dssp: Sync {
    fn name(&self) -> String;
    fn field(&self) -> PrimeField;
    fn users(&self) -> usize;
    /// Number of stored symbols.
    fn slots(&self) -> usize;
    fn randomness_len(&self) -> usize;
    fn encode_with(&self, secrets: &[Fe], randomness: &[Fe]) -> Result<Vec<Fe>>;
    /// Slots stored on the nodes user `j` may read.
    fn readable_slots(&self, j: usize) -> Result<Vec<usize>>;
    fn decode(&self, j: usize, reads: &[(usize, Fe)]) -> Result<Fe>;
    /// `E` with `y = E·s`, for deterministic linear encoders.
    fn linear_map(&self) -> Option<Matrix> {
        None
    }
}

impl Dssp for ProtocolDescriptor {
    fn name(&self) -> String {
        self.kind().name().to_string()
    }

    fn field(&self) -> PrimeField {
        ProtocolDescriptor::field(self)
    }

    fn users(&self) -> usize {
        self.m()
    }

    fn slots(&self) -> usize {
        self.h()
    }

    fn randomness_len(&self) -> usize {
        ProtocolDescriptor::randomness_len(self)
    }

    fn encode_with(&self, secrets: &[Fe], randomness: &[Fe]) -> Result<Vec<Fe>> {
        ProtocolDescriptor::encode_with(self, secrets, randomness)
    }

    fn readable_slots(&self, j: usize) -> Result<Vec<usize>> {
        ProtocolDescriptor::readable_slots(self, j)
    }

    fn decode(&self, j: usize, reads: &[(usize, Fe)]) -> Result<Fe> {
        ProtocolDescriptor::decode(self, j, reads)
    }

    fn linear_map(&self) -> Option<Matrix> {
        ProtocolDescriptor::linear_map(self).cloned()
    }
}

/// `q^len`, or `None` past `u64`.
fn state_count(q: u64, len: usize) -> Option<u64> {
    u32::try_from(len).ok().and_then(|e| q.checked_pow(e))
}

/// Calls `step(code, input)` for every `code` in `range`, where `input` is
/// `code` written in base `q` with `len` little-endian digits.
fn walk_inputs(
    field: PrimeField,
    len: usize,
    range: std::ops::Range<u64>,
    mut step: impl FnMut(u64, &[Fe]) -> Result<()>,
) -> Result<()> {
    let q = field.modulus();
    let mut digits = vec![0u64; len];
    let mut rest = range.start;
    for d in digits.iter_mut() {
        *d = rest % q;
        rest /= q;
    }
    let mut input: Vec<Fe> = digits.iter().map(|&d| field.elem(d)).collect();
    for code in range {
        step(code, &input)?;
        for (d, slot) in digits.iter_mut().zip(input.iter_mut()) {
            *d += 1;
            if *d < q {
                *slot = field.elem(*d);
                break;
            }
            *d = 0;
            *slot = field.zero();
        }
    }
    Ok(())
}

/// Splits `0..total` across threads, runs `work` on each chunk, and folds
/// the partial results in chunk order.
fn partitioned<T: Send>(
    total: u64,
    work: impl Fn(std::ops::Range<u64>) -> Result<T> + Sync,
    mut merge: impl FnMut(T, T) -> T,
) -> Result<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8) as u64;
    let chunks = if total < 4096 { 1 } else { threads.max(1) };
    let size = total.div_ceil(chunks).max(1);
    let ranges: Vec<_> = (0..chunks).map(|c| (c * size).min(total)..((c + 1) * size).min(total)).collect();
    let parts: Vec<Result<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ranges.into_iter().map(|r| scope.spawn(|| work(r))).collect();
        handles.into_iter().map(|h| h.join().expect("audit worker panicked")).collect()
    });
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("at least one chunk")?;
    for p in iter {
        acc = merge(acc, p?);
    }
    Ok(acc)
}

mod decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|t| t.parse().map_err(|_| D::Error::custom(format!("bad decimal {t:?}"))))
            .collect()
    }
}

/// Serializes 0-based indices as 1-based numbers.
mod one_based {
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub trait Shift: Sized {
        fn up(&self) -> Self;
        fn down(self) -> Option<Self>;
    }

    impl Shift for usize {
        fn up(&self) -> Self {
            self + 1
        }
        fn down(self) -> Option<Self> {
            self.checked_sub(1)
        }
    }

    impl Shift for Vec<usize> {
        fn up(&self) -> Self {
            self.iter().map(Shift::up).collect()
        }
        fn down(self) -> Option<Self> {
            self.into_iter().map(Shift::down).collect()
        }
    }

    impl Shift for Option<(usize, usize)> {
        fn up(&self) -> Self {
            self.map(|(a, b)| (a + 1, b + 1))
        }
        fn down(self) -> Option<Self> {
            match self {
                None => Some(None),
                Some((a, b)) => Some(Some((a.down()?, b.down()?))),
            }
        }
    }

    pub fn serialize<T: Shift + Serialize, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        v.up().serialize(s)
    }

    pub fn deserialize<'de, T: Shift + Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        T::deserialize(d)?.down().ok_or_else(|| D::Error::custom("indices are numbered from 1"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    Exhaustive,
    Random,
    Rank,
    Skipped,
}

/// Inputs on which some user failed to decode its secret.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeFailure {
    #[serde(with = "one_based")]
    pub user: usize,
    #[serde(with = "decimal")]
    pub secrets: Vec<u64>,
    #[serde(with = "decimal")]
    pub randomness: Vec<u64>,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessVerdict {
    pub pass: bool,
    pub method: CheckMethod,
    pub inputs_checked: u64,
    pub witness: Option<DecodeFailure>,
}

fn values(v: &[Fe]) -> Vec<u64> {
    v.iter().map(|x| x.value()).collect()
}

fn check_one(d: &dyn Dssp, views: &[Vec<usize>], input: &[Fe]) -> Result<Option<DecodeFailure>> {
    let m = d.users();
    let (secrets, randomness) = input.split_at(m);
    let y = d.encode_with(secrets, randomness)?;
    for (j, slots) in views.iter().enumerate() {
        let reads: Vec<(usize, Fe)> = slots.iter().map(|&r| (r, y[r])).collect();
        let outcome = match d.decode(j, &reads) {
            Ok(v) if v == secrets[j] => continue,
            Ok(v) => format!("decoded {} instead of {}", v.value(), secrets[j].value()),
            Err(e) => e.to_string(),
        };
        return Ok(Some(DecodeFailure {
            user: j,
            secrets: values(secrets),
            randomness: values(randomness),
            outcome,
        }));
    }
    Ok(None)
}

fn views(d: &dyn Dssp) -> Result<Vec<Vec<usize>>> {
    (0..d.users()).map(|j| d.readable_slots(j)).collect()
}

/// Every user decodes its own secret from the slots on its nodes.
///
/// All inputs are enumerated when there are at most `budget` of them;
/// otherwise `trials` random inputs are drawn from `seed`.
pub fn audit_correctness(d: &dyn Dssp, trials: u64, budget: u64, seed: u64) -> Result<CorrectnessVerdict> {
    let views = views(d)?;
    let len = d.users() + d.randomness_len();
    let field = d.field();
    match state_count(field.modulus(), len).filter(|&t| t <= budget) {
        Some(total) => {
            let first = partitioned(
                total,
                |range| {
                    let mut found: Option<DecodeFailure> = None;
                    walk_inputs(field, len, range, |_, input| {
                        if found.is_none() {
                            found = check_one(d, &views, input)?;
                        }
                        Ok(())
                    })?;
                    Ok(found)
                },
                |a, b| a.or(b),
            )?;
            Ok(CorrectnessVerdict {
                pass: first.is_none(),
                method: CheckMethod::Exhaustive,
                inputs_checked: total,
                witness: first,
            })
        }
        None => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let q = field.modulus();
            for done in 0..trials {
                let input: Vec<Fe> = (0..len).map(|_| field.elem(rng.gen_range(0..q))).collect();
                if let Some(w) = check_one(d, &views, &input)? {
                    return Ok(CorrectnessVerdict {
                        pass: false,
                        method: CheckMethod::Random,
                        inputs_checked: done + 1,
                        witness: Some(w),
                    });
                }
            }
            Ok(CorrectnessVerdict { pass: true, method: CheckMethod::Random, inputs_checked: trials, witness: None })
        }
    }
}

/// Why a pair failed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeakWitness {
    /// Given this view, `s_l` takes value `v` in `counts[v]` inputs.
    Counts {
        #[serde(with = "one_based")]
        slots: Vec<usize>,
        #[serde(with = "decimal")]
        view: Vec<u64>,
        counts: Vec<u64>,
    },
    /// Appending `e_l` to the view's rows did not raise the rank.
    Rank { view_rank: usize, extended_rank: usize },
}

/// Whether user `user`'s view hides `s_other`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    #[serde(with = "one_based")]
    pub user: usize,
    #[serde(with = "one_based")]
    pub other: usize,
    pub pass: bool,
    pub witness: Option<LeakWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecrecyReport {
    pub method: CheckMethod,
    pub pairs: Vec<PairVerdict>,
    /// Rank method only: user `j` can solve for `s_j` linearly.
    pub decodable: Option<Vec<bool>>,
    pub states: Option<u64>,
    pub note: Option<String>,
}

impl SecrecyReport {
    pub fn pass(&self) -> bool {
        self.pairs.iter().all(|p| p.pass) && self.decodable.as_ref().is_none_or(|d| d.iter().all(|&x| x))
    }
}

/// Exact conditional uniformity of every `s_l` given every other user's
/// view, over all `q^(m + randomness)` inputs.
pub fn audit_secrecy_exhaustive(d: &dyn Dssp, budget: u64) -> Result<SecrecyReport> {
    let m = d.users();
    let field = d.field();
    let q = field.modulus() as usize;
    let len = m + d.randomness_len();
    let total = state_count(field.modulus(), len).filter(|&t| t <= budget).ok_or(Error::BudgetExhausted { budget })?;
    let views = views(d)?;

    // tables[j][view][l * q + v] = inputs with that view of user j and s_l = v
    type Tables = Vec<HashMap<Vec<u64>, Vec<u64>>>;
    let tables: Tables = partitioned(
        total,
        |range| {
            let mut tables: Tables = vec![HashMap::new(); m];
            walk_inputs(field, len, range, |_, input| {
                let (secrets, randomness) = input.split_at(m);
                let y = d.encode_with(secrets, randomness)?;
                for (j, slots) in views.iter().enumerate() {
                    let key: Vec<u64> = slots.iter().map(|&r| y[r].value()).collect();
                    let row = tables[j].entry(key).or_insert_with(|| vec![0; m * q]);
                    for (l, s) in secrets.iter().enumerate() {
                        row[l * q + s.value() as usize] += 1;
                    }
                }
                Ok(())
            })?;
            Ok(tables)
        },
        |mut a, b| {
            for (ta, tb) in a.iter_mut().zip(b) {
                for (key, counts) in tb {
                    let row = ta.entry(key).or_insert_with(|| vec![0; m * q]);
                    row.iter_mut().zip(counts).for_each(|(x, y)| *x += y);
                }
            }
            a
        },
    )?;

    let mut pairs = Vec::with_capacity(m * m.saturating_sub(1));
    for (j, table) in tables.iter().enumerate() {
        let mut keys: Vec<&Vec<u64>> = table.keys().collect();
        keys.sort();
        for l in (0..m).filter(|&l| l != j) {
            let leak = keys.iter().find_map(|key| {
                let counts = &table[*key][l * q..(l + 1) * q];
                counts.iter().any(|&c| c != counts[0]).then(|| LeakWitness::Counts {
                    slots: views[j].clone(),
                    view: (*key).clone(),
                    counts: counts.to_vec(),
                })
            });
            pairs.push(PairVerdict { user: j, other: l, pass: leak.is_none(), witness: leak });
        }
    }
    Ok(SecrecyReport { method: CheckMethod::Exhaustive, pairs, decodable: None, states: Some(total), note: None })
}

/// Rank certificate for linear deterministic encoders.
pub fn audit_secrecy_rank(d: &dyn Dssp) -> Result<SecrecyReport> {
    let e = d.linear_map().ok_or_else(|| Error::WrongKind { expected: "linear deterministic", got: d.name() })?;
    let m = d.users();
    let mut pairs = Vec::with_capacity(m * m.saturating_sub(1));
    let mut decodable = Vec::with_capacity(m);
    for j in 0..m {
        let view = e.select_rows(&d.readable_slots(j)?);
        let base = view.rank();
        for l in 0..m {
            let mut unit = vec![0u64; m];
            unit[l] = 1;
            let mut ext = view.clone();
            ext.push_row(&unit)?;
            let extended = ext.rank();
            if l == j {
                decodable.push(extended == base);
            } else {
                let pass = extended == base + 1;
                let witness = (!pass).then_some(LeakWitness::Rank { view_rank: base, extended_rank: extended });
                pairs.push(PairVerdict { user: j, other: l, pass, witness });
            }
        }
    }
    Ok(SecrecyReport { method: CheckMethod::Rank, pairs, decodable: Some(decodable), states: None, note: None })
}

/// Whether `y` is uniform on `F_q^h` when every input is uniform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformityVerdict {
    pub method: CheckMethod,
    /// Inputs enumerated, or the rank of `E`.
    pub inputs: u64,
    pub distinct_outputs: u64,
    pub uniform: bool,
}

/// The input-to-output map is a bijection onto `F_q^h`.
pub fn audit_uniformity(d: &dyn Dssp, budget: u64) -> Result<UniformityVerdict> {
    let h = d.slots();
    let len = d.users() + d.randomness_len();
    if let Some(e) = d.linear_map() {
        let rank = e.rank() as u64;
        return Ok(UniformityVerdict {
            method: CheckMethod::Rank,
            inputs: rank,
            distinct_outputs: rank,
            uniform: e.is_square() && rank == h as u64,
        });
    }
    let field = d.field();
    let total = state_count(field.modulus(), len).filter(|&t| t <= budget).ok_or(Error::BudgetExhausted { budget })?;
    let outputs = partitioned(
        total,
        |range| {
            let mut seen = std::collections::HashSet::new();
            walk_inputs(field, len, range, |_, input| {
                let (s, r) = input.split_at(d.users());
                seen.insert(values(&d.encode_with(s, r)?));
                Ok(())
            })?;
            Ok(seen)
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )?;
    let distinct = outputs.len() as u64;
    Ok(UniformityVerdict {
        method: CheckMethod::Exhaustive,
        inputs: total,
        distinct_outputs: distinct,
        uniform: distinct == total && h == len,
    })
}

/// Storage and communication figures for a descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub m: usize,
    pub h: usize,
    /// `h / m`.
    #[serde(with = "crate::design::rational_str")]
    pub so: Rational,
    /// What the construction promises for `h / m`.
    #[serde(with = "crate::design::rational_str")]
    pub so_expected: Rational,
    /// Symbols downloaded by all users together.
    pub c: u64,
    /// Lower bound on `c` for `m` users on `n` nodes.
    pub c_star: u64,
    pub max_users: u64,
}

pub fn metrics(d: &ProtocolDescriptor) -> Result<Metrics> {
    let m = d.m();
    let c = (0..m).map(|j| d.decoder_plan(j).map(|p| p.len() as u64)).sum::<Result<u64>>()?;
    let k = d.k().unwrap_or(0) as i128;
    let mi = m as i128;
    let so_expected = match d.kind() {
        ProtocolKind::Sdssp => Rational::new(d.access().total_size() as i128, mi),
        ProtocolKind::OptimalSo => Rational::from_integer(1),
        ProtocolKind::NearlyOptimal => Rational::new(mi + k - 1, mi),
    };
    Ok(Metrics {
        n: d.n(),
        m,
        h: d.h(),
        so: Rational::new(d.h() as i128, mi),
        so_expected,
        c,
        c_star: solve_design(d.n(), m as u64)?.c_star,
        max_users: max_users(d.n())?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpernerVerdict {
    pub pass: bool,
    /// `(contained, container)` users.
    #[serde(with = "one_based")]
    pub witness: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub trials: u64,
    pub budget: u64,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions { trials: 200, budget: DEFAULT_ENUMERATION_BUDGET, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub protocol: ProtocolKind,
    pub correctness: CorrectnessVerdict,
    pub sperner: SpernerVerdict,
    pub metrics: Metrics,
    pub so_matches: bool,
    pub c_at_least_c_star: bool,
    pub secrecy: SecrecyReport,
    pub uniformity: Option<UniformityVerdict>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.correctness.pass
            && self.sperner.pass
            && self.so_matches
            && self.c_at_least_c_star
            && self.secrecy.pass()
            && self.uniformity.as_ref().is_none_or(|u| u.uniform)
    }
}

/// Runs every check, choosing the rank certificate for linear encoders and
/// enumeration otherwise. Secrecy is reported as skipped when enumeration
/// would exceed the budget.
pub fn audit(d: &ProtocolDescriptor, opts: &AuditOptions) -> Result<AuditReport> {
    let sperner = match check_sperner(d.access().sets()) {
        Ok(()) => SpernerVerdict { pass: true, witness: None },
        Err(Error::NotSperner { contained, container }) => {
            SpernerVerdict { pass: false, witness: Some((contained, container)) }
        }
        Err(e) => return Err(e),
    };
    let correctness = audit_correctness(d, opts.trials, opts.budget, opts.seed)?;
    let metrics = metrics(d)?;
    let secrecy = if d.linear_map().is_some() {
        audit_secrecy_rank(d)?
    } else {
        match audit_secrecy_exhaustive(d, opts.budget) {
            Ok(r) => r,
            Err(Error::BudgetExhausted { budget }) => SecrecyReport {
                method: CheckMethod::Skipped,
                pairs: Vec::new(),
                decodable: None,
                states: None,
                note: Some(format!("enumeration exceeds the budget of {budget} states")),
            },
            Err(e) => return Err(e),
        }
    };
    let uniformity = match audit_uniformity(d, opts.budget) {
        Ok(u) => Some(u),
        Err(Error::BudgetExhausted { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(AuditReport {
        protocol: d.kind(),
        so_matches: metrics.so == metrics.so_expected,
        c_at_least_c_star: metrics.c >= metrics.c_star,
        correctness,
        sperner,
        metrics,
        secrecy,
        uniformity,
    })
}
