//! Binomial coefficients, k-subsets, the revolving-door ordering and window
//! sequences.
//!
//! A window sequence is a list of node indices in which every run of `k`
//! consecutive symbols names a distinct `k`-subset. Storing the `r`-th data
//! symbol on node `seq[r]` then gives every user a contiguous block of data
//! symbols on exactly its access set.
//!
//! Node indices are 1-based throughout.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count supported by the bitmask-based searches.
pub const MAX_NODES: usize = 64;

/// Default node-expansion budget for backtracking searches.
pub const DEFAULT_SEARCH_BUDGET: u64 = 10_000_000;

/// Exact binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) is exact at every step
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Overflow(format!("C({n},{k})")))?
            / (i as u128 + 1);
    }
    u64::try_from(acc).map_err(|_| Error::Overflow(format!("C({n},{k})")))
}

/// A set of node indices, stored sorted and strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct KSubset(Vec<usize>);

impl KSubset {
    /// Sorts the elements and rejects duplicates and index 0.
    pub fn new(mut elements: Vec<usize>) -> Result<Self> {
        elements.sort_unstable();
        if elements.first() == Some(&0) {
            return Err(Error::InvalidParameter("node indices start at 1".into()));
        }
        if elements.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("repeated node in {elements:?}")));
        }
        Ok(KSubset(elements))
    }

    pub fn from_mask(mask: u64) -> Self {
        KSubset((0..64).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect())
    }

    pub fn elements(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_element(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    pub fn is_subset_of(&self, other: &KSubset) -> bool {
        self.0.iter().all(|e| other.contains(*e))
    }

    /// Bit `e - 1` set for each element `e`. Requires every element `<= 64`.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &e| {
            assert!(e <= MAX_NODES, "node {e} does not fit a 64-bit mask");
            m | 1 << (e - 1)
        })
    }
}

impl TryFrom<Vec<usize>> for KSubset {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        KSubset::new(v)
    }
}

impl From<KSubset> for Vec<usize> {
    fn from(s: KSubset) -> Vec<usize> {
        s.0
    }
}

impl fmt::Display for KSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// All `k`-subsets of `[n]` in lexicographic order.
pub fn k_subsets_lex(n: usize, k: usize) -> impl Iterator<Item = KSubset> {
    use itertools::Itertools;
    (1..=n).combinations(k).map(KSubset)
}

/// All `k`-bit masks below `2^n` in increasing numeric (colex) order.
pub(crate) fn k_masks_colex(n: usize, k: usize) -> impl Iterator<Item = u64> {
    assert!(n <= MAX_NODES);
    let limit: u128 = 1u128 << n;
    let start: u128 = if k == 0 { 0 } else { (1u128 << k) - 1 };
    let mut next = if k as u128 > n as u128 { None } else { Some(start) };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let n2 = (((r ^ cur) >> 2) / c) | r;
            (n2 < limit).then_some(n2)
        };
        Some(cur as u64)
    })
}

/// The revolving-door listing of all `k`-subsets of `[n]`.
///
/// Consecutive subsets differ by exchanging one element, and so do the last
/// and the first.
pub fn revolving_door(n: usize, k: usize) -> Result<Vec<KSubset>> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("revolving door needs 1 <= k <= n, got n={n} k={k}")));
    }
    binomial(n as u64, k as u64)?;
    Ok(revolving_door_rec(n, k).into_iter().map(KSubset).collect())
}

// R(n,k) = R(n-1,k) followed by the reverse of R(n-1,k-1) with n appended.
fn revolving_door_rec(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if k == n {
        return vec![(1..=n).collect()];
    }
    let mut out = revolving_door_rec(n - 1, k);
    let mut tail = revolving_door_rec(n - 1, k - 1);
    tail.reverse();
    out.extend(tail.into_iter().map(|mut s| {
        s.push(n);
        s
    }));
    out
}

/// A symbol sequence whose width-`window` runs name distinct subsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSequence {
    pub symbols: Vec<usize>,
    pub window: usize,
    pub cyclic: bool,
}

/// The first way a sequence fails the window property.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WindowViolation {
    /// The window starting at `start` (0-based) repeats a symbol.
    RepeatedSymbol { start: usize },
    /// Windows `first` and `second` name the same set.
    DuplicateWindow { first: usize, second: usize },
    /// Zero window width or no complete window.
    Degenerate,
}

impl WindowSequence {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Number of windows: `len` when cyclic, `len - window + 1` otherwise.
    pub fn window_count(&self) -> usize {
        if self.cyclic {
            self.symbols.len()
        } else {
            (self.symbols.len() + 1).saturating_sub(self.window)
        }
    }

    /// The 0-based sequence positions covered by window `start`.
    pub fn window_positions(&self, start: usize) -> impl Iterator<Item = usize> + '_ {
        let len = self.symbols.len();
        (0..self.window).map(move |o| (start + o) % len)
    }

    /// Window `start` as a set of nodes.
    pub fn window_set(&self, start: usize) -> Result<KSubset> {
        KSubset::new(self.window_positions(start).map(|p| self.symbols[p]).collect())
    }

    /// Checks both invariants: symbols within a window are distinct, and no
    /// two windows name the same set.
    pub fn verify(&self) -> Result<(), WindowViolation> {
        if self.window == 0 || self.window_count() == 0 {
            return Err(WindowViolation::Degenerate);
        }
        let mut seen = std::collections::HashMap::new();
        for start in 0..self.window_count() {
            let mut syms: Vec<usize> = self.window_positions(start).map(|p| self.symbols[p]).collect();
            // a cyclic window longer than the cycle revisits a position
            if self.cyclic && self.window > self.symbols.len() {
                return Err(WindowViolation::RepeatedSymbol { start });
            }
            syms.sort_unstable();
            if syms.windows(2).any(|w| w[0] == w[1]) {
                return Err(WindowViolation::RepeatedSymbol { start });
            }
            if let Some(&first) = seen.get(&syms) {
                return Err(WindowViolation::DuplicateWindow { first, second: start });
            }
            seen.insert(syms, start);
        }
        Ok(())
    }
}

/// Checks a sequence; `true` iff both window invariants hold.
pub fn verify_window_property(seq: &WindowSequence) -> (bool, Option<WindowViolation>) {
    match seq.verify() {
        Ok(()) => (true, None),
        Err(v) => (false, Some(v)),
    }
}

/// Why no window sequence exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Infeasibility {
    /// More windows requested than there are `k`-subsets.
    TooManyWindows { requested: u64, available: u64 },
    /// A cyclic window longer than the cycle itself.
    WindowExceedsCycle { window: usize, length: usize },
    /// In a cyclic sequence covering all `k`-subsets each symbol lies in
    /// `C(n-1,k-1)` windows, and each occurrence covers exactly `k` of them,
    /// so `k` must divide `C(n-1,k-1)`.
    DegreeObstruction { windows_per_symbol: u64, window: usize },
    /// Backtracking explored the whole (symmetry-reduced) search space.
    ExhaustiveSearch { expansions: u64 },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::TooManyWindows { requested, available } => {
                write!(f, "{requested} windows requested but only {available} subsets exist")
            }
            Infeasibility::WindowExceedsCycle { window, length } => {
                write!(f, "window {window} exceeds cycle length {length}")
            }
            Infeasibility::DegreeObstruction { windows_per_symbol, window } => write!(
                f,
                "each node lies in {windows_per_symbol} subsets, not divisible by the window {window}"
            ),
            Infeasibility::ExhaustiveSearch { expansions } => {
                write!(f, "exhaustive search finished after {expansions} node expansions")
            }
        }
    }
}

/// Configures how [`WindowSearch::find`] looks for a sequence.
#[derive(Clone, Copy, Debug)]
pub struct WindowSearch {
    pub budget: u64,
    /// Try the revolving-door candidate before searching.
    pub use_candidate: bool,
    /// Apply the per-symbol occurrence bound for complete cyclic sequences,
    /// both as an up-front infeasibility test and as search pruning.
    pub use_degree_bound: bool,
}

impl Default for WindowSearch {
    fn default() -> Self {
        WindowSearch { budget: DEFAULT_SEARCH_BUDGET, use_candidate: true, use_degree_bound: true }
    }
}

/// Finds a window sequence with `m` windows of width `k` over `[n]`.
///
/// Cyclic sequences have length `m`; acyclic ones have length `m + k - 1`.
pub fn window_sequence(n: usize, k: usize, m: usize, cyclic: bool, budget: u64) -> Result<WindowSequence> {
    WindowSearch { budget, ..WindowSearch::default() }.find(n, k, m, cyclic)
}

/// Emits the departing element of each consecutive revolving-door pair,
/// wrapping around the listing as often as needed.
pub fn revolving_door_candidate(n: usize, k: usize, len: usize) -> Result<Vec<usize>> {
    let listing = revolving_door(n, k)?;
    let total = listing.len();
    Ok((0..len)
        .map(|j| {
            let a = &listing[j % total];
            let b = &listing[(j + 1) % total];
            a.elements().iter().copied().find(|e| !b.contains(*e)).unwrap_or(a.elements()[0])
        })
        .collect())
}

impl WindowSearch {
    pub fn find(&self, n: usize, k: usize, m: usize, cyclic: bool) -> Result<WindowSequence> {
        if k == 0 || k > n || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "window sequence needs 1 <= k <= n and m >= 1, got n={n} k={k} m={m}"
            )));
        }
        if n > MAX_NODES {
            return Err(Error::InvalidParameter(format!("at most {MAX_NODES} nodes supported, got {n}")));
        }
        let available = binomial(n as u64, k as u64)?;
        if m as u64 > available {
            return Err(Error::Infeasible(Infeasibility::TooManyWindows { requested: m as u64, available }));
        }
        let len = if cyclic { m } else { m + k - 1 };
        if cyclic && k > m {
            return Err(Error::Infeasible(Infeasibility::WindowExceedsCycle { window: k, length: m }));
        }

        if self.use_candidate {
            let seq = WindowSequence { symbols: revolving_door_candidate(n, k, len)?, window: k, cyclic };
            if seq.verify().is_ok() {
                return Ok(seq);
            }
        }

        let complete_cycle = cyclic && m as u64 == available;
        let per_symbol = if complete_cycle && self.use_degree_bound {
            let windows_per_symbol = binomial(n as u64 - 1, k as u64 - 1)?;
            if windows_per_symbol % k as u64 != 0 {
                return Err(Error::Infeasible(Infeasibility::DegreeObstruction { windows_per_symbol, window: k }));
            }
            Some(windows_per_symbol / k as u64)
        } else {
            None
        };

        Backtrack::new(n, k, len, cyclic, per_symbol, self.budget).run()
    }
}

struct Backtrack {
    n: usize,
    k: usize,
    len: usize,
    cyclic: bool,
    max_occurrences: Option<u64>,
    budget: u64,
    seq: Vec<usize>,
    used: HashSet<u64>,
    occurrences: Vec<u64>,
    // unused windows containing each symbol, used to order candidates
    remaining: Vec<u64>,
}

impl Backtrack {
    fn new(n: usize, k: usize, len: usize, cyclic: bool, max_occurrences: Option<u64>, budget: u64) -> Self {
        let per = binomial(n as u64 - 1, k as u64 - 1).unwrap_or(u64::MAX);
        Backtrack {
            n,
            k,
            len,
            cyclic,
            max_occurrences,
            budget,
            seq: Vec::with_capacity(len),
            used: HashSet::new(),
            occurrences: vec![0; n + 1],
            remaining: vec![per; n + 1],
        }
    }

    // the last complete window
    fn tail_mask(&self) -> u64 {
        let start = self.seq.len() - self.k;
        self.seq[start..].iter().fold(0, |m, &s| m | 1 << (s - 1))
    }

    fn push(&mut self, sym: usize) {
        self.seq.push(sym);
        self.occurrences[sym] += 1;
        if self.seq.len() >= self.k {
            let w = self.tail_mask();
            self.used.insert(w);
            for b in 0..self.n {
                if w >> b & 1 == 1 {
                    self.remaining[b + 1] -= 1;
                }
            }
        }
    }

    fn pop(&mut self) {
        if self.seq.len() >= self.k {
            let w = self.tail_mask();
            self.used.remove(&w);
            for b in 0..self.n {
                if w >> b & 1 == 1 {
                    self.remaining[b + 1] += 1;
                }
            }
        }
        let sym = self.seq.pop().expect("pop on empty sequence");
        self.occurrences[sym] -= 1;
    }

    /// Symbols that may extend the current prefix, best first.
    fn candidates(&self) -> Vec<usize> {
        let pos = self.seq.len();
        let recent_start = pos + 1 - self.k;
        let recent = &self.seq[recent_start..];
        let recent_mask = recent.iter().fold(0u64, |m, &s| m | 1 << (s - 1));
        // in a cyclic sequence, late positions also share windows with the head
        let head_mask = if self.cyclic && pos + self.k > self.len {
            self.seq[..pos + self.k - self.len].iter().fold(0u64, |m, &s| m | 1 << (s - 1))
        } else {
            0
        };
        let mut out: Vec<usize> = (1..=self.n)
            .filter(|&x| {
                let bit = 1u64 << (x - 1);
                recent_mask & bit == 0
                    && head_mask & bit == 0
                    && !self.used.contains(&(recent_mask | bit))
                    && self.max_occurrences.is_none_or(|cap| self.occurrences[x] < cap)
            })
            .collect();
        out.sort_by(|a, b| self.remaining[*b].cmp(&self.remaining[*a]).then(a.cmp(b)));
        out
    }

    /// Checks the windows that wrap from the tail into the head.
    fn wrap_ok(&self) -> bool {
        if !self.cyclic {
            return true;
        }
        let len = self.len;
        let mut extra = HashSet::new();
        for start in len + 1 - self.k..len {
            let mut mask = 0u64;
            for o in 0..self.k {
                let bit = 1u64 << (self.seq[(start + o) % len] - 1);
                if mask & bit != 0 {
                    return false;
                }
                mask |= bit;
            }
            if self.used.contains(&mask) || !extra.insert(mask) {
                return false;
            }
        }
        true
    }

    fn run(mut self) -> Result<WindowSequence> {
        // Relabeling nodes maps valid sequences to valid sequences, so the
        // first window can be fixed to 1, 2, ..., k.
        for s in 1..=self.k {
            self.push(s);
        }
        let mut expansions: u64 = 0;
        let mut stack: Vec<(Vec<usize>, usize)> = Vec::new();
        if self.seq.len() < self.len {
            stack.push((self.candidates(), 0));
        }
        loop {
            if self.seq.len() == self.len && self.wrap_ok() {
                let seq = WindowSequence { symbols: self.seq, window: self.k, cyclic: self.cyclic };
                debug_assert!(seq.verify().is_ok());
                return Ok(seq);
            }
            let Some((cands, idx)) = stack.last_mut() else {
                return Err(Error::Infeasible(Infeasibility::ExhaustiveSearch { expansions }));
            };
            if self.seq.len() == self.len {
                // complete but the wrap-around windows clash
                self.pop();
                continue;
            }
            if *idx >= cands.len() {
                stack.pop();
                if stack.is_empty() {
                    return Err(Error::Infeasible(Infeasibility::ExhaustiveSearch { expansions }));
                }
                self.pop();
                continue;
            }
            let sym = cands[*idx];
            *idx += 1;
            expansions += 1;
            if expansions > self.budget {
                return Err(Error::BudgetExhausted { budget: self.budget });
            }
            self.push(sym);
            if self.seq.len() < self.len {
                stack.push((self.candidates(), 0));
            }
        }
    }
}
