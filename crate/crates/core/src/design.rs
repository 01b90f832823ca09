//! Communication-optimal access structures.
//!
//! A tight protocol downloads one symbol per node in each access set, so its
//! communication cost is `Σ k·a_k` where `a_k` counts the access sets of size
//! `k`. Minimizing that subject to `Σ a_k = m` and the LYM inequality
//! `Σ a_k / C(n,k) <= 1` has a closed-form continuous solution supported on
//! two consecutive sizes `i, i+1`; rounding `a_i` down and `a_{i+1}` up gives
//! the integer optimum `C* = ⌈ψ*⌉`.
//!
//! LYM is necessary but not sufficient. [`realize_sperner`] decides a profile
//! exactly through colex shadows, and [`achievable_min_c`] finds the cheapest
//! profile that is actually an antichain.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, k_masks_colex, KSubset, MAX_NODES};
use crate::error::{Error, Result};

/// Exact rational used for the continuous optimum.
pub type Rational = Ratio<i128>;

/// Number of access sets of each size, `k -> a_k`. Zero counts are omitted.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SizeProfile(BTreeMap<usize, u64>);

impl SizeProfile {
    pub fn new(counts: impl IntoIterator<Item = (usize, u64)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, a) in counts {
            if a > 0 {
                *map.entry(k).or_insert(0) += a;
            }
        }
        SizeProfile(map)
    }

    pub fn get(&self, k: usize) -> u64 {
        self.0.get(&k).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (usize, u64)> + '_ {
        self.0.iter().map(|(&k, &a)| (k, a))
    }

    /// Number of sets, `Σ a_k`.
    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    /// Communication cost of a tight protocol, `Σ k·a_k`.
    pub fn cost(&self) -> u64 {
        self.iter().map(|(k, a)| k as u64 * a).sum()
    }

    /// `Σ a_k / C(n,k)`.
    pub fn lym_sum(&self, n: usize) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (k, a) in self.iter() {
            let c = binomial(n as u64, k as u64)?;
            if c == 0 {
                return Err(Error::InvalidParameter(format!("size {k} exceeds n={n}")));
            }
            acc += Rational::new(a as i128, c as i128);
        }
        Ok(acc)
    }

    pub fn satisfies_lym(&self, n: usize) -> Result<bool> {
        Ok(self.lym_sum(n)? <= Rational::from_integer(1))
    }
}

impl fmt::Display for SizeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (idx, (k, a)) in self.iter().enumerate() {
            if idx > 0 {
                write!(f, ", ")?;
            }
            write!(f, "a_{k}={a}")?;
        }
        write!(f, ")")
    }
}

pub(crate) mod rational_str {
    use super::Rational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        text.parse::<Rational>().map_err(|e| D::Error::custom(format!("bad rational {text:?}: {e}")))
    }
}

/// Output of [`solve_design`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub n: usize,
    pub m: u64,
    /// Lower of the two active sizes.
    pub i: usize,
    #[serde(with = "rational_str")]
    pub alpha_i: Rational,
    #[serde(with = "rational_str")]
    pub alpha_i1: Rational,
    /// Integer profile `a_i = ⌊α_i⌋`, `a_{i+1} = ⌈α_{i+1}⌉`.
    pub profile: SizeProfile,
    #[serde(with = "rational_str")]
    pub psi_star: Rational,
    pub c_star: u64,
}

/// The largest Sperner family on `[n]` has `C(n, ⌊n/2⌋)` members.
pub fn max_users(n: usize) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one storage node".into()));
    }
    binomial(n as u64, n as u64 / 2)
}

fn bin_i(n: usize, k: usize) -> Result<i128> {
    Ok(binomial(n as u64, k as u64)? as i128)
}

fn overflow(what: &str) -> Error {
    Error::Overflow(what.to_string())
}

/// Closed-form minimum communication design for `m` users on `n` nodes.
pub fn solve_design(n: usize, m: u64) -> Result<DesignSolution> {
    let max = max_users(n)?;
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one user".into()));
    }
    if m > max {
        return Err(Error::InfeasibleUserCount { n, m, max });
    }
    let top = (n / 2).max(1);
    let mi = m as i128;
    let found = (1..=top).rev().find(|&k| binomial(n as u64, k as u64).is_ok_and(|c| c <= m));

    let (i, alpha_i, alpha_i1) = match found {
        // m < n: singletons alone stay strictly inside the LYM constraint
        None => (1, Rational::from_integer(mi), Rational::zero()),
        Some(i) => {
            let ci = bin_i(n, i)?;
            if ci == mi || i == top {
                (i, Rational::from_integer(mi), Rational::zero())
            } else {
                let ci1 = bin_i(n, i + 1)?;
                let denom = ci1 - ci;
                let num_i = (ci1 - mi).checked_mul(ci).ok_or_else(|| overflow("alpha_i"))?;
                let num_i1 = (mi - ci).checked_mul(ci1).ok_or_else(|| overflow("alpha_i+1"))?;
                (i, Rational::new(num_i, denom), Rational::new(num_i1, denom))
            }
        }
    };

    let psi_star = alpha_i * Rational::from_integer(i as i128)
        + alpha_i1 * Rational::from_integer(i as i128 + 1);
    let a_i = alpha_i.floor().to_integer() as u64;
    let a_i1 = alpha_i1.ceil().to_integer() as u64;
    let profile = SizeProfile::new([(i, a_i), (i + 1, a_i1)]);
    let c_star = psi_star.ceil().to_integer().to_u64().ok_or_else(|| overflow("C*"))?;
    debug_assert_eq!(profile.cost(), c_star);
    debug_assert_eq!(profile.total(), m);
    Ok(DesignSolution { n, m, i, alpha_i, alpha_i1, profile, psi_star, c_star })
}

/// Exhaustive minimum of `Σ k·a_k` over integer profiles on sizes `1..=n`
/// with `Σ a_k = m` and the LYM inequality.
///
/// This is the reference the closed form is checked against. Ties go to the
/// profile found first when sizes are assigned from `k = 1` upward, each
/// count tried from largest to smallest.
pub fn brute_force_design(n: usize, m: u64, budget: u64) -> Result<(SizeProfile, u64)> {
    let mut best: Option<(SizeProfile, u64)> = None;
    enumerate_lym_profiles(n, m, budget, |p| {
        let cost = p.cost();
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((p.clone(), cost));
        }
    })?;
    best.ok_or(Error::InfeasibleUserCount { n, m, max: max_users(n)? })
}

/// Calls `visit` on every profile over sizes `1..=n` with total `m` that
/// satisfies LYM.
fn enumerate_lym_profiles(n: usize, m: u64, budget: u64, mut visit: impl FnMut(&SizeProfile)) -> Result<u64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("need n >= 1 and m >= 1, got n={n} m={m}")));
    }
    // Exact integer LYM: scale by the lcm of all C(n,k).
    let mut lcm: u128 = 1;
    let mut binoms = vec![0u128; n + 1];
    for (k, slot) in binoms.iter_mut().enumerate().skip(1) {
        let c = binomial(n as u64, k as u64)? as u128;
        *slot = c;
        lcm = lcm / gcd(lcm, c) * c;
        if lcm > u64::MAX as u128 {
            return Err(overflow("LYM scale"));
        }
    }
    let weights: Vec<u128> = binoms.iter().map(|&c| lcm.checked_div(c).unwrap_or(0)).collect();

    struct Walk<'a, F> {
        n: usize,
        weights: &'a [u128],
        counts: Vec<u64>,
        budget: u64,
        expansions: u64,
        visit: F,
    }

    impl<F: FnMut(&SizeProfile)> Walk<'_, F> {
        fn go(&mut self, k: usize, remaining: u64, slack: u128) -> Result<()> {
            self.expansions += 1;
            if self.expansions > self.budget {
                return Err(Error::BudgetExhausted { budget: self.budget });
            }
            if remaining == 0 {
                let p = SizeProfile::new(self.counts.iter().enumerate().map(|(k, &a)| (k, a)));
                (self.visit)(&p);
                return Ok(());
            }
            if k > self.n {
                return Ok(());
            }
            let w = self.weights[k];
            let cap = remaining.min((slack / w) as u64);
            for a in (0..=cap).rev() {
                self.counts[k] = a;
                self.go(k + 1, remaining - a, slack - a as u128 * w)?;
            }
            self.counts[k] = 0;
            Ok(())
        }
    }

    let mut walk = Walk { n, weights: &weights, counts: vec![0; n + 1], budget, expansions: 0, visit: &mut visit };
    walk.go(1, m, lcm)?;
    Ok(walk.expansions)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A family of access sets, one per user, with no member contained in
/// another.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<KSubset>", into = "Vec<KSubset>")]
pub struct AccessStructure {
    sets: Vec<KSubset>,
}

impl AccessStructure {
    pub fn new(sets: Vec<KSubset>) -> Result<Self> {
        check_sperner(&sets)?;
        Ok(AccessStructure { sets })
    }

    pub fn sets(&self) -> &[KSubset] {
        &self.sets
    }

    pub fn get(&self, user: usize) -> Option<&KSubset> {
        self.sets.get(user)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Largest node index used.
    pub fn max_node(&self) -> usize {
        self.sets.iter().filter_map(KSubset::max_element).max().unwrap_or(0)
    }

    pub fn profile(&self) -> SizeProfile {
        SizeProfile::new(self.sets.iter().map(|s| (s.len(), 1)))
    }

    /// `Σ |A_j|`.
    pub fn total_size(&self) -> u64 {
        self.sets.iter().map(|s| s.len() as u64).sum()
    }
}

impl TryFrom<Vec<KSubset>> for AccessStructure {
    type Error = Error;

    fn try_from(sets: Vec<KSubset>) -> Result<Self> {
        AccessStructure::new(sets)
    }
}

impl From<AccessStructure> for Vec<KSubset> {
    fn from(a: AccessStructure) -> Vec<KSubset> {
        a.sets
    }
}

/// Pairwise non-containment. The witness names the lowest-indexed pair.
pub fn check_sperner(sets: &[KSubset]) -> Result<()> {
    if let Some(j) = sets.iter().position(KSubset::is_empty) {
        return Err(Error::InvalidParameter(format!("access set of user {} is empty", j + 1)));
    }
    let uniform = sets.windows(2).all(|w| w[0].len() == w[1].len());
    if uniform {
        let mut seen = std::collections::HashMap::new();
        for (idx, s) in sets.iter().enumerate() {
            if let Some(&first) = seen.get(s) {
                return Err(Error::NotSperner { contained: first, container: idx });
            }
            seen.insert(s, idx);
        }
        return Ok(());
    }
    for (j, a) in sets.iter().enumerate() {
        for (l, b) in sets.iter().enumerate() {
            if j != l && a.len() <= b.len() && a.is_subset_of(b) {
                return Err(Error::NotSperner { contained: j, container: l });
            }
        }
    }
    Ok(())
}

/// Builds a Sperner family with exactly `profile` sets of each size.
///
/// Works down from the largest size. Level `k` is the colex initial segment
/// of length `|shadow| + a_k`, where the shadow of a colex initial segment is
/// again one; the new sets are its last `a_k` members. The profile is
/// realizable exactly when every such segment fits in `C(n,k)`.
pub fn realize_sperner(n: usize, profile: &SizeProfile) -> Result<AccessStructure> {
    check_profile(n, profile)?;
    if !profile.satisfies_lym(n)? {
        return Err(Error::Unrealizable { expansions: 0 });
    }
    colex_realize(n, profile).map(to_structure).ok_or(Error::Unrealizable { expansions: 0 })
}

/// Backtracking search for a family with the given profile, independent of
/// the colex construction. `Ok(None)` means the space was exhausted.
pub fn search_sperner(n: usize, profile: &SizeProfile, budget: u64) -> Result<Option<AccessStructure>> {
    check_profile(n, profile)?;
    let levels: Vec<(usize, usize)> = profile.iter().rev().map(|(k, a)| (k, a as usize)).collect();
    let mut search = FamilySearch { n, levels: &levels, chosen: Vec::new(), expansions: 0, budget };
    Ok(search.level(0)?.then(|| to_structure(search.chosen)))
}

fn check_profile(n: usize, profile: &SizeProfile) -> Result<()> {
    if n == 0 || n > MAX_NODES {
        return Err(Error::InvalidParameter(format!("need 1 <= n <= {MAX_NODES}, got {n}")));
    }
    if profile.iter().any(|(k, _)| k == 0 || k > n) {
        return Err(Error::InvalidParameter(format!("profile {profile} has sizes outside 1..={n}")));
    }
    Ok(())
}

fn to_structure(masks: Vec<u64>) -> AccessStructure {
    let sets = masks.into_iter().map(KSubset::from_mask).collect();
    AccessStructure::new(sets).expect("search produced an antichain")
}

fn is_sub(a: u64, b: u64) -> bool {
    a & !b == 0
}

fn colex_realize(n: usize, profile: &SizeProfile) -> Option<Vec<u64>> {
    let Some((top, _)) = profile.iter().next_back() else {
        return Some(Vec::new());
    };
    let bottom = profile.iter().next().map_or(top, |(k, _)| k);
    let mut chosen = Vec::new();
    let mut segment: Vec<u64> = Vec::new();
    for k in (bottom..=top).rev() {
        let mut shadow: HashSet<u64> = HashSet::new();
        for &s in &segment {
            let mut rest = s;
            while rest != 0 {
                let bit = rest & rest.wrapping_neg();
                shadow.insert(s & !bit);
                rest &= rest - 1;
            }
        }
        let len = shadow.len() + profile.get(k) as usize;
        segment = k_masks_colex(n, k).take(len).collect();
        if segment.len() < len {
            return None;
        }
        debug_assert!(segment[..shadow.len()].iter().all(|m| shadow.contains(m)));
        chosen.extend(&segment[shadow.len()..]);
    }
    Some(chosen)
}

struct FamilySearch<'a> {
    n: usize,
    levels: &'a [(usize, usize)],
    chosen: Vec<u64>,
    expansions: u64,
    budget: u64,
}

impl FamilySearch<'_> {
    fn available(&self, k: usize) -> Vec<u64> {
        k_masks_colex(self.n, k).filter(|&c| !self.chosen.iter().any(|&b| is_sub(c, b))).collect()
    }

    fn level(&mut self, idx: usize) -> Result<bool> {
        let Some(&(k, count)) = self.levels.get(idx) else {
            return Ok(true);
        };
        let avail = self.available(k);
        if avail.len() < count {
            return Ok(false);
        }
        if idx + 1 == self.levels.len() {
            self.chosen.extend(&avail[..count]);
            return Ok(true);
        }
        self.combos(idx, &avail, 0, count)
    }

    fn combos(&mut self, idx: usize, avail: &[u64], from: usize, left: usize) -> Result<bool> {
        self.expansions += 1;
        if self.expansions > self.budget {
            return Err(Error::BudgetExhausted { budget: self.budget });
        }
        if left == 0 {
            return self.level(idx + 1);
        }
        for pos in from..=avail.len() - left {
            self.chosen.push(avail[pos]);
            if self.combos(idx, avail, pos + 1, left - 1)? {
                return Ok(true);
            }
            self.chosen.pop();
        }
        Ok(false)
    }
}

/// Smallest `Σ |A_j|` over Sperner families with `m` members, with a
/// witness family.
///
/// Profiles are tried in increasing cost order, so the first realizable one
/// is optimal. Every LYM-feasible profile costs at least `C*`.
pub fn achievable_min_c(n: usize, m: u64, budget: u64) -> Result<(u64, AccessStructure)> {
    let max = max_users(n)?;
    if m == 0 || m > max {
        return Err(Error::InfeasibleUserCount { n, m, max });
    }
    let mut profiles = Vec::new();
    enumerate_lym_profiles(n, m, budget, |p| profiles.push(p.clone()))?;
    profiles.sort_by_key(|p| (p.cost(), p.clone()));
    let tried = profiles.len() as u64;
    profiles
        .into_iter()
        .find_map(|p| colex_realize(n, &p).map(|masks| (p.cost(), to_structure(masks))))
        .ok_or(Error::Unrealizable { expansions: tried })
}

/// Result of [`check_design_shape`]; empty violation lists mean every
/// check passed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub n: usize,
    /// `k` with `d_k >= d_{k+1}`, where `d_k = 1/C(n,k+1) - 1/C(n,k)`.
    pub convexity_violations: Vec<usize>,
    /// Triples with `slope(k1,k2) >= slope(k2,k3)`.
    pub slope_violations: Vec<(usize, usize, usize)>,
    /// User counts whose design uses non-consecutive or more than two sizes,
    /// or breaks the active-constraint identities.
    pub design_violations: Vec<u64>,
    pub designs_checked: u64,
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.convexity_violations.is_empty()
            && self.slope_violations.is_empty()
            && self.design_violations.is_empty()
    }
}

/// Checks convexity of `f(k) = 1/C(n,k)`, the induced slope ordering, and
/// the two-consecutive-sizes shape of every design for `m = 1..=max_users(n)`,
/// all in exact arithmetic.
pub fn check_design_shape(n: usize) -> Result<ShapeReport> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("shape checks need n >= 2, got {n}")));
    }
    let f: Vec<Rational> =
        (0..=n).map(|k| bin_i(n, k).map(|c| Rational::new(1, c))).collect::<Result<_>>()?;
    let d: Vec<Rational> = (0..n).map(|k| f[k + 1] - f[k]).collect();
    let slope = |a: usize, b: usize| (f[b] - f[a]) / Rational::from_integer((b - a) as i128);

    let mut report = ShapeReport { n, ..ShapeReport::default() };
    for k in 0..=n - 2 {
        if d[k] >= d[k + 1] {
            report.convexity_violations.push(k);
        }
    }
    for k1 in 0..=n {
        for k2 in k1 + 1..=n {
            for k3 in k2 + 1..=n {
                if slope(k1, k2) >= slope(k2, k3) {
                    report.slope_violations.push((k1, k2, k3));
                }
            }
        }
    }
    let one = Rational::from_integer(1);
    for m in 1..=max_users(n)? {
        let sol = solve_design(n, m)?;
        let sizes: Vec<usize> = sol.profile.iter().map(|(k, _)| k).collect();
        let shape_ok = sizes.len() <= 2 && sizes.windows(2).all(|w| w[1] == w[0] + 1);
        let sum_ok = sol.alpha_i + sol.alpha_i1 == Rational::from_integer(m as i128);
        let lym = sol.alpha_i / Rational::from_integer(bin_i(n, sol.i)?)
            + sol.alpha_i1 / Rational::from_integer(bin_i(n, sol.i + 1)?.max(1));
        // the LYM constraint is active once singletons no longer suffice
        let lym_ok = if m >= n as u64 { lym == one } else { lym <= one };
        let rounding_ok = sol.c_star == sol.profile.cost() && sol.profile.satisfies_lym(n)?;
        if !(shape_ok && sum_ok && lym_ok && rounding_ok) {
            report.design_violations.push(m);
        }
        report.designs_checked += 1;
    }
    Ok(report)
}

/// Sperner check by brute force over every pair, used as a cross-check.
pub fn is_antichain(sets: &[KSubset]) -> bool {
    let distinct: HashSet<&KSubset> = sets.iter().collect();
    distinct.len() == sets.len()
        && sets.iter().enumerate().all(|(j, a)| {
            sets.iter().enumerate().all(|(l, b)| j == l || !a.is_subset_of(b))
        })
}
