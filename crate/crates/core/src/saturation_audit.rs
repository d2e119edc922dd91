//! Saturation of bad list assignments and the counting ledger evaluated on
//! an instance.
//!
//! The ledger computes every quantity of the minimal-counterexample analysis
//! that is defined for the given instance and evaluates each hypothesis and
//! inequality, reporting rather than asserting. By the theorem, no
//! uncolourable instance with lists of size at least `k` on at most `2k+1`
//! vertices exists, so [`AuditLedger::is_counterexample_candidate`] is
//! always false.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{derived_quantities, Colour, Colouring, Instance};
use crate::matching::{build_bf, max_deficiency_set, saturating_injection, Injection, LeftNode};
use crate::solver::decide;
use crate::transforms::{classify_colours, surjectivize, FrequencyReport, TransformError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("instance is colourable")]
    Colourable,
    #[error("colour {0} is in no list")]
    ColourNotInUniverse(Colour),
    #[error("colour {0} is in every singleton's list")]
    NoSingletonMissing(Colour),
    #[error("adding colour {colour} to vertex {vertex} leaves the instance uncolourable")]
    EnlargementUncolourable { vertex: usize, colour: Colour },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Adds colours of `C` to lists, one at a time, as long as the instance stays
/// uncolourable. Pairs `(v, c)` are scanned in index order and the scan
/// restarts after every addition, so the output is a fixed point: adding any
/// further colour of `C` to any list makes it colourable.
pub fn saturate(inst: &Instance) -> Result<Instance, AuditError> {
    if decide(inst).is_colourable() {
        return Err(AuditError::Colourable);
    }
    let universe = inst.universe().to_vec();
    let mut current = inst.clone();
    'scan: loop {
        for v in 0..current.n() {
            for &c in &universe {
                if current.has_colour(v, c) {
                    continue;
                }
                let candidate = current.with_colour_added(v, c);
                if !decide(&candidate).is_colourable() {
                    current = candidate;
                    continue 'scan;
                }
            }
        }
        return Ok(current);
    }
}

/// Whether every single-colour enlargement within `C` is colourable.
pub fn is_maximal_bad(inst: &Instance) -> bool {
    if decide(inst).is_colourable() {
        return false;
    }
    (0..inst.n()).all(|v| {
        inst.universe()
            .iter()
            .filter(|&&c| !inst.has_colour(v, c))
            .all(|&c| decide(&inst.with_colour_added(v, c)).is_colourable())
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bound {
    pub value: i64,
    pub bound: i64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StrongSet {
    pub c_star: Colour,
    /// The singleton whose list was enlarged by `c_star`.
    pub enlarged: usize,
    /// Acceptable for the enlarged lists, made surjective when possible.
    pub colouring: Colouring,
    pub surjective: bool,
    /// Colours of the classes in the maximum-deficiency set `S` of `B_f`.
    pub deficiency_classes: Vec<Colour>,
    /// Singletons whose colour classes lie in `S`.
    pub singletons: Vec<usize>,
    /// `|X| >= k + 1 - b - gamma`.
    pub size_bound: Bound,
    /// `|N_B(X)| <= 2k - |N_B(c*)|`.
    pub union_bound: Bound,
}

/// Builds the singleton set `X` for a colour missing from some singleton's
/// list: enlarge the least such singleton's list by `c_star`, colour, make
/// the colouring surjective, and collect the singletons whose classes lie in
/// the maximum-deficiency set of `B_f`.
pub fn strong_set(inst: &Instance, c_star: Colour) -> Result<StrongSet, AuditError> {
    if inst.colour_index(c_star).is_none() {
        return Err(AuditError::ColourNotInUniverse(c_star));
    }
    if decide(inst).is_colourable() {
        return Err(AuditError::Colourable);
    }
    let ps = inst.structure();
    let x = ps
        .singletons()
        .into_iter()
        .find(|&v| !inst.has_colour(v, c_star))
        .ok_or(AuditError::NoSingletonMissing(c_star))?;
    let enlarged = inst.with_colour_added(x, c_star);
    let f = decide(&enlarged)
        .witness
        .ok_or(AuditError::EnlargementUncolourable {
            vertex: x,
            colour: c_star,
        })?;
    if f.get(x) != Some(c_star) {
        return Err(AuditError::Invariant(
            "a colouring of the enlarged lists avoids the added colour".into(),
        ));
    }
    let (colouring, surjective) = match saturating_injection(inst) {
        Injection::Saturating(h) => (surjectivize(inst, &f, &h)?, true),
        Injection::Violator { .. } => {
            let surjective = f.used_colours().len() == inst.universe().len();
            (f, surjective)
        }
    };

    let bf = build_bf(inst, &colouring).map_err(TransformError::from)?;
    let s = max_deficiency_set(&bf);
    if s.set.is_empty() {
        return Err(AuditError::Invariant(
            "B_f has a matching saturating the classes of an uncolourable instance".into(),
        ));
    }
    let mut deficiency_classes = Vec::new();
    let mut singletons = Vec::new();
    for &l in &s.set {
        if let LeftNode::Class { colour, members } = &bf.left()[l] {
            deficiency_classes.push(*colour);
            if members.len() == 1 && ps.is_singleton(members[0]) {
                singletons.push(members[0]);
            }
        }
    }
    singletons.sort_unstable();

    let d = derived_quantities(inst);
    let k = inst.k() as i64;
    let union = singletons.iter().fold(0u64, |m, &v| m | inst.mask(v));
    let size = singletons.len() as i64;
    let size_min = k + 1 - d.b as i64 - d.gamma;
    let union_size = union.count_ones() as i64;
    let union_max = 2 * k - inst.availability(c_star).count_ones() as i64;
    Ok(StrongSet {
        c_star,
        enlarged: x,
        colouring,
        surjective,
        deficiency_classes,
        singletons,
        size_bound: Bound {
            value: size,
            bound: size_min,
            holds: size >= size_min,
        },
        union_bound: Bound {
            value: union_size,
            bound: union_max,
            holds: union_size <= union_max,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckStatus {
    Holds,
    Fails,
    Undefined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LedgerCheck {
    pub name: &'static str,
    #[serde(flatten)]
    pub status: CheckStatus,
    pub values: BTreeMap<&'static str, i64>,
}

impl LedgerCheck {
    pub fn holds(&self) -> bool {
        self.status == CheckStatus::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == CheckStatus::Fails
    }
}

/// A ledger quantity, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Quantity<T> {
    Defined(T),
    Undefined { undefined: String },
}

impl<T> Quantity<T> {
    fn undefined(reason: impl Into<String>) -> Self {
        Quantity::Undefined {
            undefined: reason.into(),
        }
    }

    pub fn get(&self) -> Option<&T> {
        match self {
            Quantity::Defined(t) => Some(t),
            Quantity::Undefined { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditLedger {
    pub k: usize,
    pub n: usize,
    pub colours: usize,
    pub gamma: i64,
    pub b: usize,
    pub colourable: bool,
    pub note: Option<String>,
    pub frequency: FrequencyReport,
    /// Non-frequent colour with the largest `|N_B(c)|`, least identifier on ties.
    pub c_star: Quantity<Colour>,
    /// `k - |N_B(c*)|`.
    pub beta: Quantity<i64>,
    pub strong_set: Quantity<StrongSet>,
    /// The `b - 1` colours most common in the lists of `X`.
    pub z: Quantity<Vec<Colour>>,
    /// `N_B(X) - Z`.
    pub y: Quantity<Vec<Colour>>,
    /// Colour of `Y` available to the most vertices of `X`.
    pub c_prime: Quantity<Colour>,
    /// `|N_B(c') ∩ X|`.
    pub c_prime_count: Quantity<i64>,
    pub checks: Vec<LedgerCheck>,
    /// Names of the checks that fail.
    pub failed: Vec<&'static str>,
}

impl AuditLedger {
    pub fn check(&self, name: &str) -> Option<&LedgerCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Uncolourable with lists of size at least `k` on at most `2k+1`
    /// vertices: a counterexample to the theorem.
    pub fn is_counterexample_candidate(&self) -> bool {
        !self.colourable
            && self.check(LISTS_AT_LEAST_K).is_some_and(|c| c.holds())
            && self.check(AT_MOST_2K_PLUS_1).is_some_and(|c| c.holds())
    }

    pub fn all_checks_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds())
    }
}

pub const LISTS_AT_LEAST_K: &str = "lists >= k";
pub const AT_MOST_2K_PLUS_1: &str = "n <= 2k+1";

fn check(name: &'static str, holds: bool, values: &[(&'static str, i64)]) -> LedgerCheck {
    LedgerCheck {
        name,
        status: if holds {
            CheckStatus::Holds
        } else {
            CheckStatus::Fails
        },
        values: values.iter().copied().collect(),
    }
}

fn undefined(name: &'static str, reason: &str) -> LedgerCheck {
    LedgerCheck {
        name,
        status: CheckStatus::Undefined {
            reason: reason.into(),
        },
        values: BTreeMap::new(),
    }
}

/// Evaluates the full ledger. Never fails: quantities whose preconditions
/// do not hold are marked undefined with the reason.
pub fn audit_ledger(inst: &Instance) -> AuditLedger {
    let k = inst.k();
    let n = inst.n();
    let ps = inst.structure();
    let d = derived_quantities(inst);
    let (gamma, b) = (d.gamma, d.b);
    let (ki, ni, bi) = (k as i64, n as i64, b as i64);
    let colourable = decide(inst).is_colourable();
    let report = classify_colours(inst);
    let universe = inst.universe();
    let c_count = universe.len() as i64;
    let avail = |c: Colour| inst.availability(c).count_ones() as i64;

    let c_star = universe
        .iter()
        .copied()
        .filter(|&c| !report.is_frequent(c))
        .max_by(|&a, &b| avail(a).cmp(&avail(b)).then(b.cmp(&a)));
    let c_star_q = match c_star {
        Some(c) => Quantity::Defined(c),
        None => Quantity::undefined("every colour is frequent"),
    };
    let beta = match c_star {
        Some(c) => Quantity::Defined(ki - avail(c)),
        None => Quantity::undefined("c* undefined"),
    };

    let strong = match c_star {
        None => Quantity::undefined("c* undefined"),
        Some(_) if colourable => Quantity::undefined("instance is colourable"),
        Some(c) => match strong_set(inst, c) {
            Ok(s) => Quantity::Defined(s),
            Err(e) => Quantity::undefined(e.to_string()),
        },
    };

    let x_mask = strong
        .get()
        .map(|s| s.singletons.iter().fold(0u64, |m, &v| m | (1 << v)));
    let (z, y, c_prime, c_prime_count) = match (x_mask, b) {
        (None, _) => {
            let r = "X undefined";
            (
                Quantity::undefined(r),
                Quantity::undefined(r),
                Quantity::undefined(r),
                Quantity::undefined(r),
            )
        }
        (Some(_), 0) => {
            let r = "b = 0";
            (
                Quantity::undefined(r),
                Quantity::undefined(r),
                Quantity::undefined(r),
                Quantity::undefined(r),
            )
        }
        (Some(x), _) => {
            let in_x = |c: Colour| (inst.availability(c) & x).count_ones() as i64;
            let mut nx: Vec<Colour> = universe.iter().copied().filter(|&c| in_x(c) > 0).collect();
            // Most common in X first; frequent colours ahead of equally common ones.
            nx.sort_by(|&a, &b| {
                in_x(b)
                    .cmp(&in_x(a))
                    .then(report.is_frequent(b).cmp(&report.is_frequent(a)))
                    .then(a.cmp(&b))
            });
            let take = (b - 1).min(nx.len());
            let mut zs = nx[..take].to_vec();
            let mut ys = nx[take..].to_vec();
            let cp = ys
                .iter()
                .copied()
                .max_by(|&a, &b| in_x(a).cmp(&in_x(b)).then(b.cmp(&a)));
            zs.sort();
            ys.sort();
            (
                Quantity::Defined(zs),
                Quantity::Defined(ys),
                cp.map_or_else(|| Quantity::undefined("Y is empty"), Quantity::Defined),
                cp.map_or_else(
                    || Quantity::undefined("Y is empty"),
                    |c| Quantity::Defined(in_x(c)),
                ),
            )
        }
    };

    let mut checks = Vec::new();
    let min_list = inst.min_list_size() as i64;
    checks.push(check(
        LISTS_AT_LEAST_K,
        min_list >= ki,
        &[("min_list", min_list), ("k", ki)],
    ));
    checks.push(check(
        AT_MOST_2K_PLUS_1,
        ni <= 2 * ki + 1,
        &[("n", ni), ("k", ki)],
    ));
    let common_parts = (0..ps.k())
        .filter(|&p| {
            let r = ps.part_range(p);
            r.len() >= 2 && r.fold(u64::MAX, |m, v| m & inst.mask(v)) != 0
        })
        .count() as i64;
    checks.push(check(
        "parts of size >= 2 have no common colour",
        common_parts == 0,
        &[("parts_with_common_colour", common_parts)],
    ));
    checks.push(check(
        "|C| < n",
        c_count < ni,
        &[("colours", c_count), ("n", ni)],
    ));
    let all = universe.iter().fold(0u64, |m, _| (m << 1) | 1);
    let mut disjoint_pairs = 0i64;
    let mut disjoint_ok = true;
    for u in 0..n {
        for v in u + 1..n {
            if inst.mask(u) & inst.mask(v) == 0 {
                disjoint_pairs += 1;
                disjoint_ok &= inst.mask(u) | inst.mask(v) == all && c_count == 2 * ki;
            }
        }
    }
    checks.push(check(
        "disjoint lists cover C and |C| = 2k",
        disjoint_ok,
        &[
            ("disjoint_pairs", disjoint_pairs),
            ("colours", c_count),
            ("k", ki),
        ],
    ));
    checks.push(check("n = 2k+1", ni == 2 * ki + 1, &[("n", ni), ("k", ki)]));
    let f_count = report.frequent.len() as i64;
    checks.push(check(
        "|F| < b",
        f_count < bi,
        &[("frequent", f_count), ("b", bi)],
    ));
    let singles = d.singletons.len() as i64;
    checks.push(check(
        "singletons >= gamma",
        singles >= gamma,
        &[("singletons", singles), ("gamma", gamma)],
    ));
    checks.push(check(
        "gamma + b <= k",
        gamma + bi <= ki,
        &[("gamma", gamma), ("b", bi), ("k", ki)],
    ));
    let size2 = ps.sizes().iter().filter(|&&s| s == 2).count() as i64;
    checks.push(check(
        "no part of size 2",
        size2 == 0,
        &[("parts_of_size_2", size2)],
    ));
    checks.push(check(
        "2b <= k+1",
        2 * bi <= ki + 1,
        &[("b", bi), ("k", ki)],
    ));
    let fg = report.globally_frequent.len() as i64;
    checks.push(check(
        "|F'|(k+1-b) >= k*gamma",
        fg * (ki + 1 - bi) >= ki * gamma,
        &[
            ("globally_frequent", fg),
            ("k", ki),
            ("b", bi),
            ("gamma", gamma),
        ],
    ));
    checks.push(check(
        "2gamma < k+1-b",
        2 * gamma < ki + 1 - bi,
        &[("gamma", gamma), ("b", bi), ("k", ki)],
    ));
    match strong.get() {
        Some(s) => {
            checks.push(check(
                "|X| >= k+1-b-gamma",
                s.size_bound.holds,
                &[("x", s.size_bound.value), ("bound", s.size_bound.bound)],
            ));
            checks.push(check(
                "|N_B(X)| <= 2k-|N_B(c*)|",
                s.union_bound.holds,
                &[
                    ("union", s.union_bound.value),
                    ("bound", s.union_bound.bound),
                ],
            ));
        }
        None => {
            checks.push(undefined("|X| >= k+1-b-gamma", "X undefined"));
            checks.push(undefined("|N_B(X)| <= 2k-|N_B(c*)|", "X undefined"));
        }
    }
    let slack = ki + 1 - bi - 2 * gamma;
    match (beta.get(), c_prime_count.get()) {
        (Some(&beta), Some(&count)) => {
            let premise = beta <= 2 * slack;
            checks.push(check(
                "beta <= 2(k+1-b-2gamma) implies |N_B(c') ∩ X| >= gamma",
                !premise || count >= gamma,
                &[
                    ("beta", beta),
                    ("slack", slack),
                    ("count", count),
                    ("gamma", gamma),
                ],
            ));
        }
        _ => checks.push(undefined(
            "beta <= 2(k+1-b-2gamma) implies |N_B(c') ∩ X| >= gamma",
            "beta or c' undefined",
        )),
    }
    match beta.get() {
        Some(&beta) => checks.push(check(
            "2beta < k+1-b-2gamma",
            2 * beta < slack,
            &[("beta", beta), ("slack", slack)],
        )),
        None => checks.push(undefined("2beta < k+1-b-2gamma", "beta undefined")),
    }
    let singleton_mask = d.singletons.iter().fold(0u64, |m, &v| m | (1 << v));
    let frequent_missing = report
        .frequent
        .iter()
        .filter(|&&c| inst.availability(c) & singleton_mask != singleton_mask)
        .count() as i64;
    checks.push(check(
        "frequent colours are in every singleton's list",
        frequent_missing == 0,
        &[("frequent_missing_a_singleton", frequent_missing)],
    ));

    let failed = checks
        .iter()
        .filter(|c| c.fails())
        .map(|c| c.name)
        .collect();
    AuditLedger {
        k,
        n,
        colours: universe.len(),
        gamma,
        b,
        colourable,
        note: colourable
            .then(|| "instance colourable: counterexample hypotheses are vacuous".into()),
        frequency: report,
        c_star: c_star_q,
        beta,
        strong_set: strong,
        z,
        y,
        c_prime,
        c_prime_count,
        checks,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(sizes: &[usize], lists: &[&[u32]]) -> Instance {
        Instance::from_parts(sizes, lists).unwrap()
    }

    fn k33_bad() -> Instance {
        inst(
            &[3, 3],
            &[&[1, 2], &[1, 3], &[2, 3], &[1, 2], &[1, 3], &[2, 3]],
        )
    }

    #[test]
    fn saturate_fixed_point_without_room() {
        let i = inst(&[1, 1], &[&[1], &[1]]);
        assert_eq!(saturate(&i).unwrap(), i);
    }

    #[test]
    fn saturate_rejects_colourable() {
        let i = inst(&[1, 1], &[&[1], &[2]]);
        assert_eq!(saturate(&i).unwrap_err(), AuditError::Colourable);
    }

    #[test]
    fn saturate_k33() {
        let s = saturate(&k33_bad()).unwrap();
        assert!(is_maximal_bad(&s));
        assert_eq!(saturate(&s).unwrap(), s);
        assert_eq!(s.universe(), k33_bad().universe());
    }

    #[test]
    fn strong_set_preconditions() {
        let col = inst(&[1, 1], &[&[1], &[2]]);
        assert_eq!(
            strong_set(&col, Colour(1)).unwrap_err(),
            AuditError::Colourable
        );
        let both = inst(&[1, 1], &[&[1], &[1]]);
        assert_eq!(
            strong_set(&both, Colour(1)).unwrap_err(),
            AuditError::NoSingletonMissing(Colour(1))
        );
    }

    #[test]
    fn strong_set_on_sub_threshold_instance() {
        // k = 3 with lists of size 2 on four vertices.
        let i = inst(
            &[1, 2, 2],
            &[&[2, 3], &[2, 3], &[1, 2, 3, 4], &[1, 2, 3, 4], &[2, 3]],
        );
        assert!(is_maximal_bad(&i));
        let x = strong_set(&i, Colour(1)).unwrap();
        assert_eq!(x.enlarged, 0);
        assert_eq!(x.singletons, vec![0]);
        assert!(x.surjective);
        assert_eq!(x.colouring.get(0), Some(Colour(1)));
        // gamma = 1, b = 2: |X| >= 1.
        assert_eq!((x.size_bound.value, x.size_bound.bound), (1, 1));
    }

    #[test]
    fn ledger_k33_fails_size_bound() {
        let l = audit_ledger(&k33_bad());
        assert!(!l.colourable);
        assert!(l.failed.contains(&AT_MOST_2K_PLUS_1));
        assert!(!l.is_counterexample_candidate());
    }

    #[test]
    fn ledger_k11_fails_list_size() {
        let l = audit_ledger(&inst(&[1, 1], &[&[1], &[1]]));
        assert!(l.failed.contains(&LISTS_AT_LEAST_K));
        assert!(!l.is_counterexample_candidate());
    }

    #[test]
    fn ledger_colourable_identical_lists() {
        let l = audit_ledger(&inst(&[3, 3, 1], &[&[1, 2, 3][..]; 7]));
        assert!(l.colourable);
        assert!(l.note.is_some());
        assert_eq!((l.gamma, l.b, l.frequency.frequent.len()), (4, 2, 3));
        // Independent recount from the raw sizes and lists.
        let sizes = [3usize, 3, 1];
        let lists = [[1u32, 2, 3]; 7];
        let k = sizes.len();
        let colours: std::collections::BTreeSet<u32> = lists.iter().flatten().copied().collect();
        let gamma = lists.len() as i64 - colours.len() as i64;
        let b = sizes.iter().filter(|&&s| s >= 2).count();
        let frequent = colours
            .iter()
            .filter(|&&c| lists.iter().filter(|l| l.contains(&c)).count() > k)
            .count();
        assert_eq!(
            (l.gamma, l.b, l.frequency.frequent.len()),
            (gamma, b, frequent)
        );
        let btok = l.check("|F| < b").unwrap();
        assert!(btok.fails());
        assert_eq!(btok.values["frequent"], 3);
        assert_eq!(l.c_star, Quantity::undefined("every colour is frequent"));
        assert!(l.strong_set.get().is_none());
    }

    #[test]
    fn ledger_quantities_on_a_bad_instance() {
        let l = audit_ledger(&k33_bad());
        // Every colour lies in 4 lists > k + 1 = 3: all globally frequent.
        assert_eq!(l.frequency.globally_frequent.len(), 3);
        assert!(l.c_star.get().is_none());
        let ser = serde_json::to_value(&l).unwrap();
        assert!(ser["checks"].as_array().unwrap().len() >= 18);
    }
}
