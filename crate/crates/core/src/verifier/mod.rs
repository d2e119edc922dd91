//! Exhaustive verification that complete `k`-partite graphs on at most
//! `2k+1` vertices are `k`-choosable, and the search for non-choosable
//! structures just above that size.
//!
//! Work proceeds by increasing number of parts, then vertices, so that the
//! common-colour pruning rule only ever relies on structures already
//! verified in the same run: colouring a part with a colour common to its
//! lists leaves a `(k-1)`-partite instance on at most `2(k-1)+1` vertices
//! with lists of size at least `k-1`.

pub mod cache;
pub mod canonical;

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::instance::{Instance, InstanceFile, PartStructure};
use crate::solver::{
    brute_force_decide, decide, BudgetExceeded, Verdict, DEFAULT_BRUTE_FORCE_BUDGET,
};
use crate::transforms::{extend_reduction, reduce_common_colour};

pub use cache::{CacheError, CacheRecord, VerdictCache};
pub use canonical::{
    assignment_instance, assignment_key, canonical_assignments, canonical_structure,
    for_each_canonical, for_each_canonical_masks, CanonicalEnumeration, EnumerationError,
};

#[derive(Debug, Clone)]
pub struct VerificationConfig {
    /// Hard cap on the number of colours; combined with the rule below.
    pub colour_budget: Option<usize>,
    /// Enumerate at most `2k` colours: a minimal bad assignment uses fewer
    /// colours than its `2k+1` vertices.
    pub colour_budget_rule: bool,
    /// Skip assignments in which some part of size at least two has a
    /// colour common to all its lists.
    pub common_colour_rule: bool,
    /// Enumerate only structures with exactly `2k+1` vertices.
    pub maximal_order_rule: bool,
    pub workers: usize,
    /// Stop and mark the report partial once exceeded.
    pub time_budget: Option<Duration>,
    /// Colour every pruned assignment through the common-colour reduction.
    pub audit_pruned: bool,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            colour_budget: None,
            colour_budget_rule: true,
            common_colour_rule: true,
            maximal_order_rule: false,
            workers: 1,
            time_budget: None,
            audit_pruned: false,
        }
    }
}

impl VerificationConfig {
    /// Every rule off: all structures, all assignments, `n·k` colours.
    pub fn without_pruning() -> Self {
        Self {
            colour_budget_rule: false,
            common_colour_rule: false,
            maximal_order_rule: false,
            ..Self::default()
        }
    }

    /// Colour budget used for `k`-lists on `n` vertices.
    pub fn budget_for(&self, k: usize, n: usize) -> usize {
        let rule = if self.colour_budget_rule {
            2 * k
        } else {
            n * k
        };
        self.colour_budget.map_or(rule, |b| b.min(rule))
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub parts: Vec<usize>,
    pub k: usize,
    pub colour_budget: usize,
    /// Canonical assignments in the enumeration.
    pub canonical: usize,
    /// Assignments processed: `pruned_common_colour + decided`.
    pub enumerated: usize,
    pub pruned_common_colour: usize,
    pub decided: usize,
    pub colourable: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub key: String,
    pub instance: InstanceFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub wall_time_ms: u128,
    pub cache_hits: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub k: usize,
    pub partial: bool,
    pub structures: Vec<StructureReport>,
    /// Uncolourable assignments; empty whenever the theorem holds.
    pub failures: Vec<Failure>,
    /// Pruned assignments the common-colour reduction failed to colour.
    pub pruned_audit_failures: Vec<Failure>,
    /// Timing and cache statistics; not part of the deterministic result.
    pub run: RunStats,
}

impl VerificationReport {
    /// The report as JSON without the `run` statistics.
    pub fn deterministic_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("reports serialize");
        value
            .as_object_mut()
            .expect("reports serialize to objects")
            .remove("run");
        serde_json::to_string_pretty(&value).expect("values serialize")
    }

    pub fn is_verified(&self) -> bool {
        !self.partial && self.failures.is_empty() && self.pruned_audit_failures.is_empty()
    }
}

/// All structures with `k' <= k` parts and `k' <= n <= 2k'+1` vertices, in
/// verification order (by parts, then vertices, then sizes).
pub fn ohba_structures(k: usize, maximal_order_only: bool) -> Vec<PartStructure> {
    let mut out = Vec::new();
    for parts in 1..=k {
        let lo = if maximal_order_only {
            2 * parts + 1
        } else {
            parts
        };
        for n in lo..=2 * parts + 1 {
            for sizes in partitions(n, parts) {
                out.push(PartStructure::new(sizes).expect("partitions have positive parts"));
            }
        }
    }
    out
}

/// Partitions of `n` into exactly `parts` positive sizes, non-decreasing.
fn partitions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, parts: usize, min: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if n == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for s in min..=n / parts {
            cur.push(s);
            go(n - s, parts - 1, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, parts, 1, &mut Vec::new(), &mut out);
    out
}

/// Verifies every structure of [`ohba_structures`] with lists of size equal
/// to its number of parts.
pub fn verify_ohba(
    k: usize,
    config: &VerificationConfig,
    cache: &mut VerdictCache,
) -> Result<VerificationReport, VerifyError> {
    if k == 0 {
        return Err(VerifyError::ZeroK);
    }
    let structures = ohba_structures(k, config.maximal_order_rule);
    verify_structures(k, &structures, config, cache)
}

/// Verifies the given structures, each with lists of size equal to its
/// number of parts, in the order given.
pub fn verify_structures(
    k: usize,
    structures: &[PartStructure],
    config: &VerificationConfig,
    cache: &mut VerdictCache,
) -> Result<VerificationReport, VerifyError> {
    let start = Instant::now();
    let deadline = config.time_budget.map(|d| start + d);
    let workers = config.workers.max(1);
    let mut report = VerificationReport {
        k,
        partial: false,
        structures: Vec::new(),
        failures: Vec::new(),
        pruned_audit_failures: Vec::new(),
        run: RunStats {
            wall_time_ms: 0,
            cache_hits: 0,
            workers,
        },
    };
    for ps in structures {
        let parts = ps.k();
        let budget = config.budget_for(parts, ps.n());
        let enumeration = canonical_assignments(ps, parts, budget)?;
        let structure = &enumeration.structure;
        let sizes = structure.sizes().to_vec();
        let mut entry = StructureReport {
            parts: sizes.clone(),
            k: parts,
            colour_budget: budget,
            canonical: enumeration.len(),
            enumerated: 0,
            pruned_common_colour: 0,
            decided: 0,
            colourable: 0,
            complete: false,
        };
        if deadline.is_some_and(|d| Instant::now() >= d) {
            report.partial = true;
            report.structures.push(entry);
            continue;
        }

        let mut pending = Vec::new();
        let mut verdicts: Vec<Option<Verdict>> = vec![None; enumeration.len()];
        let mut pruned = vec![false; enumeration.len()];
        for (i, lists) in enumeration.assignments.iter().enumerate() {
            if config.common_colour_rule && has_common_colour(structure, lists) {
                pruned[i] = true;
                if config.audit_pruned {
                    let inst = assignment_instance(structure, lists);
                    let ok = reduce_common_colour(&inst)
                        .is_some_and(|step| extend_reduction(&inst, &step).is_ok());
                    if !ok {
                        report.pruned_audit_failures.push(Failure {
                            key: assignment_key(lists),
                            instance: inst.to_file(),
                        });
                    }
                }
            } else if let Some(v) = cache.get(&sizes, &assignment_key(lists)) {
                verdicts[i] = Some(v);
                report.run.cache_hits += 1;
            } else {
                pending.push(i);
            }
        }

        let decided = decide_parallel(
            structure,
            &enumeration.assignments,
            &pending,
            workers,
            deadline,
        );
        let mut records = Vec::new();
        for (i, v) in decided {
            verdicts[i] = Some(v);
            records.push(CacheRecord {
                parts: sizes.clone(),
                key: assignment_key(&enumeration.assignments[i]),
                verdict: v,
            });
        }
        cache.extend(records)?;

        entry.complete = true;
        for (i, lists) in enumeration.assignments.iter().enumerate() {
            if pruned[i] {
                entry.pruned_common_colour += 1;
                continue;
            }
            match verdicts[i] {
                None => entry.complete = false,
                Some(v) => {
                    entry.decided += 1;
                    if v == Verdict::Colourable {
                        entry.colourable += 1;
                    } else {
                        report.failures.push(Failure {
                            key: assignment_key(lists),
                            instance: assignment_instance(structure, lists).to_file(),
                        });
                    }
                }
            }
        }
        entry.enumerated = entry.pruned_common_colour + entry.decided;
        report.partial |= !entry.complete;
        report.structures.push(entry);
    }
    report.run.wall_time_ms = start.elapsed().as_millis();
    Ok(report)
}

fn has_common_colour(structure: &PartStructure, lists: &[u64]) -> bool {
    (0..structure.k()).any(|p| {
        let range = structure.part_range(p);
        range.len() >= 2 && range.fold(u64::MAX, |m, v| m & lists[v]) != 0
    })
}

/// Decides the `pending` assignments, returning verdicts in index order.
/// Units not reached before the deadline are omitted.
fn decide_parallel(
    structure: &PartStructure,
    assignments: &[Vec<u64>],
    pending: &[usize],
    workers: usize,
    deadline: Option<Instant>,
) -> Vec<(usize, Verdict)> {
    let stop = AtomicBool::new(false);
    let run = |chunk: &[usize]| {
        let mut out = Vec::with_capacity(chunk.len());
        for &i in chunk {
            if stop.load(Ordering::Relaxed) {
                break;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                stop.store(true, Ordering::Relaxed);
                break;
            }
            let inst = assignment_instance(structure, &assignments[i]);
            out.push((i, decide(&inst).verdict));
        }
        out
    };
    if workers == 1 || pending.len() < 2 * workers {
        return run(pending);
    }
    let chunk = pending.len().div_ceil(workers);
    let mut merged: Vec<(usize, Verdict)> = std::thread::scope(|s| {
        let handles: Vec<_> = pending
            .chunks(chunk)
            .map(|c| s.spawn(move || run(c)))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("verification worker panicked"))
            .collect()
    });
    merged.sort_by_key(|&(i, _)| i);
    merged
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    BruteForce(#[from] BudgetExceeded),
    #[error("brute force finds a colouring for witness {key}")]
    Disagreement { key: String },
}

/// Every canonical uncolourable `k`-list assignment of `ps` with fewer
/// colours than vertices. If any bad `k`-assignment exists, one of these
/// does too, so an empty result means `ps` is `k`-choosable.
pub fn search_non_choosable(ps: &PartStructure, k: usize) -> Result<Vec<Instance>, SearchError> {
    let budget = ps.n().saturating_sub(1);
    if budget < k {
        return Ok(Vec::new());
    }
    search_non_choosable_with(ps, k, budget)
}

/// Like [`search_non_choosable`] with an explicit colour budget. Every
/// witness is re-checked by brute force.
pub fn search_non_choosable_with(
    ps: &PartStructure,
    k: usize,
    budget: usize,
) -> Result<Vec<Instance>, SearchError> {
    let canonical = canonical_structure(ps);
    let mut witnesses = Vec::new();
    let structure = for_each_canonical_masks(ps, k, budget, |lists| {
        let inst = assignment_instance(&canonical, lists);
        if !decide(&inst).is_colourable() {
            witnesses.push(lists.to_vec());
        }
        std::ops::ControlFlow::Continue(())
    })?;
    witnesses
        .into_iter()
        .map(|lists| {
            let inst = assignment_instance(&structure, &lists);
            if brute_force_decide(&inst, DEFAULT_BRUTE_FORCE_BUDGET)?.is_colourable() {
                return Err(SearchError::Disagreement {
                    key: assignment_key(&lists),
                });
            }
            Ok(inst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn ps(sizes: &[usize]) -> PartStructure {
        PartStructure::new(sizes.to_vec()).unwrap()
    }

    #[test]
    fn partitions_listed() {
        assert_eq!(partitions(5, 2), vec![vec![1, 4], vec![2, 3]]);
        assert_eq!(partitions(3, 3), vec![vec![1, 1, 1]]);
        assert!(partitions(2, 3).is_empty());
    }

    #[test]
    fn structures_for_k2() {
        let all: Vec<_> = ohba_structures(2, false)
            .iter()
            .map(|p| p.sizes().to_vec())
            .collect();
        assert_eq!(
            all,
            vec![
                vec![1],
                vec![2],
                vec![3],
                vec![1, 1],
                vec![1, 2],
                vec![1, 3],
                vec![2, 2],
                vec![1, 4],
                vec![2, 3],
            ]
        );
        let top: Vec<_> = ohba_structures(2, true)
            .iter()
            .map(|p| p.sizes().to_vec())
            .collect();
        assert_eq!(top, vec![vec![3], vec![1, 4], vec![2, 3]]);
    }

    #[test]
    fn k1_everything_colourable() {
        let r = verify_ohba(
            1,
            &VerificationConfig::default(),
            &mut VerdictCache::in_memory(),
        )
        .unwrap();
        assert!(r.is_verified());
        assert_eq!(r.structures.len(), 3);
        for s in &r.structures {
            assert_eq!(s.enumerated, s.pruned_common_colour + s.decided);
            assert_eq!(s.enumerated, s.canonical);
        }
    }

    #[test]
    fn k2_pruned_and_unpruned_agree() {
        let mut cfg = VerificationConfig {
            audit_pruned: true,
            ..Default::default()
        };
        let on = verify_ohba(2, &cfg, &mut VerdictCache::in_memory()).unwrap();
        assert!(on.is_verified());
        assert!(on.structures.iter().any(|s| s.pruned_common_colour > 0));
        cfg = VerificationConfig::without_pruning();
        let off = verify_ohba(2, &cfg, &mut VerdictCache::in_memory()).unwrap();
        assert!(off.is_verified());
        assert_eq!(on.failures, off.failures);
        assert!(off.structures.iter().all(|s| s.pruned_common_colour == 0));
    }

    #[test]
    fn warm_cache_gives_identical_report() {
        let mut cache = VerdictCache::in_memory();
        let cfg = VerificationConfig::default();
        let cold = verify_ohba(2, &cfg, &mut cache).unwrap();
        assert_eq!(cold.run.cache_hits, 0);
        let warm = verify_ohba(2, &cfg, &mut cache).unwrap();
        assert!(warm.run.cache_hits > 0);
        assert_eq!(cold.deterministic_json(), warm.deterministic_json());
    }

    #[test]
    fn workers_do_not_change_the_report() {
        let one = verify_ohba(
            2,
            &VerificationConfig::default(),
            &mut VerdictCache::in_memory(),
        )
        .unwrap();
        let cfg = VerificationConfig {
            workers: 4,
            ..Default::default()
        };
        let four = verify_ohba(2, &cfg, &mut VerdictCache::in_memory()).unwrap();
        assert_eq!(one.deterministic_json(), four.deterministic_json());
    }

    #[test]
    fn zero_time_budget_is_partial() {
        let cfg = VerificationConfig {
            time_budget: Some(Duration::ZERO),
            ..Default::default()
        };
        let r = verify_ohba(2, &cfg, &mut VerdictCache::in_memory()).unwrap();
        assert!(r.partial);
        assert!(!r.is_verified());
    }

    /// Canonical classes times orbit sizes must add up to every raw
    /// assignment of `k`-subsets of `budget` colours.
    fn orbit_count(sizes: &[usize], k: usize, budget: usize) -> (u64, u64) {
        let structure = ps(sizes);
        let n = structure.n();
        let reps = canonical_assignments(&structure, k, budget).unwrap();
        let colour_perms = permutations(budget);
        let vertex_perms: Vec<Vec<usize>> = permutations(n)
            .into_iter()
            .filter(|p| (0..n).all(|v| structure.part_of(v) == structure.part_of(p[v])))
            .collect();
        let mut total = 0u64;
        for lists in &reps.assignments {
            let mut orbit = HashSet::new();
            for cp in &colour_perms {
                for vp in &vertex_perms {
                    let image: Vec<u64> = (0..n)
                        .map(|v| {
                            let m = lists[vp[v]];
                            (0..budget)
                                .filter(|&l| m >> l & 1 == 1)
                                .fold(0u64, |acc, l| acc | 1 << cp[l])
                        })
                        .collect();
                    orbit.insert(image);
                }
            }
            total += orbit.len() as u64;
        }
        let subsets = (0..1u64 << budget)
            .filter(|m| m.count_ones() as usize == k)
            .count() as u64;
        (total, subsets.pow(n as u32))
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn orbit_counting_matches_raw_totals() {
        for sizes in [&[1, 1][..], &[2][..]] {
            for k in 1..=2 {
                for budget in k..=4 {
                    let (orbits, raw) = orbit_count(sizes, k, budget);
                    assert_eq!(orbits, raw, "{sizes:?} k={k} budget={budget}");
                }
            }
        }
    }

    #[test]
    fn tightness_search() {
        assert!(!search_non_choosable(&ps(&[3, 3]), 2).unwrap().is_empty());
        assert!(!search_non_choosable(&ps(&[2, 4]), 2).unwrap().is_empty());
        assert!(search_non_choosable(&ps(&[1, 5]), 2).unwrap().is_empty());
    }

    #[test]
    fn k33_witness_pattern() {
        // {1,2},{1,3},{2,3} on both sides, up to relabelling.
        let found = search_non_choosable(&ps(&[3, 3]), 2).unwrap();
        assert!(found.iter().any(|inst| {
            let side: HashSet<u64> = (0..3).map(|v| inst.mask(v)).collect();
            let other: HashSet<u64> = (3..6).map(|v| inst.mask(v)).collect();
            side.len() == 3 && side == other && inst.universe().len() == 3
        }));
    }
}
