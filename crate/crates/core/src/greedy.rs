//! Three-phase construction of a near-acceptable colouring from `k`
//! frequent colours.
//!
//! Phase 1 colours as many vertices as possible (then as many parts as
//! possible) with the non-frequent colours. Phase 2 gives each remaining part
//! remainder, largest first, its own frequent colour while one is available
//! to the whole remainder. Phase 3 spreads what is left over the unused
//! frequent colours, or splits a pair off the first part when there are too
//! few of them.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{bits, Colour, Colouring, Instance};
use crate::transforms::{classify_colours, is_near_acceptable, FrequencyReport};

/// Largest number of distinct covered-vertex sets phase 1 will track.
pub const PHASE1_STATE_LIMIT: usize = 1 << 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GreedyError {
    #[error("only {found} frequent colours, at least {needed} required")]
    TooFewFrequent { found: usize, needed: usize },
    #[error("instance is outside the supported shape: {failed:?}")]
    NotProofShaped { failed: Vec<String> },
    #[error("phase 1 search exceeded {limit} states")]
    Phase1Budget { limit: usize },
    #[error("construction invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyMode {
    /// Requires the supported shape and treats every failed step as a bug.
    #[default]
    Strict,
    /// Runs on any instance; a failed step is reported in the trace.
    BestEffort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase3Mode {
    Injection,
    PairSplit,
}

/// The shape under which the construction is guaranteed to succeed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShapeCheck {
    pub name: &'static str,
    pub holds: bool,
}

pub fn proof_shape(inst: &Instance, report: &FrequencyReport) -> Vec<ShapeCheck> {
    let k = inst.k();
    let ps = inst.structure();
    let pairs_disjoint = (0..ps.k()).filter(|&p| ps.sizes()[p] == 2).all(|p| {
        let r = ps.part_range(p);
        inst.mask(r.start) & inst.mask(r.start + 1) == 0
    });
    vec![
        ShapeCheck {
            name: "n = 2k+1",
            holds: inst.n() == 2 * k + 1,
        },
        ShapeCheck {
            name: "lists >= k",
            holds: inst.min_list_size() >= k,
        },
        ShapeCheck {
            name: "|F| >= k",
            holds: report.frequent.len() >= k,
        },
        ShapeCheck {
            name: "|C| <= 2k",
            holds: inst.universe().len() <= 2 * k,
        },
        ShapeCheck {
            name: "parts of size 2 have disjoint lists",
            holds: pairs_disjoint,
        },
    ]
}

pub fn is_proof_shaped(inst: &Instance, report: &FrequencyReport) -> bool {
    proof_shape(inst, report).iter().all(|c| c.holds)
}

/// The `k` frequent colours with the largest `|N_B(c)|`, ties by least colour.
pub fn choose_frequent(report: &FrequencyReport) -> Option<Vec<Colour>> {
    if report.frequent.len() < report.k {
        return None;
    }
    let mut f = report.frequent.clone();
    f.sort_by_key(|c| std::cmp::Reverse(report.availability[c]));
    f.truncate(report.k);
    f.sort();
    Some(f)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Phase1 {
    /// `V1`, ascending.
    pub covered: Vec<usize>,
    /// `f1`, defined exactly on `V1`.
    pub colouring: Colouring,
    pub parts_hit: usize,
}

/// An acceptable partial colouring with colours outside `frequent`,
/// covering as many vertices as possible and, subject to that, as many parts.
///
/// A colour class lies inside one part, and giving a colour every uncovered
/// vertex of its part that accepts it never hurts, so the search is over
/// maps from colours to parts (or to nothing). Ties in the objective go to
/// the numerically least covered-vertex mask.
pub fn phase1_max_partial(inst: &Instance, frequent: &[Colour]) -> Result<Phase1, GreedyError> {
    let ps = inst.structure();
    let others: Vec<Colour> = inst
        .universe()
        .iter()
        .copied()
        .filter(|c| !frequent.contains(c))
        .collect();

    // layers[i]: covered mask -> (previous mask, part chosen for colour i - 1)
    let mut layers: Vec<BTreeMap<u64, (u64, Option<usize>)>> =
        vec![BTreeMap::from([(0, (0, None))])];
    for &c in &others {
        let avail = inst.availability(c);
        let prev = layers.last().expect("non-empty");
        let mut next: BTreeMap<u64, (u64, Option<usize>)> = BTreeMap::new();
        for &mask in prev.keys() {
            next.entry(mask).or_insert((mask, None));
            for p in 0..ps.k() {
                let add = avail & ps.part_mask(p);
                if add != 0 {
                    next.entry(mask | add).or_insert((mask, Some(p)));
                }
            }
        }
        if next.len() > PHASE1_STATE_LIMIT {
            return Err(GreedyError::Phase1Budget {
                limit: PHASE1_STATE_LIMIT,
            });
        }
        layers.push(next);
    }

    let parts_hit = |mask: u64| (0..ps.k()).filter(|&p| mask & ps.part_mask(p) != 0).count();
    let best = *layers
        .last()
        .expect("non-empty")
        .keys()
        .max_by(|&&a, &&b| {
            (a.count_ones(), parts_hit(a))
                .cmp(&(b.count_ones(), parts_hit(b)))
                .then(b.cmp(&a))
        })
        .expect("the empty colouring is always present");

    let mut choice = vec![None; others.len()];
    let mut mask = best;
    for i in (0..others.len()).rev() {
        let (prev, part) = layers[i + 1][&mask];
        choice[i] = part;
        mask = prev;
    }

    let mut colouring = Colouring::uncoloured(inst.n());
    for v in bits(best) {
        let p = ps.part_of(v);
        let c = others
            .iter()
            .zip(&choice)
            .find(|(c, part)| **part == Some(p) && inst.has_colour(v, **c))
            .map(|(c, _)| *c)
            .expect("covered vertices have a covering colour");
        colouring.set(v, Some(c));
    }
    Ok(Phase1 {
        covered: bits(best).collect(),
        colouring,
        parts_hit: parts_hit(best),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GreedyTrace {
    /// The `k` frequent colours used.
    pub frequent: Vec<Colour>,
    pub phase1: Phase1,
    /// Parts in processing order, `|R_P|` non-increasing.
    pub part_order: Vec<usize>,
    /// `|R_P|` for each part in processing order.
    pub remainder_sizes: Vec<usize>,
    /// Number of parts coloured in phase 2.
    pub stop_index: usize,
    pub v2: Vec<usize>,
    pub v3: Vec<usize>,
    /// Frequent colours unused after phase 2.
    pub unused: Vec<Colour>,
    pub phase3_mode: Option<Phase3Mode>,
    /// For a pair split: the colour and the two vertices sharing it.
    pub pair: Option<(Colour, usize, usize)>,
    /// Claims checked along the way (only on inputs of the supported shape).
    pub claims_checked: Vec<String>,
    pub colouring: Option<Colouring>,
    /// Why best-effort mode gave up.
    pub failure: Option<String>,
}

pub fn three_phase(inst: &Instance, mode: GreedyMode) -> Result<GreedyTrace, GreedyError> {
    let report = classify_colours(inst);
    let k = inst.k();
    let n = inst.n();
    let ps = inst.structure();
    let Some(frequent) = choose_frequent(&report) else {
        return Err(GreedyError::TooFewFrequent {
            found: report.frequent.len(),
            needed: k,
        });
    };
    let shape = proof_shape(inst, &report);
    let shaped = shape.iter().all(|c| c.holds);
    if mode == GreedyMode::Strict && !shaped {
        return Err(GreedyError::NotProofShaped {
            failed: shape
                .iter()
                .filter(|c| !c.holds)
                .map(|c| c.name.to_string())
                .collect(),
        });
    }
    let mut claims = Vec::new();
    let check = |claims: &mut Vec<String>, name: &str, holds: bool| -> Result<(), GreedyError> {
        if !shaped {
            return Ok(());
        }
        if !holds {
            return Err(GreedyError::Invariant(format!("claim failed: {name}")));
        }
        claims.push(name.to_string());
        Ok(())
    };

    let phase1 = phase1_max_partial(inst, &frequent)?;
    let v1_mask = phase1.covered.iter().fold(0u64, |m, &v| m | (1 << v));
    let v1 = phase1.covered.len();

    // A part of size two missing V1 forces |V1| >= k+1, after which the
    // remaining vertices fit injectively into F.
    for p in 0..ps.k() {
        if ps.sizes()[p] == 2 && ps.part_mask(p) & v1_mask == 0 {
            check(
                &mut claims,
                "size-2 part missing V1 implies |V1| >= k+1",
                v1 > k,
            )?;
        }
    }

    let remainder = |p: usize| ps.part_mask(p) & !v1_mask;
    let mut part_order: Vec<usize> = (0..ps.k()).collect();
    part_order.sort_by_key(|&p| std::cmp::Reverse(remainder(p).count_ones()));
    let remainder_sizes: Vec<usize> = part_order
        .iter()
        .map(|&p| remainder(p).count_ones() as usize)
        .collect();
    if remainder_sizes.windows(2).any(|w| w[0] < w[1]) {
        return Err(GreedyError::Invariant(
            "phase 2 order is not non-increasing".into(),
        ));
    }

    let mut colouring = phase1.colouring.clone();
    let mut unused: Vec<Colour> = frequent.clone();
    let mut v2 = Vec::new();
    let mut stop_index = ps.k();
    for (i, &p) in part_order.iter().enumerate() {
        let r = remainder(p);
        if r == 0 {
            continue;
        }
        let common = bits(r).fold(u64::MAX, |m, v| m & inst.mask(v));
        let Some(pos) = unused
            .iter()
            .position(|&c| common & (1 << inst.colour_index(c).expect("in C")) != 0)
        else {
            stop_index = i;
            break;
        };
        let c = unused.remove(pos);
        for v in bits(r) {
            colouring.set(v, Some(c));
            v2.push(v);
        }
    }
    v2.sort_unstable();
    let v3: Vec<usize> = part_order[stop_index.min(part_order.len())..]
        .iter()
        .flat_map(|&p| bits(remainder(p)))
        .collect();
    let mut v3 = v3;
    v3.sort_unstable();

    let mut trace = GreedyTrace {
        frequent: frequent.clone(),
        phase1,
        part_order: part_order.clone(),
        remainder_sizes,
        stop_index,
        v2,
        v3: v3.clone(),
        unused: unused.clone(),
        phase3_mode: None,
        pair: None,
        claims_checked: Vec::new(),
        colouring: None,
        failure: None,
    };

    if !v3.is_empty() {
        check(&mut claims, "|U| = k - i", unused.len() == k - stop_index)?;
        if v3.len() <= unused.len() {
            trace.phase3_mode = Some(Phase3Mode::Injection);
            for (&v, &c) in v3.iter().zip(&unused) {
                colouring.set(v, Some(c));
            }
        } else {
            trace.phase3_mode = Some(Phase3Mode::PairSplit);
            let i = stop_index;
            let next = part_order[i];
            check(
                &mut claims,
                "|R_{P_{i+1}}| >= 2",
                remainder(next).count_ones() >= 2,
            )?;
            check(&mut claims, "|V1| = k - i", v1 == k - i)?;
            check(
                &mut claims,
                "V1 misses P_{i+1}",
                ps.part_mask(next) & v1_mask == 0,
            )?;
            check(&mut claims, "i = 0", i == 0)?;
            check(&mut claims, "|V3| = k + 1", v3.len() == k + 1)?;

            let first = remainder(next);
            let pair = unused.iter().find_map(|&c| {
                let avail = inst.availability(c) & first;
                let mut it = bits(avail);
                Some((c, it.next()?, it.next()?))
            });
            check(
                &mut claims,
                "a frequent colour is available to two vertices of P_1",
                pair.is_some(),
            )?;
            match pair {
                Some((c, u, v)) if v3.len() - 2 < unused.len() => {
                    trace.pair = Some((c, u, v));
                    colouring.set(u, Some(c));
                    colouring.set(v, Some(c));
                    let rest = unused.iter().filter(|&&d| d != c);
                    for (&w, &d) in v3.iter().filter(|&&w| w != u && w != v).zip(rest) {
                        colouring.set(w, Some(d));
                    }
                }
                Some(_) => {
                    trace.failure = Some(format!(
                        "{} vertices left for {} frequent colours after the pair split",
                        v3.len() - 2,
                        unused.len() - 1
                    ));
                }
                None => {
                    trace.failure = Some(
                        "no unused frequent colour is available to two vertices of the first \
                         stuck part"
                            .into(),
                    );
                }
            }
        }
    }
    trace.claims_checked = claims;

    if let Some(failure) = &trace.failure {
        return match mode {
            GreedyMode::BestEffort => Ok(trace),
            GreedyMode::Strict => Err(GreedyError::Invariant(failure.clone())),
        };
    }
    debug_assert!(colouring.is_total(), "{n} vertices");
    let near = is_near_acceptable(inst, &colouring, &report)
        .map_err(|e| GreedyError::Invariant(format!("final colouring: {e}")))?;
    if !near.near_acceptable {
        return Err(GreedyError::Invariant(format!(
            "final colouring is not near-acceptable at {:?}",
            near.violations
        )));
    }
    trace.colouring = Some(colouring);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::check_colouring;
    use crate::transforms::convert_near_acceptable;
    use proptest::prelude::*;

    fn inst(sizes: &[usize], lists: &[&[u32]]) -> Instance {
        Instance::from_parts(sizes, lists).unwrap()
    }

    #[test]
    fn identical_lists() {
        let i = inst(&[3, 3, 1], &[&[1, 2, 3][..]; 7]);
        let t = three_phase(&i, GreedyMode::BestEffort).unwrap();
        assert!(t.phase1.covered.is_empty());
        assert_eq!(t.frequent, vec![Colour(1), Colour(2), Colour(3)]);
        assert!(t.v3.is_empty());
        let f = t.colouring.unwrap();
        assert!(check_colouring(&i, &f).is_acceptable_total());
        assert_eq!(f, Colouring::total(&[1, 1, 1, 2, 2, 2, 3]));
    }

    #[test]
    fn pair_split_ending() {
        let i = inst(
            &[3, 1, 3],
            &[
                &[2, 3, 4],
                &[1, 2, 5],
                &[2, 4, 5],
                &[1, 2, 3, 4],
                &[3, 4, 5],
                &[1, 2, 4],
                &[2, 3, 5],
            ],
        );
        let t = three_phase(&i, GreedyMode::Strict).unwrap();
        assert_eq!(t.phase3_mode, Some(Phase3Mode::PairSplit));
        assert_eq!(t.stop_index, 0);
        assert_eq!(t.phase1.covered.len(), 3);
        assert_eq!(t.v3.len(), 4);
        assert_eq!(t.pair, Some((Colour(2), 5, 6)));
        assert!(t.claims_checked.iter().any(|c| c == "i = 0"));
        let f = t.colouring.unwrap();
        let out = convert_near_acceptable(&i, &f).unwrap();
        assert!(check_colouring(&i, &out.colouring).is_acceptable_total());
    }

    #[test]
    fn too_few_frequent_colours() {
        let i = inst(&[1, 1], &[&[1, 2], &[3, 4]]);
        assert_eq!(
            three_phase(&i, GreedyMode::BestEffort).unwrap_err(),
            GreedyError::TooFewFrequent {
                found: 0,
                needed: 2
            }
        );
    }

    #[test]
    fn strict_mode_rejects_other_shapes() {
        let i = inst(&[3, 3], &[&[1, 2][..]; 6]);
        let err = three_phase(&i, GreedyMode::Strict).unwrap_err();
        let GreedyError::NotProofShaped { failed } = err else {
            panic!("{err:?}")
        };
        assert_eq!(failed, vec!["n = 2k+1".to_string()]);
    }

    #[test]
    fn phase1_empty_without_other_colours() {
        let i = inst(&[1, 2], &[&[1, 2], &[1, 2], &[1, 2]]);
        let p = phase1_max_partial(&i, &[Colour(1), Colour(2)]).unwrap();
        assert!(p.covered.is_empty());
    }

    #[test]
    fn phase1_single_colour_covers_a_part() {
        let i = inst(&[1, 2], &[&[1, 2], &[1, 3], &[2, 3]]);
        let p = phase1_max_partial(&i, &[Colour(1), Colour(2)]).unwrap();
        assert_eq!(p.covered, vec![1, 2]);
        assert_eq!(p.colouring.get(1), Some(Colour(3)));
        assert_eq!(p.colouring.get(2), Some(Colour(3)));
    }

    /// All acceptable partial colourings avoiding `frequent`: best
    /// `(|V1|, parts hit)`.
    fn brute_phase1(i: &Instance, frequent: &[Colour]) -> (usize, usize) {
        let ps = i.structure();
        fn go(
            i: &Instance,
            frequent: &[Colour],
            v: usize,
            col: &mut Vec<Option<Colour>>,
            best: &mut (usize, usize),
        ) {
            if v == i.n() {
                let ps = i.structure();
                let count = col.iter().filter(|c| c.is_some()).count();
                let parts = (0..ps.k())
                    .filter(|&p| ps.part_range(p).any(|u| col[u].is_some()))
                    .count();
                *best = (*best).max((count, parts));
                return;
            }
            col[v] = None;
            go(i, frequent, v + 1, col, best);
            for &c in i.list(v) {
                if frequent.contains(&c) {
                    continue;
                }
                if (0..v).any(|u| col[u] == Some(c) && i.structure().adjacent(u, v)) {
                    continue;
                }
                col[v] = Some(c);
                go(i, frequent, v + 1, col, best);
            }
            col[v] = None;
        }
        let mut best = (0, 0);
        let _ = ps;
        go(i, frequent, 0, &mut vec![None; i.n()], &mut best);
        best
    }

    fn arb_small() -> impl Strategy<Value = Instance> {
        (1usize..=3)
            .prop_flat_map(|k| (prop::collection::vec(1usize..=3, k), Just(5u32)))
            .prop_filter("n <= 7", |(s, _)| s.iter().sum::<usize>() <= 7)
            .prop_flat_map(|(sizes, colours)| {
                let n: usize = sizes.iter().sum();
                let lists =
                    prop::collection::vec(prop::collection::btree_set(1..=colours, 1..=3), n);
                (Just(sizes), lists)
            })
            .prop_map(|(sizes, lists)| {
                let lists: Vec<Vec<u32>> =
                    lists.into_iter().map(|l| l.into_iter().collect()).collect();
                Instance::from_parts(&sizes, &lists).unwrap()
            })
    }

    proptest! {
        #[test]
        fn phase1_is_optimal(i in arb_small(), pick in 0usize..4) {
            let frequent: Vec<Colour> = i.universe().iter().copied().skip(pick).step_by(2).collect();
            let p = phase1_max_partial(&i, &frequent).unwrap();
            prop_assert_eq!((p.covered.len(), p.parts_hit), brute_phase1(&i, &frequent));
            let verdict = check_colouring(&i, &p.colouring);
            prop_assert!(verdict.acceptable);
            prop_assert!(p.colouring.used_colours().iter().all(|c| !frequent.contains(c)));
        }

        #[test]
        fn best_effort_output_converts(i in arb_small()) {
            if let Ok(t) = three_phase(&i, GreedyMode::BestEffort) {
                if let Some(f) = t.colouring {
                    let report = classify_colours(&i);
                    prop_assert!(is_near_acceptable(&i, &f, &report).unwrap().near_acceptable);
                    if i.n() <= 2 * i.k() + 1 && i.min_list_size() >= i.k() {
                        let out = convert_near_acceptable(&i, &f).unwrap();
                        prop_assert!(check_colouring(&i, &out.colouring).is_acceptable_total());
                    }
                }
            }
        }
    }
}
