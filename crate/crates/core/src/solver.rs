//! Exact L-colourability for complete multipartite instances.
//!
//! In a complete multipartite graph every colour class lies inside one part,
//! so an acceptable colouring is the same thing as a choice, for each part,
//! of a set of colours covering that part's lists, with the chosen sets
//! pairwise disjoint across parts. The search commits colours to parts, one
//! part at a time, and memoizes failed `(part, used colours)` states.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{bits, check_colouring, Colouring, Instance, PartStructure};
use crate::matching::matching_size;
use crate::verifier::canonical::{for_each_canonical, EnumerationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Colourable,
    Uncolourable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecideResult {
    pub verdict: Verdict,
    /// Present iff the verdict is [`Verdict::Colourable`].
    pub witness: Option<Colouring>,
    pub nodes_explored: u64,
}

impl DecideResult {
    pub fn is_colourable(&self) -> bool {
        self.verdict == Verdict::Colourable
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Backtrack when the remaining parts cannot be given distinct colours.
    pub hall_pruning: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { hall_pruning: true }
    }
}

pub fn decide(inst: &Instance) -> DecideResult {
    decide_with(inst, SolverConfig::default())
}

pub fn decide_with(inst: &Instance, config: SolverConfig) -> DecideResult {
    let ps = inst.structure();
    let mut order: Vec<usize> = (0..ps.k()).collect();
    order.sort_by_key(|&p| std::cmp::Reverse(ps.sizes()[p]));
    let mut search = Search {
        masks: inst.masks(),
        parts: order.iter().map(|&p| ps.part_range(p).collect()).collect(),
        chosen: vec![0; order.len()],
        failed: HashSet::new(),
        nodes: 0,
        hall: config.hall_pruning,
    };
    if search.solve(0, 0) {
        let mut col = Colouring::uncoloured(inst.n());
        for (d, verts) in search.parts.iter().enumerate() {
            for &v in verts {
                let c = (inst.mask(v) & search.chosen[d]).trailing_zeros() as usize;
                col.set(v, Some(inst.colour_at(c)));
            }
        }
        debug_assert!(check_colouring(inst, &col).is_acceptable_total());
        DecideResult {
            verdict: Verdict::Colourable,
            witness: Some(col),
            nodes_explored: search.nodes,
        }
    } else {
        DecideResult {
            verdict: Verdict::Uncolourable,
            witness: None,
            nodes_explored: search.nodes,
        }
    }
}

struct Search<'a> {
    masks: &'a [u64],
    /// Vertices of each part, parts in branching order.
    parts: Vec<Vec<usize>>,
    chosen: Vec<u64>,
    failed: HashSet<(usize, u64)>,
    nodes: u64,
    hall: bool,
}

impl Search<'_> {
    fn solve(&mut self, depth: usize, used: u64) -> bool {
        self.nodes += 1;
        if depth == self.parts.len() {
            return true;
        }
        if self.failed.contains(&(depth, used)) {
            return false;
        }
        if self.hall && !self.distinct_representatives(depth, used) {
            self.failed.insert((depth, used));
            return false;
        }
        if self.cover(depth, 0, used, 0) {
            return true;
        }
        self.failed.insert((depth, used));
        false
    }

    /// Extends the colour set `chosen` for part `depth` until every vertex of
    /// the part has one of its colours, then moves to the next part.
    fn cover(&mut self, depth: usize, covered: u64, used: u64, chosen: u64) -> bool {
        self.nodes += 1;
        let size = self.parts[depth].len();
        let Some(i) = (0..size).find(|&i| covered & (1 << i) == 0) else {
            self.chosen[depth] = chosen;
            return self.solve(depth + 1, used | chosen);
        };
        let v = self.parts[depth][i];
        for c in bits(self.masks[v] & !used) {
            let now_covered = (0..size).fold(covered, |m, j| {
                if self.masks[self.parts[depth][j]] & (1 << c) != 0 {
                    m | (1 << j)
                } else {
                    m
                }
            });
            if self.cover(depth, now_covered, used, chosen | (1 << c)) {
                return true;
            }
        }
        false
    }

    /// Every remaining part needs a colour of its own. Picks, in each part,
    /// the vertex with fewest unused colours and asks for a matching of
    /// those vertices into the unused colours.
    fn distinct_representatives(&self, depth: usize, used: u64) -> bool {
        let mut reps = Vec::with_capacity(self.parts.len() - depth);
        for part in &self.parts[depth..] {
            let avail = part
                .iter()
                .map(|&v| self.masks[v] & !used)
                .min_by_key(|m| m.count_ones())
                .expect("parts are non-empty");
            if avail == 0 {
                return false;
            }
            reps.push(avail);
        }
        matching_size(&reps) == reps.len()
    }
}

pub const DEFAULT_BRUTE_FORCE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("brute force needs {required} assignments, budget is {budget}")]
pub struct BudgetExceeded {
    pub required: u128,
    pub budget: u128,
}

/// Tries every list-respecting assignment in odometer order.
pub fn brute_force_decide(inst: &Instance, budget: u128) -> Result<DecideResult, BudgetExceeded> {
    let required = (0..inst.n()).fold(1u128, |acc, v| {
        acc.saturating_mul(inst.list(v).len() as u128)
    });
    if required > budget {
        return Err(BudgetExceeded { required, budget });
    }
    let n = inst.n();
    let mut digits = vec![0usize; n];
    let mut nodes = 0u64;
    if required == 0 {
        return Ok(DecideResult {
            verdict: Verdict::Uncolourable,
            witness: None,
            nodes_explored: 0,
        });
    }
    loop {
        nodes += 1;
        let col = Colouring::from_colours((0..n).map(|v| Some(inst.list(v)[digits[v]])).collect());
        if check_colouring(inst, &col).proper {
            return Ok(DecideResult {
                verdict: Verdict::Colourable,
                witness: Some(col),
                nodes_explored: nodes,
            });
        }
        let mut v = n;
        loop {
            if v == 0 {
                return Ok(DecideResult {
                    verdict: Verdict::Uncolourable,
                    witness: None,
                    nodes_explored: nodes,
                });
            }
            v -= 1;
            digits[v] += 1;
            if digits[v] < inst.list(v).len() {
                break;
            }
            digits[v] = 0;
        }
    }
}

#[derive(Debug, Error)]
pub enum ChoosabilityError {
    #[error("every k up to {max_k} admits an uncolourable assignment")]
    MaxKExhausted { max_k: usize },
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

/// Smallest `k` such that every assignment of `k`-lists is colourable.
///
/// For each candidate `k` the canonical `k`-list assignments using at most
/// `n - 1` colours are enumerated. That bound loses nothing: if some bad
/// `k`-assignment exists, then so does one whose union has fewer than `n`
/// colours (peel off Hall violators until a colour-saturating matching
/// exists, then reuse the surviving colours on the peeled vertices).
pub fn list_chromatic_number(ps: &PartStructure, max_k: usize) -> Result<usize, ChoosabilityError> {
    for k in 1..=max_k {
        if is_k_choosable(ps, k)? {
            return Ok(k);
        }
    }
    Err(ChoosabilityError::MaxKExhausted { max_k })
}

/// Whether every `k`-list assignment of `ps` is colourable.
pub fn is_k_choosable(ps: &PartStructure, k: usize) -> Result<bool, EnumerationError> {
    let n = ps.n();
    let budget = n.saturating_sub(1);
    if budget < k {
        // Lists of size >= n always colour greedily.
        return Ok(true);
    }
    let mut all_colourable = true;
    for_each_canonical(ps, k, budget, |inst| {
        if decide(inst).is_colourable() {
            std::ops::ControlFlow::Continue(())
        } else {
            all_colourable = false;
            std::ops::ControlFlow::Break(())
        }
    })?;
    Ok(all_colourable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Colour;
    use proptest::prelude::*;

    fn both(inst: &Instance) -> (Verdict, Verdict) {
        let fast = decide(inst);
        let slow = brute_force_decide(inst, DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
        (fast.verdict, slow.verdict)
    }

    #[test]
    fn single_edge_one_colour() {
        let inst = Instance::from_parts(&[1, 1], &[&[1], &[1]]).unwrap();
        assert_eq!(both(&inst), (Verdict::Uncolourable, Verdict::Uncolourable));
        assert!(decide(&inst).witness.is_none());
    }

    #[test]
    fn classic_k33_is_uncolourable() {
        let l: [&[u32]; 6] = [&[1, 2], &[1, 3], &[2, 3], &[1, 2], &[1, 3], &[2, 3]];
        let inst = Instance::from_parts(&[3, 3], &l).unwrap();
        assert_eq!(both(&inst), (Verdict::Uncolourable, Verdict::Uncolourable));
        // 2^6 assignments tried by the oracle
        assert_eq!(brute_force_decide(&inst, 1000).unwrap().nodes_explored, 64);
    }

    #[test]
    fn identical_lists_colour_by_part() {
        let inst = Instance::from_parts(&[3, 3, 1], &[&[1, 2, 3]; 7]).unwrap();
        let r = decide(&inst);
        assert!(r.is_colourable());
        assert!(check_colouring(&inst, r.witness.as_ref().unwrap()).is_acceptable_total());
    }

    #[test]
    fn brute_force_witness_and_budget() {
        let inst = Instance::from_parts(&[2], &[&[1], &[2]]).unwrap();
        let r = brute_force_decide(&inst, 10).unwrap();
        assert_eq!(r.witness, Some(Colouring::total(&[1, 2])));
        let big = Instance::from_parts(&[1, 1], &[&[1, 2, 3], &[1, 2, 3]]).unwrap();
        assert_eq!(
            brute_force_decide(&big, 8),
            Err(BudgetExceeded {
                required: 9,
                budget: 8
            })
        );
    }

    #[test]
    fn empty_residuals_are_handled() {
        let ps = PartStructure::from_sizes(vec![]);
        let inst = Instance::residual(ps, crate::instance::ListAssignment::new(vec![])).unwrap();
        assert!(decide(&inst).is_colourable());
        let ps = PartStructure::from_sizes(vec![1]);
        let inst =
            Instance::residual(ps, crate::instance::ListAssignment::new(vec![vec![]])).unwrap();
        assert!(!decide(&inst).is_colourable());
    }

    #[test]
    fn small_list_chromatic_numbers() {
        let chi = |s: &[usize]| {
            list_chromatic_number(&PartStructure::new(s.to_vec()).unwrap(), 4).unwrap()
        };
        assert_eq!(chi(&[2, 2]), 2);
        assert_eq!(chi(&[3, 3]), 3);
        assert_eq!(chi(&[2, 4]), 3);
        assert_eq!(chi(&[1, 1]), 2);
        assert_eq!(chi(&[3]), 1);
        assert_eq!(chi(&[1, 5]), 2);
    }

    #[test]
    fn max_k_refusal() {
        let ps = PartStructure::new(vec![3, 3]).unwrap();
        assert!(matches!(
            list_chromatic_number(&ps, 2),
            Err(ChoosabilityError::MaxKExhausted { max_k: 2 })
        ));
    }

    fn arb_instance(
        max_parts: usize,
        max_size: usize,
        colours: u32,
    ) -> impl Strategy<Value = Instance> {
        prop::collection::vec(1..=max_size, 1..=max_parts).prop_flat_map(move |sizes| {
            let n: usize = sizes.iter().sum();
            let lists = prop::collection::vec(prop::collection::btree_set(0..colours, 1..=3), n);
            (Just(sizes), lists).prop_map(|(sizes, lists)| {
                let lists: Vec<Vec<u32>> =
                    lists.into_iter().map(|l| l.into_iter().collect()).collect();
                let refs: Vec<&[u32]> = lists.iter().map(|l| l.as_slice()).collect();
                Instance::from_parts(&sizes, &refs).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn decide_matches_brute_force(inst in arb_instance(4, 3, 5)) {
            let r = decide(&inst);
            let b = brute_force_decide(&inst, DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
            prop_assert_eq!(r.verdict, b.verdict);
            if let Some(w) = &r.witness {
                prop_assert!(check_colouring(&inst, w).is_acceptable_total());
            }
            let plain = decide_with(&inst, SolverConfig { hall_pruning: false });
            prop_assert_eq!(plain.verdict, r.verdict);
        }

        #[test]
        fn adding_a_colour_never_breaks_colourability(
            inst in arb_instance(3, 3, 5), v in 0usize..9, c in 0u32..6,
        ) {
            let v = v % inst.n();
            let bigger = inst.with_colour_added(v, Colour(c));
            if decide(&inst).is_colourable() {
                prop_assert!(decide(&bigger).is_colourable());
            }
        }

        #[test]
        fn trimming_lists_never_helps(inst in arb_instance(3, 3, 5), seed in any::<u64>()) {
            if !decide(&inst).is_colourable() {
                let trimmed: Vec<Vec<Colour>> = (0..inst.n())
                    .map(|v| {
                        let l = inst.list(v);
                        if l.len() > 1 && (seed >> (v % 64)) & 1 == 1 {
                            l[..l.len() - 1].to_vec()
                        } else {
                            l.to_vec()
                        }
                    })
                    .collect();
                let trimmed = inst.with_lists(trimmed).unwrap();
                prop_assert!(!decide(&trimmed).is_colourable());
            }
        }
    }
}
