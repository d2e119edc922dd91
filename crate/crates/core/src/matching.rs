//! Bipartite availability graphs, maximum matchings and deficiency sets.
//!
//! Right-hand sides are held as 64-bit adjacency masks, so a graph may have at
//! most 64 right nodes. Left sides are unbounded.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{bits, is_proper, Colour, Colouring, Instance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftNode {
    Vertex(usize),
    /// A colour class of some colouring: its colour and its members.
    Class {
        colour: Colour,
        members: Vec<usize>,
    },
}

impl LeftNode {
    pub fn members(&self) -> &[usize] {
        match self {
            LeftNode::Vertex(v) => std::slice::from_ref(v),
            LeftNode::Class { members, .. } => members,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvailabilityGraph {
    left: Vec<LeftNode>,
    right: Vec<Colour>,
    adjacency: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("colouring is not total")]
    NotTotal,
    #[error("colouring is not proper")]
    NotProper,
    #[error("colouring has {found} entries, instance has {expected} vertices")]
    Length { expected: usize, found: usize },
}

impl AvailabilityGraph {
    /// Builds a graph from explicit adjacency lists over right indices
    /// `0..right_count`. Right node `j` is labelled `Colour(j)`.
    pub fn from_adjacency(right_count: usize, adjacency: &[Vec<usize>]) -> Self {
        assert!(right_count <= 64, "at most 64 right nodes");
        Self {
            left: (0..adjacency.len()).map(LeftNode::Vertex).collect(),
            right: (0..right_count as u32).map(Colour).collect(),
            adjacency: adjacency
                .iter()
                .map(|adj| {
                    adj.iter().fold(0u64, |m, &j| {
                        assert!(j < right_count, "right index out of range");
                        m | (1 << j)
                    })
                })
                .collect(),
        }
    }

    pub fn left(&self) -> &[LeftNode] {
        &self.left
    }

    pub fn right(&self) -> &[Colour] {
        &self.right
    }

    pub fn left_count(&self) -> usize {
        self.left.len()
    }

    pub fn adjacency(&self, left: usize) -> u64 {
        self.adjacency[left]
    }

    pub fn adjacency_masks(&self) -> &[u64] {
        &self.adjacency
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.adjacency[left] & (1 << right) != 0
    }

    /// Union of the adjacencies of the given left nodes.
    pub fn neighbourhood(&self, set: &[usize]) -> u64 {
        set.iter().fold(0, |m, &l| m | self.adjacency[l])
    }

    /// The same graph with the given right nodes deleted (their edges removed).
    pub fn without_right(&self, removed: u64) -> Self {
        Self {
            left: self.left.clone(),
            right: self.right.clone(),
            adjacency: self.adjacency.iter().map(|m| m & !removed).collect(),
        }
    }

    /// The subgraph induced by a subset of left nodes (in the given order).
    pub fn restrict_left(&self, keep: &[usize]) -> Self {
        Self {
            left: keep.iter().map(|&l| self.left[l].clone()).collect(),
            right: self.right.clone(),
            adjacency: keep.iter().map(|&l| self.adjacency[l]).collect(),
        }
    }
}

/// `B`: each vertex joined to the colours of its list.
pub fn build_b(inst: &Instance) -> AvailabilityGraph {
    AvailabilityGraph {
        left: (0..inst.n()).map(LeftNode::Vertex).collect(),
        right: inst.universe().to_vec(),
        adjacency: inst.masks().to_vec(),
    }
}

/// `B_f`: each colour class of `f` joined to the colours common to all of
/// its members' lists. Classes appear in colour order.
pub fn build_bf(inst: &Instance, f: &Colouring) -> Result<AvailabilityGraph, MatchingError> {
    if f.len() != inst.n() {
        return Err(MatchingError::Length {
            expected: inst.n(),
            found: f.len(),
        });
    }
    if !f.is_total() {
        return Err(MatchingError::NotTotal);
    }
    if !is_proper(inst, f) {
        return Err(MatchingError::NotProper);
    }
    let mut left = Vec::new();
    let mut adjacency = Vec::new();
    for (colour, members) in f.classes() {
        adjacency.push(members.iter().fold(u64::MAX, |m, &v| m & inst.mask(v)));
        left.push(LeftNode::Class { colour, members });
    }
    Ok(AvailabilityGraph {
        left,
        right: inst.universe().to_vec(),
        adjacency,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    /// `(left, right)` pairs sorted by left index.
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    pub fn partner_of_left(&self, left: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == left).map(|p| p.1)
    }

    /// Every pair is an edge and no node repeats.
    pub fn is_valid_in(&self, g: &AvailabilityGraph) -> bool {
        let mut lefts = 0u128;
        let mut rights = 0u64;
        self.pairs.iter().all(|&(l, r)| {
            let fresh = l < 128 && lefts & (1 << l) == 0 && rights & (1 << r) == 0;
            lefts |= 1u128.checked_shl(l as u32).unwrap_or(0);
            rights |= 1 << r;
            fresh && g.has_edge(l, r)
        })
    }

    pub fn saturates_left(&self, g: &AvailabilityGraph) -> bool {
        self.size() == g.left_count()
    }
}

/// Matching state shared by the matching and deficiency routines.
struct Matcher<'a> {
    adjacency: &'a [u64],
    left_to_right: Vec<Option<usize>>,
    right_to_left: [Option<usize>; 64],
}

impl<'a> Matcher<'a> {
    fn run(adjacency: &'a [u64]) -> Self {
        let mut m = Self {
            adjacency,
            left_to_right: vec![None; adjacency.len()],
            right_to_left: [None; 64],
        };
        for l in 0..adjacency.len() {
            let mut visited = 0u64;
            m.augment(l, &mut visited);
        }
        m
    }

    fn augment(&mut self, l: usize, visited: &mut u64) -> bool {
        for r in bits(self.adjacency[l] & !*visited) {
            *visited |= 1 << r;
            let free = match self.right_to_left[r] {
                None => true,
                Some(other) => self.augment(other, visited),
            };
            if free {
                self.left_to_right[l] = Some(r);
                self.right_to_left[r] = Some(l);
                return true;
            }
        }
        false
    }

    fn matching(&self) -> Matching {
        Matching {
            pairs: self
                .left_to_right
                .iter()
                .enumerate()
                .filter_map(|(l, r)| r.map(|r| (l, r)))
                .collect(),
        }
    }

    /// Left and right nodes reachable by alternating paths from the given
    /// unmatched left nodes.
    fn alternating_closure(&self, starts: impl IntoIterator<Item = usize>) -> (Vec<bool>, u64) {
        let mut left_seen = vec![false; self.adjacency.len()];
        let mut right_seen = 0u64;
        let mut stack: Vec<usize> = starts.into_iter().collect();
        for &l in &stack {
            left_seen[l] = true;
        }
        while let Some(l) = stack.pop() {
            for r in bits(self.adjacency[l] & !right_seen) {
                right_seen |= 1 << r;
                let partner =
                    self.right_to_left[r].expect("a maximum matching has no augmenting path");
                if !left_seen[partner] {
                    left_seen[partner] = true;
                    stack.push(partner);
                }
            }
        }
        (left_seen, right_seen)
    }

    fn unmatched_left(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.adjacency.len()).filter(|&l| self.left_to_right[l].is_none())
    }
}

/// Maximum-cardinality matching by augmenting paths, left nodes in index
/// order and right nodes in index order.
pub fn max_matching(g: &AvailabilityGraph) -> Matching {
    Matcher::run(&g.adjacency).matching()
}

/// Size of a maximum matching over raw adjacency masks.
pub(crate) fn matching_size(adjacency: &[u64]) -> usize {
    Matcher::run(adjacency)
        .left_to_right
        .iter()
        .filter(|r| r.is_some())
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeficiencySet {
    /// Left indices, ascending.
    pub set: Vec<usize>,
    /// `N(S)` as right indices, ascending.
    pub neighbourhood: Vec<usize>,
    pub deficiency: usize,
    /// A matching of `left - S` into `right - N(S)` saturating `left - S`.
    pub complement_matching: Matching,
}

impl DeficiencySet {
    pub fn contains(&self, left: usize) -> bool {
        self.set.binary_search(&left).is_ok()
    }

    pub fn neighbourhood_mask(&self) -> u64 {
        self.neighbourhood.iter().fold(0, |m, &r| m | (1 << r))
    }
}

/// A left set maximizing `|S| - |N(S)|`.
///
/// Computed from the deterministic maximum matching: `S` is everything
/// reachable by alternating paths from unmatched left nodes. The matched
/// partners of `left - S` all lie outside `N(S)`, which gives the
/// complement matching directly.
pub fn max_deficiency_set(g: &AvailabilityGraph) -> DeficiencySet {
    let m = Matcher::run(&g.adjacency);
    let (left_seen, right_seen) = m.alternating_closure(m.unmatched_left().collect::<Vec<_>>());
    let set: Vec<usize> = (0..g.left_count()).filter(|&l| left_seen[l]).collect();
    let neighbourhood: Vec<usize> = bits(right_seen).collect();
    let complement_matching = Matching {
        pairs: m
            .matching()
            .pairs
            .into_iter()
            .filter(|(l, _)| !left_seen[*l])
            .collect(),
    };
    debug_assert!(complement_matching
        .pairs
        .iter()
        .all(|&(_, r)| right_seen & (1 << r) == 0));
    DeficiencySet {
        deficiency: set.len() - neighbourhood.len(),
        set,
        neighbourhood,
        complement_matching,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// `h`: each colour sent to a distinct vertex whose list contains it.
    Saturating(BTreeMap<Colour, usize>),
    /// A colour set `T` with `|N_B(T)| = |T| - 1`.
    Violator {
        colours: Vec<Colour>,
        neighbourhood: Vec<usize>,
        /// The colour of `T` left unmatched by the maximum matching.
        root: Colour,
        /// The remaining colours of `T` matched onto `N_B(T)`.
        matched: BTreeMap<Colour, usize>,
    },
}

/// Matches colours to distinct vertices whose lists contain them, or returns
/// a Hall violator: the alternating-path closure of the least unmatched
/// colour.
pub fn saturating_injection(inst: &Instance) -> Injection {
    assert!(inst.n() <= 64);
    let adjacency: Vec<u64> = inst
        .universe()
        .iter()
        .map(|&c| inst.availability(c))
        .collect();
    let m = Matcher::run(&adjacency);
    let colour = |i: usize| inst.colour_at(i);
    let first_unmatched = m.unmatched_left().next();
    match first_unmatched {
        None => Injection::Saturating(
            m.left_to_right
                .iter()
                .enumerate()
                .map(|(i, v)| (colour(i), v.expect("all colours matched")))
                .collect(),
        ),
        Some(root) => {
            let (left_seen, right_seen) = m.alternating_closure([root]);
            let colours: Vec<Colour> = (0..adjacency.len())
                .filter(|&i| left_seen[i])
                .map(colour)
                .collect();
            let matched = (0..adjacency.len())
                .filter(|&i| left_seen[i] && i != root)
                .map(|i| (colour(i), m.left_to_right[i].expect("closure is matched")))
                .collect();
            Injection::Violator {
                colours,
                neighbourhood: bits(right_seen).collect(),
                root: colour(root),
                matched,
            }
        }
    }
}
