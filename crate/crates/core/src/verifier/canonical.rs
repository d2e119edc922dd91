//! Canonical enumeration of list assignments up to symmetry.
//!
//! The symmetry group is colour relabelling × permutations of equal-size
//! parts × permutations of vertices within a part. Parts are laid out in
//! non-decreasing size order so that equal-size parts are contiguous.
//!
//! An assignment is encoded as its sequence of lists (vertex order), each list
//! a set of labels `0..`; lists compare lexicographically as sorted tuples.
//! The canonical representative is the least image under the group.
//!
//! For a fixed vertex order, the least colour relabelling is obtained by
//! sorting the label columns of the vertex×label incidence matrix (column
//! vectors read top-down, a present label ranking before an absent one).
//! The canonical form is therefore the minimum, over structure-preserving
//! vertex orders, of the column-sorted matrix.
//!
//! Generation is orderly: vertices receive lists in order, and a prefix is
//! abandoned as soon as it violates a property every canonical
//! representative's prefix has: labels form an initial segment with sorted
//! columns, lists within a part are non-decreasing, and at each part boundary
//! the prefix is the least image under the prefix's own symmetries.

use std::ops::ControlFlow;

use thiserror::Error;

use crate::instance::{Colour, Instance, ListAssignment, PartStructure};

/// Orbit-count estimate above which enumeration is refused.
pub const DEFAULT_ENUMERATION_LIMIT: f64 = 5.0e7;

#[derive(Debug, Error, PartialEq)]
pub enum EnumerationError {
    #[error("lists of size {list_size} need at least that many colours, budget is {budget}")]
    BudgetBelowListSize { list_size: usize, budget: usize },
    #[error("list size must be at least 1")]
    ZeroListSize,
    #[error(
        "enumeration refused: roughly {estimate:.3e} canonical assignments (limit {limit:.1e})"
    )]
    Infeasible { estimate: f64, limit: f64 },
}

/// Canonical part layout: sizes in non-decreasing order.
pub fn canonical_structure(ps: &PartStructure) -> PartStructure {
    let mut sizes = ps.sizes().to_vec();
    sizes.sort_unstable();
    PartStructure::new(sizes).expect("sizes come from a valid structure")
}

/// `a < b` in list order: the least label of the symmetric difference lies in `a`.
#[inline]
pub fn list_less(a: u64, b: u64) -> bool {
    let d = a ^ b;
    d != 0 && a & (d & d.wrapping_neg()) != 0
}

#[cfg(test)]
fn sequence_less(a: &[u64], b: &[u64]) -> bool {
    for (&x, &y) in a.iter().zip(b) {
        if x != y {
            return list_less(x, y);
        }
    }
    false
}

/// A compact key for a canonical assignment: list masks in hex.
pub fn assignment_key(lists: &[u64]) -> String {
    lists
        .iter()
        .map(|m| format!("{m:x}"))
        .collect::<Vec<_>>()
        .join(".")
}

/// Builds the instance for an assignment over the given (canonical) structure.
pub fn assignment_instance(structure: &PartStructure, lists: &[u64]) -> Instance {
    let lists = lists
        .iter()
        .map(|&m| crate::instance::bits(m).map(|l| Colour(l as u32)).collect())
        .collect();
    Instance::new(structure.clone(), ListAssignment::new(lists))
        .expect("canonical assignments are valid instances")
}

/// The stream of canonical representatives for one structure.
#[derive(Debug, Clone)]
pub struct CanonicalEnumeration {
    /// The structure in canonical (non-decreasing) part order; all emitted
    /// assignments index vertices by this layout.
    pub structure: PartStructure,
    pub list_size: usize,
    pub colour_budget: usize,
    /// Each assignment as per-vertex label masks.
    pub assignments: Vec<Vec<u64>>,
}

impl CanonicalEnumeration {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = Instance> + '_ {
        self.assignments
            .iter()
            .map(|a| assignment_instance(&self.structure, a))
    }
}

/// Collects one representative per symmetry class of `k`-list assignments
/// using at most `budget` colours.
pub fn canonical_assignments(
    ps: &PartStructure,
    k: usize,
    budget: usize,
) -> Result<CanonicalEnumeration, EnumerationError> {
    let generator = Generator::new(ps, k, budget)?;
    let mut assignments = Vec::new();
    generator.run(|lists| {
        assignments.push(lists.to_vec());
        ControlFlow::Continue(())
    });
    Ok(CanonicalEnumeration {
        structure: generator.structure.clone(),
        list_size: k,
        colour_budget: budget,
        assignments,
    })
}

/// Streams canonical representatives as instances until `visit` breaks.
pub fn for_each_canonical(
    ps: &PartStructure,
    k: usize,
    budget: usize,
    mut visit: impl FnMut(&Instance) -> ControlFlow<()>,
) -> Result<(), EnumerationError> {
    let generator = Generator::new(ps, k, budget)?;
    let structure = generator.structure.clone();
    generator.run(|lists| visit(&assignment_instance(&structure, lists)));
    Ok(())
}

/// Streams canonical representatives as raw label masks.
pub fn for_each_canonical_masks(
    ps: &PartStructure,
    k: usize,
    budget: usize,
    visit: impl FnMut(&[u64]) -> ControlFlow<()>,
) -> Result<PartStructure, EnumerationError> {
    let generator = Generator::new(ps, k, budget)?;
    generator.run(visit);
    Ok(generator.structure)
}

fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

struct Generator {
    structure: PartStructure,
    n: usize,
    /// All `k`-subsets of `0..budget`, in list order.
    subsets: Vec<u64>,
    /// Part index of each vertex position.
    part_of: Vec<usize>,
    /// Whether position `i` closes its part.
    closes_part: Vec<bool>,
    /// For each part `j`: the non-identity structure-preserving orders of
    /// the vertices of parts `0..=j`, as position -> source vertex.
    arrangements: Vec<Vec<Vec<u8>>>,
}

impl Generator {
    fn new(ps: &PartStructure, k: usize, budget: usize) -> Result<Self, EnumerationError> {
        if k == 0 {
            return Err(EnumerationError::ZeroListSize);
        }
        if budget < k {
            return Err(EnumerationError::BudgetBelowListSize {
                list_size: k,
                budget,
            });
        }
        let structure = canonical_structure(ps);
        let n = structure.n();
        let budget = budget.min(n * k).min(64);
        let group = structure
            .sizes()
            .iter()
            .map(|&s| factorial(s))
            .product::<f64>()
            * equal_part_blocks(structure.sizes())
                .iter()
                .map(|b| factorial(b.len()))
                .product::<f64>();
        let estimate = binomial(budget, k).powi(n as i32) / (factorial(budget) * group);
        if estimate > DEFAULT_ENUMERATION_LIMIT || n > 24 {
            return Err(EnumerationError::Infeasible {
                estimate,
                limit: DEFAULT_ENUMERATION_LIMIT,
            });
        }

        let mut subsets: Vec<u64> = (0u64..1 << budget)
            .filter(|m| m.count_ones() as usize == k)
            .collect();
        subsets.sort_by(|&a, &b| {
            if a == b {
                std::cmp::Ordering::Equal
            } else if list_less(a, b) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        });

        let part_of: Vec<usize> = (0..n).map(|v| structure.part_of(v)).collect();
        let closes_part = (0..n)
            .map(|v| v + 1 == n || part_of[v + 1] != part_of[v])
            .collect();
        let arrangements = (0..structure.k())
            .map(|j| prefix_arrangements(&structure, j))
            .collect();
        Ok(Self {
            structure,
            n,
            subsets,
            part_of,
            closes_part,
            arrangements,
        })
    }

    fn run(&self, mut visit: impl FnMut(&[u64]) -> ControlFlow<()>) {
        let mut lists = vec![0u64; self.n];
        let mut index = vec![0usize; self.n];
        let mut keys = [0u64; 64];
        let _ = self.extend(0, 0, &mut lists, &mut index, &mut keys, &mut visit);
    }

    fn extend(
        &self,
        pos: usize,
        used: usize,
        lists: &mut [u64],
        index: &mut [usize],
        keys: &mut [u64; 64],
        visit: &mut impl FnMut(&[u64]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if pos == self.n {
            return visit(lists);
        }
        let start = if pos > 0 && self.part_of[pos - 1] == self.part_of[pos] {
            index[pos - 1]
        } else {
            0
        };
        let bit = 1u64 << (63 - pos);
        for (i, &list) in self.subsets.iter().enumerate().skip(start) {
            // New labels must continue the initial segment 0..used.
            let fresh = list >> used;
            if fresh & (fresh + 1) != 0 {
                continue;
            }
            let now_used = used + fresh.count_ones() as usize;
            for l in crate::instance::bits(list) {
                keys[l] |= bit;
            }
            let columns_sorted = keys[..now_used].windows(2).all(|w| w[0] >= w[1]);
            if columns_sorted {
                lists[pos] = list;
                index[pos] = i;
                let keep = !self.closes_part[pos]
                    || self.prefix_is_least(self.part_of[pos], &lists[..=pos], now_used);
                if keep {
                    self.extend(pos + 1, now_used, lists, index, keys, visit)?;
                }
            }
            for l in crate::instance::bits(list) {
                keys[l] &= !bit;
            }
        }
        ControlFlow::Continue(())
    }

    /// No rearrangement of the prefix, followed by its best relabelling,
    /// is smaller than the prefix itself.
    fn prefix_is_least(&self, part: usize, prefix: &[u64], used: usize) -> bool {
        let mut keys = [0u64; 64];
        for arrangement in &self.arrangements[part] {
            keys[..used].fill(0);
            for (pos, &src) in arrangement.iter().enumerate() {
                let bit = 1u64 << (63 - pos);
                for l in crate::instance::bits(prefix[src as usize]) {
                    keys[l] |= bit;
                }
            }
            keys[..used].sort_unstable_by(|a, b| b.cmp(a));
            for (pos, &current) in prefix.iter().enumerate() {
                let shift = 63 - pos;
                let row = keys[..used]
                    .iter()
                    .enumerate()
                    .fold(0u64, |m, (j, key)| m | (((key >> shift) & 1) << j));
                if row != current {
                    if list_less(row, current) {
                        return false;
                    }
                    break;
                }
            }
        }
        true
    }
}

/// Runs of equal-size parts, as part-index lists.
fn equal_part_blocks(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (p, &s) in sizes.iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if sizes[b[0]] == s => b.push(p),
            _ => blocks.push(vec![p]),
        }
    }
    blocks
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Non-identity vertex orders of parts `0..=last` that map parts onto
/// equal-size parts and permute vertices within parts.
fn prefix_arrangements(ps: &PartStructure, last: usize) -> Vec<Vec<u8>> {
    let sizes = &ps.sizes()[..=last];
    // Choices of which source part fills each slot.
    let mut part_maps: Vec<Vec<usize>> = vec![vec![]];
    for block in equal_part_blocks(sizes) {
        let perms = permutations(&block);
        part_maps = part_maps
            .into_iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut m = prefix.clone();
                    m.extend(p);
                    m
                })
            })
            .collect();
    }
    let within: Vec<Vec<Vec<usize>>> = sizes
        .iter()
        .map(|&s| permutations(&(0..s).collect::<Vec<_>>()))
        .collect();
    let identity: Vec<u8> = (0..ps.part_range(last).end as u8).collect();
    let mut out = Vec::new();
    for part_map in part_maps {
        let mut orders: Vec<Vec<u8>> = vec![vec![]];
        for (slot, &src) in part_map.iter().enumerate() {
            let base = ps.part_range(src).start;
            orders = orders
                .into_iter()
                .flat_map(|prefix| {
                    within[slot].iter().map(move |perm| {
                        let mut o = prefix.clone();
                        o.extend(perm.iter().map(|&i| (base + i) as u8));
                        o
                    })
                })
                .collect();
        }
        out.extend(orders.into_iter().filter(|o| *o != identity));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn count(sizes: &[usize], k: usize, budget: usize) -> usize {
        canonical_assignments(&PartStructure::new(sizes.to_vec()).unwrap(), k, budget)
            .unwrap()
            .len()
    }

    #[test]
    fn list_order_matches_sorted_tuples() {
        assert!(list_less(0b101, 0b110)); // {0,2} < {1,2}
        assert!(list_less(0b1001, 0b0110)); // {0,3} < {1,2}
        assert!(!list_less(0b11, 0b11));
    }

    #[test]
    fn two_vertex_examples() {
        assert_eq!(count(&[1, 1], 1, 2), 2);
        assert_eq!(count(&[2], 1, 2), 2);
    }

    #[test]
    fn budget_below_list_size_is_refused() {
        let ps = PartStructure::new(vec![2, 2]).unwrap();
        assert_eq!(
            canonical_assignments(&ps, 3, 2).unwrap_err(),
            EnumerationError::BudgetBelowListSize {
                list_size: 3,
                budget: 2
            }
        );
    }

    #[test]
    fn huge_enumerations_are_refused() {
        let ps = PartStructure::new(vec![4, 4, 4, 4]).unwrap();
        assert!(matches!(
            canonical_assignments(&ps, 4, 8),
            Err(EnumerationError::Infeasible { .. })
        ));
    }

    #[test]
    fn structure_is_canonicalized() {
        let e = canonical_assignments(&PartStructure::new(vec![3, 1]).unwrap(), 1, 1).unwrap();
        assert_eq!(e.structure.sizes(), &[1, 3]);
    }

    /// Brute-force canonical form: least image over the explicit group.
    fn brute_canonical(ps: &PartStructure, lists: &[u64], budget: usize) -> Vec<u64> {
        let n = ps.n();
        let colour_perms = permutations(&(0..budget).collect::<Vec<_>>());
        let mut vertex_orders = prefix_arrangements(ps, ps.k() - 1);
        vertex_orders.push((0..n as u8).collect());
        let mut best: Option<Vec<u64>> = None;
        for sigma in &colour_perms {
            for order in &vertex_orders {
                let image: Vec<u64> = order
                    .iter()
                    .map(|&src| {
                        crate::instance::bits(lists[src as usize])
                            .fold(0u64, |m, l| m | (1 << sigma[l]))
                    })
                    .collect();
                if best.as_ref().is_none_or(|b| sequence_less(&image, b)) {
                    best = Some(image);
                }
            }
        }
        best.unwrap()
    }

    fn all_raw(n: usize, k: usize, budget: usize) -> Vec<Vec<u64>> {
        let subsets: Vec<u64> = (0u64..1 << budget)
            .filter(|m| m.count_ones() as usize == k)
            .collect();
        let mut out = vec![vec![]];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p: Vec<u64>| {
                    subsets.iter().map(move |&s| {
                        let mut q = p.clone();
                        q.push(s);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn check_against_brute_force(sizes: &[usize], k: usize, budget: usize) {
        let ps = PartStructure::new(sizes.to_vec()).unwrap();
        let e = canonical_assignments(&ps, k, budget).unwrap();
        let emitted: HashSet<Vec<u64>> = e.assignments.iter().cloned().collect();
        assert_eq!(emitted.len(), e.len(), "duplicates emitted");
        let expected: HashSet<Vec<u64>> = all_raw(ps.n(), k, budget)
            .iter()
            .map(|raw| brute_canonical(&e.structure, raw, budget))
            .collect();
        assert_eq!(emitted, expected, "{sizes:?} k={k} budget={budget}");
    }

    #[test]
    fn matches_brute_force_canonical_forms() {
        check_against_brute_force(&[1, 1], 1, 2);
        check_against_brute_force(&[1, 1], 2, 4);
        check_against_brute_force(&[2], 2, 4);
        check_against_brute_force(&[1, 2], 2, 4);
        check_against_brute_force(&[2, 2], 2, 3);
        check_against_brute_force(&[1, 1, 1], 2, 4);
        check_against_brute_force(&[3], 2, 4);
        check_against_brute_force(&[1, 3], 2, 4);
    }

    #[test]
    fn arrangement_counts() {
        let ps = PartStructure::new(vec![1, 1, 3]).unwrap();
        assert_eq!(prefix_arrangements(&ps, 0).len(), 0);
        assert_eq!(prefix_arrangements(&ps, 1).len(), 1);
        assert_eq!(prefix_arrangements(&ps, 2).len(), 2 * 6 - 1);
    }
}
