//! Complete multipartite list-colouring instances, colourings and their checks.
//!
//! A complete multipartite graph is stored only as its ordered part sizes;
//! adjacency is derived (two vertices are adjacent iff they lie in different
//! parts). Vertices are numbered `0..n` part by part in the given order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported vertex count and colour universe. Both sides of every
/// availability graph are held in 64-bit masks.
pub const MAX_VERTICES: usize = 64;
pub const MAX_COLOURS: usize = 64;

/// An opaque colour identifier. Only equality and the least-identifier
/// tie-break are ever used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Colour(pub u32);

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for Colour {
    fn from(value: u32) -> Self {
        Colour(value)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("instance has no parts")]
    NoParts,
    #[error("part {part} is empty")]
    EmptyPart { part: usize },
    #[error("expected {expected} lists (one per vertex), found {found}")]
    ListCount { expected: usize, found: usize },
    #[error("vertex {vertex} has an empty list")]
    EmptyList { vertex: usize },
    #[error("{what} {found} exceeds the supported maximum of {max}")]
    TooLarge {
        what: &'static str,
        found: usize,
        max: usize,
    },
    #[error("colouring has {found} entries but the instance has {expected} vertices")]
    ColouringLength { expected: usize, found: usize },
}

/// The complete k-partite graph, as an ordered list of part sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    part_of: Vec<usize>,
}

impl PartStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self, InstanceError> {
        if sizes.is_empty() {
            return Err(InstanceError::NoParts);
        }
        if let Some(part) = sizes.iter().position(|&s| s == 0) {
            return Err(InstanceError::EmptyPart { part });
        }
        Ok(Self::from_sizes(sizes))
    }

    /// Builds a structure without the `k >= 1` check; residual graphs of a
    /// reduction may be empty. Zero-size parts are still dropped.
    pub(crate) fn from_sizes(sizes: Vec<usize>) -> Self {
        let sizes: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut part_of = Vec::new();
        for (p, &s) in sizes.iter().enumerate() {
            offsets.push(part_of.len());
            part_of.extend(std::iter::repeat_n(p, s));
        }
        Self {
            sizes,
            offsets,
            part_of,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of parts.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.part_of.len()
    }

    pub fn part_of(&self, v: usize) -> usize {
        self.part_of[v]
    }

    pub fn part_range(&self, p: usize) -> std::ops::Range<usize> {
        self.offsets[p]..self.offsets[p] + self.sizes[p]
    }

    /// Vertex mask of part `p`.
    pub fn part_mask(&self, p: usize) -> u64 {
        self.part_range(p).fold(0, |m, v| m | (1 << v))
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.part_of[u] != self.part_of[v]
    }

    pub fn is_singleton(&self, v: usize) -> bool {
        self.sizes[self.part_of[v]] == 1
    }

    /// All vertices lying in parts of size one.
    pub fn singletons(&self) -> Vec<usize> {
        (0..self.n()).filter(|&v| self.is_singleton(v)).collect()
    }

    /// Number of parts of size at least two.
    pub fn non_singleton_parts(&self) -> usize {
        self.sizes.iter().filter(|&&s| s >= 2).count()
    }
}

/// Per-vertex colour lists and their union.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ListAssignment {
    lists: Vec<Vec<Colour>>,
    universe: Vec<Colour>,
}

impl ListAssignment {
    /// Lists are treated as sets: each is sorted and deduplicated.
    pub fn new(lists: Vec<Vec<Colour>>) -> Self {
        let lists: Vec<Vec<Colour>> = lists
            .into_iter()
            .map(|l| l.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        let universe = lists
            .iter()
            .flatten()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self { lists, universe }
    }

    pub fn lists(&self) -> &[Vec<Colour>] {
        &self.lists
    }

    pub fn list(&self, v: usize) -> &[Colour] {
        &self.lists[v]
    }

    /// The colour universe `C`, sorted.
    pub fn universe(&self) -> &[Colour] {
        &self.universe
    }
}

/// A complete multipartite graph together with a list assignment.
///
/// Alongside the lists the instance keeps, per vertex, a bitmask over the
/// dense colour indices `0..|C|` (index order is identifier order).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    structure: PartStructure,
    assignment: ListAssignment,
    masks: Vec<u64>,
}

impl Instance {
    pub fn new(
        structure: PartStructure,
        assignment: ListAssignment,
    ) -> Result<Self, InstanceError> {
        if structure.k() == 0 {
            return Err(InstanceError::NoParts);
        }
        if let Some(vertex) = assignment.lists.iter().position(|l| l.is_empty()) {
            return Err(InstanceError::EmptyList { vertex });
        }
        Self::build(structure, assignment)
    }

    /// Convenience constructor from raw sizes and lists.
    pub fn from_parts<L: AsRef<[u32]>>(
        sizes: &[usize],
        lists: &[L],
    ) -> Result<Self, InstanceError> {
        let structure = PartStructure::new(sizes.to_vec())?;
        let lists = lists
            .iter()
            .map(|l| l.as_ref().iter().map(|&c| Colour(c)).collect())
            .collect();
        Self::new(structure, ListAssignment::new(lists))
    }

    /// Like [`Instance::new`] but admits empty lists and an empty graph.
    /// Used for the residual of a reduction step.
    pub(crate) fn residual(
        structure: PartStructure,
        assignment: ListAssignment,
    ) -> Result<Self, InstanceError> {
        Self::build(structure, assignment)
    }

    fn build(structure: PartStructure, assignment: ListAssignment) -> Result<Self, InstanceError> {
        let n = structure.n();
        if assignment.lists.len() != n {
            return Err(InstanceError::ListCount {
                expected: n,
                found: assignment.lists.len(),
            });
        }
        if n > MAX_VERTICES {
            return Err(InstanceError::TooLarge {
                what: "vertex count",
                found: n,
                max: MAX_VERTICES,
            });
        }
        if assignment.universe.len() > MAX_COLOURS {
            return Err(InstanceError::TooLarge {
                what: "colour count",
                found: assignment.universe.len(),
                max: MAX_COLOURS,
            });
        }
        let masks = assignment
            .lists
            .iter()
            .map(|l| {
                l.iter().fold(0u64, |m, c| {
                    let i = assignment
                        .universe
                        .binary_search(c)
                        .expect("universe is the union");
                    m | (1 << i)
                })
            })
            .collect();
        Ok(Self {
            structure,
            assignment,
            masks,
        })
    }

    pub fn structure(&self) -> &PartStructure {
        &self.structure
    }

    pub fn assignment(&self) -> &ListAssignment {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.structure.k()
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn list(&self, v: usize) -> &[Colour] {
        self.assignment.list(v)
    }

    pub fn universe(&self) -> &[Colour] {
        self.assignment.universe()
    }

    /// Dense index of `c` in the universe.
    pub fn colour_index(&self, c: Colour) -> Option<usize> {
        self.assignment.universe.binary_search(&c).ok()
    }

    pub fn colour_at(&self, index: usize) -> Colour {
        self.assignment.universe[index]
    }

    /// List of `v` as a mask over dense colour indices.
    pub fn mask(&self, v: usize) -> u64 {
        self.masks[v]
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn has_colour(&self, v: usize, c: Colour) -> bool {
        self.colour_index(c)
            .is_some_and(|i| self.masks[v] & (1 << i) != 0)
    }

    /// Vertices whose lists contain `c` (the neighbourhood `N_B(c)`), as a mask.
    pub fn availability(&self, c: Colour) -> u64 {
        let Some(i) = self.colour_index(c) else {
            return 0;
        };
        self.masks
            .iter()
            .enumerate()
            .filter(|(_, m)| *m & (1 << i) != 0)
            .fold(0, |acc, (v, _)| acc | (1 << v))
    }

    pub fn min_list_size(&self) -> usize {
        self.masks
            .iter()
            .map(|m| m.count_ones() as usize)
            .min()
            .unwrap_or(0)
    }

    /// Returns a copy with `c` added to the list of `v`.
    pub fn with_colour_added(&self, v: usize, c: Colour) -> Instance {
        let mut lists = self.assignment.lists.clone();
        lists[v].push(c);
        Instance::build(self.structure.clone(), ListAssignment::new(lists))
            .expect("adding a colour keeps the instance within limits")
    }

    /// Returns a copy with every list replaced.
    pub fn with_lists(&self, lists: Vec<Vec<Colour>>) -> Result<Instance, InstanceError> {
        Instance::new(self.structure.clone(), ListAssignment::new(lists))
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            parts: self.structure.sizes.clone(),
            lists: self
                .assignment
                .lists
                .iter()
                .map(|l| l.iter().map(|c| c.0).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("instance serializes")
    }
}

/// The on-disk instance schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub parts: Vec<usize>,
    pub lists: Vec<Vec<u32>>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = InstanceError;

    fn try_from(file: InstanceFile) -> Result<Self, Self::Error> {
        let structure = PartStructure::new(file.parts)?;
        let lists = file
            .lists
            .into_iter()
            .map(|l| l.into_iter().map(Colour).collect())
            .collect();
        Instance::new(structure, ListAssignment::new(lists))
    }
}

fn parse_error(e: serde_json::Error) -> InstanceError {
    InstanceError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses an instance from its JSON form.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text).map_err(parse_error)?;
    Instance::try_from(file)
}

/// A partial or total vertex colouring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Colouring {
    colours: Vec<Option<Colour>>,
}

impl Colouring {
    pub fn uncoloured(n: usize) -> Self {
        Self {
            colours: vec![None; n],
        }
    }

    pub fn from_colours(colours: Vec<Option<Colour>>) -> Self {
        Self { colours }
    }

    pub fn total(colours: &[u32]) -> Self {
        Self {
            colours: colours.iter().map(|&c| Some(Colour(c))).collect(),
        }
    }

    /// Parses the JSON colouring schema and checks its length against `n`.
    pub fn parse(text: &str, n: usize) -> Result<Self, InstanceError> {
        let col: Colouring = serde_json::from_str(text).map_err(parse_error)?;
        if col.len() != n {
            return Err(InstanceError::ColouringLength {
                expected: n,
                found: col.len(),
            });
        }
        Ok(col)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("colouring serializes")
    }

    pub fn len(&self) -> usize {
        self.colours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colours.is_empty()
    }

    pub fn get(&self, v: usize) -> Option<Colour> {
        self.colours.get(v).copied().flatten()
    }

    pub fn set(&mut self, v: usize, c: Option<Colour>) {
        self.colours[v] = c;
    }

    pub fn colours(&self) -> &[Option<Colour>] {
        &self.colours
    }

    pub fn is_total(&self) -> bool {
        self.colours.iter().all(Option::is_some)
    }

    pub fn coloured_vertices(&self) -> impl Iterator<Item = (usize, Colour)> + '_ {
        self.colours
            .iter()
            .enumerate()
            .filter_map(|(v, c)| c.map(|c| (v, c)))
    }

    /// Colour classes: colour -> vertices carrying it (ascending).
    pub fn classes(&self) -> BTreeMap<Colour, Vec<usize>> {
        let mut classes: BTreeMap<Colour, Vec<usize>> = BTreeMap::new();
        for (v, c) in self.coloured_vertices() {
            classes.entry(c).or_default().push(v);
        }
        classes
    }

    pub fn used_colours(&self) -> BTreeSet<Colour> {
        self.coloured_vertices().map(|(_, c)| c).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationReason {
    /// Shares its colour with a vertex in another part.
    Conflict {
        with: usize,
        colour: Colour,
    },
    /// Coloured with a colour missing from its list.
    OffList {
        colour: Colour,
    },
    Uncoloured,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub vertex: usize,
    pub reason: ViolationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColouringVerdict {
    pub proper: bool,
    pub acceptable: bool,
    pub total: bool,
    pub violations: Vec<Violation>,
}

impl ColouringVerdict {
    /// Proper, list-respecting and total.
    pub fn is_acceptable_total(&self) -> bool {
        self.acceptable && self.total
    }
}

/// Checks properness, list membership and totality of `col` on `inst`.
///
/// Conflicts are reported once per offending pair, on the later vertex.
pub fn check_colouring(inst: &Instance, col: &Colouring) -> ColouringVerdict {
    let ps = inst.structure();
    let mut violations = Vec::new();
    let mut first_by_colour: BTreeMap<Colour, Vec<usize>> = BTreeMap::new();
    let mut proper = true;
    let mut on_list = true;
    let mut total = true;
    for v in 0..inst.n() {
        match col.get(v) {
            None => {
                total = false;
                violations.push(Violation {
                    vertex: v,
                    reason: ViolationReason::Uncoloured,
                });
            }
            Some(c) => {
                let seen = first_by_colour.entry(c).or_default();
                if let Some(&u) = seen.iter().find(|&&u| ps.adjacent(u, v)) {
                    proper = false;
                    violations.push(Violation {
                        vertex: v,
                        reason: ViolationReason::Conflict { with: u, colour: c },
                    });
                }
                seen.push(v);
                if !inst.has_colour(v, c) {
                    on_list = false;
                    violations.push(Violation {
                        vertex: v,
                        reason: ViolationReason::OffList { colour: c },
                    });
                }
            }
        }
    }
    ColouringVerdict {
        proper,
        acceptable: proper && on_list,
        total,
        violations,
    }
}

/// Whether `col` is proper (ignoring lists).
pub fn is_proper(inst: &Instance, col: &Colouring) -> bool {
    col.classes().values().all(|class| {
        class
            .iter()
            .all(|&v| inst.structure().part_of(v) == inst.structure().part_of(class[0]))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivedQuantities {
    /// `n - |C|`; negative for instances with more colours than vertices.
    pub gamma: i64,
    /// Number of parts with at least two vertices.
    pub b: usize,
    pub singletons: Vec<usize>,
}

pub fn derived_quantities(inst: &Instance) -> DerivedQuantities {
    DerivedQuantities {
        gamma: inst.n() as i64 - inst.universe().len() as i64,
        b: inst.structure().non_singleton_parts(),
        singletons: inst.structure().singletons(),
    }
}

/// Iterates the set bits of a mask, lowest first.
pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}
