//! Constructive reductions: frequent colours, reduce-and-extend steps,
//! surjective repair of colourings, and conversion of near-acceptable
//! colourings into acceptable ones.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{
    bits, check_colouring, derived_quantities, is_proper, Colour, Colouring, Instance,
    ListAssignment, PartStructure,
};
use crate::matching::{
    build_bf, max_deficiency_set, max_matching, saturating_injection, Injection, MatchingError,
};
use crate::solver::decide;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error(transparent)]
    Colouring(#[from] MatchingError),
    #[error("vertex {vertex} has colour {colour}, which is in no list")]
    ColourOutsideUniverse { vertex: usize, colour: Colour },
    #[error("invalid injection: {0}")]
    InvalidInjection(String),
    #[error("colouring is not near-acceptable at vertices {vertices:?}")]
    NotNearAcceptable { vertices: Vec<usize> },
    #[error("partial colouring is not acceptable on its domain")]
    PartialNotAcceptable,
    #[error("the residual instance has no acceptable colouring")]
    ResidualUncolourable,
    #[error(
        "internal invariant violated: deficiency colour {colour} is globally frequent \
         (unreachable with lists of size >= k on at most 2k+1 vertices)"
    )]
    GloballyFrequentDeficiency { colour: Colour },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

/// Frequent-colour classification of an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyReport {
    pub k: usize,
    pub gamma: i64,
    pub b: usize,
    /// Colours in the lists of at least `k + 1` vertices.
    pub globally_frequent: Vec<Colour>,
    /// Colours in the lists of at least `gamma` singletons; empty when `gamma <= 0`.
    pub frequent_among_singletons: Vec<Colour>,
    pub frequent: Vec<Colour>,
    /// `|N_B(c)|` for every colour.
    pub availability: BTreeMap<Colour, usize>,
    /// Number of singletons whose list contains `c`.
    pub singleton_availability: BTreeMap<Colour, usize>,
}

impl FrequencyReport {
    pub fn is_frequent(&self, c: Colour) -> bool {
        self.frequent.binary_search(&c).is_ok()
    }

    pub fn is_globally_frequent(&self, c: Colour) -> bool {
        self.globally_frequent.binary_search(&c).is_ok()
    }
}

pub fn classify_colours(inst: &Instance) -> FrequencyReport {
    let d = derived_quantities(inst);
    let k = inst.k();
    let singleton_mask = d.singletons.iter().fold(0u64, |m, &v| m | (1 << v));
    let mut availability = BTreeMap::new();
    let mut singleton_availability = BTreeMap::new();
    let mut globally_frequent = Vec::new();
    let mut frequent_among_singletons = Vec::new();
    let mut frequent = Vec::new();
    for &c in inst.universe() {
        let avail = inst.availability(c);
        let count = avail.count_ones() as usize;
        let singles = (avail & singleton_mask).count_ones() as usize;
        availability.insert(c, count);
        singleton_availability.insert(c, singles);
        let global = count > k;
        let among = d.gamma >= 1 && singles as i64 >= d.gamma;
        if global {
            globally_frequent.push(c);
        }
        if among {
            frequent_among_singletons.push(c);
        }
        if global || among {
            frequent.push(c);
        }
    }
    FrequencyReport {
        k,
        gamma: d.gamma,
        b: d.b,
        globally_frequent,
        frequent_among_singletons,
        frequent,
        availability,
        singleton_availability,
    }
}

/// An acceptable partial colouring `g` of a vertex set `A`, and the residual
/// instance `G - A` with lists `L(v) - g(A)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionStep {
    /// The coloured set `A`, ascending.
    pub domain: Vec<usize>,
    /// `g`, defined exactly on `A`.
    pub colouring: Colouring,
    pub ell: usize,
    #[serde(serialize_with = "serialize_instance")]
    pub residual: Instance,
    /// Original vertex of each residual vertex.
    pub residual_vertices: Vec<usize>,
}

fn serialize_instance<S: serde::Serializer>(inst: &Instance, s: S) -> Result<S::Ok, S::Error> {
    inst.to_file().serialize(s)
}

/// The three size conditions under which the residual of a step is covered
/// by the theorem for `k - ell`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReductionConditions {
    pub residual_vertices: usize,
    pub vertex_bound: i64,
    pub residual_parts: usize,
    pub part_bound: i64,
    /// `None` for an empty residual.
    pub min_residual_list: Option<usize>,
    pub list_bound: i64,
}

impl ReductionConditions {
    pub fn vertices_hold(&self) -> bool {
        self.residual_vertices as i64 <= self.vertex_bound
    }

    pub fn parts_hold(&self) -> bool {
        self.residual_parts as i64 <= self.part_bound
    }

    pub fn lists_hold(&self) -> bool {
        self.min_residual_list
            .is_none_or(|m| m as i64 >= self.list_bound)
    }

    pub fn all_hold(&self) -> bool {
        self.vertices_hold() && self.parts_hold() && self.lists_hold()
    }
}

impl ReductionStep {
    /// Builds the step for a partial colouring `g` (entries outside the
    /// domain must be `None`).
    pub fn new(inst: &Instance, g: Colouring, ell: usize) -> Result<Self, TransformError> {
        if g.len() != inst.n() {
            return Err(MatchingError::Length {
                expected: inst.n(),
                found: g.len(),
            }
            .into());
        }
        let verdict = check_colouring(inst, &g);
        if !verdict.acceptable {
            return Err(TransformError::PartialNotAcceptable);
        }
        let domain: Vec<usize> = g.coloured_vertices().map(|(v, _)| v).collect();
        let used = g.used_colours();
        let residual_vertices: Vec<usize> = (0..inst.n()).filter(|&v| g.get(v).is_none()).collect();
        let ps = inst.structure();
        let sizes = (0..ps.k())
            .map(|p| ps.part_range(p).filter(|&v| g.get(v).is_none()).count())
            .collect();
        let lists = residual_vertices
            .iter()
            .map(|&v| {
                inst.list(v)
                    .iter()
                    .copied()
                    .filter(|c| !used.contains(c))
                    .collect()
            })
            .collect();
        let residual =
            Instance::residual(PartStructure::from_sizes(sizes), ListAssignment::new(lists))
                .expect("a sub-instance stays within limits");
        Ok(Self {
            domain,
            colouring: g,
            ell,
            residual,
            residual_vertices,
        })
    }

    pub fn conditions(&self, k: usize) -> ReductionConditions {
        let k = k as i64;
        let ell = self.ell as i64;
        ReductionConditions {
            residual_vertices: self.residual.n(),
            vertex_bound: 2 * (k - ell) + 1,
            residual_parts: self.residual.k(),
            part_bound: k - ell,
            min_residual_list: (self.residual.n() > 0).then(|| self.residual.min_list_size()),
            list_bound: k - ell,
        }
    }
}

/// If some part with at least two vertices has a colour common to all its
/// lists, colours that part with it (first such part, least colour).
pub fn reduce_common_colour(inst: &Instance) -> Option<ReductionStep> {
    let ps = inst.structure();
    (0..ps.k()).find_map(|p| {
        let range = ps.part_range(p);
        if range.len() < 2 {
            return None;
        }
        let common = range.clone().fold(u64::MAX, |m, v| m & inst.mask(v));
        let c = inst.colour_at(bits(common).next()?);
        let mut g = Colouring::uncoloured(inst.n());
        for v in range {
            g.set(v, Some(c));
        }
        Some(ReductionStep::new(inst, g, 1).expect("a common colour is acceptable"))
    })
}

/// If no matching of `B` saturates the colours, colours `N_B(T - root)`
/// bijectively with `T - root` for the Hall violator `T`.
pub fn reduce_hall_violator(inst: &Instance) -> Option<ReductionStep> {
    match saturating_injection(inst) {
        Injection::Saturating(_) => None,
        Injection::Violator { matched, .. } => Some(violator_step(inst, &matched)),
    }
}

fn violator_step(inst: &Instance, matched: &BTreeMap<Colour, usize>) -> ReductionStep {
    let mut g = Colouring::uncoloured(inst.n());
    for (&c, &v) in matched {
        g.set(v, Some(c));
    }
    ReductionStep::new(inst, g, 0).expect("a matching is an acceptable partial colouring")
}

/// Colours the residual with the exact solver and splices the result with `g`.
pub fn extend_reduction(
    inst: &Instance,
    step: &ReductionStep,
) -> Result<Colouring, TransformError> {
    let mut out = step.colouring.clone();
    if step.residual.n() > 0 {
        let result = decide(&step.residual);
        let witness = result.witness.ok_or(TransformError::ResidualUncolourable)?;
        for (i, &v) in step.residual_vertices.iter().enumerate() {
            out.set(v, witness.get(i));
        }
    }
    if !check_colouring(inst, &out).is_acceptable_total() {
        return Err(TransformError::Invariant(
            "spliced colouring is not acceptable".into(),
        ));
    }
    Ok(out)
}

fn require_total_proper(inst: &Instance, f: &Colouring) -> Result<(), TransformError> {
    if f.len() != inst.n() {
        return Err(MatchingError::Length {
            expected: inst.n(),
            found: f.len(),
        }
        .into());
    }
    if !f.is_total() {
        return Err(MatchingError::NotTotal.into());
    }
    if !is_proper(inst, f) {
        return Err(MatchingError::NotProper.into());
    }
    if let Some((vertex, colour)) = f
        .coloured_vertices()
        .find(|&(_, c)| inst.colour_index(c).is_none())
    {
        return Err(TransformError::ColourOutsideUniverse { vertex, colour });
    }
    Ok(())
}

/// Repairs a total proper colouring into a surjective one: while some colour
/// `c'` is unused (least first), recolour `h(c')` with `c'`.
///
/// Every vertex of the result either has an on-list colour or a colour class
/// contained in its class under `f`.
pub fn surjectivize(
    inst: &Instance,
    f: &Colouring,
    h: &BTreeMap<Colour, usize>,
) -> Result<Colouring, TransformError> {
    require_total_proper(inst, f)?;
    if h.keys().copied().ne(inst.universe().iter().copied()) {
        return Err(TransformError::InvalidInjection(
            "domain is not the colour set".into(),
        ));
    }
    let mut seen = 0u64;
    for (&c, &v) in h {
        if v >= inst.n() || seen & (1 << v) != 0 || !inst.has_colour(v, c) {
            return Err(TransformError::InvalidInjection(format!(
                "colour {c} sent to vertex {v}"
            )));
        }
        seen |= 1 << v;
    }

    let mut g = f.clone();
    loop {
        let used = g.used_colours();
        let Some(&unused) = inst.universe().iter().find(|c| !used.contains(c)) else {
            break;
        };
        g.set(h[&unused], Some(unused));
    }

    let f_classes = f.classes();
    let g_classes = g.classes();
    for v in 0..inst.n() {
        let c = g.get(v).expect("total");
        let in_list = inst.has_colour(v, c);
        let inside_f_class = || {
            let fc = &f_classes[&f.get(v).expect("total")];
            g_classes[&c].iter().all(|u| fc.contains(u))
        };
        if !in_list && !inside_f_class() {
            return Err(TransformError::Invariant(format!(
                "surjective repair broke the class condition at vertex {v}"
            )));
        }
    }
    if !is_proper(inst, &g) || g_classes.len() != inst.universe().len() {
        return Err(TransformError::Invariant(
            "surjective repair is not proper and surjective".into(),
        ));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NearAcceptability {
    pub near_acceptable: bool,
    /// Vertices that are off-list and either share their colour or carry a
    /// non-frequent one.
    pub violations: Vec<usize>,
}

/// Every vertex is on-list, or carries a frequent colour used nowhere else.
pub fn is_near_acceptable(
    inst: &Instance,
    f: &Colouring,
    report: &FrequencyReport,
) -> Result<NearAcceptability, TransformError> {
    require_total_proper(inst, f)?;
    let classes = f.classes();
    let violations: Vec<usize> = (0..inst.n())
        .filter(|&v| {
            let c = f.get(v).expect("total");
            !inst.has_colour(v, c) && !(report.is_frequent(c) && classes[&c].len() == 1)
        })
        .collect();
    Ok(NearAcceptability {
        near_acceptable: violations.is_empty(),
        violations,
    })
}

/// How a conversion reached its acceptable colouring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConversionPath {
    /// `B_f` had a matching saturating the colour classes; each class takes
    /// its matched colour.
    ClassMatching,
    /// The deficiency argument: classes outside the maximum-deficiency set
    /// `S` and multi-vertex classes are coloured, the rest is extended.
    PartialColouringExtension {
        c_star: Colour,
        /// Whether surjective repair changed the colouring.
        repaired: bool,
        ell: usize,
        /// Colours of the classes in `S`.
        deficiency_classes: Vec<Colour>,
        singleton_classes_outside: usize,
        gamma: i64,
        /// `|g(A) ∩ N(S)|`, at most `ell`.
        deficiency_colours_used: usize,
        conditions: ReductionConditions,
    },
    /// No matching of `B` saturates the colours, so surjective repair is
    /// unavailable; the Hall-violator step is extended instead.
    ColourInjectionReduction {
        violator: Vec<Colour>,
        conditions: ReductionConditions,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conversion {
    pub colouring: Colouring,
    pub path: ConversionPath,
}

/// Colours each class of `f` with its partner in a matching of `B_f`
/// saturating the classes, if one exists.
fn class_matching(inst: &Instance, f: &Colouring) -> Result<Option<Colouring>, TransformError> {
    let bf = build_bf(inst, f)?;
    let m = max_matching(&bf);
    if !m.saturates_left(&bf) {
        return Ok(None);
    }
    let mut out = Colouring::uncoloured(inst.n());
    for &(l, r) in &m.pairs {
        for &v in bf.left()[l].members() {
            out.set(v, Some(bf.right()[r]));
        }
    }
    Ok(Some(out))
}

/// The least class colour `c*` in `S` with `c* ∉ N(S)`.
fn deficiency_colour(
    bf: &crate::matching::AvailabilityGraph,
    set: &[usize],
    neighbourhood: u64,
    inst: &Instance,
) -> Colour {
    set.iter()
        .filter_map(|&l| match &bf.left()[l] {
            crate::matching::LeftNode::Class { colour, .. } => Some(*colour),
            _ => None,
        })
        .find(|&c| {
            let i = inst.colour_index(c).expect("class colours lie in C");
            neighbourhood & (1 << i) == 0
        })
        .expect("a deficient set has a class coloured outside its neighbourhood")
}

/// Converts a near-acceptable colouring into an acceptable one.
pub fn convert_near_acceptable(
    inst: &Instance,
    f: &Colouring,
) -> Result<Conversion, TransformError> {
    let report = classify_colours(inst);
    let near = is_near_acceptable(inst, f, &report)?;
    if !near.near_acceptable {
        return Err(TransformError::NotNearAcceptable {
            vertices: near.violations,
        });
    }
    if let Some(colouring) = class_matching(inst, f)? {
        return Ok(Conversion {
            colouring,
            path: ConversionPath::ClassMatching,
        });
    }

    let bf = build_bf(inst, f)?;
    let s = max_deficiency_set(&bf);
    let c_star = deficiency_colour(&bf, &s.set, s.neighbourhood_mask(), inst);
    if report.is_globally_frequent(c_star) {
        return Err(TransformError::GloballyFrequentDeficiency { colour: c_star });
    }

    let h = match saturating_injection(inst) {
        Injection::Saturating(h) => h,
        Injection::Violator {
            colours, matched, ..
        } => {
            let step = violator_step(inst, &matched);
            let conditions = step.conditions(inst.k());
            let colouring = extend_reduction(inst, &step)?;
            return Ok(Conversion {
                colouring,
                path: ConversionPath::ColourInjectionReduction {
                    violator: colours,
                    conditions,
                },
            });
        }
    };
    let g = surjectivize(inst, f, &h)?;
    let repaired = g != *f;
    if repaired {
        if let Some(colouring) = class_matching(inst, &g)? {
            return Ok(Conversion {
                colouring,
                path: ConversionPath::ClassMatching,
            });
        }
    }

    let bg = build_bf(inst, &g)?;
    let s = max_deficiency_set(&bg);
    let n_s = s.neighbourhood_mask();
    let c_star = deficiency_colour(&bg, &s.set, n_s, inst);
    if report.is_globally_frequent(c_star) {
        return Err(TransformError::GloballyFrequentDeficiency { colour: c_star });
    }
    if !report.is_frequent(c_star) {
        return Err(TransformError::Invariant(format!(
            "deficiency colour {c_star} is not frequent"
        )));
    }

    let ps = inst.structure();
    let singleton_classes_outside = (0..bg.left_count())
        .filter(|&l| !s.contains(l))
        .filter(|&l| {
            let m = bg.left()[l].members();
            m.len() == 1 && ps.is_singleton(m[0])
        })
        .count();
    if (singleton_classes_outside as i64) < report.gamma {
        return Err(TransformError::Invariant(format!(
            "only {singleton_classes_outside} singleton classes outside the deficiency set, \
             gamma is {}",
            report.gamma
        )));
    }

    let ell = bg.left().iter().filter(|c| c.members().len() > 1).count();
    let mut partial = Colouring::uncoloured(inst.n());
    for &(l, r) in &s.complement_matching.pairs {
        for &v in bg.left()[l].members() {
            partial.set(v, Some(bg.right()[r]));
        }
    }
    for &l in &s.set {
        if let crate::matching::LeftNode::Class { colour, members } = &bg.left()[l] {
            if members.len() > 1 {
                for &v in members {
                    partial.set(v, Some(*colour));
                }
            }
        }
    }
    let deficiency_colours_used = partial
        .used_colours()
        .iter()
        .filter(|&&c| n_s & (1 << inst.colour_index(c).expect("in C")) != 0)
        .count();
    if deficiency_colours_used > ell {
        return Err(TransformError::Invariant(format!(
            "{deficiency_colours_used} colours of N(S) used on A, more than ell = {ell}"
        )));
    }

    let step = ReductionStep::new(inst, partial, ell)?;
    let conditions = step.conditions(inst.k());
    let colouring = extend_reduction(inst, &step)?;
    Ok(Conversion {
        colouring,
        path: ConversionPath::PartialColouringExtension {
            c_star,
            repaired,
            ell,
            deficiency_classes: s
                .set
                .iter()
                .filter_map(|&l| match &bg.left()[l] {
                    crate::matching::LeftNode::Class { colour, .. } => Some(*colour),
                    _ => None,
                })
                .collect(),
            singleton_classes_outside,
            gamma: report.gamma,
            deficiency_colours_used,
            conditions,
        },
    })
}
