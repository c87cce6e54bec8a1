//! Finite qualitative abstractions of hybrid systems by stochastic
//! partition refinement.
//!
//! Blocks are per-location formulas. Starting from the partition compatible
//! with the target set and the locations, every block is repeatedly split
//! against the one-step positive-probability predicate of every other block
//! until stabilization. For cycle-reset systems the refinement terminates;
//! otherwise it may peel blocks forever, which is surfaced as structured
//! [`CapExceeded`](AbstractionError::CapExceeded) data rather than a bare
//! failure.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::finite::{FiniteError, FiniteSts};
use crate::formula::{interior_nonempty_formula, satisfiable, simplify_qf, Formula, FormulaError};
use crate::shs::{one_step_positive_formula, HybridSystem, InitKind, TargetSpec};
use crate::Rational;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error(transparent)]
    Formula(#[from] FormulaError),

    #[error(transparent)]
    Finite(#[from] FiniteError),

    #[error("refinement did not stabilize within {max_iter} iterations")]
    CapExceeded {
        max_iter: usize,
        partition: Partition,
        trace: Vec<IterationRecord>,
    },

    #[error("abstract block {0} has no outgoing positive transition")]
    BlockingBlock(usize),
}

/// One block of a partition: a satisfiable quantifier-free formula within a
/// location's invariant.
#[derive(Debug, Clone)]
pub struct Block {
    /// Stable identity across refinement (creation order).
    pub id: u64,
    pub location: usize,
    pub formula: Formula,
    /// Whether the block lies inside the target set (target blocks are only
    /// ever split into target blocks).
    pub target: bool,
}

/// A partition of the invariant state space into per-location blocks, kept
/// in creation order.
#[derive(Debug, Clone, Default)]
pub struct Partition {
    pub blocks: Vec<Block>,
    next_id: u64,
}

/// Per-iteration refinement statistics, kept for diagnostics and for
/// inspecting non-terminating refinements.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub splits: usize,
    pub blocks_after: usize,
}

impl Partition {
    fn push(&mut self, location: usize, formula: Formula, target: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.blocks.push(Block {
            id,
            location,
            formula,
            target,
        });
        id
    }

    pub fn blocks_of(&self, location: usize) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(move |b| b.location == location)
    }

    /// The block containing a concrete state, if any. On a valid partition
    /// the block is unique for states inside the invariant.
    pub fn block_of_state(
        &self,
        h: &HybridSystem,
        state: &crate::shs::State,
    ) -> Result<Option<usize>, FormulaError> {
        let val = h.valuation_map(state);
        for (i, b) in self.blocks.iter().enumerate() {
            if b.location == state.location && b.formula.eval(&val)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

/// The initial partition compatible with the target set and the locations:
/// per location, the invariant is cut along the target formula; empty
/// blocks are dropped.
pub fn initial_partition(
    h: &HybridSystem,
    target: &TargetSpec,
) -> Result<Partition, AbstractionError> {
    let mut p = Partition::default();
    for (li, loc) in h.locations.iter().enumerate() {
        let inv = loc.invariant.clone();
        match target.per_location.get(&li) {
            Some(t) => {
                let inside = simplify_qf(&Formula::and(vec![inv.clone(), t.clone()]))?;
                let outside = simplify_qf(&Formula::and(vec![inv, Formula::not(t.clone())]))?;
                if satisfiable(&inside)? {
                    p.push(li, inside, true);
                }
                if satisfiable(&outside)? {
                    p.push(li, outside, false);
                }
            }
            None => {
                if satisfiable(&inv)? {
                    p.push(li, inv.normalized(), false);
                }
            }
        }
    }
    Ok(p)
}

/// Refinement engine with a cache of splitter predicates. The predicate for
/// a splitter block depends only on the source location and the splitter,
/// never on the source block's own formula, so it is cached by
/// `(source location, splitter id)`.
pub struct Refiner<'a> {
    h: &'a HybridSystem,
    pre_cache: HashMap<(usize, u64), Formula>,
}

impl<'a> Refiner<'a> {
    pub fn new(h: &'a HybridSystem) -> Self {
        Refiner {
            h,
            pre_cache: HashMap::new(),
        }
    }

    fn pre_formula(&mut self, src_loc: usize, splitter: &Block) -> Result<Formula, FormulaError> {
        if let Some(f) = self.pre_cache.get(&(src_loc, splitter.id)) {
            return Ok(f.clone());
        }
        let f = one_step_positive_formula(self.h, src_loc, splitter.location, &splitter.formula)?;
        self.pre_cache.insert((src_loc, splitter.id), f.clone());
        Ok(f)
    }

    /// One full refinement pass: every block is split against every splitter
    /// of the snapshot taken at entry. Splitters are processed in
    /// (location, creation) order; children join the block list at the
    /// tail. Returns whether any split occurred.
    pub fn refine_once(&mut self, p: &mut Partition) -> Result<bool, FormulaError> {
        let mut splitters: Vec<Block> = p.blocks.clone();
        splitters.sort_by_key(|b| (b.location, b.id));
        let mut changed = false;
        for splitter in &splitters {
            let src_locs: Vec<usize> = (0..self.h.locations.len())
                .filter(|&l| {
                    self.h
                        .edges_from(l)
                        .any(|(_, e)| e.target == splitter.location)
                })
                .collect();
            for src_loc in src_locs {
                let pre = self.pre_formula(src_loc, splitter)?;
                if pre == Formula::False || pre == Formula::True {
                    continue;
                }
                let mut i = 0;
                while i < p.blocks.len() {
                    if p.blocks[i].location != src_loc {
                        i += 1;
                        continue;
                    }
                    let inside =
                        simplify_qf(&Formula::and(vec![p.blocks[i].formula.clone(), pre.clone()]))?;
                    let outside = simplify_qf(&Formula::and(vec![
                        p.blocks[i].formula.clone(),
                        Formula::not(pre.clone()),
                    ]))?;
                    if satisfiable(&inside)? && satisfiable(&outside)? {
                        let removed = p.blocks.remove(i);
                        p.push(removed.location, inside, removed.target);
                        p.push(removed.location, outside, removed.target);
                        changed = true;
                        // The two children went to the tail; the next block
                        // shifted into position i, so do not advance.
                    } else {
                        i += 1;
                    }
                }
            }
        }
        Ok(changed)
    }
}

/// A finite qualitative abstraction: blocks plus the boolean one-step
/// kernel `M[P][Q]` (= some state of `P` moves into `Q` with positive
/// probability) and the initial block support.
#[derive(Debug, Clone)]
pub struct AbstractSts {
    pub blocks: Vec<Block>,
    pub kernel: Vec<Vec<bool>>,
    pub initial_support: Vec<usize>,
    pub target_blocks: Vec<usize>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

/// Runs refinement to a fixpoint (bounded by `max_iter`) and assembles the
/// abstraction. For cycle-reset systems the fixpoint is guaranteed to
/// exist; for others the cap may fire, returning the partial partition and
/// the iteration trace.
pub fn build_abstraction(
    h: &HybridSystem,
    target: &TargetSpec,
    max_iter: usize,
) -> Result<AbstractSts, AbstractionError> {
    let mut partition = initial_partition(h, target)?;
    let mut refiner = Refiner::new(h);
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut stabilized = false;
    for it in 1..=max_iter {
        let before = partition.blocks.len();
        let changed = refiner.refine_once(&mut partition)?;
        iterations = it;
        trace.push(IterationRecord {
            iteration: it,
            splits: partition.blocks.len() - before,
            blocks_after: partition.blocks.len(),
        });
        if !changed {
            stabilized = true;
            break;
        }
    }
    if !stabilized {
        return Err(AbstractionError::CapExceeded {
            max_iter,
            partition,
            trace,
        });
    }

    // Qualitative kernel over the stable partition.
    let n = partition.blocks.len();
    let mut kernel = vec![vec![false; n]; n];
    for (qi, q) in partition.blocks.iter().enumerate() {
        for (pi, p) in partition.blocks.iter().enumerate() {
            let pre = refiner.pre_formula(p.location, q)?;
            let hit = Formula::and(vec![p.formula.clone(), pre]);
            kernel[pi][qi] = satisfiable(&hit)?;
        }
    }

    let initial_support = pushforward_support_impl(h, &partition)?;
    let target_blocks = partition
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.target)
        .map(|(i, _)| i)
        .collect();
    Ok(AbstractSts {
        blocks: partition.blocks,
        kernel,
        initial_support,
        target_blocks,
        iterations,
        trace,
    })
}

/// Blocks receiving positive initial mass: non-empty intersection with the
/// point list for discrete initial distributions, non-empty interior of the
/// intersection for continuous ones.
pub fn pushforward_support(
    h: &HybridSystem,
    partition: &Partition,
) -> Result<Vec<usize>, AbstractionError> {
    pushforward_support_impl(h, partition)
}

fn pushforward_support_impl(
    h: &HybridSystem,
    partition: &Partition,
) -> Result<Vec<usize>, AbstractionError> {
    let mut out = Vec::new();
    for (bi, b) in partition.blocks.iter().enumerate() {
        if b.location != h.init.location {
            continue;
        }
        let positive = match &h.init.kind {
            InitKind::Points(points) => {
                let mut any = false;
                for p in points {
                    let val: BTreeMap<String, Rational> =
                        h.vars.iter().cloned().zip(p.iter().cloned()).collect();
                    if b.formula.eval(&val)? {
                        any = true;
                        break;
                    }
                }
                any
            }
            InitKind::Uniform(d) => {
                let inter = Formula::and(vec![d.clone(), b.formula.clone()]);
                let int = interior_nonempty_formula(&inter, &h.vars)?;
                matches!(int, Formula::True)
            }
        };
        if positive {
            out.push(bi);
        }
    }
    Ok(out)
}

/// Collapses the qualitative kernel to a row-stochastic chain with uniform
/// weights on the positive transitions. Only the support matters for the
/// almost-sure and zero questions asked of it.
pub fn to_finite_sts(a: &AbstractSts) -> Result<FiniteSts, AbstractionError> {
    let n = a.blocks.len();
    let mut kernel = vec![vec![Rational::from_integer(0.into()); n]; n];
    for (i, row) in a.kernel.iter().enumerate() {
        let succ: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
            .collect();
        if succ.is_empty() {
            return Err(AbstractionError::BlockingBlock(i));
        }
        let w = crate::rat(1, succ.len() as i64);
        for j in succ {
            kernel[i][j] = w.clone();
        }
    }
    let labels = a
        .blocks
        .iter()
        .map(|b| format!("b{}", b.id))
        .collect::<Vec<_>>();
    Ok(FiniteSts::new(kernel, Some(labels))?)
}

/// DOT export: blocks as nodes labeled with location and formula, positive
/// transitions as edges; target blocks are doubled, initial-support blocks
/// bold.
pub fn to_dot(h: &HybridSystem, a: &AbstractSts) -> String {
    let mut out = String::from("digraph abstraction {\n  rankdir=LR;\n");
    for (i, b) in a.blocks.iter().enumerate() {
        let label = format!(
            "{}: {}",
            h.locations[b.location].name,
            escape(&b.formula.to_string())
        );
        let mut attrs = vec![format!("label=\"{label}\"")];
        if b.target {
            attrs.push("shape=doublecircle".to_string());
        } else {
            attrs.push("shape=ellipse".to_string());
        }
        if a.initial_support.contains(&i) {
            attrs.push("style=bold".to_string());
        }
        out.push_str(&format!("  n{i} [{}];\n", attrs.join(", ")));
    }
    for (i, row) in a.kernel.iter().enumerate() {
        for (j, &positive) in row.iter().enumerate() {
            if positive {
                out.push_str(&format!("  n{i} -> n{j};\n"));
            }
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// JSON document mirroring the abstraction, including the iteration trace.
#[derive(Debug, Serialize)]
pub struct AbstractionDoc {
    pub blocks: Vec<BlockDoc>,
    pub edges: Vec<[usize; 2]>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Serialize)]
pub struct BlockDoc {
    pub index: usize,
    pub location: String,
    pub formula: String,
    pub target: bool,
    pub initial: bool,
}

pub fn to_doc(h: &HybridSystem, a: &AbstractSts) -> AbstractionDoc {
    AbstractionDoc {
        blocks: a
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| BlockDoc {
                index: i,
                location: h.locations[b.location].name.clone(),
                formula: b.formula.to_string(),
                target: b.target,
                initial: a.initial_support.contains(&i),
            })
            .collect(),
        edges: a
            .kernel
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p)
                    .map(move |(j, _)| [i, j])
            })
            .collect(),
        iterations: a.iterations,
        trace: a.trace.clone(),
    }
}

/// Partition well-formedness as decided sentences: per location, blocks are
/// pairwise disjoint, non-empty, and cover the invariant. Intended for test
/// builds.
pub fn check_partition_invariants(h: &HybridSystem, p: &Partition) -> Result<(), String> {
    use crate::formula::equivalent;
    for (li, loc) in h.locations.iter().enumerate() {
        let blocks: Vec<&Block> = p.blocks_of(li).collect();
        for b in &blocks {
            match satisfiable(&b.formula) {
                Ok(true) => {}
                Ok(false) => return Err(format!("empty block {} in {}", b.id, loc.name)),
                Err(e) => return Err(e.to_string()),
            }
        }
        for (i, a) in blocks.iter().enumerate() {
            for b in blocks.iter().skip(i + 1) {
                let overlap = Formula::and(vec![a.formula.clone(), b.formula.clone()]);
                match satisfiable(&overlap) {
                    Ok(false) => {}
                    Ok(true) => {
                        return Err(format!("blocks {} and {} overlap in {}", a.id, b.id, loc.name))
                    }
                    Err(e) => return Err(e.to_string()),
                }
            }
        }
        let union = Formula::or(blocks.iter().map(|b| b.formula.clone()).collect());
        match equivalent(&union, &loc.invariant) {
            Ok(true) => {}
            Ok(false) => return Err(format!("blocks do not cover invariant of {}", loc.name)),
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shs::parse_model;

    const SINGLE: &str = r#"
vars x;
location only { flow: x + tau; inv: true; delay: exp 1; }
edge reset { from only; to only; guard: true; reset: points{ (0) }; strong; weight 1; }
init { loc only; points{ (0) }; }
target origin_side { only: x < 1; }
"#;

    #[test]
    fn single_strong_self_loop_stabilizes_fast() {
        let h = parse_model(SINGLE).unwrap();
        let target = h.targets["origin_side"].clone();
        let a = build_abstraction(&h, &target, 5).unwrap();
        // Two blocks (inside/outside the target), stable within two passes.
        assert_eq!(a.blocks.len(), 2);
        assert!(a.iterations <= 2);
        // The strong reset lands at the origin, inside the target block, so
        // both blocks transition only into the target block.
        let target_block = a.target_blocks[0];
        for row in &a.kernel {
            let succ: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(j, _)| j)
                .collect();
            assert_eq!(succ, vec![target_block]);
        }
        let sts = to_finite_sts(&a).unwrap();
        assert_eq!(sts.n_states(), 2);
    }

    #[test]
    fn empty_target_gives_one_block_per_location() {
        let h = parse_model(SINGLE).unwrap();
        let p = initial_partition(&h, &TargetSpec::default()).unwrap();
        assert_eq!(p.blocks.len(), 1);
        check_partition_invariants(&h, &p).unwrap();
    }

    #[test]
    fn full_location_target_is_single_block() {
        let h = parse_model(SINGLE).unwrap();
        let mut t = TargetSpec::default();
        t.per_location.insert(0, Formula::True);
        let p = initial_partition(&h, &t).unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert!(p.blocks[0].target);
    }

    #[test]
    fn dot_and_json_exports_are_well_formed() {
        let h = parse_model(SINGLE).unwrap();
        let target = h.targets["origin_side"].clone();
        let a = build_abstraction(&h, &target, 5).unwrap();
        let dot = to_dot(&h, &a);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("doublecircle"));
        let doc = to_doc(&h, &a);
        let json = serde_json::to_string_pretty(&doc).unwrap();
        assert!(json.contains("\"blocks\""));
        assert!(json.contains("\"trace\""));
    }
}
