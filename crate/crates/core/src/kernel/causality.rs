use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// One block of the ordered attribute partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub attributes: Vec<usize>,
    pub inertial: bool,
}

/// Definition set `D(k, l)`: the attributes of block `l` at instant `k`.
/// Blocks are zero-based, so the initial condition is `Cell { instant: 0, block: 0 }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub instant: usize,
    pub block: usize,
}

impl Cell {
    pub const INITIAL: Cell = Cell { instant: 0, block: 0 };

    pub fn new(instant: usize, block: usize) -> Self {
        Self { instant, block }
    }
}

/// `K(consequence) = cause`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CauseEntry {
    pub consequence: Cell,
    pub cause: Vec<Cell>,
}

/// Ordered partition of the attributes plus the cause map.
///
/// The cause map is kept as a list so that duplicate or missing definitions
/// stay representable and can be reported by [`validate_causality`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalDecomposition {
    pub n_attributes: usize,
    pub n_instants: usize,
    pub blocks: Vec<Block>,
    pub causes: Vec<CauseEntry>,
}

impl CausalDecomposition {
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.n_instants).flat_map(move |k| (0..self.blocks.len()).map(move |l| Cell::new(k, l)))
    }

    /// Single block holding every attribute.
    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoBlocks,
    EmptyBlock {
        block: usize,
    },
    UnknownAttribute {
        block: usize,
        attribute: usize,
    },
    OverlappingBlocks {
        attribute: usize,
        first: usize,
        second: usize,
    },
    UncoveredAttribute {
        attribute: usize,
    },
    UnknownCell {
        cell: Cell,
    },
    DuplicateCause {
        consequence: Cell,
    },
    MissingCause {
        consequence: Cell,
    },
    MissingInitialCondition,
    CausedInitialCondition {
        cause: Cell,
    },
    /// The cause lies after the consequence.
    FutureCause {
        consequence: Cell,
        cause: Cell,
    },
    /// Inertial consequence whose cause is not at the preceding instant.
    InertialCause {
        consequence: Cell,
        cause: Cell,
    },
    /// Non-inertial consequence whose cause is not an earlier block of the same instant.
    NonInertialCause {
        consequence: Cell,
        cause: Cell,
    },
}

impl Violation {
    /// The consequence cell the violation refers to, if any.
    pub fn consequence(&self) -> Option<Cell> {
        match *self {
            Violation::DuplicateCause { consequence }
            | Violation::MissingCause { consequence }
            | Violation::FutureCause { consequence, .. }
            | Violation::InertialCause { consequence, .. }
            | Violation::NonInertialCause { consequence, .. } => Some(consequence),
            Violation::MissingInitialCondition | Violation::CausedInitialCondition { .. } => Some(Cell::INITIAL),
            Violation::UnknownCell { cell } => Some(cell),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalityReport {
    pub ok: bool,
    pub violation: Option<Violation>,
    /// The decomposition is the single block `{I}`: accepted, but inputs,
    /// outputs and other structural terms are undefined for it.
    pub structural_terms_undefined: bool,
    pub cells_checked: usize,
}

/// Checks a decomposition and reports the first violated rule.
///
/// Rules, in the order they are checked:
/// 1. the blocks partition `0..n_attributes`;
/// 2. every cause entry names existing cells and every consequence cell has
///    exactly one entry;
/// 3. the initial condition `D(0, 0)` has the empty cause;
/// 4. per consequence, in `(k, l)` order: no cause lies in the future, inertial
///    blocks draw only on `D(k-1, ·)` and non-inertial blocks only on
///    `D(k, j)` with `j < l`.
pub fn validate_causality(decomp: &CausalDecomposition) -> CausalityReport {
    let violation = first_violation(decomp);
    CausalityReport {
        ok: violation.is_none(),
        violation,
        structural_terms_undefined: decomp.is_trivial(),
        cells_checked: decomp.n_instants * decomp.blocks.len(),
    }
}

fn first_violation(d: &CausalDecomposition) -> Option<Violation> {
    if let Some(v) = partition_violation(d) {
        return Some(v);
    }
    let in_range = |c: &Cell| c.instant < d.n_instants && c.block < d.blocks.len();
    let mut map: BTreeMap<Cell, &[Cell]> = BTreeMap::new();
    for entry in &d.causes {
        if let Some(cell) = core::iter::once(&entry.consequence).chain(entry.cause.iter()).find(|c| !in_range(c)) {
            return Some(Violation::UnknownCell { cell: *cell });
        }
    }
    match d.causes.iter().find(|e| e.consequence == Cell::INITIAL) {
        None => return Some(Violation::MissingInitialCondition),
        Some(e) if !e.cause.is_empty() => return Some(Violation::CausedInitialCondition { cause: e.cause[0] }),
        Some(_) => {}
    }
    for entry in &d.causes {
        if map.insert(entry.consequence, &entry.cause).is_some() {
            return Some(Violation::DuplicateCause { consequence: entry.consequence });
        }
    }
    for consequence in d.cells() {
        let Some(cause) = map.get(&consequence) else {
            return Some(Violation::MissingCause { consequence });
        };
        let inertial = d.blocks[consequence.block].inertial;
        for &c in cause.iter() {
            if c.instant > consequence.instant {
                return Some(Violation::FutureCause { consequence, cause: c });
            }
            let lawful = if inertial {
                consequence.instant >= 1 && c.instant == consequence.instant - 1
            } else {
                c.instant == consequence.instant && c.block < consequence.block
            };
            if !lawful {
                return Some(if inertial {
                    Violation::InertialCause { consequence, cause: c }
                } else {
                    Violation::NonInertialCause { consequence, cause: c }
                });
            }
        }
    }
    None
}

fn partition_violation(d: &CausalDecomposition) -> Option<Violation> {
    if d.blocks.is_empty() {
        return Some(Violation::NoBlocks);
    }
    let mut owner: Vec<Option<usize>> = alloc::vec![None; d.n_attributes];
    for (l, block) in d.blocks.iter().enumerate() {
        if block.attributes.is_empty() {
            return Some(Violation::EmptyBlock { block: l });
        }
        for &a in &block.attributes {
            match owner.get_mut(a) {
                None => return Some(Violation::UnknownAttribute { block: l, attribute: a }),
                Some(Some(first)) => {
                    return Some(Violation::OverlappingBlocks { attribute: a, first: *first, second: l })
                }
                Some(slot) => *slot = Some(l),
            }
        }
    }
    owner.iter().position(Option::is_none).map(|attribute| Violation::UncoveredAttribute { attribute })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn markov_chain(n_instants: usize) -> CausalDecomposition {
        let mut causes = vec![CauseEntry { consequence: Cell::INITIAL, cause: vec![] }];
        for k in 1..n_instants {
            causes.push(CauseEntry { consequence: Cell::new(k, 0), cause: vec![Cell::new(k - 1, 0)] });
        }
        CausalDecomposition {
            n_attributes: 2,
            n_instants,
            blocks: vec![Block { attributes: vec![0, 1], inertial: true }],
            causes,
        }
    }

    fn entry_mut(d: &mut CausalDecomposition, cell: Cell) -> &mut CauseEntry {
        d.causes.iter_mut().find(|e| e.consequence == cell).unwrap()
    }

    /// Random decomposition whose causes obey the inertial / non-inertial rules.
    fn lawful(rng: &mut ChaCha8Rng) -> CausalDecomposition {
        let n_attributes = rng.random_range(1..7);
        let n_blocks = rng.random_range(1..=n_attributes);
        let n_instants = rng.random_range(1..6);
        let mut blocks: Vec<Block> = (0..n_blocks).map(|_| Block { attributes: vec![], inertial: true }).collect();
        for a in 0..n_attributes {
            let l = if a < n_blocks { a } else { rng.random_range(0..n_blocks) };
            blocks[l].attributes.push(a);
        }
        for (l, b) in blocks.iter_mut().enumerate() {
            b.inertial = l == 0 || rng.random_bool(0.5);
        }
        let mut causes = Vec::new();
        for k in 0..n_instants {
            for (l, block) in blocks.iter().enumerate() {
                let mut cause = Vec::new();
                if (k, l) != (0, 0) {
                    if block.inertial {
                        if k > 0 {
                            for j in 0..n_blocks {
                                if rng.random_bool(0.6) {
                                    cause.push(Cell::new(k - 1, j));
                                }
                            }
                        }
                    } else {
                        for j in 0..l {
                            if rng.random_bool(0.6) {
                                cause.push(Cell::new(k, j));
                            }
                        }
                    }
                }
                causes.push(CauseEntry { consequence: Cell::new(k, l), cause });
            }
        }
        CausalDecomposition { n_attributes, n_instants, blocks, causes }
    }

    #[test]
    fn canonical_markov_chain_is_causal() {
        let r = validate_causality(&markov_chain(4));
        assert!(r.ok, "{r:?}");
        assert!(r.structural_terms_undefined);
    }

    #[test]
    fn non_inertial_self_cause_is_rejected() {
        let mut d = markov_chain(3);
        d.blocks = vec![Block { attributes: vec![0], inertial: true }, Block { attributes: vec![1], inertial: false }];
        for k in 0..3 {
            let cause = if k == 0 { vec![] } else { vec![Cell::new(k, 0)] };
            d.causes.push(CauseEntry { consequence: Cell::new(k, 1), cause });
        }
        assert!(validate_causality(&d).ok);
        entry_mut(&mut d, Cell::new(2, 1)).cause = vec![Cell::new(2, 1)];
        let r = validate_causality(&d);
        assert_eq!(
            r.violation,
            Some(Violation::NonInertialCause { consequence: Cell::new(2, 1), cause: Cell::new(2, 1) })
        );
        assert!(!r.structural_terms_undefined);
    }

    #[test]
    fn future_cause_is_rejected() {
        let mut d = markov_chain(4);
        entry_mut(&mut d, Cell::new(1, 0)).cause = vec![Cell::new(2, 0)];
        assert_eq!(
            validate_causality(&d).violation,
            Some(Violation::FutureCause { consequence: Cell::new(1, 0), cause: Cell::new(2, 0) })
        );
    }

    #[test]
    fn initial_condition_rules() {
        let mut d = markov_chain(2);
        d.causes.retain(|e| e.consequence != Cell::INITIAL);
        assert_eq!(validate_causality(&d).violation, Some(Violation::MissingInitialCondition));
        let mut d = markov_chain(2);
        entry_mut(&mut d, Cell::INITIAL).cause = vec![Cell::new(1, 0)];
        assert_eq!(
            validate_causality(&d).violation,
            Some(Violation::CausedInitialCondition { cause: Cell::new(1, 0) })
        );
    }

    #[test]
    fn partition_rules() {
        let mut d = markov_chain(2);
        d.blocks =
            vec![Block { attributes: vec![0, 1], inertial: true }, Block { attributes: vec![1], inertial: false }];
        assert_eq!(
            validate_causality(&d).violation,
            Some(Violation::OverlappingBlocks { attribute: 1, first: 0, second: 1 })
        );
        d.blocks = vec![Block { attributes: vec![0], inertial: true }];
        assert_eq!(validate_causality(&d).violation, Some(Violation::UncoveredAttribute { attribute: 1 }));
        d.blocks = vec![Block { attributes: vec![0, 1, 2], inertial: true }];
        assert_eq!(validate_causality(&d).violation, Some(Violation::UnknownAttribute { block: 0, attribute: 2 }));
    }

    #[test]
    fn cause_map_must_be_a_function() {
        let mut d = markov_chain(3);
        d.causes.push(CauseEntry { consequence: Cell::new(2, 0), cause: vec![] });
        assert_eq!(validate_causality(&d).violation, Some(Violation::DuplicateCause { consequence: Cell::new(2, 0) }));
        let mut d = markov_chain(3);
        d.causes.retain(|e| e.consequence != Cell::new(1, 0));
        assert_eq!(validate_causality(&d).violation, Some(Violation::MissingCause { consequence: Cell::new(1, 0) }));
        let mut d = markov_chain(3);
        entry_mut(&mut d, Cell::new(1, 0)).cause = vec![Cell::new(0, 4)];
        assert_eq!(validate_causality(&d).violation, Some(Violation::UnknownCell { cell: Cell::new(0, 4) }));
    }

    #[test]
    fn inertial_cause_at_first_instant_is_rejected() {
        let mut d = markov_chain(2);
        d.blocks = vec![Block { attributes: vec![0], inertial: true }, Block { attributes: vec![1], inertial: true }];
        d.causes.push(CauseEntry { consequence: Cell::new(0, 1), cause: vec![Cell::new(0, 0)] });
        d.causes.push(CauseEntry { consequence: Cell::new(1, 1), cause: vec![Cell::new(0, 1)] });
        assert_eq!(
            validate_causality(&d).violation,
            Some(Violation::InertialCause { consequence: Cell::new(0, 1), cause: Cell::new(0, 0) })
        );
    }

    proptest! {
        #[test]
        fn generated_decompositions_are_accepted(seed in any::<u64>()) {
            let d = lawful(&mut ChaCha8Rng::seed_from_u64(seed));
            let r = validate_causality(&d);
            prop_assert!(r.ok, "{:?}", r);
        }

        #[test]
        fn moving_a_cause_forward_in_time_is_rejected(seed in any::<u64>(), pick in any::<usize>()) {
            let mut d = lawful(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assume!(d.n_instants >= 2);
            let candidates: Vec<usize> = d
                .causes
                .iter()
                .enumerate()
                .filter(|(_, e)| e.cause.iter().any(|c| c.instant + 1 < d.n_instants))
                .map(|(i, _)| i)
                .collect();
            prop_assume!(!candidates.is_empty());
            let entry = &mut d.causes[candidates[pick % candidates.len()]];
            let c = entry.cause.iter_mut().find(|c| c.instant + 1 < d.n_instants).unwrap();
            c.instant += 1;
            prop_assert!(!validate_causality(&d).ok);
        }
    }
}
