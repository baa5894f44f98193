use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::KernelError;

/// Oriented information bond: the value of `source` (an output) is the
/// complete immediate cause of `target` (an input).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub source: usize,
    pub target: usize,
}

/// Attributes connected by bonds and by inseparable couplings.
///
/// Couplings model mass or energy exchange: they join attributes into one
/// sub-system and can never be cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemGraph {
    n_attributes: usize,
    bonds: Vec<Bond>,
    couplings: Vec<(usize, usize)>,
}

impl SystemGraph {
    pub fn new(n_attributes: usize, bonds: Vec<Bond>, couplings: Vec<(usize, usize)>) -> Result<Self, KernelError> {
        let mut bound_by: Vec<Option<usize>> = alloc::vec![None; n_attributes];
        for (i, b) in bonds.iter().enumerate() {
            for attribute in [b.source, b.target] {
                if attribute >= n_attributes {
                    return Err(KernelError::BondAttributeOutOfRange { bond: i, attribute, n_attributes });
                }
            }
            if b.source == b.target {
                return Err(KernelError::SelfBond { bond: i, attribute: b.source });
            }
            if let Some(first) = bound_by[b.target] {
                return Err(KernelError::InputBoundTwice { attribute: b.target, first, second: i });
            }
            bound_by[b.target] = Some(i);
        }
        for (i, &(a, b)) in couplings.iter().enumerate() {
            if let Some(attribute) = [a, b].into_iter().find(|&x| x >= n_attributes) {
                return Err(KernelError::BondAttributeOutOfRange { bond: bonds.len() + i, attribute, n_attributes });
            }
        }
        Ok(Self { n_attributes, bonds, couplings })
    }

    pub fn n_attributes(&self) -> usize {
        self.n_attributes
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn couplings(&self) -> &[(usize, usize)] {
        &self.couplings
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PortClassification {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub internal: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubSystem {
    /// Sorted attribute indices.
    pub attributes: Vec<usize>,
    pub ports: PortClassification,
    /// Indices of the bonds that remain connected inside this sub-system.
    pub bonds: Vec<usize>,
}

/// Disconnects `cut` and returns the resulting isolated parts, ordered by
/// their smallest attribute.
///
/// Targets of cut bonds become inputs and sources become outputs. An attribute
/// that is both (it relays one cut bond into another) is classified as an
/// input, which keeps the three port sets disjoint.
pub fn cut_bonds(graph: &SystemGraph, cut: &[usize]) -> Result<Vec<SubSystem>, KernelError> {
    if let Some(&bad) = cut.iter().find(|&&b| b >= graph.bonds.len()) {
        return Err(KernelError::UnknownBond(bad));
    }
    let cut: BTreeSet<usize> = cut.iter().copied().collect();
    let mut dsu = DisjointSets::new(graph.n_attributes);
    for (i, b) in graph.bonds.iter().enumerate() {
        if !cut.contains(&i) {
            dsu.union(b.source, b.target);
        }
    }
    for &(a, b) in &graph.couplings {
        dsu.union(a, b);
    }

    let mut is_input = alloc::vec![false; graph.n_attributes];
    let mut is_output = alloc::vec![false; graph.n_attributes];
    for &i in &cut {
        let b = graph.bonds[i];
        is_input[b.target] = true;
        is_output[b.source] = true;
    }

    let mut component_of_root: Vec<Option<usize>> = alloc::vec![None; graph.n_attributes];
    let mut parts: Vec<SubSystem> = Vec::new();
    for a in 0..graph.n_attributes {
        let root = dsu.find(a);
        let idx = *component_of_root[root].get_or_insert_with(|| {
            parts.push(SubSystem { attributes: Vec::new(), ports: PortClassification::default(), bonds: Vec::new() });
            parts.len() - 1
        });
        let part = &mut parts[idx];
        part.attributes.push(a);
        if is_input[a] {
            part.ports.inputs.push(a);
        } else if is_output[a] {
            part.ports.outputs.push(a);
        } else {
            part.ports.internal.push(a);
        }
    }
    for (i, b) in graph.bonds.iter().enumerate() {
        if !cut.contains(&i) {
            let idx = component_of_root[dsu.find(b.source)].expect("every attribute has a component");
            parts[idx].bonds.push(i);
        }
    }
    Ok(parts)
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index wins so component roots are deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn bond(source: usize, target: usize) -> Bond {
        Bond { source, target }
    }

    #[test]
    fn chain_cut_in_front() {
        // a=0 -> b=1 -> c=2, cut a->b.
        let g = SystemGraph::new(3, vec![bond(0, 1), bond(1, 2)], vec![]).unwrap();
        let parts = cut_bonds(&g, &[0]).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].attributes, vec![0]);
        assert_eq!(parts[0].ports, PortClassification { inputs: vec![], outputs: vec![0], internal: vec![] });
        assert_eq!(parts[1].attributes, vec![1, 2]);
        assert_eq!(parts[1].ports, PortClassification { inputs: vec![1], outputs: vec![], internal: vec![2] });
        assert_eq!(parts[1].bonds, vec![1]);
    }

    #[test]
    fn no_cut_keeps_one_system() {
        let g = SystemGraph::new(3, vec![bond(0, 1), bond(1, 2)], vec![]).unwrap();
        let parts = cut_bonds(&g, &[]).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].ports.internal, vec![0, 1, 2]);
    }

    #[test]
    fn star_hub_cut_everywhere() {
        let g = SystemGraph::new(3, vec![bond(0, 1), bond(0, 2)], vec![]).unwrap();
        let parts = cut_bonds(&g, &[0, 1]).unwrap();
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].ports.outputs, vec![0]);
        assert_eq!(parts[1].ports.inputs, vec![1]);
        assert_eq!(parts[2].ports.inputs, vec![2]);
    }

    #[test]
    fn couplings_cannot_be_cut() {
        let g = SystemGraph::new(3, vec![bond(0, 1)], vec![(1, 2)]).unwrap();
        let parts = cut_bonds(&g, &[0]).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1].attributes, vec![1, 2]);
    }

    #[test]
    fn relay_attribute_is_an_input() {
        let g = SystemGraph::new(3, vec![bond(0, 1), bond(1, 2)], vec![]).unwrap();
        let parts = cut_bonds(&g, &[0, 1]).unwrap();
        assert_eq!(parts[1].ports.inputs, vec![1]);
        assert!(parts[1].ports.outputs.is_empty());
    }

    #[test]
    fn graph_validation() {
        assert_eq!(
            cut_bonds(&SystemGraph::new(2, vec![bond(0, 1)], vec![]).unwrap(), &[3]),
            Err(KernelError::UnknownBond(3))
        );
        assert_eq!(
            SystemGraph::new(3, vec![bond(0, 2), bond(1, 2)], vec![]),
            Err(KernelError::InputBoundTwice { attribute: 2, first: 0, second: 1 })
        );
        assert!(matches!(SystemGraph::new(2, vec![bond(0, 0)], vec![]), Err(KernelError::SelfBond { .. })));
        assert!(matches!(
            SystemGraph::new(2, vec![bond(0, 5)], vec![]),
            Err(KernelError::BondAttributeOutOfRange { .. })
        ));
    }

    fn random_graph(n: usize, raw: &[(usize, usize)]) -> SystemGraph {
        let mut bonds = Vec::new();
        let mut bound = vec![false; n];
        for &(s, t) in raw {
            let (s, t) = (s % n, t % n);
            if s != t && !bound[t] {
                bound[t] = true;
                bonds.push(bond(s, t));
            }
        }
        SystemGraph::new(n, bonds, vec![]).unwrap()
    }

    fn component_labels(parts: &[SubSystem], n: usize) -> Vec<usize> {
        let mut label = vec![usize::MAX; n];
        for (c, p) in parts.iter().enumerate() {
            for &a in &p.attributes {
                label[a] = c;
            }
        }
        label
    }

    proptest! {
        #[test]
        fn parts_partition_and_reconnect(n in 1usize..12, raw in proptest::collection::vec((0usize..12, 0usize..12), 0..20), mask in any::<u32>()) {
            let g = random_graph(n, &raw);
            let cut: Vec<usize> = (0..g.bonds().len()).filter(|i| mask >> (i % 32) & 1 == 1).collect();
            let parts = cut_bonds(&g, &cut).unwrap();

            let mut seen = vec![0usize; n];
            for p in &parts {
                let mut ports: Vec<usize> = p.ports.inputs.iter().chain(&p.ports.outputs).chain(&p.ports.internal).copied().collect();
                ports.sort_unstable();
                prop_assert_eq!(&ports, &p.attributes);
                for &a in &p.attributes {
                    seen[a] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));

            // Merging parts along the cut bonds reproduces the uncut structure.
            let whole = component_labels(&cut_bonds(&g, &[]).unwrap(), n);
            let mut dsu = DisjointSets::new(parts.len());
            let label = component_labels(&parts, n);
            for &i in &cut {
                let b = g.bonds()[i];
                dsu.union(label[b.source], label[b.target]);
            }
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(whole[a] == whole[b], dsu.find(label[a]) == dsu.find(label[b]));
                }
            }
        }
    }
}
