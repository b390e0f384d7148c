//! k-patterns, S-connectedness and pattern occurrence in colorings of
//! S-labeled graphs.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{cayley_subgraph, SLabeledGraph};
use crate::group::{FiniteSubset, Group, GroupElement};

/// A coloring of a finite subset of the group, stored right-translated so
/// that its least element is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct KPattern {
    pub dom: FiniteSubset,
    pub values: Vec<u32>,
}

impl KPattern {
    pub fn new(group: Group, entries: Vec<(GroupElement, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("a pattern needs a nonempty domain"));
        }
        for (e, _) in &entries {
            group.validate(e)?;
        }
        let anchor = entries.iter().map(|(e, _)| e).min().expect("nonempty").clone();
        let shift = group.inverse(&anchor)?;
        let mut moved: Vec<(GroupElement, u32)> = entries
            .into_iter()
            .map(|(e, v)| Ok((group.multiply(&e, &shift)?, v)))
            .collect::<Result<_>>()?;
        moved.sort();
        if moved.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::input("pattern domain has a repeated element"));
        }
        Ok(KPattern {
            dom: FiniteSubset::from_elements(moved.iter().map(|(e, _)| e.clone())),
            values: moved.into_iter().map(|(_, v)| v).collect(),
        })
    }

    pub fn value_at(&self, e: &GroupElement) -> Option<u32> {
        self.dom.position(e).map(|i| self.values[i])
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PatternSet {
    pub k: u32,
    pub patterns: Vec<KPattern>,
}

impl PatternSet {
    pub fn new(k: u32, patterns: Vec<KPattern>) -> Result<Self> {
        if let Some(v) = patterns.iter().flat_map(|p| &p.values).find(|&&v| v >= k) {
            return Err(Error::input(format!("pattern value {v} out of range for k = {k}")));
        }
        let mut out = PatternSet { k, patterns: Vec::new() };
        for p in patterns {
            if !out.patterns.contains(&p) {
                out.patterns.push(p);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Whether `G(dom p, S)` is connected.
pub fn is_s_connected(group: Group, p: &KPattern, s: &FiniteSubset) -> Result<bool> {
    Ok(cayley_subgraph(group, &p.dom, s)?.graph.is_connected())
}

/// Pattern domain compiled against a target graph's label alphabet:
/// a breadth-first order with, for each non-root position, its parent
/// position and the label of the parent-to-child pair, plus the
/// remaining (non-tree) labeled pairs to verify.
struct Plan {
    order: Vec<usize>,
    parent: Vec<Option<(usize, usize)>>,
    checks: Vec<(usize, usize, usize)>,
}

fn plan(group: Group, p: &KPattern, g: &SLabeledGraph) -> Result<Plan> {
    let alphabet = FiniteSubset::from_elements(g.labels.iter().cloned());
    let local = cayley_subgraph(group, &p.dom, &alphabet)?;
    if !local.graph.is_connected() {
        return Err(Error::input("pattern is not S-connected"));
    }
    // Local label indices coincide with target ones: same alphabet, same order.
    if local.graph.labels != g.labels {
        return Err(Error::input("pattern labels do not match the target graph"));
    }
    let n = p.dom.len();
    let mut order = vec![0];
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for &(v, l) in local.graph.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some((u, l));
                order.push(v);
            }
        }
        i += 1;
    }
    let checks = local
        .graph
        .arcs()
        .filter(|&(u, v, _)| parent[v].map(|(w, _)| w) != Some(u) && parent[u].map(|(w, _)| w) != Some(v))
        .collect();
    Ok(Plan { order, parent, checks })
}

fn search(
    plan: &Plan,
    p: &KPattern,
    g: &SLabeledGraph,
    f: &[u32],
    phi: &mut Vec<usize>,
    depth: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if depth == plan.order.len() {
        let ok = plan.checks.iter().all(|&(u, v, l)| g.label(phi[u], phi[v]) == Some(l));
        return ok && visit(phi);
    }
    let u = plan.order[depth];
    let (w, l) = plan.parent[u].expect("non-root positions have parents");
    let base = phi[w];
    for &(v, lv) in g.neighbors(base) {
        if lv == l && f[v] == p.values[u] {
            phi[u] = v;
            if search(plan, p, g, f, phi, depth + 1, visit) {
                return true;
            }
        }
    }
    false
}

/// Enumerates label-preserving homomorphisms `φ: G(dom p, S) → G` with
/// `f ∘ φ = p` until `visit` returns true. Returns whether it stopped early.
fn for_each_occurrence(
    group: Group,
    p: &KPattern,
    g: &SLabeledGraph,
    f: &[u32],
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> Result<bool> {
    if f.len() != g.n() {
        return Err(Error::input("coloring length differs from the vertex count"));
    }
    let plan = plan(group, p, g)?;
    let mut phi = vec![0; p.dom.len()];
    for x in 0..g.n() {
        if f[x] == p.values[0] {
            phi[0] = x;
            if search(&plan, p, g, f, &mut phi, 1, visit) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Whether `p` occurs in `f`, with a witness `φ` indexed like `p.dom`.
pub fn occurs(group: Group, p: &KPattern, g: &SLabeledGraph, f: &[u32]) -> Result<Option<Vec<usize>>> {
    let mut witness = None;
    for_each_occurrence(group, p, g, f, &mut |phi| {
        witness = Some(phi.to_vec());
        true
    })?;
    Ok(witness)
}

/// All homomorphisms of `G(dom p, S)` into `G`, ignoring colors.
pub fn placements(group: Group, p: &KPattern, g: &SLabeledGraph, limit: usize) -> Result<Vec<Vec<usize>>> {
    let blank = KPattern { dom: p.dom.clone(), values: vec![0; p.dom.len()] };
    let zeros = vec![0u32; g.n()];
    let mut out = Vec::new();
    let mut overflow = false;
    for_each_occurrence(group, &blank, g, &zeros, &mut |phi| {
        if out.len() == limit {
            overflow = true;
            return true;
        }
        out.push(phi.to_vec());
        false
    })?;
    if overflow {
        return Err(Error::budget(format!("more than {limit} pattern placements")));
    }
    Ok(out)
}

/// `{p_{i,σ} : i < k, σ ∈ S ∖ {1}}` with `p_{i,σ}(1) = p_{i,σ}(σ) = i`.
pub fn proper_coloring_patterns(group: Group, k: u32, s: &FiniteSubset) -> Result<PatternSet> {
    let mut patterns = Vec::new();
    for i in 0..k {
        for sigma in s {
            if !group.is_identity(sigma) {
                patterns.push(KPattern::new(group, vec![(group.identity(), i), (sigma.clone(), i)])?);
            }
        }
    }
    PatternSet::new(k.max(1), patterns)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub pattern: usize,
    pub witness: Vec<usize>,
}

/// Checks every pattern; returns one witness per occurring pattern.
pub fn is_avoiding(
    group: Group,
    f: &[u32],
    g: &SLabeledGraph,
    set: &PatternSet,
) -> Result<(bool, Vec<Violation>)> {
    let mut violations = Vec::new();
    for (i, p) in set.patterns.iter().enumerate() {
        if let Some(witness) = occurs(group, p, g, f)? {
            violations.push(Violation { pattern: i, witness });
        }
    }
    Ok((violations.is_empty(), violations))
}

/// Patterns with domain `F` occurring in a coloring of an S-labeled graph
/// (homomorphism sense; `F` must be S-connected).
pub fn occurring_patterns_graph(
    group: Group,
    domain: &FiniteSubset,
    g: &SLabeledGraph,
    f: &[u32],
    k: u32,
) -> Result<PatternSet> {
    let probe = KPattern::new(group, domain.iter().map(|e| (e.clone(), 0)).collect())?;
    let homs = placements(group, &probe, g, usize::MAX)?;
    let mut seen = BTreeSet::new();
    for phi in homs {
        seen.insert(phi.iter().map(|&v| f[v]).collect::<Vec<_>>());
    }
    let patterns = seen
        .into_iter()
        .map(|vals| KPattern::new(group, probe.dom.iter().cloned().zip(vals).collect()))
        .collect::<Result<Vec<_>>>()?;
    PatternSet::new(k, patterns)
}

/// Patterns `γ ↦ f(γ·x)` on `F` for every point `x` of a torus; `f` is
/// indexed in torus order.
pub fn occurring_patterns_torus(group: Group, domain: &FiniteSubset, f: &[u32], k: u32) -> Result<PatternSet> {
    let points = group.elements().ok_or_else(|| Error::input("action-based occurrence needs a torus"))?;
    if f.len() != points.len() {
        return Err(Error::input("coloring length differs from the torus order"));
    }
    let mut seen = BTreeSet::new();
    for x in &points {
        let vals = domain
            .iter()
            .map(|gamma| Ok(f[group.torus_index(&group.multiply(gamma, x)?).expect("torus")]))
            .collect::<Result<Vec<_>>>()?;
        seen.insert(vals);
    }
    let patterns = seen
        .into_iter()
        .map(|vals| KPattern::new(group, domain.iter().cloned().zip(vals).collect()))
        .collect::<Result<Vec<_>>>()?;
    PatternSet::new(k, patterns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cayley_subgraph;

    fn z2() -> Group {
        Group::lattice(2).unwrap()
    }

    fn v(g: Group, c: &[i64]) -> GroupElement {
        g.vector(c).unwrap()
    }

    fn torus_cayley(q: i64, d: usize) -> (Group, crate::graph::CayleySubgraph) {
        let g = Group::torus(d, q).unwrap();
        let all = FiniteSubset::from_elements(g.elements().unwrap());
        let gens = FiniteSubset::from_elements((0..d).map(|i| {
            let mut e = vec![0; d];
            e[i] = 1;
            g.vector(&e).unwrap()
        }));
        let c = cayley_subgraph(g, &all, &gens).unwrap();
        (g, c)
    }

    #[test]
    fn connectivity_examples() {
        let g = z2();
        let s = FiniteSubset::from_elements([v(g, &[1, 0]), v(g, &[0, 1])]);
        let edge = KPattern::new(g, vec![(v(g, &[0, 0]), 0), (v(g, &[1, 0]), 0)]).unwrap();
        assert!(is_s_connected(g, &edge, &s).unwrap());
        let gap = KPattern::new(g, vec![(v(g, &[0, 0]), 0), (v(g, &[2, 0]), 0)]).unwrap();
        assert!(!is_s_connected(g, &gap, &s).unwrap());
        let tromino =
            KPattern::new(g, vec![(v(g, &[0, 0]), 0), (v(g, &[1, 0]), 1), (v(g, &[1, 1]), 2)]).unwrap();
        assert!(is_s_connected(g, &tromino, &s).unwrap());
    }

    #[test]
    fn normalization_contains_identity() {
        let g = z2();
        let p = KPattern::new(g, vec![(v(g, &[3, 4]), 1), (v(g, &[4, 4]), 2)]).unwrap();
        assert_eq!(p.value_at(&g.identity()), Some(1));
        assert_eq!(p.value_at(&v(g, &[1, 0])), Some(2));
    }

    #[test]
    fn single_vertex_and_monochromatic_edge() {
        let (g, c) = torus_cayley(5, 1);
        let f = vec![0, 1, 1, 0, 1];
        let single = KPattern::new(g, vec![(g.identity(), 1)]).unwrap();
        assert!(occurs(g, &single, &c.graph, &f).unwrap().is_some());
        let absent = KPattern::new(g, vec![(g.identity(), 2)]).unwrap();
        assert!(occurs(g, &absent, &c.graph, &f).unwrap().is_none());
        let mono = KPattern::new(g, vec![(g.identity(), 1), (g.vector(&[1]).unwrap(), 1)]).unwrap();
        let w = occurs(g, &mono, &c.graph, &f).unwrap().unwrap();
        assert_eq!(w, vec![1, 2]);
        let gap = KPattern::new(g, vec![(g.identity(), 1), (g.vector(&[2]).unwrap(), 1)]).unwrap();
        assert!(occurs(g, &gap, &c.graph, &f).is_err());
    }

    #[test]
    fn proper_pattern_counts() {
        let g = Group::lattice(1).unwrap();
        let s = FiniteSubset::from_elements([g.vector(&[1]).unwrap()]);
        assert_eq!(proper_coloring_patterns(g, 2, &s).unwrap().len(), 2);
        let id = FiniteSubset::from_elements([g.identity()]);
        assert!(proper_coloring_patterns(g, 2, &id).unwrap().is_empty());
    }

    #[test]
    fn avoidance_equals_properness_on_c5() {
        let (g, c) = torus_cayley(5, 1);
        let s = FiniteSubset::from_elements([g.vector(&[1]).unwrap()]);
        let set = proper_coloring_patterns(g, 2, &s).unwrap();
        let under = c.graph.underlying();
        for mask in 0u32..32 {
            let f: Vec<u32> = (0..5).map(|i| (mask >> i) & 1).collect();
            let (avoid, _) = is_avoiding(g, &f, &c.graph, &set).unwrap();
            assert_eq!(avoid, under.is_proper_coloring(&f));
        }
    }

    #[test]
    fn avoiding_basics() {
        let (g, c) = torus_cayley(4, 1);
        let f = vec![0, 0, 1, 1];
        assert!(is_avoiding(g, &f, &c.graph, &PatternSet::default()).unwrap().0);
        let unused = PatternSet::new(3, vec![KPattern::new(g, vec![(g.identity(), 2)]).unwrap()]).unwrap();
        assert!(is_avoiding(g, &f, &c.graph, &unused).unwrap().0);
        let planted =
            PatternSet::new(2, vec![KPattern::new(g, vec![(g.identity(), 0), (g.vector(&[1]).unwrap(), 0)]).unwrap()])
                .unwrap();
        let (ok, viol) = is_avoiding(g, &f, &c.graph, &planted).unwrap();
        assert!(!ok);
        assert_eq!(viol[0].witness, vec![0, 1]);
    }

    #[test]
    fn domino_matches_anchor_scan() {
        let (g, c) = torus_cayley(4, 2);
        let f: Vec<u32> = (0..16).map(|i| ((i * 7 + i / 3) % 3) as u32).collect();
        for a in 0..3 {
            for b in 0..3 {
                let p = KPattern::new(g, vec![(v(g, &[0, 0]), a), (v(g, &[1, 0]), b)]).unwrap();
                let scan = g.elements().unwrap().iter().any(|x| {
                    let y = g.multiply(&v(g, &[1, 0]), x).unwrap();
                    f[g.torus_index(x).unwrap()] == a && f[g.torus_index(&y).unwrap()] == b
                });
                assert_eq!(occurs(g, &p, &c.graph, &f).unwrap().is_some(), scan);
            }
        }
    }

    #[test]
    fn occurring_torus_examples() {
        let (g, c) = torus_cayley(4, 2);
        let constant = vec![1u32; 16];
        let dom = FiniteSubset::from_elements([v(g, &[0, 0]), v(g, &[1, 0])]);
        assert_eq!(occurring_patterns_torus(g, &dom, &constant, 2).unwrap().len(), 1);
        let id = FiniteSubset::from_elements([g.identity()]);
        let f: Vec<u32> = (0..16).map(|i| (i % 3) as u32).collect();
        assert_eq!(occurring_patterns_torus(g, &id, &f, 3).unwrap().len(), 3);
        let checker: Vec<u32> = g
            .elements()
            .unwrap()
            .iter()
            .map(|e| match e {
                GroupElement::Vector(x) => ((x[0] + x[1]) % 2) as u32,
                _ => unreachable!(),
            })
            .collect();
        let pats = occurring_patterns_torus(g, &dom, &checker, 2).unwrap();
        let vals: BTreeSet<Vec<u32>> = pats.patterns.iter().map(|p| p.values.clone()).collect();
        assert_eq!(vals, BTreeSet::from([vec![0, 1], vec![1, 0]]));
        let via_graph = occurring_patterns_graph(g, &dom, &c.graph, &checker, 2).unwrap();
        assert_eq!(via_graph, pats);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn connected_domain() -> impl Strategy<Value = Vec<(i64, i64)>> {
            proptest::collection::vec(0usize..4, 0..3).prop_map(|steps| {
                let dirs = [(1, 0), (0, 1), (-1, 0), (0, -1)];
                let mut cur = (0i64, 0i64);
                let mut out = vec![cur];
                for s in steps {
                    cur = (cur.0 + dirs[s].0, cur.1 + dirs[s].1);
                    if !out.contains(&cur) {
                        out.push(cur);
                    }
                }
                out
            })
        }

        proptest! {
            #[test]
            fn occurs_agrees_with_anchor_scan(q in 3i64..7, dom in connected_domain(), seed in any::<u64>(), vals in proptest::collection::vec(0u32..2, 4)) {
                let (g, c) = torus_cayley(q, 2);
                let n = (q * q) as usize;
                let f: Vec<u32> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u32).collect();
                let entries: Vec<(GroupElement, u32)> = dom.iter().zip(&vals).map(|(&(a, b), &c)| (g.vector(&[a, b]).unwrap(), c)).collect();
                let raw = entries.clone();
                let p = KPattern::new(g, entries).unwrap();
                let scan = g.elements().unwrap().iter().any(|x| raw.iter().all(|(e, c)| {
                    f[g.torus_index(&g.multiply(e, x).unwrap()).unwrap()] == *c
                }));
                prop_assert_eq!(occurs(g, &p, &c.graph, &f).unwrap().is_some(), scan);
            }

            #[test]
            fn homomorphism_transfers_avoidance(q in 3i64..6, seed in any::<u64>()) {
                // G: a cycle of length 2q wrapping twice around the q-cycle H.
                let (g, h) = torus_cayley(q, 1);
                let (g2, big) = torus_cayley(2 * q, 1);
                let s = FiniteSubset::from_elements([g.vector(&[1]).unwrap()]);
                let set = proper_coloring_patterns(g, 3, &s).unwrap();
                let set2 = proper_coloring_patterns(g2, 3, &FiniteSubset::from_elements([g2.vector(&[1]).unwrap()])).unwrap();
                let hcol: Vec<u32> = (0..q as usize).map(|i| ((seed >> (2 * i)) % 3) as u32).collect();
                let fcol: Vec<u32> = (0..2 * q as usize).map(|i| hcol[i % q as usize]).collect();
                let h_avoids = is_avoiding(g, &hcol, &h.graph, &set).unwrap().0;
                let f_avoids = is_avoiding(g2, &fcol, &big.graph, &set2).unwrap().0;
                prop_assert!(!h_avoids || f_avoids);
            }
        }
    }
}
