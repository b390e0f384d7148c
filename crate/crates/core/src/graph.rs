use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::group::{FiniteSubset, Group, GroupElement};

/// Finite simple undirected graph on vertices `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n] }
    }

    /// Builds a graph from an edge list; loops and duplicates are discarded.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Graph::new(n);
        for (u, v) in edges {
            if u != v {
                g.adj[u].push(v);
                g.adj[v].push(u);
            }
        }
        g.normalize();
        g
    }

    /// Builds a graph from adjacency lists; lists are symmetrized and deduplicated.
    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        let n = adj.len();
        Graph::from_edges(
            n,
            adj.iter().enumerate().flat_map(|(u, ns)| ns.iter().map(move |&v| (u, v))),
        )
    }

    fn normalize(&mut self) {
        for ns in &mut self.adj {
            ns.sort_unstable();
            ns.dedup();
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// Breadth-first distances from `src`, `None` for unreachable vertices
    /// or vertices beyond `limit`.
    pub fn distances(&self, src: usize, limit: usize) -> Vec<Option<usize>> {
        bfs(self.n(), src, limit, |v| self.adj[v].iter().copied())
    }

    pub fn is_bipartite(&self) -> bool {
        let mut side: Vec<Option<bool>> = vec![None; self.n()];
        for s in 0..self.n() {
            if side[s].is_some() {
                continue;
            }
            side[s] = Some(false);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                let su = side[u].expect("visited");
                for &v in &self.adj[u] {
                    match side[v] {
                        None => {
                            side[v] = Some(!su);
                            stack.push(v);
                        }
                        Some(sv) if sv == su => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }

    pub fn is_proper_coloring<T: PartialEq>(&self, colors: &[T]) -> bool {
        self.edges().all(|(u, v)| colors[u] != colors[v])
    }
}

pub(crate) fn bfs<I: Iterator<Item = usize>>(
    n: usize,
    src: usize,
    limit: usize,
    mut nbrs: impl FnMut(usize) -> I,
) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued vertices have distances");
        if du == limit {
            continue;
        }
        for v in nbrs(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// The label alphabet `(S ∪ S⁻¹) ∖ {1}`: each non-identity generator,
/// followed by its inverse when new. Returns labels and the inverse table.
pub fn label_alphabet(group: Group, s: &FiniteSubset) -> Result<(Vec<GroupElement>, Vec<usize>)> {
    let mut labels = FiniteSubset::new();
    for sigma in s {
        group.validate(sigma)?;
        if group.is_identity(sigma) {
            continue;
        }
        labels.insert(sigma.clone());
        labels.insert(group.inverse(sigma)?);
    }
    let inverse = labels
        .iter()
        .map(|l| labels.position(&group.inverse(l).expect("validated")).expect("closed under inverse"))
        .collect();
    Ok((labels.as_slice().to_vec(), inverse))
}

/// Simple graph whose ordered adjacent pairs carry labels with
/// `λ(y, x) = λ(x, y)⁻¹`. Labels are indices into `labels`.
#[derive(Clone, Debug, PartialEq)]
pub struct SLabeledGraph {
    pub labels: Vec<GroupElement>,
    pub inverse_label: Vec<usize>,
    adj: Vec<Vec<(usize, usize)>>,
}

impl SLabeledGraph {
    pub fn new(n: usize, labels: Vec<GroupElement>, inverse_label: Vec<usize>) -> Self {
        SLabeledGraph { labels, inverse_label, adj: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Adds the edge `{u, v}` with `λ(u, v) = label` and the inverse label
    /// on the reverse pair. Returns false, changing nothing, on loops or
    /// already adjacent pairs.
    pub fn add_edge(&mut self, u: usize, v: usize, label: usize) -> bool {
        if u == v || self.label(u, v).is_some() {
            return false;
        }
        let inv = self.inverse_label[label];
        insert_sorted(&mut self.adj[u], (v, label));
        insert_sorted(&mut self.adj[v], (u, inv));
        true
    }

    /// Adds only the ordered pair `(u, v)`; callers must also add the
    /// reverse arc and then call [`SLabeledGraph::finish_arcs`].
    pub(crate) fn push_arc(&mut self, u: usize, v: usize, label: usize) {
        self.adj[u].push((v, label));
    }

    pub(crate) fn finish_arcs(&mut self) {
        for ns in &mut self.adj {
            ns.sort_unstable();
            ns.dedup();
        }
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    pub fn label(&self, u: usize, v: usize) -> Option<usize> {
        let ns = &self.adj[u];
        let i = ns.partition_point(|&(w, _)| w < v);
        (i < ns.len() && ns[i].0 == v).then(|| ns[i].1)
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of unordered adjacent pairs.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().map(move |&(v, l)| (u, v, l)))
    }

    /// Checks irreflexivity, a single label per ordered pair and
    /// `λ(y, x) = λ(x, y)⁻¹` on every arc.
    pub fn check_antisymmetry(&self) -> Result<()> {
        for (u, ns) in self.adj.iter().enumerate() {
            for w in ns.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::invariant(format!("pair ({u}, {}) carries two labels", w[0].0)));
                }
            }
            for &(v, l) in ns {
                if u == v {
                    return Err(Error::invariant(format!("self-loop at {u}")));
                }
                if self.label(v, u) != Some(self.inverse_label[l]) {
                    return Err(Error::invariant(format!("label of ({v}, {u}) is not the inverse of ({u}, {v})")));
                }
            }
        }
        Ok(())
    }

    pub fn underlying(&self) -> Graph {
        Graph::from_edges(self.n(), self.arcs().map(|(u, v, _)| (u, v)))
    }

    pub fn distances(&self, src: usize, limit: usize) -> Vec<Option<usize>> {
        bfs(self.n(), src, limit, |v| self.adj[v].iter().map(|&(w, _)| w))
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.distances(0, usize::MAX).iter().all(Option::is_some)
    }
}

fn insert_sorted(v: &mut Vec<(usize, usize)>, item: (usize, usize)) {
    let i = v.partition_point(|x| x < &item);
    v.insert(i, item);
}

/// `G(F, S)` together with the element behind each vertex.
#[derive(Clone, Debug)]
pub struct CayleySubgraph {
    pub elements: FiniteSubset,
    pub graph: SLabeledGraph,
}

/// The subgraph of the Cayley graph induced on `f`: distinct `x, y` are
/// adjacent iff `y = σ·x` for a label `σ`. If several labels join the same
/// pair the first one found (vertex order, then label order) is kept.
pub fn cayley_subgraph(group: Group, f: &FiniteSubset, s: &FiniteSubset) -> Result<CayleySubgraph> {
    let (labels, inverse) = label_alphabet(group, s)?;
    let mut graph = SLabeledGraph::new(f.len(), labels, inverse);
    for (u, x) in f.iter().enumerate() {
        group.validate(x)?;
        for l in 0..graph.labels.len() {
            let y = group.multiply(&graph.labels[l], x)?;
            if let Some(v) = f.position(&y) {
                graph.add_edge(u, v, l);
            }
        }
    }
    Ok(CayleySubgraph { elements: f.clone(), graph })
}

impl CayleySubgraph {
    /// Checks `y = λ(x, y)·x` on every arc.
    pub fn check_labels(&self, group: Group) -> Result<()> {
        for (u, v, l) in self.graph.arcs() {
            let y = group.multiply(&self.graph.labels[l], self.elements.get(u))?;
            if &y != self.elements.get(v) {
                return Err(Error::invariant(format!("arc ({u}, {v}) label does not translate")));
            }
        }
        Ok(())
    }
}
