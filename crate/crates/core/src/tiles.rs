//! Tile graphs `H_{D,n}`, homomorphisms into them, and the search for
//! pattern-avoiding colorings.

use std::collections::BinaryHeap;
use std::io::{Read, Write};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{label_alphabet, CayleySubgraph, SLabeledGraph};
use crate::group::{power_set, product_set, symmetrize, FiniteSubset, Group, GroupElement, GroupSpec};
use crate::local::log_star;
use crate::patterns::{placements, PatternSet};

pub const DEFAULT_TILE_BUDGET: u64 = 20_000_000;
pub const DEFAULT_SEARCH_BUDGET: u64 = 200_000;
const PLACEMENT_LIMIT: usize = 50_000_000;

/// `n·(n−1)···(n−len+1)`, or `None` on overflow.
pub fn injection_count(n: usize, len: usize) -> Option<u64> {
    if len > n {
        return Some(0);
    }
    (0..len).try_fold(1u64, |acc, i| acc.checked_mul((n - i) as u64))
}

fn injection_count_big(n: usize, len: usize) -> BigUint {
    if len > n {
        return BigUint::from(0u32);
    }
    (0..len).fold(BigUint::from(1u32), |acc, i| acc * BigUint::from(n - i))
}

/// Lexicographic rank of an injective tuple with values below `n`.
pub fn rank_injection(q: &[usize], n: usize) -> u64 {
    let len = q.len();
    let mut used = vec![false; n];
    let mut rank = 0u64;
    for (i, &v) in q.iter().enumerate() {
        let smaller = (0..v).filter(|&w| !used[w]).count() as u64;
        rank += smaller * injection_count(n - i - 1, len - i - 1).expect("rank fits");
        used[v] = true;
    }
    rank
}

pub fn unrank_injection(mut rank: u64, len: usize, n: usize) -> Vec<usize> {
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let block = injection_count(n - i - 1, len - i - 1).expect("rank fits");
        let mut digit = rank / block;
        rank %= block;
        let v = (0..n)
            .find(|&w| {
                if used[w] {
                    return false;
                }
                if digit == 0 {
                    return true;
                }
                digit -= 1;
                false
            })
            .expect("rank in range");
        used[v] = true;
        out.push(v);
    }
    out
}

fn is_injective(q: &[usize]) -> bool {
    let mut seen = std::collections::HashSet::new();
    q.iter().all(|v| seen.insert(*v))
}

/// `δ = δ′σ ⟹ q(δ) = q′(δ′)` for all `δ, δ′ ∈ D`; `q` and `q′` are indexed
/// like `D`.
pub fn sigma_compatible(
    group: Group,
    d_set: &FiniteSubset,
    q: &[usize],
    q2: &[usize],
    sigma: &GroupElement,
) -> Result<bool> {
    for (j, dp) in d_set.iter().enumerate() {
        if let Some(i) = d_set.position(&group.multiply(dp, sigma)?) {
            if q[i] != q2[j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// For each label `σ` and position `j`, the position of `D[j]·σ` in `D`.
fn shift_table(group: Group, d_set: &FiniteSubset, labels: &[GroupElement]) -> Result<Vec<Vec<Option<usize>>>> {
    labels
        .iter()
        .map(|sigma| d_set.iter().map(|dp| Ok(d_set.position(&group.multiply(dp, sigma)?))).collect())
        .collect()
}

fn check_d_contains_generators(group: Group, d_set: &FiniteSubset, s: &FiniteSubset) -> Result<()> {
    if !d_set.contains(&group.identity()) {
        return Err(Error::input("D must contain the identity"));
    }
    for e in symmetrize(group, s).iter() {
        if !d_set.contains(e) {
            return Err(Error::input(format!("D must contain S ∪ S⁻¹; missing {e}")));
        }
    }
    Ok(())
}

/// The S-labeled graph on `Inj(D, n)` with σ-compatibility edges.
/// Vertices are lexicographic ranks of the tuples `(q(D[0]), …)`.
#[derive(Clone, Debug)]
pub struct TileGraph {
    pub spec: GroupSpec,
    pub d_set: FiniteSubset,
    pub n: usize,
    pub graph: SLabeledGraph,
}

impl TileGraph {
    pub fn group(&self) -> Group {
        self.spec.group
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.n()
    }

    pub fn injection(&self, rank: usize) -> Vec<usize> {
        unrank_injection(rank as u64, self.d_set.len(), self.n)
    }

    pub fn rank(&self, q: &[usize]) -> usize {
        rank_injection(q, self.n) as usize
    }

    /// Antisymmetry, irreflexivity and σ-compatibility of every arc.
    pub fn verify(&self) -> Result<()> {
        self.graph.check_antisymmetry()?;
        for (u, v, l) in self.graph.arcs() {
            if !sigma_compatible(self.group(), &self.d_set, &self.injection(u), &self.injection(v), &self.graph.labels[l])? {
                return Err(Error::invariant(format!("arc ({u}, {v}) is not compatible")));
            }
        }
        Ok(())
    }
}

fn completions(free: &[usize], used: &mut Vec<bool>, q: &mut Vec<usize>, depth: usize, out: &mut dyn FnMut(&[usize])) {
    if depth == free.len() {
        out(q);
        return;
    }
    for v in 0..used.len() {
        if !used[v] {
            used[v] = true;
            q[free[depth]] = v;
            completions(free, used, q, depth + 1, out);
            used[v] = false;
        }
    }
}

/// Builds `H_{D,n}`. `budget` bounds the number of stored arcs.
pub fn build_tile_graph(spec: &GroupSpec, d_set: &FiniteSubset, n: usize, budget: u64) -> Result<TileGraph> {
    let group = spec.group;
    let s = spec.generator_set();
    check_d_contains_generators(group, d_set, &s)?;
    let len = d_set.len();
    let vertices = injection_count(n, len).filter(|&v| v <= budget).ok_or_else(|| {
        Error::budget(format!("{} injections exceed the budget {budget}", injection_count_big(n, len)))
    })?;
    let (labels, inverse) = label_alphabet(group, &s)?;
    let table = shift_table(group, d_set, &labels)?;
    let mut arcs_estimate = 0u64;
    for row in &table {
        let fixed = row.iter().flatten().count();
        arcs_estimate = arcs_estimate
            .saturating_add(vertices.saturating_mul(injection_count(n - fixed, len - fixed).unwrap_or(u64::MAX)));
    }
    if arcs_estimate > budget.saturating_mul(8) {
        return Err(Error::budget(format!("about {arcs_estimate} arcs exceed the budget")));
    }
    let mut graph = SLabeledGraph::new(vertices as usize, labels, inverse);
    let mut q2 = vec![0usize; len];
    let mut used = vec![false; n];
    for r in 0..vertices {
        let q = unrank_injection(r, len, n);
        for (l, row) in table.iter().enumerate() {
            used.iter_mut().for_each(|u| *u = false);
            let mut free = Vec::new();
            for (j, src) in row.iter().enumerate() {
                match src {
                    Some(i) => {
                        q2[j] = q[*i];
                        used[q[*i]] = true;
                    }
                    None => free.push(j),
                }
            }
            let mut targets = Vec::new();
            completions(&free, &mut used, &mut q2, 0, &mut |t| targets.push(rank_injection(t, n) as usize));
            for t in targets {
                graph.push_arc(r as usize, t, l);
            }
        }
    }
    graph.finish_arcs();
    Ok(TileGraph { spec: spec.clone(), d_set: d_set.clone(), n, graph })
}

/// Greedy extension of `q` (indexed like `D`) to a proper `n`-coloring of
/// `G(window, D)`, where `x ~ y` iff `y = δ·x` for some `δ ∈ (D ∪ D⁻¹) ∖ {1}`.
/// Colors are indexed like `window`.
pub fn extend_injection_to_proper(
    group: Group,
    q: &[usize],
    window: &FiniteSubset,
    d_set: &FiniteSubset,
    n: usize,
) -> Result<Vec<usize>> {
    if n < 2 * d_set.len() {
        return Err(Error::input(format!("need n ≥ 2|D| = {}", 2 * d_set.len())));
    }
    if q.len() != d_set.len() || !is_injective(q) || q.iter().any(|&c| c >= n) {
        return Err(Error::input("q must be an injection D → n"));
    }
    if !d_set.is_subset_of(window) {
        return Err(Error::input("window must contain D"));
    }
    let steps: Vec<GroupElement> =
        symmetrize(group, d_set).iter().filter(|e| !group.is_identity(e)).cloned().collect();
    let mut color: Vec<Option<usize>> = vec![None; window.len()];
    for (j, dl) in d_set.iter().enumerate() {
        color[window.position(dl).expect("subset")] = Some(q[j]);
    }
    for (u, x) in window.iter().enumerate() {
        if color[u].is_some() {
            continue;
        }
        let mut taken = vec![false; n];
        for st in &steps {
            if let Some(v) = window.position(&group.multiply(st, x)?) {
                if let Some(c) = color[v] {
                    taken[c] = true;
                }
            }
        }
        color[u] = Some(taken.iter().position(|t| !t).expect("degree below n"));
    }
    Ok(color.into_iter().map(|c| c.expect("all colored")).collect())
}

/// Whether `colors` is proper for `G(window, D)`.
pub fn is_proper_for(group: Group, window: &FiniteSubset, d_set: &FiniteSubset, colors: &[usize]) -> Result<bool> {
    for (u, x) in window.iter().enumerate() {
        for dl in d_set.iter().filter(|e| !group.is_identity(e)) {
            if let Some(v) = window.position(&group.multiply(dl, x)?) {
                if v != u && colors[u] == colors[v] {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// `x ↦ q_x` with `q_x(δ) = f(δ·x)`, where `f` is a greedy proper coloring
/// of the torus under `x ~ δδ′⁻¹·x`. Returns tuples in torus order.
pub fn schreier_to_tile_hom(spec: &GroupSpec, d_set: &FiniteSubset, n: usize) -> Result<Vec<Vec<usize>>> {
    let group = spec.group;
    let points = group.elements().ok_or_else(|| Error::input("the source graph must be a torus"))?;
    check_d_contains_generators(group, d_set, &spec.generator_set())?;
    if n < d_set.len() * d_set.len() {
        return Err(Error::input(format!("need n ≥ |D|² = {}", d_set.len() * d_set.len())));
    }
    let ratios = product_set(group, d_set, &crate::group::inverse_set(group, d_set))?;
    let steps: Vec<&GroupElement> = ratios.iter().filter(|e| !group.is_identity(e)).collect();
    let mut f: Vec<Option<usize>> = vec![None; points.len()];
    for (u, x) in points.iter().enumerate() {
        let mut taken = vec![false; n];
        for st in &steps {
            let v = group.torus_index(&group.multiply(st, x)?).expect("torus");
            if let Some(c) = f[v] {
                taken[c] = true;
            }
        }
        f[u] = Some(taken.iter().position(|t| !t).ok_or_else(|| Error::invariant("greedy coloring ran out"))?);
    }
    points
        .iter()
        .map(|x| {
            d_set
                .iter()
                .map(|dl| Ok(f[group.torus_index(&group.multiply(dl, x)?).expect("torus")].expect("colored")))
                .collect()
        })
        .collect()
}

/// Injectivity of each `q_x` and σ-compatibility along every arc of a
/// Cayley subgraph.
pub fn check_tile_hom(group: Group, source: &CayleySubgraph, d_set: &FiniteSubset, q: &[Vec<usize>]) -> Result<()> {
    for (x, qx) in q.iter().enumerate() {
        if qx.len() != d_set.len() || !is_injective(qx) {
            return Err(Error::invariant(format!("q at vertex {x} is not injective on D")));
        }
    }
    for (u, v, l) in source.graph.arcs() {
        if !sigma_compatible(group, d_set, &q[u], &q[v], &source.graph.labels[l])? {
            return Err(Error::invariant(format!("arc ({u}, {v}) breaks σ-compatibility")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchOutcome {
    Found(Vec<u32>),
    Unsat,
    Indeterminate { nodes: u64 },
}

/// Forbidden partial assignments derived from pattern placements.
struct Nogoods {
    k: usize,
    lits: Vec<(u32, u8)>,
    offsets: Vec<usize>,
    watch: Vec<Vec<u32>>,
}

fn nogoods(group: Group, graph: &SLabeledGraph, set: &PatternSet) -> Result<Nogoods> {
    let k = set.k as usize;
    let mut lits = Vec::new();
    let mut offsets = vec![0];
    let mut watch: Vec<Vec<u32>> = vec![Vec::new(); graph.n() * k];
    for p in &set.patterns {
        for phi in placements(group, p, graph, PLACEMENT_LIMIT)? {
            let mut clause: Vec<(u32, u8)> = phi.iter().zip(&p.values).map(|(&v, &c)| (v as u32, c as u8)).collect();
            clause.sort_unstable();
            clause.dedup();
            if clause.windows(2).any(|w| w[0].0 == w[1].0) {
                continue;
            }
            let id = offsets.len() as u32 - 1;
            for &(v, c) in &clause {
                watch[v as usize * k + c as usize].push(id);
            }
            lits.extend(clause);
            offsets.push(lits.len());
        }
    }
    Ok(Nogoods { k, lits, offsets, watch })
}

enum Trail {
    Assign(usize),
    Prune(usize, u64),
}

struct SearchState<'a> {
    ng: &'a Nogoods,
    domain: Vec<u64>,
    value: Vec<Option<u8>>,
    trail: Vec<Trail>,
    heap: BinaryHeap<(i64, usize, std::cmp::Reverse<usize>)>,
    weight: Vec<usize>,
}

impl SearchState<'_> {
    fn push(&mut self, v: usize) {
        let key = -(self.domain[v].count_ones() as i64);
        self.heap.push((key, self.weight[v], std::cmp::Reverse(v)));
    }

    fn prune(&mut self, v: usize, c: usize) -> bool {
        let bit = 1u64 << c;
        if self.domain[v] & bit != 0 {
            self.trail.push(Trail::Prune(v, self.domain[v]));
            self.domain[v] &= !bit;
            self.push(v);
        }
        self.domain[v] != 0
    }

    fn assign(&mut self, v: usize, c: usize) -> bool {
        self.trail.push(Trail::Assign(v));
        self.value[v] = Some(c as u8);
        let ng = self.ng;
        for &id in &ng.watch[v * ng.k + c] {
            let clause = &ng.lits[ng.offsets[id as usize]..ng.offsets[id as usize + 1]];
            let mut open = None;
            let mut open_count = 0;
            let mut dead = false;
            for &(u, cu) in clause {
                match self.value[u as usize] {
                    Some(x) if x == cu => {}
                    Some(_) => {
                        dead = true;
                        break;
                    }
                    None => {
                        open_count += 1;
                        open = Some((u as usize, cu as usize));
                    }
                }
            }
            if dead {
                continue;
            }
            match open_count {
                0 => return false,
                1 => {
                    let (u, cu) = open.expect("one open literal");
                    if !self.prune(u, cu) {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }

    fn undo(&mut self, len: usize) {
        while self.trail.len() > len {
            match self.trail.pop().expect("nonempty") {
                Trail::Assign(v) => {
                    self.value[v] = None;
                    self.push(v);
                }
                Trail::Prune(v, old) => {
                    self.domain[v] = old;
                    if self.value[v].is_none() {
                        self.push(v);
                    }
                }
            }
        }
    }

    fn pick(&mut self) -> Option<usize> {
        while let Some((key, _, std::cmp::Reverse(v))) = self.heap.pop() {
            if self.value[v].is_none() && -(self.domain[v].count_ones() as i64) == key {
                return Some(v);
            }
        }
        None
    }
}

/// Seed of the local-search phase; fixed so outcomes are reproducible.
pub const LOCAL_SEARCH_SEED: u64 = 0x5eed_7ab0;

/// Tabu min-conflicts over the nogoods. Returns a coloring violating none.
fn local_search(ng: &Nogoods, n: usize, steps: u64) -> Option<Vec<u32>> {
    let k = ng.k;
    let m = ng.offsets.len() - 1;
    let len = |id: usize| (ng.offsets[id + 1] - ng.offsets[id]) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(LOCAL_SEARCH_SEED);
    let mut value = vec![0u8; n];
    let mut sat = vec![0u32; m];
    // Greedy start: fewest nogoods completed against earlier vertices.
    for v in 0..n {
        let best = (0..k)
            .min_by_key(|&c| ng.watch[v * k + c].iter().filter(|&&id| sat[id as usize] + 1 == len(id as usize)).count())
            .unwrap_or(0);
        value[v] = best as u8;
        for &id in &ng.watch[v * k + best] {
            sat[id as usize] += 1;
        }
    }
    let mut pos = vec![usize::MAX; m];
    let mut conflicts: Vec<u32> = Vec::new();
    for id in 0..m {
        if sat[id] == len(id) {
            pos[id] = conflicts.len();
            conflicts.push(id as u32);
        }
    }
    let mut tabu = vec![0u64; n * k];
    let mut best_total = conflicts.len();
    for it in 1..=steps {
        if conflicts.is_empty() {
            return Some(value.iter().map(|&c| c as u32).collect());
        }
        let id = conflicts[rng.gen_range(0..conflicts.len())] as usize;
        let mut chosen: Option<(usize, usize)> = None;
        let mut chosen_delta = i64::MAX;
        let mut ties = 0u32;
        for &(u, _) in &ng.lits[ng.offsets[id]..ng.offsets[id + 1]] {
            let u = u as usize;
            let cur = value[u] as usize;
            let lost = ng.watch[u * k + cur].iter().filter(|&&j| sat[j as usize] == len(j as usize)).count() as i64;
            for c in (0..k).filter(|&c| c != cur) {
                let gained = ng.watch[u * k + c].iter().filter(|&&j| sat[j as usize] + 1 == len(j as usize)).count() as i64;
                let delta = gained - lost;
                let aspired = (conflicts.len() as i64 + delta) < best_total as i64;
                if tabu[u * k + c] > it && !aspired {
                    continue;
                }
                if delta < chosen_delta {
                    chosen_delta = delta;
                    chosen = Some((u, c));
                    ties = 1;
                } else if delta == chosen_delta {
                    ties += 1;
                    if rng.gen_range(0..ties) == 0 {
                        chosen = Some((u, c));
                    }
                }
            }
        }
        let Some((u, c)) = chosen else { continue };
        let old = value[u] as usize;
        for &j in &ng.watch[u * k + old] {
            let j = j as usize;
            if sat[j] == len(j) {
                let p = pos[j];
                let last = conflicts.pop().expect("conflict present") as usize;
                if last != j {
                    conflicts[p] = last as u32;
                    pos[last] = p;
                }
                pos[j] = usize::MAX;
            }
            sat[j] -= 1;
        }
        for &j in &ng.watch[u * k + c] {
            let j = j as usize;
            sat[j] += 1;
            if sat[j] == len(j) {
                pos[j] = conflicts.len();
                conflicts.push(j as u32);
            }
        }
        value[u] = c as u8;
        tabu[u * k + old] = it + 10 + rng.gen_range(0..10) + (conflicts.len() as u64 * 6) / 10;
        best_total = best_total.min(conflicts.len());
    }
    conflicts.is_empty().then(|| value.iter().map(|&c| c as u32).collect())
}

/// Search for a coloring of `graph` in which no pattern of `set` occurs.
/// Backtracking with forward checking runs first and is complete within
/// `node_budget` tried assignments; if it runs out, a seeded tabu local
/// search gets the same number of moves. Only backtracking proves `Unsat`.
pub fn find_avoiding_coloring(
    group: Group,
    graph: &SLabeledGraph,
    set: &PatternSet,
    node_budget: u64,
) -> Result<SearchOutcome> {
    let k = set.k as usize;
    if k == 0 || k > 64 {
        return Err(Error::input("search supports 1 ≤ k ≤ 64"));
    }
    let ng = nogoods(group, graph, set)?;
    match backtrack(&ng, graph.n(), node_budget) {
        SearchOutcome::Indeterminate { nodes } => match local_search(&ng, graph.n(), node_budget) {
            Some(f) => Ok(SearchOutcome::Found(f)),
            None => Ok(SearchOutcome::Indeterminate { nodes: nodes + node_budget }),
        },
        done => Ok(done),
    }
}

fn backtrack(ng: &Nogoods, n: usize, node_budget: u64) -> SearchOutcome {
    let k = ng.k;
    let mut weight = vec![0usize; n];
    for v in 0..n {
        weight[v] = (0..k).map(|c| ng.watch[v * k + c].len()).sum();
    }
    let full = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut st = SearchState {
        ng,
        domain: vec![full; n],
        value: vec![None; n],
        trail: Vec::new(),
        heap: BinaryHeap::new(),
        weight,
    };
    // Unit nogoods remove colors outright.
    for id in 0..ng.offsets.len() - 1 {
        let clause = &ng.lits[ng.offsets[id]..ng.offsets[id + 1]];
        if let [(v, c)] = clause {
            st.domain[*v as usize] &= !(1u64 << c);
            if st.domain[*v as usize] == 0 {
                return SearchOutcome::Unsat;
            }
        }
    }
    st.trail.clear();
    for v in 0..n {
        st.push(v);
    }
    let mut stack: Vec<(usize, u64, usize)> = Vec::new();
    let mut nodes = 0u64;
    loop {
        match st.pick() {
            None => {
                let f = st.value.iter().map(|c| c.expect("all assigned") as u32).collect();
                return SearchOutcome::Found(f);
            }
            Some(v) => stack.push((v, st.domain[v], st.trail.len())),
        }
        loop {
            let Some(frame) = stack.last_mut() else {
                return SearchOutcome::Unsat;
            };
            let (v, remaining, mark) = *frame;
            st.undo(mark);
            if remaining == 0 {
                stack.pop();
                continue;
            }
            let c = remaining.trailing_zeros() as usize;
            frame.1 &= !(1u64 << c);
            nodes += 1;
            if nodes > node_budget {
                return SearchOutcome::Indeterminate { nodes };
            }
            if st.assign(v, c) {
                break;
            }
        }
    }
}

/// Least `n` with `log* n ≥ 1` and `n ≥ f^{2 log* n}`, with its `log*`.
pub fn tile_family_n(f_size: usize) -> Result<(u128, u32)> {
    if f_size == 0 {
        return Err(Error::input("F must be nonempty"));
    }
    let mut lower = 1u128;
    for l in 1u32..8 {
        let upper = if lower >= 128 { u128::MAX } else { 1u128 << lower };
        let need = (f_size as u128).checked_pow(2 * l).unwrap_or(u128::MAX);
        let cand = need.max(lower + 1);
        if cand <= upper && need != u128::MAX {
            debug_assert_eq!(log_star(cand), l);
            return Ok((cand, l));
        }
        lower = upper;
    }
    Err(Error::budget("no n found within u128 range"))
}

#[derive(Clone, Debug)]
pub struct TileFamilyMember {
    pub index: usize,
    pub f_size: usize,
    pub n: u128,
    pub log_star: u32,
    pub d_set: Option<FiniteSubset>,
    pub vertex_count: Option<BigUint>,
    pub graph: Option<TileGraph>,
}

/// The `i`-th member of the family: `n_i` from [`tile_family_n`],
/// `D_i = F_i^{log* n_i}`, and `H_{D_i, n_i}` when within `budget`.
pub fn tile_family(spec: &GroupSpec, f_sets: &[FiniteSubset], i: usize, budget: u64) -> Result<TileFamilyMember> {
    let f = f_sets.get(i).ok_or_else(|| Error::input(format!("no F set with index {i}")))?;
    let group = spec.group;
    let closed = spec.closed_generators();
    if !closed.is_subset_of(&f_sets[0]) {
        return Err(Error::input("F_1 must contain S ∪ S⁻¹ ∪ {1}"));
    }
    if f_sets.windows(2).any(|w| !w[0].is_subset_of(&w[1])) {
        return Err(Error::input("F sets must increase"));
    }
    let (n, ls) = tile_family_n(f.len())?;
    let mut member =
        TileFamilyMember { index: i, f_size: f.len(), n, log_star: ls, d_set: None, vertex_count: None, graph: None };
    let bound = (f.len() as u128).checked_pow(ls);
    if bound.is_none_or(|b| b > budget as u128) {
        return Ok(member);
    }
    let d_set = power_set(group, f, ls as usize)?;
    let count = if n > usize::MAX as u128 { None } else { Some(injection_count_big(n as usize, d_set.len())) };
    member.vertex_count = count.clone();
    if let Some(c) = count {
        if c <= BigUint::from(budget) {
            member.graph = Some(build_tile_graph(spec, &d_set, n as usize, budget)?);
        }
    }
    member.d_set = Some(d_set);
    Ok(member)
}

const MAGIC: &[u8; 4] = b"TLGR";
const VERSION: u32 = 1;

#[derive(Serialize)]
struct Header {
    group: Value,
    #[serde(rename = "D")]
    d: Vec<Value>,
    labels: Vec<Value>,
    #[serde(skip_serializing_if = "Value::is_null")]
    meta: Value,
}

/// Binary layout, little endian: `"TLGR"`, `u32` version, `u32 |D|`,
/// `u64 n`, `u32` header length and a JSON header (`group`, `D`,
/// `labels`), `u64` vertex count, `u64` edge count, then one
/// `(u64 rank, u64 rank, u32 label)` record per edge with the smaller rank
/// first. The reverse arc carries the inverse label.
pub fn write_tile_graph<W: Write>(tg: &TileGraph, w: W) -> std::io::Result<()> {
    write_tile_graph_with_meta(tg, &Value::Null, w)
}

/// As [`write_tile_graph`], with `meta` stored under the header key `meta`.
pub fn write_tile_graph_with_meta<W: Write>(tg: &TileGraph, meta: &Value, mut w: W) -> std::io::Result<()> {
    let group = tg.group();
    let header = Header {
        group: tg.spec.to_json(),
        d: tg.d_set.iter().map(|e| group.element_to_json(e)).collect(),
        labels: tg.graph.labels.iter().map(|e| group.element_to_json(e)).collect(),
        meta: meta.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tg.d_set.len() as u32).to_le_bytes())?;
    w.write_all(&(tg.n as u64).to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(tg.vertex_count() as u64).to_le_bytes())?;
    w.write_all(&(tg.graph.edge_count() as u64).to_le_bytes())?;
    for (u, v, l) in tg.graph.arcs().filter(|&(u, v, _)| u < v) {
        w.write_all(&(u as u64).to_le_bytes())?;
        w.write_all(&(v as u64).to_le_bytes())?;
        w.write_all(&(l as u32).to_le_bytes())?;
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::input(format!("truncated tile graph: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::input(format!("truncated tile graph: {e}")))?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_tile_graph<R: Read>(r: R) -> Result<TileGraph> {
    read_tile_graph_with_meta(r).map(|(tg, _)| tg)
}

/// The graph and the header's `meta` value (`null` when absent).
pub fn read_tile_graph_with_meta<R: Read>(mut r: R) -> Result<(TileGraph, Value)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::input(format!("truncated tile graph: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::input("not a tile graph file"));
    }
    if read_u32(&mut r)? != VERSION {
        return Err(Error::input("unsupported tile graph version"));
    }
    let d_len = read_u32(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let hlen = read_u32(&mut r)? as usize;
    let mut header = vec![0u8; hlen];
    r.read_exact(&mut header).map_err(|e| Error::input(format!("truncated header: {e}")))?;
    let header: Value = serde_json::from_slice(&header).map_err(|e| Error::input(format!("bad header: {e}")))?;
    let spec = GroupSpec::from_json(&header["group"])?;
    let d_vals = header["D"].as_array().ok_or_else(|| Error::input("header lacks D"))?;
    let d_set = FiniteSubset::from_elements(
        d_vals.iter().map(|v| spec.group.parse_element(v)).collect::<Result<Vec<_>>>()?,
    );
    if d_set.len() != d_len {
        return Err(Error::input("D length mismatch"));
    }
    let (labels, inverse) = label_alphabet(spec.group, &spec.generator_set())?;
    let vertices = read_u64(&mut r)? as usize;
    if Some(vertices as u64) != injection_count(n, d_len) {
        return Err(Error::input("vertex count does not match n and |D|"));
    }
    let edges = read_u64(&mut r)?;
    let mut graph = SLabeledGraph::new(vertices, labels, inverse);
    for _ in 0..edges {
        let u = read_u64(&mut r)? as usize;
        let v = read_u64(&mut r)? as usize;
        let l = read_u32(&mut r)? as usize;
        if u >= vertices || v >= vertices || l >= graph.labels.len() {
            return Err(Error::input("edge record out of range"));
        }
        graph.push_arc(u, v, l);
        let inv = graph.inverse_label[l];
        graph.push_arc(v, u, inv);
    }
    graph.finish_arcs();
    Ok((TileGraph { spec, d_set, n, graph }, header["meta"].clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::cayley_subgraph;
    use crate::group::box_set;
    use crate::patterns::{is_avoiding, proper_coloring_patterns, KPattern};

    fn z1() -> GroupSpec {
        let g = Group::lattice(1).unwrap();
        GroupSpec::new(g, vec![g.vector(&[1]).unwrap()]).unwrap()
    }

    fn interval(g: Group, lo: i64, hi: i64) -> FiniteSubset {
        box_set(g, &[lo], &[hi]).unwrap()
    }

    #[test]
    fn rank_round_trip() {
        let n = 6;
        let total = injection_count(n, 3).unwrap();
        assert_eq!(total, 120);
        for r in 0..total {
            let q = unrank_injection(r, 3, n);
            assert!(is_injective(&q));
            assert_eq!(rank_injection(&q, n), r);
        }
        assert_eq!(unrank_injection(0, 3, n), vec![0, 1, 2]);
    }

    #[test]
    fn compatibility_examples() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let one = g.vector(&[1]).unwrap();
        // D order: -1, 0, 1.
        let q = [2, 0, 1];
        let q2 = [0, 1, 3];
        assert!(sigma_compatible(g, &d, &q, &q2, &one).unwrap());
        let q3 = [0, 2, 3];
        assert!(!sigma_compatible(g, &d, &q, &q3, &one).unwrap());
        assert!(!sigma_compatible(g, &d, &q, &q, &one).unwrap());
    }

    #[test]
    fn tile_graph_counts_and_labels() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let tg = build_tile_graph(&spec, &d, 4, DEFAULT_TILE_BUDGET).unwrap();
        assert_eq!(tg.vertex_count(), 24);
        tg.verify().unwrap();
        let one = g.vector(&[1]).unwrap();
        let minus = g.vector(&[-1]).unwrap();
        assert!(tg.graph.arcs().all(|(_, _, l)| tg.graph.labels[l] == one || tg.graph.labels[l] == minus));
        let empty = build_tile_graph(&spec, &d, 2, DEFAULT_TILE_BUDGET).unwrap();
        assert_eq!(empty.vertex_count(), 0);
        assert!(matches!(build_tile_graph(&spec, &d, 2000, 1000), Err(Error::Budget(_))));
    }

    #[test]
    fn arcs_match_exhaustive_scan() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let tg = build_tile_graph(&spec, &d, 4, DEFAULT_TILE_BUDGET).unwrap();
        let n = tg.vertex_count();
        let mut count = 0;
        for u in 0..n {
            for v in 0..n {
                for (l, sigma) in tg.graph.labels.iter().enumerate() {
                    let c = sigma_compatible(g, &d, &tg.injection(u), &tg.injection(v), sigma).unwrap();
                    assert_eq!(c, tg.graph.label(u, v) == Some(l), "pair ({u}, {v}) label {l}");
                    count += c as usize;
                }
            }
        }
        assert_eq!(count, tg.graph.arcs().count());
    }

    #[test]
    fn extension_examples() {
        let g = Group::lattice(1).unwrap();
        let d = interval(g, -1, 1);
        let q = vec![3, 0, 5];
        assert_eq!(extend_injection_to_proper(g, &q, &d, &d, 6).unwrap(), q);
        let window = interval(g, -4, 4);
        let colors = extend_injection_to_proper(g, &q, &window, &d, 6).unwrap();
        assert!(is_proper_for(g, &window, &d, &colors).unwrap());
        assert!(colors.iter().all(|&c| c < 6));
        assert!(extend_injection_to_proper(g, &q, &window, &d, 5).is_err());
    }

    fn torus_spec(d: usize, q: i64) -> GroupSpec {
        let g = Group::torus(d, q).unwrap();
        let gens = (0..d)
            .map(|i| {
                let mut e = vec![0; d];
                e[i] = 1;
                g.vector(&e).unwrap()
            })
            .collect();
        GroupSpec::new(g, gens).unwrap()
    }

    #[test]
    fn schreier_hom_cycle_and_torus() {
        for (spec, n) in [(torus_spec(1, 16), 9), (torus_spec(2, 8), 25)] {
            let g = spec.group;
            let d = spec.closed_generators();
            let q = schreier_to_tile_hom(&spec, &d, n).unwrap();
            let all = FiniteSubset::from_elements(g.elements().unwrap());
            let cay = cayley_subgraph(g, &all, &spec.generator_set()).unwrap();
            check_tile_hom(g, &cay, &d, &q).unwrap();
        }
        let spec = torus_spec(1, 16);
        assert!(schreier_to_tile_hom(&spec, &spec.closed_generators(), 8).is_err());
    }

    #[test]
    fn local_search_alone_colors_tile_graph() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let tg = build_tile_graph(&spec, &d, 8, DEFAULT_TILE_BUDGET).unwrap();
        let pats = proper_coloring_patterns(g, 4, &spec.generator_set()).unwrap();
        let ng = nogoods(g, &tg.graph, &pats).unwrap();
        let f = local_search(&ng, tg.vertex_count(), 200_000).expect("4 colors suffice");
        let und = tg.graph.underlying();
        assert!(und.edges().all(|(u, v)| f[u] != f[v]));
        assert!(f.iter().all(|&c| c < 4));
        // Too few colors: no move sequence can clear every conflict.
        let one = proper_coloring_patterns(g, 1, &spec.generator_set()).unwrap();
        let ng1 = nogoods(g, &tg.graph, &one).unwrap();
        assert!(local_search(&ng1, tg.vertex_count(), 100).is_none());
        // A one-move budget proves nothing either way.
        assert!(matches!(find_avoiding_coloring(g, &tg.graph, &pats, 1).unwrap(), SearchOutcome::Indeterminate { nodes: 3 }));
    }

    #[test]
    fn search_examples() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let tg = build_tile_graph(&spec, &d, 6, DEFAULT_TILE_BUDGET).unwrap();
        assert_eq!(tg.vertex_count(), 120);
        let empty = PatternSet::new(1, vec![]).unwrap();
        assert_eq!(
            find_avoiding_coloring(g, &tg.graph, &empty, 1000).unwrap(),
            SearchOutcome::Found(vec![0; 120])
        );
        let two = proper_coloring_patterns(g, 2, &spec.generator_set()).unwrap();
        let outcome = find_avoiding_coloring(g, &tg.graph, &two, DEFAULT_SEARCH_BUDGET).unwrap();
        // Independent oracle: 2-colorability is bipartiteness.
        let bipartite = tg.graph.underlying().is_bipartite();
        assert_eq!(matches!(outcome, SearchOutcome::Found(_)), bipartite);
        assert_eq!(outcome == SearchOutcome::Unsat, !bipartite);
        let single = PatternSet::new(1, vec![KPattern::new(g, vec![(g.identity(), 0)]).unwrap()]).unwrap();
        assert_eq!(find_avoiding_coloring(g, &tg.graph, &single, 1000).unwrap(), SearchOutcome::Unsat);
    }

    #[test]
    fn three_coloring_of_small_tile_graph() {
        let spec = z1();
        let g = spec.group;
        let d = interval(g, -1, 1);
        let tg = build_tile_graph(&spec, &d, 6, DEFAULT_TILE_BUDGET).unwrap();
        let set = proper_coloring_patterns(g, 4, &spec.generator_set()).unwrap();
        match find_avoiding_coloring(g, &tg.graph, &set, DEFAULT_SEARCH_BUDGET).unwrap() {
            SearchOutcome::Found(h) => assert!(is_avoiding(g, &h, &tg.graph, &set).unwrap().0),
            other => panic!("expected a coloring, got {other:?}"),
        }
    }

    #[test]
    fn family_sizes() {
        assert_eq!(tile_family_n(2).unwrap(), (256, 4));
        assert_eq!(tile_family_n(3).unwrap(), (6561, 4));
        assert_eq!(tile_family_n(5).unwrap(), (9_765_625, 5));
        let spec = z1();
        let g = spec.group;
        let f = vec![interval(g, -1, 1)];
        let m = tile_family(&spec, &f, 0, 1000).unwrap();
        assert_eq!((m.n, m.log_star), (6561, 4));
        let dset = m.d_set.unwrap();
        assert!(dset.set_eq(&interval(g, -4, 4)));
        assert!(m.graph.is_none());
    }

    #[test]
    fn binary_round_trip() {
        let spec = z1();
        let d = interval(spec.group, -1, 1);
        let tg = build_tile_graph(&spec, &d, 5, DEFAULT_TILE_BUDGET).unwrap();
        let mut buf = Vec::new();
        write_tile_graph(&tg, &mut buf).unwrap();
        let back = read_tile_graph(buf.as_slice()).unwrap();
        assert_eq!(back.graph, tg.graph);
        assert_eq!(back.d_set, tg.d_set);
        assert!(read_tile_graph(&b"nope"[..]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn brute(group: Group, graph: &SLabeledGraph, set: &PatternSet) -> bool {
            let n = graph.n();
            let k = set.k as usize;
            (0..k.pow(n as u32)).any(|mut i| {
                let f: Vec<u32> = (0..n)
                    .map(|_| {
                        let c = (i % k) as u32;
                        i /= k;
                        c
                    })
                    .collect();
                is_avoiding(group, &f, graph, set).unwrap().0
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn search_agrees_with_enumeration(q in 3i64..9, k in 1u32..4, pats in proptest::collection::vec((0u32..3, 0u32..3, 1i64..3), 0..4)) {
                let spec = torus_spec(1, q);
                let g = spec.group;
                let all = FiniteSubset::from_elements(g.elements().unwrap());
                let cay = cayley_subgraph(g, &all, &spec.generator_set()).unwrap();
                let patterns = pats.iter().filter_map(|&(a, b, len)| {
                    let mut entries = vec![(g.identity(), a % k)];
                    for j in 1..=len {
                        entries.push((g.vector(&[j]).unwrap(), b % k));
                    }
                    KPattern::new(g, entries).ok()
                }).collect();
                let set = PatternSet::new(k, patterns).unwrap();
                let outcome = find_avoiding_coloring(g, &cay.graph, &set, 1_000_000).unwrap();
                let exists = brute(g, &cay.graph, &set);
                match outcome {
                    SearchOutcome::Found(f) => {
                        prop_assert!(exists);
                        prop_assert!(is_avoiding(g, &f, &cay.graph, &set).unwrap().0);
                    }
                    SearchOutcome::Unsat => prop_assert!(!exists),
                    SearchOutcome::Indeterminate { .. } => prop_assert!(false, "budget too small"),
                }
            }

            #[test]
            fn tile_graph_is_symmetric(len in 1usize..4, extra in 0usize..3) {
                let spec = z1();
                let g = spec.group;
                let d = interval(g, -(len as i64).min(1), len as i64);
                let n = d.len() + extra;
                let tg = build_tile_graph(&spec, &d, n, DEFAULT_TILE_BUDGET).unwrap();
                prop_assert_eq!(tg.vertex_count() as u64, injection_count(n, d.len()).unwrap());
                tg.graph.check_antisymmetry().unwrap();
            }
        }
    }
}
