//! Synchronous LOCAL-model simulation: ball collection, the (d+1)-coloring
//! routine, the window rule on proper colorings, and the distributed
//! homomorphism into tile graphs.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{cayley_subgraph, Graph, SLabeledGraph};
use crate::group::{box_set, power_set, FiniteSubset, Group, GroupElement, GroupSpec};
use crate::tiles::{rank_injection, sigma_compatible};

/// Number of base-2 logarithms needed to bring `n` to at most 1.
pub fn log_star(n: u128) -> u32 {
    let mut tower: u128 = 1;
    let mut l = 0;
    while n > tower {
        tower = if tower >= 127 { u128::MAX } else { 1u128 << tower };
        l += 1;
    }
    l
}

/// An induced subgraph of a Cayley graph with ids `1..=n`.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    pub group: Group,
    pub elements: FiniteSubset,
    pub graph: SLabeledGraph,
    ids: Vec<u64>,
}

impl NetworkGraph {
    pub fn new(group: Group, vertices: &FiniteSubset, s: &FiniteSubset) -> Result<Self> {
        let c = cayley_subgraph(group, vertices, s)?;
        let ids = (1..=vertices.len() as u64).collect();
        Ok(NetworkGraph { group, elements: c.elements, graph: c.graph, ids })
    }

    /// Replaces the ids; they must be a bijection onto `1..=n`.
    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        let n = self.n() as u64;
        let mut seen = vec![false; self.n()];
        if ids.len() != self.n() {
            return Err(Error::input("one id per vertex required"));
        }
        for &id in &ids {
            if id == 0 || id > n || std::mem::replace(&mut seen[(id - 1) as usize], true) {
                return Err(Error::input(format!("ids must be a bijection onto 1..={n}")));
            }
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    /// The cycle `Z_n` with generator 1 (a single vertex when `n = 1`).
    pub fn cycle(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("cycle needs at least one vertex"));
        }
        if n < 3 {
            return NetworkGraph::path(n);
        }
        let g = Group::torus(1, n as i64)?;
        let all = FiniteSubset::from_elements(g.elements().expect("torus"));
        NetworkGraph::new(g, &all, &FiniteSubset::from_elements([g.vector(&[1])?]))
    }

    /// The torus `Z_q²` with generators `e₁, e₂`.
    pub fn torus2(q: usize) -> Result<Self> {
        let g = Group::torus(2, q as i64)?;
        let all = FiniteSubset::from_elements(g.elements().expect("torus"));
        NetworkGraph::new(g, &all, &unit_vectors(g, 2)?)
    }

    /// The path `{0, …, n−1}` in `Z`.
    pub fn path(n: usize) -> Result<Self> {
        NetworkGraph::rectangle_dims(&[n])
    }

    /// The `w × h` rectangle in `Z²`.
    pub fn rectangle(w: usize, h: usize) -> Result<Self> {
        NetworkGraph::rectangle_dims(&[w, h])
    }

    fn rectangle_dims(dims: &[usize]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::input("box sides must be positive"));
        }
        let g = Group::lattice(dims.len())?;
        let lo = vec![0; dims.len()];
        let hi: Vec<i64> = dims.iter().map(|&d| d as i64 - 1).collect();
        NetworkGraph::new(g, &box_set(g, &lo, &hi)?, &unit_vectors(g, dims.len())?)
    }
}

pub fn unit_vectors(g: Group, dim: usize) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::new();
    for i in 0..dim {
        let mut e = vec![0; dim];
        e[i] = 1;
        out.insert(g.vector(&e)?);
    }
    Ok(out)
}

/// The radius-`T` ball around a vertex with ids and induced labeled edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    pub root: usize,
    pub radius: usize,
    /// Vertices ordered by distance, then id.
    pub vertices: Vec<usize>,
    pub distance: Vec<usize>,
    /// Induced arcs in local indices.
    pub arcs: Vec<(usize, usize, usize)>,
    /// Equal for balls with the same ids, distances and labeled edges.
    pub encoding: Vec<u64>,
}

pub fn collect_ball(g: &NetworkGraph, x: usize, radius: usize) -> Ball {
    let dist = g.graph.distances(x, radius);
    let mut vertices: Vec<usize> = (0..g.n()).filter(|&v| dist[v].is_some()).collect();
    vertices.sort_by_key(|&v| (dist[v], g.ids[v]));
    let local: HashMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut arcs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &v) in vertices.iter().enumerate() {
        for &(w, l) in g.graph.neighbors(v) {
            if let Some(&j) = local.get(&w) {
                arcs.push((i, j, l));
            }
        }
    }
    arcs.sort_unstable();
    let mut encoding = vec![radius as u64, vertices.len() as u64];
    for &v in &vertices {
        encoding.extend([g.ids[v], dist[v].expect("in ball") as u64]);
    }
    let mut id_arcs: Vec<(u64, u64, u64)> =
        arcs.iter().map(|&(i, j, l)| (g.ids[vertices[i]], g.ids[vertices[j]], l as u64)).collect();
    id_arcs.sort_unstable();
    for (a, b, l) in id_arcs {
        encoding.extend([a, b, l]);
    }
    let distance = vertices.iter().map(|&v| dist[v].expect("in ball")).collect();
    Ball { root: x, radius, vertices, distance, arcs, encoding }
}

/// One synchronous round: each vertex's new state is a function of its
/// own state and its neighbors' states.
pub fn synchronous_round<S: Clone>(graph: &Graph, state: &[S], step: impl Fn(&S, &[&S]) -> S) -> Vec<S> {
    let mut buf: Vec<&S> = Vec::new();
    (0..graph.n())
        .map(|v| {
            buf.clear();
            buf.extend(graph.neighbors(v).iter().map(|&w| &state[w]));
            step(&state[v], &buf)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseRounds {
    pub phase: String,
    pub rounds: u64,
}

/// Rounds charged per phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundLedger {
    pub n: usize,
    pub d: usize,
    pub phases: Vec<PhaseRounds>,
}

pub const LEDGER_HEADER: &str = "phase,rounds,n,d";

impl RoundLedger {
    pub fn new(n: usize, d: usize) -> Self {
        RoundLedger { n, d, phases: Vec::new() }
    }

    pub fn push(&mut self, phase: &str, rounds: u64) {
        self.phases.push(PhaseRounds { phase: phase.to_string(), rounds });
    }

    pub fn total(&self) -> u64 {
        self.phases.iter().map(|p| p.rounds).sum()
    }

    /// CSV with header `phase,rounds,n,d`, one row per phase and a final
    /// `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{LEDGER_HEADER}\n");
        for p in &self.phases {
            out.push_str(&format!("{},{},{},{}\n", p.phase, p.rounds, self.n, self.d));
        }
        out.push_str(&format!("total,{},{},{}\n", self.total(), self.n, self.d));
        out
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= p {
        if p.is_multiple_of(i) {
            return false;
        }
        i += 1;
    }
    true
}

fn next_prime_at_least(mut p: u64) -> u64 {
    while !is_prime(p) {
        p += 1;
    }
    p
}

/// Least `r` with `r^e ≥ m`.
fn int_root_ceil(m: u64, e: u32) -> u64 {
    let mut r = (m as f64).powf(1.0 / e as f64).floor().max(1.0) as u64;
    while r > 1 && (r - 1).checked_pow(e).is_some_and(|v| v >= m) {
        r -= 1;
    }
    while r.checked_pow(e).is_some_and(|v| v < m) {
        r += 1;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinialStep {
    pub t: u32,
    pub p: u64,
    pub palette_before: u64,
    pub palette_after: u64,
}

/// Round plan of the coloring routine for palette `m` and degree bound `d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GpsSchedule {
    pub palette: u64,
    pub d: usize,
    pub steps: Vec<LinialStep>,
    pub final_palette: u64,
    pub elimination_rounds: u64,
}

impl GpsSchedule {
    pub fn rounds(&self) -> u64 {
        self.steps.len() as u64 + self.elimination_rounds
    }
}

/// `(t, p)` with `p` prime, `p > d·t`, `p^{t+1} ≥ m`, minimizing `p²`
/// (then `t`).
fn best_reduction(m: u64, d: usize) -> (u32, u64) {
    let mut best: Option<(u32, u64)> = None;
    for t in 1u32..=64 {
        let floor = d as u64 * t as u64 + 1;
        if let Some((_, bp)) = best {
            if floor > bp {
                break;
            }
        }
        let p = next_prime_at_least(floor.max(int_root_ceil(m, t + 1)));
        if best.is_none_or(|(_, bp)| p < bp) {
            best = Some((t, p));
        }
    }
    best.expect("t = 1 always yields a candidate")
}

/// Polynomial color reduction while it shrinks the palette, then one
/// round per color class from the top down to `d + 1`.
pub fn gps_schedule(m: u64, d: usize) -> GpsSchedule {
    let mut steps = Vec::new();
    let mut palette = m;
    loop {
        let (t, p) = best_reduction(palette, d);
        if p * p >= palette {
            break;
        }
        steps.push(LinialStep { t, p, palette_before: palette, palette_after: p * p });
        palette = p * p;
    }
    let elimination_rounds = palette.saturating_sub(d as u64 + 1);
    GpsSchedule { palette: m, d, steps, final_palette: palette, elimination_rounds }
}

fn digits(mut c: u64, p: u64, len: usize) -> Vec<u64> {
    (0..len)
        .map(|_| {
            let r = c % p;
            c /= p;
            r
        })
        .collect()
}

fn eval(coeffs: &[u64], a: u64, p: u64) -> u64 {
    coeffs.iter().rev().fold(0, |acc, &c| (acc * a + c) % p)
}

/// Runs the schedule on `graph` from a proper coloring with colors below
/// `palette`. Returns colors below `d + 1`.
pub fn gps_color_graph(graph: &Graph, initial: &[u64], palette: u64, d: usize) -> Result<(Vec<u64>, GpsSchedule)> {
    if graph.max_degree() > d {
        return Err(Error::input(format!("maximum degree {} exceeds d = {d}", graph.max_degree())));
    }
    if initial.len() != graph.n() || initial.iter().any(|&c| c >= palette) {
        return Err(Error::input("initial colors must lie below the palette"));
    }
    if !graph.is_proper_coloring(initial) {
        return Err(Error::input("initial coloring is not proper"));
    }
    let schedule = gps_schedule(palette, d);
    let mut colors = initial.to_vec();
    for step in &schedule.steps {
        let (t, p) = (step.t as usize, step.p);
        colors = synchronous_round(graph, &colors, |&c, nbrs| {
            let mine = digits(c, p, t + 1);
            let theirs: Vec<Vec<u64>> = nbrs.iter().map(|&&o| digits(o, p, t + 1)).collect();
            let a = (0..p)
                .find(|&a| {
                    let v = eval(&mine, a, p);
                    theirs.iter().all(|o| eval(o, a, p) != v)
                })
                .expect("p > d·t leaves a free evaluation point");
            a * p + eval(&mine, a, p)
        });
    }
    let top = schedule.final_palette;
    let mut by_color: Vec<Vec<usize>> = vec![Vec::new(); top as usize];
    for (v, &c) in colors.iter().enumerate() {
        by_color[c as usize].push(v);
    }
    for c in (d as u64 + 1..top).rev() {
        // One round: the class is independent, so its members recolor at once.
        let updates: Vec<(usize, u64)> = by_color[c as usize]
            .iter()
            .map(|&v| {
                let mut used = vec![false; d + 1];
                for &w in graph.neighbors(v) {
                    if colors[w] <= d as u64 {
                        used[colors[w] as usize] = true;
                    }
                }
                (v, used.iter().position(|u| !u).expect("degree at most d") as u64)
            })
            .collect();
        for (v, c) in updates {
            colors[v] = c;
        }
    }
    if !graph.is_proper_coloring(&colors) || colors.iter().any(|&c| c > d as u64) {
        return Err(Error::invariant("coloring routine produced an improper coloring"));
    }
    Ok((colors, schedule))
}

#[derive(Clone, Debug)]
pub struct GpsResult {
    pub colors: Vec<u64>,
    pub schedule: GpsSchedule,
    pub ledger: RoundLedger,
}

/// Proper `(d + 1)`-coloring of a network from its ids.
pub fn gps_coloring(g: &NetworkGraph, d: usize) -> Result<GpsResult> {
    let initial: Vec<u64> = g.ids.iter().map(|&id| id - 1).collect();
    let (colors, schedule) = gps_color_graph(&g.graph.underlying(), &initial, g.n() as u64, d)?;
    let mut ledger = RoundLedger::new(g.n(), d);
    ledger.push("color-reduction", schedule.steps.len() as u64);
    ledger.push("elimination", schedule.elimination_rounds);
    Ok(GpsResult { colors, schedule, ledger })
}

/// The window rule: from a proper `n`-coloring of `G(Γ, D)` seen on a
/// window around `x`, compute a color below `d + 1` for `x`.
#[derive(Clone, Debug)]
pub struct LocalRule {
    pub group: Group,
    pub d_set: FiniteSubset,
    pub palette: u64,
    pub d: usize,
    pub schedule: GpsSchedule,
    pub ball: FiniteSubset,
    ball_graph: Graph,
    root: usize,
}

impl LocalRule {
    pub fn new(spec: &GroupSpec, d_set: &FiniteSubset, palette: u64, d: usize) -> Result<Self> {
        let group = spec.group;
        let closed = spec.closed_generators();
        if !closed.is_subset_of(d_set) {
            return Err(Error::input("D must contain S ∪ S⁻¹ ∪ {1}"));
        }
        let schedule = gps_schedule(palette, d);
        let ball = power_set(group, &closed, schedule.rounds() as usize)?;
        let ball_graph = cayley_subgraph(group, &ball, &spec.generator_set())?.graph.underlying();
        if ball_graph.max_degree() > d {
            return Err(Error::input(format!("Cayley degree {} exceeds d = {d}", ball_graph.max_degree())));
        }
        let root = ball.position(&group.identity()).expect("ball contains the identity");
        Ok(LocalRule { group, d_set: d_set.clone(), palette, d, schedule, ball, ball_graph, root })
    }

    pub fn radius(&self) -> u64 {
        self.schedule.rounds()
    }

    /// `window(γ)` is the color at `γ·x`.
    pub fn apply(&self, window: &HashMap<GroupElement, u64>) -> Result<u64> {
        for (gamma, &c) in window {
            if c >= self.palette {
                return Err(Error::input(format!("window color {c} exceeds the palette")));
            }
            for dl in self.d_set.iter().filter(|e| !self.group.is_identity(e)) {
                let other = self.group.multiply(dl, gamma)?;
                if window.get(&other) == Some(&c) {
                    return Err(Error::input(format!("window is not locally injective at {gamma} and {other}")));
                }
            }
        }
        let initial = self
            .ball
            .iter()
            .map(|e| window.get(e).copied().ok_or_else(|| Error::input(format!("window misses {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (colors, _) = gps_color_graph(&self.ball_graph, &initial, self.palette, self.d)?;
        Ok(colors[self.root])
    }
}

pub fn f_local_rule(
    spec: &GroupSpec,
    d_set: &FiniteSubset,
    palette: u64,
    d: usize,
    window: &HashMap<GroupElement, u64>,
) -> Result<u64> {
    LocalRule::new(spec, d_set, palette, d)?.apply(window)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
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
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// `(x, δ) ∼₁ (y, δ′)`: `x, y` adjacent and `δ = δ′·λ(x, y)`.
pub fn equivalence_step(g: &NetworkGraph, d_set: &FiniteSubset, x: usize, di: usize, y: usize, dj: usize) -> Result<bool> {
    match g.graph.label(x, y) {
        None => Ok(false),
        Some(l) => Ok(&g.group.multiply(d_set.get(dj), &g.graph.labels[l])? == d_set.get(di)),
    }
}

/// Classes of the transitive closure of `∼₁` on `V × D`.
#[derive(Clone, Debug)]
pub struct Equivalence {
    pub d_len: usize,
    /// Class index of `(x, δ_j)` at `x·|D| + j`.
    pub class_of: Vec<usize>,
    /// Members of each class as `(vertex, D position)`, sorted.
    pub classes: Vec<Vec<(usize, usize)>>,
}

impl Equivalence {
    pub fn class(&self, x: usize, j: usize) -> usize {
        self.class_of[x * self.d_len + j]
    }

    /// `[x]`: vertices sharing a class with some `(x, δ)`, sorted.
    pub fn bracket(&self, x: usize) -> Vec<usize> {
        let mut out: Vec<usize> =
            (0..self.d_len).flat_map(|j| self.classes[self.class(x, j)].iter().map(|&(y, _)| y)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn equivalence_closure(g: &NetworkGraph, d_set: &FiniteSubset) -> Result<Equivalence> {
    let dl = d_set.len();
    let shift: Vec<Vec<Option<usize>>> = g
        .graph
        .labels
        .iter()
        .map(|sigma| d_set.iter().map(|dp| Ok(d_set.position(&g.group.multiply(dp, sigma)?))).collect())
        .collect::<Result<_>>()?;
    let mut uf = UnionFind::new(g.n() * dl);
    for (x, y, l) in g.graph.arcs() {
        for (j, target) in shift[l].iter().enumerate() {
            if let Some(i) = target {
                uf.union(x * dl + i, y * dl + j);
            }
        }
    }
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut class_of = Vec::with_capacity(g.n() * dl);
    let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
    for a in 0..g.n() * dl {
        let r = uf.find(a);
        let c = *index.entry(r).or_insert_with(|| {
            classes.push(Vec::new());
            classes.len() - 1
        });
        classes[c].push((a / dl, a % dl));
        class_of.push(c);
    }
    Ok(Equivalence { d_len: dl, class_of, classes })
}

/// `G′`: distinct `x, y` adjacent iff `y ∈ [z]` for some `z ∈ [x]`.
#[derive(Clone, Debug)]
pub struct AuxiliaryGraph {
    pub graph: Graph,
    pub brackets: Vec<Vec<usize>>,
    pub max_bracket: usize,
}

pub fn auxiliary_graph(g: &NetworkGraph, eq: &Equivalence) -> AuxiliaryGraph {
    let brackets: Vec<Vec<usize>> = (0..g.n()).map(|x| eq.bracket(x)).collect();
    let mut stamp = vec![usize::MAX; g.n()];
    let mut adj = Vec::with_capacity(g.n());
    for x in 0..g.n() {
        let mut ns = Vec::new();
        stamp[x] = x;
        for &z in &brackets[x] {
            for &y in &brackets[z] {
                if stamp[y] != x {
                    stamp[y] = x;
                    ns.push(y);
                }
            }
        }
        adj.push(ns);
    }
    let max_bracket = brackets.iter().map(Vec::len).max().unwrap_or(0);
    AuxiliaryGraph { graph: Graph::from_adjacency(adj), brackets, max_bracket }
}

/// Every `y ∈ [x]` lies within distance `|D|` of `x` in `G`.
pub fn check_bracket_distances(g: &NetworkGraph, aux: &AuxiliaryGraph, d_len: usize) -> Result<()> {
    for x in 0..g.n() {
        let dist = g.graph.distances(x, d_len);
        if let Some(&y) = aux.brackets[x].iter().find(|&&y| dist[y].is_none()) {
            return Err(Error::invariant(format!("{y} ∈ [{x}] is farther than |D| = {d_len}")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Homomorphism {
    /// `q_x` indexed like `D`.
    pub q: Vec<Vec<usize>>,
    pub m: usize,
    pub ledger: RoundLedger,
    pub aux_max_degree: usize,
    pub max_bracket: usize,
    pub equivalence: Equivalence,
}

/// Computes `x ↦ q_x`, a homomorphism into `H_{D,m}`, by coloring `G′`
/// and then running `|D|⁴ + 1` stages.
pub fn distributed_homomorphism(g: &NetworkGraph, d_set: &FiniteSubset, m: usize) -> Result<Homomorphism> {
    let dl = d_set.len();
    let cube = (dl as u128).pow(3);
    if (m as u128) <= cube {
        return Err(Error::gate(format!("m = {m} must exceed |D|³ = {cube}")));
    }
    if !d_set.contains(&g.group.identity()) || g.graph.labels.iter().any(|l| !d_set.contains(l)) {
        return Err(Error::input("D must contain S ∪ S⁻¹ ∪ {1}"));
    }
    let big_n = dl.checked_pow(4).ok_or_else(|| Error::input("|D|⁴ overflows"))?;
    let eq = equivalence_closure(g, d_set)?;
    let aux = auxiliary_graph(g, &eq);
    let aux_deg = aux.graph.max_degree();
    if aux_deg > big_n || aux.max_bracket > dl * dl {
        return Err(Error::invariant(format!(
            "auxiliary degree {aux_deg} or bracket size {} above the bound",
            aux.max_bracket
        )));
    }
    let initial: Vec<u64> = g.ids.iter().map(|&id| id - 1).collect();
    let (phi, schedule) = gps_color_graph(&aux.graph, &initial, g.n() as u64, big_n)?;
    let mut ledger = RoundLedger::new(g.n(), big_n);
    ledger.push("aux-coloring", schedule.rounds() * 2 * dl as u64);

    let mut stages: Vec<Vec<usize>> = vec![Vec::new(); big_n + 1];
    for (x, &c) in phi.iter().enumerate() {
        stages[c as usize].push(x);
    }
    let mut q: Vec<Vec<Option<usize>>> = vec![vec![None; dl]; g.n()];
    let mut blocked = vec![false; m];
    for stage in stages.iter().filter(|s| !s.is_empty()) {
        for &x in stage {
            let mut used = Vec::new();
            for &y in &aux.brackets[x] {
                for &c in q[y].iter().flatten() {
                    if !blocked[c] {
                        blocked[c] = true;
                        used.push(c);
                    }
                }
            }
            let mut next = 0;
            for j in 0..dl {
                if q[x][j].is_some() {
                    continue;
                }
                while next < m && blocked[next] {
                    next += 1;
                }
                if next == m {
                    return Err(Error::invariant(format!("no free value below m = {m} at vertex {x}")));
                }
                let alpha = next;
                blocked[alpha] = true;
                used.push(alpha);
                for &(y, jj) in &eq.classes[eq.class(x, j)] {
                    q[y][jj] = Some(alpha);
                }
            }
            for c in used {
                blocked[c] = false;
            }
        }
    }
    ledger.push("stages", (big_n as u64 + 1) * 2 * dl as u64);
    let q: Vec<Vec<usize>> = q
        .into_iter()
        .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::invariant("some q_x left partial"))?;
    let hom = Homomorphism { q, m, ledger, aux_max_degree: aux_deg, max_bracket: aux.max_bracket, equivalence: eq };
    validate_homomorphism(g, d_set, &hom.q, m, Some(&hom.equivalence))?;
    Ok(hom)
}

/// Injectivity, range, σ-compatibility along every arc and, when given,
/// constancy on every `∼` class.
pub fn validate_homomorphism(
    g: &NetworkGraph,
    d_set: &FiniteSubset,
    q: &[Vec<usize>],
    m: usize,
    eq: Option<&Equivalence>,
) -> Result<()> {
    for (x, qx) in q.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        if qx.len() != d_set.len() || qx.iter().any(|&c| c >= m || !seen.insert(c)) {
            return Err(Error::invariant(format!("q at vertex {x} is not an injection D → m")));
        }
    }
    for (x, y, l) in g.graph.arcs() {
        if !sigma_compatible(g.group, d_set, &q[x], &q[y], &g.graph.labels[l])? {
            return Err(Error::invariant(format!("arc ({x}, {y}) breaks σ-compatibility")));
        }
    }
    if let Some(eq) = eq {
        for class in &eq.classes {
            let (x0, j0) = class[0];
            if class.iter().any(|&(y, j)| q[y][j] != q[x0][j0]) {
                return Err(Error::invariant("a ∼ class carries two values"));
            }
        }
    }
    Ok(())
}

/// `x ↦ h(q_x)` for a coloring `h` of `H_{D,m}` indexed by injection rank.
pub fn distributed_avoiding_coloring(
    g: &NetworkGraph,
    d_set: &FiniteSubset,
    m: usize,
    h: &[u32],
) -> Result<(Vec<u32>, Homomorphism)> {
    let hom = distributed_homomorphism(g, d_set, m)?;
    let colors = hom
        .q
        .iter()
        .map(|qx| {
            let r = rank_injection(qx, m) as usize;
            h.get(r).copied().ok_or_else(|| Error::input(format!("tile coloring lacks rank {r}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((colors, hom))
}
