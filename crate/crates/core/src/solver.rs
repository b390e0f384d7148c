//! Staged derandomized solving by conditional probabilities, the greedy
//! independent-set and coloring lemmas, and a brute-force oracle.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_rational::Ratio;
use serde::Serialize;

use crate::csp::{
    check_solution, dependency_graph, first_bad_constraint, metrics, restrict_unchecked, Color, Constraint, Csp,
};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_BRUTE_FORCE_BUDGET: u128 = 1 << 24;

/// Greedy maximal independent set scanning `order`; returned sorted.
pub fn maximal_independent_set(graph: &Graph, order: &[usize]) -> Vec<usize> {
    let mut blocked = vec![false; graph.n()];
    let mut out = Vec::new();
    for &v in order {
        if !blocked[v] {
            out.push(v);
            blocked[v] = true;
            for &w in graph.neighbors(v) {
                blocked[w] = true;
            }
        }
    }
    out.sort_unstable();
    out
}

/// Proper coloring by repeatedly removing a maximal independent set of the
/// remaining vertices; uses at most `Δ + 1` colors.
pub fn greedy_proper_coloring(graph: &Graph, order: &[usize]) -> Vec<usize> {
    let mut color = vec![usize::MAX; graph.n()];
    let mut remaining: Vec<usize> = order.to_vec();
    let mut c = 0;
    while !remaining.is_empty() {
        let mut blocked = vec![false; graph.n()];
        for &v in &remaining {
            if !blocked[v] {
                color[v] = c;
                for &w in graph.neighbors(v) {
                    blocked[w] = true;
                }
            }
        }
        remaining.retain(|&v| color[v] == usize::MAX);
        c += 1;
    }
    color
}

fn count_with(b: &Constraint, pos: usize, alpha: Color) -> usize {
    b.forbidden.iter().filter(|t| t[pos] == alpha).count()
}

/// `P[B | x ↦ α] = |{φ ∈ B : φ(x) = α}| / k^{|dom B| − 1}`.
pub fn conditional_probability(b: &Constraint, x: usize, alpha: Color, k: Color) -> Result<Ratio<BigUint>> {
    let pos = b.position(x).ok_or_else(|| Error::input(format!("point {x} is not in the constraint domain")))?;
    if alpha >= k {
        return Err(Error::input(format!("color {alpha} out of range for k = {k}")));
    }
    Ok(Ratio::new(
        BigUint::from(count_with(b, pos, alpha)),
        BigUint::from(k).pow(b.dom.len() as u32 - 1),
    ))
}

/// Least `α` with `P[B | x ↦ α] ≤ P[B]·vdeg` for every incident `B`.
pub fn good_color(x: usize, incident: &[&Constraint], k: Color, vdeg: usize) -> Result<Color> {
    let positions = incident
        .iter()
        .map(|b| b.position(x).ok_or_else(|| Error::input(format!("point {x} missing from an incident constraint"))))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: Vec<Vec<u128>> = Vec::with_capacity(incident.len());
    for (b, &pos) in incident.iter().zip(&positions) {
        let mut c = vec![0u128; k as usize];
        for t in &b.forbidden {
            c[t[pos] as usize] += 1;
        }
        counts.push(c);
    }
    // cnt_α / k^{s−1} ≤ |B|·vdeg / k^s  ⟺  cnt_α·k ≤ |B|·vdeg
    (0..k)
        .find(|&alpha| {
            incident
                .iter()
                .zip(&counts)
                .all(|(b, c)| c[alpha as usize] * k as u128 <= b.size() as u128 * vdeg as u128)
        })
        .ok_or_else(|| Error::invariant(format!("no good color for point {x}; vdeg below the true degree?")))
}

/// `|B|·vdeg^{|dom B|}` against `k^{|dom B|}` for the worst constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub constraint: Option<usize>,
    #[serde(serialize_with = "ser_big")]
    pub lhs: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub rhs: BigUint,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.lhs < self.rhs
    }

    fn of(constraints: &[Constraint], k: Color, vdeg: usize) -> Self {
        let mut best = Certificate { constraint: None, lhs: BigUint::from(0u32), rhs: BigUint::from(1u32) };
        for (i, b) in constraints.iter().enumerate() {
            let s = b.dom.len() as u32;
            let lhs = BigUint::from(b.size()) * BigUint::from(vdeg).pow(s);
            let rhs = BigUint::from(k).pow(s);
            if &lhs * &best.rhs > &best.lhs * &rhs || best.constraint.is_none() {
                best = Certificate { constraint: Some(i), lhs, rhs };
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stage {
    pub points: Vec<usize>,
    pub colors: Vec<Color>,
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SolveTrace {
    pub vdeg: usize,
    pub initial: Certificate,
    pub stages: Vec<Stage>,
}

impl SolveTrace {
    pub fn all_hold(&self) -> bool {
        self.initial.holds() && self.stages.iter().all(|s| s.certificate.holds())
    }
}

/// Solves a good CSP. The result is indexed by point identifier (entries
/// for non-points are 0).
pub fn solve(csp: &Csp) -> Result<(Vec<Color>, SolveTrace)> {
    let vdeg = metrics(csp).vdeg;
    if let Some(i) = first_bad_constraint(csp, vdeg) {
        let b = &csp.constraints[i];
        return Err(Error::gate(format!(
            "constraint {i} has |B|·vdeg^|dom| = {}·{vdeg}^{} ≥ {}^{}",
            b.size(),
            b.dom.len(),
            csp.k,
            b.dom.len()
        )));
    }
    let graph = dependency_graph(csp);
    let order: Vec<usize> = (0..csp.points.len()).collect();
    let classes_of = greedy_proper_coloring(&graph, &order);
    let n_classes = classes_of.iter().max().map_or(0, |c| c + 1);
    let mut classes = vec![Vec::new(); n_classes];
    for (pos, &c) in classes_of.iter().enumerate() {
        classes[c].push(csp.points[pos]);
    }

    let inc = csp.incidence();
    let mut current = csp.constraints.clone();
    let mut g: Vec<Option<Color>> = vec![None; csp.id_bound()];
    let initial = Certificate::of(&current, csp.k, vdeg);
    let mut stages = Vec::with_capacity(n_classes);
    for class in classes {
        let mut colors = Vec::with_capacity(class.len());
        for &x in &class {
            let incident: Vec<&Constraint> = inc[x].iter().map(|&i| &current[i]).collect();
            colors.push(good_color(x, &incident, csp.k, vdeg)?);
        }
        let mut touched: Vec<usize> = Vec::new();
        for (&x, &c) in class.iter().zip(&colors) {
            g[x] = Some(c);
            touched.extend(&inc[x]);
        }
        touched.sort_unstable();
        touched.dedup();
        for i in touched {
            current[i] = restrict_unchecked(&current[i], &g);
        }
        let certificate = Certificate::of(&current, csp.k, vdeg);
        if !certificate.holds() {
            return Err(Error::invariant("stage certificate fails the strict goodness inequality"));
        }
        stages.push(Stage { points: class, colors, certificate });
    }
    if let Some(i) = current.iter().position(Constraint::is_violated_sentinel) {
        return Err(Error::invariant(format!("constraint {i} fully restricted to a violated sentinel")));
    }
    let f: Vec<Color> = g.iter().map(|c| c.unwrap_or(0)).collect();
    let (ok, bad) = check_solution(csp, &f)?;
    if !ok {
        return Err(Error::invariant(format!("solution violates constraints {bad:?}")));
    }
    Ok((f, SolveTrace { vdeg, initial, stages }))
}

/// Lexicographically least solution by depth-first search over points in
/// ascending order, or `None` when unsatisfiable.
pub fn brute_force_solve(csp: &Csp, budget: u128) -> Result<Option<Vec<Color>>> {
    let n = csp.points.len();
    let space = (csp.k as u128).checked_pow(n as u32);
    if space.is_none_or(|s| s > budget) {
        return Err(Error::budget(format!("{}^{} colorings exceed the budget {budget}", csp.k, n)));
    }
    if csp.constraints.iter().any(Constraint::is_violated_sentinel) {
        return Ok(None);
    }
    let pos_of = {
        let mut v = vec![usize::MAX; csp.id_bound()];
        for (i, &x) in csp.points.iter().enumerate() {
            v[x] = i;
        }
        v
    };
    // Constraints are checked once their last point is assigned.
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, b) in csp.constraints.iter().enumerate() {
        if let Some(last) = b.dom.iter().map(|&x| pos_of[x]).max() {
            closing[last].push(i);
        }
    }
    let sets: Vec<HashSet<&[Color]>> =
        csp.constraints.iter().map(|b| b.forbidden.iter().map(Vec::as_slice).collect()).collect();
    let mut f = vec![0 as Color; csp.id_bound()];
    let mut tuple = Vec::new();
    let ok_at = |f: &[Color], pos: usize, tuple: &mut Vec<Color>| {
        closing[pos].iter().all(|&i| {
            tuple.clear();
            tuple.extend(csp.constraints[i].dom.iter().map(|&x| f[x]));
            !sets[i].contains(tuple.as_slice())
        })
    };
    let mut next = vec![0 as Color; n];
    let mut depth = 0usize;
    loop {
        if depth == n {
            return Ok(Some(f));
        }
        let x = csp.points[depth];
        let mut placed = false;
        while next[depth] < csp.k {
            f[x] = next[depth];
            next[depth] += 1;
            if ok_at(&f, depth, &mut tuple) {
                placed = true;
                break;
            }
        }
        if placed {
            depth += 1;
            if depth < n {
                next[depth] = 0;
            }
        } else {
            f[x] = 0;
            if depth == 0 {
                return Ok(None);
            }
            depth -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{check_conditions, path_disequality};

    fn path_graph(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    fn complete(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    #[test]
    fn mis_examples() {
        assert_eq!(maximal_independent_set(&Graph::new(3), &[0, 1, 2]), vec![0, 1, 2]);
        assert_eq!(maximal_independent_set(&path_graph(3), &[0, 1, 2]), vec![0, 2]);
        assert_eq!(maximal_independent_set(&complete(5), &[0, 1, 2, 3, 4]).len(), 1);
    }

    #[test]
    fn greedy_coloring_examples() {
        assert_eq!(greedy_proper_coloring(&Graph::new(3), &[0, 1, 2]), vec![0, 0, 0]);
        let c5 = Graph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5)));
        let col = greedy_proper_coloring(&c5, &[0, 1, 2, 3, 4]);
        assert!(c5.is_proper_coloring(&col));
        assert!(col.iter().max().unwrap() + 1 <= 3);
        let k4 = complete(4);
        let col = greedy_proper_coloring(&k4, &[0, 1, 2, 3]);
        assert_eq!(col.iter().max().unwrap() + 1, 4);
    }

    #[test]
    fn conditional_examples() {
        let b = Constraint::new(vec![0, 1], vec![vec![0, 0]], 2).unwrap();
        assert_eq!(conditional_probability(&b, 0, 0, 2).unwrap(), Ratio::new(1u32.into(), 2u32.into()));
        assert_eq!(conditional_probability(&b, 0, 1, 2).unwrap(), Ratio::new(0u32.into(), 1u32.into()));
        assert!(conditional_probability(&b, 5, 0, 2).is_err());
        let full = Constraint::new(vec![0], vec![vec![0], vec![1], vec![2]], 3).unwrap();
        for a in 0..3 {
            assert_eq!(conditional_probability(&full, 0, a, 3).unwrap(), Ratio::from_integer(1u32.into()));
        }
    }

    #[test]
    fn good_color_examples() {
        assert_eq!(good_color(0, &[], 3, 0).unwrap(), 0);
        let b = Constraint::new(vec![0, 1], vec![vec![0, 0], vec![0, 1]], 2).unwrap();
        assert_eq!(good_color(0, &[&b], 2, 1).unwrap(), 1);
    }

    #[test]
    fn solve_disagreement() {
        let csp = Csp::dense(2, 2, vec![Constraint::new(vec![0, 1], vec![vec![0, 0], vec![1, 1]], 2).unwrap()]).unwrap();
        let (f, trace) = solve(&csp).unwrap();
        assert_ne!(f[0], f[1]);
        assert!(trace.all_hold());
        assert_eq!(brute_force_solve(&csp, DEFAULT_BRUTE_FORCE_BUDGET).unwrap(), Some(vec![0, 1]));
    }

    #[test]
    fn solve_path_gate() {
        let five = path_disequality(8, 5);
        let (f, _) = solve(&five).unwrap();
        assert!(check_solution(&five, &f).unwrap().0);
        let three = path_disequality(8, 3);
        assert!(!check_conditions(&three).good);
        assert!(matches!(solve(&three), Err(Error::Gate(_))));
        assert!(brute_force_solve(&three, DEFAULT_BRUTE_FORCE_BUDGET).unwrap().is_some());
    }

    #[test]
    fn brute_force_examples() {
        let empty = Csp::dense(2, 2, vec![]).unwrap();
        assert_eq!(brute_force_solve(&empty, 16).unwrap(), Some(vec![0, 0]));
        let all = Csp::dense(2, 1, vec![Constraint::new(vec![0], vec![vec![0], vec![1]], 2).unwrap()]).unwrap();
        assert_eq!(brute_force_solve(&all, 16).unwrap(), None);
        assert!(matches!(brute_force_solve(&path_disequality(30, 3), 1 << 24), Err(Error::Budget(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_constraint(n: usize, k: u32, max_ord: usize) -> impl Strategy<Value = Constraint> {
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=max_ord.min(n)).prop_flat_map(move |dom| {
                let s = dom.len();
                (Just(dom), proptest::collection::vec(proptest::collection::vec(0..k, s), 0..6))
                    .prop_map(move |(dom, t)| Constraint::new(dom, t, k).unwrap())
            })
        }

        proptest! {
            #[test]
            fn averaging_identity(k in 2u32..5, b in (2u32..5).prop_flat_map(|k| random_constraint(3, k, 3))) {
                let k = k.max(b.forbidden.iter().flatten().max().map_or(0, |&c| c + 1));
                let x = b.dom[0];
                let mut sum = Ratio::new(BigUint::from(0u32), BigUint::from(1u32));
                for a in 0..k {
                    sum += conditional_probability(&b, x, a, k).unwrap();
                }
                prop_assert_eq!(sum / Ratio::from_integer(BigUint::from(k)), b.probability(k));
            }

            #[test]
            fn fewer_than_k_bad_colors(k in 2u32..5, vdeg in 1usize..4, seed in proptest::collection::vec(random_constraint(3, 4, 3), 1..4)) {
                let incident: Vec<Constraint> = seed.into_iter()
                    .map(|b| Constraint::new(b.dom.clone(), b.forbidden.iter().map(|t| t.iter().map(|c| c % k).collect()).collect(), k).unwrap())
                    .filter(|b| b.dom.contains(&0))
                    .take(vdeg)
                    .collect();
                let refs: Vec<&Constraint> = incident.iter().collect();
                let bad = (0..k).filter(|&a| refs.iter().any(|b| {
                    let pos = b.position(0).unwrap();
                    count_with(b, pos, a) as u128 * k as u128 > b.size() as u128 * vdeg as u128
                })).count();
                prop_assert!(bad < k as usize);
                prop_assert!(good_color(0, &refs, k, vdeg).is_ok());
            }

            #[test]
            fn solve_is_deterministic_and_sound(k in 2u32..6, cs in proptest::collection::vec(random_constraint(10, 5, 3), 0..8)) {
                let cs: Vec<Constraint> = cs.into_iter()
                    .map(|b| Constraint::new(b.dom.clone(), b.forbidden.iter().map(|t| t.iter().map(|c| c % k).collect()).collect(), k).unwrap())
                    .collect();
                let csp = Csp::dense(k, 10, cs).unwrap();
                match solve(&csp) {
                    Ok((f, trace)) => {
                        prop_assert!(check_solution(&csp, &f).unwrap().0);
                        prop_assert!(trace.all_hold());
                        prop_assert_eq!(solve(&csp).unwrap().0, f);
                    }
                    Err(Error::Gate(_)) => prop_assert!(!check_conditions(&csp).good),
                    Err(e) => prop_assert!(false, "unexpected error {e}"),
                }
            }
        }
    }
}
