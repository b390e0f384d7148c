//! Constraint satisfaction problems with forbidden-tuple constraints.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

pub type Color = u32;

/// A set of forbidden colorings of an ordered domain of points.
///
/// A constraint with an empty domain is a sentinel: `{()}` is always
/// violated and the empty set is always satisfied.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub dom: Vec<usize>,
    pub forbidden: Vec<Vec<Color>>,
}

impl Constraint {
    /// Validates against range `k` and sorts/deduplicates the tuples.
    pub fn new(dom: Vec<usize>, forbidden: Vec<Vec<Color>>, k: Color) -> Result<Self> {
        let distinct: BTreeSet<_> = dom.iter().collect();
        if distinct.len() != dom.len() {
            return Err(Error::input(format!("duplicate point in domain {dom:?}")));
        }
        for t in &forbidden {
            if t.len() != dom.len() {
                return Err(Error::input(format!("tuple {t:?} does not match domain length {}", dom.len())));
            }
            if let Some(c) = t.iter().find(|&&c| c >= k) {
                return Err(Error::input(format!("color {c} out of range for k = {k}")));
            }
        }
        let mut forbidden = forbidden;
        forbidden.sort_unstable();
        forbidden.dedup();
        Ok(Constraint { dom, forbidden })
    }

    pub fn violated_sentinel() -> Self {
        Constraint { dom: Vec::new(), forbidden: vec![Vec::new()] }
    }

    pub fn satisfied_sentinel() -> Self {
        Constraint { dom: Vec::new(), forbidden: Vec::new() }
    }

    pub fn is_violated_sentinel(&self) -> bool {
        self.dom.is_empty() && !self.forbidden.is_empty()
    }

    pub fn is_satisfied_sentinel(&self) -> bool {
        self.dom.is_empty() && self.forbidden.is_empty()
    }

    pub fn size(&self) -> usize {
        self.forbidden.len()
    }

    /// `P[B] = |B| / k^{|dom B|}`.
    pub fn probability(&self, k: Color) -> Ratio<BigUint> {
        Ratio::new(BigUint::from(self.size()), BigUint::from(k).pow(self.dom.len() as u32))
    }

    pub fn position(&self, x: usize) -> Option<usize> {
        self.dom.iter().position(|&p| p == x)
    }

    pub fn is_violated_by(&self, f: &[Color]) -> bool {
        let tuple: Vec<Color> = self.dom.iter().map(|&x| f[x]).collect();
        self.forbidden.binary_search(&tuple).is_ok()
    }
}

/// A finite CSP: sorted point identifiers, color range `k`, constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csp {
    pub k: Color,
    pub points: Vec<usize>,
    pub constraints: Vec<Constraint>,
}

impl Csp {
    pub fn new(k: Color, points: Vec<usize>, constraints: Vec<Constraint>) -> Result<Self> {
        if k == 0 {
            return Err(Error::input("k must be at least 1"));
        }
        let mut points = points;
        points.sort_unstable();
        points.dedup();
        let mut fixed = Vec::with_capacity(constraints.len());
        for c in constraints {
            if let Some(x) = c.dom.iter().find(|x| points.binary_search(x).is_err()) {
                return Err(Error::input(format!("constraint point {x} is not a CSP point")));
            }
            fixed.push(Constraint::new(c.dom, c.forbidden, k)?);
        }
        Ok(Csp { k, points, constraints: fixed })
    }

    /// Points `0..n`.
    pub fn dense(k: Color, n: usize, constraints: Vec<Constraint>) -> Result<Self> {
        Csp::new(k, (0..n).collect(), constraints)
    }

    /// One past the largest point identifier.
    pub fn id_bound(&self) -> usize {
        self.points.last().map_or(0, |&x| x + 1)
    }

    /// For each point identifier, the indices of the constraints containing it.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.id_bound()];
        for (i, c) in self.constraints.iter().enumerate() {
            for &x in &c.dom {
                inc[x].push(i);
            }
        }
        inc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CspMetrics {
    pub p: Ratio<BigUint>,
    pub d: usize,
    pub vdeg: usize,
    pub ord: usize,
}

impl Serialize for CspMetrics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("CspMetrics", 4)?;
        st.serialize_field("p", &format!("{}/{}", self.p.numer(), self.p.denom()))?;
        st.serialize_field("d", &self.d)?;
        st.serialize_field("vdeg", &self.vdeg)?;
        st.serialize_field("ord", &self.ord)?;
        st.end()
    }
}

/// Exact `p`, `d`, `vdeg` and `ord`; all zero on an empty CSP.
pub fn metrics(csp: &Csp) -> CspMetrics {
    let inc = csp.incidence();
    let mut p = Ratio::new(BigUint::zero(), BigUint::one());
    let mut d = 0;
    let mut mark = vec![usize::MAX; csp.constraints.len()];
    for (i, c) in csp.constraints.iter().enumerate() {
        let pb = c.probability(csp.k);
        if pb > p {
            p = pb;
        }
        let mut count = 0;
        for &x in &c.dom {
            for &j in &inc[x] {
                if j != i && mark[j] != i {
                    mark[j] = i;
                    count += 1;
                }
            }
        }
        d = d.max(count);
    }
    CspMetrics {
        p,
        d,
        vdeg: inc.iter().map(Vec::len).max().unwrap_or(0),
        ord: csp.constraints.iter().map(|c| c.dom.len()).max().unwrap_or(0),
    }
}

/// `G_𝓑` on the positions of `csp.points`: two points are adjacent iff
/// some constraint contains both.
pub fn dependency_graph(csp: &Csp) -> Graph {
    let pos: HashMap<usize, usize> = csp.points.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut edges = Vec::new();
    for c in &csp.constraints {
        for (a, &x) in c.dom.iter().enumerate() {
            for &y in &c.dom[a + 1..] {
                edges.push((pos[&x], pos[&y]));
            }
        }
    }
    Graph::from_edges(csp.points.len(), edges)
}

fn check_partial(g: &[Option<Color>], k: Color) -> Result<()> {
    match g.iter().flatten().find(|&&c| c >= k) {
        Some(c) => Err(Error::input(format!("color {c} out of range for k = {k}"))),
        None => Ok(()),
    }
}

fn assigned(g: &[Option<Color>], x: usize) -> Option<Color> {
    g.get(x).copied().flatten()
}

/// `B/g`: the colorings `φ` of the unassigned part of `dom(B)` such that
/// `g ⊔ φ` violates `B`. `g` is indexed by point identifier.
pub fn restrict(b: &Constraint, g: &[Option<Color>], k: Color) -> Result<Constraint> {
    check_partial(g, k)?;
    Ok(restrict_unchecked(b, g))
}

pub(crate) fn restrict_unchecked(b: &Constraint, g: &[Option<Color>]) -> Constraint {
    let fixed: Vec<(usize, Color)> =
        b.dom.iter().enumerate().filter_map(|(i, &x)| assigned(g, x).map(|c| (i, c))).collect();
    if fixed.is_empty() {
        return b.clone();
    }
    let free: Vec<usize> = (0..b.dom.len()).filter(|&i| assigned(g, b.dom[i]).is_none()).collect();
    let mut forbidden: Vec<Vec<Color>> = b
        .forbidden
        .iter()
        .filter(|t| fixed.iter().all(|&(i, c)| t[i] == c))
        .map(|t| free.iter().map(|&i| t[i]).collect())
        .collect();
    forbidden.sort_unstable();
    forbidden.dedup();
    Constraint { dom: free.iter().map(|&i| b.dom[i]).collect(), forbidden }
}

/// `𝓑/g` on the unassigned points. Satisfied sentinels are dropped and
/// violated sentinels kept.
pub fn restrict_csp(csp: &Csp, g: &[Option<Color>]) -> Result<Csp> {
    check_partial(g, csp.k)?;
    let points = csp.points.iter().copied().filter(|&x| assigned(g, x).is_none()).collect();
    let constraints = csp
        .constraints
        .iter()
        .map(|b| restrict_unchecked(b, g))
        .filter(|b| !b.is_satisfied_sentinel())
        .collect();
    Ok(Csp { k: csp.k, points, constraints })
}

/// Whether a total coloring (indexed by point identifier) violates no
/// constraint, with the indices of the violated ones.
pub fn check_solution(csp: &Csp, f: &[Color]) -> Result<(bool, Vec<usize>)> {
    if f.len() < csp.id_bound() {
        return Err(Error::input(format!(
            "coloring covers {} identifiers but the CSP needs {}",
            f.len(),
            csp.id_bound()
        )));
    }
    if let Some(&x) = csp.points.iter().find(|&&x| f[x] >= csp.k) {
        return Err(Error::input(format!("color {} at point {x} out of range", f[x])));
    }
    let violated: Vec<usize> = csp
        .constraints
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_violated_by(f))
        .map(|(i, _)| i)
        .collect();
    Ok((violated.is_empty(), violated))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    /// `e·p·(d+1) ≤ 1`.
    pub classic_lll: bool,
    /// `p·vdeg^ord < 1`.
    pub continuous_lll: bool,
    /// `|B|·vdeg^{|dom B|} < k^{|dom B|}` for every constraint.
    pub good: bool,
    /// First constraint breaking the good-CSP inequality.
    pub good_witness: Option<usize>,
}

/// Lower and upper rational bounds on `e` from the first `n + 1` terms of
/// `Σ 1/j!`; the tail is below `1/(n!·n)`.
pub fn e_bounds(n: u32) -> (Ratio<BigUint>, Ratio<BigUint>) {
    assert!(n >= 1);
    let mut sum = Ratio::new(BigUint::zero(), BigUint::one());
    let mut fact = BigUint::one();
    for j in 0..=n {
        if j > 0 {
            fact *= BigUint::from(j);
        }
        sum += Ratio::new(BigUint::one(), fact.clone());
    }
    let tail = Ratio::new(BigUint::one(), fact * BigUint::from(n));
    (sum.clone(), sum + tail)
}

fn classic_lll(m: &CspMetrics) -> bool {
    let x = m.p.clone() * Ratio::from_integer(BigUint::from(m.d + 1));
    if x.is_zero() {
        return true;
    }
    let one = Ratio::one();
    // e is irrational, so refinement terminates.
    let mut n = 8;
    loop {
        let (lo, hi) = e_bounds(n);
        if hi * x.clone() <= one {
            return true;
        }
        if lo * x.clone() > one {
            return false;
        }
        n *= 2;
    }
}

/// `|B|·vdeg^e < k^s`, with `0⁰ = 1`.
pub fn good_inequality(size: usize, vdeg: usize, exponent: usize, k: Color, s: usize) -> bool {
    BigUint::from(size) * BigUint::from(vdeg).pow(exponent as u32) < BigUint::from(k).pow(s as u32)
}

pub fn first_bad_constraint(csp: &Csp, vdeg: usize) -> Option<usize> {
    csp.constraints
        .iter()
        .position(|b| !good_inequality(b.size(), vdeg, b.dom.len(), csp.k, b.dom.len()))
}

pub fn check_conditions(csp: &Csp) -> ConditionReport {
    let m = metrics(csp);
    let continuous_lll = csp
        .constraints
        .iter()
        .all(|b| good_inequality(b.size(), m.vdeg, m.ord, csp.k, b.dom.len()));
    let good_witness = first_bad_constraint(csp, m.vdeg);
    ConditionReport { classic_lll: classic_lll(&m), continuous_lll, good: good_witness.is_none(), good_witness }
}

/// Sinkless orientation of a graph: one binary point per edge (0 means the
/// edge points from its smaller endpoint to its larger one), and for each
/// vertex of degree at least one the constraint forbidding all its edges
/// to point inward.
pub fn sinkless_orientation(graph: &Graph) -> Csp {
    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let mut constraints = Vec::new();
    for v in 0..graph.n() {
        let mut dom = Vec::new();
        let mut inward = Vec::new();
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a == v || b == v {
                dom.push(i);
                inward.push(if b == v { 0 } else { 1 });
            }
        }
        if !dom.is_empty() {
            constraints.push(Constraint { dom, forbidden: vec![inward] });
        }
    }
    Csp::dense(2, edges.len(), constraints).expect("well formed")
}

/// Disequality constraints on consecutive points of a path.
pub fn path_disequality(n: usize, k: Color) -> Csp {
    let diag: Vec<Vec<Color>> = (0..k).map(|c| vec![c, c]).collect();
    let constraints = (1..n).map(|i| Constraint { dom: vec![i - 1, i], forbidden: diag.clone() }).collect();
    Csp::dense(k, n, constraints).expect("well formed")
}
