//! Finite-window laboratory on tori: the similarity CSP, the
//! syndetic/separated split, `Y_n` membership, and the level-by-level
//! recursion producing non-similar 2-colorings.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, Pow};
use serde::Serialize;

use crate::csp::{check_conditions, metrics, Color, Constraint, Csp};
use crate::error::{Error, Result};
use crate::group::{
    inverse_set, power_set, product_set, symmetrize, union, FiniteSubset, Group, GroupElement,
};
use crate::local::unit_vectors;
use crate::solver::solve;

pub const DEFAULT_SIMILARITY_BUDGET: u64 = 1 << 26;
/// Largest `|N|` accepted; colors are `|N|`-bit words.
pub const MAX_N_BITS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    /// `C₀`: already colored.
    Colored,
    /// `C`: to be colored.
    ToColor,
    /// `U`: left uncolored.
    Uncolored,
}

/// Points of a torus with translation tables.
#[derive(Clone, Debug)]
pub struct Carrier {
    pub group: Group,
    pub points: Vec<GroupElement>,
}

impl Carrier {
    pub fn new(group: Group) -> Result<Self> {
        let points = group.elements().ok_or_else(|| Error::input("carrier must be a torus"))?;
        Ok(Carrier { group, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, a: &GroupElement) -> usize {
        self.group.torus_index(a).expect("torus element")
    }

    /// `σ·x` as a point index.
    pub fn act(&self, sigma: &GroupElement, x: usize) -> Result<usize> {
        Ok(self.index(&self.group.multiply(sigma, &self.points[x])?))
    }

    /// `table[i][x] = s_i·x`.
    pub fn table(&self, s: &FiniteSubset) -> Result<Vec<Vec<usize>>> {
        s.iter().map(|sigma| (0..self.len()).map(|x| self.act(sigma, x)).collect()).collect()
    }

    /// `S⁻¹·A` covers every point: each `x` has `σ ∈ S` with `σ·x ∈ A`.
    pub fn is_syndetic(&self, member: &[bool], s: &FiniteSubset) -> Result<bool> {
        let t = self.table(s)?;
        Ok((0..self.len()).all(|x| t.iter().any(|row| member[row[x]])))
    }

    /// Distinct `x, y ∈ A` have `y ∉ S·x`.
    pub fn is_separated(&self, member: &[bool], s: &FiniteSubset) -> Result<bool> {
        let t = self.table(s)?;
        Ok((0..self.len()).filter(|&x| member[x]).all(|x| t.iter().all(|row| row[x] == x || !member[row[x]])))
    }
}

/// Centered lattice representative of a torus element.
pub fn lift(group: Group, a: &GroupElement) -> Result<GroupElement> {
    match (group, a) {
        (Group::Torus { dim, modulus }, GroupElement::Vector(v)) => {
            let c: Vec<i64> = v.iter().map(|&c| if 2 * c > modulus { c - modulus } else { c }).collect();
            Group::lattice(dim)?.vector(&c)
        }
        _ => Err(Error::input("lift needs a torus element")),
    }
}

pub fn lift_set(group: Group, a: &FiniteSubset) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::new();
    for e in a.iter() {
        out.insert(lift(group, e)?);
    }
    Ok(out)
}

pub fn project_set(group: Group, a: &FiniteSubset) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::new();
    for e in a.iter() {
        let GroupElement::Vector(v) = e else {
            return Err(Error::input("projection needs vectors"));
        };
        out.insert(group.vector(v)?);
    }
    Ok(out)
}

fn require_symmetric_with_identity(group: Group, a: &FiniteSubset, name: &str) -> Result<()> {
    if !a.contains(&group.identity()) || !inverse_set(group, a).set_eq(a) {
        return Err(Error::input(format!("{name} must be symmetric and contain the identity")));
    }
    Ok(())
}

/// A maximal `S`-separated subset of `W` (greedy in `W` order) and the rest.
/// `C = W ∖ U` is verified `F`-syndetic on the carrier.
pub fn split_syndetic(
    carrier: &Carrier,
    w: &[usize],
    f: &FiniteSubset,
    s_sep: &FiniteSubset,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let g = carrier.group;
    require_symmetric_with_identity(g, s_sep, "S_sep")?;
    if !product_set(g, &inverse_set(g, f), f)?.is_subset_of(s_sep) {
        return Err(Error::input("S_sep must contain F⁻¹F"));
    }
    let t = carrier.table(s_sep)?;
    let mut blocked = vec![false; carrier.len()];
    let mut in_u = vec![false; carrier.len()];
    for &x in w {
        if !blocked[x] {
            in_u[x] = true;
            for row in &t {
                blocked[row[x]] = true;
            }
        }
    }
    let u: Vec<usize> = w.iter().copied().filter(|&x| in_u[x]).collect();
    let c: Vec<usize> = w.iter().copied().filter(|&x| !in_u[x]).collect();
    let mut member = vec![false; carrier.len()];
    for &x in &c {
        member[x] = true;
    }
    if !carrier.is_syndetic(&member, f)? {
        return Err(Error::input("torus too small: C = W ∖ U is not F-syndetic (wrap-around collision)"));
    }
    Ok((c, u))
}

/// The setup for one application of the similarity lemma on a torus.
#[derive(Clone, Debug)]
pub struct SimilarityInstance {
    pub carrier: Carrier,
    pub region: Vec<Region>,
    pub f_set: FiniteSubset,
    pub m_set: FiniteSubset,
    pub n_set: FiniteSubset,
    /// `N⁵F`.
    pub s_set: FiniteSubset,
    /// `N⁴FγFN⁴ ∖ {1}`.
    pub delta: FiniteSubset,
    pub gamma: GroupElement,
    /// Maximal `N⁴`-separated subset of `C`, greedy in point order.
    pub z: Vec<usize>,
    /// `g`: defined on `C₀ ∪ (C ∖ N·Z)`.
    pub base: Vec<Option<u8>>,
    /// Some product set collapses when projected from the lattice.
    pub wrap_around: bool,
    /// `(z position, i)` with `x = ν_i·z`, for `x ∈ N·Z`.
    rep: Vec<Option<(usize, usize)>>,
    n_table: Vec<Vec<usize>>,
}

impl SimilarityInstance {
    /// `f0` must color every `C₀` point with 0 or 1.
    pub fn new(
        group: Group,
        region: Vec<Region>,
        f0: &[Option<u8>],
        f_set: &FiniteSubset,
        m_set: &FiniteSubset,
        gamma: &GroupElement,
    ) -> Result<Self> {
        let carrier = Carrier::new(group)?;
        let n_points = carrier.len();
        if region.len() != n_points || f0.len() != n_points {
            return Err(Error::input("region and f0 need one entry per torus point"));
        }
        require_symmetric_with_identity(group, f_set, "F")?;
        require_symmetric_with_identity(group, m_set, "M")?;
        group.validate(gamma)?;
        if group.is_identity(gamma) {
            return Err(Error::input("γ must not be the identity"));
        }
        for x in 0..n_points {
            if region[x] == Region::Colored && !matches!(f0[x], Some(0 | 1)) {
                return Err(Error::input(format!("C₀ point {} needs a color in {{0, 1}}", carrier.points[x])));
            }
        }
        let n_set = union(&product_set(group, f_set, m_set)?, &product_set(group, m_set, f_set)?);
        if n_set.len() > MAX_N_BITS {
            return Err(Error::input(format!("|N| = {} exceeds {MAX_N_BITS}", n_set.len())));
        }
        let n4 = power_set(group, &n_set, 4)?;
        let s_set = product_set(group, &power_set(group, &n_set, 5)?, f_set)?;
        let gamma_set = FiniteSubset::from_elements([gamma.clone()]);
        let n4f = product_set(group, &n4, f_set)?;
        let full_delta = product_set(group, &product_set(group, &n4f, &gamma_set)?, &product_set(group, f_set, &n4)?)?;
        let delta = FiniteSubset::from_elements(full_delta.iter().filter(|e| !group.is_identity(e)).cloned());

        let mask = |r: Region| -> Vec<bool> { region.iter().map(|&q| q == r).collect() };
        if !carrier.is_syndetic(&mask(Region::ToColor), f_set)? {
            return Err(Error::input("C is not F-syndetic on the carrier"));
        }
        if !carrier.is_separated(&mask(Region::Uncolored), &s_set)? {
            return Err(Error::input("U is not N⁵F-separated on the carrier"));
        }

        let n4_table = carrier.table(&n4)?;
        let mut blocked = vec![false; n_points];
        let mut z = Vec::new();
        for x in (0..n_points).filter(|&x| region[x] == Region::ToColor) {
            if !blocked[x] {
                z.push(x);
                for row in &n4_table {
                    blocked[row[x]] = true;
                }
            }
        }
        let n_table = carrier.table(&n_set)?;
        let mut rep = vec![None; n_points];
        for (zi, &zx) in z.iter().enumerate() {
            for (i, row) in n_table.iter().enumerate() {
                let x = row[zx];
                if rep[x].is_some() {
                    return Err(Error::input(format!(
                        "torus too small: {} has two representations ν·z",
                        carrier.points[x]
                    )));
                }
                rep[x] = Some((zi, i));
            }
        }
        let base = (0..n_points)
            .map(|x| match region[x] {
                Region::Colored => f0[x],
                Region::ToColor if rep[x].is_none() => Some(0),
                _ => None,
            })
            .collect();

        let lattice = match group {
            Group::Torus { dim, .. } => Group::lattice(dim)?,
            _ => unreachable!("carrier checked the torus"),
        };
        let (fl, ml) = (lift_set(group, f_set)?, lift_set(group, m_set)?);
        let nl = union(&product_set(lattice, &fl, &ml)?, &product_set(lattice, &ml, &fl)?);
        let n4l = power_set(lattice, &nl, 4)?;
        let sl = product_set(lattice, &product_set(lattice, &n4l, &nl)?, &fl)?;
        let gl = FiniteSubset::from_elements([lift(group, gamma)?]);
        let n4fl = product_set(lattice, &n4l, &fl)?;
        let dl = product_set(lattice, &product_set(lattice, &n4fl, &gl)?, &product_set(lattice, &fl, &n4l)?)?;
        let wrap_around = nl.len() != n_set.len() || sl.len() != s_set.len() || dl.len() != full_delta.len();

        Ok(SimilarityInstance {
            carrier,
            region,
            f_set: f_set.clone(),
            m_set: m_set.clone(),
            n_set,
            s_set,
            delta,
            gamma: gamma.clone(),
            z,
            base,
            wrap_around,
            rep,
            n_table,
        })
    }

    pub fn bits(&self) -> usize {
        self.n_set.len()
    }

    pub fn k(&self) -> Color {
        1 << self.bits()
    }

    /// `f^h` on `C₀ ∪ C`; `U` stays uncolored.
    pub fn decode(&self, h: &[Color]) -> Vec<Option<u8>> {
        (0..self.carrier.len())
            .map(|x| match (self.region[x], self.rep[x]) {
                (Region::ToColor, Some((zi, i))) => Some(((h[zi] >> i) & 1) as u8),
                _ => self.base[x],
            })
            .collect()
    }

    /// Bits of `f` on `C ∩ N·z`; redundant bits are 0.
    pub fn encode(&self, f: &[Option<u8>]) -> Vec<Color> {
        self.z
            .iter()
            .map(|&zx| {
                self.n_table.iter().enumerate().fold(0, |acc, (i, row)| {
                    let x = row[zx];
                    match (self.region[x], f[x]) {
                        (Region::ToColor, Some(1)) => acc | (1 << i),
                        _ => acc,
                    }
                })
            })
            .collect()
    }

    fn color_with(&self, x: usize, dom: &[usize], tuple: &[Color]) -> Option<u8> {
        match (self.region[x], self.rep[x]) {
            (Region::ToColor, Some((zi, i))) => {
                let pos = dom.iter().position(|&d| d == zi).expect("domain covers N·z ∪ Nδ·z");
                Some(((tuple[pos] >> i) & 1) as u8)
            }
            _ => self.base[x],
        }
    }
}

/// `x ≡ᴺ y`: colors agree at every `ν` where both `ν·x` and `ν·y` are colored.
fn similar(table: &[Vec<usize>], color: impl Fn(usize) -> Option<u8>, x: usize, y: usize) -> bool {
    table.iter().all(|row| match (color(row[x]), color(row[y])) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    })
}

#[derive(Clone, Debug)]
pub struct SimilarityCsp {
    pub csp: Csp,
    /// `(z position, δ position)` per constraint.
    pub keys: Vec<(usize, usize)>,
    /// `|E′|` per constraint: greedy pairwise-disjoint eligible `ν`.
    pub disjoint_eligible: Vec<usize>,
}

/// One constraint per `(z, δ)` forbidding exactly the `h` under which
/// `z ≡ᴺ δ·z`. `budget` caps tuple evaluations.
pub fn build_similarity_csp(inst: &SimilarityInstance, budget: u64) -> Result<SimilarityCsp> {
    let k = inst.k();
    let mut spent: u64 = 0;
    let mut constraints = Vec::new();
    let mut keys = Vec::new();
    let mut disjoint_eligible = Vec::new();
    for (zi, &zx) in inst.z.iter().enumerate() {
        for (di, delta) in inst.delta.iter().enumerate() {
            let y = inst.carrier.act(delta, zx)?;
            let mut dom: Vec<usize> = inst
                .n_table
                .iter()
                .flat_map(|row| [row[zx], row[y]])
                .filter_map(|x| inst.rep[x].map(|(w, _)| w))
                .collect();
            dom.sort_unstable();
            dom.dedup();
            if dom.len() > 2 {
                return Err(Error::invariant(format!("constraint ({zi}, {delta}) has {} domain points", dom.len())));
            }
            let tuples = (k as u64).pow(dom.len() as u32);
            spent = spent.saturating_add(tuples * inst.bits() as u64);
            if spent > budget {
                return Err(Error::budget(format!("similarity CSP enumeration exceeds {budget} evaluations")));
            }
            let mut forbidden = Vec::new();
            let mut tuple = vec![0 as Color; dom.len()];
            for code in 0..tuples {
                let mut c = code;
                for t in tuple.iter_mut() {
                    *t = (c % k as u64) as Color;
                    c /= k as u64;
                }
                if similar(&inst.n_table, |x| inst.color_with(x, &dom, &tuple), zx, y) {
                    forbidden.push(tuple.clone());
                }
            }
            let mut used = vec![false; inst.carrier.len()];
            let mut e_prime = 0;
            for row in &inst.n_table {
                let (a, b) = (row[zx], row[y]);
                let eligible = inst.region[a] == Region::ToColor && inst.region[b] != Region::Uncolored;
                if eligible && !used[a] && !used[b] {
                    used[a] = true;
                    used[b] = true;
                    e_prime += 1;
                }
            }
            constraints.push(Constraint { dom, forbidden });
            keys.push((zi, di));
            disjoint_eligible.push(e_prime);
        }
    }
    Ok(SimilarityCsp { csp: Csp::dense(k, inst.z.len(), constraints)?, keys, disjoint_eligible })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NotSimilar {
    pub holds: bool,
    /// A point `x` with `x ≡ˢ γ·x`.
    pub counterexample: Option<usize>,
}

/// Every `x` has `σ ∈ S` with `σ·x` and `σγ·x` colored differently.
pub fn check_not_similar(carrier: &Carrier, f: &[Option<u8>], s_chk: &FiniteSubset, gamma: &GroupElement) -> Result<NotSimilar> {
    let table = carrier.table(s_chk)?;
    for x in 0..carrier.len() {
        let y = carrier.act(gamma, x)?;
        if similar(&table, |p| f[p], x, y) {
            return Ok(NotSimilar { holds: false, counterexample: Some(x) });
        }
    }
    Ok(NotSimilar { holds: true, counterexample: None })
}

/// `∃σ ∈ S_n: y(σ) ≠ y(σγ_n)`.
pub fn subshift_membership(
    group: Group,
    y: &HashMap<GroupElement, u8>,
    s_n: &FiniteSubset,
    gamma: &GroupElement,
) -> Result<bool> {
    let mut found = false;
    for sigma in s_n.iter() {
        let sg = group.multiply(sigma, gamma)?;
        let (a, b) = match (y.get(sigma), y.get(&sg)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::input(format!("window misses {sigma} or {sg}"))),
        };
        found |= a != b;
    }
    Ok(found)
}

/// `π_f(x)` on `window`: `γ ↦ f(γ·x)`, uncolored points read as 0.
pub fn coding_window(carrier: &Carrier, f: &[Option<u8>], x: usize, window: &FiniteSubset) -> Result<HashMap<GroupElement, u8>> {
    window.iter().map(|g| Ok((g.clone(), f[carrier.act(g, x)?].unwrap_or(0)))).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimilarityReport {
    pub points: usize,
    pub z_points: usize,
    pub f_size: usize,
    pub m_size: usize,
    pub n_size: usize,
    pub constraints: usize,
    pub ord: usize,
    pub vdeg: usize,
    pub p: String,
    /// `2¹¹|M|¹⁰|F|¹²`, i.e. `2¹¹m¹⁰|F|²²` with `|M| = m|F|`.
    pub vdeg_bound: String,
    pub vdeg_within_bound: bool,
    /// `m′`: least `|E′|` over constraints.
    pub min_disjoint_eligible: usize,
    /// `p ≤ 2^{−⌊m′/6⌋}`.
    pub p_within_bound: bool,
    /// `P[B] ≤ 2^{−|E′_B|}` for every constraint.
    pub per_constraint_bound: bool,
    /// `|B|·vdeg^{|dom B|} < k^{|dom B|}` for every constraint.
    pub gate: bool,
    pub gate_witness: Option<usize>,
    /// `2^m > (2m|F|)^500` with `m = ⌊|M|/|F|⌋`.
    pub growth_condition: bool,
    pub wrap_around: bool,
}

pub fn parameter_report(inst: &SimilarityInstance, sc: &SimilarityCsp) -> SimilarityReport {
    let met = metrics(&sc.csp);
    let cond = check_conditions(&sc.csp);
    let (f, m) = (inst.f_set.len(), inst.m_set.len());
    let bound = BigUint::from(2u32).pow(11u32) * BigUint::from(m).pow(10u32) * BigUint::from(f).pow(12u32);
    let m_prime = sc.disjoint_eligible.iter().copied().min().unwrap_or(0);
    let two = BigUint::from(2u32);
    let pow2_inv = |e: usize| Ratio::new(BigUint::one(), two.clone().pow(e as u32));
    let per_constraint_bound = sc
        .csp
        .constraints
        .iter()
        .zip(&sc.disjoint_eligible)
        .all(|(b, &e)| b.probability(sc.csp.k) <= pow2_inv(e));
    let m_ratio = m / f;
    let growth_condition = two.clone().pow(m_ratio as u32) > BigUint::from(2 * m_ratio * f).pow(500u32);
    SimilarityReport {
        points: inst.carrier.len(),
        z_points: inst.z.len(),
        f_size: f,
        m_size: m,
        n_size: inst.n_set.len(),
        constraints: sc.csp.constraints.len(),
        ord: met.ord,
        vdeg: met.vdeg,
        p: format!("{}/{}", met.p.numer(), met.p.denom()),
        vdeg_within_bound: BigUint::from(met.vdeg) <= bound,
        vdeg_bound: bound.to_string(),
        min_disjoint_eligible: m_prime,
        p_within_bound: met.p <= pow2_inv(m_prime / 6),
        per_constraint_bound,
        gate: cond.good,
        gate_witness: cond.good_witness,
        growth_condition,
        wrap_around: inst.wrap_around,
    }
}

#[derive(Clone, Debug)]
pub struct SimilarityOutcome {
    pub report: SimilarityReport,
    /// `f^h` when the gate passed.
    pub coloring: Option<Vec<Option<u8>>>,
    pub not_similar: Option<NotSimilar>,
}

/// Build, report, and when the gate passes solve and check `(N⁵F, γ)`.
pub fn run_similarity(inst: &SimilarityInstance, budget: u64) -> Result<SimilarityOutcome> {
    let sc = build_similarity_csp(inst, budget)?;
    let report = parameter_report(inst, &sc);
    if !report.gate {
        return Ok(SimilarityOutcome { report, coloring: None, not_similar: None });
    }
    let (h, _) = solve(&sc.csp)?;
    let f = inst.decode(&h);
    let ns = check_not_similar(&inst.carrier, &f, &inst.s_set, &inst.gamma)?;
    Ok(SimilarityOutcome { report, coloring: Some(f), not_similar: Some(ns) })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LevelOutcome {
    Solved { not_similar: bool, membership: bool },
    GateFailed { witness: Option<usize> },
    Refused { reason: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StdLevel {
    pub index: usize,
    pub gamma: String,
    pub delta_n: String,
    pub h_size: usize,
    pub f_size: usize,
    pub m_size: usize,
    pub n_size: usize,
    pub s_size: usize,
    pub c_points: usize,
    pub u_points: usize,
    pub wrap_around: bool,
    pub report: Option<SimilarityReport>,
    pub outcome: LevelOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StdReport {
    pub group: String,
    pub depth: usize,
    pub levels: Vec<StdLevel>,
    /// Every level solved.
    pub completed: bool,
    /// The final coloring still separates `x` from `γ_j·x` for every solved level `j`.
    pub final_checks: Vec<bool>,
    /// Final coloring, `None` for uncolored points.
    #[serde(skip)]
    pub coloring: Vec<Option<u8>>,
}

/// Runs `depth` levels of `H_{n+1} = S_n·H_n` on a torus. Sets are formed
/// in the lattice and projected; collapse under projection is flagged.
/// Stops at the first level that refuses or fails the gate.
pub fn std_demo(
    group: Group,
    h0: &FiniteSubset,
    gammas: &[GroupElement],
    m: usize,
    depth: usize,
    budget: u64,
) -> Result<StdReport> {
    let carrier = Carrier::new(group)?;
    let Group::Torus { dim, .. } = group else { unreachable!() };
    let lattice = Group::lattice(dim)?;
    if h0.is_empty() || m == 0 {
        return Err(Error::input("H₀ must be nonempty and m positive"));
    }
    if gammas.len() < depth {
        return Err(Error::input(format!("{depth} levels need {depth} γ's, got {}", gammas.len())));
    }
    let closed = union(
        &FiniteSubset::from_elements([lattice.identity()]),
        &symmetrize(lattice, &unit_vectors(lattice, dim)?),
    );
    let mut h = lift_set(group, h0)?;
    let mut region = vec![Region::Uncolored; carrier.len()];
    let mut f: Vec<Option<u8>> = vec![None; carrier.len()];
    let mut w: Vec<usize> = (0..carrier.len()).collect();
    let mut levels = Vec::new();
    let mut solved: Vec<(FiniteSubset, GroupElement)> = Vec::new();
    for (index, gamma) in gammas.iter().take(depth).enumerate() {
        group.validate(gamma)?;
        let hp = project_set(group, &h)?;
        let mut delta_n = None;
        for cand in carrier.points.iter().filter(|e| !group.is_identity(e)) {
            let shifted = product_set(group, &hp, &FiniteSubset::from_elements([cand.clone()]))?;
            if !shifted.iter().any(|e| hp.contains(e)) {
                delta_n = Some(lift(group, cand)?);
                break;
            }
        }
        let Some(delta_n) = delta_n else {
            levels.push(StdLevel {
                index,
                gamma: gamma.to_string(),
                delta_n: String::new(),
                h_size: h.len(),
                f_size: 0,
                m_size: 0,
                n_size: 0,
                s_size: 0,
                c_points: 0,
                u_points: 0,
                wrap_around: hp.len() != h.len(),
                report: None,
                outcome: LevelOutcome::Refused { reason: "no δ with H ∩ Hδ = ∅; enlarge the torus".into() },
            });
            break;
        };
        let f_n = union(&h, &product_set(lattice, &h, &FiniteSubset::from_elements([delta_n.clone()]))?);
        let f_hat = union(&symmetrize(lattice, &f_n), &FiniteSubset::from_elements([lattice.identity()]));
        let mut radius = 0;
        let mut m_set = power_set(lattice, &closed, 0)?;
        while m_set.len() < m * f_hat.len() {
            radius += 1;
            m_set = power_set(lattice, &closed, radius)?;
        }
        let n_set = union(&product_set(lattice, &f_hat, &m_set)?, &product_set(lattice, &m_set, &f_hat)?);
        let mut level = StdLevel {
            index,
            gamma: gamma.to_string(),
            delta_n: delta_n.to_string(),
            h_size: h.len(),
            f_size: f_hat.len(),
            m_size: m_set.len(),
            n_size: n_set.len(),
            s_size: 0,
            c_points: 0,
            u_points: 0,
            wrap_around: false,
            report: None,
            outcome: LevelOutcome::Refused { reason: String::new() },
        };
        if n_set.len() > MAX_N_BITS {
            level.outcome = LevelOutcome::Refused { reason: format!("|N| = {} exceeds {MAX_N_BITS}", n_set.len()) };
            levels.push(level);
            break;
        }
        let s_core = product_set(lattice, &power_set(lattice, &n_set, 5)?, &f_hat)?;
        let s_n = union(
            &symmetrize(lattice, &union(&s_core, &product_set(lattice, &inverse_set(lattice, &f_n), &f_n)?)),
            &FiniteSubset::from_elements([lattice.identity()]),
        );
        let h_next = product_set(lattice, &s_n, &h)?;
        let (fp, sp) = (project_set(group, &f_n)?, project_set(group, &s_n)?);
        let hnp = project_set(group, &h_next)?;
        level.s_size = s_n.len();
        level.wrap_around = fp.len() != f_n.len() || sp.len() != s_n.len() || hnp.len() != h_next.len();
        let (c, u) = match split_syndetic(&carrier, &w, &fp, &sp) {
            Ok(cu) => cu,
            Err(e) => {
                level.outcome = LevelOutcome::Refused { reason: e.to_string() };
                levels.push(level);
                break;
            }
        };
        level.c_points = c.len();
        level.u_points = u.len();
        let mut level_region = region.clone();
        for &x in &c {
            level_region[x] = Region::ToColor;
        }
        let inst = match SimilarityInstance::new(
            group,
            level_region.clone(),
            &f,
            &project_set(group, &f_hat)?,
            &project_set(group, &m_set)?,
            gamma,
        ) {
            Ok(i) => i,
            Err(Error::Input(reason)) => {
                level.outcome = LevelOutcome::Refused { reason };
                levels.push(level);
                break;
            }
            Err(e) => return Err(e),
        };
        level.wrap_around |= inst.wrap_around;
        let out = run_similarity(&inst, budget)?;
        let gate = out.report.gate;
        let witness = out.report.gate_witness;
        level.report = Some(out.report);
        match (out.coloring, out.not_similar) {
            (Some(fc), Some(ns)) => {
                let mut membership = true;
                for x in 0..carrier.len() {
                    let gs = product_set(group, &sp, &FiniteSubset::from_elements([gamma.clone()]))?;
                    let win = coding_window(&carrier, &fc, x, &union(&sp, &gs))?;
                    membership &= subshift_membership(group, &win, &sp, gamma)?;
                }
                level.outcome = LevelOutcome::Solved { not_similar: ns.holds, membership };
                f = fc;
                region = level_region
                    .iter()
                    .map(|&r| if r == Region::ToColor { Region::Colored } else { r })
                    .collect();
                w = u;
                h = h_next;
                solved.push((inst.s_set.clone(), gamma.clone()));
                levels.push(level);
            }
            _ => {
                debug_assert!(!gate);
                level.outcome = LevelOutcome::GateFailed { witness };
                levels.push(level);
                break;
            }
        }
    }
    let final_checks = solved
        .iter()
        .map(|(s, g)| check_not_similar(&carrier, &f, s, g).map(|r| r.holds))
        .collect::<Result<Vec<_>>>()?;
    let completed = levels.len() == depth && levels.iter().all(|l| matches!(l.outcome, LevelOutcome::Solved { .. }));
    Ok(StdReport { group: group.to_string(), depth, levels, completed, final_checks, coloring: f })
}
