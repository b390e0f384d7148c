//! Canonical-form arithmetic for finitely generated groups.
//!
//! Three families are supported: integer lattices `Z^d`, finite tori
//! `Z_q^d` and free groups of finite rank. Elements carry a canonical form
//! (an integer vector, reduced modulo `q` on a torus, or a freely reduced
//! word), so structural equality is group equality.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// An element of one of the supported groups, in canonical form.
///
/// Free-group words store generator `i` (zero based) as `i + 1` and its
/// inverse as `-(i + 1)`; a canonical word never contains `l` next to `-l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    Vector(Vec<i64>),
    Word(Vec<i32>),
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Vector(v) => {
                write!(f, "(")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            GroupElement::Word(w) if w.is_empty() => write!(f, "1"),
            GroupElement::Word(w) => {
                for &l in w {
                    write!(f, "{}", letter_char(l))?;
                }
                Ok(())
            }
        }
    }
}

fn letter_char(l: i32) -> char {
    let i = (l.unsigned_abs() - 1) as u8;
    if l > 0 {
        (b'a' + i) as char
    } else {
        (b'A' + i) as char
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    Lattice { dim: usize },
    Torus { dim: usize, modulus: i64 },
    Free { rank: usize },
}

impl Group {
    pub fn lattice(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("lattice dimension must be at least 1"));
        }
        Ok(Group::Lattice { dim })
    }

    pub fn torus(dim: usize, modulus: i64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("torus dimension must be at least 1"));
        }
        if modulus < 2 {
            return Err(Error::input("torus modulus must be at least 2"));
        }
        Ok(Group::Torus { dim, modulus })
    }

    pub fn free(rank: usize) -> Result<Self> {
        if rank == 0 || rank > 26 {
            return Err(Error::input("free group rank must be in 1..=26"));
        }
        Ok(Group::Free { rank })
    }

    pub fn identity(&self) -> GroupElement {
        match *self {
            Group::Lattice { dim } | Group::Torus { dim, .. } => GroupElement::Vector(vec![0; dim]),
            Group::Free { .. } => GroupElement::Word(Vec::new()),
        }
    }

    pub fn is_identity(&self, a: &GroupElement) -> bool {
        match a {
            GroupElement::Vector(v) => v.iter().all(|&c| c == 0),
            GroupElement::Word(w) => w.is_empty(),
        }
    }

    /// Builds an element from an integer vector, reducing modulo `q` on a torus.
    pub fn vector(&self, coords: &[i64]) -> Result<GroupElement> {
        match *self {
            Group::Lattice { dim } if coords.len() == dim => Ok(GroupElement::Vector(coords.to_vec())),
            Group::Torus { dim, modulus } if coords.len() == dim => Ok(GroupElement::Vector(
                coords.iter().map(|c| c.rem_euclid(modulus)).collect(),
            )),
            Group::Free { .. } => Err(Error::input("free-group elements are words, not vectors")),
            _ => Err(Error::input(format!(
                "vector {coords:?} has the wrong dimension for {self}"
            ))),
        }
    }

    /// Parses a free-group word: lowercase letters are generators, uppercase
    /// their inverses; `""`, `"1"` and `"e"` denote the identity.
    pub fn word(&self, text: &str) -> Result<GroupElement> {
        let Group::Free { rank } = *self else {
            return Err(Error::input("words are only valid in free groups"));
        };
        if text.is_empty() || text == "1" || text == "e" {
            return Ok(GroupElement::Word(Vec::new()));
        }
        let mut letters = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let l = match ch {
                'a'..='z' => (ch as u8 - b'a') as i32 + 1,
                'A'..='Z' => -((ch as u8 - b'A') as i32 + 1),
                _ => return Err(Error::input(format!("invalid letter {ch:?} in word {text:?}"))),
            };
            if l.unsigned_abs() as usize > rank {
                return Err(Error::input(format!("letter {ch:?} exceeds free rank {rank}")));
            }
            letters.push(l);
        }
        Ok(GroupElement::Word(reduce(letters)))
    }

    /// Checks that `a` is a canonical element of this group.
    pub fn validate(&self, a: &GroupElement) -> Result<()> {
        let ok = match (*self, a) {
            (Group::Lattice { dim }, GroupElement::Vector(v)) => v.len() == dim,
            (Group::Torus { dim, modulus }, GroupElement::Vector(v)) => {
                v.len() == dim && v.iter().all(|&c| (0..modulus).contains(&c))
            }
            (Group::Free { rank }, GroupElement::Word(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= rank)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("{a} is not an element of {self}")))
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement> {
        match (*self, a, b) {
            (Group::Lattice { dim }, GroupElement::Vector(x), GroupElement::Vector(y))
                if x.len() == dim && y.len() == dim =>
            {
                Ok(GroupElement::Vector(x.iter().zip(y).map(|(p, q)| p + q).collect()))
            }
            (Group::Torus { dim, modulus }, GroupElement::Vector(x), GroupElement::Vector(y))
                if x.len() == dim && y.len() == dim =>
            {
                Ok(GroupElement::Vector(
                    x.iter().zip(y).map(|(p, q)| (p + q).rem_euclid(modulus)).collect(),
                ))
            }
            (Group::Free { .. }, GroupElement::Word(x), GroupElement::Word(y)) => {
                let mut out = x.clone();
                for &l in y {
                    if out.last() == Some(&-l) {
                        out.pop();
                    } else {
                        out.push(l);
                    }
                }
                Ok(GroupElement::Word(out))
            }
            _ => Err(Error::input(format!("cannot multiply {a} and {b} in {self}"))),
        }
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement> {
        match (*self, a) {
            (Group::Lattice { dim }, GroupElement::Vector(x)) if x.len() == dim => {
                Ok(GroupElement::Vector(x.iter().map(|c| -c).collect()))
            }
            (Group::Torus { dim, modulus }, GroupElement::Vector(x)) if x.len() == dim => Ok(
                GroupElement::Vector(x.iter().map(|c| (-c).rem_euclid(modulus)).collect()),
            ),
            (Group::Free { .. }, GroupElement::Word(w)) => {
                Ok(GroupElement::Word(w.iter().rev().map(|l| -l).collect()))
            }
            _ => Err(Error::input(format!("{a} is not an element of {self}"))),
        }
    }

    /// Number of elements, for finite groups.
    pub fn order(&self) -> Option<usize> {
        match *self {
            Group::Torus { dim, modulus } => (modulus as usize).checked_pow(dim as u32),
            _ => None,
        }
    }

    /// All elements of a torus in mixed-radix order (last coordinate fastest).
    pub fn elements(&self) -> Option<Vec<GroupElement>> {
        let Group::Torus { dim, modulus } = *self else {
            return None;
        };
        let total = self.order()?;
        let mut out = Vec::with_capacity(total);
        for mut i in 0..total {
            let mut v = vec![0i64; dim];
            for c in v.iter_mut().rev() {
                *c = (i % modulus as usize) as i64;
                i /= modulus as usize;
            }
            out.push(GroupElement::Vector(v));
        }
        Some(out)
    }

    /// Position of a torus element in [`Group::elements`].
    pub fn torus_index(&self, a: &GroupElement) -> Option<usize> {
        match (*self, a) {
            (Group::Torus { modulus, .. }, GroupElement::Vector(v)) => {
                Some(v.iter().fold(0usize, |acc, &c| acc * modulus as usize + c as usize))
            }
            _ => None,
        }
    }

    pub fn parse_element(&self, value: &Value) -> Result<GroupElement> {
        let elem = match value {
            Value::String(s) => self.word(s)?,
            Value::Array(items) => {
                let coords = items
                    .iter()
                    .map(|c| c.as_i64().ok_or_else(|| Error::input(format!("bad coordinate {c}"))))
                    .collect::<Result<Vec<_>>>()?;
                self.vector(&coords)?
            }
            Value::Number(n) => {
                let c = n.as_i64().ok_or_else(|| Error::input(format!("bad coordinate {n}")))?;
                self.vector(&[c])?
            }
            other => return Err(Error::input(format!("cannot parse group element from {other}"))),
        };
        Ok(elem)
    }

    pub fn element_to_json(&self, a: &GroupElement) -> Value {
        match a {
            GroupElement::Vector(v) => Value::from(v.clone()),
            GroupElement::Word(_) => Value::from(a.to_string()),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Group::Lattice { dim } => write!(f, "Z^{dim}"),
            Group::Torus { dim, modulus } => write!(f, "Z_{modulus}^{dim}"),
            Group::Free { rank } => write!(f, "F_{rank}"),
        }
    }
}

fn reduce(letters: Vec<i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(letters.len());
    for l in letters {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

/// A group together with a finite generator list `S`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub group: Group,
    pub generators: Vec<GroupElement>,
}

impl GroupSpec {
    pub fn new(group: Group, generators: Vec<GroupElement>) -> Result<Self> {
        for g in &generators {
            group.validate(g)?;
        }
        Ok(GroupSpec { group, generators })
    }

    pub fn generator_set(&self) -> FiniteSubset {
        FiniteSubset::from_elements(self.generators.iter().cloned())
    }

    /// `S ∪ S⁻¹ ∪ {1}` in a fixed order: identity, then each generator
    /// followed by its inverse.
    pub fn closed_generators(&self) -> FiniteSubset {
        let mut out = FiniteSubset::from_elements([self.group.identity()]);
        out.extend(symmetrize(self.group, &self.generator_set()).iter().cloned());
        out
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let desc: GroupDescriptor = serde_json::from_value(value.clone())
            .map_err(|e| Error::input(format!("bad group descriptor: {e}")))?;
        desc.into_spec()
    }

    pub fn to_json(&self) -> Value {
        let mut desc = serde_json::Map::new();
        match self.group {
            Group::Lattice { dim } => {
                desc.insert("kind".into(), "lattice".into());
                desc.insert("d".into(), dim.into());
            }
            Group::Torus { dim, modulus } => {
                desc.insert("kind".into(), "torus".into());
                desc.insert("d".into(), dim.into());
                desc.insert("q".into(), modulus.into());
            }
            Group::Free { rank } => {
                desc.insert("kind".into(), "free".into());
                desc.insert("rank".into(), rank.into());
            }
        }
        desc.insert(
            "generators".into(),
            Value::Array(self.generators.iter().map(|g| self.group.element_to_json(g)).collect()),
        );
        Value::Object(desc)
    }
}

/// JSON form of a group, e.g. `{"kind":"torus","d":2,"q":16,"generators":[[1,0],[0,1]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupDescriptor {
    pub kind: String,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub q: Option<i64>,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub generators: Vec<Value>,
}

impl GroupDescriptor {
    pub fn into_spec(self) -> Result<GroupSpec> {
        let group = match self.kind.as_str() {
            "lattice" => Group::lattice(self.d.ok_or_else(|| Error::input("lattice needs \"d\""))?)?,
            "torus" => Group::torus(
                self.d.ok_or_else(|| Error::input("torus needs \"d\""))?,
                self.q.ok_or_else(|| Error::input("torus needs \"q\""))?,
            )?,
            "free" => Group::free(self.rank.ok_or_else(|| Error::input("free group needs \"rank\""))?)?,
            other => return Err(Error::input(format!("unknown group kind {other:?}"))),
        };
        let generators = self
            .generators
            .iter()
            .map(|g| group.parse_element(g))
            .collect::<Result<Vec<_>>>()?;
        GroupSpec::new(group, generators)
    }
}

/// An ordered, duplicate-free sequence of group elements.
#[derive(Clone, Debug, Default)]
pub struct FiniteSubset {
    elems: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
}

impl PartialEq for FiniteSubset {
    fn eq(&self, other: &Self) -> bool {
        self.elems == other.elems
    }
}

impl FiniteSubset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_elements<I: IntoIterator<Item = GroupElement>>(iter: I) -> Self {
        let mut out = Self::new();
        out.extend(iter);
        out
    }

    /// Inserts `a` unless already present; returns its position either way.
    pub fn insert(&mut self, a: GroupElement) -> usize {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.elems.len();
        self.index.insert(a.clone(), i);
        self.elems.push(a);
        i
    }

    pub fn extend<I: IntoIterator<Item = GroupElement>>(&mut self, iter: I) {
        for a in iter {
            self.insert(a);
        }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, a: &GroupElement) -> bool {
        self.index.contains_key(a)
    }

    pub fn position(&self, a: &GroupElement) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn get(&self, i: usize) -> &GroupElement {
        &self.elems[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement> {
        self.elems.iter()
    }

    pub fn as_slice(&self) -> &[GroupElement] {
        &self.elems
    }

    pub fn is_subset_of(&self, other: &FiniteSubset) -> bool {
        self.elems.iter().all(|a| other.contains(a))
    }

    /// Same elements, ignoring order.
    pub fn set_eq(&self, other: &FiniteSubset) -> bool {
        self.len() == other.len() && self.is_subset_of(other)
    }
}

impl<'a> IntoIterator for &'a FiniteSubset {
    type Item = &'a GroupElement;
    type IntoIter = std::slice::Iter<'a, GroupElement>;

    fn into_iter(self) -> Self::IntoIter {
        self.elems.iter()
    }
}

/// `{ab : a ∈ A, b ∈ B}` in first-occurrence order (outer loop over `A`).
pub fn product_set(group: Group, a: &FiniteSubset, b: &FiniteSubset) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::new();
    for x in a {
        for y in b {
            out.insert(group.multiply(x, y)?);
        }
    }
    Ok(out)
}

/// `F^t`, with `F^0 = {1}`.
pub fn power_set(group: Group, f: &FiniteSubset, t: usize) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::from_elements([group.identity()]);
    for _ in 0..t {
        out = product_set(group, &out, f)?;
    }
    Ok(out)
}

pub fn inverse_set(group: Group, a: &FiniteSubset) -> FiniteSubset {
    FiniteSubset::from_elements(a.iter().map(|x| group.inverse(x).expect("validated element")))
}

/// `S ∪ S⁻¹`, each element followed by its inverse.
pub fn symmetrize(group: Group, s: &FiniteSubset) -> FiniteSubset {
    let mut out = FiniteSubset::new();
    for x in s {
        out.insert(x.clone());
        out.insert(group.inverse(x).expect("validated element"));
    }
    out
}

pub fn union(a: &FiniteSubset, b: &FiniteSubset) -> FiniteSubset {
    let mut out = a.clone();
    out.extend(b.iter().cloned());
    out
}

/// Left translate `A·x = {a·x : a ∈ A}`.
pub fn translate(group: Group, a: &FiniteSubset, x: &GroupElement) -> Result<FiniteSubset> {
    let mut out = FiniteSubset::new();
    for y in a {
        out.insert(group.multiply(y, x)?);
    }
    Ok(out)
}

/// Lattice box `[lo_1, hi_1] × … × [lo_d, hi_d]` in lexicographic order.
pub fn box_set(group: Group, lo: &[i64], hi: &[i64]) -> Result<FiniteSubset> {
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(Error::input("box bounds must have equal length and lo <= hi"));
    }
    let mut out = FiniteSubset::new();
    let mut cur = lo.to_vec();
    loop {
        out.insert(group.vector(&cur)?);
        let mut i = cur.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = lo[i];
        }
    }
}
