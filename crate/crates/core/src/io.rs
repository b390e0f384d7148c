//! JSON formats for CSPs, pattern sets, networks and element lists.
//!
//! ```text
//! CSP:      {"k":2,"points":3,"constraints":[{"dom":[0,1],"forbidden":[[0,0],[1,1]]}]}
//! patterns: {"k":3,"patterns":[{"dom":[[0,0],[1,0]],"values":[0,0]}]}
//! network:  {"family":"cycle","n":64}
//!           {"group":{"kind":"lattice","d":2,"generators":[[1,0],[0,1]]},"vertices":[[0,0],[0,1]]}
//! ```

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::csp::{Color, Constraint, Csp};
use crate::error::{Error, Result};
use crate::group::{FiniteSubset, Group, GroupDescriptor, GroupElement, GroupSpec};
use crate::local::NetworkGraph;
use crate::patterns::{KPattern, PatternSet};

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("malformed {what} JSON: {e}")))
}

#[derive(Deserialize, Serialize)]
struct ConstraintFile {
    dom: Vec<usize>,
    forbidden: Vec<Vec<Color>>,
}

#[derive(Deserialize, Serialize)]
struct CspFile {
    k: Color,
    points: usize,
    constraints: Vec<ConstraintFile>,
}

/// Points are `0..points`.
pub fn csp_from_json(text: &str) -> Result<Csp> {
    let file: CspFile = parse(text, "CSP")?;
    let constraints = file
        .constraints
        .into_iter()
        .map(|c| Constraint::new(c.dom, c.forbidden, file.k))
        .collect::<Result<Vec<_>>>()?;
    Csp::dense(file.k, file.points, constraints)
}

pub fn csp_to_json(csp: &Csp) -> Value {
    json!({
        "k": csp.k,
        "points": csp.id_bound(),
        "constraints": csp.constraints.iter().map(|c| json!({"dom": c.dom, "forbidden": c.forbidden})).collect::<Vec<_>>(),
    })
}

pub fn parse_subset(group: Group, value: &Value) -> Result<FiniteSubset> {
    let items = value.as_array().ok_or_else(|| Error::input("expected a JSON array of elements"))?;
    let mut out = FiniteSubset::new();
    for v in items {
        out.insert(group.parse_element(v)?);
    }
    Ok(out)
}

pub fn subset_to_json(group: Group, s: &FiniteSubset) -> Value {
    Value::Array(s.iter().map(|e| group.element_to_json(e)).collect())
}

#[derive(Deserialize)]
struct PatternEntry {
    dom: Vec<Value>,
    values: Vec<u32>,
}

#[derive(Deserialize)]
struct PatternFile {
    k: u32,
    patterns: Vec<PatternEntry>,
}

pub fn patterns_from_json(group: Group, text: &str) -> Result<PatternSet> {
    let file: PatternFile = parse(text, "pattern set")?;
    let mut out = Vec::with_capacity(file.patterns.len());
    for p in file.patterns {
        if p.dom.len() != p.values.len() {
            return Err(Error::input("pattern dom and values differ in length"));
        }
        let entries = p
            .dom
            .iter()
            .zip(p.values)
            .map(|(e, v)| Ok((group.parse_element(e)?, v)))
            .collect::<Result<Vec<_>>>()?;
        out.push(KPattern::new(group, entries)?);
    }
    PatternSet::new(file.k, out)
}

pub fn patterns_to_json(group: Group, set: &PatternSet) -> Value {
    json!({
        "k": set.k,
        "patterns": set.patterns.iter().map(|p| json!({
            "dom": subset_to_json(group, &p.dom),
            "values": p.values,
        })).collect::<Vec<_>>(),
    })
}

pub fn group_spec_from_json(text: &str) -> Result<GroupSpec> {
    let desc: GroupDescriptor = parse(text, "group")?;
    desc.into_spec()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NetworkFile {
    Family {
        family: String,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        w: Option<usize>,
        #[serde(default)]
        h: Option<usize>,
    },
    Explicit {
        group: Value,
        vertices: Vec<Value>,
    },
}

/// A network from a named family (`cycle`, `path`, `torus2`, `rectangle`)
/// or an explicit vertex list inside a Cayley graph.
pub fn network_from_json(text: &str) -> Result<NetworkGraph> {
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::input(format!("network needs \"{name}\"")));
    match parse::<NetworkFile>(text, "network")? {
        NetworkFile::Family { family, n, w, h } => match family.as_str() {
            "cycle" => NetworkGraph::cycle(need(n, "n")?),
            "path" => NetworkGraph::path(need(n, "n")?),
            "torus2" => NetworkGraph::torus2(need(n, "n")?),
            "rectangle" => NetworkGraph::rectangle(need(w, "w")?, need(h, "h")?),
            other => Err(Error::input(format!("unknown network family {other:?}"))),
        },
        NetworkFile::Explicit { group, vertices } => {
            let spec = GroupSpec::from_json(&group)?;
            let verts = vertices
                .iter()
                .map(|v| spec.group.parse_element(v))
                .collect::<Result<Vec<GroupElement>>>()?;
            let set = FiniteSubset::from_elements(verts);
            if set.len() != vertices.len() {
                return Err(Error::input("network vertices repeat"));
            }
            NetworkGraph::new(spec.group, &set, &spec.generator_set())
        }
    }
}

/// A JSON array of ids, one per vertex.
pub fn ids_from_json(text: &str) -> Result<Vec<u64>> {
    parse(text, "id list")
}
