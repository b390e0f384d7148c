//! Python bindings. Structured inputs use the same JSON forms as the CLI;
//! structured results come back as JSON strings.

use cont_lll::csp::{check_conditions, check_solution, metrics};
use cont_lll::group::{box_set, Group, GroupSpec};
use cont_lll::io::{csp_from_json, group_spec_from_json, network_from_json, parse_subset};
use cont_lll::local::{gps_coloring, log_star as core_log_star, NetworkGraph};
use cont_lll::patterns::proper_coloring_patterns;
use cont_lll::solver::solve;
use cont_lll::tiles::{build_tile_graph, find_avoiding_coloring, SearchOutcome, DEFAULT_SEARCH_BUDGET, DEFAULT_TILE_BUDGET};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

create_exception!(cont_lll_py, GateError, PyException, "The instance fails the solver's gate.");
create_exception!(cont_lll_py, BudgetError, PyException, "An enumeration budget ran out.");

fn py_err(e: cont_lll::Error) -> PyErr {
    match e {
        cont_lll::Error::Input(m) => PyValueError::new_err(m),
        cont_lll::Error::Gate(m) => GateError::new_err(m),
        cont_lll::Error::Budget(m) => BudgetError::new_err(m),
        cont_lll::Error::Invariant(m) => PyException::new_err(m),
    }
}

fn json_value(text: &str) -> PyResult<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("malformed JSON: {e}")))
}

/// Metrics and gate report of a CSP, as JSON.
#[pyfunction]
fn csp_report(csp_json: &str) -> PyResult<String> {
    let csp = csp_from_json(csp_json).map_err(py_err)?;
    let m = metrics(&csp);
    Ok(json!({
        "p": m.p.to_string(),
        "d": m.d,
        "vdeg": m.vdeg,
        "ord": m.ord,
        "conditions": check_conditions(&csp),
    })
    .to_string())
}

/// Solves a CSP; returns `(solution, trace_json)`. Raises `GateError`
/// when the instance is not good.
#[pyfunction]
fn solve_csp(csp_json: &str) -> PyResult<(Vec<u32>, String)> {
    let csp = csp_from_json(csp_json).map_err(py_err)?;
    let (f, trace) = solve(&csp).map_err(py_err)?;
    if !check_solution(&csp, &f).map_err(py_err)?.0 {
        return Err(PyException::new_err("solver output failed validation"));
    }
    let trace = serde_json::to_string(&trace).map_err(|e| PyException::new_err(e.to_string()))?;
    Ok((f, trace))
}

#[pyfunction]
fn log_star(n: u128) -> u32 {
    core_log_star(n)
}

/// Proper coloring of a network (`{"family":"cycle","n":64}` and friends)
/// with ids `1..=n`; returns `(colors, rounds)`.
#[pyfunction]
fn gps_color(network_json: &str) -> PyResult<(Vec<u64>, u64)> {
    let net: NetworkGraph = network_from_json(network_json).map_err(py_err)?;
    let d = net.graph.underlying().max_degree();
    let r = gps_coloring(&net, d).map_err(py_err)?;
    Ok((r.colors, r.ledger.total()))
}

/// `(vertices, edges)` of `H_{D,n}`.
#[pyfunction]
#[pyo3(signature = (group_json, d_json, n, budget = DEFAULT_TILE_BUDGET))]
fn tile_graph_size(group_json: &str, d_json: &str, n: usize, budget: u64) -> PyResult<(usize, usize)> {
    let spec = group_spec_from_json(group_json).map_err(py_err)?;
    let d = parse_subset(spec.group, &json_value(d_json)?).map_err(py_err)?;
    let tg = build_tile_graph(&spec, &d, n, budget).map_err(py_err)?;
    Ok((tg.vertex_count(), tg.graph.edge_count()))
}

/// Searches `k = 2..=max_k` for a proper coloring of `H_{{-1,0,1},n}` over
/// ℤ; returns `(k, coloring)` or `None`.
#[pyfunction]
#[pyo3(signature = (n, max_k, budget = DEFAULT_SEARCH_BUDGET))]
fn line_tile_coloring(n: usize, max_k: u32, budget: u64) -> PyResult<Option<(u32, Vec<u32>)>> {
    let z = Group::lattice(1).map_err(py_err)?;
    let spec = GroupSpec::new(z, vec![z.vector(&[1]).map_err(py_err)?]).map_err(py_err)?;
    let d = box_set(z, &[-1], &[1]).map_err(py_err)?;
    let tg = build_tile_graph(&spec, &d, n, DEFAULT_TILE_BUDGET).map_err(py_err)?;
    for k in 2..=max_k {
        let pats = proper_coloring_patterns(z, k, &spec.generator_set()).map_err(py_err)?;
        if let SearchOutcome::Found(h) = find_avoiding_coloring(z, &tg.graph, &pats, budget).map_err(py_err)? {
            return Ok(Some((k, h)));
        }
    }
    Ok(None)
}

#[pymodule]
fn cont_lll_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GateError", m.py().get_type::<GateError>())?;
    m.add("BudgetError", m.py().get_type::<BudgetError>())?;
    m.add_function(wrap_pyfunction!(csp_report, m)?)?;
    m.add_function(wrap_pyfunction!(solve_csp, m)?)?;
    m.add_function(wrap_pyfunction!(log_star, m)?)?;
    m.add_function(wrap_pyfunction!(gps_color, m)?)?;
    m.add_function(wrap_pyfunction!(tile_graph_size, m)?)?;
    m.add_function(wrap_pyfunction!(line_tile_coloring, m)?)?;
    Ok(())
}
