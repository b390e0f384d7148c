use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cont_lll::csp::{check_conditions, check_solution, metrics};
use cont_lll::group::{FiniteSubset, Group, GroupSpec};
use cont_lll::io::{csp_from_json, group_spec_from_json, ids_from_json, network_from_json, parse_subset, patterns_from_json};
use cont_lll::local::{
    distributed_avoiding_coloring, distributed_homomorphism, gps_coloring, log_star, validate_homomorphism, NetworkGraph,
    RoundLedger,
};
use cont_lll::patterns::{is_avoiding, is_s_connected, proper_coloring_patterns, PatternSet};
use cont_lll::solver::{brute_force_solve, solve};
use cont_lll::subshift::{std_demo, LevelOutcome};
use cont_lll::tiles::{
    build_tile_graph, find_avoiding_coloring, read_tile_graph_with_meta, write_tile_graph_with_meta, SearchOutcome, TileGraph,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use num_bigint::BigUint;
use num_rational::Ratio;
use serde_json::{json, Value};

use crate::provenance::{write_json, write_text, Inputs};
use crate::{Algo, Cli, Command, Config, Family};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Rejected = 1,
    Budget = 3,
}

/// Exit code for an error: library errors by kind, anything else (I/O,
/// JSON syntax, bad arguments) is invalid input.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<cont_lll::Error>()) {
        Some(cont_lll::Error::Gate(_)) => 1,
        Some(cont_lll::Error::Input(_)) => 2,
        Some(cont_lll::Error::Budget(_)) => 3,
        Some(cont_lll::Error::Invariant(_)) => 4,
        None => 2,
    }
}

pub fn dispatch(cli: &Cli) -> Result<Status> {
    let cfg = &cli.config;
    match &cli.command {
        Command::SolveCsp { csp, out, trace, oracle } => solve_csp(cfg, csp, out.as_deref(), trace.as_deref(), *oracle),
        Command::BuildTiles { group, d, n, out } => build_tiles(cfg, group, d, *n, out),
        Command::FindAvoiding { tiles, patterns, proper_up_to, out } => {
            find_avoiding(cfg, tiles, patterns.as_deref(), *proper_up_to, out.as_deref())
        }
        Command::RunLocal { graph, algo, d, m, ids, coloring, ledger, out } => run_local(
            cfg,
            &LocalArgs { graph, algo: *algo, d: d.as_deref(), m: *m, ids: ids.as_deref(), coloring: coloring.as_deref() },
            ledger,
            out.as_deref(),
        ),
        Command::Benchmark { pipeline, family, sizes, m, max_k, out } => {
            benchmark(cfg, *pipeline, *family, sizes, *m, *max_k, out)
        }
        Command::SubshiftDemo { group, h0, gammas, depth, m, report } => {
            subshift_demo(cfg, group, h0, gammas, *depth, *m, report)
        }
        Command::CheckPatterns { group, patterns, graph, coloring, out } => {
            check_patterns(cfg, group, patterns, graph.as_deref(), coloring.as_deref(), out.as_deref())
        }
    }
}

fn default_solution_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csp".into());
    input.with_file_name(format!("{stem}.solution.json"))
}

fn solve_csp(cfg: &Config, path: &Path, out: Option<&Path>, trace_path: Option<&Path>, oracle: bool) -> Result<Status> {
    let mut inputs = Inputs::new("solve-csp", cfg.seed);
    inputs.note(format!("oracle={oracle} brute_budget={}", cfg.brute_budget));
    let text = String::from_utf8(inputs.read(path)?).context("CSP file is not UTF-8")?;
    let csp = csp_from_json(&text)?;
    let m = metrics(&csp);
    let conditions = check_conditions(&csp);
    let summary = json!({
        "k": csp.k,
        "points": csp.points.len(),
        "constraints": csp.constraints.len(),
        "p": m.p.to_string(),
        "d": m.d,
        "vdeg": m.vdeg,
        "ord": m.ord,
        "conditions": conditions,
    });
    eprintln!("k={} points={} p={} vdeg={} ord={}", csp.k, csp.points.len(), m.p, m.vdeg, m.ord);
    let (f, trace) = match solve(&csp) {
        Ok(r) => r,
        Err(cont_lll::Error::Gate(msg)) => {
            let lhs = m.p.clone() * Ratio::from_integer(BigUint::from(m.vdeg).pow(m.ord as u32));
            eprintln!("gate rejected: {msg}; p·vdeg^ord = {lhs}");
            return Ok(Status::Rejected);
        }
        Err(e) => return Err(e.into()),
    };
    let (valid, _) = check_solution(&csp, &f)?;
    if !valid || !trace.all_hold() {
        bail!(cont_lll::Error::invariant("solver output failed validation"));
    }
    let mut body = json!({ "metrics": summary, "solution": f, "valid": valid });
    if oracle {
        let brute = brute_force_solve(&csp, cfg.brute_budget as u128)?;
        body["oracle"] = json!({ "satisfiable": brute.is_some(), "agrees": brute.is_some() == valid });
    }
    write_json(Some(&out.map(Path::to_path_buf).unwrap_or_else(|| default_solution_path(path))), &inputs.stamp(body))?;
    if let Some(tp) = trace_path {
        write_json(Some(tp), &inputs.stamp(json!({ "trace": trace })))?;
    }
    Ok(Status::Ok)
}

fn build_tiles(cfg: &Config, group: &str, d: &str, n: usize, out: &Path) -> Result<Status> {
    let mut inputs = Inputs::new("build-tiles", cfg.seed);
    let spec = group_spec_from_json(&inputs.json_arg(group)?)?;
    let d_set = parse_subset(spec.group, &parse_value(&inputs.json_arg(d)?)?)?;
    inputs.note(format!("n={n} tile_budget={}", cfg.tile_budget));
    let tg = build_tile_graph(&spec, &d_set, n, cfg.tile_budget)?;
    let meta = json!({ "input_sha256": inputs.digest(), "seed": cfg.seed });
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_tile_graph_with_meta(&tg, &meta, BufWriter::new(file)).context("writing tile graph")?;
    eprintln!("H_(D,{n}): {} vertices, {} edges", tg.vertex_count(), tg.graph.edge_count());
    Ok(Status::Ok)
}

fn load_tiles(inputs: &mut Inputs, path: &Path) -> Result<TileGraph> {
    let bytes = inputs.read(path)?;
    Ok(read_tile_graph_with_meta(BufReader::new(bytes.as_slice()))?.0)
}

fn outcome_json(k: u32, outcome: &SearchOutcome) -> Value {
    match outcome {
        SearchOutcome::Found(f) => json!({ "k": k, "outcome": "found", "coloring": f }),
        SearchOutcome::Unsat => json!({ "k": k, "outcome": "unsat" }),
        SearchOutcome::Indeterminate { nodes } => json!({ "k": k, "outcome": "indeterminate", "nodes": nodes }),
    }
}

/// Proper-coloring patterns for `k = 2..=max_k`; stops at the first hit.
fn search_upward(tg: &TileGraph, max_k: u32, budget: u64) -> Result<(u32, SearchOutcome, Vec<Value>)> {
    let g = tg.group();
    let mut attempts = Vec::new();
    let mut last = (0, SearchOutcome::Unsat);
    for k in 2..=max_k {
        let pats = proper_coloring_patterns(g, k, &tg.spec.generator_set())?;
        let outcome = find_avoiding_coloring(g, &tg.graph, &pats, budget)?;
        attempts.push(json!({ "k": k, "outcome": outcome_json(k, &outcome)["outcome"] }));
        let found = matches!(outcome, SearchOutcome::Found(_));
        last = (k, outcome);
        if found {
            break;
        }
    }
    Ok((last.0, last.1, attempts))
}

fn find_avoiding(
    cfg: &Config,
    tiles: &Path,
    patterns: Option<&str>,
    proper_up_to: Option<u32>,
    out: Option<&Path>,
) -> Result<Status> {
    let mut inputs = Inputs::new("find-avoiding", cfg.seed);
    let tg = load_tiles(&mut inputs, tiles)?;
    inputs.note(format!("search_budget={}", cfg.search_budget));
    let (k, outcome, attempts) = match (patterns, proper_up_to) {
        (Some(p), _) => {
            let set: PatternSet = patterns_from_json(tg.group(), &inputs.json_arg(p)?)?;
            let outcome = find_avoiding_coloring(tg.group(), &tg.graph, &set, cfg.search_budget)?;
            (set.k, outcome, Vec::new())
        }
        (None, Some(max_k)) => {
            inputs.note(format!("proper_up_to={max_k}"));
            search_upward(&tg, max_k, cfg.search_budget)?
        }
        (None, None) => bail!(cont_lll::Error::input("give --patterns or --proper-up-to")),
    };
    let mut body = outcome_json(k, &outcome);
    body["vertices"] = json!(tg.vertex_count());
    if !attempts.is_empty() {
        body["attempts"] = Value::Array(attempts);
    }
    write_json(out, &inputs.stamp(body))?;
    Ok(match outcome {
        SearchOutcome::Found(_) => Status::Ok,
        SearchOutcome::Unsat => Status::Rejected,
        SearchOutcome::Indeterminate { .. } => Status::Budget,
    })
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| cont_lll::Error::input(format!("malformed JSON: {e}")).into())
}

fn seeded_ids(n: usize, seed: u64) -> Vec<u64> {
    let mut ids: Vec<u64> = (1..=n as u64).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}

/// `{1} ∪ S ∪ S⁻¹` of a network.
fn closed_labels(net: &NetworkGraph) -> FiniteSubset {
    let mut d = FiniteSubset::from_elements([net.group.identity()]);
    d.extend(net.graph.labels.iter().cloned());
    d
}

/// Tile coloring from `find-avoiding` output or a bare JSON array.
fn tile_coloring(inputs: &mut Inputs, path: &Path) -> Result<Vec<u32>> {
    let v = parse_value(&String::from_utf8(inputs.read(path)?).context("coloring is not UTF-8")?)?;
    let arr = if v.is_array() { v } else { v["coloring"].clone() };
    serde_json::from_value(arr).map_err(|e| cont_lll::Error::input(format!("coloring: {e}")).into())
}

struct LocalArgs<'a> {
    graph: &'a str,
    algo: Algo,
    d: Option<&'a str>,
    m: Option<usize>,
    ids: Option<&'a str>,
    coloring: Option<&'a Path>,
}

struct LocalRun {
    colors: Vec<u64>,
    ledger: RoundLedger,
    extra: Value,
}

fn run_algo(net: &NetworkGraph, algo: Algo, d_set: &FiniteSubset, m: usize, h: Option<&[u32]>) -> Result<LocalRun> {
    let und = net.graph.underlying();
    Ok(match algo {
        Algo::Gps => {
            let r = gps_coloring(net, und.max_degree())?;
            LocalRun { colors: r.colors, ledger: r.ledger, extra: json!({ "palette": und.max_degree() + 1 }) }
        }
        Algo::Hom => {
            let hom = distributed_homomorphism(net, d_set, m)?;
            validate_homomorphism(net, d_set, &hom.q, m, Some(&hom.equivalence))?;
            let extra = json!({ "q": hom.q, "aux_max_degree": hom.aux_max_degree, "max_bracket": hom.max_bracket });
            LocalRun { colors: Vec::new(), ledger: hom.ledger, extra }
        }
        Algo::Avoid => {
            let h = h.ok_or_else(|| cont_lll::Error::input("avoid needs a tile coloring"))?;
            let (colors, hom) = distributed_avoiding_coloring(net, d_set, m, h)?;
            validate_homomorphism(net, d_set, &hom.q, m, Some(&hom.equivalence))?;
            LocalRun { colors: colors.into_iter().map(u64::from).collect(), ledger: hom.ledger, extra: json!({}) }
        }
    })
}

fn run_local(cfg: &Config, a: &LocalArgs, ledger_path: &Path, out: Option<&Path>) -> Result<Status> {
    let mut inputs = Inputs::new("run-local", cfg.seed);
    let net = network_from_json(&inputs.json_arg(a.graph)?)?;
    let ids = match a.ids {
        Some(text) => ids_from_json(&inputs.json_arg(text)?)?,
        None => seeded_ids(net.n(), cfg.seed),
    };
    let net = net.with_ids(ids)?;
    let d_set = match a.d {
        Some(text) => parse_subset(net.group, &parse_value(&inputs.json_arg(text)?)?)?,
        None => closed_labels(&net),
    };
    let m = a.m.unwrap_or(d_set.len().pow(3) + 1);
    inputs.note(format!("algo={:?} m={m}", a.algo));
    let h = a.coloring.map(|p| tile_coloring(&mut inputs, p)).transpose()?;
    let run = run_algo(&net, a.algo, &d_set, m, h.as_deref())?;
    let und = net.graph.underlying();
    let proper = run.colors.is_empty() || und.edges().all(|(u, v)| run.colors[u] != run.colors[v]);
    write_text(ledger_path, &(inputs.csv_comment() + &run.ledger.to_csv()))?;
    let mut body = json!({
        "algo": format!("{:?}", a.algo).to_lowercase(),
        "n": net.n(),
        "rounds": run.ledger.total(),
        "log_star": log_star(net.n() as u128),
        "ledger": run.ledger,
        "extra": run.extra,
    });
    if !run.colors.is_empty() {
        body["colors"] = json!(run.colors);
        body["proper"] = json!(proper);
    }
    write_json(out, &inputs.stamp(body))?;
    if !proper {
        bail!(cont_lll::Error::invariant("pipeline produced an improper coloring"));
    }
    Ok(Status::Ok)
}

fn family_net(family: Family, n: usize) -> Result<NetworkGraph> {
    Ok(match family {
        Family::Cycle => NetworkGraph::cycle(n)?,
        Family::Path => NetworkGraph::path(n)?,
        Family::Torus2 => {
            let q = (n as f64).sqrt().round() as usize;
            if q * q != n {
                bail!(cont_lll::Error::input(format!("torus2 size {n} is not a square")));
            }
            NetworkGraph::torus2(q)?
        }
    })
}

/// Tile coloring of `H_{{-1,0,1},m}` over ℤ, shared by every 1-D size.
fn line_tile_coloring(cfg: &Config, m: usize, max_k: u32) -> Result<Vec<u32>> {
    let z = Group::lattice(1)?;
    let spec = GroupSpec::new(z, vec![z.vector(&[1])?])?;
    let d = line_d(z)?;
    let tg = build_tile_graph(&spec, &d, m, cfg.tile_budget)?;
    match search_upward(&tg, max_k, cfg.search_budget)? {
        (_, SearchOutcome::Found(h), _) => Ok(h),
        (k, SearchOutcome::Unsat, _) => bail!(cont_lll::Error::gate(format!("no proper tile coloring with k ≤ {k}"))),
        (k, SearchOutcome::Indeterminate { .. }, _) => {
            bail!(cont_lll::Error::budget(format!("tile coloring search undecided up to k = {k}")))
        }
    }
}

fn line_d(g: Group) -> Result<FiniteSubset> {
    Ok(FiniteSubset::from_elements([g.vector(&[-1])?, g.identity(), g.vector(&[1])?]))
}

pub const BENCHMARK_HEADER: &str = "n,rounds,log_star,phases";

fn benchmark(cfg: &Config, pipeline: Algo, family: Family, sizes: &[usize], m: usize, max_k: u32, out: &Path) -> Result<Status> {
    let mut inputs = Inputs::new("benchmark", cfg.seed);
    inputs.note(format!("{pipeline:?} {family:?} {sizes:?} m={m} max_k={max_k}"));
    if pipeline != Algo::Gps && family == Family::Torus2 {
        bail!(cont_lll::Error::input("hom and avoid benchmarks run on cycle or path"));
    }
    let h = if pipeline == Algo::Avoid { Some(line_tile_coloring(cfg, m, max_k)?) } else { None };
    let mut csv = inputs.csv_comment() + BENCHMARK_HEADER + "\n";
    for &n in sizes {
        let net = family_net(family, n)?.with_ids(seeded_ids(n, cfg.seed))?;
        let d_set = line_d(net.group).or_else(|_| Ok::<_, anyhow::Error>(closed_labels(&net)))?;
        let run = run_algo(&net, pipeline, &d_set, m, h.as_deref())?;
        let phases: Vec<String> = run.ledger.phases.iter().map(|p| format!("{}:{}", p.phase, p.rounds)).collect();
        csv += &format!("{n},{},{},{}\n", run.ledger.total(), log_star(n as u128), phases.join(";"));
    }
    write_text(out, &csv)?;
    Ok(Status::Ok)
}

fn subshift_demo(cfg: &Config, group: &str, h0: &str, gammas: &str, depth: usize, m: usize, report: &Path) -> Result<Status> {
    let mut inputs = Inputs::new("subshift-demo", cfg.seed);
    let spec = group_spec_from_json(&inputs.json_arg(group)?)?;
    let g = spec.group;
    let h0 = parse_subset(g, &parse_value(&inputs.json_arg(h0)?)?)?;
    let gamma_list = parse_value(&inputs.json_arg(gammas)?)?;
    let gammas = gamma_list
        .as_array()
        .ok_or_else(|| cont_lll::Error::input("gammas must be a JSON array"))?
        .iter()
        .map(|v| g.parse_element(v))
        .collect::<cont_lll::Result<Vec<_>>>()?;
    inputs.note(format!("depth={depth} m={m} similarity_budget={}", cfg.similarity_budget));
    if !matches!(g, Group::Torus { .. }) {
        bail!(cont_lll::Error::input("subshift-demo needs a torus group"));
    }
    let rep = std_demo(g, &h0, &gammas, m, depth, cfg.similarity_budget)?;
    let gate_failed = rep.levels.iter().any(|l| matches!(l.outcome, LevelOutcome::GateFailed { .. }));
    write_json(Some(report), &inputs.stamp(json!({ "report": rep })))?;
    // A level refused for want of δ is reported, not treated as a rejection.
    Ok(if gate_failed { Status::Rejected } else { Status::Ok })
}

fn check_patterns(
    cfg: &Config,
    group: &str,
    patterns: &str,
    graph: Option<&str>,
    coloring: Option<&str>,
    out: Option<&Path>,
) -> Result<Status> {
    let mut inputs = Inputs::new("check-patterns", cfg.seed);
    let spec = group_spec_from_json(&inputs.json_arg(group)?)?;
    let set = patterns_from_json(spec.group, &inputs.json_arg(patterns)?)?;
    let s = spec.generator_set();
    let connected = set
        .patterns
        .iter()
        .map(|p| is_s_connected(spec.group, p, &s))
        .collect::<cont_lll::Result<Vec<bool>>>()?;
    let mut body = json!({ "k": set.k, "patterns": set.len(), "s_connected": connected });
    let mut status = Status::Ok;
    if let (Some(graph), Some(coloring)) = (graph, coloring) {
        let net = network_from_json(&inputs.json_arg(graph)?)?;
        if net.group != spec.group {
            bail!(cont_lll::Error::input("network group differs from the pattern group"));
        }
        let f: Vec<u32> = serde_json::from_str(&inputs.json_arg(coloring)?)
            .map_err(|e| cont_lll::Error::input(format!("coloring: {e}")))?;
        if f.len() != net.n() {
            bail!(cont_lll::Error::input(format!("coloring has {} entries for {} vertices", f.len(), net.n())));
        }
        let (avoiding, violations) = is_avoiding(spec.group, &f, &net.graph, &set)?;
        body["avoiding"] = json!(avoiding);
        body["violations"] =
            json!(violations.iter().map(|v| json!({ "pattern": v.pattern, "witness": v.witness })).collect::<Vec<_>>());
        if !avoiding {
            status = Status::Rejected;
        }
    }
    write_json(out, &inputs.stamp(body))?;
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(exit_code(&cont_lll::Error::gate("g").into()), 1);
        assert_eq!(exit_code(&cont_lll::Error::input("i").into()), 2);
        assert_eq!(exit_code(&anyhow::Error::from(cont_lll::Error::budget("b")).context("outer")), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 2);
    }

    #[test]
    fn seeded_ids_are_permutations() {
        let mut ids = seeded_ids(50, 3);
        assert_eq!(ids, seeded_ids(50, 3));
        ids.sort_unstable();
        assert_eq!(ids, (1..=50).collect::<Vec<u64>>());
    }

    #[test]
    fn family_sizes() {
        assert_eq!(family_net(Family::Torus2, 16).unwrap().n(), 16);
        assert!(family_net(Family::Torus2, 15).is_err());
        assert_eq!(default_solution_path(Path::new("/a/good.json")), PathBuf::from("/a/good.solution.json"));
    }
}
