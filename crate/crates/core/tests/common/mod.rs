#![allow(dead_code)]

use std::collections::BTreeSet;

use cont_lll::csp::{Color, Constraint, Csp};
use cont_lll::io::csp_from_json;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SMALL_CORPUS: &str = include_str!("../fixtures/small_csps.json");

pub fn small_corpus() -> Vec<Csp> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(SMALL_CORPUS).expect("corpus parses");
    raw.iter().map(|v| csp_from_json(&v.to_string()).expect("corpus CSP valid")).collect()
}

/// Constraints through each point, counted directly.
pub fn oracle_vdeg(csp: &Csp) -> usize {
    let mut deg = vec![0usize; csp.id_bound()];
    for b in &csp.constraints {
        for &x in &b.dom {
            deg[x] += 1;
        }
    }
    deg.into_iter().max().unwrap_or(0)
}

/// `|B|·vdeg^{|dom|} < k^{|dom|}` in u128 (domains here have at most 3 points).
pub fn oracle_good(csp: &Csp) -> bool {
    let v = oracle_vdeg(csp) as u128;
    csp.constraints.iter().all(|b| {
        let s = b.dom.len() as u32;
        (b.forbidden.len() as u128) * v.pow(s) < (csp.k as u128).pow(s)
    })
}

pub fn oracle_valid(csp: &Csp, f: &[Color]) -> bool {
    csp.constraints.iter().all(|b| {
        let t: Vec<Color> = b.dom.iter().map(|&x| f[x]).collect();
        !b.forbidden.contains(&t)
    })
}

/// A CSP with `k ≤ 6`, domains of size at most 3, `vdeg ≤ 4`, at most 200
/// points, and forbidden-set sizes just under the gate.
pub fn random_gate_passing(rng: &mut ChaCha8Rng) -> Csp {
    let n = rng.gen_range(1..=200usize);
    let k: Color = rng.gen_range(2..=6);
    let mut deg = vec![0usize; n];
    let mut doms = Vec::new();
    for _ in 0..rng.gen_range(0..=n) {
        let s = rng.gen_range(1..=3usize.min(n));
        let mut dom = BTreeSet::new();
        for _ in 0..8 * s {
            let x = rng.gen_range(0..n);
            if deg[x] < 4 {
                dom.insert(x);
            }
            if dom.len() == s {
                break;
            }
        }
        if dom.is_empty() {
            continue;
        }
        for &x in &dom {
            deg[x] += 1;
        }
        let mut dom: Vec<usize> = dom.into_iter().collect();
        if rng.gen_bool(0.5) {
            dom.reverse();
        }
        doms.push(dom);
    }
    let vdeg = deg.iter().copied().max().unwrap_or(0).max(1) as u64;
    let constraints = doms
        .into_iter()
        .map(|dom| {
            let s = dom.len() as u32;
            let total = (k as u64).pow(s);
            let cap = (total - 1) / vdeg.pow(s);
            let size = if cap == 0 { 0 } else { rng.gen_range(cap.div_ceil(2)..=cap) };
            let mut tuples = BTreeSet::new();
            while (tuples.len() as u64) < size {
                tuples.insert((0..s).map(|_| rng.gen_range(0..k)).collect::<Vec<Color>>());
            }
            Constraint { dom, forbidden: tuples.into_iter().collect() }
        })
        .collect();
    Csp::dense(k, n, constraints).expect("generated CSP valid")
}

/// Iterated real log₂ until the value is at most 1.
pub fn oracle_log_star(n: u128) -> u32 {
    let mut x = n as f64;
    let mut l = 0;
    while x > 1.0 {
        x = x.log2();
        l += 1;
    }
    l
}

fn prime(p: u64) -> bool {
    p >= 2 && (2..p).take_while(|i| i * i <= p).all(|i| !p.is_multiple_of(i))
}

/// Rounds of the coloring schedule by exhaustive search over `(t, p)`:
/// reduce `m → p²` while `p²< m`, with `p` prime, `p > d·t`, `p^{t+1} ≥ m`
/// and `p²` least; then one round per color from `m − 1` down to `d + 1`.
pub fn oracle_gps_rounds(mut m: u64, d: u64) -> u64 {
    let mut steps = 0;
    loop {
        let mut best = u64::MAX;
        for t in 1..=40u32 {
            for p in (d * t as u64 + 1)..=m.max(3) {
                if prime(p) && (p as u128).checked_pow(t + 1).is_none_or(|v| v >= m as u128) {
                    best = best.min(p);
                    break;
                }
            }
        }
        if best == u64::MAX || best * best >= m {
            break;
        }
        m = best * best;
        steps += 1;
    }
    steps + m.saturating_sub(d + 1)
}
