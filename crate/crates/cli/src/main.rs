//! `cont-lll`: solve CSPs, build and color tile graphs, and run the LOCAL
//! pipelines from JSON inputs.
//!
//! Exit status: 0 success, 1 gate rejection or UNSAT, 2 invalid input,
//! 3 budget exceeded, 4 internal invariant failure.

mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cont_lll::subshift::DEFAULT_SIMILARITY_BUDGET;
use cont_lll::tiles::{DEFAULT_SEARCH_BUDGET, DEFAULT_TILE_BUDGET};

pub const DEFAULT_BRUTE_BUDGET: u64 = 1 << 24;

#[derive(Parser, Debug)]
#[command(name = "cont-lll", version, about = "Constructive LLL solving, tile graphs and LOCAL-model colorings")]
pub struct Cli {
    #[command(flatten)]
    pub config: Config,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Budgets read their environment
/// variable when the flag is absent.
#[derive(Args, Debug, Clone)]
pub struct Config {
    /// Seed for randomized choices (id permutations); recorded in every output.
    #[arg(long, global = true, env = "CONT_LLL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Tile-graph vertex plus edge-scan budget.
    #[arg(long, global = true, env = "CONT_LLL_TILE_BUDGET", default_value_t = DEFAULT_TILE_BUDGET,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub tile_budget: u64,
    /// Node budget of the avoiding-coloring search.
    #[arg(long, global = true, env = "CONT_LLL_SEARCH_BUDGET", default_value_t = DEFAULT_SEARCH_BUDGET,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub search_budget: u64,
    /// Enumeration budget of the similarity CSP construction.
    #[arg(long, global = true, env = "CONT_LLL_SIMILARITY_BUDGET", default_value_t = DEFAULT_SIMILARITY_BUDGET,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub similarity_budget: u64,
    /// Largest number of colorings the brute-force oracle may enumerate.
    #[arg(long, global = true, env = "CONT_LLL_BRUTE_BUDGET", default_value_t = DEFAULT_BRUTE_BUDGET,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub brute_budget: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Gps,
    Hom,
    Avoid,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Cycle,
    Path,
    Torus2,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the gate and solve a CSP; writes `<input>.solution.json` unless `--out` is given.
    SolveCsp {
        csp: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the stage certificates here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also run the brute-force oracle and compare.
        #[arg(long)]
        oracle: bool,
    },
    /// Materialize `H_{D,n}` in the binary tile format.
    BuildTiles {
        /// Group JSON (file path or inline), e.g. `{"kind":"lattice","d":1,"generators":[[1]]}`.
        #[arg(long)]
        group: String,
        /// `D` as a JSON array of elements (file path or inline).
        #[arg(long = "D")]
        d: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a coloring of a tile graph avoiding a pattern set.
    FindAvoiding {
        #[arg(long)]
        tiles: PathBuf,
        /// Pattern set JSON (file path or inline).
        #[arg(long, required_unless_present = "proper_up_to", conflicts_with = "proper_up_to")]
        patterns: Option<String>,
        /// Use proper-coloring patterns and try k = 2, 3, … up to this value.
        #[arg(long)]
        proper_up_to: Option<u32>,
        /// Output JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a LOCAL pipeline on a network and write its round ledger.
    RunLocal {
        /// Network JSON (file path or inline), e.g. `{"family":"cycle","n":64}`.
        #[arg(long)]
        graph: String,
        #[arg(long, value_enum)]
        algo: Algo,
        /// `D` for `hom`/`avoid`; defaults to `{1} ∪ S ∪ S⁻¹`.
        #[arg(long = "D")]
        d: Option<String>,
        /// Palette of the homomorphism; defaults to `|D|³ + 1`.
        #[arg(long)]
        m: Option<usize>,
        /// Ids as a JSON array (file path or inline); a seeded permutation when absent.
        #[arg(long)]
        ids: Option<String>,
        /// Tile coloring for `avoid` (output of `find-avoiding`, or a bare array).
        #[arg(long)]
        coloring: Option<PathBuf>,
        #[arg(long)]
        ledger: PathBuf,
        /// Result JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Round counts over a list of sizes, as CSV with columns `n,rounds,log_star,phases`.
    Benchmark {
        #[arg(long, value_enum)]
        pipeline: Algo,
        #[arg(long, value_enum, default_value = "cycle")]
        family: Family,
        /// Comma separated sizes (vertex counts; squares for `torus2`).
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Palette for `hom`/`avoid`.
        #[arg(long, default_value_t = 28)]
        m: usize,
        /// Largest k tried for the `avoid` tile coloring.
        #[arg(long, default_value_t = 8)]
        max_k: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterate the similarity construction on a torus and report each level.
    SubshiftDemo {
        /// Torus group JSON (file path or inline).
        #[arg(long)]
        group: String,
        /// `H₀` as a JSON array of elements.
        #[arg(long = "H0")]
        h0: String,
        /// `γ₁, …` as a JSON array of elements.
        #[arg(long)]
        gammas: String,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long)]
        report: PathBuf,
    },
    /// Validate a pattern set and optionally scan a coloring for occurrences.
    CheckPatterns {
        /// Group JSON (file path or inline); `S` is its generator set.
        #[arg(long)]
        group: String,
        #[arg(long)]
        patterns: String,
        /// Network JSON to scan; requires `--coloring`.
        #[arg(long, requires = "coloring")]
        graph: Option<String>,
        /// Coloring as a JSON array, one color per network vertex.
        #[arg(long, requires = "graph")]
        coloring: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
