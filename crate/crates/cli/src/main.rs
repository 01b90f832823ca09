use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dssp::audit::{audit, AuditOptions, DEFAULT_ENUMERATION_BUDGET};
use dssp::combinatorics::{KSubset, DEFAULT_SEARCH_BUDGET};
use dssp::design::{achievable_min_c, realize_sperner, solve_design, DesignSolution};
use dssp::field::{Fe, OpCount};
use dssp::io::{
    decode_from_store, descriptor_from_json, descriptor_to_json, secrets_from_json, store_shares, to_canonical,
    DirStore,
};
use dssp::protocol::{build_nearly_with_budget, build_optimal_with_budget, build_sdssp, ProtocolDescriptor};
use dssp::Error;

const BUDGET_VAR: &str = "DSSP_BUDGET";

/// Design, build, run, and audit distributed secret-sharing protocols.
#[derive(Parser)]
#[command(name = "dssp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    /// Independent Shamir sharing per user.
    Sdssp,
    /// One stored symbol per secret, all C(n,k) users.
    Optimal,
    /// m + k - 1 stored symbols for any m.
    Nearly,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum-communication access structure for m users on n nodes.
    Design {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: u64,
    },
    /// Build a protocol descriptor.
    Build {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        q: u64,
        /// Access sets for sdssp, e.g. "1,2;2,3;1,3".
        #[arg(long)]
        access: Option<String>,
        /// Seed recorded for encoding; drawn from the OS when omitted.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a secrets file into one share file per node.
    Encode {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long)]
        secrets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed recorded in the descriptor.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover one user's secret from the nodes it may read.
    Decode {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long)]
        shares: PathBuf,
        /// User number, from 1.
        #[arg(long)]
        user: usize,
    },
    /// Check correctness, storage, communication, and secrecy.
    Audit {
        #[arg(long)]
        descriptor: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count encoder field operations across sizes.
    Bench {
        #[arg(long, value_enum)]
        protocol: Protocol,
        /// Node counts; optimal builds use each with the given k.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// User counts for nearly builds.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Verdict(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingSlot { .. } => Failure::Verdict(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn budget() -> CliResult<Option<u64>> {
    match std::env::var(BUDGET_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| usage(format!("{BUDGET_VAR} must be an integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("{BUDGET_VAR}: {e}"))),
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_descriptor(path: &Path) -> CliResult<ProtocolDescriptor> {
    descriptor_from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_access(text: &str) -> CliResult<Vec<KSubset>> {
    text.split(';')
        .map(|set| {
            let nodes = set
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| usage(format!("bad node {v:?} in --access"))))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(KSubset::new(nodes)?)
        })
        .collect()
}

#[derive(Serialize)]
struct DesignDoc {
    format: &'static str,
    #[serde(flatten)]
    solution: DesignSolution,
    realizable: Option<bool>,
    achievable: Option<u64>,
    access: Option<Vec<Vec<usize>>>,
    note: Option<String>,
}

fn cmd_design(n: usize, m: u64) -> CliResult<String> {
    let solution = solve_design(n, m)?;
    let budget = budget()?.unwrap_or(DEFAULT_SEARCH_BUDGET);
    let mut notes = Vec::new();
    let realizable = match realize_sperner(n, &solution.profile) {
        Ok(_) => Some(true),
        Err(Error::Unrealizable { .. }) => Some(false),
        Err(e) => return Err(e.into()),
    };
    let (achievable, access) = match achievable_min_c(n, m, budget) {
        Ok((c, family)) => (Some(c), Some(family.sets().iter().map(|s| s.elements().to_vec()).collect())),
        Err(Error::BudgetExhausted { .. }) => {
            notes.push("achievable minimum search exceeded the budget");
            (None, None)
        }
        Err(e) => return Err(e.into()),
    };
    let note = (!notes.is_empty()).then(|| notes.join("; "));
    Ok(to_canonical(&DesignDoc { format: "dssp-design/1", solution, realizable, achievable, access, note })?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    protocol: Protocol,
    n: usize,
    m: Option<usize>,
    k: Option<usize>,
    q: u64,
    access: Option<String>,
    seed: Option<u64>,
) -> CliResult<ProtocolDescriptor> {
    let budget = budget()?.unwrap_or(DEFAULT_SEARCH_BUDGET);
    let desc = match protocol {
        Protocol::Sdssp => {
            let sets = match (access, m) {
                (Some(text), _) => parse_access(&text)?,
                (None, Some(m)) => achievable_min_c(n, m as u64, budget)?.1.sets().to_vec(),
                (None, None) => return Err(usage("sdssp needs --access or --m")),
            };
            if let Some(m) = m.filter(|&m| m != sets.len()) {
                return Err(usage(format!("--m {m} disagrees with {} access sets", sets.len())));
            }
            build_sdssp(n, sets, q)?
        }
        Protocol::Optimal => {
            let k = k.ok_or_else(|| usage("optimal needs --k"))?;
            let desc = build_optimal_with_budget(n, k, q, budget)?;
            if let Some(m) = m.filter(|&m| m != desc.m()) {
                return Err(usage(format!("optimal with n={n}, k={k} serves C(n,k)={} users, not {m}", desc.m())));
            }
            desc
        }
        Protocol::Nearly => {
            let m = m.ok_or_else(|| usage("nearly needs --m"))?;
            build_nearly_with_budget(n, m, q, k, budget)?
        }
    };
    Ok(desc.with_seed(Some(seed.unwrap_or_else(rand::random))))
}

fn cmd_encode(descriptor: &Path, secrets: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let desc = load_descriptor(descriptor)?;
    let (field, values) = secrets_from_json(&read(secrets)?).map_err(|e| usage(format!("{}: {e}", secrets.display())))?;
    if field != desc.field() {
        return Err(usage(format!("secrets are over F_{}, descriptor over F_{}", field.modulus(), desc.field().modulus())));
    }
    let seed = seed.or(desc.seed()).ok_or_else(|| usage("no --seed given and none recorded in the descriptor"))?;
    let y = desc.encode(&values, seed)?;
    store_shares(&desc, &y, &mut DirStore::new(out))?;
    Ok(())
}

fn cmd_decode(descriptor: &Path, shares: &Path, user: usize) -> CliResult<Fe> {
    let desc = load_descriptor(descriptor)?;
    if user == 0 || user > desc.m() {
        return Err(usage(format!("--user must be in 1..={}", desc.m())));
    }
    Ok(decode_from_store(&desc, user - 1, &DirStore::new(shares))?)
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    m: usize,
    k: Option<usize>,
    h: usize,
    ops: OpCount,
    ops_total: u64,
    micros: u128,
}

fn cmd_bench(protocol: Protocol, ns: &[usize], ms: &[usize], k: Option<usize>, q: u64, seed: u64) -> CliResult<String> {
    let budget = budget()?.unwrap_or(DEFAULT_SEARCH_BUDGET);
    let descs: Vec<ProtocolDescriptor> = match protocol {
        Protocol::Sdssp => return Err(usage("bench supports optimal and nearly")),
        Protocol::Optimal => {
            let k = k.ok_or_else(|| usage("optimal needs --k"))?;
            ns.iter().map(|&n| build_optimal_with_budget(n, k, q, budget)).collect::<Result<_, _>>()?
        }
        Protocol::Nearly => {
            let &[n] = ns else { return Err(usage("nearly bench takes a single --n")) };
            if ms.is_empty() {
                return Err(usage("nearly bench needs --m"));
            }
            ms.iter().map(|&m| build_nearly_with_budget(n, m, q, k, budget)).collect::<Result<_, _>>()?
        }
    };
    let mut rows = Vec::new();
    for d in descs {
        let f = d.field();
        let secrets: Vec<Fe> = (0..d.m() as u64).map(|v| f.elem(v.wrapping_mul(2654435761) % f.modulus())).collect();
        let randomness = d.draw_randomness(seed);
        let mut ops = OpCount::default();
        let start = Instant::now();
        d.encode_counted(&secrets, &randomness, &mut ops)?;
        let micros = start.elapsed().as_micros();
        rows.push(BenchRow { n: d.n(), m: d.m(), k: d.k(), h: d.h(), ops, ops_total: ops.total(), micros });
    }
    let mut doc = BTreeMap::new();
    doc.insert("format", serde_json::json!("dssp-bench/1"));
    doc.insert("rows", serde_json::to_value(rows).map_err(|e| usage(e.to_string()))?);
    Ok(to_canonical(&doc)?)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Design { n, m } => print!("{}", cmd_design(n, m)?),
        Command::Build { protocol, n, m, k, q, access, seed, out } => {
            let desc = cmd_build(protocol, n, m, k, q, access, seed)?;
            write(&out, &descriptor_to_json(&desc)?)?;
            eprintln!("built {} with n={} m={} h={}", desc.kind(), desc.n(), desc.m(), desc.h());
        }
        Command::Encode { descriptor, secrets, out, seed } => cmd_encode(&descriptor, &secrets, &out, seed)?,
        Command::Decode { descriptor, shares, user } => println!("{}", cmd_decode(&descriptor, &shares, user)?.value()),
        Command::Audit { descriptor, trials, seed, out } => {
            let desc = load_descriptor(&descriptor)?;
            let budget = budget()?.unwrap_or(DEFAULT_ENUMERATION_BUDGET);
            let report = audit(&desc, &AuditOptions { trials, budget, seed })?;
            let text = to_canonical(&report)?;
            match out {
                Some(path) => write(&path, &text)?,
                None => print!("{text}"),
            }
            if !report.passed() {
                return Err(Failure::Verdict("audit failed".into()));
            }
        }
        Command::Bench { protocol, n, m, k, q, seed } => print!("{}", cmd_bench(protocol, &n, &m, k, q, seed)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
