//! `cmw`: command line front end for the circuit workbench.
//!
//! Every command prints one result per line. Exit status is 0 for success
//! or a yes answer, 1 for a no answer and 2 for usage or input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cmw_core::acceptance::{Outcome, Suite, SuiteConfig, CRITERIA};
use cmw_core::bpis::{self, BpisInstance};
use cmw_core::oracle::{self, enumerate_optimal_circuits, is_simple_extension_bruteforce, OracleError};
use cmw_core::rewrite::{normalize, substitute_and_normalize};
use cmw_core::solver::{self, relabel_witness, Catalog, SepInstance, SolveOptions};
use cmw_core::splice::{decode, SpliceCode};
use cmw_core::tt::find_keys;
use cmw_core::xor::{enumerate_open_optimal_xor, validate_block_partition, xor_tt, CatalogMeta, Parity};
use cmw_core::ytree::{extract_ytree_decomposition, validate_decomposition};
use cmw_core::{Circuit, SizeMeasure, TruthTable, VarRef};

#[derive(Parser)]
#[command(name = "cmw", version, about = "Boolean circuit workbench")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Size measure: D counts binary gates, R also counts negations.
    #[arg(long, global = true, default_value = "D")]
    measure: SizeMeasure,
    /// Largest variable count handed to the exhaustive oracle.
    #[arg(long, global = true, default_value_t = 4)]
    oracle_max_vars: usize,
    /// Largest n for XOR catalogs.
    #[arg(long, global = true, default_value_t = 8)]
    catalog_max_n: usize,
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Cache directory; the CMW_CACHE_DIR environment variable wins.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Seed for every sampled check.
    #[arg(long, global = true, default_value_t = SuiteConfig::default().seed)]
    seed: u64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
struct Config {
    measure: SizeMeasure,
    oracle_max_vars: usize,
    catalog_max_n: usize,
    workers: usize,
    cache_dir: PathBuf,
    seed: u64,
}

impl Config {
    fn from_args(a: &ConfigArgs) -> Result<Config> {
        if a.oracle_max_vars == 0 || a.catalog_max_n == 0 || a.workers == 0 {
            bail!("oracle-max-vars, catalog-max-n and workers must be positive");
        }
        if std::env::var_os("CMW_CACHE_DIR").is_none() {
            if let Some(d) = &a.cache_dir {
                // read by the oracle when it first loads a table
                std::env::set_var("CMW_CACHE_DIR", d);
            }
        }
        Ok(Config {
            measure: a.measure,
            oracle_max_vars: a.oracle_max_vars,
            catalog_max_n: a.catalog_max_n,
            workers: a.workers,
            cache_dir: oracle::cache_dir(),
            seed: a.seed,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a circuit on one assignment (`x1=1,y1=0` or bits in
    /// variable order).
    Eval { circuit: PathBuf, assignment: String },
    /// Print a circuit's truth table.
    Tt {
        circuit: PathBuf,
        /// Comma-separated variable order; defaults to x1..xn, y1..ym.
        #[arg(long)]
        vars: Option<String>,
    },
    /// Normalize a circuit.
    Normalize {
        circuit: PathBuf,
        /// Write the restriction record here.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Substitute constants and normalize.
    Restrict {
        circuit: PathBuf,
        /// `x1=0,y2=1`
        assignment: String,
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Exact circuit complexity of a truth table.
    CcOracle { tt: String },
    /// Every optimal circuit for a truth table, up to gate numbering.
    EnumerateOptimal {
        tt: String,
        #[arg(long)]
        count_only: bool,
    },
    /// Catalog of optimal XOR_n circuits up to relabeling.
    XorCatalog {
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a circuit into XOR_2 blocks.
    ValidateXorStructure { circuit: PathBuf },
    /// Y-tree decomposition of an extension circuit against base table f.
    YtreeDecompose {
        circuit: PathBuf,
        #[arg(long)]
        f: String,
    },
    /// Decode a splice code against a base circuit.
    SpliceDecode { base: PathBuf, code: PathBuf },
    /// Decide whether g is a simple extension of f.
    SepSolve {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        /// Catalog file, or `xor` / `or2` for the built-in catalogs.
        #[arg(long)]
        catalog: String,
        /// Write a witness circuit computing g here.
        #[arg(long)]
        witness: Option<PathBuf>,
        /// Also run the exhaustive solver and the brute-force oracle.
        #[arg(long)]
        verify_exhaustive: bool,
    },
    /// Reduced partial truth table of a BPIS instance.
    BpisReduce {
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least valid permutation of a BPIS instance.
    BpisSolve { instance: PathBuf },
    /// Check that the reduction is sound on one instance.
    BpisVerify { instance: PathBuf },
    /// Run the acceptance criteria.
    Selftest {
        /// Comma-separated criterion numbers; all by default.
        #[arg(long)]
        only: Option<String>,
    },
}

/// Exit status of a successful run: yes or no.
enum Answer {
    Yes,
    No,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut out = std::io::stdout().lock();
    let res = Config::from_args(&cli.config).and_then(|cfg| run(&cfg, cli.command, &mut out));
    let _ = out.flush();
    match res {
        Ok(Answer::Yes) => ExitCode::SUCCESS,
        Ok(Answer::No) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    Circuit::parse_bcir(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// A truth table given inline or as a file.
fn read_tt(arg: &str) -> Result<TruthTable> {
    let text = if Path::new(arg).is_file() { read(Path::new(arg))? } else { arg.to_string() };
    text.trim().parse::<TruthTable>().map_err(|e| anyhow!("truth table {arg:?}: {e}"))
}

fn read_instance(path: &Path) -> Result<BpisInstance> {
    read(path)?.parse::<BpisInstance>().with_context(|| format!("parsing {}", path.display()))
}

fn parse_assignment(s: &str, c: &Circuit) -> Result<BTreeMap<VarRef, bool>> {
    let mut out = BTreeMap::new();
    if s.contains('=') {
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| anyhow!("bad assignment {part:?}"))?;
            let var: VarRef = k.trim().parse()?;
            let bit = match v.trim() {
                "0" => false,
                "1" => true,
                other => bail!("bad bit {other:?}"),
            };
            out.insert(var, bit);
        }
    } else {
        let vars = c.variables();
        if s.len() != vars.len() {
            bail!("{} bits given for {} variables", s.len(), vars.len());
        }
        for (v, ch) in vars.into_iter().zip(s.chars()) {
            out.insert(v, ch == '1');
        }
    }
    Ok(out)
}

/// Splits variables into base and extension counts.
fn arity(c: &Circuit) -> (usize, usize) {
    let vs = c.variables();
    let m = vs.iter().filter(|v| v.is_ext()).count();
    (vs.len() - m, m)
}

fn ordered_vars(n: usize, m: usize) -> Vec<VarRef> {
    (1..=n as u32).map(VarRef::x).chain((1..=m as u32).map(VarRef::y)).collect()
}

fn check_oracle_vars(cfg: &Config, n: usize) -> Result<()> {
    if n > cfg.oracle_max_vars {
        bail!("{n} variables exceed oracle-max-vars = {}", cfg.oracle_max_vars);
    }
    Ok(())
}

/// XOR catalog from the cache, rebuilt when missing or inconsistent.
fn xor_catalog(cfg: &Config, n: usize) -> Result<CatalogMeta> {
    if n > cfg.catalog_max_n {
        bail!("n = {n} exceeds catalog-max-n = {}", cfg.catalog_max_n);
    }
    let path = cfg.cache_dir.join(format!("xor-catalog-{n}-{}.txt", cfg.measure));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(meta) = CatalogMeta::parse(&text) {
            let vars: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
            let want = xor_tt(n);
            let sound = meta.n == n
                && meta.measure == cfg.measure
                && !meta.classes.is_empty()
                && meta.classes.iter().all(|c| c.label(&vars).truth_table(&vars).ok().as_ref() == Some(&want));
            if sound {
                return Ok(meta);
            }
        }
    }
    let meta = enumerate_open_optimal_xor(n, cfg.measure)?;
    if fs::create_dir_all(&cfg.cache_dir).is_ok() {
        // a failed write only costs a rebuild next time
        let _ = fs::write(&path, meta.to_text());
    }
    Ok(meta)
}

fn load_catalog(cfg: &Config, arg: &str, f: &TruthTable) -> Result<Catalog> {
    if Path::new(arg).is_file() {
        return Ok(Catalog::from_meta(&CatalogMeta::parse(&read(Path::new(arg))?)?));
    }
    match arg {
        "xor" => Ok(Catalog::from_meta(&xor_catalog(cfg, f.num_vars())?)),
        "or2" => Ok(Catalog::or2(cfg.measure)),
        _ => bail!("catalog {arg:?} is neither a file nor xor/or2"),
    }
}

fn yes_no(b: bool) -> Answer {
    if b {
        Answer::Yes
    } else {
        Answer::No
    }
}

fn run(cfg: &Config, cmd: Command, out: &mut impl Write) -> Result<Answer> {
    match cmd {
        Command::Eval { circuit, assignment } => {
            let c = read_circuit(&circuit)?;
            let a = parse_assignment(&assignment, &c)?;
            writeln!(out, "value={}", u8::from(c.evaluate(&a)?))?;
            Ok(Answer::Yes)
        }
        Command::Tt { circuit, vars } => {
            let c = read_circuit(&circuit)?;
            let vars = match vars {
                Some(v) => v.split(',').map(|s| s.trim().parse::<VarRef>()).collect::<Result<Vec<_>, _>>()?,
                None => c.variables(),
            };
            writeln!(out, "{}", c.truth_table(&vars)?)?;
            Ok(Answer::Yes)
        }
        Command::Normalize { circuit, record } => {
            let c = read_circuit(&circuit)?;
            let (n, rec) = normalize(&c);
            write!(out, "{}", n.to_bcir())?;
            writeln!(out, "eliminated={}", c.gates.len() - n.gates.len())?;
            if let Some(p) = record {
                fs::write(&p, rec.to_string()).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(Answer::Yes)
        }
        Command::Restrict { circuit, assignment, record } => {
            let c = read_circuit(&circuit)?;
            let a = parse_assignment(&assignment, &c)?;
            let (n, rec) = substitute_and_normalize(&c, &a);
            write!(out, "{}", n.to_bcir())?;
            writeln!(out, "eliminated={}", c.gates.len() - n.gates.len())?;
            if let Some(p) = record {
                fs::write(&p, rec.to_string()).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(Answer::Yes)
        }
        Command::CcOracle { tt } => {
            let t = read_tt(&tt)?;
            check_oracle_vars(cfg, t.num_vars())?;
            match oracle::exact_cc(&t, cfg.measure, usize::MAX) {
                Ok(Some(c)) => {
                    writeln!(out, "cc={c}")?;
                    Ok(Answer::Yes)
                }
                Ok(None) => unreachable!("no cap"),
                Err(OracleError::Unresolved { lower }) => {
                    writeln!(out, "cc>={lower}")?;
                    Ok(Answer::No)
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::EnumerateOptimal { tt, count_only } => {
            let t = read_tt(&tt)?;
            check_oracle_vars(cfg, t.num_vars())?;
            let all = enumerate_optimal_circuits(&t, cfg.measure)?;
            writeln!(out, "count={}", all.len())?;
            if !count_only {
                for (i, c) in all.iter().enumerate() {
                    writeln!(out, "# circuit {i}")?;
                    write!(out, "{}", c.to_bcir())?;
                }
            }
            Ok(Answer::Yes)
        }
        Command::XorCatalog { n, out: path } => {
            let meta = xor_catalog(cfg, n)?;
            match path {
                Some(p) => {
                    fs::write(&p, meta.to_text()).with_context(|| format!("writing {}", p.display()))?;
                    writeln!(out, "classes={} ell={} s={}", meta.classes.len(), meta.max_fanout, meta.base_size)?;
                }
                None => write!(out, "{}", meta.to_text())?,
            }
            Ok(Answer::Yes)
        }
        Command::ValidateXorStructure { circuit } => {
            let c = read_circuit(&circuit)?;
            match validate_block_partition(&c) {
                Some(p) => {
                    writeln!(out, "blocks={}", p.blocks.len())?;
                    for b in &p.blocks {
                        let parity = match b.parity {
                            Parity::Xor2 => "xor",
                            Parity::NotXor2 => "xnor",
                        };
                        writeln!(
                            out,
                            "block alpha={} beta={} nu={} sources={},{} parity={parity}",
                            b.alpha, b.beta, b.nu, b.sources[0], b.sources[1]
                        )?;
                    }
                    Ok(Answer::Yes)
                }
                None => {
                    writeln!(out, "blocks=none")?;
                    Ok(Answer::No)
                }
            }
        }
        Command::YtreeDecompose { circuit, f } => {
            let g = read_circuit(&circuit)?;
            let f = read_tt(&f)?;
            let (n, m) = arity(&g);
            if f.num_vars() != n {
                bail!("f has {} variables, the circuit reads {n} base variables", f.num_vars());
            }
            let gt = g.truth_table(&ordered_vars(n, m))?;
            let keys = find_keys(&gt, &f)?;
            if keys.is_empty() {
                bail!("no key restricts the circuit to f");
            }
            let d = extract_ytree_decomposition(&g, n, m, &f, &keys)?;
            write!(out, "{d}")?;
            let chk = validate_decomposition(&g, &d, n, m);
            writeln!(out, "admissible={} weight={} total={}", u8::from(chk.admissible), chk.weight, u8::from(chk.total))?;
            Ok(yes_no(chk.total))
        }
        Command::SpliceDecode { base, code } => {
            let f = read_circuit(&base)?;
            let code: SpliceCode = read(&code)?.parse()?;
            write!(out, "{}", decode(&f, &code)?.to_bcir())?;
            Ok(Answer::Yes)
        }
        Command::SepSolve { f, g, catalog, witness, verify_exhaustive } => {
            let f = read_tt(&f)?;
            let g = read_tt(&g)?;
            let cat = load_catalog(cfg, &catalog, &f)?;
            let inst = SepInstance { n: f.num_vars(), f: f.clone(), g: g.clone(), measure: cfg.measure, catalog: cat };
            let r = solver::solve_report(&inst, SolveOptions::default())?;
            writeln!(
                out,
                "verdict={} decoded={} skipped={} budget_log2={:.2}",
                if r.verdict { "yes" } else { "no" },
                r.decoded,
                r.skipped,
                r.budget_log2
            )?;
            if let (Some(p), Some((c, pi))) = (&witness, &r.witness) {
                let w = relabel_witness(c, inst.n, inst.m(), pi);
                fs::write(p, w.to_bcir()).with_context(|| format!("writing {}", p.display()))?;
                writeln!(out, "witness={}", p.display())?;
            }
            if verify_exhaustive {
                let ex = solver::solve_report(&inst, SolveOptions { exhaustive: true })?;
                writeln!(out, "exhaustive={} decoded={}", if ex.verdict { "yes" } else { "no" }, ex.decoded)?;
                let mut agree = ex.verdict == r.verdict;
                if g.num_vars() <= cfg.oracle_max_vars {
                    let o = is_simple_extension_bruteforce(&f, &g, cfg.measure)?;
                    writeln!(out, "oracle={}", if o { "yes" } else { "no" })?;
                    agree &= o == r.verdict;
                }
                writeln!(out, "agree={}", u8::from(agree))?;
                if !agree {
                    bail!("solver and checks disagree");
                }
            }
            Ok(yes_no(r.verdict))
        }
        Command::BpisReduce { instance, out: path } => {
            let inst = read_instance(&instance)?;
            let red = bpis::reduce(&inst);
            let text = red.table.to_string().replace('⋆', "*");
            match path {
                Some(p) => fs::write(&p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?,
                None => writeln!(out, "{text}")?,
            }
            writeln!(out, "vars={} defined={} conflicts={}", red.table.num_vars(), red.table.defined_rows(), red.conflicts.len())?;
            Ok(Answer::Yes)
        }
        Command::BpisSolve { instance } => {
            let inst = read_instance(&instance)?;
            match bpis::brute_solve(&inst)? {
                Some(p) => {
                    writeln!(out, "pi={p}")?;
                    Ok(Answer::Yes)
                }
                None => {
                    writeln!(out, "pi=none")?;
                    Ok(Answer::No)
                }
            }
        }
        Command::BpisVerify { instance } => {
            let inst = read_instance(&instance)?;
            let s = bpis::soundness(&inst)?;
            let holds = s.holds(&inst);
            writeln!(
                out,
                "bpis={} consistent={} conflicts={} sound={}",
                s.bpis.as_ref().map_or("none".to_string(), |p| p.to_string()),
                s.consistent.len(),
                s.conflicts,
                u8::from(holds)
            )?;
            Ok(yes_no(holds))
        }
        Command::Selftest { only } => {
            let ids: Vec<usize> = match only {
                Some(s) => s.split(',').map(|t| t.trim().parse::<usize>()).collect::<Result<_, _>>()?,
                None => (1..=CRITERIA).collect(),
            };
            if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > CRITERIA) {
                bail!("no criterion {bad}");
            }
            let suite_cfg = SuiteConfig {
                oracle_max_vars: cfg.oracle_max_vars,
                seed: cfg.seed,
                workers: cfg.workers,
                ..SuiteConfig::default()
            };
            writeln!(out, "selftest seed={} oracle_max_vars={}", cfg.seed, cfg.oracle_max_vars)?;
            let mut suite = Suite::new(suite_cfg);
            let mut failed = 0;
            let start = Instant::now();
            for id in ids {
                let r = suite.run(id);
                writeln!(out, "{r}")?;
                out.flush()?;
                eprintln!("criterion {id}: {:.1}s", r.runtime.as_secs_f64());
                failed += usize::from(r.failed());
                debug_assert!(r.outcome != Outcome::Pass || !r.failed());
            }
            eprintln!("selftest: {:.1}s", start.elapsed().as_secs_f64());
            writeln!(out, "failed={failed}")?;
            Ok(yes_no(failed == 0))
        }
    }
}
