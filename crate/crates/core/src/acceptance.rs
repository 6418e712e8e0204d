//! The twelve acceptance criteria, shared by the `acceptance` test target
//! and the `selftest` command.
//!
//! Each criterion produces one report line. Sweeps over the two base
//! functions are computed once and reused by every criterion that needs
//! them. Runtimes are kept out of the report text so the output of a run
//! depends only on the configuration.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bpis::{self, BpisInstance};
use crate::circuit::{Builder, Circuit, GateId, GateKind, SizeMeasure, VarRef};
use crate::oracle::{self, enumerate_optimal_batch, enumerate_optimal_circuits, is_simple_extension_bruteforce, CcTable};
use crate::rewrite::{check_record, normalize, restrict_one};
use crate::solver::{self, check_witness, Catalog, ExtensionIndex, SepInstance, SolveOptions, BUDGET_C};
use crate::splice::{decode, derive_widgets, encode, Widget};
use crate::tt::{all_permutations, find_keys, tt_isomorphic, TruthTable};
use crate::xor::{enumerate_open_optimal_xor, labeled_closure, validate_block_partition, xor_tt};
use crate::ytree::{all_stops, decomposition_from_stops, validate_decomposition};

pub const CRITERIA: usize = 12;

/// Seconds allowed for computing the four-variable table from scratch.
pub const TABLE_BUDGET_SECS: u64 = 300;
/// Seconds allowed for one four-variable solver sweep.
pub const SWEEP_BUDGET_SECS: u64 = 1800;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteConfig {
    /// Criteria needing more variables than this are skipped.
    pub oracle_max_vars: usize,
    pub seed: u64,
    pub workers: usize,
    pub bpis_samples: usize,
    pub normalize_samples: usize,
    pub iso_pairs: usize,
    /// Four-variable instances given to the per-instance solver.
    pub faithful_samples: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            oracle_max_vars: 4,
            seed: 20240601,
            workers: 1,
            bpis_samples: 50,
            normalize_samples: 10_000,
            iso_pairs: 1_000,
            faithful_samples: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
    /// Correct answers, but slower than the stated budget.
    OverBudget,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
            Outcome::OverBudget => "BUDGET",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub outcome: Outcome,
    pub measured: String,
    pub expected: String,
    pub runtime: Duration,
}

impl CriterionReport {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, Outcome::Fail | Outcome::OverBudget)
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: measured {}; expected {}",
            self.id, self.outcome, self.name, self.measured, self.expected
        )
    }
}

pub fn criterion_name(id: usize) -> &'static str {
    match id {
        1 => "parity lower bound",
        2 => "XOR_3 structure",
        3 => "read-twice and restriction rate",
        4 => "solver vs oracle",
        5 => "witness validity",
        6 => "Y-tree decomposition",
        7 => "splice round trip",
        8 => "normalization",
        9 => "widget count",
        10 => "BPIS reduction",
        11 => "candidate budget",
        12 => "truth-table isomorphism",
        _ => "unknown",
    }
}

/// Order-preserving map over `items` on up to `workers` threads.
pub fn par_map<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Everything the solver criteria need for one base function.
struct BaseSweep {
    name: &'static str,
    f: TruthTable,
    catalog: Catalog,
    /// `(m, index, positives, disagreements)` for three and four variables.
    levels: Vec<(usize, ExtensionIndex, Vec<TruthTable>, usize)>,
    /// Per-instance solver runs: `(g, agrees, decoded, witness check)`,
    /// the check absent on negative verdicts.
    faithful: Vec<(TruthTable, bool, u64, Option<bool>)>,
    sweep_time: Duration,
}

#[derive(Default)]
struct DecompStats {
    circuits: usize,
    decomposed: usize,
    round_trips: usize,
    first_failure: Option<String>,
}

pub struct Suite {
    cfg: SuiteConfig,
    bases: Option<Result<Vec<BaseSweep>, String>>,
    decomp: Option<Result<DecompStats, String>>,
}

impl Suite {
    pub fn new(cfg: SuiteConfig) -> Self {
        Suite { cfg, bases: None, decomp: None }
    }

    pub fn config(&self) -> &SuiteConfig {
        &self.cfg
    }

    pub fn run_all(&mut self) -> Vec<CriterionReport> {
        (1..=CRITERIA).map(|i| self.run(i)).collect()
    }

    pub fn run(&mut self, id: usize) -> CriterionReport {
        let start = Instant::now();
        let (outcome, measured, expected) = match id {
            1 => self.parity_bound(),
            2 => self.xor3_structure(),
            3 => self.read_twice(),
            4 => self.solver_vs_oracle(),
            5 => self.witnesses(),
            6 => self.decompositions(false),
            7 => self.decompositions(true),
            8 => self.normalization(),
            9 => widget_count(),
            10 => self.bpis(),
            11 => self.budget(),
            12 => self.isomorphism(),
            _ => (Outcome::Fail, format!("no criterion {id}"), "1..=12".into()),
        };
        CriterionReport { id, name: criterion_name(id), outcome, measured, expected, runtime: start.elapsed() }
    }

    fn max_vars(&self) -> usize {
        self.cfg.oracle_max_vars.min(oracle::MAX_VARS)
    }

    fn parity_bound(&self) -> (Outcome, String, String) {
        let expected = "CC_D(XOR_n) = 3, 6, 9 for n = 2, 3, 4; table built within 300 s".to_string();
        let top = self.max_vars().min(4);
        let mut got = Vec::new();
        let mut ok = true;
        let mut slow = false;
        for n in 2..=top {
            let (t, elapsed) = if n == 4 {
                let start = Instant::now();
                match CcTable::compute(4, SizeMeasure::D) {
                    Ok(t) => (t, Some(start.elapsed())),
                    Err(e) => return (Outcome::Fail, e.to_string(), expected),
                }
            } else {
                match oracle::table(n, SizeMeasure::D) {
                    Ok(t) => (t.clone(), None),
                    Err(e) => return (Outcome::Fail, e.to_string(), expected),
                }
            };
            let v = t.get(xor_tt(n).as_u64());
            ok &= v == Some(3 * (n as u8 - 1));
            if let Some(d) = elapsed {
                slow = d.as_secs() > TABLE_BUDGET_SECS;
            }
            got.push(v.map_or("?".to_string(), |v| v.to_string()));
        }
        let measured = format!("{} for n = 2..={top}", got.join(", "));
        let outcome = if !ok {
            Outcome::Fail
        } else if slow {
            Outcome::OverBudget
        } else if top < 4 {
            Outcome::Skipped
        } else {
            Outcome::Pass
        };
        (outcome, measured, expected)
    }

    fn xor3_structure(&self) -> (Outcome, String, String) {
        let expected = "every optimal XOR_3 circuit partitions; closure equals oracle set".to_string();
        if self.max_vars() < 3 {
            return (Outcome::Skipped, "needs 3 variables".into(), expected);
        }
        let run = || -> Result<(usize, usize, bool), String> {
            let all = enumerate_optimal_circuits(&xor_tt(3), SizeMeasure::D).map_err(|e| e.to_string())?;
            let parted = all.iter().filter(|c| validate_block_partition(c).is_some()).count();
            let oracle: BTreeSet<Vec<u8>> = all.iter().map(|c| c.canonical_form()).collect();
            let meta = enumerate_open_optimal_xor(3, SizeMeasure::D).map_err(|e| e.to_string())?;
            Ok((all.len(), parted, labeled_closure(&meta) == oracle))
        };
        match run() {
            Ok((total, parted, equal)) => {
                let measured = format!("{parted}/{total} partitioned, closure equal: {equal}");
                (pass_if(parted == total && equal && total > 0), measured, expected)
            }
            Err(e) => (Outcome::Fail, e, expected),
        }
    }

    fn read_twice(&self) -> (Outcome, String, String) {
        let expected = "0 violations for D and R catalogs, n = 2..=4".to_string();
        let mut checked = 0usize;
        let mut violations = 0usize;
        for measure in [SizeMeasure::D, SizeMeasure::R] {
            for n in 2..=4 {
                let meta = match enumerate_open_optimal_xor(n, measure) {
                    Ok(m) => m,
                    Err(e) => return (Outcome::Fail, e.to_string(), expected),
                };
                let vars: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
                for oc in &meta.classes {
                    let c = oc.label(&vars);
                    checked += 1;
                    for &s in &oc.slots {
                        if oc.circuit.costly_fanout(s) != 2 {
                            violations += 1;
                        }
                    }
                    let size = c.size(SizeMeasure::D);
                    for &v in &vars {
                        for value in [false, true] {
                            let (r, _) = restrict_one(&c, v, value);
                            let rest: Vec<VarRef> = vars.iter().copied().filter(|&w| w != v).collect();
                            let constant = r.truth_table(&rest).map_or(true, |t| t.is_constant().is_some());
                            if size - r.size(SizeMeasure::D) != 3 || constant {
                                violations += 1;
                            }
                        }
                    }
                }
            }
        }
        (pass_if(violations == 0), format!("{violations} violations over {checked} catalog circuits"), expected)
    }

    fn bases(&mut self) -> Result<&[BaseSweep], String> {
        if self.bases.is_none() {
            self.bases = Some(build_bases(&self.cfg, self.max_vars()));
        }
        match self.bases.as_ref().unwrap() {
            Ok(b) => Ok(b),
            Err(e) => Err(e.clone()),
        }
    }

    fn solver_vs_oracle(&mut self) -> (Outcome, String, String) {
        let expected = "0 disagreements on all 3- and 4-variable g, XOR_2 and OR_2 bases".to_string();
        let four = self.max_vars() >= 4;
        let bases = match self.bases() {
            Ok(b) => b,
            Err(e) => return (Outcome::Fail, e, expected),
        };
        let mut parts = Vec::new();
        let mut bad = 0;
        let mut slow = false;
        for b in bases {
            for (m, _, pos, dis) in &b.levels {
                bad += dis;
                parts.push(format!("{} m={m}: {dis} of {} ({} positive)", b.name, 1usize << (1 << (2 + m)), pos.len()));
            }
            let fbad = b.faithful.iter().filter(|x| !x.1).count();
            bad += fbad;
            parts.push(format!("{} per-instance sample: {fbad} of {}", b.name, b.faithful.len()));
            slow |= b.sweep_time.as_secs() > SWEEP_BUDGET_SECS;
        }
        let outcome = if bad > 0 {
            Outcome::Fail
        } else if slow {
            Outcome::OverBudget
        } else if !four {
            Outcome::Skipped
        } else {
            Outcome::Pass
        };
        (outcome, parts.join(", "), expected)
    }

    fn witnesses(&mut self) -> (Outcome, String, String) {
        let expected = "every positive instance has a witness passing the re-check".to_string();
        let four = self.max_vars() >= 4;
        let bases = match self.bases() {
            Ok(b) => b,
            Err(e) => return (Outcome::Fail, e, expected),
        };
        let mut total = 0;
        let mut good = 0;
        for b in bases {
            for (m, idx, pos, _) in &b.levels {
                for g in pos {
                    total += 1;
                    let inst = SepInstance { n: 2, f: b.f.clone(), g: g.clone(), measure: b.catalog.measure, catalog: b.catalog.clone() };
                    if let Ok(Some((c, pi))) = idx.witness(g) {
                        if check_witness(&inst, &c, &pi) && c.variables().len() == 2 + m {
                            good += 1;
                        }
                    }
                }
            }
            for ok in b.faithful.iter().filter_map(|x| x.3) {
                total += 1;
                good += usize::from(ok);
            }
        }
        let outcome = if good != total {
            Outcome::Fail
        } else if !four {
            Outcome::Skipped
        } else {
            Outcome::Pass
        };
        (outcome, format!("{good}/{total} witnesses valid"), expected)
    }

    fn decomp_stats(&mut self) -> Result<&DecompStats, String> {
        if self.decomp.is_none() {
            let workers = self.cfg.workers;
            let r = self.bases().map(|bases| {
                let mut s = DecompStats::default();
                for b in bases {
                    for (m, _, pos, _) in &b.levels {
                        decompose_all(&b.f, *m, pos, workers, &mut s);
                    }
                }
                s
            });
            self.decomp = Some(r);
        }
        self.decomp.as_ref().unwrap().as_ref().map_err(Clone::clone)
    }

    fn decompositions(&mut self, round_trip: bool) -> (Outcome, String, String) {
        let four = self.max_vars() >= 4;
        let expected = if round_trip {
            "decode(encode(G)) matches G for 100% of optimal circuits"
        } else {
            "total decomposition for 100% of optimal circuits"
        }
        .to_string();
        let s = match self.decomp_stats() {
            Ok(s) => s,
            Err(e) => return (Outcome::Fail, e, expected),
        };
        let good = if round_trip { s.round_trips } else { s.decomposed };
        let mut measured = format!("{good}/{} circuits", s.circuits);
        if let Some(f) = &s.first_failure {
            measured.push_str(&format!(", first failure: {f}"));
        }
        let outcome = if good != s.circuits || s.circuits == 0 {
            Outcome::Fail
        } else if !four {
            Outcome::Skipped
        } else {
            Outcome::Pass
        };
        (outcome, measured, expected)
    }

    fn normalization(&self) -> (Outcome, String, String) {
        let expected = format!("{} circuits, 100% satisfy the bound with terminal layered records", self.cfg.normalize_samples);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut good = 0;
        for _ in 0..self.cfg.normalize_samples {
            let c = random_circuit(&mut rng, 12, 4);
            let fo = c.fanouts();
            let ell: usize =
                c.gates.iter().filter(|(_, g)| matches!(g.kind, GateKind::Const(_))).map(|(id, _)| fo[id]).sum();
            let (nc, rec) = normalize(&c);
            let single = nc.gates.len() == 1 && matches!(nc.gates[&nc.output].kind, GateKind::Const(_));
            let drop_ok = single || c.size(SizeMeasure::D) >= nc.size(SizeMeasure::D) + ell;
            let vars = c.variables();
            let same = c.truth_table(&vars).ok() == nc.truth_table(&vars).ok();
            let record_ok = check_record(&c, &rec).map_or(false, |r| r.terminal && r.layered);
            if drop_ok && same && record_ok {
                good += 1;
            }
        }
        let measured = format!("{good}/{} (seed {})", self.cfg.normalize_samples, self.cfg.seed);
        (pass_if(good == self.cfg.normalize_samples), measured, expected)
    }

    fn bpis(&self) -> (Outcome, String, String) {
        let expected = format!(
            "all n=1 edge sets, 16 single-edge n=2 instances and {} seeded n=2 instances sound; Levin round trip exact for n <= 3",
            self.cfg.bpis_samples
        );
        let mut instances: Vec<BpisInstance> = Vec::new();
        instances.push(BpisInstance::new(1, []).unwrap());
        instances.push(BpisInstance::new(1, [(1, 1, 1, 1)]).unwrap());
        for e in BpisInstance::all_edges(2) {
            instances.push(BpisInstance::new(2, [e]).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        for i in 0..self.cfg.bpis_samples {
            let p = [0.1, 0.2, 0.3, 0.4, 0.5][i % 5];
            instances.push(BpisInstance::random(2, p, &mut rng));
        }
        let results = par_map(self.cfg.workers, &instances, |inst| {
            bpis::soundness(inst).map(|s| (s.holds(inst), s.bpis.is_some()))
        });
        let mut sound = 0;
        let mut yes = 0;
        for r in &results {
            if let Ok((h, y)) = r {
                sound += usize::from(*h);
                yes += usize::from(*y);
            }
        }
        let mut levin = 0;
        let mut levin_total = 0;
        for n in 1..=3 {
            for p in all_permutations(2 * n) {
                levin_total += 1;
                if bpis::circuit_to_witness(&bpis::witness_to_circuit(&p, n), n).as_ref() == Ok(&p) {
                    levin += 1;
                }
            }
        }
        let measured = format!(
            "{sound}/{} sound ({yes} yes, seed {}), Levin {levin}/{levin_total}",
            instances.len(),
            self.cfg.seed
        );
        (pass_if(sound == instances.len() && levin == levin_total), measured, expected)
    }

    fn budget(&mut self) -> (Outcome, String, String) {
        let expected = format!("decoded <= |L| * 2^(c * l * (s + m)) with c = {BUDGET_C}");
        let four = self.max_vars() >= 4;
        let bases = match self.bases() {
            Ok(b) => b,
            Err(e) => return (Outcome::Fail, e, expected),
        };
        let mut parts = Vec::new();
        let mut ok = true;
        for b in bases {
            for (m, idx, _, _) in &b.levels {
                ok &= idx.within_budget();
                parts.push(format!("{} m={m}: {} <= 2^{:.1}", b.name, idx.decoded, idx.budget_log2));
                // a single instance stops no later than the full enumeration
                for (g, _, decoded, _) in &b.faithful {
                    if g.num_vars() == 2 + m {
                        ok &= *decoded <= idx.decoded;
                    }
                }
            }
        }
        let outcome = if !ok {
            Outcome::Fail
        } else if !four {
            Outcome::Skipped
        } else {
            Outcome::Pass
        };
        (outcome, parts.join(", "), expected)
    }

    fn isomorphism(&self) -> (Outcome, String, String) {
        let expected = format!("agreement on all 65536 three-variable pairs and {} four-variable pairs", self.cfg.iso_pairs);
        let mut agree = 0usize;
        let mut total = 0usize;
        let perms3 = all_permutations(3);
        let tables: Vec<TruthTable> = (0..256).map(|b| TruthTable::from_u64(3, b)).collect();
        for a in &tables {
            for b in &tables {
                total += 1;
                agree += usize::from(tt_isomorphic(a, b).ok() == Some(naive_iso(a, b, &perms3)));
            }
        }
        let perms4 = all_permutations(4);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        for i in 0..self.cfg.iso_pairs {
            let a = TruthTable::from_u64(4, rng.gen::<u16>() as u64);
            // half the pairs are permuted copies, so both answers occur
            let b = if i % 2 == 0 {
                a.apply_perm(perms4.choose(&mut rng).unwrap()).unwrap()
            } else {
                TruthTable::from_u64(4, rng.gen::<u16>() as u64)
            };
            total += 1;
            agree += usize::from(tt_isomorphic(&a, &b).ok() == Some(naive_iso(&a, &b, &perms4)));
        }
        (pass_if(agree == total), format!("{agree}/{total} (seed {})", self.cfg.seed), expected)
    }
}

fn pass_if(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn widget_count() -> (Outcome, String, String) {
    let ws = derive_widgets();
    let shapes: BTreeSet<_> = ws.iter().map(Widget::shape).collect();
    let measured = format!("{} shapes from {} widgets", shapes.len(), ws.len());
    (pass_if(shapes.len() == 4), measured, "4 shapes up to symmetry".into())
}

/// Least π in lexicographic order, by trying all of them.
fn naive_iso(a: &TruthTable, b: &TruthTable, perms: &[crate::tt::Permutation]) -> Option<crate::tt::Permutation> {
    perms.iter().find(|p| a.apply_perm(p).ok().as_ref() == Some(b)).cloned()
}

/// Random circuit over at most four variables with at most `gates` logic
/// and constant gates, `consts` of them constant, trimmed to the output cone.
pub fn random_circuit(rng: &mut impl Rng, gates: usize, consts: usize) -> Circuit {
    let nv = rng.gen_range(1..=4u32);
    let mut b = Builder::new();
    let mut ids: Vec<GateId> = (1..=nv).map(|i| b.input(VarRef::x(i))).collect();
    let count = rng.gen_range(1..=gates);
    let mut used = 0;
    for _ in 0..count {
        let a = ids[rng.gen_range(0..ids.len())];
        let c = ids[rng.gen_range(0..ids.len())];
        let g = match rng.gen_range(0..5) {
            0 => b.and(a, c),
            1 => b.or(a, c),
            2 => b.not(a),
            3 if used < consts => {
                used += 1;
                b.constant(rng.gen())
            }
            _ => b.and(a, c),
        };
        ids.push(g);
    }
    let out = *ids.last().unwrap();
    b.finish(out).subcircuit(out).expect("output is present")
}

fn build_bases(cfg: &SuiteConfig, max_vars: usize) -> Result<Vec<BaseSweep>, String> {
    let or2 = TruthTable::from_fn(2, |r| r != 0);
    let xor_cat = Catalog::xor(2, SizeMeasure::D).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (name, f, catalog) in [("XOR_2", xor_tt(2), xor_cat), ("OR_2", or2, Catalog::or2(SizeMeasure::D))] {
        let start = Instant::now();
        let mut levels = Vec::new();
        let mut faithful = Vec::new();
        for m in 1..=max_vars.saturating_sub(2).min(2) {
            let nv = 2 + m;
            let idx = ExtensionIndex::build(&catalog, &f, m).map_err(|e| e.to_string())?;
            let all: Vec<u64> = (0..1u64 << (1 << nv)).collect();
            let rows = par_map(cfg.workers, &all, |&bits| {
                let g = TruthTable::from_u64(nv, bits);
                let want = is_simple_extension_bruteforce(&f, &g, SizeMeasure::D).map_err(|e| e.to_string())?;
                let got = idx.solve(&g).map_err(|e| e.to_string())?;
                Ok::<_, String>((want, got))
            });
            let mut pos = Vec::new();
            let mut dis = 0;
            let mut open = Vec::new();
            for (bits, r) in all.iter().zip(rows) {
                let (want, got) = r?;
                let g = TruthTable::from_u64(nv, *bits);
                if want {
                    pos.push(g.clone());
                }
                dis += usize::from(want != got);
                let keyed = find_keys(&g, &f).map(|k| !k.is_empty()).unwrap_or(false);
                if keyed && g.is_nondegenerate() {
                    open.push((g, want));
                }
            }
            // the per-instance solver on every three-variable instance
            // past the prechecks, and a seeded sample of four-variable ones
            let sample: Vec<(TruthTable, bool)> = if m == 1 {
                open
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ bits_of(name));
                let (yes, no): (Vec<_>, Vec<_>) = open.into_iter().partition(|x| x.1);
                let k = cfg.faithful_samples;
                let mut s: Vec<_> = yes.choose_multiple(&mut rng, k.div_ceil(2)).cloned().collect();
                s.extend(no.choose_multiple(&mut rng, k / 2).cloned());
                s
            };
            let runs = par_map(cfg.workers, &sample, |(g, want)| {
                let inst = SepInstance { n: 2, f: f.clone(), g: g.clone(), measure: SizeMeasure::D, catalog: catalog.clone() };
                match solver::solve_report(&inst, SolveOptions::default()) {
                    Ok(r) => {
                        let ok = r.witness.as_ref().map(|(c, pi)| check_witness(&inst, c, pi));
                        (g.clone(), r.verdict == *want, r.decoded, ok)
                    }
                    Err(_) => (g.clone(), false, 0, Some(false)),
                }
            });
            faithful.extend(runs);
            levels.push((m, idx, pos, dis));
        }
        out.push(BaseSweep { name, f, catalog, levels, faithful, sweep_time: start.elapsed() });
    }
    Ok(out)
}

fn bits_of(name: &str) -> u64 {
    name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64))
}

/// All-stops restriction, decomposition and splice round trip for every
/// optimal circuit of every positive `g`.
fn decompose_all(f: &TruthTable, m: usize, pos: &[TruthTable], workers: usize, s: &mut DecompStats) {
    let mut vars: Vec<VarRef> = (1..=2).map(VarRef::x).collect();
    vars.extend((1..=m as u32).map(VarRef::y));
    let all = match enumerate_optimal_batch(pos, SizeMeasure::D, &vars) {
        Ok(a) => a,
        Err(e) => {
            s.first_failure.get_or_insert(e.to_string());
            return;
        }
    };
    let jobs: Vec<(&TruthTable, &Circuit)> = pos.iter().zip(&all).flat_map(|(g, cs)| cs.iter().map(move |c| (g, c))).collect();
    let results = par_map(workers, &jobs, |(g, c)| check_one(f, m, g, c));
    for r in results {
        s.circuits += 1;
        match r {
            Ok(rt) => {
                s.decomposed += 1;
                if rt {
                    s.round_trips += 1;
                }
            }
            Err(e) => {
                s.first_failure.get_or_insert(e);
            }
        }
    }
}

/// `Ok(round trip matched)` once the decomposition is total.
fn check_one(f: &TruthTable, m: usize, g: &TruthTable, c: &Circuit) -> Result<bool, String> {
    let keys = find_keys(g, f).map_err(|e| e.to_string())?;
    let st = all_stops(c, f, &keys).map_err(|e| format!("g={g}: {e}"))?;
    let chk = check_record(c, &st.restriction).map_err(|e| e.to_string())?;
    if !(chk.terminal && chk.layered) {
        return Err(format!("g={g}: record not terminal and layered"));
    }
    let d = decomposition_from_stops(&st).map_err(|e| format!("g={g}: {e}"))?;
    if !validate_decomposition(c, &d, 2, m).total {
        return Err(format!("g={g}: decomposition not total"));
    }
    let Ok(code) = encode(c, &st.result, &d, &st.restriction) else {
        return Ok(false);
    };
    Ok(decode(&st.result, &code).map_or(false, |back| back.canonical_form() == c.canonical_form()))
}
