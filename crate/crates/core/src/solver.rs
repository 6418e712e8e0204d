//! Deciding simple extensions from a catalog of optimal base circuits.
//!
//! After the key and non-degeneracy checks, every catalog circuit is
//! extended by every implicit splice code adding `m` binary gates, with
//! every split of the extension variables over the combiners and every
//! choice of read-once formulas. A candidate whose truth table is a
//! permutation of `g` (and which reads each extension variable once)
//! certifies `g`.

use std::collections::{HashMap, HashSet};
use std::ops::ControlFlow;

use thiserror::Error;

use crate::circuit::{Builder, Circuit, CircuitError, GateKind, SizeMeasure, VarRef};
use crate::rewrite::is_normalized;
use crate::splice::{
    compositions, decode_with, enumerate_implicit_codes, enumerate_read_once_formulas, with_trees, BaseInfo,
    SpliceError,
};
use crate::tt::{find_keys, tt_isomorphic, PermCanon, Permutation, TruthTable, TtError};
use crate::xor::{enumerate_open_optimal_xor, xor_tt, CatalogMeta, XorError};
use crate::ytree::Formula;

/// Exponent constant of the candidate budget `|L| * 2^(c * l * (s + m))`.
pub const BUDGET_C: f64 = 4.0;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("catalog is for measure {catalog}, instance asks for {instance}")]
    MeasureMismatch { catalog: SizeMeasure, instance: SizeMeasure },
    #[error("catalog computes a different function than f")]
    CatalogMismatch,
    #[error("g has {got} variables, fewer than n = {n}")]
    Arity { got: usize, n: usize },
    #[error("f is degenerate")]
    DegenerateBase,
    #[error("{decoded} candidates exceed the budget 2^{log2:.1}")]
    Budget { decoded: u64, log2: f64 },
    #[error(transparent)]
    Splice(#[from] SpliceError),
    #[error(transparent)]
    Xor(#[from] XorError),
    #[error(transparent)]
    Tt(#[from] TtError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Optimal base circuits labeled x1..xn.
#[derive(Debug, Clone)]
pub struct Catalog {
    pub n: usize,
    pub measure: SizeMeasure,
    pub base_size: usize,
    pub ell: usize,
    pub classes: Vec<Circuit>,
}

impl Catalog {
    pub fn from_meta(meta: &CatalogMeta) -> Catalog {
        let vars: Vec<VarRef> = (1..=meta.n as u32).map(VarRef::x).collect();
        Catalog {
            n: meta.n,
            measure: meta.measure,
            base_size: meta.base_size,
            ell: meta.max_fanout,
            classes: meta.classes.iter().map(|c| c.label(&vars)).collect(),
        }
    }

    /// Both optimal OR_2 circuits: the gate itself and its De Morgan form
    /// (the latter costs extra negations under the second measure).
    pub fn or2(measure: SizeMeasure) -> Catalog {
        let mut classes = Vec::new();
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let o = b.or(x1, x2);
        classes.push(b.finish(o));
        if measure == SizeMeasure::D {
            let mut b = Builder::new();
            let x1 = b.input(VarRef::x(1));
            let x2 = b.input(VarRef::x(2));
            let n1 = b.not(x1);
            let n2 = b.not(x2);
            let a = b.and(n1, n2);
            let o = b.not(a);
            classes.push(b.finish(o));
        }
        let ell = classes.iter().map(crate::xor::max_fanout).max().unwrap();
        Catalog { n: 2, measure, base_size: 1, ell, classes }
    }

    pub fn xor(n: usize, measure: SizeMeasure) -> Result<Catalog, SolverError> {
        Ok(Catalog::from_meta(&enumerate_open_optimal_xor(n, measure)?))
    }

    pub fn vars(&self) -> Vec<VarRef> {
        (1..=self.n as u32).map(VarRef::x).collect()
    }

    /// log2 of the candidate budget for `m` extension variables.
    pub fn budget_log2(&self, m: usize) -> f64 {
        (self.classes.len().max(1) as f64).log2() + BUDGET_C * (self.ell * (self.base_size + m)) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SepInstance {
    pub n: usize,
    pub f: TruthTable,
    pub g: TruthTable,
    pub measure: SizeMeasure,
    pub catalog: Catalog,
}

impl SepInstance {
    pub fn m(&self) -> usize {
        self.g.num_vars() - self.n
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.catalog.measure != self.measure {
            return Err(SolverError::MeasureMismatch { catalog: self.catalog.measure, instance: self.measure });
        }
        if self.g.num_vars() < self.n {
            return Err(SolverError::Arity { got: self.g.num_vars(), n: self.n });
        }
        if !self.f.is_nondegenerate() {
            return Err(SolverError::DegenerateBase);
        }
        let vars = self.catalog.vars();
        for c in &self.catalog.classes {
            if self.catalog.n != self.n || c.truth_table(&vars)? != self.f {
                return Err(SolverError::CatalogMismatch);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveOptions {
    /// Run through every candidate instead of stopping at the first hit.
    pub exhaustive: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub verdict: bool,
    pub witness: Option<(Circuit, Permutation)>,
    /// Candidates decoded successfully.
    pub decoded: u64,
    /// Codes rejected by decode.
    pub skipped: u64,
    pub budget_log2: f64,
}

fn ordered_vars(n: usize, m: usize) -> Vec<VarRef> {
    let mut v: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
    v.extend((1..=m as u32).map(VarRef::y));
    v
}

/// Conditions under which a circuit certifies a simple extension: size
/// `s + m`, normalized, every extension variable read exactly once, every
/// base variable read.
pub fn certifies(c: &Circuit, n: usize, m: usize, s: usize, measure: SizeMeasure) -> bool {
    if c.size(measure) != s + m || !is_normalized(c) {
        return false;
    }
    let fo = c.fanouts();
    let inputs = |v: VarRef| -> Vec<_> {
        c.gates.iter().filter(|(_, g)| g.kind == GateKind::Input(v)).map(|(id, _)| *id).collect()
    };
    for j in 1..=m as u32 {
        match inputs(VarRef::y(j)).as_slice() {
            [id] if c.costly_fanout(*id) == 1 => {}
            _ => return false,
        }
    }
    (1..=n as u32).all(|i| inputs(VarRef::x(i)).iter().any(|id| fo[id] > 0 || *id == c.output))
}

/// Lemma re-check of a witness against `g`.
pub fn check_witness(inst: &SepInstance, c: &Circuit, pi: &Permutation) -> bool {
    let m = inst.m();
    let Ok(t) = c.truth_table(&ordered_vars(inst.n, m)) else {
        return false;
    };
    certifies(c, inst.n, m, inst.catalog.base_size, inst.measure)
        && t.apply_perm(pi).map_or(false, |u| u == inst.g)
}

/// Relabels a witness so it computes `g` itself: the variable in position
/// `j` becomes the one in position `π(j)`.
pub fn relabel_witness(c: &Circuit, n: usize, m: usize, pi: &Permutation) -> Circuit {
    let vars = ordered_vars(n, m);
    let mut out = c.clone();
    for g in out.gates.values_mut() {
        if let GateKind::Input(v) = g.kind {
            if let Some(j) = vars.iter().position(|&w| w == v) {
                g.kind = GateKind::Input(vars[pi.0[j] - 1]);
            }
        }
    }
    out
}

/// Calls `visit` on every decodable candidate. Returns the number decoded
/// and skipped.
pub fn for_each_candidate(
    cat: &Catalog,
    m: usize,
    mut visit: impl FnMut(&Circuit) -> ControlFlow<()>,
) -> Result<(u64, u64), SolverError> {
    let monotone = cat.measure == SizeMeasure::R;
    let formulas: Vec<Vec<Formula>> =
        (0..=m).map(|a| if a == 0 { Ok(Vec::new()) } else { enumerate_read_once_formulas(a, monotone) }).collect::<Result<_, _>>()?;
    let (mut decoded, mut skipped) = (0u64, 0u64);
    for f in &cat.classes {
        let info = BaseInfo::new(f)?;
        for code in enumerate_implicit_codes(f, m, cat.ell, monotone)? {
            let d = code.combiners();
            if d == 0 {
                decoded += 1;
                if visit(f).is_break() {
                    return Ok((decoded, skipped));
                }
                continue;
            }
            for parts in compositions(m, d)? {
                let lists: Vec<&Vec<Formula>> = parts.iter().map(|&a| &formulas[a]).collect();
                let mut idx = vec![0usize; d];
                loop {
                    let trees: Vec<&Formula> = idx.iter().zip(&lists).map(|(&i, l)| &l[i]).collect();
                    match decode_with(f, &info, &with_trees(&code, &trees)) {
                        Ok(c) => {
                            decoded += 1;
                            if visit(&c).is_break() {
                                return Ok((decoded, skipped));
                            }
                        }
                        Err(_) => skipped += 1,
                    }
                    // odometer over the formula tuple
                    let mut k = d;
                    loop {
                        if k == 0 {
                            break;
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < lists[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        if k == 0 {
                            k = usize::MAX;
                            break;
                        }
                    }
                    if k == usize::MAX {
                        break;
                    }
                }
            }
        }
    }
    Ok((decoded, skipped))
}

/// Key and non-degeneracy checks shared by every entry point; `None` when
/// they are inconclusive.
fn prechecks(inst: &SepInstance) -> Result<Option<bool>, SolverError> {
    inst.validate()?;
    let m = inst.m();
    if m == 0 {
        return Ok(Some(inst.g == inst.f));
    }
    if find_keys(&inst.g, &inst.f)?.is_empty() || !inst.g.is_nondegenerate() {
        return Ok(Some(false));
    }
    Ok(None)
}

pub fn solve_report(inst: &SepInstance, opts: SolveOptions) -> Result<SolveReport, SolverError> {
    let m = inst.m();
    let budget_log2 = inst.catalog.budget_log2(m);
    let mut report = SolveReport { verdict: false, witness: None, decoded: 0, skipped: 0, budget_log2 };
    if let Some(v) = prechecks(inst)? {
        report.verdict = v;
        if v {
            let c = inst.catalog.classes[0].clone();
            report.witness = Some((c, Permutation::identity(inst.n)));
        }
        return Ok(report);
    }
    let nv = inst.n + m;
    let canon = PermCanon::new(nv);
    let want = canon.canon(&inst.g);
    let vars = ordered_vars(inst.n, m);
    let mut rejected: HashSet<u64> = HashSet::new();
    let mut best: Option<(Vec<u8>, Circuit)> = None;
    let (decoded, skipped) = for_each_candidate(&inst.catalog, m, |c| {
        let Ok(t) = c.truth_table(&vars) else {
            return ControlFlow::Continue(());
        };
        let bits = t.as_u64();
        if rejected.contains(&bits) {
            return ControlFlow::Continue(());
        }
        if canon.canon(&t) != want {
            rejected.insert(bits);
            return ControlFlow::Continue(());
        }
        if !certifies(c, inst.n, m, inst.catalog.base_size, inst.measure) {
            return ControlFlow::Continue(());
        }
        let cf = c.canonical_form();
        if best.as_ref().map_or(true, |(b, _)| cf < *b) {
            best = Some((cf, c.clone()));
        }
        if opts.exhaustive {
            ControlFlow::Continue(())
        } else {
            ControlFlow::Break(())
        }
    })?;
    report.decoded = decoded;
    report.skipped = skipped;
    if opts.exhaustive && decoded as f64 > 2f64.powf(budget_log2) {
        return Err(SolverError::Budget { decoded, log2: budget_log2 });
    }
    if let Some((_, c)) = best {
        let t = c.truth_table(&vars)?;
        let pi = tt_isomorphic(&t, &inst.g)?.expect("canonical forms agree");
        report.verdict = true;
        report.witness = Some((c, pi));
    }
    Ok(report)
}

pub fn solve(inst: &SepInstance) -> Result<bool, SolverError> {
    Ok(solve_report(inst, SolveOptions::default())?.verdict)
}

pub fn witness(inst: &SepInstance) -> Result<Option<(Circuit, Permutation)>, SolverError> {
    Ok(solve_report(inst, SolveOptions::default())?.witness)
}

pub fn solve_xor(n: usize, g: &TruthTable, measure: SizeMeasure) -> Result<bool, SolverError> {
    let inst = SepInstance { n, f: xor_tt(n), g: g.clone(), measure, catalog: Catalog::xor(n, measure)? };
    solve(&inst)
}

/// Every permutation class of tables reached by the candidates for one
/// catalog and `m`, with a certifying circuit for each. Answers the same
/// question as [`solve`] for many `g` at once.
#[derive(Debug, Clone)]
pub struct ExtensionIndex {
    pub n: usize,
    pub m: usize,
    pub f: TruthTable,
    pub measure: SizeMeasure,
    pub base_size: usize,
    pub decoded: u64,
    pub skipped: u64,
    pub budget_log2: f64,
    canon: PermCanon,
    hits: HashMap<u64, Circuit>,
}

impl ExtensionIndex {
    pub fn build(cat: &Catalog, f: &TruthTable, m: usize) -> Result<ExtensionIndex, SolverError> {
        let nv = cat.n + m;
        let canon = PermCanon::new(nv);
        let vars = ordered_vars(cat.n, m);
        let mut hits: HashMap<u64, (Vec<u8>, Circuit)> = HashMap::new();
        let (decoded, skipped) = for_each_candidate(cat, m, |c| {
            if certifies(c, cat.n, m, cat.base_size, cat.measure) {
                if let Ok(t) = c.truth_table(&vars) {
                    let key = canon.canon(&t);
                    let cf = c.canonical_form();
                    let e = hits.entry(key).or_insert_with(|| (cf.clone(), c.clone()));
                    if cf < e.0 {
                        *e = (cf, c.clone());
                    }
                }
            }
            ControlFlow::Continue(())
        })?;
        let budget_log2 = cat.budget_log2(m);
        Ok(ExtensionIndex {
            n: cat.n,
            m,
            f: f.clone(),
            measure: cat.measure,
            base_size: cat.base_size,
            decoded,
            skipped,
            budget_log2,
            canon,
            hits: hits.into_iter().map(|(k, (_, c))| (k, c)).collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.hits.len()
    }

    pub fn within_budget(&self) -> bool {
        self.decoded as f64 <= 2f64.powf(self.budget_log2)
    }

    pub fn witness(&self, g: &TruthTable) -> Result<Option<(Circuit, Permutation)>, SolverError> {
        if g.num_vars() != self.n + self.m {
            return Err(SolverError::Arity { got: g.num_vars(), n: self.n + self.m });
        }
        if find_keys(g, &self.f)?.is_empty() || !g.is_nondegenerate() {
            return Ok(None);
        }
        let Some(c) = self.hits.get(&self.canon.canon(g)) else {
            return Ok(None);
        };
        let t = c.truth_table(&ordered_vars(self.n, self.m))?;
        let pi = tt_isomorphic(&t, g)?.expect("same class");
        Ok(Some((c.clone(), pi)))
    }

    pub fn solve(&self, g: &TruthTable) -> Result<bool, SolverError> {
        Ok(self.witness(g)?.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_optimal_circuits, is_simple_extension_bruteforce};

    fn or_tt(n: usize) -> TruthTable {
        TruthTable::from_fn(n, |r| r != 0)
    }

    fn inst(f: TruthTable, g: TruthTable, cat: Catalog) -> SepInstance {
        SepInstance { n: f.num_vars(), f, g, measure: cat.measure, catalog: cat }
    }

    fn xor_or_y() -> TruthTable {
        TruthTable::from_fn(3, |r| ((r >> 2) ^ (r >> 1)) & 1 == 1 || r & 1 == 1)
    }

    #[test]
    fn relabeled_witness_computes_g() {
        let g = TruthTable::from_fn(3, |r| (r >> 2 == 1) != (r & 3 != 0));
        let i = inst(xor_tt(2), g.clone(), Catalog::xor(2, SizeMeasure::D).unwrap());
        let (c, pi) = witness(&i).unwrap().unwrap();
        let w = relabel_witness(&c, 2, 1, &pi);
        assert_eq!(w.truth_table(&ordered_vars(2, 1)).unwrap(), g);
    }

    #[test]
    fn examples() {
        let cat = Catalog::xor(2, SizeMeasure::D).unwrap();
        assert!(!solve(&inst(xor_tt(2), xor_tt(3), cat.clone())).unwrap());
        assert!(solve(&inst(xor_tt(2), xor_or_y(), cat.clone())).unwrap());
        assert!(solve(&inst(xor_tt(2), xor_tt(2), cat.clone())).unwrap());
        let or = Catalog::or2(SizeMeasure::D);
        assert!(solve(&inst(or_tt(2), or_tt(3), or)).unwrap());
        assert!(solve_xor(2, &xor_or_y(), SizeMeasure::D).unwrap());
        let dummy = TruthTable::from_fn(3, |r| ((r >> 2) ^ (r >> 1)) & 1 == 1);
        assert!(!solve_xor(2, &dummy, SizeMeasure::D).unwrap());
    }

    #[test]
    fn xor4_over_xor3_is_rejected() {
        assert!(!solve_xor(3, &xor_tt(4), SizeMeasure::D).unwrap());
    }

    #[test]
    fn witness_passes_recheck() {
        let cat = Catalog::xor(2, SizeMeasure::D).unwrap();
        let i = inst(xor_tt(2), xor_or_y(), cat.clone());
        let (c, pi) = witness(&i).unwrap().unwrap();
        assert_eq!(c.size(SizeMeasure::D), 4);
        assert!(check_witness(&i, &c, &pi));
        assert!(witness(&inst(xor_tt(2), xor_tt(3), cat.clone())).unwrap().is_none());
        let (c, pi) = witness(&inst(xor_tt(2), xor_tt(2), cat.clone())).unwrap().unwrap();
        assert!(check_witness(&inst(xor_tt(2), xor_tt(2), cat), &c, &pi));
    }

    #[test]
    fn or_catalog_matches_oracle() {
        for measure in [SizeMeasure::D, SizeMeasure::R] {
            let cat = Catalog::or2(measure);
            let got: HashSet<Vec<u8>> = cat.classes.iter().map(|c| c.canonical_form()).collect();
            let want: HashSet<Vec<u8>> = enumerate_optimal_circuits(&or_tt(2), measure)
                .unwrap()
                .iter()
                .map(|c| c.canonical_form())
                .collect();
            assert_eq!(got, want, "{measure}");
        }
    }

    #[test]
    fn mismatched_catalog_is_an_error() {
        let cat = Catalog::xor(2, SizeMeasure::D).unwrap();
        let mut i = inst(xor_tt(2), xor_or_y(), cat.clone());
        i.measure = SizeMeasure::R;
        assert!(matches!(solve(&i), Err(SolverError::MeasureMismatch { .. })));
        let i = inst(or_tt(2), or_tt(3), cat);
        assert!(matches!(solve(&i), Err(SolverError::CatalogMismatch)));
    }

    #[test]
    fn three_variable_sweep_agrees_with_bruteforce() {
        for (f, cat) in [(xor_tt(2), Catalog::xor(2, SizeMeasure::D).unwrap()), (or_tt(2), Catalog::or2(SizeMeasure::D))] {
            let idx = ExtensionIndex::build(&cat, &f, 1).unwrap();
            assert!(idx.within_budget());
            for bits in 0..256u64 {
                let g = TruthTable::from_u64(3, bits);
                let want = is_simple_extension_bruteforce(&f, &g, SizeMeasure::D).unwrap();
                let i = inst(f.clone(), g.clone(), cat.clone());
                let report = solve_report(&i, SolveOptions { exhaustive: true }).unwrap();
                assert_eq!(report.verdict, want, "g={g}");
                assert_eq!(idx.solve(&g).unwrap(), want, "g={g}");
                if let Some((c, pi)) = &report.witness {
                    assert!(check_witness(&i, c, pi));
                }
            }
        }
    }

    #[test]
    fn second_measure_small_sweep() {
        let cat = Catalog::or2(SizeMeasure::R);
        let f = or_tt(2);
        let idx = ExtensionIndex::build(&cat, &f, 1).unwrap();
        for bits in 0..256u64 {
            let g = TruthTable::from_u64(3, bits);
            let want = is_simple_extension_bruteforce(&f, &g, SizeMeasure::R).unwrap();
            assert_eq!(idx.solve(&g).unwrap(), want, "g={g}");
        }
    }
}
