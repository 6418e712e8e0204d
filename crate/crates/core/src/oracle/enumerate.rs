//! Exhaustive search for every optimal circuit of a small function.
//!
//! Binary-gate measure: circuits are built in signal form, one AND-type
//! gate at a time (an AND of two literals). NOT gates are free, so each
//! gate is only fixed up to complement at this stage; the AND/OR choice of
//! every gate is expanded afterwards and each labeling is materialized
//! with one NOT per negatively read node. All-gate measure: gates, NOTs
//! included, are enumerated directly.
//!
//! Both searches order gates canonically: a gate either reads its
//! predecessor or has a larger key. Swapping two adjacent independent gates
//! that break the rule gives a lexicographically smaller key sequence, so
//! every circuit keeps at least one admissible order.

use std::collections::{BTreeMap, BTreeSet};

use crate::circuit::{Circuit, Gate, GateId, SizeMeasure, VarRef};
use crate::sig::{Lit, Op, SigCircuit, SigNode};
use crate::tt::TruthTable;

use super::{exact_cc, OracleError};

/// Largest optimal size the enumerator accepts.
pub const ENUMERATION_CAP: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct AndGate {
    a: usize,
    b: usize,
    pa: bool,
    pb: bool,
}

struct Search<'a> {
    n: usize,
    size: usize,
    mask: u64,
    funcs: Vec<u64>,
    norms: Vec<u64>,
    gates: Vec<AndGate>,
    uses: Vec<u32>,
    required: u64,
    accept: &'a dyn Fn(u64) -> bool,
    found: Vec<(Vec<AndGate>, u64)>,
}

impl Search<'_> {
    fn norm(&self, f: u64) -> u64 {
        if f & 1 == 1 {
            !f & self.mask
        } else {
            f
        }
    }

    fn unused(&self) -> usize {
        let ins = (0..self.n).filter(|&i| self.required >> i & 1 == 1 && self.uses[i] == 0).count();
        ins + self.uses[self.n..].iter().filter(|&&u| u == 0).count()
    }

    fn run(&mut self) {
        let t = self.gates.len();
        let nodes = self.n + t;
        let prev = self.gates.last().copied();
        for a in 0..nodes {
            for b in a + 1..nodes {
                for (pa, pb) in [(false, false), (false, true), (true, false), (true, true)] {
                    let g = AndGate { a, b, pa, pb };
                    if let Some(p) = prev {
                        let last = nodes - 1;
                        if a != last && b != last && g <= p {
                            continue;
                        }
                    }
                    let la = if pa { !self.funcs[a] & self.mask } else { self.funcs[a] };
                    let lb = if pb { !self.funcs[b] & self.mask } else { self.funcs[b] };
                    let f = la & lb;
                    let nf = self.norm(f);
                    if nf == 0 || self.norms.contains(&nf) {
                        continue;
                    }
                    self.push(g, f, nf);
                    let left = self.size - self.gates.len();
                    let unused = self.unused();
                    if unused <= left + 1 {
                        if left == 0 {
                            if unused == 1 && (self.accept)(nf) {
                                self.found.push((self.gates.clone(), f));
                            }
                        } else {
                            self.run();
                        }
                    }
                    self.pop();
                }
            }
        }
    }

    fn push(&mut self, g: AndGate, f: u64, nf: u64) {
        self.uses[g.a] += 1;
        self.uses[g.b] += 1;
        self.uses.push(0);
        self.funcs.push(f);
        self.norms.push(nf);
        self.gates.push(g);
    }

    fn pop(&mut self) {
        let g = self.gates.pop().unwrap();
        self.uses.pop();
        self.funcs.pop();
        self.norms.pop();
        self.uses[g.a] -= 1;
        self.uses[g.b] -= 1;
    }
}

fn mask_of(n: usize) -> u64 {
    if n == 6 {
        u64::MAX
    } else {
        (1u64 << (1 << n)) - 1
    }
}

fn support(t: &TruthTable) -> u64 {
    (0..t.num_vars()).filter(|&i| t.depends_on(i + 1).unwrap_or(false)).fold(0, |m, i| m | 1 << i)
}

/// Structures of exactly `size` AND-type gates whose last gate computes an
/// accepted function up to complement.
fn d_structures(n: usize, size: usize, required: u64, accept: &dyn Fn(u64) -> bool) -> Vec<(Vec<AndGate>, u64)> {
    let mask = mask_of(n);
    let funcs: Vec<u64> = (0..n).map(|i| TruthTable::var(n, i).as_u64()).collect();
    let norms = funcs.iter().map(|&f| if f & 1 == 1 { !f & mask } else { f }).collect();
    let mut s = Search {
        n,
        size,
        mask,
        funcs,
        norms,
        gates: Vec::new(),
        uses: vec![0; n],
        required,
        accept,
        found: Vec::new(),
    };
    s.run();
    s.found
}

/// Every AND/OR labeling of one structure, materialized.
fn expand(n: usize, vars: &[VarRef], gates: &[AndGate], out_neg: bool) -> Vec<Circuit> {
    let mut used = vec![false; n];
    for g in gates {
        for x in [g.a, g.b] {
            if x < n {
                used[x] = true;
            }
        }
    }
    let mut index = vec![usize::MAX; n + gates.len()];
    let mut inputs = Vec::new();
    for i in 0..n {
        if used[i] {
            index[i] = inputs.len();
            inputs.push(SigNode::Input(vars[i]));
        }
    }
    let base = inputs.len();
    for (k, slot) in index[n..].iter_mut().enumerate() {
        *slot = base + k;
    }
    let s = gates.len();
    let mut out = Vec::with_capacity(1 << s);
    for labels in 0u32..1 << s {
        let flipped = |x: usize| x >= n && labels >> (x - n) & 1 == 1;
        let mut nodes = inputs.clone();
        for (k, g) in gates.iter().enumerate() {
            let la = Lit { node: index[g.a], neg: g.pa ^ flipped(g.a) };
            let lb = Lit { node: index[g.b], neg: g.pb ^ flipped(g.b) };
            let node = if labels >> k & 1 == 1 {
                SigNode::Gate { op: Op::Or, inputs: [la.negate(), lb.negate()] }
            } else {
                SigNode::Gate { op: Op::And, inputs: [la, lb] }
            };
            nodes.push(node);
        }
        let last = n + s - 1;
        let output = Lit { node: index[last], neg: out_neg ^ flipped(last) };
        out.push(SigCircuit { nodes, output }.to_circuit());
    }
    out
}

fn trivial(t: &TruthTable, vars: &[VarRef]) -> Circuit {
    let mut gates = BTreeMap::new();
    if let Some(c) = t.is_constant() {
        gates.insert(GateId(0), Gate::constant(c));
        return Circuit { gates, output: GateId(0) };
    }
    let n = t.num_vars();
    for (i, v) in vars.iter().enumerate() {
        let x = TruthTable::var(n, i);
        if *t == x {
            gates.insert(GateId(0), Gate::input(*v));
            return Circuit { gates, output: GateId(0) };
        }
        if *t == x.not() {
            gates.insert(GateId(0), Gate::input(*v));
            gates.insert(GateId(1), Gate::not(GateId(0)));
            return Circuit { gates, output: GateId(1) };
        }
    }
    unreachable!("size-0 function is a constant or literal")
}

fn dedupe(cs: impl IntoIterator<Item = Circuit>) -> Vec<Circuit> {
    let mut seen = BTreeMap::new();
    for c in cs {
        seen.entry(c.canonical_form()).or_insert(c);
    }
    seen.into_values().collect()
}

fn optimal_size(t: &TruthTable, measure: SizeMeasure) -> Result<usize, OracleError> {
    let size = exact_cc(t, measure, ENUMERATION_CAP)?;
    match size {
        Some(s) => Ok(s),
        None => {
            let lower = exact_cc(t, measure, usize::MAX).unwrap_or(None).unwrap_or(ENUMERATION_CAP + 1);
            Err(OracleError::Budget { size: lower, cap: ENUMERATION_CAP })
        }
    }
}

/// Every normalized optimal circuit for `t` over `x1..xn`, one per
/// labeled isomorphism class, ordered by canonical form.
pub fn enumerate_optimal_circuits(t: &TruthTable, measure: SizeMeasure) -> Result<Vec<Circuit>, OracleError> {
    let vars: Vec<VarRef> = (1..=t.num_vars() as u32).map(VarRef::x).collect();
    enumerate_optimal_with_vars(t, measure, &vars)
}

/// As [`enumerate_optimal_circuits`], with row bits taken from `vars`.
pub fn enumerate_optimal_with_vars(
    t: &TruthTable,
    measure: SizeMeasure,
    vars: &[VarRef],
) -> Result<Vec<Circuit>, OracleError> {
    Ok(enumerate_optimal_batch(std::slice::from_ref(t), measure, vars)?.pop().unwrap())
}

/// Optimal circuits for many functions of the same arity. Targets of equal
/// size share one search.
pub fn enumerate_optimal_batch(
    targets: &[TruthTable],
    measure: SizeMeasure,
    vars: &[VarRef],
) -> Result<Vec<Vec<Circuit>>, OracleError> {
    let mut out = vec![Vec::new(); targets.len()];
    let mut by_size: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in targets.iter().enumerate() {
        assert_eq!(t.num_vars(), vars.len(), "one variable per row bit");
        let s = optimal_size(t, measure)?;
        if s == 0 {
            out[i] = vec![trivial(t, vars)];
        } else {
            by_size.entry(s).or_default().push(i);
        }
    }
    for (size, idx) in by_size {
        match measure {
            SizeMeasure::D => d_batch(targets, vars, size, &idx, &mut out),
            SizeMeasure::R => {
                for &i in &idx {
                    out[i] = r_enumerate(&targets[i], vars, size);
                }
            }
        }
    }
    Ok(out)
}

fn d_batch(targets: &[TruthTable], vars: &[VarRef], size: usize, idx: &[usize], out: &mut [Vec<Circuit>]) {
    let n = vars.len();
    let mask = mask_of(n);
    let norm = |f: u64| if f & 1 == 1 { !f & mask } else { f };
    let wanted: BTreeSet<u64> = idx.iter().map(|&i| norm(targets[i].as_u64())).collect();
    let required = idx.iter().map(|&i| support(&targets[i])).fold(u64::MAX, |a, b| a & b);
    let found = d_structures(n, size, required, &|f| wanted.contains(&f));
    let mut acc: BTreeMap<usize, Vec<Circuit>> = BTreeMap::new();
    for (gates, f) in found {
        let mut reads = 0u64;
        for g in &gates {
            for x in [g.a, g.b] {
                if x < n {
                    reads |= 1 << x;
                }
            }
        }
        for &i in idx {
            let t = targets[i].as_u64();
            if norm(t) == norm(f) && reads == support(&targets[i]) {
                acc.entry(i).or_default().extend(expand(n, vars, &gates, f != t));
            }
        }
    }
    for (i, cs) in acc {
        out[i] = dedupe(cs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RGate {
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
}

impl RGate {
    fn reads(self) -> Vec<usize> {
        match self {
            RGate::Not(a) => vec![a],
            RGate::And(a, b) | RGate::Or(a, b) => vec![a, b],
        }
    }
}

struct RSearch<'a> {
    n: usize,
    size: usize,
    mask: u64,
    target: u64,
    required: u64,
    funcs: Vec<u64>,
    gates: Vec<RGate>,
    uses: Vec<u32>,
    vars: &'a [VarRef],
    found: Vec<Circuit>,
}

impl RSearch<'_> {
    fn run(&mut self) {
        let nodes = self.funcs.len();
        let last = nodes - 1;
        let prev = self.gates.last().copied();
        let mut cands = Vec::new();
        for a in 0..nodes {
            cands.push(RGate::Not(a));
            for b in a + 1..nodes {
                cands.push(RGate::And(a, b));
                cands.push(RGate::Or(a, b));
            }
        }
        for g in cands {
            if let Some(p) = prev {
                if nodes > self.n && !g.reads().contains(&last) && g <= p {
                    continue;
                }
            }
            let f = match g {
                RGate::Not(a) => !self.funcs[a] & self.mask,
                RGate::And(a, b) => self.funcs[a] & self.funcs[b],
                RGate::Or(a, b) => self.funcs[a] | self.funcs[b],
            };
            if f == 0 || f == self.mask || self.funcs.contains(&f) {
                continue;
            }
            for x in g.reads() {
                self.uses[x] += 1;
            }
            self.uses.push(0);
            self.funcs.push(f);
            self.gates.push(g);
            let left = self.size - self.gates.len();
            let ins = (0..self.n).filter(|&i| self.required >> i & 1 == 1 && self.uses[i] == 0).count();
            let unused = ins + self.uses[self.n..].iter().filter(|&&u| u == 0).count();
            if unused <= left + 1 {
                if left == 0 {
                    if unused == 1 && f == self.target {
                        self.found.push(self.materialize());
                    }
                } else {
                    self.run();
                }
            }
            self.gates.pop();
            self.funcs.pop();
            self.uses.pop();
            for x in g.reads() {
                self.uses[x] -= 1;
            }
        }
    }

    fn materialize(&self) -> Circuit {
        let mut gates = BTreeMap::new();
        let mut id = vec![GateId(u32::MAX); self.funcs.len()];
        let mut next = 0u32;
        for i in 0..self.n {
            if self.uses[i] > 0 {
                id[i] = GateId(next);
                gates.insert(GateId(next), Gate::input(self.vars[i]));
                next += 1;
            }
        }
        for (k, g) in self.gates.iter().enumerate() {
            let gate = match *g {
                RGate::Not(a) => Gate::not(id[a]),
                RGate::And(a, b) => Gate::and(id[a], id[b]),
                RGate::Or(a, b) => Gate::or(id[a], id[b]),
            };
            id[self.n + k] = GateId(next);
            gates.insert(GateId(next), gate);
            next += 1;
        }
        Circuit { gates, output: GateId(next - 1) }
    }
}

fn r_enumerate(t: &TruthTable, vars: &[VarRef], size: usize) -> Vec<Circuit> {
    let n = vars.len();
    let funcs: Vec<u64> = (0..n).map(|i| TruthTable::var(n, i).as_u64()).collect();
    let mut s = RSearch {
        n,
        size,
        mask: mask_of(n),
        target: t.as_u64(),
        required: support(t),
        funcs,
        gates: Vec::new(),
        uses: vec![0; n],
        vars,
        found: Vec::new(),
    };
    s.run();
    dedupe(s.found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::match_rules;

    fn xor_tt(n: usize) -> TruthTable {
        TruthTable::from_fn(n, |r| r.count_ones() % 2 == 1)
    }

    fn check_all(t: &TruthTable, measure: SizeMeasure, cs: &[Circuit]) {
        let vars: Vec<_> = (1..=t.num_vars() as u32).map(VarRef::x).collect();
        let size = exact_cc(t, measure, 99).unwrap().unwrap();
        for c in cs {
            let used: Vec<_> = vars.iter().copied().filter(|v| c.variables().contains(v)).collect();
            let full = if used.len() == vars.len() { c.truth_table(&vars).unwrap() } else { eval_over(c, &vars) };
            assert_eq!(&full, t, "{}", c.to_bcir());
            assert_eq!(c.size(measure), size);
            assert!(match_rules(c).is_empty(), "{}", c.to_bcir());
        }
    }

    fn eval_over(c: &Circuit, vars: &[VarRef]) -> TruthTable {
        let n = vars.len();
        TruthTable::from_fn(n, |r| {
            let a = vars.iter().enumerate().map(|(i, v)| (*v, (r >> (n - 1 - i)) & 1 == 1)).collect();
            c.evaluate(&a).unwrap()
        })
    }

    #[test]
    fn and2_optimal_circuits() {
        let t = TruthTable::from_fn(2, |r| r == 3);
        let cs = enumerate_optimal_circuits(&t, SizeMeasure::R).unwrap();
        assert_eq!(cs.len(), 1);
        let mut b = crate::circuit::Builder::new();
        let (x, y) = (b.input(VarRef::x(1)), b.input(VarRef::x(2)));
        let g = b.and(x, y);
        assert_eq!(cs[0].canonical_form(), b.finish(g).canonical_form());
        // free negations also admit NOT(OR(NOT x1, NOT x2))
        let cs = enumerate_optimal_circuits(&t, SizeMeasure::D).unwrap();
        assert_eq!(cs.len(), 2);
        check_all(&t, SizeMeasure::D, &cs);
    }

    /// The table and the structural search are independent; the first size
    /// at which the search reaches a function must be its table entry.
    #[test]
    fn search_reproduces_three_variable_table() {
        let mut first = vec![u8::MAX; 256];
        for k in 1..=6 {
            for (_, f) in d_structures(3, k, 0, &|_| true) {
                for g in [f, !f & 0xff] {
                    if first[g as usize] == u8::MAX {
                        first[g as usize] = k as u8;
                    }
                }
            }
        }
        let t = super::super::table(3, SizeMeasure::D).unwrap();
        for f in 0..256u64 {
            let want = t.get(f).unwrap();
            if want > 0 {
                assert_eq!(first[f as usize], want, "{f:08b}");
            }
        }
    }

    #[test]
    fn xor_circuits_are_optimal_and_normalized() {
        for n in [2, 3] {
            for t in [xor_tt(n), xor_tt(n).not()] {
                let cs = enumerate_optimal_circuits(&t, SizeMeasure::D).unwrap();
                assert!(!cs.is_empty());
                check_all(&t, SizeMeasure::D, &cs);
            }
        }
        let cs = enumerate_optimal_circuits(&xor_tt(2), SizeMeasure::D).unwrap();
        let want = crate::circuit::xor2_circuit().canonical_form();
        assert!(cs.iter().any(|c| c.canonical_form() == want));
    }

    #[test]
    fn r_circuits_are_optimal() {
        for t in [xor_tt(2), xor_tt(2).not(), TruthTable::from_fn(2, |r| r != 3)] {
            let cs = enumerate_optimal_circuits(&t, SizeMeasure::R).unwrap();
            assert!(!cs.is_empty());
            check_all(&t, SizeMeasure::R, &cs);
        }
    }

    #[test]
    fn trivial_targets() {
        let x = TruthTable::var(2, 1);
        let cs = enumerate_optimal_circuits(&x.not(), SizeMeasure::D).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].size(SizeMeasure::R), 1);
        let cs = enumerate_optimal_circuits(&x.not(), SizeMeasure::R).unwrap();
        assert_eq!(cs.len(), 1);
        let cs = enumerate_optimal_circuits(&TruthTable::constant(2, true), SizeMeasure::D).unwrap();
        assert_eq!(cs.len(), 1);
    }

    /// Independent cross-check on two variables: enumerate every circuit of
    /// the optimal size in explicit form and compare classes.
    #[test]
    fn batch_matches_single() {
        let ts: Vec<TruthTable> = (0..16).map(|f| TruthTable::from_u64(2, f)).collect();
        let vars = [VarRef::x(1), VarRef::x(2)];
        let batch = enumerate_optimal_batch(&ts, SizeMeasure::D, &vars).unwrap();
        for (t, cs) in ts.iter().zip(&batch) {
            let single = enumerate_optimal_circuits(t, SizeMeasure::D).unwrap();
            let a: Vec<_> = cs.iter().map(|c| c.canonical_form()).collect();
            let b: Vec<_> = single.iter().map(|c| c.canonical_form()).collect();
            assert_eq!(a, b);
            check_all(t, SizeMeasure::D, cs);
        }
    }

    #[test]
    fn over_budget() {
        let t = TruthTable::from_fn(4, |r| r.count_ones() % 2 == 1);
        assert!(matches!(enumerate_optimal_circuits(&t, SizeMeasure::D), Err(OracleError::Budget { .. })));
    }
}
