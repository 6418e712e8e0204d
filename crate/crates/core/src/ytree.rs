//! All-stops restrictions and Y-tree decompositions of optimal
//! simple-extension circuits.
//!
//! An all-stops restriction substitutes the extension variables one at a
//! time, each substitution removing exactly one binary gate through a
//! passing rule. Replaying it backwards grows the Y-trees: a passing gate
//! either becomes a new combiner or extends the tree it sits on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateId, GateKind, SizeMeasure, VarRef};
use crate::rewrite::{normalize, restrict_one, Restriction, RuleId, Slot, Step, FIX_NOT_0, FIX_NOT_1, PRUNE_NOT};
use crate::tt::{find_keys, Key, TruthTable, TtError};

#[derive(Debug, Error)]
pub enum YTreeError {
    #[error("no key given")]
    NoKey,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed decomposition: {0}")]
    Malformed(String),
    #[error("formula: {0}")]
    Formula(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Tt(#[from] TtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    And,
    Or,
}

impl BinOp {
    pub fn kind(self) -> GateKind {
        match self {
            BinOp::And => GateKind::And,
            BinOp::Or => GateKind::Or,
        }
    }

    pub fn from_kind(k: GateKind) -> Option<BinOp> {
        match k {
            GateKind::And => Some(BinOp::And),
            GateKind::Or => Some(BinOp::Or),
            _ => None,
        }
    }
}

/// Read-once formula with optional edge negations. Leaves are unlabeled
/// (`var: None`) in implicit codes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Leaf { neg: bool, var: Option<VarRef> },
    Node { neg: bool, op: BinOp, kids: Box<[Formula; 2]> },
}

impl Formula {
    pub fn leaf(var: Option<VarRef>) -> Self {
        Formula::Leaf { neg: false, var }
    }

    pub fn node(op: BinOp, a: Formula, b: Formula) -> Self {
        Formula::Node { neg: false, op, kids: Box::new([a, b]) }
    }

    pub fn neg(&self) -> bool {
        match self {
            Formula::Leaf { neg, .. } | Formula::Node { neg, .. } => *neg,
        }
    }

    pub fn with_neg(mut self, v: bool) -> Self {
        match &mut self {
            Formula::Leaf { neg, .. } | Formula::Node { neg, .. } => *neg = v,
        }
        self
    }

    pub fn leaves(&self) -> usize {
        match self {
            Formula::Leaf { .. } => 1,
            Formula::Node { kids, .. } => kids[0].leaves() + kids[1].leaves(),
        }
    }

    /// Binary gates the formula costs.
    pub fn internal(&self) -> usize {
        self.leaves() - 1
    }

    pub fn vars(&self) -> Vec<Option<VarRef>> {
        let mut out = Vec::new();
        self.walk_leaves(&mut |v| out.push(v));
        out
    }

    fn walk_leaves(&self, f: &mut impl FnMut(Option<VarRef>)) {
        match self {
            Formula::Leaf { var, .. } => f(*var),
            Formula::Node { kids, .. } => {
                kids[0].walk_leaves(f);
                kids[1].walk_leaves(f);
            }
        }
    }

    pub fn is_monotone(&self) -> bool {
        match self {
            Formula::Leaf { neg, .. } => !neg,
            Formula::Node { neg, kids, .. } => !neg && kids[0].is_monotone() && kids[1].is_monotone(),
        }
    }

    /// Labels leaves left to right from `vars`.
    pub fn labeled(&self, vars: &mut impl Iterator<Item = VarRef>) -> Formula {
        match self {
            Formula::Leaf { neg, .. } => Formula::Leaf { neg: *neg, var: vars.next() },
            Formula::Node { neg, op, kids } => Formula::Node {
                neg: *neg,
                op: *op,
                kids: Box::new([kids[0].labeled(vars), kids[1].labeled(vars)]),
            },
        }
    }

    /// Adds the gates of the formula to `c` and returns its root. Every
    /// leaf needs a label.
    pub fn build(&self, c: &mut Circuit) -> Result<GateId, YTreeError> {
        let (id, neg) = match self {
            Formula::Leaf { neg, var } => {
                let v = var.ok_or_else(|| YTreeError::Formula("unlabeled leaf".into()))?;
                (push(c, Gate::input(v)), *neg)
            }
            Formula::Node { neg, op, kids } => {
                let a = kids[0].build(c)?;
                let b = kids[1].build(c)?;
                let g = Gate { kind: op.kind(), inputs: vec![a, b] };
                (push(c, g), *neg)
            }
        };
        Ok(if neg { push(c, Gate::not(id)) } else { id })
    }

    /// The formula rooted at `root`; fails on anything that is not a tree
    /// of AND/OR/NOT over variables.
    pub fn from_circuit(c: &Circuit, root: GateId) -> Result<Formula, YTreeError> {
        let g = c.gate(root)?;
        match g.kind {
            GateKind::Input(v) => Ok(Formula::Leaf { neg: false, var: Some(v) }),
            GateKind::Not => {
                let inner = Formula::from_circuit(c, g.inputs[0])?;
                if inner.neg() {
                    return Err(YTreeError::Formula(format!("double negation at {root}")));
                }
                Ok(inner.with_neg(true))
            }
            GateKind::And | GateKind::Or => Ok(Formula::node(
                BinOp::from_kind(g.kind).unwrap(),
                Formula::from_circuit(c, g.inputs[0])?,
                Formula::from_circuit(c, g.inputs[1])?,
            )),
            GateKind::Const(_) => Err(YTreeError::Formula(format!("constant at {root}"))),
        }
    }
}

pub(crate) fn push(c: &mut Circuit, g: Gate) -> GateId {
    let id = c.next_id();
    c.gates.insert(id, g);
    id
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.neg() {
            f.write_str("!")?;
        }
        match self {
            Formula::Leaf { var: Some(v), .. } => write!(f, "{v}"),
            Formula::Leaf { var: None, .. } => f.write_str("_"),
            Formula::Node { op, kids, .. } => {
                let sym = if *op == BinOp::And { '&' } else { '|' };
                write!(f, "({}{sym}{})", kids[0], kids[1])
            }
        }
    }
}

impl FromStr for Formula {
    type Err = YTreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let f = parse_formula(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(YTreeError::Formula(format!("trailing input in {s:?}")));
        }
        Ok(f)
    }
}

fn parse_formula(s: &[char], pos: &mut usize) -> Result<Formula, YTreeError> {
    let bad = |msg: &str| YTreeError::Formula(msg.to_string());
    let mut neg = false;
    if s.get(*pos) == Some(&'!') {
        neg = true;
        *pos += 1;
    }
    match s.get(*pos) {
        Some('(') => {
            *pos += 1;
            let a = parse_formula(s, pos)?;
            let op = match s.get(*pos) {
                Some('&') => BinOp::And,
                Some('|') => BinOp::Or,
                _ => return Err(bad("expected & or |")),
            };
            *pos += 1;
            let b = parse_formula(s, pos)?;
            if s.get(*pos) != Some(&')') {
                return Err(bad("expected )"));
            }
            *pos += 1;
            Ok(Formula::node(op, a, b).with_neg(neg))
        }
        Some('_') => {
            *pos += 1;
            Ok(Formula::Leaf { neg, var: None })
        }
        Some(_) => {
            let start = *pos;
            while *pos < s.len() && s[*pos].is_ascii_alphanumeric() {
                *pos += 1;
            }
            let name: String = s[start..*pos].iter().collect();
            let var: VarRef = name.parse().map_err(|_| bad(&format!("bad variable {name:?}")))?;
            Ok(Formula::Leaf { neg, var: Some(var) })
        }
        None => Err(bad("unexpected end")),
    }
}

/// One substitution of an all-stops restriction.
#[derive(Debug, Clone)]
pub struct Stop {
    pub var: VarRef,
    pub value: bool,
    /// Circuit just before the substitution.
    pub before: Circuit,
    /// The gate removed by the passing rule, and the node it passed on.
    pub alpha: GateId,
    pub gamma: GateId,
    pub kappa: GateId,
}

#[derive(Debug, Clone)]
pub struct AllStops {
    pub restriction: Restriction,
    pub stops: Vec<Stop>,
    /// The restricted circuit; its gate ids are those of the input.
    pub result: Circuit,
}

fn ext_vars(m: usize) -> Vec<VarRef> {
    (1..=m as u32).map(VarRef::y).collect()
}

/// The binary gate reading `v` directly or through one NOT.
fn ext_reader(c: &Circuit, v: VarRef) -> Result<GateId, YTreeError> {
    let inputs: Vec<GateId> =
        c.gates.iter().filter(|(_, g)| g.kind == GateKind::Input(v)).map(|(id, _)| *id).collect();
    let mut costly = Vec::new();
    for id in inputs {
        for (r, _) in c.readers(id) {
            if c.gates[&r].kind == GateKind::Not {
                costly.extend(c.readers(r).into_iter().map(|(q, _)| q));
            } else {
                costly.push(r);
            }
        }
    }
    match costly.as_slice() {
        [a] if c.gates[a].kind.is_binary() => Ok(*a),
        _ => Err(YTreeError::Precondition(format!("{v} is not read exactly once"))),
    }
}

/// Checks one substitution: a single passing elimination at `alpha`,
/// optionally preceded by a constant negation and followed by a double
/// negation. Returns the binding of the passing step.
fn simple_stop(before: &Circuit, after: &Circuit, rec: &Restriction, alpha: GateId) -> Option<(GateId, GateId)> {
    if before.size(SizeMeasure::D) != after.size(SizeMeasure::D) + 1 {
        return None;
    }
    let ges: Vec<(RuleId, &BTreeMap<Slot, GateId>)> = rec
        .steps
        .iter()
        .filter_map(|s| match s {
            Step::Ge { rule, binding } => Some((*rule, binding)),
            _ => None,
        })
        .collect();
    let mut i = 0;
    if ges.get(i).map_or(false, |(r, _)| *r == FIX_NOT_0 || *r == FIX_NOT_1) {
        i += 1;
    }
    let (rule, b) = ges.get(i)?;
    if !rule.is_passing() || b[&Slot::Alpha] != alpha {
        return None;
    }
    let hit = (b[&Slot::Gamma], b[&Slot::Kappa]);
    i += 1;
    if ges.get(i).map_or(false, |(r, _)| *r == PRUNE_NOT) {
        i += 1;
    }
    (i == ges.len()).then_some(hit)
}

fn current_tt(c: &Circuit, n: usize, ys: &[VarRef]) -> Result<TruthTable, YTreeError> {
    let mut order: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
    order.extend_from_slice(ys);
    Ok(c.truth_table(&order)?)
}

/// The all-stops construction, keeping the intermediate circuits.
pub fn all_stops(g: &Circuit, f: &TruthTable, keys: &[Key]) -> Result<AllStops, YTreeError> {
    let first = keys.first().ok_or(YTreeError::NoKey)?;
    let n = f.num_vars();
    let m = first.0.len();
    let (mut cur, rec) = normalize(g);
    let mut steps = rec.steps;
    let mut stops = Vec::new();
    let mut left = ext_vars(m);
    let mut live: Vec<Key> = keys.to_vec();
    while !left.is_empty() {
        let depth = cur.depths()?;
        let mut pick: Option<(usize, usize, GateId)> = None;
        for (pos, &v) in left.iter().enumerate() {
            let a = ext_reader(&cur, v)?;
            if pick.map_or(true, |(d, _, _)| depth[&a] > d) {
                pick = Some((depth[&a], pos, a));
            }
        }
        let (_, pos, alpha) = pick.unwrap();
        let yi = left[pos];

        // Keys are over `left`, in order; the least key whose value passes wins.
        let mut done = false;
        let mut tried = [false; 2];
        for k in &live {
            let value = k.0[pos];
            if tried[usize::from(value)] {
                continue;
            }
            tried[usize::from(value)] = true;
            let (next, r) = restrict_one(&cur, yi, value);
            if let Some((gamma, kappa)) = simple_stop(&cur, &next, &r, alpha) {
                stops.push(Stop { var: yi, value, before: cur.clone(), alpha, gamma, kappa });
                steps.extend(r.steps);
                cur = next;
                left.remove(pos);
                done = true;
                break;
            }
        }
        if !done {
            // Layer tie: the other input of alpha is the other extension
            // variable; substitute it first, then yi.
            let other = cur.gates[&alpha]
                .inputs
                .iter()
                .map(|&i| strip_not(&cur, i))
                .find_map(|i| match cur.gates[&i].kind {
                    GateKind::Input(v) if v.is_ext() && v != yi => Some(v),
                    _ => None,
                })
                .ok_or_else(|| YTreeError::Precondition(format!("no passing key for {yi}")))?;
            let mut found = None;
            'outer: for sj in [false, true] {
                let (c1, r1) = restrict_one(&cur, other, sj);
                let Some((g1, k1)) = simple_stop(&cur, &c1, &r1, alpha) else {
                    continue;
                };
                let a2 = ext_reader(&c1, yi)?;
                for si in [false, true] {
                    let (c2, r2) = restrict_one(&c1, yi, si);
                    let Some((g2, k2)) = simple_stop(&c1, &c2, &r2, a2) else {
                        continue;
                    };
                    let rest: Vec<VarRef> = left.iter().copied().filter(|&v| v != yi && v != other).collect();
                    let ks = find_keys(&current_tt(&c2, n, &rest)?, f)?;
                    if !ks.is_empty() {
                        found = Some((sj, c1, r1, (g1, k1), si, a2, c2, r2, (g2, k2)));
                        break 'outer;
                    }
                }
            }
            let (sj, c1, r1, (g1, k1), si, a2, c2, r2, (g2, k2)) =
                found.ok_or_else(|| YTreeError::Precondition(format!("no all-stops order at {yi}")))?;
            stops.push(Stop { var: other, value: sj, before: cur.clone(), alpha, gamma: g1, kappa: k1 });
            stops.push(Stop { var: yi, value: si, before: c1, alpha: a2, gamma: g2, kappa: k2 });
            steps.extend(r1.steps);
            steps.extend(r2.steps);
            cur = c2;
            left.retain(|&v| v != yi && v != other);
        }
        live = find_keys(&current_tt(&cur, n, &left)?, f)?;
        if live.is_empty() {
            return Err(YTreeError::Precondition("restriction lost every key".into()));
        }
    }
    Ok(AllStops { restriction: Restriction { steps }, stops, result: cur })
}

pub fn find_all_stops_restriction(g: &Circuit, f: &TruthTable, keys: &[Key]) -> Result<Restriction, YTreeError> {
    Ok(all_stops(g, f, keys)?.restriction)
}

pub(crate) fn strip_not(c: &Circuit, mut id: GateId) -> GateId {
    while let Some(g) = c.gates.get(&id) {
        if g.kind != GateKind::Not {
            break;
        }
        id = g.inputs[0];
    }
    id
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YTreeTriple {
    pub combiner: GateId,
    /// Input slot of the combiner holding the tree.
    pub side: usize,
    pub tree: Formula,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct YTreeDecomposition {
    pub triples: Vec<YTreeTriple>,
    pub weight: usize,
}

impl YTreeDecomposition {
    pub fn combiners(&self) -> Vec<GateId> {
        self.triples.iter().map(|t| t.combiner).collect()
    }

    pub fn triple(&self, delta: GateId) -> Option<&YTreeTriple> {
        self.triples.iter().find(|t| t.combiner == delta)
    }
}

impl fmt::Display for YTreeDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.triples {
            let side = if t.side == 0 { 'L' } else { 'R' };
            writeln!(f, "combiner={} side={side} tree={}", t.combiner, t.tree)?;
        }
        Ok(())
    }
}

fn tree_gates(c: &Circuit, root: GateId) -> BTreeSet<GateId> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if out.insert(id) {
            if let Some(g) = c.gates.get(&id) {
                stack.extend(g.inputs.iter().copied());
            }
        }
    }
    out
}

/// Replays the stops backwards, adding or widening triples.
pub fn decomposition_from_stops(stops: &AllStops) -> Result<YTreeDecomposition, YTreeError> {
    // (combiner, side) pairs; trees are read off the original circuit.
    let mut triples: Vec<(GateId, usize)> = Vec::new();
    for (k, stop) in stops.stops.iter().enumerate().rev() {
        let after = stops.stops.get(k + 1).map_or(&stops.result, |s| &s.before);
        // the NOT above gamma may be pruned away afterwards
        let beta = strip_not(&stop.before, stop.gamma);
        let owner = triples
            .iter()
            .position(|&(d, b)| tree_gates(after, after.gates[&d].inputs[b]).contains(&beta));
        if owner.is_none() {
            let g = &stop.before.gates[&stop.alpha];
            let side = g
                .inputs
                .iter()
                .position(|&i| i == stop.kappa)
                .ok_or_else(|| YTreeError::Malformed(format!("kappa not read by {}", stop.alpha)))?;
            triples.push((stop.alpha, side));
        }
    }
    let g = stops.stops.first().map_or(&stops.result, |s| &s.before);
    let mut out = YTreeDecomposition::default();
    for (d, b) in triples {
        let tree = Formula::from_circuit(g, g.gates[&d].inputs[b])?;
        out.weight += tree.leaves();
        out.triples.push(YTreeTriple { combiner: d, side: b, tree });
    }
    out.triples.sort_by_key(|t| t.combiner);
    Ok(out)
}

pub fn extract_ytree_decomposition(
    g: &Circuit,
    n: usize,
    m: usize,
    f: &TruthTable,
    keys: &[Key],
) -> Result<YTreeDecomposition, YTreeError> {
    if f.num_vars() != n || keys.first().map_or(false, |k| k.0.len() != m) {
        return Err(YTreeError::Precondition("arity mismatch".into()));
    }
    decomposition_from_stops(&all_stops(g, f, keys)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecompositionCheck {
    pub admissible: bool,
    pub weight: usize,
    pub total: bool,
}

/// Structural check of every triple and of non-intersection.
pub fn validate_decomposition(g: &Circuit, d: &YTreeDecomposition, n: usize, m: usize) -> DecompositionCheck {
    let mut seen: BTreeSet<VarRef> = BTreeSet::new();
    let mut ok = true;
    let mut weight = 0;
    for t in &d.triples {
        match admissible(g, t, n, m) {
            Some(vars) => {
                weight += vars.len();
                for v in vars {
                    ok &= seen.insert(v);
                }
            }
            None => ok = false,
        }
    }
    DecompositionCheck { admissible: ok, weight, total: ok && weight == m }
}

fn admissible(g: &Circuit, t: &YTreeTriple, n: usize, m: usize) -> Option<Vec<VarRef>> {
    let delta = g.gates.get(&t.combiner)?;
    if !delta.kind.is_binary() || t.side > 1 {
        return None;
    }
    let root = delta.inputs[t.side];
    if delta.inputs[1 - t.side] == root {
        return None;
    }
    let fo = g.fanouts();
    let gates = tree_gates(g, root);
    let mut vars = Vec::new();
    for &id in &gates {
        let x = &g.gates[&id];
        match x.kind {
            GateKind::Input(v) if v.is_ext() && (v.index as usize) <= m => vars.push(v),
            GateKind::And | GateKind::Or | GateKind::Not => {}
            _ => return None,
        }
        // a tree: one reader each, inside the tree or the combiner at the root
        if fo[&id] != 1 || id == g.output {
            return None;
        }
        let readers = g.readers(id);
        let inside = if id == root { readers[0].0 == t.combiner } else { gates.contains(&readers[0].0) };
        if !inside {
            return None;
        }
    }
    let mut sorted = vars.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != vars.len() {
        return None;
    }
    let other = tree_gates(g, delta.inputs[1 - t.side]);
    let has_base = other.iter().any(|id| {
        matches!(g.gates[id].kind, GateKind::Input(v) if !v.is_ext() && (v.index as usize) <= n)
    });
    if !has_base || Formula::from_circuit(g, root).ok()? != t.tree {
        return None;
    }
    Some(vars)
}

/// The origin of combiner `delta`: walk down the non-tree side, through
/// NOTs and stacked combiners, to the first gate of `original`.
pub fn origin_of(
    g: &Circuit,
    d: &YTreeDecomposition,
    delta: GateId,
    original: &BTreeSet<GateId>,
) -> Result<GateId, YTreeError> {
    let mut cur = delta;
    for _ in 0..=g.gates.len() {
        let t = d
            .triple(cur)
            .ok_or_else(|| YTreeError::Malformed(format!("{cur} is not a combiner")))?;
        let gate = g.gate(cur)?;
        let next = strip_not(g, gate.inputs[1 - t.side]);
        if original.contains(&next) {
            return Ok(next);
        }
        if d.triple(next).is_none() {
            return Err(YTreeError::Malformed(format!("walk from {delta} left the decomposition at {next}")));
        }
        cur = next;
    }
    Err(YTreeError::Malformed("combiner cycle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Builder;
    use crate::oracle::exact_cc;
    use crate::rewrite::check_record;
    use crate::xor::xor_tt;

    fn xor_base(b: &mut Builder) -> GateId {
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let n1 = b.not(x1);
        let n2 = b.not(x2);
        let a = b.and(x1, n2);
        let c = b.and(n1, x2);
        b.or(a, c)
    }

    fn keys_for(c: &Circuit, n: usize, m: usize, f: &TruthTable) -> Vec<Key> {
        find_keys(&current_tt(c, n, &ext_vars(m)).unwrap(), f).unwrap()
    }

    #[test]
    fn formula_text_roundtrip() {
        for s in ["y1", "!y2", "(y1&!y2)", "!(y1|(y2&y3))", "(_|!_)"] {
            let f: Formula = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("(y1&".parse::<Formula>().is_err());
        assert!("(y1^y2)".parse::<Formula>().is_err());
    }

    #[test]
    fn single_or_extension() {
        let mut b = Builder::new();
        let v = xor_base(&mut b);
        let y = b.input(VarRef::y(1));
        let o = b.or(v, y);
        let g = b.finish(o);
        let f = xor_tt(2);
        let keys = keys_for(&g, 2, 1, &f);
        assert_eq!(keys, vec![Key(vec![false])]);
        let stops = all_stops(&g, &f, &keys).unwrap();
        assert_eq!(stops.stops.len(), 1);
        assert_eq!(stops.result.size(SizeMeasure::D), 3);
        let vars = [VarRef::x(1), VarRef::x(2)];
        assert_eq!(stops.result.truth_table(&vars).unwrap(), f);
        assert_eq!(exact_cc(&f, SizeMeasure::D, 3).unwrap(), Some(3));
        let chk = check_record(&g, &stops.restriction).unwrap();
        assert!(chk.terminal && chk.layered);
        let d = decomposition_from_stops(&stops).unwrap();
        assert_eq!(d.triples, vec![YTreeTriple { combiner: o, side: 1, tree: "y1".parse().unwrap() }]);
        assert!(validate_decomposition(&g, &d, 2, 1).total);
        let original: BTreeSet<GateId> = stops.result.gates.keys().copied().collect();
        assert_eq!(origin_of(&g, &d, o, &original).unwrap(), v);
        assert_eq!(d.to_string(), format!("combiner={o} side=R tree=y1\n"));
    }

    #[test]
    fn stacked_extensions_go_deepest_first() {
        let mut b = Builder::new();
        let v = xor_base(&mut b);
        let y1 = b.input(VarRef::y(1));
        let y2 = b.input(VarRef::y(2));
        let o1 = b.or(v, y1);
        let o2 = b.or(o1, y2);
        let g = b.finish(o2);
        let f = xor_tt(2);
        let keys = keys_for(&g, 2, 2, &f);
        let stops = all_stops(&g, &f, &keys).unwrap();
        let vars: Vec<VarRef> = stops.stops.iter().map(|s| s.var).collect();
        assert_eq!(vars, vec![VarRef::y(1), VarRef::y(2)]);
        let sizes: Vec<usize> = stops.stops.iter().map(|s| s.before.size(SizeMeasure::D)).collect();
        assert_eq!(sizes, vec![5, 4]);
        let d = decomposition_from_stops(&stops).unwrap();
        assert_eq!(d.triples.len(), 2);
        let chk = validate_decomposition(&g, &d, 2, 2);
        assert!(chk.total);
        let original: BTreeSet<GateId> = stops.result.gates.keys().copied().collect();
        assert_eq!(origin_of(&g, &d, o1, &original).unwrap(), v);
        assert_eq!(origin_of(&g, &d, o2, &original).unwrap(), v);
    }

    #[test]
    fn two_leaf_tree() {
        let mut b = Builder::new();
        let v = xor_base(&mut b);
        let y1 = b.input(VarRef::y(1));
        let y2 = b.input(VarRef::y(2));
        let t = b.and(y1, y2);
        let o = b.or(v, t);
        let g = b.finish(o);
        let f = xor_tt(2);
        let keys = keys_for(&g, 2, 2, &f);
        let d = extract_ytree_decomposition(&g, 2, 2, &f, &keys).unwrap();
        assert_eq!(d.triples.len(), 1);
        assert_eq!(d.triples[0].tree.to_string(), "(y1&y2)");
        assert_eq!(d.weight, 2);
        assert!(validate_decomposition(&g, &d, 2, 2).total);
    }

    #[test]
    fn combiner_on_an_input() {
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let y = b.input(VarRef::y(1));
        let a = b.and(x1, y);
        let o = b.or(a, x2);
        let g = b.finish(o);
        let f = TruthTable::from_u64(2, 0b1110);
        let keys = keys_for(&g, 2, 1, &f);
        let stops = all_stops(&g, &f, &keys).unwrap();
        let d = decomposition_from_stops(&stops).unwrap();
        let original: BTreeSet<GateId> = stops.result.gates.keys().copied().collect();
        assert_eq!(origin_of(&g, &d, a, &original).unwrap(), x1);
    }

    #[test]
    fn empty_extension() {
        let g = crate::circuit::xor2_circuit();
        let f = xor_tt(2);
        let stops = all_stops(&g, &f, &[Key(vec![])]).unwrap();
        assert!(stops.restriction.steps.is_empty());
        let d = decomposition_from_stops(&stops).unwrap();
        assert!(d.triples.is_empty());
        assert!(validate_decomposition(&g, &d, 2, 0).total);
        assert!(matches!(all_stops(&g, &f, &[]), Err(YTreeError::NoKey)));
    }

    #[test]
    fn invalid_triples_are_rejected() {
        let mut b = Builder::new();
        let v = xor_base(&mut b);
        let y = b.input(VarRef::y(1));
        let o = b.or(v, y);
        let g = b.finish(o);
        // tree on the base side
        let bad = YTreeTriple { combiner: o, side: 0, tree: Formula::from_circuit(&g, v).unwrap() };
        let d = YTreeDecomposition { triples: vec![bad], weight: 0 };
        assert!(!validate_decomposition(&g, &d, 2, 1).admissible);

        // tree root read twice
        let mut b = Builder::new();
        let v = xor_base(&mut b);
        let y = b.input(VarRef::y(1));
        let o = b.or(v, y);
        let o2 = b.and(o, y);
        let g = b.finish(o2);
        let t = YTreeTriple { combiner: o, side: 1, tree: "y1".parse().unwrap() };
        let d = YTreeDecomposition { triples: vec![t], weight: 1 };
        assert!(!validate_decomposition(&g, &d, 2, 1).admissible);
    }
}
