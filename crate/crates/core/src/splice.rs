//! Splice codes: a description of an optimal extension circuit relative to
//! an optimal base circuit.
//!
//! Each origin gate of the base gets a sequence of splices. A splice names
//! a target (the origin or an earlier combiner on it) by which of the
//! origin's readers currently read it, picks some of those wires, and
//! grafts a widget holding a Y-tree between them and the target.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateId, GateKind, VarRef};
use crate::rewrite::{
    apply_step_mut, restrict_one, Restriction, RuleId, FIX_NOT_0, FIX_NOT_1, PASS_AND_L, PASS_AND_R, PASS_OR_L,
    PASS_OR_R, PRUNE_NOT,
};
use crate::xor::catalan;
use crate::ytree::{origin_of, push, strip_not, BinOp, Formula, YTreeDecomposition, YTreeError};

#[derive(Debug, Error)]
pub enum SpliceError {
    #[error("origin indicator has {got} bits, base has {want} candidate gates")]
    OriginLength { got: usize, want: usize },
    #[error("{origins} origins but {sequences} splice sequences")]
    OriginCount { origins: usize, sequences: usize },
    #[error("origin without splices")]
    EmptySequence,
    #[error("code of length {got}, expected {want}")]
    CodeLength { got: usize, want: usize },
    #[error("bit {0} is beyond the reader list")]
    WireRange(usize),
    #[error("target code {0} names no available gate")]
    NoTarget(String),
    #[error("selected wires are not a subset of the target")]
    SubsetViolation,
    #[error("no wire selected")]
    EmptyWires,
    #[error("{got} moves for {want} selected wires")]
    MovesLength { got: usize, want: usize },
    #[error("moves disagree on the negation below the combiner")]
    InconsistentMoves,
    #[error("widget {0} does not match the wire moves")]
    WidgetMismatch(u8),
    #[error("unknown widget {0}")]
    UnknownWidget(u8),
    #[error("Y-tree root negated twice")]
    DoubleRootNegation,
    #[error("splice without a Y-tree")]
    MissingTree,
    #[error("variable {0} already present")]
    DuplicateLeaf(VarRef),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("encoding: {0}")]
    Encode(String),
    #[error(transparent)]
    YTree(#[from] YTreeError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Combiner kind, the slot holding the Y-tree, a negation on the Y-tree
/// root, and a negation pair (below the combiner, and read by at least
/// one moved wire above it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Widget {
    pub op: BinOp,
    pub y_side: usize,
    pub root_neg: bool,
    pub double_neg: bool,
}

pub const WIDGET_IDS: u8 = 16;

impl Widget {
    pub fn id(&self) -> u8 {
        (u8::from(self.op == BinOp::Or) << 3)
            | ((self.y_side as u8) << 2)
            | (u8::from(self.root_neg) << 1)
            | u8::from(self.double_neg)
    }

    pub fn from_id(id: u8) -> Option<Widget> {
        (id < WIDGET_IDS).then(|| Widget {
            op: if id & 8 != 0 { BinOp::Or } else { BinOp::And },
            y_side: usize::from(id & 4 != 0),
            root_neg: id & 2 != 0,
            double_neg: id & 1 != 0,
        })
    }

    /// Representative up to combiner kind and side.
    pub fn shape(&self) -> (bool, bool) {
        (self.root_neg, self.double_neg)
    }

    pub fn has_negation(&self) -> bool {
        self.root_neg || self.double_neg
    }
}

/// Inverts every simple simplification: an optional constant negation, a
/// passing rule, an optional double negation. Each candidate preimage is
/// checked by actually restricting it.
pub fn derive_widgets() -> Vec<Widget> {
    let rules: [(RuleId, BinOp, usize); 4] =
        [(PASS_AND_L, BinOp::And, 0), (PASS_AND_R, BinOp::And, 1), (PASS_OR_L, BinOp::Or, 0), (PASS_OR_R, BinOp::Or, 1)];
    let mut out = BTreeSet::new();
    for (rule, op, kside) in rules {
        for cneg in [false, true] {
            for dneg in [false, true] {
                let mut c = Circuit { gates: BTreeMap::new(), output: GateId(0) };
                let x = push(&mut c, Gate::input(VarRef::x(1)));
                let y = push(&mut c, Gate::input(VarRef::y(1)));
                let kappa = if cneg { push(&mut c, Gate::not(y)) } else { y };
                let gamma = if dneg { push(&mut c, Gate::not(x)) } else { x };
                let mut ins = vec![gamma, gamma];
                ins[kside] = kappa;
                let delta = push(&mut c, Gate { kind: op.kind(), inputs: ins });
                c.output = if dneg { push(&mut c, Gate::not(delta)) } else { delta };
                let ident = op == BinOp::And;
                let (after, rec) = restrict_one(&c, VarRef::y(1), ident ^ cneg);
                let mut want = Vec::new();
                if cneg {
                    want.push(if ident { FIX_NOT_0 } else { FIX_NOT_1 });
                }
                want.push(rule);
                if dneg {
                    want.push(PRUNE_NOT);
                }
                if rec.rules() == want && after.output == x {
                    out.insert(Widget { op, y_side: kside, root_neg: cneg, double_neg: dneg });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Where a reader of an origin takes its input: a gate slot, or the
/// circuit output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Wire {
    Slot(GateId, usize),
    Output,
}

fn source(c: &Circuit, w: Wire) -> GateId {
    match w {
        Wire::Slot(g, k) => c.gates[&g].inputs[k],
        Wire::Output => c.output,
    }
}

fn set_source(c: &mut Circuit, w: Wire, to: GateId) {
    match w {
        Wire::Slot(g, k) => c.gates.get_mut(&g).unwrap().inputs[k] = to,
        Wire::Output => c.output = to,
    }
}

/// (gate read through at most one NOT, whether through a NOT).
fn reads(c: &Circuit, w: Wire) -> (GateId, bool) {
    let s = source(c, w);
    match c.gates[&s].kind {
        GateKind::Not => (c.gates[&s].inputs[0], true),
        _ => (s, false),
    }
}

/// Candidate origins and their reader lists, in depth order.
#[derive(Debug, Clone)]
pub struct BaseInfo {
    pub candidates: Vec<GateId>,
    pub readers: BTreeMap<GateId, Vec<Wire>>,
    pub ell: usize,
}

impl BaseInfo {
    pub fn new(f: &Circuit) -> Result<BaseInfo, SpliceError> {
        let order = f.depth_order()?;
        let pos: BTreeMap<GateId, usize> = order.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let candidates: Vec<GateId> = order
            .iter()
            .copied()
            .filter(|g| matches!(f.gates[g].kind, GateKind::Input(_)) || f.gates[g].kind.is_binary())
            .collect();
        let mut readers = BTreeMap::new();
        for &eta in &candidates {
            let mut ws = Vec::new();
            for (r, k) in f.readers(eta) {
                if f.gates[&r].kind == GateKind::Not {
                    for (q, j) in f.readers(r) {
                        ws.push(Wire::Slot(q, j));
                    }
                    if f.output == r {
                        ws.push(Wire::Output);
                    }
                } else {
                    ws.push(Wire::Slot(r, k));
                }
            }
            if f.output == eta {
                ws.push(Wire::Output);
            }
            ws.sort_by_key(|w| match w {
                Wire::Slot(g, k) => (0, pos[g], *k),
                Wire::Output => (1, 0, 0),
            });
            readers.insert(eta, ws);
        }
        let ell = readers.values().map(Vec::len).max().unwrap_or(0);
        Ok(BaseInfo { candidates, readers, ell })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splice {
    pub target: Vec<bool>,
    pub wires: Vec<bool>,
    pub widget: u8,
    /// One entry per selected wire, in order: reads the negated combiner.
    pub moves: Vec<bool>,
    pub ytree: Option<Formula>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpliceCode {
    pub origins: Vec<bool>,
    pub splices: Vec<Vec<Splice>>,
}

impl SpliceCode {
    pub fn combiners(&self) -> usize {
        self.splices.iter().map(Vec::len).sum()
    }

    pub fn leaves(&self) -> usize {
        self.splices.iter().flatten().map(|s| s.ytree.as_ref().map_or(0, Formula::leaves)).sum()
    }
}

fn bits(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Option<Vec<bool>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

impl fmt::Display for SpliceCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "origins {}", bits(&self.origins))?;
        let idx: Vec<usize> = self.origins.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect();
        for (i, seq) in idx.iter().zip(&self.splices) {
            writeln!(f, "origin {i}")?;
            for s in seq {
                let moves = if s.moves.is_empty() { "-".to_string() } else { bits(&s.moves) };
                let tree = s.ytree.as_ref().map_or("_".to_string(), |t| t.to_string());
                writeln!(
                    f,
                    "splice target={} wires={} widget={} moves={moves} ytree={tree}",
                    bits(&s.target),
                    bits(&s.wires),
                    s.widget
                )?;
            }
        }
        Ok(())
    }
}

impl FromStr for SpliceCode {
    type Err = SpliceError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut code = SpliceCode::default();
        let mut seen_origins = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| SpliceError::Parse { line, msg };
            let toks: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
            match toks.first() {
                None => continue,
                Some(&"origins") if toks.len() == 2 && !seen_origins => {
                    code.origins = parse_bits(toks[1]).ok_or_else(|| err("bad origin bits".into()))?;
                    seen_origins = true;
                }
                Some(&"origin") if toks.len() == 2 && seen_origins => code.splices.push(Vec::new()),
                Some(&"splice") if !code.splices.is_empty() => {
                    let mut fields = BTreeMap::new();
                    for t in &toks[1..] {
                        let (k, v) = t.split_once('=').ok_or_else(|| err(format!("bad field {t}")))?;
                        fields.insert(k, v);
                    }
                    let get = |k: &str| fields.get(k).copied().ok_or_else(|| err(format!("missing {k}")));
                    let b = |k: &str| parse_bits(get(k)?).ok_or_else(|| err(format!("bad bits in {k}")));
                    let widget = get("widget")?.parse::<u8>().map_err(|_| err("bad widget".into()))?;
                    let tree = get("ytree")?;
                    let ytree = if tree == "_" { None } else { Some(tree.parse::<Formula>()?) };
                    code.splices.last_mut().unwrap().push(Splice {
                        target: b("target")?,
                        wires: b("wires")?,
                        widget,
                        moves: b("moves")?,
                        ytree,
                    });
                }
                _ => return Err(err(format!("cannot parse {raw:?}"))),
            }
        }
        if !seen_origins {
            return Err(SpliceError::Parse { line: 0, msg: "missing origins line".into() });
        }
        Ok(code)
    }
}

/// Applies one splice in place and returns the new combiner.
fn apply_splice(
    c: &mut Circuit,
    readers: &[Wire],
    family: &mut Vec<GateId>,
    sp: &Splice,
    ell: usize,
) -> Result<GateId, SpliceError> {
    for v in [&sp.target, &sp.wires] {
        if v.len() != ell {
            return Err(SpliceError::CodeLength { got: v.len(), want: ell });
        }
        if let Some(i) = v.iter().enumerate().skip(readers.len()).find(|(_, b)| **b).map(|(i, _)| i) {
            return Err(SpliceError::WireRange(i));
        }
    }
    let cur: Vec<(GateId, bool)> = readers.iter().map(|&w| reads(c, w)).collect();
    let beta = family
        .iter()
        .copied()
        .find(|&b| (0..readers.len()).all(|i| sp.target[i] == (cur[i].0 == b)) && sp.target.iter().any(|&t| t))
        .ok_or_else(|| SpliceError::NoTarget(bits(&sp.target)))?;
    if sp.wires.iter().zip(&sp.target).any(|(&w, &t)| w && !t) {
        return Err(SpliceError::SubsetViolation);
    }
    let sel: Vec<usize> = (0..readers.len()).filter(|&i| sp.wires[i]).collect();
    if sel.is_empty() {
        return Err(SpliceError::EmptyWires);
    }
    if sp.moves.len() != sel.len() {
        return Err(SpliceError::MovesLength { got: sp.moves.len(), want: sel.len() });
    }
    let w = Widget::from_id(sp.widget).ok_or(SpliceError::UnknownWidget(sp.widget))?;
    let below_neg = sp.moves[0] ^ cur[sel[0]].1;
    if sel.iter().zip(&sp.moves).any(|(&i, &p)| p ^ cur[i].1 != below_neg) {
        return Err(SpliceError::InconsistentMoves);
    }
    if w.double_neg != (below_neg && sp.moves.iter().any(|&p| p)) {
        return Err(SpliceError::WidgetMismatch(sp.widget));
    }
    let tree = sp.ytree.as_ref().ok_or(SpliceError::MissingTree)?;
    if w.root_neg && tree.neg() {
        return Err(SpliceError::DoubleRootNegation);
    }
    let present: BTreeSet<VarRef> = c.variables().into_iter().collect();
    let mut mine = BTreeSet::new();
    for v in tree.vars() {
        let v = v.ok_or(SpliceError::YTree(YTreeError::Formula("unlabeled leaf".into())))?;
        if present.contains(&v) || !mine.insert(v) {
            return Err(SpliceError::DuplicateLeaf(v));
        }
    }
    let below = if below_neg {
        let existing = c
            .gates
            .iter()
            .find(|(_, g)| g.kind == GateKind::Not && g.inputs[0] == beta)
            .map(|(id, _)| *id);
        match existing {
            Some(n) => n,
            None => push(c, Gate::not(beta)),
        }
    } else {
        beta
    };
    let root = tree.clone().with_neg(tree.neg() ^ w.root_neg).build(c)?;
    let mut ins = vec![below, below];
    ins[w.y_side] = root;
    let delta = push(c, Gate { kind: w.op.kind(), inputs: ins });
    let mut above = None;
    for (&i, &p) in sel.iter().zip(&sp.moves) {
        let to = if p { *above.get_or_insert_with(|| push(c, Gate::not(delta))) } else { delta };
        set_source(c, readers[i], to);
    }
    family.push(delta);
    Ok(delta)
}

fn drop_unread(c: &mut Circuit) {
    loop {
        let fo = c.fanouts();
        let dead: Vec<GateId> = fo.iter().filter(|(g, n)| **n == 0 && **g != c.output).map(|(g, _)| *g).collect();
        if dead.is_empty() {
            return;
        }
        for g in dead {
            c.gates.remove(&g);
        }
    }
}

/// Decodes against a precomputed reader table.
pub fn decode_with(f: &Circuit, info: &BaseInfo, code: &SpliceCode) -> Result<Circuit, SpliceError> {
    if code.origins.len() != info.candidates.len() {
        return Err(SpliceError::OriginLength { got: code.origins.len(), want: info.candidates.len() });
    }
    let origins: Vec<GateId> =
        info.candidates.iter().zip(&code.origins).filter(|(_, b)| **b).map(|(g, _)| *g).collect();
    if origins.len() != code.splices.len() {
        return Err(SpliceError::OriginCount { origins: origins.len(), sequences: code.splices.len() });
    }
    let mut c = f.clone();
    for (eta, seq) in origins.iter().zip(&code.splices) {
        if seq.is_empty() {
            return Err(SpliceError::EmptySequence);
        }
        let readers = &info.readers[eta];
        let mut family = vec![*eta];
        for sp in seq {
            apply_splice(&mut c, readers, &mut family, sp, info.ell)?;
        }
    }
    drop_unread(&mut c);
    Ok(c)
}

pub fn decode(f: &Circuit, code: &SpliceCode) -> Result<Circuit, SpliceError> {
    decode_with(f, &BaseInfo::new(f)?, code)
}

/// Splice code of `g` relative to `f`, the circuit left by the all-stops
/// restriction `rho`, with `d` the decomposition of `g`.
pub fn encode(g: &Circuit, f: &Circuit, d: &YTreeDecomposition, rho: &Restriction) -> Result<SpliceCode, SpliceError> {
    let mut replay = g.clone();
    for step in &rho.steps {
        if !apply_step_mut(&mut replay, step) {
            return Err(SpliceError::Encode(format!("restriction step {step} does not apply")));
        }
    }
    if replay != *f {
        return Err(SpliceError::Encode("restriction does not produce the base circuit".into()));
    }
    let info = BaseInfo::new(f)?;
    let original: BTreeSet<GateId> = f.gates.keys().copied().collect();
    let depth = g.depths()?;
    let mut by_origin: BTreeMap<GateId, Vec<GateId>> = BTreeMap::new();
    for t in &d.triples {
        let eta = origin_of(g, d, t.combiner, &original)?;
        by_origin.entry(eta).or_default().push(t.combiner);
    }
    for v in by_origin.values_mut() {
        v.sort_by(|a, b| depth[b].cmp(&depth[a]).then(a.cmp(b)));
    }
    let mut code = SpliceCode { origins: vec![false; info.candidates.len()], splices: Vec::new() };
    let mut cur = f.clone();
    for (k, eta) in info.candidates.iter().enumerate() {
        let Some(combs) = by_origin.get(eta) else {
            continue;
        };
        code.origins[k] = true;
        let readers = &info.readers[eta];
        // combiners each wire passes through in g
        let chains: Vec<BTreeSet<GateId>> = readers
            .iter()
            .map(|&w| {
                let mut set = BTreeSet::new();
                let mut at = strip_not(g, source(g, w));
                while let Some(t) = d.triple(at) {
                    set.insert(at);
                    at = strip_not(g, g.gates[&at].inputs[1 - t.side]);
                }
                set
            })
            .collect();
        let mut family = vec![*eta];
        let mut renamed: BTreeMap<GateId, GateId> = BTreeMap::new();
        renamed.insert(*eta, *eta);
        let mut seq = Vec::new();
        for &delta in combs {
            let t = d.triple(delta).unwrap();
            let other = g.gates[&delta].inputs[1 - t.side];
            let below_neg = g.gates[&other].kind == GateKind::Not;
            let beta_g = strip_not(g, other);
            let beta = *renamed
                .get(&beta_g)
                .ok_or_else(|| SpliceError::Encode(format!("combiner {delta} reads {beta_g} out of order")))?;
            let now: Vec<(GateId, bool)> = readers.iter().map(|&w| reads(&cur, w)).collect();
            let mut target = vec![false; info.ell];
            let mut wires = vec![false; info.ell];
            let mut moves = Vec::new();
            for i in 0..readers.len() {
                target[i] = now[i].0 == beta;
                if chains[i].contains(&delta) {
                    wires[i] = true;
                    moves.push(now[i].1 ^ below_neg);
                }
            }
            let widget = Widget {
                op: BinOp::from_kind(g.gates[&delta].kind)
                    .ok_or_else(|| SpliceError::Encode(format!("combiner {delta} is not binary")))?,
                y_side: t.side,
                root_neg: t.tree.neg(),
                double_neg: below_neg && moves.iter().any(|&p| p),
            };
            let sp = Splice { target, wires, widget: widget.id(), moves, ytree: Some(t.tree.clone().with_neg(false)) };
            let made = apply_splice(&mut cur, readers, &mut family, &sp, info.ell)?;
            renamed.insert(delta, made);
            seq.push(sp);
        }
        code.splices.push(seq);
    }
    Ok(code)
}

/// Every open read-once formula with `a` leaves, as plain labeled trees.
pub fn enumerate_read_once_formulas(a: usize, monotone: bool) -> Result<Vec<Formula>, SpliceError> {
    if a == 0 {
        return Err(SpliceError::Encode("a read-once formula needs a leaf".into()));
    }
    let negs: &[bool] = if monotone { &[false] } else { &[false, true] };
    let mut all: Vec<Vec<Formula>> =
        vec![Vec::new(), negs.iter().map(|&n| Formula::leaf(None).with_neg(n)).collect()];
    for k in 2..=a {
        let mut p = Vec::new();
        for left in 1..k {
            for l in &all[left] {
                for r in &all[k - left] {
                    for op in [BinOp::And, BinOp::Or] {
                        p.push(Formula::node(op, l.clone(), r.clone()));
                    }
                }
            }
        }
        let full = p.iter().flat_map(|f| negs.iter().map(move |&n| f.clone().with_neg(n))).collect();
        all.push(full);
    }
    Ok(all.swap_remove(a))
}

/// Closed form of the count above.
pub fn read_once_count(a: usize, monotone: bool) -> u64 {
    let base = catalan(a - 1) << (a - 1);
    if monotone {
        base
    } else {
        base << (2 * (a - 1) + 1)
    }
}

/// Positive compositions of `m` into `d` parts, lexicographic.
pub fn compositions(m: usize, d: usize) -> Result<Vec<Vec<usize>>, SpliceError> {
    if d == 0 || d > m {
        return Err(SpliceError::Encode(format!("{d} parts of {m}")));
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(d);
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 1..=left - (parts - 1) {
            cur.push(a);
            rec(left - a, parts - 1, cur, out);
            cur.pop();
        }
    }
    rec(m, d, &mut cur, &mut out);
    Ok(out)
}

/// Splice sequences for one origin without trees. Wire state is tracked
/// abstractly: which family member each reader reads, and whether through
/// a NOT. Moves are generated consistently with the negation below the
/// combiner, the only moves decode accepts.
fn origin_sequences(q0: &[bool], ell: usize, len: usize, no_neg: bool) -> Vec<Vec<Splice>> {
    let mut out = Vec::new();
    let state: Vec<(usize, bool)> = q0.iter().map(|&q| (0, q)).collect();
    let mut seq = Vec::new();
    seq_rec(&state, 1, ell, len, no_neg, &mut seq, &mut out);
    out
}

fn seq_rec(
    state: &[(usize, bool)],
    members: usize,
    ell: usize,
    len: usize,
    no_neg: bool,
    seq: &mut Vec<Splice>,
    out: &mut Vec<Vec<Splice>>,
) {
    if seq.len() == len {
        out.push(seq.clone());
        return;
    }
    let k = state.len();
    for member in 0..members {
        let tmask: u32 = (0..k).filter(|&i| state[i].0 == member).fold(0, |a, i| a | 1 << i);
        if tmask == 0 {
            continue;
        }
        let target: Vec<bool> = (0..ell).map(|i| tmask >> i & 1 == 1).collect();
        // nonempty submasks in ascending order
        let mut sub = 0u32;
        loop {
            sub = (sub.wrapping_sub(tmask)) & tmask;
            if sub == 0 {
                break;
            }
            let sel: Vec<usize> = (0..k).filter(|&i| sub >> i & 1 == 1).collect();
            let wires: Vec<bool> = (0..ell).map(|i| sub >> i & 1 == 1).collect();
            for id in 0..WIDGET_IDS {
                let w = Widget::from_id(id).unwrap();
                if no_neg && w.has_negation() {
                    continue;
                }
                for below in [false, true] {
                    let moves: Vec<bool> = sel.iter().map(|&i| state[i].1 ^ below).collect();
                    if w.double_neg != (below && moves.iter().any(|&p| p)) {
                        continue;
                    }
                    if no_neg && (below || moves.iter().any(|&p| p)) {
                        continue;
                    }
                    let mut next = state.to_vec();
                    for (&i, &p) in sel.iter().zip(&moves) {
                        next[i] = (members, p);
                    }
                    seq.push(Splice { target: target.clone(), wires: wires.clone(), widget: id, moves, ytree: None });
                    seq_rec(&next, members + 1, ell, len, no_neg, seq, out);
                    seq.pop();
                }
            }
        }
    }
}

/// Every implicit splice code adding exactly `m` binary gates: `d`
/// combiners for `d` in `1..=m`, spread over origins. With `no_neg` set,
/// widgets and moves carrying negations are left out.
pub fn enumerate_implicit_codes(f: &Circuit, m: usize, ell: usize, no_neg: bool) -> Result<Vec<SpliceCode>, SpliceError> {
    let info = BaseInfo::new(f)?;
    if m == 0 {
        return Ok(vec![SpliceCode { origins: vec![false; info.candidates.len()], splices: Vec::new() }]);
    }
    if ell < info.ell {
        return Err(SpliceError::CodeLength { got: ell, want: info.ell });
    }
    let q0: Vec<Vec<bool>> = info
        .candidates
        .iter()
        .map(|eta| info.readers[eta].iter().map(|&w| reads(f, w).1).collect())
        .collect();
    // memoized per (origin, length)
    let mut per: BTreeMap<(usize, usize), Vec<Vec<Splice>>> = BTreeMap::new();
    let mut out = Vec::new();
    for d in 1..=m {
        let mut counts = vec![0usize; info.candidates.len()];
        distribute(d, 0, &mut counts, &mut |counts| {
            let mut lists = Vec::new();
            for (o, &c) in counts.iter().enumerate() {
                if c > 0 {
                    let seqs = per.entry((o, c)).or_insert_with(|| origin_sequences(&q0[o], ell, c, no_neg));
                    lists.push(seqs.clone());
                }
            }
            let origins: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
            product(&lists, &mut Vec::new(), &mut |pick| {
                out.push(SpliceCode { origins: origins.clone(), splices: pick.to_vec() });
            });
        });
    }
    Ok(out)
}

fn distribute(left: usize, at: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if at == counts.len() {
        if left == 0 {
            f(counts);
        }
        return;
    }
    for c in (0..=left).rev() {
        counts[at] = c;
        distribute(left - c, at + 1, counts, f);
    }
    counts[at] = 0;
}

fn product<T: Clone>(lists: &[Vec<T>], cur: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
    if cur.len() == lists.len() {
        f(cur);
        return;
    }
    for x in &lists[cur.len()] {
        cur.push(x.clone());
        product(lists, cur, f);
        cur.pop();
    }
}

/// Fills the trees of an implicit code: `parts` gives the leaf count per
/// combiner and `trees` one formula each; leaves get y1, y2, ... in order.
pub fn with_trees(code: &SpliceCode, trees: &[&Formula]) -> SpliceCode {
    let mut out = code.clone();
    let mut vars = (1u32..).map(VarRef::y);
    let mut it = trees.iter();
    for s in out.splices.iter_mut().flatten() {
        s.ytree = Some(it.next().expect("one tree per splice").labeled(&mut vars));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{xor2_circuit, Builder, SizeMeasure};
    use crate::tt::{find_keys, TruthTable};
    use crate::xor::xor_tt;
    use crate::ytree::{all_stops, decomposition_from_stops};

    #[test]
    fn four_widget_shapes() {
        let ws = derive_widgets();
        assert_eq!(ws.len(), 16);
        let shapes: BTreeSet<_> = ws.iter().map(Widget::shape).collect();
        assert_eq!(shapes.len(), 4);
        assert!(ws.iter().any(|w| w.op == BinOp::Or && !w.has_negation()));
        assert!(ws.iter().any(|w| w.op == BinOp::And && w.double_neg));
        for w in &ws {
            assert_eq!(Widget::from_id(w.id()), Some(*w));
        }
    }

    #[test]
    fn formula_counts_match_closed_form() {
        for a in 1..=4 {
            for mono in [false, true] {
                let fs = enumerate_read_once_formulas(a, mono).unwrap();
                assert_eq!(fs.len() as u64, read_once_count(a, mono));
                let distinct: BTreeSet<_> = fs.iter().collect();
                assert_eq!(distinct.len(), fs.len());
            }
        }
        assert_eq!(read_once_count(1, false), 2);
        assert_eq!(read_once_count(2, false), 16);
        assert_eq!(read_once_count(2, true), 2);
        // C(a-1) * 2^(3a-2)
        for a in 1..=5 {
            assert_eq!(read_once_count(a, false), catalan(a - 1) << (3 * a - 2));
        }
        assert!(enumerate_read_once_formulas(0, true).is_err());
    }

    #[test]
    fn composition_examples() {
        assert_eq!(compositions(3, 2).unwrap(), vec![vec![1, 2], vec![2, 1]]);
        assert_eq!(compositions(5, 1).unwrap(), vec![vec![5]]);
        assert_eq!(compositions(4, 4).unwrap(), vec![vec![1, 1, 1, 1]]);
        assert!(compositions(2, 3).is_err());
        assert!(compositions(2, 0).is_err());
        // binomial counts
        for m in 1..=7usize {
            for d in 1..=m {
                let mut want = 1u64;
                for i in 0..(d - 1) as u64 {
                    want = want * (m as u64 - 1 - i) / (i + 1);
                }
                assert_eq!(compositions(m, d).unwrap().len() as u64, want);
            }
        }
    }

    fn or_y1_code(f: &Circuit) -> SpliceCode {
        let info = BaseInfo::new(f).unwrap();
        let out = info.candidates.iter().position(|&g| g == f.output).unwrap();
        let mut origins = vec![false; info.candidates.len()];
        origins[out] = true;
        let mut target = vec![false; info.ell];
        target[0] = true;
        let widget = Widget { op: BinOp::Or, y_side: 1, root_neg: false, double_neg: false };
        let sp = Splice {
            target: target.clone(),
            wires: target,
            widget: widget.id(),
            moves: vec![false],
            ytree: Some("y1".parse().unwrap()),
        };
        SpliceCode { origins, splices: vec![vec![sp]] }
    }

    #[test]
    fn decode_or_graft_on_xor() {
        let f = xor2_circuit();
        let code = or_y1_code(&f);
        let g = decode(&f, &code).unwrap();
        assert_eq!(g.size(SizeMeasure::D), 4);
        let vars = [VarRef::x(1), VarRef::x(2), VarRef::y(1)];
        let want = TruthTable::from_fn(3, |r| ((r >> 2) ^ (r >> 1)) & 1 == 1 || r & 1 == 1);
        assert_eq!(g.truth_table(&vars).unwrap(), want);
        let text = code.to_string();
        assert_eq!(text.parse::<SpliceCode>().unwrap(), code);
        assert!(text.contains("target=10 "));
    }

    #[test]
    fn empty_code_is_identity() {
        let f = xor2_circuit();
        let info = BaseInfo::new(&f).unwrap();
        let code = SpliceCode { origins: vec![false; info.candidates.len()], splices: vec![] };
        assert_eq!(decode(&f, &code).unwrap(), f);
    }

    #[test]
    fn malformed_codes_are_reported() {
        let f = xor2_circuit();
        let mut code = or_y1_code(&f);
        code.splices[0][0].wires = vec![false, true];
        assert!(matches!(decode(&f, &code), Err(SpliceError::SubsetViolation | SpliceError::WireRange(_))));
        let mut code = or_y1_code(&f);
        code.splices[0][0].target = vec![false, true];
        assert!(decode(&f, &code).is_err());
        let mut code = or_y1_code(&f);
        code.origins.push(false);
        assert!(matches!(decode(&f, &code), Err(SpliceError::OriginLength { .. })));
        let mut code = or_y1_code(&f);
        code.splices[0][0].moves = vec![true];
        assert!(matches!(decode(&f, &code), Err(SpliceError::WidgetMismatch(_))));
        let mut code = or_y1_code(&f);
        code.splices[0][0].ytree = None;
        assert!(matches!(decode(&f, &code), Err(SpliceError::MissingTree)));
    }

    fn roundtrip(g: &Circuit, n: usize, m: usize, f: &TruthTable) {
        let mut order: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
        order.extend((1..=m as u32).map(VarRef::y));
        let keys = find_keys(&g.truth_table(&order).unwrap(), f).unwrap();
        let stops = all_stops(g, f, &keys).unwrap();
        let d = decomposition_from_stops(&stops).unwrap();
        let code = encode(g, &stops.result, &d, &stops.restriction).unwrap();
        let back = decode(&stops.result, &code).unwrap();
        assert_eq!(back.canonical_form(), g.canonical_form(), "code:\n{code}");
        let reparsed: SpliceCode = code.to_string().parse().unwrap();
        assert_eq!(reparsed, code);
    }

    #[test]
    fn encode_roundtrips() {
        // one OR graft on the output
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let n1 = b.not(x1);
        let n2 = b.not(x2);
        let a = b.and(x1, n2);
        let c = b.and(n1, x2);
        let v = b.or(a, c);
        let y1 = b.input(VarRef::y(1));
        let y2 = b.input(VarRef::y(2));
        let o1 = b.or(v, y1);
        let o2 = b.and(o1, y2);
        let g = b.finish(o2);
        roundtrip(&g, 2, 2, &xor_tt(2));

        // graft with negations on an inner wire
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let y1 = b.input(VarRef::y(1));
        let ny = b.not(y1);
        let n1 = b.not(x1);
        let d = b.and(n1, ny);
        let nd = b.not(d);
        let n2 = b.not(x2);
        let a = b.and(nd, n2);
        let c = b.and(d, x2);
        let v = b.or(a, c);
        let g = b.finish(v);
        roundtrip(&g, 2, 1, &xor_tt(2));
    }

    #[test]
    fn implicit_codes_for_and() {
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let a = b.and(x1, x2);
        let f = b.finish(a);
        let codes = enumerate_implicit_codes(&f, 1, 1, false).unwrap();
        // three origins, one reader each, sixteen widgets with forced moves
        assert_eq!(codes.len(), 3 * 16);
        assert!(codes.iter().all(|c| c.origins.iter().filter(|&&b| b).count() == 1 && c.combiners() == 1));
        assert_eq!(enumerate_implicit_codes(&f, 0, 1, false).unwrap().len(), 1);
        let mono = enumerate_implicit_codes(&f, 1, 1, true).unwrap();
        assert_eq!(mono.len(), 3 * 4);
        for code in &codes {
            let t = Formula::leaf(None);
            let full = with_trees(code, &[&t]);
            let g = decode(&f, &full).unwrap();
            assert_eq!(g.size(SizeMeasure::D), 2);
        }
    }

    #[test]
    fn renumbering_in_depth_order_keeps_decoding() {
        let f = xor2_circuit();
        let order = f.depth_order().unwrap();
        // ids spread out but in the same depth order
        let map: BTreeMap<GateId, GateId> =
            order.iter().enumerate().map(|(i, &g)| (g, GateId(10 + 3 * i as u32))).collect();
        let f2 = Circuit {
            gates: f
                .gates
                .iter()
                .map(|(id, g)| (map[id], Gate { kind: g.kind, inputs: g.inputs.iter().map(|i| map[i]).collect() }))
                .collect(),
            output: map[&f.output],
        };
        assert_eq!(f2.depth_order().unwrap(), order.iter().map(|g| map[g]).collect::<Vec<_>>());
        for code in enumerate_implicit_codes(&f, 1, 2, false).unwrap().iter().take(200) {
            let t = Formula::leaf(None);
            let full = with_trees(code, &[&t]);
            let a = decode(&f, &full).unwrap();
            let b = decode(&f2, &full).unwrap();
            assert_eq!(a.canonical_form(), b.canonical_form());
        }
    }
}
