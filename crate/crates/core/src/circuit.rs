//! Single-output circuits over {AND, OR, NOT, CONST, INPUT}.
//!
//! Gates live in an id-keyed map. Ids are never renumbered by any
//! manipulation in this crate; rewrites retype or rewire gates in place.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tt::TruthTable;

/// Largest variable count accepted by [`truth_table`](Circuit::truth_table).
pub const MAX_VARS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateId(pub u32);

impl fmt::Display for GateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarClass {
    Base,
    Ext,
}

/// `x<i>` or `y<i>`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub class: VarClass,
    pub index: u32,
}

impl VarRef {
    pub fn x(index: u32) -> Self {
        VarRef { class: VarClass::Base, index }
    }

    pub fn y(index: u32) -> Self {
        VarRef { class: VarClass::Ext, index }
    }

    pub fn is_ext(&self) -> bool {
        self.class == VarClass::Ext
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            VarClass::Base => write!(f, "x{}", self.index),
            VarClass::Ext => write!(f, "y{}", self.index),
        }
    }
}

impl FromStr for VarRef {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CircuitError::BadVariable(s.to_string());
        let (class, rest) = match s.as_bytes().first() {
            Some(b'x') => (VarClass::Base, &s[1..]),
            Some(b'y') => (VarClass::Ext, &s[1..]),
            _ => return Err(bad()),
        };
        let index: u32 = rest.parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(bad());
        }
        Ok(VarRef { class, index })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Not,
    Const(bool),
    Input(VarRef),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::And | GateKind::Or => 2,
            GateKind::Not => 1,
            GateKind::Const(_) | GateKind::Input(_) => 0,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.arity() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<GateId>,
}

impl Gate {
    pub fn and(a: GateId, b: GateId) -> Self {
        Gate { kind: GateKind::And, inputs: vec![a, b] }
    }

    pub fn or(a: GateId, b: GateId) -> Self {
        Gate { kind: GateKind::Or, inputs: vec![a, b] }
    }

    pub fn not(a: GateId) -> Self {
        Gate { kind: GateKind::Not, inputs: vec![a] }
    }

    pub fn constant(c: bool) -> Self {
        Gate { kind: GateKind::Const(c), inputs: vec![] }
    }

    pub fn input(v: VarRef) -> Self {
        Gate { kind: GateKind::Input(v), inputs: vec![] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeMeasure {
    /// Binary gates only.
    D,
    /// Binary gates and negations.
    R,
}

impl FromStr for SizeMeasure {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "D" | "d" => Ok(SizeMeasure::D),
            "R" | "r" => Ok(SizeMeasure::R),
            _ => Err(CircuitError::BadMeasure(s.to_string())),
        }
    }
}

impl fmt::Display for SizeMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeMeasure::D => write!(f, "D"),
            SizeMeasure::R => write!(f, "R"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown gate {0}")]
    UnknownGate(GateId),
    #[error("gate {0} has the wrong number of inputs")]
    Arity(GateId),
    #[error("cycle through gate {0}")]
    Cycle(GateId),
    #[error("variable {0} has no value")]
    MissingVariable(VarRef),
    #[error("bad variable name {0:?}")]
    BadVariable(String),
    #[error("bad size measure {0:?}")]
    BadMeasure(String),
    #[error("{0} variables exceed the supported maximum")]
    TooManyVariables(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    pub gates: BTreeMap<GateId, Gate>,
    pub output: GateId,
}

impl Circuit {
    /// Checks arity, references and acyclicity.
    pub fn validate(&self) -> Result<(), CircuitError> {
        if !self.gates.contains_key(&self.output) {
            return Err(CircuitError::UnknownGate(self.output));
        }
        for (&id, g) in &self.gates {
            if g.inputs.len() != g.kind.arity() {
                return Err(CircuitError::Arity(id));
            }
            for i in &g.inputs {
                if !self.gates.contains_key(i) {
                    return Err(CircuitError::UnknownGate(*i));
                }
            }
        }
        self.topo_order().map(|_| ())
    }

    pub fn gate(&self, id: GateId) -> Result<&Gate, CircuitError> {
        self.gates.get(&id).ok_or(CircuitError::UnknownGate(id))
    }

    pub fn next_id(&self) -> GateId {
        GateId(self.gates.keys().next_back().map_or(0, |g| g.0 + 1))
    }

    /// Children before parents; among ready gates the smallest id goes first.
    pub fn topo_order(&self) -> Result<Vec<GateId>, CircuitError> {
        let mut indeg: BTreeMap<GateId, usize> = self.gates.keys().map(|&k| (k, 0)).collect();
        let mut readers: BTreeMap<GateId, Vec<GateId>> = BTreeMap::new();
        for (&id, g) in &self.gates {
            for &i in &g.inputs {
                if !self.gates.contains_key(&i) {
                    return Err(CircuitError::UnknownGate(i));
                }
                *indeg.get_mut(&id).unwrap() += 1;
                readers.entry(i).or_default().push(id);
            }
        }
        let mut ready: BTreeSet<GateId> =
            indeg.iter().filter(|(_, &d)| d == 0).map(|(&k, _)| k).collect();
        let mut order = Vec::with_capacity(self.gates.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            if let Some(rs) = readers.get(&id) {
                for r in rs {
                    let d = indeg.get_mut(r).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(*r);
                    }
                }
            }
        }
        if order.len() != self.gates.len() {
            let stuck = indeg.iter().find(|(_, &d)| d > 0).map(|(&k, _)| k).unwrap();
            return Err(CircuitError::Cycle(stuck));
        }
        Ok(order)
    }

    /// Variables read by INPUT gates, sorted (x's before y's).
    pub fn variables(&self) -> Vec<VarRef> {
        let set: BTreeSet<VarRef> = self
            .gates
            .values()
            .filter_map(|g| match g.kind {
                GateKind::Input(v) => Some(v),
                _ => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn evaluate(&self, assignment: &BTreeMap<VarRef, bool>) -> Result<bool, CircuitError> {
        let order = self.topo_order()?;
        let mut val: BTreeMap<GateId, bool> = BTreeMap::new();
        for id in order {
            let g = &self.gates[&id];
            let v = match g.kind {
                GateKind::And => val[&g.inputs[0]] && val[&g.inputs[1]],
                GateKind::Or => val[&g.inputs[0]] || val[&g.inputs[1]],
                GateKind::Not => !val[&g.inputs[0]],
                GateKind::Const(c) => c,
                GateKind::Input(v) => {
                    *assignment.get(&v).ok_or(CircuitError::MissingVariable(v))?
                }
            };
            val.insert(id, v);
        }
        Ok(val[&self.output])
    }

    /// Bit-parallel evaluation over every row of `var_order`.
    pub fn truth_table(&self, var_order: &[VarRef]) -> Result<TruthTable, CircuitError> {
        if var_order.len() > MAX_VARS {
            return Err(CircuitError::TooManyVariables(var_order.len()));
        }
        let n = var_order.len();
        let order = self.topo_order()?;
        let mut val: BTreeMap<GateId, TruthTable> = BTreeMap::new();
        for id in order {
            let g = &self.gates[&id];
            let t = match g.kind {
                GateKind::And => val[&g.inputs[0]].and(&val[&g.inputs[1]]),
                GateKind::Or => val[&g.inputs[0]].or(&val[&g.inputs[1]]),
                GateKind::Not => val[&g.inputs[0]].not(),
                GateKind::Const(c) => TruthTable::constant(n, c),
                GateKind::Input(v) => {
                    let pos = var_order
                        .iter()
                        .position(|w| *w == v)
                        .ok_or(CircuitError::MissingVariable(v))?;
                    TruthTable::var(n, pos)
                }
            };
            val.insert(id, t);
        }
        Ok(val.remove(&self.output).unwrap())
    }

    pub fn size(&self, measure: SizeMeasure) -> usize {
        self.gates
            .values()
            .filter(|g| match measure {
                SizeMeasure::D => g.kind.is_binary(),
                SizeMeasure::R => g.kind.is_binary() || g.kind == GateKind::Not,
            })
            .count()
    }

    /// Wires leaving `id`, counted with multiplicity.
    pub fn fanout(&self, id: GateId) -> Result<usize, CircuitError> {
        self.gate(id)?;
        Ok(self
            .gates
            .values()
            .map(|g| g.inputs.iter().filter(|&&i| i == id).count())
            .sum())
    }

    pub fn fanouts(&self) -> BTreeMap<GateId, usize> {
        let mut fo: BTreeMap<GateId, usize> = self.gates.keys().map(|&k| (k, 0)).collect();
        for g in self.gates.values() {
            for i in &g.inputs {
                if let Some(c) = fo.get_mut(i) {
                    *c += 1;
                }
            }
        }
        fo
    }

    /// (reader, slot) pairs for every wire leaving `id`.
    pub fn readers(&self, id: GateId) -> Vec<(GateId, usize)> {
        let mut out = Vec::new();
        for (&r, g) in &self.gates {
            for (slot, &i) in g.inputs.iter().enumerate() {
                if i == id {
                    out.push((r, slot));
                }
            }
        }
        out
    }

    /// Binary gates reading `id` directly or through a chain of NOTs.
    pub fn costly_fanout(&self, id: GateId) -> usize {
        let mut total = 0;
        for (r, _) in self.readers(id) {
            match self.gates[&r].kind {
                GateKind::Not => total += self.costly_fanout(r),
                _ => total += 1,
            }
        }
        total
    }

    /// Largest number of binary gates on a path from each gate to the
    /// output, counting the gate itself.
    pub fn depths(&self) -> Result<BTreeMap<GateId, usize>, CircuitError> {
        let order = self.topo_order()?;
        let mut above: BTreeMap<GateId, usize> = BTreeMap::new();
        let mut depth = BTreeMap::new();
        for id in order.iter().rev() {
            let g = &self.gates[id];
            let d = above.get(id).copied().unwrap_or(0) + usize::from(g.kind.is_binary());
            depth.insert(*id, d);
            for i in &g.inputs {
                let e = above.entry(*i).or_insert(0);
                *e = (*e).max(d);
            }
        }
        Ok(depth)
    }

    /// Decreasing depth, ties by ascending id.
    pub fn depth_order(&self) -> Result<Vec<GateId>, CircuitError> {
        let depth = self.depths()?;
        let mut ids: Vec<GateId> = self.gates.keys().copied().collect();
        ids.sort_by(|a, b| depth[b].cmp(&depth[a]).then(a.cmp(b)));
        Ok(ids)
    }

    /// Gates with a path to `root`, rooted at `root`.
    pub fn subcircuit(&self, root: GateId) -> Result<Circuit, CircuitError> {
        self.gate(root)?;
        let mut keep = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if keep.insert(id) {
                stack.extend(self.gate(id)?.inputs.iter().copied());
            }
        }
        let gates = keep.into_iter().map(|id| (id, self.gates[&id].clone())).collect();
        Ok(Circuit { gates, output: root })
    }

    /// Gates that reach the output.
    pub fn live_gates(&self) -> BTreeSet<GateId> {
        self.subcircuit(self.output)
            .map(|c| c.gates.into_keys().collect())
            .unwrap_or_default()
    }

    /// Renumbers gates 0.. in topological order.
    pub fn compacted(&self) -> Circuit {
        let order = self.topo_order().expect("acyclic circuit");
        let map: BTreeMap<GateId, GateId> =
            order.iter().enumerate().map(|(i, &g)| (g, GateId(i as u32))).collect();
        let gates = order
            .iter()
            .map(|g| {
                let gate = &self.gates[g];
                (
                    map[g],
                    Gate { kind: gate.kind, inputs: gate.inputs.iter().map(|i| map[i]).collect() },
                )
            })
            .collect();
        Circuit { gates, output: map[&self.output] }
    }

    pub fn to_bcir(&self) -> String {
        let mut s = String::new();
        let vars = self.variables();
        s.push_str("inputs");
        for v in &vars {
            s.push(' ');
            s.push_str(&v.to_string());
        }
        s.push('\n');
        for id in self.topo_order().expect("acyclic circuit") {
            let g = &self.gates[&id];
            let body = match g.kind {
                GateKind::And => format!("AND {} {}", g.inputs[0], g.inputs[1]),
                GateKind::Or => format!("OR {} {}", g.inputs[0], g.inputs[1]),
                GateKind::Not => format!("NOT {}", g.inputs[0]),
                GateKind::Const(c) => format!("CONST {}", u8::from(c)),
                GateKind::Input(v) => format!("INPUT {v}"),
            };
            s.push_str(&format!("gate {id} {body}\n"));
        }
        s.push_str(&format!("output {}\n", self.output));
        s
    }

    pub fn parse_bcir(text: &str) -> Result<Circuit, CircuitError> {
        let mut gates = BTreeMap::new();
        let mut output = None;
        let mut declared: Option<BTreeSet<VarRef>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let err = |msg: &str| CircuitError::Parse { line, msg: msg.to_string() };
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            match toks[0] {
                "inputs" => {
                    if declared.is_some() {
                        return Err(err("duplicate inputs line"));
                    }
                    let mut set = BTreeSet::new();
                    for t in &toks[1..] {
                        set.insert(t.parse::<VarRef>().map_err(|e| err(&e.to_string()))?);
                    }
                    declared = Some(set);
                }
                "output" => {
                    if output.is_some() {
                        return Err(err("more than one output line"));
                    }
                    if toks.len() != 2 {
                        return Err(err("expected `output <id>`"));
                    }
                    let id = parse_id(toks[1]).ok_or_else(|| err("bad gate id"))?;
                    if !gates.contains_key(&id) {
                        return Err(err("output refers to an undeclared gate"));
                    }
                    output = Some(id);
                }
                "gate" => {
                    if toks.len() < 3 {
                        return Err(err("truncated gate line"));
                    }
                    let id = parse_id(toks[1]).ok_or_else(|| err("bad gate id"))?;
                    if gates.contains_key(&id) {
                        return Err(err("duplicate gate id"));
                    }
                    let args = &toks[3..];
                    let refs = |k: usize| -> Result<Vec<GateId>, CircuitError> {
                        if args.len() != k {
                            return Err(err("wrong number of operands"));
                        }
                        args.iter()
                            .map(|a| {
                                let i = parse_id(a).ok_or_else(|| err("bad gate id"))?;
                                if gates.contains_key(&i) {
                                    Ok(i)
                                } else {
                                    Err(err("reference to an undeclared gate"))
                                }
                            })
                            .collect()
                    };
                    let gate = match toks[2] {
                        "AND" => Gate { kind: GateKind::And, inputs: refs(2)? },
                        "OR" => Gate { kind: GateKind::Or, inputs: refs(2)? },
                        "NOT" => Gate { kind: GateKind::Not, inputs: refs(1)? },
                        "CONST" => match args {
                            ["0"] => Gate::constant(false),
                            ["1"] => Gate::constant(true),
                            _ => return Err(err("CONST takes 0 or 1")),
                        },
                        "INPUT" => {
                            if args.len() != 1 {
                                return Err(err("INPUT takes one variable"));
                            }
                            let v: VarRef = args[0].parse().map_err(|e: CircuitError| err(&e.to_string()))?;
                            if let Some(d) = &declared {
                                if !d.contains(&v) {
                                    return Err(err("variable missing from the inputs line"));
                                }
                            }
                            Gate::input(v)
                        }
                        other => return Err(err(&format!("unknown gate kind {other}"))),
                    };
                    gates.insert(id, gate);
                }
                other => return Err(err(&format!("unknown directive {other}"))),
            }
        }
        let output = output.ok_or(CircuitError::Parse { line: 0, msg: "missing output line".into() })?;
        Ok(Circuit { gates, output })
    }

    pub fn canonical_form(&self) -> Vec<u8> {
        crate::canon::canonical_form(self, true)
    }

    /// Canonical form with INPUT labels erased.
    pub fn open_canonical_form(&self) -> Vec<u8> {
        crate::canon::canonical_form(self, false)
    }
}

fn parse_id(s: &str) -> Option<GateId> {
    s.parse::<u32>().ok().map(GateId)
}

/// Incremental builder used by tests and constructions.
#[derive(Debug, Default, Clone)]
pub struct Builder {
    gates: BTreeMap<GateId, Gate>,
    next: u32,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, g: Gate) -> GateId {
        let id = GateId(self.next);
        self.next += 1;
        self.gates.insert(id, g);
        id
    }

    pub fn input(&mut self, v: VarRef) -> GateId {
        self.push(Gate::input(v))
    }

    pub fn and(&mut self, a: GateId, b: GateId) -> GateId {
        self.push(Gate::and(a, b))
    }

    pub fn or(&mut self, a: GateId, b: GateId) -> GateId {
        self.push(Gate::or(a, b))
    }

    pub fn not(&mut self, a: GateId) -> GateId {
        self.push(Gate::not(a))
    }

    pub fn constant(&mut self, c: bool) -> GateId {
        self.push(Gate::constant(c))
    }

    pub fn finish(self, output: GateId) -> Circuit {
        Circuit { gates: self.gates, output }
    }
}

/// `(x1 ∨ x2) ∧ ¬(x1 ∧ x2)` with each input read twice.
pub fn xor2_circuit() -> Circuit {
    let mut b = Builder::new();
    let x1 = b.input(VarRef::x(1));
    let x2 = b.input(VarRef::x(2));
    let o = b.or(x1, x2);
    let a = b.and(x1, x2);
    let na = b.not(a);
    let out = b.and(o, na);
    b.finish(out)
}

/// Chains XOR_2 blocks left to right over `x1..xn` (3(n-1) binary gates).
pub fn xor_chain_circuit(n: u32) -> Circuit {
    let mut b = Builder::new();
    let mut acc = b.input(VarRef::x(1));
    for i in 2..=n {
        let xi = b.input(VarRef::x(i));
        let o = b.or(acc, xi);
        let a = b.and(acc, xi);
        let na = b.not(a);
        acc = b.and(o, na);
    }
    b.finish(acc)
}
