//! The seventeen gate-elimination rules, garbage collection, substitution
//! and normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateId, GateKind, VarRef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("step {index} ({step}) does not apply")]
    Replay { index: usize, step: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Index into [`RULE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RuleId(pub u8);

pub const FIX_AND_L: RuleId = RuleId(0);
pub const FIX_AND_R: RuleId = RuleId(1);
pub const FIX_OR_L: RuleId = RuleId(2);
pub const FIX_OR_R: RuleId = RuleId(3);
pub const FIX_NOT_0: RuleId = RuleId(4);
pub const FIX_NOT_1: RuleId = RuleId(5);
pub const PASS_AND_L: RuleId = RuleId(6);
pub const PASS_AND_R: RuleId = RuleId(7);
pub const PASS_OR_L: RuleId = RuleId(8);
pub const PASS_OR_R: RuleId = RuleId(9);
pub const RESOLVE_AND_R: RuleId = RuleId(10);
pub const RESOLVE_AND_L: RuleId = RuleId(11);
pub const RESOLVE_OR_R: RuleId = RuleId(12);
pub const RESOLVE_OR_L: RuleId = RuleId(13);
pub const PRUNE_AND: RuleId = RuleId(14);
pub const PRUNE_OR: RuleId = RuleId(15);
pub const PRUNE_NOT: RuleId = RuleId(16);

/// Rule names by id.
///
/// | id | name | pattern | result |
/// |----|------|---------|--------|
/// | 0 | FIX_AND_L | 0 ∧ γ | 0 |
/// | 1 | FIX_AND_R | γ ∧ 0 | 0 |
/// | 2 | FIX_OR_L | 1 ∨ γ | 1 |
/// | 3 | FIX_OR_R | γ ∨ 1 | 1 |
/// | 4 | FIX_NOT_0 | ¬0 | 1 |
/// | 5 | FIX_NOT_1 | ¬1 | 0 |
/// | 6 | PASS_AND_L | 1 ∧ γ | γ |
/// | 7 | PASS_AND_R | γ ∧ 1 | γ |
/// | 8 | PASS_OR_L | 0 ∨ γ | γ |
/// | 9 | PASS_OR_R | γ ∨ 0 | γ |
/// | 10 | RESOLVE_AND_R | γ ∧ ¬γ | 0 |
/// | 11 | RESOLVE_AND_L | ¬γ ∧ γ | 0 |
/// | 12 | RESOLVE_OR_R | γ ∨ ¬γ | 1 |
/// | 13 | RESOLVE_OR_L | ¬γ ∨ γ | 1 |
/// | 14 | PRUNE_AND | γ ∧ γ | γ |
/// | 15 | PRUNE_OR | γ ∨ γ | γ |
/// | 16 | PRUNE_NOT | ¬¬γ | γ |
pub const RULE_NAMES: [&str; 17] = [
    "FIX_AND_L",
    "FIX_AND_R",
    "FIX_OR_L",
    "FIX_OR_R",
    "FIX_NOT_0",
    "FIX_NOT_1",
    "PASS_AND_L",
    "PASS_AND_R",
    "PASS_OR_L",
    "PASS_OR_R",
    "RESOLVE_AND_R",
    "RESOLVE_AND_L",
    "RESOLVE_OR_R",
    "RESOLVE_OR_L",
    "PRUNE_AND",
    "PRUNE_OR",
    "PRUNE_NOT",
];

impl RuleId {
    pub fn name(&self) -> &'static str {
        RULE_NAMES[self.0 as usize]
    }

    pub fn is_fixing(&self) -> bool {
        self.0 <= 5
    }

    pub fn is_passing(&self) -> bool {
        (6..=9).contains(&self.0)
    }

    pub fn is_resolving(&self) -> bool {
        (10..=13).contains(&self.0)
    }

    pub fn is_pruning(&self) -> bool {
        self.0 >= 14
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RULE_NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| RuleId(i as u8))
            .ok_or_else(|| format!("unknown rule {s}"))
    }
}

/// Pattern roles a circuit gate can bind to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Alpha,
    Gamma,
    Kappa,
    NuAlpha,
    NuGamma,
    NuKappa,
    /// α when α is the designated output.
    Out,
}

const SLOT_NAMES: [(Slot, &str); 7] = [
    (Slot::Alpha, "alpha"),
    (Slot::Gamma, "gamma"),
    (Slot::Kappa, "kappa"),
    (Slot::NuAlpha, "nu_alpha"),
    (Slot::NuGamma, "nu_gamma"),
    (Slot::NuKappa, "nu_kappa"),
    (Slot::Out, "out"),
];

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(SLOT_NAMES.iter().find(|(s, _)| s == self).unwrap().1)
    }
}

impl FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SLOT_NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(s, _)| *s)
            .ok_or_else(|| format!("unknown slot {s}"))
    }
}

pub type Binding = BTreeMap<Slot, GateId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Gc(GateId),
    Ge { rule: RuleId, binding: Binding },
    Sub { var: VarRef, value: bool },
}

impl Step {
    pub fn alpha(&self) -> Option<GateId> {
        match self {
            Step::Ge { binding, .. } => binding.get(&Slot::Alpha).copied(),
            _ => None,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Gc(g) => write!(f, "GC {g}"),
            Step::Ge { rule, binding } => {
                write!(f, "GE {rule}")?;
                for (s, g) in binding {
                    write!(f, " {s}={g}")?;
                }
                Ok(())
            }
            Step::Sub { var, value } => {
                let class = if var.is_ext() { 'y' } else { 'x' };
                write!(f, "SUB {class} {} {}", var.index, u8::from(*value))
            }
        }
    }
}

/// A sequence of steps; with no `Sub` steps it is a simplification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Restriction {
    pub steps: Vec<Step>,
}

impl Restriction {
    pub fn is_simplification(&self) -> bool {
        !self.steps.iter().any(|s| matches!(s, Step::Sub { .. }))
    }

    /// Gate-elimination steps only.
    pub fn rules(&self) -> Vec<RuleId> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::Ge { rule, .. } => Some(*rule),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Restriction {
    type Err = RewriteError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| RewriteError::Parse { line, msg };
            let toks: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let id = |s: &str| s.parse::<u32>().map(GateId).map_err(|_| err(format!("bad gate id {s}")));
            let step = match toks[0] {
                "GC" if toks.len() == 2 => Step::Gc(id(toks[1])?),
                "GE" if toks.len() >= 2 => {
                    let rule = toks[1].parse::<RuleId>().map_err(err)?;
                    let mut binding = Binding::new();
                    for t in &toks[2..] {
                        let (s, g) = t.split_once('=').ok_or_else(|| err(format!("bad binding {t}")))?;
                        binding.insert(s.parse::<Slot>().map_err(err)?, id(g)?);
                    }
                    Step::Ge { rule, binding }
                }
                "SUB" if toks.len() == 4 => {
                    let var: VarRef = format!("{}{}", toks[1], toks[2])
                        .parse()
                        .map_err(|e: CircuitError| err(e.to_string()))?;
                    let value = match toks[3] {
                        "0" => false,
                        "1" => true,
                        v => return Err(err(format!("bad value {v}"))),
                    };
                    Step::Sub { var, value }
                }
                _ => return Err(err(format!("cannot parse step {raw:?}"))),
            };
            steps.push(step);
        }
        Ok(Restriction { steps })
    }
}

fn is_const(c: &Circuit, g: GateId, v: bool) -> bool {
    c.gates.get(&g).map_or(false, |x| x.kind == GateKind::Const(v))
}

fn not_of(c: &Circuit, g: GateId) -> Option<GateId> {
    let x = c.gates.get(&g)?;
    (x.kind == GateKind::Not).then(|| x.inputs[0])
}

fn bind(c: &Circuit, pairs: &[(Slot, GateId)]) -> Binding {
    let mut b: Binding = pairs.iter().copied().collect();
    let alpha = b[&Slot::Alpha];
    if alpha == c.output {
        b.insert(Slot::Out, alpha);
    }
    b
}

/// Every rule whose left-hand side matches with `alpha` as main connective,
/// in rule order.
pub fn match_at(c: &Circuit, alpha: GateId) -> Vec<(RuleId, Binding)> {
    let mut out = Vec::new();
    let Some(g) = c.gates.get(&alpha) else {
        return out;
    };
    use Slot::*;
    match g.kind {
        GateKind::And | GateKind::Or => {
            let (l, r) = (g.inputs[0], g.inputs[1]);
            let and = g.kind == GateKind::And;
            let (absorb, ident) = if and { (false, true) } else { (true, false) };
            let (fix, pass, resolve, prune) = if and {
                ((FIX_AND_L, FIX_AND_R), (PASS_AND_L, PASS_AND_R), (RESOLVE_AND_R, RESOLVE_AND_L), PRUNE_AND)
            } else {
                ((FIX_OR_L, FIX_OR_R), (PASS_OR_L, PASS_OR_R), (RESOLVE_OR_R, RESOLVE_OR_L), PRUNE_OR)
            };
            if is_const(c, l, absorb) {
                out.push((fix.0, bind(c, &[(Alpha, alpha), (Kappa, l), (Gamma, r)])));
            }
            if is_const(c, r, absorb) {
                out.push((fix.1, bind(c, &[(Alpha, alpha), (Gamma, l), (Kappa, r)])));
            }
            if is_const(c, l, ident) {
                out.push((pass.0, bind(c, &[(Alpha, alpha), (Kappa, l), (Gamma, r)])));
            }
            if is_const(c, r, ident) {
                out.push((pass.1, bind(c, &[(Alpha, alpha), (Gamma, l), (Kappa, r)])));
            }
            if not_of(c, r) == Some(l) {
                out.push((resolve.0, bind(c, &[(Alpha, alpha), (Gamma, l), (NuGamma, r)])));
            }
            if not_of(c, l) == Some(r) {
                out.push((resolve.1, bind(c, &[(Alpha, alpha), (NuGamma, l), (Gamma, r)])));
            }
            if l == r {
                out.push((prune, bind(c, &[(Alpha, alpha), (Gamma, l)])));
            }
        }
        GateKind::Not => {
            let k = g.inputs[0];
            if is_const(c, k, false) {
                out.push((FIX_NOT_0, bind(c, &[(Alpha, alpha), (Kappa, k)])));
            }
            if is_const(c, k, true) {
                out.push((FIX_NOT_1, bind(c, &[(Alpha, alpha), (Kappa, k)])));
            }
            if let Some(inner) = not_of(c, k) {
                out.push((PRUNE_NOT, bind(c, &[(Alpha, alpha), (NuGamma, k), (Gamma, inner)])));
            }
        }
        _ => {}
    }
    out
}

/// All matches ordered by the depth-order position of α, then rule id.
pub fn match_rules(c: &Circuit) -> Vec<(RuleId, Binding)> {
    let order = c.depth_order().expect("acyclic circuit");
    order.iter().flat_map(|&a| match_at(c, a)).collect()
}

fn result_constant(rule: RuleId) -> Option<bool> {
    match rule.0 {
        0 | 1 | 5 | 10 | 11 => Some(false),
        2 | 3 | 4 | 12 | 13 => Some(true),
        _ => None,
    }
}

fn redirect(c: &mut Circuit, from: GateId, to: GateId) {
    for g in c.gates.values_mut() {
        for i in g.inputs.iter_mut() {
            if *i == from {
                *i = to;
            }
        }
    }
    if c.output == from {
        c.output = to;
    }
}

fn apply_ge(c: &mut Circuit, rule: RuleId, binding: &Binding) -> bool {
    let Some(&alpha) = binding.get(&Slot::Alpha) else {
        return false;
    };
    let current = match_at(c, alpha);
    let wanted: Vec<_> = binding.iter().filter(|(s, _)| **s != Slot::Out).collect();
    let ok = current.iter().any(|(r, b)| {
        *r == rule && b.iter().filter(|(s, _)| **s != Slot::Out).collect::<Vec<_>>() == wanted
    });
    if !ok {
        return false;
    }
    #[cfg(debug_assertions)]
    let before = c.fanouts();
    match result_constant(rule) {
        Some(v) => {
            let g = c.gates.get_mut(&alpha).unwrap();
            g.kind = GateKind::Const(v);
            g.inputs.clear();
        }
        None => redirect(c, alpha, binding[&Slot::Gamma]),
    }
    #[cfg(debug_assertions)]
    check_fanout_table(c, rule, binding, &before);
    true
}

/// Fanout updates per rule category, counted as if α were already
/// collected when it lost all its readers.
#[cfg(debug_assertions)]
fn check_fanout_table(c: &Circuit, rule: RuleId, b: &Binding, before: &BTreeMap<GateId, usize>) {
    let mut after = c.fanouts();
    let alpha = b[&Slot::Alpha];
    if after[&alpha] == 0 && alpha != c.output {
        for i in &c.gates[&alpha].inputs {
            *after.get_mut(i).unwrap() -= 1;
        }
    }
    let fo = |m: &BTreeMap<GateId, usize>, s: Slot| b.get(&s).map(|g| m[g] as i64);
    let mut distinct: Vec<GateId> = b.iter().filter(|(s, _)| **s != Slot::Out).map(|(_, g)| *g).collect();
    distinct.sort();
    let aliased = distinct.windows(2).any(|w| w[0] == w[1]);
    if rule.is_fixing() {
        if let Some(k) = fo(before, Slot::Kappa) {
            assert!(aliased || fo(&after, Slot::Kappa) == Some(k - 1));
        }
        if let Some(g) = fo(before, Slot::Gamma) {
            assert!(aliased || fo(&after, Slot::Gamma) == Some(g - 1));
        }
        assert_eq!(fo(&after, Slot::Alpha), fo(before, Slot::Alpha));
    } else if rule.is_passing() {
        let a = fo(before, Slot::Alpha).unwrap();
        if !aliased {
            assert_eq!(fo(&after, Slot::Kappa), fo(before, Slot::Kappa).map(|k| k - 1));
            let g = fo(before, Slot::Gamma).unwrap();
            assert_eq!(fo(&after, Slot::Gamma).unwrap(), g + a - 1);
        }
        assert_eq!(fo(&after, Slot::Alpha), Some(0));
    } else if rule.is_resolving() {
        assert_eq!(fo(&after, Slot::Alpha), fo(before, Slot::Alpha));
        assert_eq!(fo(&after, Slot::Gamma), fo(before, Slot::Gamma).map(|g| g - 1));
        assert_eq!(fo(&after, Slot::NuGamma), fo(before, Slot::NuGamma).map(|g| g - 1));
    } else {
        let a = fo(before, Slot::Alpha).unwrap();
        let g = fo(before, Slot::Gamma).unwrap();
        assert!(fo(&after, Slot::Gamma).unwrap() >= g + a - 2);
        assert_eq!(fo(&after, Slot::Alpha), Some(0));
        if let Some(n) = fo(before, Slot::NuGamma) {
            assert_eq!(fo(&after, Slot::NuGamma), Some(n - 1));
        }
    }
}

/// Applies one step; unmatched steps leave the circuit unchanged.
pub fn apply_step(c: &Circuit, step: &Step) -> (Circuit, bool) {
    let mut next = c.clone();
    let applied = apply_step_mut(&mut next, step);
    if applied {
        (next, true)
    } else {
        (c.clone(), false)
    }
}

pub fn apply_step_mut(c: &mut Circuit, step: &Step) -> bool {
    match step {
        Step::Gc(g) => {
            if *g == c.output || !c.gates.contains_key(g) || c.fanout(*g).unwrap() != 0 {
                return false;
            }
            c.gates.remove(g);
            true
        }
        Step::Ge { rule, binding } => apply_ge(c, *rule, binding),
        Step::Sub { var, value } => {
            let mut hit = false;
            for g in c.gates.values_mut() {
                if g.kind == GateKind::Input(*var) {
                    g.kind = GateKind::Const(*value);
                    hit = true;
                }
            }
            hit
        }
    }
}

/// Deletes unread non-output gates, smallest id first, until none remain.
fn collect_garbage(c: &mut Circuit, rec: &mut Vec<Step>) {
    let mut fo = c.fanouts();
    loop {
        let victim = fo.iter().find(|(g, n)| **n == 0 && **g != c.output).map(|(g, _)| *g);
        let Some(v) = victim else {
            return;
        };
        let gate = c.gates.remove(&v).unwrap();
        fo.remove(&v);
        for i in &gate.inputs {
            *fo.get_mut(i).unwrap() -= 1;
        }
        rec.push(Step::Gc(v));
    }
}

fn normalize_into(c: &mut Circuit, rec: &mut Vec<Step>) {
    collect_garbage(c, rec);
    let order = c.depth_order().expect("acyclic circuit");
    let pos: BTreeMap<GateId, usize> = order.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    loop {
        let mut alphas: Vec<GateId> = c.gates.keys().copied().collect();
        alphas.sort_by_key(|g| pos[g]);
        let first = alphas.iter().find_map(|&a| match_at(c, a).into_iter().next());
        let Some((rule, binding)) = first else {
            return;
        };
        let applied = apply_ge(c, rule, &binding);
        debug_assert!(applied);
        rec.push(Step::Ge { rule, binding });
        collect_garbage(c, rec);
    }
}

/// Depth-ordered terminal simplification with eager garbage collection.
pub fn normalize(c: &Circuit) -> (Circuit, Restriction) {
    let mut out = c.clone();
    let mut steps = Vec::new();
    normalize_into(&mut out, &mut steps);
    (out, Restriction { steps })
}

/// Substitutes variables in ascending order, normalizing after each.
pub fn substitute_and_normalize(c: &Circuit, assignment: &BTreeMap<VarRef, bool>) -> (Circuit, Restriction) {
    let mut out = c.clone();
    let mut steps = Vec::new();
    normalize_into(&mut out, &mut steps);
    for (&var, &value) in assignment {
        let step = Step::Sub { var, value };
        if apply_step_mut(&mut out, &step) {
            steps.push(step);
            normalize_into(&mut out, &mut steps);
        }
    }
    (out, Restriction { steps })
}

/// Substitutes a single variable and normalizes.
pub fn restrict_one(c: &Circuit, var: VarRef, value: bool) -> (Circuit, Restriction) {
    substitute_and_normalize(c, &[(var, value)].into_iter().collect())
}

pub fn has_garbage(c: &Circuit) -> bool {
    c.fanouts().iter().any(|(g, n)| *n == 0 && *g != c.output)
}

pub fn is_normalized(c: &Circuit) -> bool {
    !has_garbage(c) && c.gates.keys().all(|&g| match_at(c, g).is_empty())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordCheck {
    pub terminal: bool,
    pub layered: bool,
}

/// Replays `rec`; layering is judged per segment between substitutions
/// against the depths at the start of the segment.
pub fn check_record(c: &Circuit, rec: &Restriction) -> Result<RecordCheck, RewriteError> {
    let mut cur = c.clone();
    let mut depths = cur.depths()?;
    let mut last: Option<usize> = None;
    let mut layered = true;
    for (index, step) in rec.steps.iter().enumerate() {
        if let Step::Ge { binding, .. } = step {
            if let Some(alpha) = binding.get(&Slot::Alpha) {
                if cur.gates.get(alpha).map_or(false, |g| g.kind.is_binary()) {
                    let d = depths[alpha];
                    if last.map_or(false, |l| d > l) {
                        layered = false;
                    }
                    last = Some(d);
                }
            }
        }
        if !apply_step_mut(&mut cur, step) {
            return Err(RewriteError::Replay { index, step: step.to_string() });
        }
        if matches!(step, Step::Sub { .. }) {
            depths = cur.depths()?;
            last = None;
        }
    }
    Ok(RecordCheck { terminal: is_normalized(&cur), layered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{xor2_circuit, xor_chain_circuit, Builder, SizeMeasure};
    use proptest::prelude::*;

    fn vars(c: &Circuit) -> Vec<VarRef> {
        c.variables()
    }

    #[test]
    fn passing_redirects_readers() {
        let mut b = Builder::new();
        let k = b.constant(true);
        let x = b.input(VarRef::x(1));
        let a = b.and(k, x);
        let n = b.not(a);
        let c = b.finish(n);
        let m = match_at(&c, a);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].0, PASS_AND_L);
        let (c2, ok) = apply_step(&c, &Step::Ge { rule: m[0].0, binding: m[0].1.clone() });
        assert!(ok);
        assert_eq!(c2.gates[&n].inputs, vec![x]);
        assert_eq!(c2.fanout(a).unwrap(), 0);
    }

    #[test]
    fn gc_removes_unread_gate() {
        let mut b = Builder::new();
        let x = b.input(VarRef::x(1));
        let y = b.input(VarRef::x(2));
        let n = b.not(x);
        let c = b.finish(n);
        let (c2, ok) = apply_step(&c, &Step::Gc(y));
        assert!(ok);
        assert!(!c2.gates.contains_key(&y));
        let (c3, ok) = apply_step(&c, &Step::Gc(x));
        assert!(!ok);
        assert_eq!(c3, c);
        assert!(!apply_step(&c, &Step::Gc(n)).1);
    }

    #[test]
    fn resolving_or_becomes_one() {
        let mut b = Builder::new();
        let x = b.input(VarRef::x(1));
        let n = b.not(x);
        let o = b.or(x, n);
        let c = b.finish(o);
        let m = match_rules(&c);
        assert_eq!(m[0].0, RESOLVE_OR_R);
        let (c2, ok) = apply_step(&c, &Step::Ge { rule: m[0].0, binding: m[0].1.clone() });
        assert!(ok);
        assert_eq!(c2.gates[&o].kind, GateKind::Const(true));
        assert!(c2.gates[&o].inputs.is_empty());
    }

    #[test]
    fn mismatched_step_is_idempotent() {
        let c = xor2_circuit();
        let binding: Binding = [(Slot::Alpha, GateId(2)), (Slot::Kappa, GateId(0)), (Slot::Gamma, GateId(1))]
            .into_iter()
            .collect();
        let (c2, ok) = apply_step(&c, &Step::Ge { rule: FIX_OR_L, binding });
        assert!(!ok);
        assert_eq!(c2, c);
        assert!(!apply_step(&c, &Step::Sub { var: VarRef::y(1), value: true }).1);
    }

    #[test]
    fn match_examples() {
        assert!(match_rules(&xor2_circuit()).is_empty());
        let mut b = Builder::new();
        let x = b.input(VarRef::x(1));
        let n1 = b.not(x);
        let n2 = b.not(n1);
        let c = b.finish(n2);
        let m = match_rules(&c);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].0, PRUNE_NOT);
        let mut b = Builder::new();
        let k = b.constant(false);
        let x = b.input(VarRef::x(1));
        let a = b.and(k, x);
        let m = match_rules(&b.finish(a));
        assert_eq!(m.len(), 1);
        assert!(m[0].0.is_fixing());
    }

    #[test]
    fn normalize_examples() {
        let mut b = Builder::new();
        let k = b.constant(true);
        let x = b.input(VarRef::x(1));
        let a = b.and(k, x);
        let c = b.finish(a);
        let (n, rec) = normalize(&c);
        assert_eq!(n.output, x);
        assert_eq!(n.size(SizeMeasure::D), 0);
        assert_eq!(c.size(SizeMeasure::D) - n.size(SizeMeasure::D), 1);
        let chk = check_record(&c, &rec).unwrap();
        assert!(chk.terminal && chk.layered);

        let x = xor2_circuit();
        let (n, rec) = normalize(&x);
        assert_eq!(n, x);
        assert!(rec.steps.is_empty());
    }

    #[test]
    fn xor3_restricted_by_x1_has_three_gates() {
        let c = xor_chain_circuit(3);
        for v in [false, true] {
            let (r, rec) = restrict_one(&c, VarRef::x(1), v);
            assert_eq!(r.size(SizeMeasure::D), 3);
            assert!(is_normalized(&r));
            let t = r.truth_table(&[VarRef::x(2), VarRef::x(3)]).unwrap();
            assert_eq!(t.to_string(), if v { "1001" } else { "0110" });
            let chk = check_record(&c, &rec).unwrap();
            assert!(chk.terminal && chk.layered);
        }
    }

    #[test]
    fn xor2_restricted_to_x2() {
        let c = xor2_circuit();
        let (r, _) = restrict_one(&c, VarRef::x(1), false);
        assert_eq!(r.size(SizeMeasure::D), 0);
        assert_eq!(r.truth_table(&[VarRef::x(2)]).unwrap().to_string(), "01");
        let (same, rec) = substitute_and_normalize(&c, &BTreeMap::new());
        assert_eq!(same, c);
        assert!(rec.steps.is_empty());
    }

    #[test]
    fn xor3_restricted_twice_is_x3() {
        let c = xor_chain_circuit(3);
        let a: BTreeMap<VarRef, bool> = [(VarRef::x(1), true), (VarRef::x(2), true)].into_iter().collect();
        let (r, rec) = substitute_and_normalize(&c, &a);
        assert_eq!(r.truth_table(&[VarRef::x(3)]).unwrap().to_string(), "01");
        let chk = check_record(&c, &rec).unwrap();
        assert!(chk.terminal && chk.layered);
    }

    #[test]
    fn empty_record_on_constant_circuit_is_not_terminal() {
        let mut b = Builder::new();
        let k = b.constant(false);
        let x = b.input(VarRef::x(1));
        let a = b.or(k, x);
        let c = b.finish(a);
        let chk = check_record(&c, &Restriction::default()).unwrap();
        assert!(!chk.terminal);
    }

    #[test]
    fn shallow_before_deep_is_not_layered() {
        // out = OR(AND(1, x1), AND(x2, 1)) with an extra level under the left AND
        let mut b = Builder::new();
        let k1 = b.constant(true);
        let k2 = b.constant(true);
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let deep = b.and(k1, x1);
        let mid = b.or(deep, x2);
        let shallow = b.and(x2, k2);
        let out = b.and(mid, shallow);
        let c = b.finish(out);
        let d = c.depths().unwrap();
        assert!(d[&deep] > d[&shallow]);
        let step = |c: &Circuit, a: GateId| {
            let (r, b) = match_at(c, a).remove(0);
            Step::Ge { rule: r, binding: b }
        };
        let s_shallow = step(&c, shallow);
        let s_deep = step(&c, deep);
        let rec = Restriction { steps: vec![s_shallow.clone(), s_deep.clone()] };
        assert!(!check_record(&c, &rec).unwrap().layered);
        let rec = Restriction { steps: vec![s_deep, s_shallow] };
        assert!(check_record(&c, &rec).unwrap().layered);
    }

    #[test]
    fn replay_failure_is_reported() {
        let c = xor2_circuit();
        let rec = Restriction { steps: vec![Step::Gc(GateId(0))] };
        assert!(matches!(check_record(&c, &rec), Err(RewriteError::Replay { index: 0, .. })));
    }

    #[test]
    fn record_text_roundtrip() {
        let c = xor_chain_circuit(3);
        let (_, rec) = restrict_one(&c, VarRef::x(2), true);
        let text = rec.to_string();
        assert!(text.contains("SUB x 2 1"));
        let back: Restriction = text.parse().unwrap();
        assert_eq!(back, rec);
        for (i, name) in RULE_NAMES.iter().enumerate() {
            assert_eq!(name.parse::<RuleId>().unwrap(), RuleId(i as u8));
        }
    }

    /// Random well-formed circuit where every gate reaches the output.
    fn arb_circuit() -> impl Strategy<Value = Circuit> {
        (prop::collection::vec((0u8..5, 0usize..64, 0usize..64), 1..12), 1u32..4).prop_map(|(ops, nv)| {
            let mut b = Builder::new();
            let mut ids: Vec<GateId> = (1..=nv).map(|i| b.input(VarRef::x(i))).collect();
            for (op, p, q) in ops {
                let a = ids[p % ids.len()];
                let c = ids[q % ids.len()];
                let g = match op {
                    0 => b.and(a, c),
                    1 => b.or(a, c),
                    2 => b.not(a),
                    3 => b.constant(p % 2 == 0),
                    _ => b.not(c),
                };
                ids.push(g);
            }
            let out = *ids.last().unwrap();
            let c = b.finish(out);
            c.subcircuit(out).unwrap()
        })
    }

    fn constant_fanout(c: &Circuit) -> usize {
        let fo = c.fanouts();
        c.gates.iter().filter(|(_, g)| matches!(g.kind, GateKind::Const(_))).map(|(id, _)| fo[id]).sum()
    }

    proptest! {
        #[test]
        fn normalize_preserves_function(c in arb_circuit()) {
            let vs = vars(&c);
            let (n, rec) = normalize(&c);
            let before = c.truth_table(&vs).unwrap();
            prop_assert_eq!(n.truth_table(&vs).unwrap(), before);
            prop_assert!(is_normalized(&n));
            let chk = check_record(&c, &rec).unwrap();
            prop_assert!(chk.terminal);
            prop_assert!(chk.layered);
        }

        #[test]
        fn normalize_is_idempotent(c in arb_circuit()) {
            let (n, _) = normalize(&c);
            let (n2, rec2) = normalize(&n);
            prop_assert_eq!(n2, n);
            prop_assert!(rec2.steps.is_empty());
        }

        #[test]
        fn constants_pay_for_themselves(c in arb_circuit()) {
            let ell = constant_fanout(&c);
            let (n, _) = normalize(&c);
            let single_constant = n.gates.len() == 1 && matches!(n.gates[&n.output].kind, GateKind::Const(_));
            prop_assert!(single_constant || n.size(SizeMeasure::D) + ell <= c.size(SizeMeasure::D));
        }

        #[test]
        fn each_step_costs_at_most_one_unit_of_constant_fanout(c in arb_circuit()) {
            let (_, rec) = normalize(&c);
            let mut cur = c.clone();
            let ell = constant_fanout(&c) as i64;
            let size0 = c.size(SizeMeasure::D) as i64;
            let mut last_alpha = None;
            for s in &rec.steps {
                let phi = constant_fanout(&cur) as i64;
                let size = cur.size(SizeMeasure::D) as i64;
                // the output has an implicit reader the fanout count misses
                let at_output = s.alpha() == Some(cur.output);
                prop_assert!(apply_step_mut(&mut cur, s));
                match s {
                    Step::Ge { binding, .. } => {
                        let alpha = binding[&Slot::Alpha];
                        last_alpha = Some(alpha);
                        // account for α as already collected
                        let mut probe = cur.clone();
                        if alpha != probe.output && probe.fanout(alpha).unwrap() == 0 {
                            probe.gates.remove(&alpha);
                        }
                        let dphi = constant_fanout(&probe) as i64 - phi;
                        prop_assert!(dphi >= -1 || at_output);
                        if dphi == -1 && !at_output {
                            prop_assert!((probe.size(SizeMeasure::D) as i64) < size);
                        }
                        let const_out = matches!(probe.gates[&probe.output].kind, GateKind::Const(_));
                        if constant_fanout(&probe) == 0 && !const_out {
                            prop_assert!(size0 - probe.size(SizeMeasure::D) as i64 >= ell);
                        }
                    }
                    Step::Gc(g) if Some(*g) != last_alpha => {
                        prop_assert_eq!(constant_fanout(&cur) as i64, phi);
                    }
                    _ => {}
                }
            }
        }

        #[test]
        fn substitution_computes_the_restriction(c in arb_circuit(), v in 1u32..4, bit in any::<bool>()) {
            let vs = vars(&c);
            let var = VarRef::x(v);
            let (r, rec) = restrict_one(&c, var, bit);
            let full = c.truth_table(&vs).unwrap();
            let (restricted_vars, fixed): (Vec<VarRef>, BTreeMap<usize, bool>) = match vs.iter().position(|w| *w == var) {
                Some(p) => (vs.iter().copied().filter(|w| *w != var).collect(), [(p + 1, bit)].into_iter().collect()),
                None => (vs.clone(), BTreeMap::new()),
            };
            let want = full.restrict(&fixed).unwrap();
            prop_assert_eq!(r.truth_table(&restricted_vars).unwrap(), want);
            let chk = check_record(&c, &rec).unwrap();
            prop_assert!(chk.terminal && chk.layered);
        }
    }
}
