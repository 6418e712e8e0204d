//! Optimal parity circuits: the XOR_2 block inventory, the open catalog of
//! block trees, and recovery of the block partition of a given circuit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateId, GateKind, SizeMeasure, VarRef};
use crate::oracle::{enumerate_optimal_circuits, OracleError};
use crate::rewrite::is_normalized;
use crate::sig::{SigCircuit, SigNode};
use crate::tt::{all_permutations, TruthTable};

pub const MAX_CATALOG_VARS: usize = 8;

#[derive(Debug, Error)]
pub enum XorError {
    #[error("catalog arity {0} outside 2..={MAX_CATALOG_VARS}")]
    Arity(usize),
    #[error("catalog file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub fn xor_tt(n: usize) -> TruthTable {
    TruthTable::from_fn(n, |r| r.count_ones() % 2 == 1)
}

/// Every normalized optimal circuit for XOR_2 or its complement.
pub fn xor2_blocks(measure: SizeMeasure) -> Result<Vec<Circuit>, XorError> {
    let mut out = enumerate_optimal_circuits(&xor_tt(2), measure)?;
    out.extend(enumerate_optimal_circuits(&xor_tt(2).not(), measure)?);
    Ok(out)
}

/// A circuit whose inputs are placeholders; `slots` lists them in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenCircuit {
    pub circuit: Circuit,
    pub slots: Vec<GateId>,
}

impl OpenCircuit {
    pub fn from_circuit(circuit: Circuit) -> Self {
        let slots = circuit
            .gates
            .iter()
            .filter(|(_, g)| matches!(g.kind, GateKind::Input(_)))
            .map(|(id, _)| *id)
            .collect();
        OpenCircuit { circuit, slots }
    }

    /// Slot `i` reads `vars[i]`.
    pub fn label(&self, vars: &[VarRef]) -> Circuit {
        assert_eq!(vars.len(), self.slots.len());
        let mut c = self.circuit.clone();
        for (s, v) in self.slots.iter().zip(vars) {
            c.gates.insert(*s, Gate::input(*v));
        }
        c
    }

    pub fn open_canonical_form(&self) -> Vec<u8> {
        self.circuit.open_canonical_form()
    }
}

#[derive(Debug, Clone)]
pub struct CatalogMeta {
    pub n: usize,
    pub measure: SizeMeasure,
    pub base_size: usize,
    pub max_fanout: usize,
    pub classes: Vec<OpenCircuit>,
}

impl CatalogMeta {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "xor-catalog n={} measure={} ell={} s={}\n",
            self.n, self.measure, self.max_fanout, self.base_size
        );
        for c in &self.classes {
            let ids: Vec<String> = c.slots.iter().map(|g| g.to_string()).collect();
            let _ = writeln!(s, "slots {}", ids.join(" "));
            s.push_str(&c.circuit.to_bcir());
        }
        s
    }

    pub fn parse(text: &str) -> Result<CatalogMeta, XorError> {
        let err = |line: usize, msg: &str| XorError::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| err(1, "empty catalog"))?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.first() != Some(&"xor-catalog") {
            return Err(err(1, "missing xor-catalog header"));
        }
        let mut fields = BTreeMap::new();
        for t in &toks[1..] {
            let (k, v) = t.split_once('=').ok_or_else(|| err(1, "expected key=value"))?;
            fields.insert(k, v);
        }
        let num = |k: &str| -> Result<usize, XorError> {
            fields.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| err(1, &format!("bad or missing {k}")))
        };
        let n = num("n")?;
        let base_size = num("s")?;
        let max_fanout = num("ell")?;
        let measure: SizeMeasure = fields
            .get("measure")
            .ok_or_else(|| err(1, "missing measure"))?
            .parse()
            .map_err(|_| err(1, "bad measure"))?;
        let mut classes = Vec::new();
        let mut cur: Option<(usize, Vec<GateId>, String)> = None;
        let flush = |cur: Option<(usize, Vec<GateId>, String)>, classes: &mut Vec<OpenCircuit>| {
            if let Some((line, slots, body)) = cur {
                let circuit = Circuit::parse_bcir(&body).map_err(|e| err(line, &e.to_string()))?;
                for s in &slots {
                    if !matches!(circuit.gates.get(s).map(|g| g.kind), Some(GateKind::Input(_))) {
                        return Err(err(line, "slot is not an INPUT gate"));
                    }
                }
                classes.push(OpenCircuit { circuit, slots });
            }
            Ok(())
        };
        for (i, l) in lines {
            let t = l.trim();
            if let Some(rest) = t.strip_prefix("slots") {
                flush(cur.take(), &mut classes)?;
                let slots = rest
                    .split_whitespace()
                    .map(|x| x.parse::<u32>().map(GateId).map_err(|_| err(i + 1, "bad slot id")))
                    .collect::<Result<Vec<_>, _>>()?;
                cur = Some((i + 1, slots, String::new()));
            } else {
                let c = cur.as_mut().ok_or_else(|| err(i + 1, "circuit body before a slots line"))?;
                c.2.push_str(l);
                c.2.push('\n');
            }
        }
        flush(cur, &mut classes)?;
        Ok(CatalogMeta { n, measure, base_size, max_fanout, classes })
    }
}

/// Grafts `left` and `right` onto the two inputs of `block`. Returns `None`
/// when a block negation would meet a child's output negation.
fn compose(block: &Circuit, left: &Circuit, right: &Circuit) -> Option<Circuit> {
    let mut gates = BTreeMap::new();
    let mut next = 0u32;
    let mut copy = |c: &Circuit, shift: u32, gates: &mut BTreeMap<GateId, Gate>| {
        let mut map = BTreeMap::new();
        for (id, g) in &c.gates {
            map.insert(*id, GateId(next));
            next += 1;
            let mut g = g.clone();
            if let GateKind::Input(v) = g.kind {
                g.kind = GateKind::Input(VarRef::x(v.index + shift));
            }
            gates.insert(map[id], g);
        }
        for id in c.gates.keys() {
            let g = gates.get_mut(&map[id]).unwrap();
            for i in g.inputs.iter_mut() {
                *i = map[i];
            }
        }
        map
    };
    let lmap = copy(left, 0, &mut gates);
    let width = left.variables().len() as u32;
    let rmap = copy(right, width, &mut gates);
    let lout = lmap[&left.output];
    let rout = rmap[&right.output];
    let slot_of = |v: VarRef| if v.index == 1 { lout } else { rout };
    let mut bmap = BTreeMap::new();
    for id in block.topo_order().ok()? {
        let g = &block.gates[&id];
        match g.kind {
            GateKind::Input(v) => {
                bmap.insert(id, slot_of(v));
            }
            _ => {
                let inputs: Vec<GateId> = g.inputs.iter().map(|i| bmap[i]).collect();
                if g.kind == GateKind::Not && gates[&inputs[0]].kind == GateKind::Not {
                    return None;
                }
                let nid = GateId(next);
                next += 1;
                gates.insert(nid, Gate { kind: g.kind, inputs });
                bmap.insert(id, nid);
            }
        }
    }
    Some(Circuit { gates, output: bmap[&block.output] }.compacted())
}

fn leaf() -> Circuit {
    let mut gates = BTreeMap::new();
    gates.insert(GateId(0), Gate::input(VarRef::x(1)));
    Circuit { gates, output: GateId(0) }
}

/// Open classes of optimal circuits for XOR_k and its complement, for
/// every `k` up to `n`; entry `k` holds both parities.
fn block_trees(n: usize, measure: SizeMeasure) -> Result<Vec<Vec<Circuit>>, XorError> {
    let blocks = xor2_blocks(measure)?;
    let mut cat: Vec<Vec<Circuit>> = vec![Vec::new(), vec![leaf()]];
    for k in 2..=n {
        let mut seen: BTreeMap<Vec<u8>, Circuit> = BTreeMap::new();
        for i in 1..k {
            for l in &cat[i] {
                for r in &cat[k - i] {
                    for b in &blocks {
                        if let Some(c) = compose(b, l, r) {
                            let key = c.open_canonical_form();
                            if !seen.contains_key(&key) && is_normalized(&c) {
                                seen.insert(key, c);
                            }
                        }
                    }
                }
            }
        }
        cat.push(seen.into_values().collect());
    }
    Ok(cat)
}

fn with_fanout_bound(n: usize, measure: SizeMeasure, classes: Vec<Circuit>) -> CatalogMeta {
    let max_fanout = classes.iter().map(max_fanout).max().unwrap_or(0);
    let per_block = if measure == SizeMeasure::D { 3 } else { 4 };
    CatalogMeta {
        n,
        measure,
        base_size: per_block * (n - 1),
        max_fanout,
        classes: classes.into_iter().map(OpenCircuit::from_circuit).collect(),
    }
}

/// Largest gate fanout, the output counting as one more reader.
pub fn max_fanout(c: &Circuit) -> usize {
    let f = c.fanouts();
    f.iter().map(|(id, k)| k + usize::from(*id == c.output)).max().unwrap_or(0)
}

/// Open classes of optimal XOR_n circuits (or of its complement).
pub fn enumerate_open_optimal_parity(n: usize, measure: SizeMeasure, negated: bool) -> Result<CatalogMeta, XorError> {
    if !(2..=MAX_CATALOG_VARS).contains(&n) {
        return Err(XorError::Arity(n));
    }
    let cat = block_trees(n, measure)?;
    let want = if negated { xor_tt(n).not() } else { xor_tt(n) };
    let vars: Vec<VarRef> = (1..=n as u32).map(VarRef::x).collect();
    let classes: Vec<Circuit> =
        cat[n].iter().filter(|c| c.truth_table(&vars).map(|t| t == want).unwrap_or(false)).cloned().collect();
    Ok(with_fanout_bound(n, measure, classes))
}

/// Catalan numbers, `catalan(k)` counting binary trees with `k + 1` leaves.
pub fn catalan(k: usize) -> u64 {
    let mut c = 1u64;
    for i in 0..k as u64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

pub fn enumerate_open_optimal_xor(n: usize, measure: SizeMeasure) -> Result<CatalogMeta, XorError> {
    enumerate_open_optimal_parity(n, measure, false)
}

/// Every labeled circuit obtained from the catalog, as canonical forms.
pub fn labeled_closure(meta: &CatalogMeta) -> BTreeSet<Vec<u8>> {
    let perms = all_permutations(meta.n);
    let mut out = BTreeSet::new();
    for c in &meta.classes {
        for p in &perms {
            let vars: Vec<VarRef> = p.0.iter().map(|&i| VarRef::x(i as u32)).collect();
            out.insert(c.label(&vars).canonical_form());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WireRole {
    In,
    Out,
    Core,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Xor2,
    NotXor2,
}

/// Three binary gates of one block. `sources` are the gates its input
/// wires come from (variables or earlier block outputs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub alpha: GateId,
    pub beta: GateId,
    pub nu: GateId,
    pub sources: [GateId; 2],
    pub parity: Parity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocks: Vec<Block>,
    /// Every wire `(from, to)` with its roles; the output is wire
    /// `(output, output)`.
    pub wires: BTreeMap<(GateId, GateId), BTreeSet<(usize, WireRole)>>,
}

/// Recovers a partition into XOR_2 blocks, or `None` if there is none.
/// Blocks are peeled bottom-up: a deepest binary gate whose inputs are
/// both available wires anchors the next block.
pub fn validate_block_partition(c: &Circuit) -> Option<BlockPartition> {
    let (s, index) = SigCircuit::from_circuit(c).ok()?;
    let k = s.nodes.len();
    let mut gate_of = vec![GateId(0); k];
    for (g, &i) in &index {
        gate_of[i] = *g;
    }
    let readers: Vec<Vec<Option<usize>>> = (0..k).map(|i| s.readers(i).into_iter().map(|(r, _)| r).collect()).collect();
    let inputs_of = |i: usize| match s.nodes[i] {
        SigNode::Gate { inputs, .. } => Some([inputs[0].node, inputs[1].node]),
        SigNode::Input(_) => None,
    };
    let depth = s.depths();
    let binary: Vec<usize> = (0..k).filter(|&i| inputs_of(i).is_some()).collect();
    let vars = (0..k).filter(|&i| inputs_of(i).is_none()).count();
    if vars < 2 || binary.len() != 3 * (vars - 1) {
        return None;
    }
    let mut available: BTreeSet<usize> = (0..k).filter(|&i| inputs_of(i).is_none()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; k];
    let mut blocks: Vec<(usize, usize, usize, [usize; 2])> = Vec::new();
    while blocks.len() < vars - 1 {
        let mut cands: Vec<usize> = binary
            .iter()
            .copied()
            .filter(|&a| owner[a].is_none())
            .filter(|&a| {
                let [u, v] = inputs_of(a).unwrap();
                u != v && available.contains(&u) && available.contains(&v)
            })
            .collect();
        cands.sort_by_key(|&a| (std::cmp::Reverse(depth[a]), a));
        let mut found = None;
        for a in cands {
            let [u, v] = inputs_of(a).unwrap();
            let ru = &readers[u];
            let rv = &readers[v];
            if ru.len() != 2 || rv.len() != 2 {
                continue;
            }
            let Some(b) = ru.iter().flatten().copied().find(|&b| b != a) else { continue };
            if owner[b].is_some() || !rv.contains(&Some(b)) || !rv.contains(&Some(a)) {
                continue;
            }
            if readers[a].len() != 1 || readers[b].len() != 1 || readers[a][0] != readers[b][0] {
                continue;
            }
            let Some(nu) = readers[a][0] else { continue };
            let mut ins = inputs_of(nu).unwrap();
            ins.sort_unstable();
            let mut ab = [a, b];
            ab.sort_unstable();
            if ins != ab || owner[nu].is_some() {
                continue;
            }
            found = Some((a, b, nu, [u, v]));
            break;
        }
        let (a, b, nu, [u, v]) = found?;
        let id = blocks.len();
        for g in [a, b, nu] {
            owner[g] = Some(id);
        }
        available.remove(&u);
        available.remove(&v);
        available.insert(nu);
        blocks.push((a, b, nu, [u, v]));
    }
    let (_, _, root, _) = *blocks.last()?;
    if s.output.node != root || owner.iter().zip(&s.nodes).any(|(o, n)| o.is_none() && matches!(n, SigNode::Gate { .. })) {
        return None;
    }
    let mut out_blocks = Vec::new();
    for &(a, b, nu, [u, v]) in &blocks {
        let parity = local_parity(&s, a, b, nu, u, v)?;
        out_blocks.push(Block {
            alpha: gate_of[a],
            beta: gate_of[b],
            nu: gate_of[nu],
            sources: [gate_of[u], gate_of[v]],
            parity,
        });
    }
    let wires = label_wires(c, &index, &owner, &blocks);
    Some(BlockPartition { blocks: out_blocks, wires })
}

/// XOR_2 or its complement of the two source nodes, evaluated through
/// the block's own three gates; `None` for anything else.
fn local_parity(s: &SigCircuit, a: usize, b: usize, nu: usize, u: usize, v: usize) -> Option<Parity> {
    let mut f = [false; 4];
    for (row, out) in f.iter_mut().enumerate() {
        let mut val = BTreeMap::new();
        val.insert(u, row >> 1 & 1 == 1);
        val.insert(v, row & 1 == 1);
        for g in [a, b, nu] {
            let SigNode::Gate { op, inputs } = s.nodes[g] else { return None };
            let x = *val.get(&inputs[0].node)? ^ inputs[0].neg;
            let y = *val.get(&inputs[1].node)? ^ inputs[1].neg;
            val.insert(g, op.apply(u64::from(x), u64::from(y)) == 1);
        }
        *out = val[&nu];
    }
    match f {
        [false, true, true, false] => Some(Parity::Xor2),
        [true, false, false, true] => Some(Parity::NotXor2),
        _ => None,
    }
}

fn label_wires(
    c: &Circuit,
    index: &BTreeMap<GateId, usize>,
    owner: &[Option<usize>],
    blocks: &[(usize, usize, usize, [usize; 2])],
) -> BTreeMap<(GateId, GateId), BTreeSet<(usize, WireRole)>> {
    // signal node behind every gate, NOTs included
    let mut node_of = BTreeMap::new();
    for id in c.topo_order().unwrap_or_default() {
        let g = &c.gates[&id];
        let n = match g.kind {
            GateKind::Not => node_of[&g.inputs[0]],
            _ => index[&id],
        };
        node_of.insert(id, n);
    }
    let nu_block: BTreeMap<usize, usize> = blocks.iter().enumerate().map(|(i, b)| (b.2, i)).collect();
    let mut wires: BTreeMap<(GateId, GateId), BTreeSet<(usize, WireRole)>> = BTreeMap::new();
    // roles of the signal edge from node p into binary node g
    let roles = |p: usize, g: usize| -> Vec<(usize, WireRole)> {
        let Some(bi) = owner[g] else { return Vec::new() };
        if owner[p] == Some(bi) {
            return vec![(bi, WireRole::Core)];
        }
        let mut r = vec![(bi, WireRole::In)];
        if let Some(&from) = nu_block.get(&p) {
            r.push((from, WireRole::Out));
        }
        r
    };
    // NOT chains carry the roles of the binary gates they feed
    fn sinks(c: &Circuit, id: GateId) -> Vec<GateId> {
        let mut out = Vec::new();
        for (r, _) in c.readers(id) {
            if c.gates[&r].kind == GateKind::Not {
                out.extend(sinks(c, r));
            } else {
                out.push(r);
            }
        }
        out
    }
    for (&id, g) in &c.gates {
        for &i in &g.inputs {
            let p = node_of[&i];
            let targets = if g.kind == GateKind::Not { sinks(c, id) } else { vec![id] };
            let set = wires.entry((i, id)).or_default();
            for t in targets {
                set.extend(roles(p, index[&t]));
            }
        }
    }
    if let Some(&b) = nu_block.get(&node_of[&c.output]) {
        wires.entry((c.output, c.output)).or_default().insert((b, WireRole::Out));
    }
    wires
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{xor2_circuit, xor_chain_circuit, Builder};

    #[test]
    fn standard_block_is_in_inventory() {
        let blocks = xor2_blocks(SizeMeasure::D).unwrap();
        let want = xor2_circuit().canonical_form();
        assert!(blocks.iter().any(|b| b.canonical_form() == want));
        let r = xor2_blocks(SizeMeasure::R).unwrap();
        let d: BTreeSet<_> = blocks.iter().map(|b| b.canonical_form()).collect();
        for b in &r {
            assert_eq!(b.size(SizeMeasure::D), 3);
            assert!(d.contains(&b.canonical_form()));
        }
    }

    #[test]
    fn two_variable_catalog_is_the_block_list() {
        let meta = enumerate_open_optimal_xor(2, SizeMeasure::D).unwrap();
        let blocks: BTreeSet<_> = enumerate_optimal_circuits(&xor_tt(2), SizeMeasure::D)
            .unwrap()
            .iter()
            .map(|b| b.open_canonical_form())
            .collect();
        let got: BTreeSet<_> = meta.classes.iter().map(|c| c.open_canonical_form()).collect();
        assert_eq!(got, blocks);
    }

    #[test]
    fn chain_circuit_partitions() {
        let c = xor_chain_circuit(4);
        let p = validate_block_partition(&c).unwrap();
        assert_eq!(p.blocks.len(), 3);
        let gates: BTreeSet<GateId> = p.blocks.iter().flat_map(|b| [b.alpha, b.beta, b.nu]).collect();
        assert_eq!(gates.len(), 9);
        assert!(p.blocks.iter().all(|b| b.parity == Parity::Xor2));
        let cores = p.wires.values().filter(|r| r.iter().any(|(_, t)| *t == WireRole::Core)).count();
        assert!(cores >= 6);
    }

    #[test]
    fn and_has_no_partition() {
        let mut b = Builder::new();
        let x = b.input(VarRef::x(1));
        let y = b.input(VarRef::x(2));
        let g = b.and(x, y);
        assert!(validate_block_partition(&b.finish(g)).is_none());
    }

    #[test]
    fn catalog_file_roundtrip() {
        let meta = enumerate_open_optimal_xor(3, SizeMeasure::D).unwrap();
        let text = meta.to_text();
        let back = CatalogMeta::parse(&text).unwrap();
        assert_eq!(back.n, 3);
        assert_eq!(back.base_size, 6);
        assert_eq!(back.max_fanout, meta.max_fanout);
        assert_eq!(back.classes, meta.classes);
        assert!(CatalogMeta::parse("nonsense").is_err());
    }

    #[test]
    fn catalan_numbers() {
        let got: Vec<u64> = (0..8).map(catalan).collect();
        assert_eq!(got, vec![1, 1, 2, 5, 14, 42, 132, 429]);
    }

    #[test]
    fn closure_matches_oracle() {
        // XOR_3 under the second measure is past the enumeration cap
        for (n, measure) in [(3, SizeMeasure::D), (2, SizeMeasure::R)] {
            let meta = enumerate_open_optimal_xor(n, measure).unwrap();
            let oracle: BTreeSet<_> = enumerate_optimal_circuits(&xor_tt(n), measure)
                .unwrap()
                .iter()
                .map(|c| c.canonical_form())
                .collect();
            assert_eq!(labeled_closure(&meta), oracle, "{measure}");
        }
    }

    #[test]
    fn every_optimal_xor3_circuit_partitions() {
        for c in enumerate_optimal_circuits(&xor_tt(3), SizeMeasure::D).unwrap() {
            let p = validate_block_partition(&c).expect("partition");
            assert_eq!(p.blocks.len(), 2);
        }
    }

    #[test]
    fn catalog_circuits_read_inputs_twice() {
        for (measure, top) in [(SizeMeasure::D, 4), (SizeMeasure::R, 5)] {
            for n in 2..=top {
                let meta = enumerate_open_optimal_xor(n, measure).unwrap();
                assert_eq!(meta.max_fanout, 2);
                for oc in &meta.classes {
                    for &s in &oc.slots {
                        assert_eq!(oc.circuit.costly_fanout(s), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn restriction_drops_one_block() {
        let meta = enumerate_open_optimal_xor(4, SizeMeasure::D).unwrap();
        let vars: Vec<VarRef> = (1..=4).map(VarRef::x).collect();
        for oc in &meta.classes {
            let c = oc.label(&vars);
            for &v in &vars {
                for value in [false, true] {
                    let (r, _) = crate::rewrite::restrict_one(&c, v, value);
                    assert_eq!(r.size(SizeMeasure::D), 6);
                    let rest: Vec<VarRef> = vars.iter().copied().filter(|&w| w != v).collect();
                    let t = r.truth_table(&rest).unwrap();
                    assert!(t == xor_tt(3) || t == xor_tt(3).not());
                }
            }
        }
    }

    #[test]
    fn class_counts_stay_under_block_bound() {
        let blocks = xor2_blocks(SizeMeasure::D).unwrap().len() as u64;
        for n in 2..=4 {
            let k = enumerate_open_optimal_xor(n, SizeMeasure::D).unwrap().classes.len() as u64;
            assert!(k <= (4 * blocks).pow(n as u32 - 1), "n={n} classes={k}");
        }
    }
}
