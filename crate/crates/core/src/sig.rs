//! Signal form: binary gates with polarized input edges.
//!
//! NOT gates become edge polarities. A normalized circuit with at most one
//! NOT per gate converts back and forth without loss.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateId, GateKind, VarRef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigError {
    #[error("circuit has constants")]
    Constant,
    #[error(transparent)]
    Circuit(#[from] crate::circuit::CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub node: usize,
    pub neg: bool,
}

impl Lit {
    pub fn pos(node: usize) -> Self {
        Lit { node, neg: false }
    }

    pub fn negate(self) -> Self {
        Lit { node: self.node, neg: !self.neg }
    }

    pub fn with_neg(self, neg: bool) -> Self {
        Lit { node: self.node, neg: self.neg ^ neg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    And,
    Or,
}

impl Op {
    pub fn dual(self) -> Op {
        match self {
            Op::And => Op::Or,
            Op::Or => Op::And,
        }
    }

    pub fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            Op::And => a & b,
            Op::Or => a | b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigNode {
    Input(VarRef),
    Gate { op: Op, inputs: [Lit; 2] },
}

/// Nodes are stored children first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigCircuit {
    pub nodes: Vec<SigNode>,
    pub output: Lit,
}

impl SigCircuit {
    /// Converts an explicit circuit; returns the node index of every
    /// non-NOT gate.
    pub fn from_circuit(c: &Circuit) -> Result<(SigCircuit, BTreeMap<GateId, usize>), SigError> {
        let order = c.topo_order()?;
        let mut lit_of: BTreeMap<GateId, Lit> = BTreeMap::new();
        let mut index = BTreeMap::new();
        let mut nodes = Vec::new();
        for id in order {
            let g = &c.gates[&id];
            let lit = match g.kind {
                GateKind::Const(_) => return Err(SigError::Constant),
                GateKind::Not => lit_of[&g.inputs[0]].negate(),
                GateKind::Input(v) => {
                    nodes.push(SigNode::Input(v));
                    Lit::pos(nodes.len() - 1)
                }
                GateKind::And | GateKind::Or => {
                    let op = if g.kind == GateKind::And { Op::And } else { Op::Or };
                    nodes.push(SigNode::Gate { op, inputs: [lit_of[&g.inputs[0]], lit_of[&g.inputs[1]]] });
                    Lit::pos(nodes.len() - 1)
                }
            };
            if !matches!(g.kind, GateKind::Not) {
                index.insert(id, lit.node);
            }
            lit_of.insert(id, lit);
        }
        Ok((SigCircuit { nodes, output: lit_of[&c.output] }, index))
    }

    /// Explicit circuit with one NOT per negatively read node; also returns
    /// the gate id of each node.
    pub fn to_circuit_with_ids(&self) -> (Circuit, Vec<GateId>) {
        let mut negated = vec![false; self.nodes.len()];
        for n in &self.nodes {
            if let SigNode::Gate { inputs, .. } = n {
                for l in inputs {
                    if l.neg {
                        negated[l.node] = true;
                    }
                }
            }
        }
        if self.output.neg {
            negated[self.output.node] = true;
        }
        let mut gates = BTreeMap::new();
        let mut ids = Vec::with_capacity(self.nodes.len());
        let mut not_ids = vec![None; self.nodes.len()];
        let mut next = 0u32;
        for (i, n) in self.nodes.iter().enumerate() {
            let id = GateId(next);
            next += 1;
            let lit_id = |l: &Lit, ids: &Vec<GateId>, not_ids: &Vec<Option<GateId>>| {
                if l.neg {
                    not_ids[l.node].unwrap()
                } else {
                    ids[l.node]
                }
            };
            let gate = match n {
                SigNode::Input(v) => Gate::input(*v),
                SigNode::Gate { op, inputs } => {
                    let a = lit_id(&inputs[0], &ids, &not_ids);
                    let b = lit_id(&inputs[1], &ids, &not_ids);
                    match op {
                        Op::And => Gate::and(a, b),
                        Op::Or => Gate::or(a, b),
                    }
                }
            };
            gates.insert(id, gate);
            ids.push(id);
            if negated[i] {
                let nid = GateId(next);
                next += 1;
                gates.insert(nid, Gate::not(id));
                not_ids[i] = Some(nid);
            }
        }
        let output = if self.output.neg { not_ids[self.output.node].unwrap() } else { ids[self.output.node] };
        (Circuit { gates, output }, ids)
    }

    pub fn to_circuit(&self) -> Circuit {
        self.to_circuit_with_ids().0
    }

    pub fn binary_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, SigNode::Gate { .. })).count()
    }

    /// Binary gates plus one NOT per negatively read node.
    pub fn r_size(&self) -> usize {
        let mut negated = vec![false; self.nodes.len()];
        for n in &self.nodes {
            if let SigNode::Gate { inputs, .. } = n {
                for l in inputs {
                    negated[l.node] |= l.neg;
                }
            }
        }
        negated[self.output.node] |= self.output.neg;
        self.binary_count() + negated.iter().filter(|&&b| b).count()
    }

    /// Truth table of every node as a single word over `vars` (at most 6).
    pub fn node_tables(&self, vars: &[VarRef]) -> Vec<u64> {
        let n = vars.len();
        assert!(n <= 6);
        let mask = if n == 6 { u64::MAX } else { (1u64 << (1 << n)) - 1 };
        let mut t = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                SigNode::Input(v) => {
                    let pos = vars.iter().position(|w| w == v).expect("variable in order");
                    crate::tt::TruthTable::var(n, pos).as_u64()
                }
                SigNode::Gate { op, inputs } => {
                    let a = lit_word(&t, inputs[0], mask);
                    let b = lit_word(&t, inputs[1], mask);
                    op.apply(a, b)
                }
            };
            t.push(v);
        }
        t
    }

    pub fn output_word(&self, vars: &[VarRef]) -> u64 {
        let n = vars.len();
        let mask = if n == 6 { u64::MAX } else { (1u64 << (1 << n)) - 1 };
        let t = self.node_tables(vars);
        lit_word(&t, self.output, mask)
    }

    /// (reader node, slot) for every edge leaving `node`; the output is
    /// reported as reader `None`.
    pub fn readers(&self, node: usize) -> Vec<(Option<usize>, usize)> {
        let mut out = Vec::new();
        for (r, n) in self.nodes.iter().enumerate() {
            if let SigNode::Gate { inputs, .. } = n {
                for (s, l) in inputs.iter().enumerate() {
                    if l.node == node {
                        out.push((Some(r), s));
                    }
                }
            }
        }
        if self.output.node == node {
            out.push((None, 0));
        }
        out
    }

    /// Binary-gate depth of every node (longest path to the output).
    pub fn depths(&self) -> Vec<usize> {
        let k = self.nodes.len();
        let mut above = vec![0usize; k];
        let mut d = vec![0usize; k];
        for i in (0..k).rev() {
            if let SigNode::Gate { inputs, .. } = &self.nodes[i] {
                d[i] = above[i] + 1;
                for l in inputs {
                    above[l.node] = above[l.node].max(d[i]);
                }
            } else {
                d[i] = above[i];
            }
        }
        d
    }
}

pub fn lit_word(t: &[u64], l: Lit, mask: u64) -> u64 {
    if l.neg {
        !t[l.node] & mask
    } else {
        t[l.node]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{xor2_circuit, xor_chain_circuit, Builder};

    #[test]
    fn xor2_roundtrip() {
        let c = xor2_circuit();
        let (s, idx) = SigCircuit::from_circuit(&c).unwrap();
        assert_eq!(s.binary_count(), 3);
        assert_eq!(idx.len(), 5);
        assert_eq!(s.r_size(), 4);
        let back = s.to_circuit();
        assert_eq!(back.canonical_form(), c.canonical_form());
        let vars = [VarRef::x(1), VarRef::x(2)];
        assert_eq!(s.output_word(&vars), 0b0110);
    }

    #[test]
    fn depths_match_explicit() {
        let c = xor_chain_circuit(3);
        let (s, idx) = SigCircuit::from_circuit(&c).unwrap();
        let d = c.depths().unwrap();
        let sd = s.depths();
        for (g, &n) in &idx {
            assert_eq!(d[g], sd[n]);
        }
    }

    #[test]
    fn output_negation_materializes_one_not() {
        let mut b = Builder::new();
        let x = b.input(VarRef::x(1));
        let y = b.input(VarRef::x(2));
        let a = b.and(x, y);
        let n = b.not(a);
        let c = b.finish(n);
        let (s, _) = SigCircuit::from_circuit(&c).unwrap();
        assert!(s.output.neg);
        let back = s.to_circuit();
        assert_eq!(back.size(crate::SizeMeasure::R), 2);
        assert_eq!(back.canonical_form(), c.canonical_form());
    }
}
