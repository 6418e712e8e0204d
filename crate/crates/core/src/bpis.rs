//! Reduction from 2n×2n Bipartite Permutation Independent Set to the
//! partial simple-extension problem, with brute-force solvers and the
//! witness maps in both directions.
//!
//! The reduced table is over `(x, y, z)`, each a block of `2n` variables,
//! rows ordered with `x1` most significant. In circuits the roles follow
//! the simple-extension framing: the base function reads `y` and `z`, and
//! the `x` block holds the extension variables. So BPIS `y_i` is circuit
//! `x_i`, BPIS `z_i` is circuit `x_{2n+i}` and BPIS `x_i` is circuit `y_i`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::circuit::{Builder, Circuit, CircuitError, GateId, GateKind, VarRef};
use crate::tt::{all_permutations, PartialTruthTable, Permutation, TruthTable};

/// Largest `n` for the brute-force solver, `(n!)^2` candidates.
pub const MAX_SOLVE_N: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BpisError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("n must be at least 1")]
    ZeroN,
    #[error("edge index {0} out of range 1..={1}")]
    IndexRange(usize, usize),
    #[error("n = {0} is too large for brute force (max {MAX_SOLVE_N})")]
    TooLarge(usize),
    #[error("circuit does not match the witness family: {0}")]
    Structure(String),
    #[error("table has {got} variables, expected {want}")]
    Arity { got: usize, want: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Edge `((j, k), (j', k'))` stored as `(j, k, j', k')`, all 1-based.
pub type Edge = (usize, usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpisInstance {
    pub n: usize,
    pub edges: BTreeSet<Edge>,
}

impl BpisInstance {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self, BpisError> {
        if n == 0 {
            return Err(BpisError::ZeroN);
        }
        let edges: BTreeSet<Edge> = edges.into_iter().collect();
        for &(j, k, j2, k2) in &edges {
            for v in [j, k, j2, k2] {
                if v == 0 || v > n {
                    return Err(BpisError::IndexRange(v, n));
                }
            }
        }
        Ok(BpisInstance { n, edges })
    }

    /// Every edge over `[n]`, in order.
    pub fn all_edges(n: usize) -> Vec<Edge> {
        let mut out = Vec::new();
        for j in 1..=n {
            for k in 1..=n {
                for j2 in 1..=n {
                    for k2 in 1..=n {
                        out.push((j, k, j2, k2));
                    }
                }
            }
        }
        out
    }

    /// Keeps each edge independently with probability `p`.
    pub fn random(n: usize, p: f64, rng: &mut impl Rng) -> Self {
        let edges = Self::all_edges(n).into_iter().filter(|_| rng.gen_bool(p));
        BpisInstance::new(n, edges).expect("generated edges are in range")
    }

    /// Conditions 1-3: both halves map to themselves and no edge has both
    /// of its pairings chosen.
    pub fn accepts(&self, pi: &Permutation) -> bool {
        let n = self.n;
        if pi.len() != 2 * n || !is_block_respecting(pi, n) {
            return false;
        }
        self.edges.iter().all(|&(j, k, j2, k2)| pi.0[j - 1] != k || pi.0[j2 + n - 1] != k2 + n)
    }
}

impl fmt::Display for BpisInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.n)?;
        for (j, k, j2, k2) in &self.edges {
            writeln!(f, "{j} {k} {j2} {k2}")?;
        }
        Ok(())
    }
}

impl FromStr for BpisInstance {
    type Err = BpisError;

    /// `n=<n>` then one `j k j' k'` per line; blank lines and `#` comments
    /// are skipped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n = None;
        let mut edges = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| BpisError::Parse { line: i + 1, msg: msg.to_string() };
            match n {
                None => {
                    let v = line.strip_prefix("n=").ok_or_else(|| err("expected n=<n>"))?;
                    n = Some(v.trim().parse::<usize>().map_err(|_| err("bad n"))?);
                }
                Some(_) => {
                    let v: Vec<usize> = line
                        .split_whitespace()
                        .map(|t| t.parse::<usize>().map_err(|_| err("bad index")))
                        .collect::<Result<_, _>>()?;
                    if v.len() != 4 {
                        return Err(err("an edge has four indices"));
                    }
                    edges.push((v[0], v[1], v[2], v[3]));
                }
            }
        }
        let n = n.ok_or(BpisError::Parse { line: 1, msg: "missing n=<n>".into() })?;
        BpisInstance::new(n, edges)
    }
}

pub fn is_block_respecting(pi: &Permutation, n: usize) -> bool {
    pi.0.iter().enumerate().all(|(i, &v)| (i < n) == (v <= n))
}

/// Every permutation of `[2n]` fixing both halves, lexicographic.
pub fn block_permutations(n: usize) -> Vec<Permutation> {
    let half = all_permutations(n);
    let mut out = Vec::with_capacity(half.len() * half.len());
    for a in &half {
        for b in &half {
            let mut v = a.0.clone();
            v.extend(b.0.iter().map(|&x| x + n));
            out.push(Permutation(v));
        }
    }
    out
}

/// Lexicographically least valid π, by exhaustive search.
pub fn brute_solve(inst: &BpisInstance) -> Result<Option<Permutation>, BpisError> {
    if inst.n > MAX_SOLVE_N {
        return Err(BpisError::TooLarge(inst.n));
    }
    Ok(block_permutations(inst.n).into_iter().find(|p| inst.accepts(p)))
}

/// Circuit variable for BPIS `x_i`.
pub fn var_x(i: usize) -> VarRef {
    VarRef::y(i as u32)
}

/// Circuit variable for BPIS `y_i`.
pub fn var_y(i: usize) -> VarRef {
    VarRef::x(i as u32)
}

/// Circuit variable for BPIS `z_i`.
pub fn var_z(n: usize, i: usize) -> VarRef {
    VarRef::x((2 * n + i) as u32)
}

/// Circuit variables in table order `x, y, z`.
pub fn table_order(n: usize) -> Vec<VarRef> {
    let w = 2 * n;
    (1..=w).map(var_x).chain((1..=w).map(var_y)).chain((1..=w).map(|i| var_z(n, i))).collect()
}

/// Reduced table plus the rows where prescriptions collided.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    pub n: usize,
    pub table: PartialTruthTable,
    /// Rows that received two different bits. Later prescriptions win, and
    /// edge rows come last. Empty for `n >= 2`.
    pub conflicts: Vec<usize>,
}

struct Rows {
    w: usize,
    table: PartialTruthTable,
    conflicts: BTreeSet<usize>,
}

impl Rows {
    fn row(&self, x: usize, y: usize, z: usize) -> usize {
        (x << (2 * self.w)) | (y << self.w) | z
    }

    fn put(&mut self, r: usize, v: bool) {
        if let Some(old) = self.table.get(r) {
            if old != v {
                self.conflicts.insert(r);
            }
        }
        self.table.set(r, Some(v));
    }
}

/// Bits of the block `e_a ∥ e_b` with the first block most significant.
fn unit_pair(n: usize, a: usize, b: usize) -> usize {
    (1 << (2 * n - a)) | (1 << (n - b))
}

pub fn reduce(inst: &BpisInstance) -> Reduction {
    let n = inst.n;
    let w = 2 * n;
    let full = (1usize << w) - 1;
    let mut rows = Rows { w, table: PartialTruthTable::undefined(3 * w), conflicts: BTreeSet::new() };
    let any = |v: usize| v != 0;
    for a in 0..=full {
        for b in 0..=full {
            // x = 0: the base function of (y, z)
            let r = rows.row(0, a, b);
            rows.put(r, any(a & b));
            // x = 1: OR over z
            let r = rows.row(full, a, b);
            rows.put(r, any(b));
            // z = 1: OR over x and y
            let r = rows.row(a, b, full);
            rows.put(r, any(a | b));
            // z = 0
            let r = rows.row(a, b, 0);
            rows.put(r, false);
        }
    }
    let low = (1usize << n) - 1;
    let high = low << n;
    for x in 0..=full {
        let r = rows.row(x, 0, high);
        rows.put(r, any(x & high));
        let r = rows.row(x, 0, low);
        rows.put(r, any(x & low));
    }
    for &(j, k, j2, k2) in &inst.edges {
        let r = rows.row(!unit_pair(n, k, k2) & full, 0, unit_pair(n, j, j2));
        rows.put(r, true);
    }
    Reduction { n, table: rows.table, conflicts: rows.conflicts.into_iter().collect() }
}

/// `⋁_i ((x_{π(i)} ∨ y_i) ∧ z_i)` with a left-leaning OR tree.
pub fn witness_to_circuit(pi: &Permutation, n: usize) -> Circuit {
    assert_eq!(pi.len(), 2 * n, "witness length");
    let mut b = Builder::new();
    let mut acc: Option<GateId> = None;
    for i in 1..=2 * n {
        let x = b.input(var_x(pi.0[i - 1]));
        let y = b.input(var_y(i));
        let z = b.input(var_z(n, i));
        let o = b.or(x, y);
        let t = b.and(o, z);
        acc = Some(match acc {
            None => t,
            Some(a) => b.or(a, t),
        });
    }
    b.finish(acc.expect("n >= 1"))
}

/// Reads π off a circuit of the witness family: π(i) is the `x` sharing
/// an OR with `y_i`. Any OR-tree shape and operand order is accepted.
pub fn circuit_to_witness(c: &Circuit, n: usize) -> Result<Permutation, BpisError> {
    let bad = |m: String| BpisError::Structure(m);
    c.validate()?;
    let input_of = |g: GateId| -> Option<VarRef> {
        match c.gates.get(&g)?.kind {
            GateKind::Input(v) => Some(v),
            _ => None,
        }
    };
    let mut leaves = Vec::new();
    let mut stack = vec![c.output];
    while let Some(g) = stack.pop() {
        let gate = c.gate(g)?;
        match gate.kind {
            GateKind::And => leaves.push(g),
            GateKind::Or => stack.extend(gate.inputs.iter().copied()),
            _ => return Err(bad(format!("gate {g} is neither AND nor OR"))),
        }
    }
    let w = 2 * n;
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for &t in &leaves {
        let gate = c.gate(t)?;
        let (zi, o) = match (input_of(gate.inputs[0]), input_of(gate.inputs[1])) {
            (Some(v), None) => (v, gate.inputs[1]),
            (None, Some(v)) => (v, gate.inputs[0]),
            _ => return Err(bad(format!("AND {t} must read one z and one OR"))),
        };
        let i = (1..=w).find(|&i| var_z(n, i) == zi).ok_or_else(|| bad(format!("AND {t} reads {zi}, not a z")))?;
        let og = c.gate(o)?;
        if og.kind != GateKind::Or {
            return Err(bad(format!("AND {t} must read an OR")));
        }
        let vs: Vec<VarRef> = og
            .inputs
            .iter()
            .map(|&g| input_of(g).ok_or_else(|| bad(format!("OR {o} must read two inputs"))))
            .collect::<Result<_, _>>()?;
        if !vs.contains(&var_y(i)) {
            return Err(bad(format!("OR {o} pairs z{i} with no y{i}")));
        }
        let other = if vs[0] == var_y(i) { vs[1] } else { vs[0] };
        let j = (1..=w).find(|&j| var_x(j) == other).ok_or_else(|| bad(format!("OR {o} reads {other}, not an x")))?;
        if map.insert(i, j).is_some() {
            return Err(bad(format!("z{i} is read twice")));
        }
    }
    if map.len() != w {
        return Err(bad(format!("{} of {w} z variables are paired", map.len())));
    }
    Permutation::new(map.into_values().collect()).map_err(|_| bad("x variables are not paired one to one".into()))
}

/// Every defined row of `pt` agrees with `c`, read in table order.
pub fn check_consistency(c: &Circuit, pt: &PartialTruthTable) -> Result<bool, BpisError> {
    let vars = pt.num_vars();
    if vars % 6 != 0 || vars == 0 {
        return Err(BpisError::Arity { got: vars, want: 6 * (vars / 6).max(1) });
    }
    let tt = c.truth_table(&table_order(vars / 6))?;
    Ok(pt.is_consistent_with(&tt))
}

/// The base function `⋁ y_i z_i` in circuit variable order `x1..x4n`.
pub fn base_table(n: usize) -> TruthTable {
    let w = 2 * n;
    TruthTable::from_fn(2 * w, |r| {
        let y = r >> w;
        let z = r & ((1 << w) - 1);
        y & z != 0
    })
}

/// Permutation-level soundness on one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Soundness {
    pub bpis: Option<Permutation>,
    /// Every π of `[2n]` whose witness circuit is consistent.
    pub consistent: Vec<Permutation>,
    pub conflicts: usize,
}

impl Soundness {
    /// The consistent permutations are exactly the valid ones, and the
    /// solver answer agrees.
    pub fn holds(&self, inst: &BpisInstance) -> bool {
        let valid: Vec<Permutation> = all_permutations(2 * inst.n).into_iter().filter(|p| inst.accepts(p)).collect();
        valid == self.consistent && self.bpis.is_some() == !self.consistent.is_empty()
    }
}

/// Checks every π of `[2n]` against the reduced table.
pub fn soundness(inst: &BpisInstance) -> Result<Soundness, BpisError> {
    let bpis = brute_solve(inst)?;
    let red = reduce(inst);
    let mut consistent = Vec::new();
    for p in all_permutations(2 * inst.n) {
        if check_consistency(&witness_to_circuit(&p, inst.n), &red.table)? {
            consistent.push(p);
        }
    }
    Ok(Soundness { bpis, consistent, conflicts: red.conflicts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SizeMeasure;
    use crate::rewrite::substitute_and_normalize;

    fn inst(n: usize, edges: &[Edge]) -> BpisInstance {
        BpisInstance::new(n, edges.iter().copied()).unwrap()
    }

    fn row(n: usize, x: usize, y: usize, z: usize) -> usize {
        let w = 2 * n;
        (x << (2 * w)) | (y << w) | z
    }

    #[test]
    fn reduce_examples() {
        let red = reduce(&inst(1, &[]));
        let t = &red.table;
        assert_eq!(t.num_vars(), 6);
        // z = 11 gives OR of x and y
        for y in 0..4 {
            assert_eq!(t.get(row(1, 0, y, 3)), Some(y != 0));
        }
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(t.get(row(1, x, y, 0)), Some(false));
            }
        }
        // x = 10, y = 01, z = 01 lies in no region
        assert_eq!(t.get(row(1, 2, 1, 1)), None);
        assert!(red.conflicts.is_empty());
    }

    #[test]
    fn solve_examples() {
        assert_eq!(brute_solve(&inst(1, &[])).unwrap(), Some(Permutation::identity(2)));
        assert_eq!(brute_solve(&inst(1, &[(1, 1, 1, 1)])).unwrap(), None);
        // π(1) = 1 is blocked against either second-block choice, and so
        // is π(1) = 2
        let blocked = inst(2, &[(1, 1, 1, 1), (1, 1, 1, 2), (1, 2, 1, 1), (1, 2, 1, 2)]);
        assert_eq!(brute_solve(&blocked).unwrap(), None);
        assert!(matches!(brute_solve(&inst(5, &[])), Err(BpisError::TooLarge(5))));
    }

    #[test]
    fn lexicographically_least() {
        let i = inst(2, &[(1, 1, 1, 1), (1, 1, 1, 2)]);
        let p = brute_solve(&i).unwrap().unwrap();
        assert_eq!(p.0, vec![2, 1, 3, 4]);
        let first = block_permutations(2).into_iter().find(|q| i.accepts(q)).unwrap();
        assert_eq!(p, first);
    }

    #[test]
    fn witness_circuit_shape() {
        let c = witness_to_circuit(&Permutation::identity(2), 1);
        let want = {
            let mut b = Builder::new();
            let x1 = b.input(var_x(1));
            let y1 = b.input(var_y(1));
            let z1 = b.input(var_z(1, 1));
            let o1 = b.or(x1, y1);
            let t1 = b.and(o1, z1);
            let x2 = b.input(var_x(2));
            let y2 = b.input(var_y(2));
            let z2 = b.input(var_z(1, 2));
            let o2 = b.or(x2, y2);
            let t2 = b.and(o2, z2);
            let out = b.or(t1, t2);
            b.finish(out)
        };
        assert_eq!(c, want);
        assert_eq!(c.size(SizeMeasure::D), 5);
        for v in c.variables() {
            let g = c.gates.iter().find(|(_, g)| g.kind == GateKind::Input(v)).unwrap().0;
            assert_eq!(c.fanout(*g).unwrap(), 1);
        }
        for n in 1..=3 {
            let c = witness_to_circuit(&Permutation::identity(2 * n), n);
            assert_eq!(c.size(SizeMeasure::D), 6 * n - 1);
        }
    }

    #[test]
    fn levin_round_trip() {
        for n in 1..=3 {
            for p in all_permutations(2 * n) {
                let c = witness_to_circuit(&p, n);
                assert_eq!(circuit_to_witness(&c, n).unwrap(), p);
            }
        }
    }

    #[test]
    fn extraction_follows_pairings() {
        // pair x2 with y1 and x1 with y2
        let c = witness_to_circuit(&Permutation(vec![2, 1]), 1);
        assert_eq!(circuit_to_witness(&c, 1).unwrap().0, vec![2, 1]);
        // right-leaning tree over the same leaves
        let mut b = Builder::new();
        let mut leaves = Vec::new();
        for (i, j) in [(1, 3), (2, 4), (3, 1), (4, 2)] {
            let x = b.input(var_x(j));
            let y = b.input(var_y(i));
            let z = b.input(var_z(2, i));
            let o = b.or(y, x);
            leaves.push(b.and(z, o));
        }
        let r = b.or(leaves[2], leaves[3]);
        let r = b.or(leaves[1], r);
        let r = b.or(leaves[0], r);
        let c = b.finish(r);
        assert_eq!(circuit_to_witness(&c, 2).unwrap().0, vec![3, 4, 1, 2]);
    }

    #[test]
    fn structure_mismatch() {
        let mut b = Builder::new();
        let x1 = b.input(var_x(1));
        let x2 = b.input(var_x(2));
        let a = b.and(x1, x2);
        let c = b.finish(a);
        assert!(matches!(circuit_to_witness(&c, 1), Err(BpisError::Structure(_))));
        // two y's on one x
        let mut b = Builder::new();
        let x1 = b.input(var_x(1));
        let y1 = b.input(var_y(1));
        let y2 = b.input(var_y(2));
        let z1 = b.input(var_z(1, 1));
        let o = b.or(x1, y2);
        let t = b.and(o, z1);
        let o2 = b.or(t, y1);
        let c = b.finish(o2);
        assert!(circuit_to_witness(&c, 1).is_err());
    }

    #[test]
    fn consistency_examples() {
        let id = witness_to_circuit(&Permutation::identity(2), 1);
        assert!(check_consistency(&id, &reduce(&inst(1, &[])).table).unwrap());
        let red = reduce(&inst(1, &[(1, 1, 1, 1)]));
        assert!(!check_consistency(&id, &red.table).unwrap());
        // the edge row is x = 00, y = 00, z = 11, where the circuit gives 0
        let r = row(1, 0, 0, 3);
        assert_eq!(red.table.get(r), Some(true));
        let tt = id.truth_table(&table_order(1)).unwrap();
        assert!(!tt.get(r));
        assert!(check_consistency(&id, &PartialTruthTable::undefined(6)).unwrap());
        assert!(matches!(check_consistency(&id, &PartialTruthTable::undefined(4)), Err(BpisError::Arity { .. })));
    }

    /// At n = 1 the single edge row lies where x = 0 and z = 1 both
    /// prescribe 0; the edge row wins.
    #[test]
    fn edge_row_overrides_at_n1() {
        let red = reduce(&inst(1, &[(1, 1, 1, 1)]));
        assert_eq!(red.conflicts, vec![row(1, 0, 0, 3)]);
        for (j, k, j2, k2) in BpisInstance::all_edges(2) {
            assert!(reduce(&inst(2, &[(j, k, j2, k2)])).conflicts.is_empty());
        }
    }

    #[test]
    fn soundness_small() {
        for edges in [vec![], vec![(1, 1, 1, 1)]] {
            let i = inst(1, &edges);
            assert!(soundness(&i).unwrap().holds(&i));
        }
        for e in BpisInstance::all_edges(2) {
            let i = inst(2, &[e]);
            assert!(soundness(&i).unwrap().holds(&i), "{e:?}");
        }
    }

    /// Fixing every extension variable to 0 leaves the base formula.
    #[test]
    fn witness_restricts_to_base() {
        for n in 1..=2 {
            let base_vars: Vec<VarRef> = (1..=4 * n as u32).map(VarRef::x).collect();
            for p in all_permutations(2 * n).into_iter().step_by(5) {
                let c = witness_to_circuit(&p, n);
                let zero: BTreeMap<VarRef, bool> = (1..=2 * n).map(|i| (var_x(i), false)).collect();
                let (r, _) = substitute_and_normalize(&c, &zero);
                assert_eq!(r.truth_table(&base_vars).unwrap(), base_table(n));
                assert_eq!(r.size(SizeMeasure::D), 4 * n - 1);
                // each AND reads y_i and z_i directly
                let ands: Vec<_> = r.gates.values().filter(|g| g.kind == GateKind::And).collect();
                assert_eq!(ands.len(), 2 * n);
                for g in ands {
                    let mut vs: Vec<VarRef> = g
                        .inputs
                        .iter()
                        .map(|i| match r.gates[i].kind {
                            GateKind::Input(v) => v,
                            k => panic!("AND reads {k:?}"),
                        })
                        .collect();
                    vs.sort();
                    assert_eq!(vs[1].index as usize, vs[0].index as usize + 2 * n);
                }
            }
        }
    }

    #[test]
    fn instance_file_roundtrip() {
        let i = inst(2, &[(1, 2, 2, 1), (2, 2, 1, 1)]);
        let text = i.to_string();
        assert_eq!(text, "n=2\n1 2 2 1\n2 2 1 1\n");
        assert_eq!(text.parse::<BpisInstance>().unwrap(), i);
        assert!("n=2\n1 2 3 1\n".parse::<BpisInstance>().is_err());
        assert!("1 1 1 1\n".parse::<BpisInstance>().is_err());
        assert!("n=1\n1 1 1\n".parse::<BpisInstance>().is_err());
    }
}
