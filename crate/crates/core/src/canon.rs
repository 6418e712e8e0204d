//! Canonical byte strings for circuits up to isomorphism.
//!
//! Binary gate inputs are unordered. Colors are refined from both
//! directions until stable; remaining ties are individualized one at a
//! time and every branch is explored, keeping the least serialization.

use std::collections::BTreeMap;

use crate::circuit::{Circuit, GateKind, VarClass};

struct Shape {
    kind: Vec<(u32, u32)>,
    children: Vec<Vec<usize>>,
    readers: Vec<Vec<usize>>,
    output: usize,
}

fn shape(c: &Circuit, labeled: bool) -> Shape {
    let ids: Vec<_> = c.gates.keys().copied().collect();
    let index: BTreeMap<_, _> = ids.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut kind = Vec::with_capacity(ids.len());
    let mut children = vec![Vec::new(); ids.len()];
    let mut readers = vec![Vec::new(); ids.len()];
    for (i, id) in ids.iter().enumerate() {
        let g = &c.gates[id];
        let k = match g.kind {
            GateKind::Input(v) => {
                let label = if labeled {
                    let base = if v.class == VarClass::Base { 0 } else { 1 << 20 };
                    base + v.index
                } else {
                    0
                };
                (0, label)
            }
            GateKind::Const(false) => (1, 0),
            GateKind::Const(true) => (2, 0),
            GateKind::Not => (3, 0),
            GateKind::And => (4, 0),
            GateKind::Or => (5, 0),
        };
        kind.push(k);
        for inp in &g.inputs {
            let j = index[inp];
            children[i].push(j);
            readers[j].push(i);
        }
    }
    Shape { kind, children, readers, output: index[&c.output] }
}

fn rank<K: Ord + Clone>(keys: &[K]) -> (Vec<u32>, usize) {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    let colors = keys.iter().map(|k| sorted.binary_search(k).unwrap() as u32).collect();
    (colors, sorted.len())
}

fn refine(s: &Shape, colors: &[u32]) -> Vec<u32> {
    let mut colors = colors.to_vec();
    let mut cells = {
        let mut c = colors.clone();
        c.sort();
        c.dedup();
        c.len()
    };
    loop {
        let keys: Vec<(u32, bool, Vec<u32>, Vec<u32>)> = (0..colors.len())
            .map(|i| {
                let mut ch: Vec<u32> = s.children[i].iter().map(|&j| colors[j]).collect();
                ch.sort();
                let mut rd: Vec<u32> = s.readers[i].iter().map(|&j| colors[j]).collect();
                rd.sort();
                (colors[i], i == s.output, ch, rd)
            })
            .collect();
        let (next, count) = rank(&keys);
        colors = next;
        if count == cells {
            return colors;
        }
        cells = count;
    }
}

fn serialize(s: &Shape, colors: &[u32]) -> Vec<u32> {
    let n = colors.len();
    let mut at = vec![0usize; n];
    for (i, &c) in colors.iter().enumerate() {
        at[c as usize] = i;
    }
    let mut out = vec![n as u32];
    for &i in &at {
        out.push(s.kind[i].0);
        out.push(s.kind[i].1);
        let mut ch: Vec<u32> = s.children[i].iter().map(|&j| colors[j]).collect();
        ch.sort();
        out.push(ch.len() as u32);
        out.extend(ch);
    }
    out.push(colors[s.output]);
    out
}

fn search(s: &Shape, colors: Vec<u32>, best: &mut Option<Vec<u32>>) {
    let colors = refine(s, &colors);
    let mut count = vec![0usize; colors.len()];
    for &c in &colors {
        count[c as usize] += 1;
    }
    let Some(cell) = count.iter().position(|&k| k > 1) else {
        let ser = serialize(s, &colors);
        if best.as_ref().map_or(true, |b| ser < *b) {
            *best = Some(ser);
        }
        return;
    };
    let cell = cell as u32;
    for v in 0..colors.len() {
        if colors[v] != cell {
            continue;
        }
        let next: Vec<u32> = colors
            .iter()
            .enumerate()
            .map(|(u, &c)| 2 * c + u32::from(c == cell && u != v))
            .collect();
        search(s, next, best);
    }
}

pub fn canonical_form(c: &Circuit, labeled: bool) -> Vec<u8> {
    let s = shape(c, labeled);
    let (colors, _) = rank(&s.kind);
    let mut best = None;
    search(&s, colors, &mut best);
    best.unwrap_or_default().iter().flat_map(|w| w.to_le_bytes()).collect()
}

/// Exhaustive isomorphism test used as a cross-check.
#[cfg(test)]
pub(crate) fn brute_force_isomorphic(a: &Circuit, b: &Circuit, labeled: bool) -> bool {
    let sa = shape(a, labeled);
    let sb = shape(b, labeled);
    if sa.kind.len() != sb.kind.len() {
        return false;
    }
    fn extend(sa: &Shape, sb: &Shape, map: &mut Vec<usize>, used: &mut Vec<bool>) -> bool {
        let i = map.len();
        if i == sa.kind.len() {
            if map[sa.output] != sb.output {
                return false;
            }
            return (0..i).all(|u| {
                let mut x: Vec<usize> = sa.children[u].iter().map(|&j| map[j]).collect();
                let mut y = sb.children[map[u]].clone();
                x.sort();
                y.sort();
                x == y
            });
        }
        for j in 0..sb.kind.len() {
            if !used[j] && sa.kind[i] == sb.kind[j] {
                used[j] = true;
                map.push(j);
                if extend(sa, sb, map, used) {
                    return true;
                }
                map.pop();
                used[j] = false;
            }
        }
        false
    }
    extend(&sa, &sb, &mut Vec::new(), &mut vec![false; sb.kind.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Builder, Gate, GateId, VarRef};
    use proptest::prelude::*;

    fn random_circuit(ops: &[(u8, usize, usize)], vars: u32) -> Circuit {
        let mut b = Builder::new();
        let mut ids: Vec<GateId> = (1..=vars).map(|i| b.input(VarRef::x(i))).collect();
        for &(op, p, q) in ops {
            let a = ids[p % ids.len()];
            let c = ids[q % ids.len()];
            let g = match op % 3 {
                0 => b.and(a, c),
                1 => b.or(a, c),
                _ => b.not(a),
            };
            ids.push(g);
        }
        let out = *ids.last().unwrap();
        b.finish(out)
    }

    fn shuffled(c: &Circuit, seed: u64) -> Circuit {
        let ids: Vec<GateId> = c.gates.keys().copied().collect();
        let mut perm: Vec<u32> = (0..ids.len() as u32).map(|i| i * 7 + 3).collect();
        let mut state = seed | 1;
        for i in (1..perm.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            perm.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let map: BTreeMap<GateId, GateId> = ids.iter().zip(&perm).map(|(&a, &p)| (a, GateId(p))).collect();
        Circuit {
            gates: c
                .gates
                .iter()
                .map(|(k, g)| {
                    let mut inputs: Vec<GateId> = g.inputs.iter().map(|i| map[i]).collect();
                    if seed & 2 == 2 {
                        inputs.reverse();
                    }
                    (map[k], Gate { kind: g.kind, inputs })
                })
                .collect(),
            output: map[&c.output],
        }
    }

    proptest! {
        #[test]
        fn relabeling_preserves_form(ops in prop::collection::vec((0u8..3, 0usize..20, 0usize..20), 1..7), seed in any::<u64>()) {
            let c = random_circuit(&ops, 3);
            let d = shuffled(&c, seed);
            prop_assert_eq!(c.canonical_form(), d.canonical_form());
            prop_assert_eq!(c.open_canonical_form(), d.open_canonical_form());
        }

        #[test]
        fn form_equality_matches_brute_force(
            a in prop::collection::vec((0u8..3, 0usize..20, 0usize..20), 1..5),
            b in prop::collection::vec((0u8..3, 0usize..20, 0usize..20), 1..5),
        ) {
            let ca = random_circuit(&a, 2);
            let cb = random_circuit(&b, 2);
            prop_assert_eq!(ca.canonical_form() == cb.canonical_form(), brute_force_isomorphic(&ca, &cb, true));
            prop_assert_eq!(ca.open_canonical_form() == cb.open_canonical_form(), brute_force_isomorphic(&ca, &cb, false));
        }
    }

    #[test]
    fn open_form_ignores_labels() {
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let n = b.not(x1);
        let a = b.and(n, x2);
        let c1 = b.finish(a);
        let mut b = Builder::new();
        let x1 = b.input(VarRef::x(1));
        let x2 = b.input(VarRef::x(2));
        let n = b.not(x2);
        let a = b.and(x1, n);
        let c2 = b.finish(a);
        assert_ne!(c1.canonical_form(), c2.canonical_form());
        assert_eq!(c1.open_canonical_form(), c2.open_canonical_form());
    }
}
