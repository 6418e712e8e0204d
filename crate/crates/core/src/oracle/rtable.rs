//! Exact complexity when every gate, NOT included, costs one.
//!
//! Same level-wise state search as the binary-gate engine, but functions
//! are exact (a negation is a gate of its own) and the symmetry group is
//! input permutations together with duality `f -> !f(!x)`.

use std::collections::HashSet;

use crate::tt::all_permutations;

use super::UNKNOWN;

/// Levels whose state count would exceed this are not expanded.
const STATE_LIMIT: usize = 2_000_000;

pub(super) struct Engine {
    n: usize,
    mask: u16,
    maps: Vec<Vec<u16>>,
    inputs: Vec<u16>,
}

impl Engine {
    pub(super) fn new(n: usize) -> Self {
        assert!((1..=4).contains(&n));
        let rows = 1usize << n;
        let nf = 1usize << rows;
        let mask = (nf - 1) as u16;
        let mut maps = Vec::new();
        for p in all_permutations(n) {
            for dual in [false, true] {
                let mut rowmap = vec![0usize; rows];
                for (r, slot) in rowmap.iter_mut().enumerate() {
                    let mut r2 = 0;
                    for i in 0..n {
                        let bit = (r >> (n - 1 - i)) & 1;
                        r2 |= bit << (n - p.0[i]);
                    }
                    *slot = if dual { r2 ^ (rows - 1) } else { r2 };
                }
                let m: Vec<u16> = (0..nf)
                    .map(|f| {
                        let mut g = 0u16;
                        for (r, &r2) in rowmap.iter().enumerate() {
                            if (f >> r) & 1 == 1 {
                                g |= 1 << r2;
                            }
                        }
                        if dual {
                            !g & mask
                        } else {
                            g
                        }
                    })
                    .collect();
                maps.push(m);
            }
        }
        let inputs = (0..n)
            .map(|i| {
                let mut t = 0u16;
                for r in 0..rows {
                    if (r >> (n - 1 - i)) & 1 == 1 {
                        t |= 1 << r;
                    }
                }
                t
            })
            .collect();
        Engine { n, mask, maps, inputs }
    }

    fn canon(&self, s: &[u16]) -> Vec<u16> {
        let mut best: Option<Vec<u16>> = None;
        for m in &self.maps {
            let mut v: Vec<u16> = s.iter().map(|&f| m[f as usize]).collect();
            v.sort_unstable();
            if best.as_ref().map_or(true, |b| v < *b) {
                best = Some(v);
            }
        }
        best.unwrap()
    }

    fn mark(&self, cc: &mut [u8], g: u16, k: u8) {
        if cc[g as usize] == UNKNOWN {
            for m in &self.maps {
                cc[m[g as usize] as usize] = k;
            }
        }
    }

    /// Table plus the largest level known to be complete. Levels stop
    /// early once the state space outgrows the limit.
    pub(super) fn run(&self, max_level: usize) -> (Vec<u8>, u8) {
        let nf = 1usize << (1 << self.n);
        let mut cc = vec![UNKNOWN; nf];
        cc[0] = 0;
        cc[self.mask as usize] = 0;
        for &x in &self.inputs {
            cc[x as usize] = 0;
        }
        let mut level: Vec<Vec<u16>> = vec![Vec::new()];
        let mut complete = 0u8;
        for k in 1..=max_level {
            if cc.iter().all(|&c| c != UNKNOWN) {
                break;
            }
            let mut next: HashSet<Vec<u16>> = HashSet::new();
            let mut nodes = Vec::new();
            let mut over = false;
            for s in &level {
                nodes.clear();
                nodes.extend_from_slice(&self.inputs);
                nodes.extend_from_slice(s);
                let mut cands = Vec::new();
                for i in 0..nodes.len() {
                    cands.push(!nodes[i] & self.mask);
                    for j in i + 1..nodes.len() {
                        cands.push(nodes[i] & nodes[j]);
                        cands.push(nodes[i] | nodes[j]);
                    }
                }
                for g in cands {
                    if g == 0 || g == self.mask || nodes.contains(&g) {
                        continue;
                    }
                    self.mark(&mut cc, g, k as u8);
                    if !over {
                        let mut ns = s.clone();
                        ns.push(g);
                        next.insert(self.canon(&ns));
                        over = next.len() > STATE_LIMIT;
                    }
                }
            }
            complete = k as u8;
            if over {
                break;
            }
            level = next.into_iter().collect();
            level.sort_unstable();
        }
        (cc, complete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_variable_table() {
        let (cc, _) = Engine::new(2).run(8);
        assert!(cc.iter().all(|&c| c != UNKNOWN));
        assert_eq!(cc[0b0110], 4);
        assert_eq!(cc[0b1001], 4);
        // negated literal, then a NAND and a NOR
        assert_eq!(cc[0b0011], 1);
        assert_eq!(cc[0b0111], 2);
        assert_eq!(cc[0b0001], 2);
        assert_eq!(cc[0b1110], 1);
    }
}
