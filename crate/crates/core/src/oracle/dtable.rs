//! Exact binary-gate complexity for every function on at most four
//! variables.
//!
//! A state is the set of functions computed by the binary gates of a
//! circuit, each taken modulo complement since negations are free. States
//! are reduced modulo input permutations and input negations. Level `k`
//! holds every state reachable with `k` gates; the first level at which a
//! function shows up as a gate is its complexity.

use std::collections::HashSet;

use crate::tt::all_permutations;

use super::UNKNOWN;

const WIDTH: usize = 10;
type State = [u16; WIDTH];

pub(super) struct Engine {
    n: usize,
    mask: u16,
    maps: Vec<Vec<u16>>,
    cmin: Vec<u16>,
    ach: Vec<Vec<u16>>,
    inputs: Vec<u16>,
}

fn var(n: usize, i: usize) -> u16 {
    let mut t = 0u16;
    for r in 0..1usize << n {
        if (r >> (n - 1 - i)) & 1 == 1 {
            t |= 1 << r;
        }
    }
    t
}

impl Engine {
    pub(super) fn new(n: usize) -> Self {
        assert!((1..=4).contains(&n));
        let rows = 1usize << n;
        let nf = 1usize << rows;
        let mask = (nf - 1) as u16;
        let norm = |f: u16| if f & 1 == 1 { !f & mask } else { f };
        let mut maps = Vec::new();
        for p in all_permutations(n) {
            for neg in 0..1usize << n {
                let mut rowmap = vec![0usize; rows];
                for (r, slot) in rowmap.iter_mut().enumerate() {
                    let mut r2 = 0;
                    for i in 0..n {
                        let bit = ((r >> (n - 1 - i)) & 1) ^ ((neg >> i) & 1);
                        let j = p.0[i] - 1;
                        r2 |= bit << (n - 1 - j);
                    }
                    *slot = r2;
                }
                let mut m = vec![0u16; nf];
                for (f, out) in m.iter_mut().enumerate() {
                    let mut g = 0u16;
                    for (r, &r2) in rowmap.iter().enumerate() {
                        if (f >> r) & 1 == 1 {
                            g |= 1 << r2;
                        }
                    }
                    *out = norm(g);
                }
                maps.push(m);
            }
        }
        let mut cmin = vec![0u16; nf];
        let mut ach = vec![Vec::new(); nf];
        for f in 0..nf {
            let best = maps.iter().map(|m| m[f]).min().unwrap();
            cmin[f] = best;
            ach[f] = (0..maps.len()).filter(|&g| maps[g][f] == best).map(|g| g as u16).collect();
        }
        let inputs = (0..n).map(|i| norm(var(n, i))).collect();
        Engine { n, mask, maps, cmin, ach, inputs }
    }

    fn norm(&self, f: u16) -> u16 {
        if f & 1 == 1 {
            !f & self.mask
        } else {
            f
        }
    }

    fn canon(&self, s: &[u16]) -> State {
        let k = s.len();
        let m0 = s.iter().map(|&f| self.cmin[f as usize]).min().unwrap();
        let mut best = [u16::MAX; WIDTH];
        let mut buf = [0u16; WIDTH];
        for &f in s {
            if self.cmin[f as usize] != m0 {
                continue;
            }
            for &gi in &self.ach[f as usize] {
                let m = &self.maps[gi as usize];
                for i in 0..k {
                    buf[i] = m[s[i] as usize];
                }
                buf[..k].sort_unstable();
                if buf[..k] < best[..k] {
                    best[..k].copy_from_slice(&buf[..k]);
                }
            }
        }
        best
    }

    fn mark(&self, cc: &mut [u8], g: u16, k: u8) -> bool {
        if cc[g as usize] != UNKNOWN {
            return false;
        }
        for m in &self.maps {
            let h = m[g as usize];
            cc[h as usize] = k;
            cc[(!h & self.mask) as usize] = k;
        }
        true
    }

    /// Full table, plus the largest level known to be complete.
    pub(super) fn run(&self, store_limit: usize) -> (Vec<u8>, u8) {
        let nf = 1usize << (1 << self.n);
        let mut cc = vec![UNKNOWN; nf];
        cc[0] = 0;
        cc[self.mask as usize] = 0;
        for &x in &self.inputs {
            cc[x as usize] = 0;
            cc[(!x & self.mask) as usize] = 0;
        }
        let mut level: Vec<State> = vec![[0; WIDTH]];
        let mut complete = 0u8;
        let mut k = 1usize;
        let remaining = |cc: &[u8]| cc.iter().any(|&c| c == UNKNOWN);
        while remaining(&cc) && k < WIDTH {
            let store = k <= store_limit;
            let mut next: HashSet<State> = HashSet::new();
            let mut nodes = Vec::with_capacity(self.n + WIDTH);
            let mut ns = [0u16; WIDTH];
            for s in &level {
                let s = &s[..k - 1];
                nodes.clear();
                nodes.extend_from_slice(&self.inputs);
                nodes.extend_from_slice(s);
                for i in 0..nodes.len() {
                    for j in i + 1..nodes.len() {
                        let (a, b) = (nodes[i], nodes[j]);
                        for g in [a & b, a & !b, !a & b, !a & !b] {
                            let g = self.norm(g & self.mask);
                            if g == 0 || nodes.contains(&g) {
                                continue;
                            }
                            self.mark(&mut cc, g, k as u8);
                            if store {
                                ns[..k - 1].copy_from_slice(s);
                                ns[k - 1] = g;
                                next.insert(self.canon(&ns[..k]));
                            }
                        }
                    }
                }
            }
            complete = k as u8;
            if !store {
                break;
            }
            level = next.into_iter().collect();
            level.sort_unstable();
            k += 1;
        }
        if remaining(&cc) && k == store_limit + 1 {
            self.two_gate_pass(&mut cc, &level, store_limit);
            complete += 1;
        }
        (cc, complete)
    }

    /// Marks the orbit of each certificate output at its gate count. The
    /// caller only passes certificates longer than the complete level, so
    /// an unresolved output is optimal at exactly that count.
    pub(super) fn apply_certificates(&self, cc: &mut [u8], certs: &[&[((usize, usize), u8)]]) -> usize {
        let mut hits = 0;
        for cert in certs {
            let mut nodes: Vec<u16> = (0..self.n).map(|i| var(self.n, i)).collect();
            for &((a, b), op) in cert.iter() {
                let (fa, fb) = (nodes[a], nodes[b]);
                let mut g = 0u16;
                for r in 0..1usize << self.n {
                    let va = (fa >> r) & 1;
                    let vb = (fb >> r) & 1;
                    if (op >> (va * 2 + vb)) & 1 == 1 {
                        g |= 1 << r;
                    }
                }
                nodes.push(g & self.mask);
            }
            let out = self.norm(*nodes.last().unwrap());
            if self.mark(cc, out, cert.len() as u8) {
                hits += 1;
            }
        }
        hits
    }

    /// Marks functions needing `size + 2` gates. Any such circuit can be
    /// ordered so that its last non-output gate `h` is read by the output,
    /// so the output is `h op p` with `h` built over the first `size` gates
    /// and `p` among them or the inputs.
    fn two_gate_pass(&self, cc: &mut [u8], level: &[State], size: usize) {
        let k = (size + 2) as u8;
        let mut target: Vec<bool> = cc.iter().map(|&c| c == UNKNOWN).collect();
        let total = self.n + size;
        let mut nodes = [0u16; 16];
        for s in level {
            nodes[..self.n].copy_from_slice(&self.inputs);
            nodes[self.n..total].copy_from_slice(&s[..size]);
            for i in 0..total {
                for j in i + 1..total {
                    let (a, b) = (nodes[i], nodes[j]);
                    for h in [a & b, a & !b, !a & b, a | b] {
                        let h = self.norm(h & self.mask);
                        if h == 0 || nodes[..total].contains(&h) {
                            continue;
                        }
                        for &p in &nodes[..total] {
                            for g in [h & p, h & !p, !h & p, h | p] {
                                let g = self.norm(g & self.mask);
                                if target[g as usize] {
                                    for m in &self.maps {
                                        let x = m[g as usize] as usize;
                                        let y = (!m[g as usize] & self.mask) as usize;
                                        target[x] = false;
                                        target[y] = false;
                                        cc[x] = k;
                                        cc[y] = k;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
