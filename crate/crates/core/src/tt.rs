//! Truth tables, partial truth tables, keys and variable permutations.
//!
//! Row `r` assigns variable `i` (1-based) the bit `(r >> (N - i)) & 1`, so
//! `x1` is the most significant bit. Extension variables trail the base
//! variables in every combined table.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TtError {
    #[error("variable index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("table length {0} is not a power of two")]
    BadLength(usize),
    #[error("unexpected character {0:?} in truth table")]
    BadChar(char),
    #[error("variable counts differ: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("not a permutation of 1..={0}")]
    BadPermutation(usize),
    #[error("undefined rows are not allowed here")]
    Undefined,
}

const VAR_MASKS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TruthTable {
    n: usize,
    words: Vec<u64>,
}

fn word_count(n: usize) -> usize {
    if n >= 6 {
        1 << (n - 6)
    } else {
        1
    }
}

fn tail_mask(n: usize) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1 << n)) - 1
    }
}

impl TruthTable {
    pub fn zeros(n: usize) -> Self {
        TruthTable { n, words: vec![0; word_count(n)] }
    }

    pub fn constant(n: usize, c: bool) -> Self {
        let mut t = Self::zeros(n);
        if c {
            for w in &mut t.words {
                *w = u64::MAX;
            }
            t.mask();
        }
        t
    }

    /// Table of the variable at 0-based position `pos`.
    pub fn var(n: usize, pos: usize) -> Self {
        assert!(pos < n);
        let shift = n - 1 - pos;
        let mut t = Self::zeros(n);
        for (w, word) in t.words.iter_mut().enumerate() {
            *word = if shift < 6 {
                VAR_MASKS[shift]
            } else if ((w << 6) >> shift) & 1 == 1 {
                u64::MAX
            } else {
                0
            };
        }
        t.mask();
        t
    }

    /// Table of a function `f` with `n <= 6` given as the low `2^n` bits.
    pub fn from_u64(n: usize, bits: u64) -> Self {
        assert!(n <= 6);
        let mut t = TruthTable { n, words: vec![bits] };
        t.mask();
        t
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        let mut t = Self::zeros(n);
        for r in 0..t.len() {
            if f(r) {
                t.set(r, true);
            }
        }
        t
    }

    /// Low word; the whole table when `n <= 6`.
    pub fn as_u64(&self) -> u64 {
        self.words[0]
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn mask(&mut self) {
        let m = tail_mask(self.n);
        self.words[0] &= m;
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, r: usize) -> bool {
        (self.words[r >> 6] >> (r & 63)) & 1 == 1
    }

    pub fn set(&mut self, r: usize, b: bool) {
        let bit = 1u64 << (r & 63);
        if b {
            self.words[r >> 6] |= bit;
        } else {
            self.words[r >> 6] &= !bit;
        }
    }

    fn zip(&self, o: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.n, o.n);
        let mut t = TruthTable { n: self.n, words: self.words.iter().zip(&o.words).map(|(a, b)| f(*a, *b)).collect() };
        t.mask();
        t
    }

    pub fn and(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a & b)
    }

    pub fn or(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a | b)
    }

    pub fn xor(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a ^ b)
    }

    pub fn not(&self) -> Self {
        let mut t = TruthTable { n: self.n, words: self.words.iter().map(|w| !w).collect() };
        t.mask();
        t
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_constant(&self) -> Option<bool> {
        match self.count_ones() {
            0 => Some(false),
            k if k == self.len() => Some(true),
            _ => None,
        }
    }

    /// `i` is 1-based.
    pub fn depends_on(&self, i: usize) -> Result<bool, TtError> {
        if i == 0 || i > self.n {
            return Err(TtError::IndexOutOfRange(i));
        }
        let s = self.n - i;
        Ok((0..self.len()).any(|r| self.get(r) != self.get(r ^ (1 << s))))
    }

    /// Rows `α` with `f(α) != f(α ⊕ e_i)`.
    pub fn influence(&self, i: usize) -> usize {
        let s = self.n - i;
        (0..self.len()).filter(|&r| self.get(r) != self.get(r ^ (1 << s))).count()
    }

    pub fn is_nondegenerate(&self) -> bool {
        (1..=self.n).all(|i| self.depends_on(i).unwrap())
    }

    /// Fixes the 1-based variables in `fixed`; survivors keep their order.
    pub fn restrict(&self, fixed: &BTreeMap<usize, bool>) -> Result<TruthTable, TtError> {
        for &i in fixed.keys() {
            if i == 0 || i > self.n {
                return Err(TtError::IndexOutOfRange(i));
            }
        }
        let free: Vec<usize> = (1..=self.n).filter(|i| !fixed.contains_key(i)).collect();
        let k = free.len();
        let mut base = 0usize;
        for (&i, &b) in fixed {
            if b {
                base |= 1 << (self.n - i);
            }
        }
        Ok(TruthTable::from_fn(k, |r| {
            let mut row = base;
            for (j, &i) in free.iter().enumerate() {
                if (r >> (k - 1 - j)) & 1 == 1 {
                    row |= 1 << (self.n - i);
                }
            }
            self.get(row)
        }))
    }

    /// Restriction of a table over `n + m` variables by a key on the last `m`.
    pub fn restrict_key(&self, m: usize, key: &Key) -> TruthTable {
        let n = self.n - m;
        let k = key.as_index();
        TruthTable::from_fn(n, |r| self.get((r << m) | k))
    }

    pub fn apply_perm(&self, pi: &Permutation) -> Result<TruthTable, TtError> {
        if pi.len() != self.n {
            return Err(TtError::ArityMismatch(self.n, pi.len()));
        }
        let n = self.n;
        Ok(TruthTable::from_fn(n, |r| self.get(permute_row(n, &pi.0, r))))
    }
}

/// Row of the source table read by row `r` of `apply_perm(_, π)`.
fn permute_row(n: usize, pi: &[usize], r: usize) -> usize {
    let mut src = 0;
    for (j, &p) in pi.iter().enumerate() {
        if (r >> (n - p)) & 1 == 1 {
            src |= 1 << (n - 1 - j);
        }
    }
    src
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.len()).map(|r| if self.get(r) { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

fn arity_of(len: usize) -> Result<usize, TtError> {
    if len == 0 || !len.is_power_of_two() {
        return Err(TtError::BadLength(len));
    }
    Ok(len.trailing_zeros() as usize)
}

impl FromStr for TruthTable {
    type Err = TtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p: PartialTruthTable = s.parse()?;
        p.to_total()
    }
}

/// Table over {0, 1, ⋆}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialTruthTable {
    pub care: TruthTable,
    pub value: TruthTable,
}

impl PartialTruthTable {
    pub fn undefined(n: usize) -> Self {
        PartialTruthTable { care: TruthTable::zeros(n), value: TruthTable::zeros(n) }
    }

    pub fn num_vars(&self) -> usize {
        self.care.num_vars()
    }

    pub fn get(&self, r: usize) -> Option<bool> {
        self.care.get(r).then(|| self.value.get(r))
    }

    pub fn set(&mut self, r: usize, v: Option<bool>) {
        self.care.set(r, v.is_some());
        self.value.set(r, v.unwrap_or(false));
    }

    pub fn defined_rows(&self) -> usize {
        self.care.count_ones()
    }

    /// True when `t` agrees with every defined row.
    pub fn is_consistent_with(&self, t: &TruthTable) -> bool {
        self.care
            .words()
            .iter()
            .zip(self.value.words())
            .zip(t.words())
            .all(|((c, v), w)| (v ^ w) & c == 0)
    }

    pub fn to_total(&self) -> Result<TruthTable, TtError> {
        if self.care.count_ones() != self.care.len() {
            return Err(TtError::Undefined);
        }
        Ok(self.value.clone())
    }
}

impl From<TruthTable> for PartialTruthTable {
    fn from(t: TruthTable) -> Self {
        PartialTruthTable { care: TruthTable::constant(t.num_vars(), true), value: t }
    }
}

impl fmt::Display for PartialTruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.care.len())
            .map(|r| match self.get(r) {
                Some(true) => '1',
                Some(false) => '0',
                None => '⋆',
            })
            .collect();
        f.write_str(&s)
    }
}

impl FromStr for PartialTruthTable {
    type Err = TtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().collect();
        let n = arity_of(chars.len())?;
        let mut p = PartialTruthTable::undefined(n);
        for (r, c) in chars.into_iter().enumerate() {
            match c {
                '0' => p.set(r, Some(false)),
                '1' => p.set(r, Some(true)),
                '⋆' | '*' => {}
                other => return Err(TtError::BadChar(other)),
            }
        }
        Ok(p)
    }
}

/// Assignment to the trailing `m` extension variables, `y1` first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(pub Vec<bool>);

impl Key {
    pub fn from_index(m: usize, k: usize) -> Self {
        Key((0..m).map(|j| (k >> (m - 1 - j)) & 1 == 1).collect())
    }

    pub fn as_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", u8::from(*b))?;
        }
        Ok(())
    }
}

/// Every key `k` with `g(x, k) = f(x)`, in lexicographic order.
pub fn find_keys(g: &TruthTable, f: &TruthTable) -> Result<Vec<Key>, TtError> {
    if g.num_vars() < f.num_vars() {
        return Err(TtError::ArityMismatch(g.num_vars(), f.num_vars()));
    }
    let m = g.num_vars() - f.num_vars();
    Ok((0..1usize << m)
        .map(|k| Key::from_index(m, k))
        .filter(|k| g.restrict_key(m, k) == *f)
        .collect())
}

/// Bijection on `1..=N`; `pi.0[i-1] = π(i)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(pub Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((1..=n).collect())
    }

    pub fn new(map: Vec<usize>) -> Result<Self, TtError> {
        let n = map.len();
        let mut seen = vec![false; n + 1];
        for &v in &map {
            if v == 0 || v > n || seen[v] {
                return Err(TtError::BadPermutation(n));
            }
            seen[v] = true;
        }
        Ok(Permutation(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p - 1] = i + 1;
        }
        Permutation(inv)
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Self) -> Self {
        Permutation(other.0.iter().map(|&o| self.0[o - 1]).collect())
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Per-variable invariant: influence plus ones counted by row weight
/// among rows where the variable is set.
fn signature(t: &TruthTable, i: usize) -> (usize, Vec<usize>) {
    let n = t.num_vars();
    let mut slices = vec![0; n + 1];
    for r in 0..t.len() {
        if t.get(r) && (r >> (n - i)) & 1 == 1 {
            slices[r.count_ones() as usize] += 1;
        }
    }
    (t.influence(i), slices)
}

/// Least π (lexicographically) with `apply_perm(a, π) = b`.
pub fn tt_isomorphic(a: &TruthTable, b: &TruthTable) -> Result<Option<Permutation>, TtError> {
    let n = a.num_vars();
    if n != b.num_vars() {
        return Err(TtError::ArityMismatch(n, b.num_vars()));
    }
    if a.count_ones() != b.count_ones() {
        return Ok(None);
    }
    let sa: Vec<_> = (1..=n).map(|i| signature(a, i)).collect();
    let sb: Vec<_> = (1..=n).map(|i| signature(b, i)).collect();
    let mut pi = Vec::with_capacity(n);
    let mut used = vec![false; n + 1];
    fn rec(
        a: &TruthTable,
        b: &TruthTable,
        sa: &[(usize, Vec<usize>)],
        sb: &[(usize, Vec<usize>)],
        pi: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let n = sa.len();
        let j = pi.len();
        if j == n {
            let p = Permutation(pi.clone());
            return a.apply_perm(&p).unwrap() == *b;
        }
        for v in 1..=n {
            if !used[v] && sa[j] == sb[v - 1] {
                used[v] = true;
                pi.push(v);
                if rec(a, b, sa, sb, pi, used) {
                    return true;
                }
                pi.pop();
                used[v] = false;
            }
        }
        false
    }
    Ok(rec(a, b, &sa, &sb, &mut pi, &mut used).then(|| Permutation(pi)))
}

/// Every permutation of `1..=n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=n).collect();
    loop {
        out.push(Permutation(cur.clone()));
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
}

/// Least table over all variable permutations, for `n <= 6`.
#[derive(Debug, Clone)]
pub struct PermCanon {
    n: usize,
    maps: Vec<Vec<u8>>,
}

impl PermCanon {
    pub fn new(n: usize) -> Self {
        assert!(n <= 6);
        let maps = all_permutations(n)
            .iter()
            .map(|p| (0..1usize << n).map(|r| permute_row(n, &p.0, r) as u8).collect())
            .collect();
        PermCanon { n, maps }
    }

    pub fn canon(&self, t: &TruthTable) -> u64 {
        assert_eq!(t.num_vars(), self.n);
        let w = t.as_u64();
        let mut best = u64::MAX;
        for map in &self.maps {
            let mut v = 0u64;
            for (r, &src) in map.iter().enumerate() {
                v |= ((w >> src) & 1) << r;
            }
            best = best.min(v);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tt(s: &str) -> TruthTable {
        s.parse().unwrap()
    }

    fn parity(n: usize) -> TruthTable {
        TruthTable::from_fn(n, |r| r.count_ones() % 2 == 1)
    }

    #[test]
    fn depends_on_examples() {
        assert!(!tt("0011").depends_on(2).unwrap());
        assert!(tt("0011").depends_on(1).unwrap());
        assert!(tt("0110").depends_on(1).unwrap());
        assert!(!(1..=3).any(|i| TruthTable::zeros(3).depends_on(i).unwrap()));
        assert_eq!(tt("0110").depends_on(3), Err(TtError::IndexOutOfRange(3)));
    }

    #[test]
    fn nondegenerate_examples() {
        for n in 1..=6 {
            assert!(parity(n).is_nondegenerate());
        }
        assert!(!tt("0011").is_nondegenerate());
        assert!(tt("0001").is_nondegenerate());
    }

    #[test]
    fn restrict_examples() {
        let x3 = parity(3);
        let r0 = x3.restrict(&[(3, false)].into_iter().collect()).unwrap();
        let r1 = x3.restrict(&[(3, true)].into_iter().collect()).unwrap();
        assert_eq!(r0, parity(2));
        assert_eq!(r1, parity(2).not());
        assert_eq!(x3.restrict(&BTreeMap::new()).unwrap(), x3);
        assert!(x3.restrict(&[(4, true)].into_iter().collect()).is_err());
    }

    #[test]
    fn find_keys_examples() {
        let xor2 = parity(2);
        assert_eq!(find_keys(&parity(3), &xor2).unwrap(), vec![Key(vec![false])]);
        let or_y = TruthTable::from_fn(3, |r| ((r >> 2) ^ (r >> 1)) & 1 == 1 || r & 1 == 1);
        assert_eq!(find_keys(&or_y, &xor2).unwrap(), vec![Key(vec![false])]);
        let and3 = TruthTable::from_fn(3, |r| r == 7);
        assert!(find_keys(&and3, &xor2).unwrap().is_empty());
        assert!(find_keys(&xor2, &parity(3)).is_err());
    }

    #[test]
    fn apply_perm_examples() {
        let swap = Permutation(vec![2, 1]);
        assert_eq!(tt("0100").apply_perm(&swap).unwrap().to_string(), "0010");
        assert_eq!(parity(3).apply_perm(&Permutation(vec![3, 1, 2])).unwrap(), parity(3));
        assert!(tt("0100").apply_perm(&Permutation::identity(3)).is_err());
    }

    #[test]
    fn apply_perm_reads_permuted_assignment() {
        // output(x) = input(x_{π(1)}, ..., x_{π(N)}) checked row by row
        let t = TruthTable::from_fn(3, |r| [1, 4, 6, 7].contains(&r));
        let pi = Permutation(vec![2, 3, 1]);
        let out = t.apply_perm(&pi).unwrap();
        for r in 0..8 {
            let x = |i: usize| (r >> (3 - i)) & 1;
            let src = (x(pi.0[0]) << 2) | (x(pi.0[1]) << 1) | x(pi.0[2]);
            assert_eq!(out.get(r), t.get(src));
        }
    }

    #[test]
    fn tt_isomorphic_examples() {
        assert_eq!(tt_isomorphic(&tt("0100"), &tt("0010")).unwrap(), Some(Permutation(vec![2, 1])));
        assert_eq!(tt_isomorphic(&parity(4), &parity(4)).unwrap(), Some(Permutation::identity(4)));
        assert_eq!(tt_isomorphic(&tt("0001"), &tt("0111")).unwrap(), None);
        assert!(tt_isomorphic(&tt("0001"), &parity(3)).is_err());
    }

    #[test]
    fn partial_table_roundtrip() {
        let p: PartialTruthTable = "01⋆1".parse().unwrap();
        assert_eq!(p.get(2), None);
        assert_eq!(p.to_string(), "01⋆1");
        assert_eq!("01*1".parse::<PartialTruthTable>().unwrap(), p);
        assert!(p.is_consistent_with(&tt("0111")));
        assert!(p.is_consistent_with(&tt("0101")));
        assert!(!p.is_consistent_with(&tt("1101")));
        assert!("011".parse::<PartialTruthTable>().is_err());
    }

    #[test]
    fn permutations_are_lexicographic() {
        let ps = all_permutations(3);
        assert_eq!(ps.len(), 6);
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
    }

    fn table(n: usize) -> impl Strategy<Value = TruthTable> {
        any::<u64>().prop_map(move |w| TruthTable::from_u64(n, w))
    }

    fn perm(n: usize) -> impl Strategy<Value = Permutation> {
        Just((1..=n).collect::<Vec<_>>()).prop_shuffle().prop_map(Permutation)
    }

    proptest! {
        #[test]
        fn perm_then_inverse(t in table(4), p in perm(4)) {
            let back = t.apply_perm(&p).unwrap().apply_perm(&p.inverse()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn perm_composition(t in table(4), p in perm(4), q in perm(4)) {
            let two = t.apply_perm(&p).unwrap().apply_perm(&q).unwrap();
            prop_assert_eq!(two, t.apply_perm(&q.compose(&p)).unwrap());
        }

        #[test]
        fn iso_finds_witness(t in table(4), p in perm(4)) {
            let b = t.apply_perm(&p).unwrap();
            let found = tt_isomorphic(&t, &b).unwrap().expect("permuted copy is isomorphic");
            prop_assert_eq!(t.apply_perm(&found).unwrap(), b.clone());
            // least witness: no smaller permutation works
            for q in all_permutations(4) {
                if q >= found { break; }
                prop_assert_ne!(t.apply_perm(&q).unwrap(), b.clone());
            }
        }

        #[test]
        fn iso_is_an_equivalence(a in table(3), b in table(3), c in table(3)) {
            let rel = |x: &TruthTable, y: &TruthTable| tt_isomorphic(x, y).unwrap().is_some();
            prop_assert!(rel(&a, &a));
            prop_assert_eq!(rel(&a, &b), rel(&b, &a));
            if rel(&a, &b) && rel(&b, &c) {
                prop_assert!(rel(&a, &c));
            }
            // exhaustive oracle
            let brute = all_permutations(3).iter().any(|p| a.apply_perm(p).unwrap() == b);
            prop_assert_eq!(rel(&a, &b), brute);
        }

        #[test]
        fn keys_contain_the_restricting_key(g in table(5), k in 0usize..4) {
            let key = Key::from_index(2, k);
            let f = g.restrict_key(2, &key);
            prop_assert!(find_keys(&g, &f).unwrap().contains(&key));
        }

        #[test]
        fn restrict_key_matches_restrict(g in table(5), k in 0usize..4) {
            let key = Key::from_index(2, k);
            let fixed: BTreeMap<usize, bool> = [(4, key.0[0]), (5, key.0[1])].into_iter().collect();
            prop_assert_eq!(g.restrict_key(2, &key), g.restrict(&fixed).unwrap());
        }

        #[test]
        fn perm_canon_is_invariant(t in table(4), p in perm(4)) {
            let pc = PermCanon::new(4);
            prop_assert_eq!(pc.canon(&t), pc.canon(&t.apply_perm(&p).unwrap()));
        }

        #[test]
        fn wide_tables_agree_with_rowwise_eval(seed in any::<u64>()) {
            let n = 8;
            let a = TruthTable::var(n, 1);
            let b = TruthTable::var(n, 7);
            let c = a.and(&b.not()).or(&TruthTable::var(n, 4));
            for r in (0..256).step_by(((seed % 7) + 1) as usize) {
                let bit = |i: usize| (r >> (n - 1 - i)) & 1 == 1;
                prop_assert_eq!(c.get(r), (bit(1) && !bit(7)) || bit(4));
            }
        }
    }
}
