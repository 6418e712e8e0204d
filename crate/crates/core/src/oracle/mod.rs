//! Brute-force ground truth: exact complexity tables, exhaustive optimal
//! circuit enumeration and the definitional simple-extension test.
//!
//! Tables cover every function on up to four variables. They are cached on
//! disk under `CMW_CACHE_DIR` (default: `<tmp>/cmw-cache`) and loaded once
//! per process.
//!
//! Cache layout, little-endian: the 5 magic bytes `CMWCC`, a version byte,
//! `n`, the measure (0 = D, 1 = R), the largest complete level, then one
//! byte per function indexed by table value. 255 marks a function whose
//! size exceeds the complete level and has no certificate.

mod dtable;
mod enumerate;
mod rtable;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use thiserror::Error;

use crate::circuit::SizeMeasure;
use crate::tt::{find_keys, TruthTable};

pub use enumerate::{
    enumerate_optimal_batch, enumerate_optimal_circuits, enumerate_optimal_with_vars, ENUMERATION_CAP,
};

pub const MAX_VARS: usize = 4;
pub(crate) const UNKNOWN: u8 = 255;
const MAGIC: &[u8; 5] = b"CMWCC";
const VERSION: u8 = 2;

/// Ten-gate circuits for four-variable functions that the level search
/// leaves open, found offline with a SAT encoding. Nodes 0..4 are the
/// inputs, later nodes are gates `(inputs, op)` whose output on input bits
/// `(a, b)` is bit `2a + b` of `op`.
const D4_CERTIFICATES: [&[((usize, usize), u8)]; 2] = [
    &[
        ((1, 2), 11),
        ((1, 2), 13),
        ((0, 3), 11),
        ((0, 3), 13),
        ((4, 6), 14),
        ((5, 6), 2),
        ((7, 8), 7),
        ((5, 10), 7),
        ((9, 10), 4),
        ((11, 12), 11),
    ],
    &[
        ((0, 1), 14),
        ((0, 1), 8),
        ((4, 5), 4),
        ((2, 6), 8),
        ((2, 6), 1),
        ((7, 8), 14),
        ((3, 9), 14),
        ((3, 9), 8),
        ((5, 10), 1),
        ((11, 12), 14),
    ],
];

/// Deepest R level explored for four variables.
const R_LEVELS: usize = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} variables exceeds the oracle maximum of {max}")]
    TooManyVariables { n: usize, max: usize },
    #[error("size is unresolved by the table; it is at least {lower}")]
    Unresolved { lower: usize },
    #[error("optimal size {size} is over the enumeration cap {cap}")]
    Budget { size: usize, cap: usize },
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Tt(#[from] crate::tt::TtError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcTable {
    pub num_vars: usize,
    pub measure: SizeMeasure,
    /// Every function of size at most this is marked.
    pub complete: u8,
    cc: Vec<u8>,
}

impl CcTable {
    /// Runs the search from scratch.
    pub fn compute(n: usize, measure: SizeMeasure) -> Result<CcTable, OracleError> {
        if n > MAX_VARS {
            return Err(OracleError::TooManyVariables { n, max: MAX_VARS });
        }
        let (cc, mut complete) = if n == 0 {
            (vec![0, 0], 0)
        } else {
            match measure {
                SizeMeasure::D => {
                    let e = dtable::Engine::new(n);
                    let (mut cc, complete) = e.run(7);
                    if n == 4 && complete as usize == 9 {
                        e.apply_certificates(&mut cc, &D4_CERTIFICATES);
                    }
                    (cc, complete)
                }
                SizeMeasure::R => rtable::Engine::new(n).run(R_LEVELS),
            }
        };
        if cc.iter().all(|&c| c != UNKNOWN) {
            complete = UNKNOWN - 1;
        }
        Ok(CcTable { num_vars: n, measure, complete, cc })
    }

    pub fn get(&self, f: u64) -> Option<u8> {
        let v = self.cc[f as usize];
        (v != UNKNOWN).then_some(v)
    }

    pub fn is_total(&self) -> bool {
        self.cc.iter().all(|&c| c != UNKNOWN)
    }

    /// Functions the table leaves open.
    pub fn unresolved(&self) -> Vec<u64> {
        (0..self.cc.len() as u64).filter(|&f| self.cc[f as usize] == UNKNOWN).collect()
    }

    /// Count of functions per size; unresolved ones are not counted.
    pub fn histogram(&self) -> Vec<usize> {
        let top = self.cc.iter().filter(|&&c| c != UNKNOWN).max().copied().unwrap_or(0);
        let mut h = vec![0; top as usize + 1];
        for &c in &self.cc {
            if c != UNKNOWN {
                h[c as usize] += 1;
            }
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.cc.len() + 9);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.num_vars as u8);
        out.push(measure_byte(self.measure));
        out.push(self.complete);
        out.extend_from_slice(&self.cc);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<CcTable, OracleError> {
        let bad = |m: &str| OracleError::Cache(m.to_string());
        if b.len() < 9 || &b[..5] != MAGIC {
            return Err(bad("bad magic"));
        }
        if b[5] != VERSION {
            return Err(bad("unsupported version"));
        }
        let n = b[6] as usize;
        if n > MAX_VARS {
            return Err(bad("bad arity"));
        }
        let measure = match b[7] {
            0 => SizeMeasure::D,
            1 => SizeMeasure::R,
            _ => return Err(bad("bad measure")),
        };
        let cc = b[9..].to_vec();
        if cc.len() != 1 << (1 << n) {
            return Err(bad("truncated"));
        }
        Ok(CcTable { num_vars: n, measure, complete: b[8], cc })
    }

    fn load_or_compute(n: usize, measure: SizeMeasure) -> Result<CcTable, OracleError> {
        let path = cache_dir().join(format!("cc-{n}-{measure}.bin"));
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(t) = CcTable::from_bytes(&bytes) {
                if t.num_vars == n && t.measure == measure {
                    return Ok(t);
                }
            }
        }
        let t = CcTable::compute(n, measure)?;
        // a failed write only costs a recomputation next time
        let _ = write_atomic(&path, &t.to_bytes());
        Ok(t)
    }
}

fn measure_byte(m: SizeMeasure) -> u8 {
    match m {
        SizeMeasure::D => 0,
        SizeMeasure::R => 1,
    }
}

pub fn cache_dir() -> PathBuf {
    std::env::var_os("CMW_CACHE_DIR").map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cmw-cache"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.{}", path.file_name().unwrap().to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

static TABLES: [[OnceLock<Result<CcTable, OracleError>>; 2]; MAX_VARS + 1] = [
    [OnceLock::new(), OnceLock::new()],
    [OnceLock::new(), OnceLock::new()],
    [OnceLock::new(), OnceLock::new()],
    [OnceLock::new(), OnceLock::new()],
    [OnceLock::new(), OnceLock::new()],
];

/// Process-wide table, from the cache or computed on first use.
pub fn table(n: usize, measure: SizeMeasure) -> Result<&'static CcTable, OracleError> {
    if n > MAX_VARS {
        return Err(OracleError::TooManyVariables { n, max: MAX_VARS });
    }
    TABLES[n][measure_byte(measure) as usize]
        .get_or_init(|| CcTable::load_or_compute(n, measure))
        .as_ref()
        .map_err(Clone::clone)
}

/// Minimum size of `tt`, or `None` when it is above `cap`.
pub fn exact_cc(tt: &TruthTable, measure: SizeMeasure, cap: usize) -> Result<Option<usize>, OracleError> {
    let t = table(tt.num_vars(), measure)?;
    match t.get(tt.as_u64()) {
        Some(v) => Ok((v as usize <= cap).then_some(v as usize)),
        None => {
            let lower = t.complete as usize + 1;
            if cap < lower {
                Ok(None)
            } else {
                Err(OracleError::Unresolved { lower })
            }
        }
    }
}

/// The definition taken literally: `g == f`, or `g` is non-degenerate,
/// costs exactly `m` more than `f`, and restricts to `f` under some key.
pub fn is_simple_extension_bruteforce(
    f: &TruthTable,
    g: &TruthTable,
    measure: SizeMeasure,
) -> Result<bool, OracleError> {
    let n = f.num_vars();
    let total = g.num_vars();
    if total > MAX_VARS {
        return Err(OracleError::TooManyVariables { n: total, max: MAX_VARS });
    }
    if total < n {
        return Ok(false);
    }
    if g == f {
        return Ok(true);
    }
    let m = total - n;
    if m == 0 || !g.is_nondegenerate() {
        return Ok(false);
    }
    let want = match exact_cc(f, measure, usize::MAX)? {
        Some(c) => c + m,
        None => return Ok(false),
    };
    if exact_cc(g, measure, want)? != Some(want) {
        return Ok(false);
    }
    Ok(!find_keys(g, f)?.is_empty())
}
