//! Representation counts `r_{a,b}(N)`: ordered pairs `(x, y)` with
//! `x, y >= 1` and `a x^2 + b y^2 = N`.
//!
//! Zero is not a natural number here, so `r_{a,b}(N) = 0` for `N < a + b`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest table `sieve_reps` builds unless told otherwise (256 MiB of counts).
pub const DEFAULT_TABLE_LIMIT: u64 = 1 << 26;

/// Environment variable naming the on-disk cache directory.
pub const CACHE_DIR_ENV: &str = "LATTICE_SERIES_CACHE_DIR";

const MAGIC: &[u8; 4] = b"LSRT";
const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 3 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormCoeffs {
    pub a: u64,
    pub b: u64,
}

impl FormCoeffs {
    pub fn new(a: u64, b: u64) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::invalid(format!("form coefficients must be positive, got a = {a}, b = {b}")));
        }
        Ok(FormCoeffs { a, b })
    }

    pub fn swapped(self) -> Self {
        FormCoeffs { a: self.b, b: self.a }
    }
}

/// `r_{a,b}(n)` by trial over `x`.
pub fn count_reps(c: FormCoeffs, n: u64) -> Result<u64> {
    FormCoeffs::new(c.a, c.b)?;
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let mut count = 0;
    let mut x = 1u64;
    while let Some(ax2) = c.a.checked_mul(x * x) {
        if ax2 >= n || n - ax2 < c.b {
            break;
        }
        let rem = n - ax2;
        if rem % c.b == 0 {
            let q = rem / c.b;
            let y = q.isqrt();
            if y * y == q {
                count += 1;
            }
        }
        x += 1;
    }
    Ok(count)
}

/// Counts `r_{a,b}(N)` for `N = 1..=n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepTable {
    pub coeffs: FormCoeffs,
    pub n_max: u64,
    /// `counts[N - 1] = r_{a,b}(N)`.
    pub counts: Vec<u32>,
}

impl RepTable {
    /// `r_{a,b}(n)`, or `None` outside `1..=n_max`.
    pub fn get(&self, n: u64) -> Option<u32> {
        if n == 0 || n > self.n_max {
            return None;
        }
        Some(self.counts[(n - 1) as usize])
    }

    /// Number of pairs `(x, y)` with `a x^2 + b y^2 <= n_max`.
    pub fn lattice_points(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// `(N, r(N))` for every nonzero count, in increasing `N`.
    pub fn nonzero(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| (i as u64 + 1, c))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.counts.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.coeffs.a.to_le_bytes());
        out.extend_from_slice(&self.coeffs.b.to_le_bytes());
        out.extend_from_slice(&self.n_max.to_le_bytes());
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < HEADER_LEN {
            return Err(format!("truncated header ({} bytes)", bytes.len()));
        }
        if &bytes[..4] != MAGIC {
            return Err("bad magic".into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (a, b, n_max) = (word(6), word(14), word(22));
        if a == 0 || b == 0 {
            return Err("zero form coefficient".into());
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() as u64 != n_max.saturating_mul(4) {
            return Err(format!("expected {n_max} counts, found {} bytes", body.len()));
        }
        let counts = body
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(RepTable {
            coeffs: FormCoeffs { a, b },
            n_max,
            counts,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        RepTable::from_bytes(&bytes).map_err(|reason| Error::Cache {
            path: path.display().to_string(),
            reason,
        })
    }
}

/// Builds the full table with the default size limit.
pub fn sieve_reps(c: FormCoeffs, n_max: u64) -> Result<RepTable> {
    sieve_reps_with_limit(c, n_max, DEFAULT_TABLE_LIMIT)
}

/// Builds the full table by enumerating `x <= sqrt(n_max/a)` and
/// `y <= sqrt((n_max - a x^2)/b)`. The `x` range is split across workers,
/// each filling its own buffer.
pub fn sieve_reps_with_limit(c: FormCoeffs, n_max: u64, limit: u64) -> Result<RepTable> {
    FormCoeffs::new(c.a, c.b)?;
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    if n_max > limit {
        return Err(Error::Capacity { requested: n_max, limit });
    }
    let len = n_max as usize;
    let x_max = if n_max < c.a + c.b { 0 } else { ((n_max - c.b) / c.a).isqrt() };
    let counts = (1..=x_max)
        .into_par_iter()
        .fold(
            || vec![0u32; len],
            |mut buf, x| {
                let ax2 = c.a * x * x;
                let y_max = ((n_max - ax2) / c.b).isqrt();
                for y in 1..=y_max {
                    buf[(ax2 + c.b * y * y - 1) as usize] += 1;
                }
                buf
            },
        )
        .reduce(
            || vec![0u32; len],
            |mut acc, buf| {
                for (a, b) in acc.iter_mut().zip(buf) {
                    *a += b;
                }
                acc
            },
        );
    Ok(RepTable { coeffs: c, n_max, counts })
}

/// Shares tables between evaluations, in memory and optionally on disk.
///
/// A request is served by any cached table for the same form that is at
/// least as long.
#[derive(Debug)]
pub struct RepCache {
    dir: Option<PathBuf>,
    limit: u64,
    tables: Mutex<HashMap<FormCoeffs, Arc<RepTable>>>,
}

impl Default for RepCache {
    fn default() -> Self {
        RepCache::in_memory()
    }
}

impl RepCache {
    pub fn in_memory() -> Self {
        RepCache {
            dir: None,
            limit: DEFAULT_TABLE_LIMIT,
            tables: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        RepCache {
            dir: Some(dir.into()),
            ..RepCache::in_memory()
        }
    }

    /// Uses the directory named by [`CACHE_DIR_ENV`] when set.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => RepCache::with_dir(PathBuf::from(d)),
            _ => RepCache::in_memory(),
        }
    }

    pub fn with_limit(mut self, limit: u64) -> Self {
        self.limit = limit;
        self
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn file_name(c: FormCoeffs, n_max: u64) -> String {
        format!("reps_{}_{}_{}.lsrt", c.a, c.b, n_max)
    }

    /// A table for `c` covering at least `1..=n_max`.
    pub fn get(&self, c: FormCoeffs, n_max: u64) -> Result<Arc<RepTable>> {
        if n_max > self.limit {
            return Err(Error::Capacity { requested: n_max, limit: self.limit });
        }
        if let Some(t) = self.tables.lock().unwrap().get(&c) {
            if t.n_max >= n_max {
                return Ok(Arc::clone(t));
            }
        }
        let table = Arc::new(self.load_or_build(c, n_max)?);
        let mut tables = self.tables.lock().unwrap();
        let entry = tables.entry(c).or_insert_with(|| Arc::clone(&table));
        if entry.n_max < table.n_max {
            *entry = Arc::clone(&table);
        }
        Ok(table)
    }

    fn load_or_build(&self, c: FormCoeffs, n_max: u64) -> Result<RepTable> {
        let Some(dir) = &self.dir else {
            return sieve_reps_with_limit(c, n_max, self.limit);
        };
        let path = dir.join(RepCache::file_name(c, n_max));
        if path.exists() {
            let table = RepTable::read_from(&path)?;
            if table.coeffs != c || table.n_max != n_max {
                return Err(Error::Cache {
                    path: path.display().to_string(),
                    reason: "header does not match file name".into(),
                });
            }
            return Ok(table);
        }
        let table = sieve_reps_with_limit(c, n_max, self.limit)?;
        fs::create_dir_all(dir)?;
        // write then rename so a concurrent reader never sees a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        table.write_to(&tmp)?;
        fs::rename(&tmp, &path)?;
        Ok(table)
    }
}
