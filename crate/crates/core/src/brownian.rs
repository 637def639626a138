//! Discretized Brownian driving paths.
//!
//! A path is a vector of increments `dW[n] = W(t[n+1]) - W(t[n])` on an
//! equidistant grid. Coarse paths for coupled coarse/fine error studies are
//! obtained *only* by subsampling a fine master path (never re-sampled), so
//! every resolution shares one underlying noise realization.
//!
//! # Determinism
//!
//! Increments are produced by a counter-based construction: each increment is
//! drawn from a fresh ChaCha8 stream keyed by `(seed, sample, step)`, so the
//! value of `dW[n]` depends only on that triple — never on how many draws
//! happened before it or on which thread asked. Gaussian variates use the
//! Box–Muller cosine branch with `u1 in (0,1]`, `u2 in [0,1)` taken from the
//! top 53 bits of two `u64` draws:
//!
//! ```text
//! z = sqrt(-2 ln u1) * cos(2 pi u2),    dW = sqrt(T/N) * z.
//! ```
//!
//! # Exact summation
//!
//! Increments are rounded to the dyadic lattice `2^-35 * Z` at generation
//! time. Sums of lattice values of this magnitude are exact in `f64` (no
//! rounding ever occurs), so blockwise sums, flat sums, and partial sums all
//! agree bitwise: subsampling commutes with itself and preserves every shared
//! `W(t)` value exactly. The lattice perturbs each increment by at most
//! `2^-36`, which is far below every statistical tolerance in this crate.

use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Spacing of the dyadic lattice increments are rounded to.
const LATTICE: f64 = 1.0 / (1u64 << 35) as f64;

/// Domain tag mixed into the per-increment stream key.
const STREAM_TAG: u64 = 0x5741_5645_4e4f_4953; // "WAVENOIS"

/// Identity of a driving path: base seed plus a Monte-Carlo sample index.
///
/// Distinct samples of an ensemble share the seed and differ in `sample`,
/// which keeps parallel sample generation order-independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathKey {
    pub seed: u64,
    pub sample: u64,
}

impl PathKey {
    pub fn new(seed: u64, sample: u64) -> Self {
        PathKey { seed, sample }
    }
}

impl From<u64> for PathKey {
    fn from(seed: u64) -> Self {
        PathKey { seed, sample: 0 }
    }
}

/// A discretized scalar Brownian path on `[0, T]` with `N` equidistant steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    key: PathKey,
    total_time: f64,
    increments: Vec<f64>,
    level: u32,
}

impl BrownianPath {
    /// Sample a fresh path with `n` increments over `[0, total_time]`.
    ///
    /// Increments are i.i.d. `Normal(0, total_time / n)` draws (up to the
    /// lattice rounding described in the module docs), reproducible per key.
    pub fn sample(key: impl Into<PathKey>, total_time: f64, n: usize) -> Result<Self> {
        let key = key.into();
        if n == 0 {
            return Err(Error::invalid("path must have at least one step (N >= 1)"));
        }
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::invalid(format!(
                "path horizon must be positive and finite, got T = {total_time}"
            )));
        }
        let sqrt_dt = (total_time / n as f64).sqrt();
        let increments = (0..n)
            .map(|step| quantize(sqrt_dt * standard_normal(key, step as u64)))
            .collect();
        Ok(BrownianPath {
            key,
            total_time,
            increments,
            level: 0,
        })
    }

    /// Key (seed, sample) the path was generated from.
    pub fn key(&self) -> PathKey {
        self.key
    }

    /// Horizon `T`.
    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Number of increments `N`.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Time step `T / N`.
    pub fn dt(&self) -> f64 {
        self.total_time / self.increments.len() as f64
    }

    /// Refinement depth metadata (0 for a freshly sampled path; incremented
    /// by each subsampling).
    pub fn level(&self) -> u32 {
        self.level
    }

    /// The increments `dW[0..N]`.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Grid time `t[n] = n * dt`, `0 <= n <= N`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// `W(t[n])`, reconstructed by the fixed left-to-right partial sum of the
    /// increments. Exact on the increment lattice.
    pub fn value(&self, n: usize) -> f64 {
        self.increments[..n].iter().sum()
    }

    /// `W(T)`.
    pub fn terminal_value(&self) -> f64 {
        self.value(self.len())
    }

    /// Coarsen the path by summing `factor` consecutive increments
    /// (left-to-right within each block). The key and level metadata are
    /// carried over; the level is bumped by one.
    pub fn subsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.increments.len() % factor != 0 {
            return Err(Error::invalid(format!(
                "subsampling factor {factor} does not divide N = {}",
                self.increments.len()
            )));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let increments = self
            .increments
            .chunks_exact(factor)
            .map(|block| block.iter().sum())
            .collect();
        Ok(BrownianPath {
            key: self.key,
            total_time: self.total_time,
            increments,
            level: self.level + 1,
        })
    }

    /// Write the path to a little-endian binary stream:
    /// magic `WNLSPATH`, then `seed`, `sample`, `level` (u64), `T` (f64),
    /// `N` (u64), then the `N` increments as f64.
    pub fn dump(&self, w: &mut impl std::io::Write) -> Result<()> {
        w.write_all(b"WNLSPATH")?;
        w.write_all(&self.key.seed.to_le_bytes())?;
        w.write_all(&self.key.sample.to_le_bytes())?;
        w.write_all(&u64::from(self.level).to_le_bytes())?;
        w.write_all(&self.total_time.to_le_bytes())?;
        w.write_all(&(self.increments.len() as u64).to_le_bytes())?;
        for inc in &self.increments {
            w.write_all(&inc.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a path written by [`BrownianPath::dump`]. Increments round-trip
    /// bit-exactly.
    pub fn load(r: &mut impl std::io::Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"WNLSPATH" {
            return Err(Error::invalid("not a path dump (bad magic)"));
        }
        let seed = read_u64(r)?;
        let sample = read_u64(r)?;
        let level = read_u64(r)?;
        let total_time = f64::from_le_bytes(read_bytes(r)?);
        let n = read_u64(r)? as usize;
        if !(total_time > 0.0) || n == 0 {
            return Err(Error::invalid("corrupt path dump header"));
        }
        let mut increments = Vec::with_capacity(n);
        for _ in 0..n {
            increments.push(f64::from_le_bytes(read_bytes(r)?));
        }
        Ok(BrownianPath {
            key: PathKey::new(seed, sample),
            total_time,
            increments,
            level: level as u32,
        })
    }
}

fn read_bytes<const K: usize>(r: &mut impl std::io::Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_u64(r: &mut impl std::io::Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

/// Round to the dyadic lattice `2^-35 * Z`.
fn quantize(x: f64) -> f64 {
    (x / LATTICE).round() * LATTICE
}

/// Standard normal draw for one `(key, step)` cell.
fn standard_normal(key: PathKey, step: u64) -> f64 {
    let mut stream_key = [0u8; 32];
    stream_key[0..8].copy_from_slice(&key.seed.to_le_bytes());
    stream_key[8..16].copy_from_slice(&key.sample.to_le_bytes());
    stream_key[16..24].copy_from_slice(&step.to_le_bytes());
    stream_key[24..32].copy_from_slice(&STREAM_TAG.to_le_bytes());
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(stream_key);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // u1 in (0, 1], u2 in [0, 1); 53-bit resolution.
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
