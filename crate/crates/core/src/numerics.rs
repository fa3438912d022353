//! Minimal dense linear algebra and a seeded, splittable PRNG.
//!
//! Everything downstream (the LSTM, the trainer, the synthetic-trace
//! generator) builds on this module. The networks involved are tiny
//! (tens of units), so a flat row-major `f64` matrix and hand-written
//! loops beat pulling in a BLAS-backed dependency; precision and
//! reproducibility matter more than throughput here.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// The `data.len() == rows * cols` invariant is enforced by every
/// constructor, so element access never needs to re-check it.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from a flat row-major buffer. Errors if the buffer length
    /// does not equal `rows * cols`.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::BadMatrixData(format!(
                "{}x{} matrix requires {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows. Errors on ragged input or zero columns
    /// with a nonzero row count.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Matrix> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::BadMatrixData(format!(
                    "row {} has {} values, expected {}",
                    idx,
                    row.len(),
                    n_cols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Element at `(r, c)`. Panics on out-of-range indices, like slice
    /// indexing does.
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    /// Mutable element at `(r, c)`.
    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }

    /// Flat row-major view of the backing buffer.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat row-major view of the backing buffer.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Matrix-vector product `self · v`.
    ///
    /// Errors when `v.len() != cols`, naming both shapes so the caller
    /// can tell which operand was wrong.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                rows: self.rows,
                cols: self.cols,
                len: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        self.mul_vec_add(v, &mut out);
        Ok(out)
    }

    /// `acc += self · v`. Hot-path variant for callers that have already
    /// validated shapes; dimensions are checked in debug builds only.
    #[inline]
    pub(crate) fn mul_vec_add(&self, v: &[f64], acc: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(acc.len(), self.rows);
        for (r, slot) in acc.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut sum = 0.0;
            for (a, b) in row.iter().zip(v) {
                sum += a * b;
            }
            *slot += sum;
        }
    }

    /// `acc += selfᵀ · v`. Used by backpropagation to push gradients
    /// through a forward product.
    #[inline]
    pub(crate) fn tr_mul_vec_add(&self, v: &[f64], acc: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(acc.len(), self.cols);
        for (r, &vr) in v.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, &a) in acc.iter_mut().zip(row) {
                *slot += vr * a;
            }
        }
    }

    /// `self += a · bᵀ` (outer-product accumulate), used for weight
    /// gradients.
    #[inline]
    pub(crate) fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (slot, &bc) in row.iter_mut().zip(b) {
                *slot += ar * bc;
            }
        }
    }

    fn to_nested_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|r| self.data[r * self.cols..(r + 1) * self.cols].to_vec())
            .collect()
    }
}

// Matrices serialize as nested row-major arrays so weight files stay
// readable and diffable. serde_json emits the shortest decimal that
// round-trips each f64 exactly, which keeps save/load bit-exact.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Numerically stable logistic sigmoid.
///
/// Computed from `exp` of a non-positive argument on both branches, so it
/// never overflows and stays in (0, 1) for finite inputs.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hyperbolic tangent. Thin wrapper over the standard library so the
/// activation pair lives in one place.
#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 output function: avalanche a 64-bit state into one draw.
#[inline]
fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// Seeded, splittable pseudo-random generator.
///
/// This is SplitMix64 (Steele, Lea & Flood's `splittable random` design):
/// the state advances by the golden-ratio increment `0x9E3779B97F4A7C15`
/// and each draw is finalized with the multipliers `0xBF58476D1CE4E5B9`
/// and `0x94D049BB133111EB`. The algorithm and its constants are fixed
/// for the lifetime of this repository — every stored seed must keep
/// reproducing the same streams across releases, so the generator is
/// implemented here rather than borrowed from a crate whose default
/// engine may change.
///
/// Equal seeds produce equal draw sequences; [`Rng::split`] derives an
/// independent child stream for parallel work without perturbing the
/// parent's own sequence beyond one draw.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    state: u64,
}

impl Rng {
    /// Generator seeded with `seed`.
    pub fn new(seed: u64) -> Rng {
        Rng { seed, state: seed }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next raw 64-bit draw.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        splitmix64_mix(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via the Box-Muller transform. Uses two fresh
    /// uniform draws per call so the stream position is input-independent.
    pub fn normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1], avoiding log(0).
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Unbiased uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        // Rejection sampling over the largest multiple of n that fits in
        // u64, so every residue is equally likely.
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    /// In-place Fisher-Yates shuffle driven by this generator.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }

    /// Child generator with an independent stream, derived by drawing a
    /// fresh seed from the parent. Splitting advances the parent by
    /// exactly one draw.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }
}

/// Derive a deterministic child seed from a base seed and a list of
/// role/index tags. Used wherever independent streams must be addressed
/// by position (fold number, content index, ...) rather than by the
/// order in which work happens to run.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64_mix(base.wrapping_add(GOLDEN_GAMMA));
    for &t in tags {
        s = splitmix64_mix(s ^ t.wrapping_add(GOLDEN_GAMMA).wrapping_mul(MIX_MUL_1));
    }
    s
}
