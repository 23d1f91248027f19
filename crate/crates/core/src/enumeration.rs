//! Gray-code walk over all `2^n` spin configurations.
//!
//! Consecutive Gray codes differ in one bit, so each step flips a single
//! spin: the energy changes by `2 σ_k f_k` and every local field by
//! `-2 J_jk σ_k`, an O(n) update instead of an O(n²) recomputation.
//!
//! The index range is cut into fixed-size chunks that are walked in
//! parallel. Chunk boundaries do not depend on the worker count and chunk
//! results are returned in index order, so reductions over them are
//! bit-identical for any number of threads.

use rayon::prelude::*;

use crate::interactions::InteractionMatrix;

/// log2 of the number of configurations per chunk.
const CHUNK_BITS: usize = 14;

/// Binary-reflected Gray code of `t`.
#[inline]
pub fn gray(t: u64) -> u64 {
    t ^ (t >> 1)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Kernel<'a> {
    matrix: &'a InteractionMatrix,
    /// Constant added to the pair energy (diagonal term and optional shift).
    offset: f64,
}

impl<'a> Kernel<'a> {
    pub(crate) fn new(matrix: &'a InteractionMatrix, shift: f64) -> Self {
        Self {
            matrix,
            offset: matrix.diagonal_energy() + shift,
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.matrix.n()
    }

    pub(crate) fn total(&self) -> u64 {
        1u64 << self.n()
    }

    /// Visits configurations with Gray index `start..start + len`, calling
    /// `visit(bits, energy, spins)` for each; `spins[i]` is `σ_{i+1}` as ±1.0.
    pub(crate) fn walk(&self, start: u64, len: u64, mut visit: impl FnMut(u64, f64, &[f64])) {
        let n = self.n();
        let j = self.matrix;
        let mut bits = gray(start);
        let mut spins: Vec<f64> = (0..n)
            .map(|i| if (bits >> i) & 1 == 1 { 1.0 } else { -1.0 })
            .collect();
        let mut fields = vec![0.0; n];
        for (i, field) in fields.iter_mut().enumerate() {
            let row = j.row(i);
            *field = (0..n).filter(|&k| k != i).map(|k| row[k] * spins[k]).sum();
        }
        let pair: f64 = spins.iter().zip(&fields).map(|(s, f)| s * f).sum();
        let mut energy = -0.5 * pair + self.offset;
        visit(bits, energy, &spins);
        for t in (start + 1)..(start + len) {
            let k = t.trailing_zeros() as usize;
            let old = spins[k];
            energy += 2.0 * old * fields[k];
            let delta = -2.0 * old;
            let row = j.row(k);
            for (m, field) in fields.iter_mut().enumerate() {
                if m != k {
                    *field += row[m] * delta;
                }
            }
            spins[k] = -old;
            bits ^= 1u64 << k;
            visit(bits, energy, &spins);
        }
    }

    /// Runs `visit` over every chunk in parallel and returns the per-chunk
    /// accumulators in index order.
    pub(crate) fn chunked<A, I, F>(&self, init: I, visit: F) -> Vec<A>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, u64, f64, &[f64]) + Sync + Send,
    {
        let total = self.total();
        let chunk = total.min(1u64 << CHUNK_BITS);
        let count = total / chunk;
        (0..count)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                self.walk(c * chunk, chunk, |bits, e, s| visit(&mut acc, bits, e, s));
                acc
            })
            .collect()
    }
}

/// Streaming log-sum-exp: `shift + ln(sum)` with all terms stored relative
/// to `shift`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    shift: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub(crate) fn push(&mut self, log_w: f64) {
        if log_w > self.shift {
            self.sum = self.sum * (self.shift - log_w).exp() + 1.0;
            self.shift = log_w;
        } else {
            self.sum += (log_w - self.shift).exp();
        }
    }

    pub(crate) fn merge(self, other: Self) -> Self {
        if other.sum == 0.0 {
            return self;
        }
        if self.sum == 0.0 {
            return other;
        }
        let shift = self.shift.max(other.shift);
        Self {
            shift,
            sum: self.sum * (self.shift - shift).exp() + other.sum * (other.shift - shift).exp(),
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.shift + self.sum.ln()
    }
}
