//! Interaction matrices: Curie-Weiss, sine (MPR) and Haar-random orthogonal
//! couplings, plus the algebraic checks that characterise them.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::g17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    CurieWeiss,
    Sine,
    RandomOrthogonal,
    Custom,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::CurieWeiss => "curie_weiss",
            MatrixKind::Sine => "sine",
            MatrixKind::RandomOrthogonal => "random_orthogonal",
            MatrixKind::Custom => "custom",
        }
    }

    /// Whether the construction guarantees `J Jᵀ = I`.
    pub fn is_orthogonal(self) -> bool {
        matches!(self, MatrixKind::Sine | MatrixKind::RandomOrthogonal)
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the diagonal enters the Hamiltonian.
///
/// `ZeroDiagonal`: `H = -Σ_{i<j} J_ij σ_i σ_j` (diagonal must be zero).
/// `KeepDiagonal`: `H = -½ Σ_{i,j} J_ij σ_i σ_j`, which adds the constant `-½ tr J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfInteraction {
    ZeroDiagonal,
    KeepDiagonal,
}

/// Coupling normalisation for the Curie-Weiss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CwCoupling {
    /// `J_ij = 1/N`, the standard model.
    #[default]
    OverN,
    /// `J_ij = 1/(N-1)`; the normalisation under which averaging over
    /// bipartitions reproduces the doubled system exactly.
    OverNMinusOne,
}

/// Dense symmetric coupling matrix. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    entries: DMatrix<f64>,
    kind: MatrixKind,
    self_interaction: SelfInteraction,
}

impl InteractionMatrix {
    /// Wraps an arbitrary matrix. The matrix must be exactly symmetric, and
    /// under `ZeroDiagonal` its diagonal must vanish.
    pub fn custom(entries: DMatrix<f64>, self_interaction: SelfInteraction) -> Result<Self> {
        Self::new(entries, MatrixKind::Custom, self_interaction)
    }

    fn new(
        entries: DMatrix<f64>,
        kind: MatrixKind,
        self_interaction: SelfInteraction,
    ) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidSize {
                n,
                reason: "matrix must be square and non-empty",
            });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        if self_interaction == SelfInteraction::ZeroDiagonal {
            if let Some(index) = (0..n).find(|&i| entries[(i, i)] != 0.0) {
                return Err(Error::NonzeroDiagonal { index });
            }
        }
        Ok(Self {
            entries,
            kind,
            self_interaction,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn self_interaction(&self) -> SelfInteraction {
        self.self_interaction
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entry `(i, j)`, zero-based.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Row `i` as a contiguous slice. Storage is column-major, and for a
    /// symmetric matrix column `i` equals row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.entries.as_slice()[i * n..(i + 1) * n]
    }

    /// Row-major (equivalently column-major) flat view.
    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.get(i, i)).sum()
    }

    /// Constant `-½ tr J` contributed to every energy under `KeepDiagonal`.
    pub fn diagonal_energy(&self) -> f64 {
        match self.self_interaction {
            SelfInteraction::ZeroDiagonal => 0.0,
            SelfInteraction::KeepDiagonal => -0.5 * self.trace(),
        }
    }

    /// `J · J` by explicit summation.
    pub fn square(&self) -> DMatrix<f64> {
        &self.entries * &self.entries
    }

    /// Writes the matrix as CSV, one row per line, `%.17g` floats.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let line: Vec<String> = (0..n).map(|j| g17(self.get(i, j))).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Reads a matrix written by [`write_csv`](Self::write_csv). The result is
    /// tagged `Custom`; the caller supplies the diagonal convention.
    pub fn read_csv<R: BufRead>(input: R, self_interaction: SelfInteraction) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|field| {
                    field.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad number {:?}: {e}", field.trim()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("expected {} columns, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSize {
                n,
                reason: "CSV matrix is not square",
            });
        }
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::custom(entries, self_interaction)
    }
}

pub fn build_curie_weiss(n: usize) -> Result<InteractionMatrix> {
    build_curie_weiss_with(n, CwCoupling::OverN)
}

pub fn build_curie_weiss_with(n: usize, coupling: CwCoupling) -> Result<InteractionMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "Curie-Weiss needs at least 2 spins",
        });
    }
    let value = match coupling {
        CwCoupling::OverN => 1.0 / n as f64,
        CwCoupling::OverNMinusOne => 1.0 / (n - 1) as f64,
    };
    let entries = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { value });
    InteractionMatrix::new(
        entries,
        MatrixKind::CurieWeiss,
        SelfInteraction::ZeroDiagonal,
    )
}

/// `J_ij = 2/√(2n+1) · sin(2π i j / (2n+1))` with `i, j = 1..n`.
pub fn build_sine(n: usize) -> Result<InteractionMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "sine model needs at least 2 spins",
        });
    }
    let m = 2 * n + 1;
    let scale = 2.0 / (m as f64).sqrt();
    // Reduce i*j modulo 2n+1 in integers so the sine argument stays in [0, 2π).
    let entries = DMatrix::from_fn(n, n, |i, j| {
        let r = ((i + 1) * (j + 1)) % m;
        scale * (std::f64::consts::TAU * r as f64 / m as f64).sin()
    });
    InteractionMatrix::new(entries, MatrixKind::Sine, SelfInteraction::KeepDiagonal)
}

/// `J = O · diag(signs) · Oᵀ` with `O` Haar-distributed, drawn from the QR
/// factorisation of a Gaussian matrix with `diag(R) > 0`.
pub fn build_random_orthogonal(n: usize, signs: &[i8], seed: u64) -> Result<InteractionMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "random orthogonal model needs at least 2 spins",
        });
    }
    if signs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: signs.len(),
        });
    }
    if let Some((index, &value)) = signs.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
        return Err(Error::InvalidSign { index, value });
    }
    let o = haar_orthogonal(n, seed);
    let mut scaled = o.clone();
    for (j, &s) in signs.iter().enumerate() {
        if s < 0 {
            scaled.column_mut(j).neg_mut();
        }
    }
    let j = &scaled * o.transpose();
    // Floating-point addition commutes, so this is exactly symmetric.
    let entries = DMatrix::from_fn(n, n, |a, b| 0.5 * (j[(a, b)] + j[(b, a)]));
    InteractionMatrix::new(
        entries,
        MatrixKind::RandomOrthogonal,
        SelfInteraction::KeepDiagonal,
    )
}

fn haar_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gaussian.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `‖J Jᵀ − I‖_max`.
pub fn orthogonality_defect(matrix: &InteractionMatrix) -> f64 {
    let j = matrix.entries();
    let product = j * j.transpose();
    let n = matrix.n();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((product[(a, b)] - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceIdentities {
    pub trace: f64,
    pub trace_of_squares: f64,
}

/// `(Σ J_ii, Σ J_ii²)`.
pub fn trace_identities(matrix: &InteractionMatrix) -> TraceIdentities {
    let (trace, trace_of_squares) = (0..matrix.n())
        .map(|i| matrix.get(i, i))
        .fold((0.0, 0.0), |(t, s), d| (t + d, s + d * d));
    TraceIdentities {
        trace,
        trace_of_squares,
    }
}

/// Eigenvalue signs for random orthogonal sweeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignPattern {
    /// `+1, -1, +1, ...`; trace is `n mod 2`, like the sine model.
    Alternating,
    AllPositive,
    Explicit(Vec<i8>),
}

impl SignPattern {
    pub fn signs(&self, n: usize) -> Result<Vec<i8>> {
        match self {
            SignPattern::Alternating => {
                Ok((0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect())
            }
            SignPattern::AllPositive => Ok(vec![1; n]),
            SignPattern::Explicit(s) if s.len() == n => Ok(s.clone()),
            SignPattern::Explicit(s) => Err(Error::DimensionMismatch {
                expected: n,
                got: s.len(),
            }),
        }
    }
}

/// A model family that can be instantiated at any size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    CurieWeiss,
    Sine,
    RandomOrthogonal { seed: u64, signs: SignPattern },
}

impl ModelSpec {
    pub fn build(&self, n: usize) -> Result<InteractionMatrix> {
        match self {
            ModelSpec::CurieWeiss => build_curie_weiss(n),
            ModelSpec::Sine => build_sine(n),
            ModelSpec::RandomOrthogonal { seed, signs } => {
                build_random_orthogonal(n, &signs.signs(n)?, *seed)
            }
        }
    }

    pub fn kind(&self) -> MatrixKind {
        match self {
            ModelSpec::CurieWeiss => MatrixKind::CurieWeiss,
            ModelSpec::Sine => MatrixKind::Sine,
            ModelSpec::RandomOrthogonal { .. } => MatrixKind::RandomOrthogonal,
        }
    }
}
