//! Higher correlation functions and the weighted sums built from them.
//!
//! Expectations of spin products are stored by the *reduced* index set: a
//! product `σ_{i_1}⋯σ_{i_k}` is keyed by the XOR of the bits `1 << i`, so any
//! index appearing an even number of times drops out (`σ_i² = 1`). The key
//! is the bitmask form of the sorted, multiplicity-reduced index tuple.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{capacity, Error, Result};
use crate::gibbs::{
    cumulants, enumerate, log_partition, EnsembleSummary, GibbsContext, TWO_POINT_CAP,
};
use crate::interactions::InteractionMatrix;

pub const ORDER4_CAP: usize = 12;
pub const ORDER6_CAP: usize = 8;
pub const ORACLE_CAP: usize = ORDER4_CAP;
pub const CONTRACTION_CAP: usize = TWO_POINT_CAP;

/// The fat diagonal `D_r(n)`: r-tuples over `0..n` in which at least two
/// entries coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FatDiagonalSpec {
    r: usize,
    n: usize,
}

impl FatDiagonalSpec {
    pub fn new(r: usize, n: usize) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidSize {
                n: r,
                reason: "fat diagonal needs tuples of arity at least 2",
            });
        }
        Ok(Self { r, n })
    }

    pub fn arity(&self) -> usize {
        self.r
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the tuple lies on the fat diagonal.
    pub fn contains(&self, tuple: &[usize]) -> bool {
        debug_assert_eq!(tuple.len(), self.r);
        tuple
            .iter()
            .enumerate()
            .any(|(a, x)| tuple[a + 1..].contains(x))
    }

    /// `n (n−1) ⋯ (n−r+1)`, the number of tuples off the fat diagonal.
    pub fn complement_size(&self) -> u64 {
        (0..self.r)
            .map(|k| self.n.saturating_sub(k) as u64)
            .product()
    }

    /// Calls `visit` with every tuple of pairwise distinct indices.
    pub fn for_each_outside(&self, mut visit: impl FnMut(&[usize])) {
        let mut tuple = Vec::with_capacity(self.r);
        let mut used = vec![false; self.n];
        fn rec(
            r: usize,
            tuple: &mut Vec<usize>,
            used: &mut [bool],
            visit: &mut dyn FnMut(&[usize]),
        ) {
            if tuple.len() == r {
                visit(tuple);
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    tuple.push(i);
                    rec(r, tuple, used, visit);
                    tuple.pop();
                    used[i] = false;
                }
            }
        }
        rec(self.r, &mut tuple, &mut used, &mut visit);
    }
}

#[inline]
fn pair_mask(i: usize, j: usize) -> u64 {
    (1u64 << i) ^ (1u64 << j)
}

/// Exact spin-product expectations up to a fixed order.
#[derive(Debug, Clone)]
pub struct CorrelationAccessor {
    n: usize,
    order: usize,
    values: HashMap<u64, f64>,
    summary: EnsembleSummary,
}

impl CorrelationAccessor {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest reduced product size stored.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn summary(&self) -> &EnsembleSummary {
        &self.summary
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `⟨∏_{i ∈ mask} σ_i⟩`.
    pub fn expectation_of_mask(&self, mask: u64) -> Result<f64> {
        if mask == 0 {
            return Ok(1.0);
        }
        let size = mask.count_ones() as usize;
        if size % 2 == 1 {
            // Odd products vanish by global spin-flip symmetry; they are
            // not stored.
            return if size <= self.order {
                Ok(0.0)
            } else {
                Err(Error::MissingTensor { order: size })
            };
        }
        self.values
            .get(&mask)
            .copied()
            .ok_or(Error::MissingTensor { order: size })
    }

    /// `⟨σ_{i_1} ⋯ σ_{i_k}⟩`, zero-based indices, repeats allowed.
    pub fn expectation(&self, indices: &[usize]) -> Result<f64> {
        let mut mask = 0u64;
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    n: self.n,
                });
            }
            mask ^= 1u64 << i;
        }
        self.expectation_of_mask(mask)
    }

    /// `⟨∏_k σ_{i_k} σ_{j_k}⟩`.
    pub fn pair_moment(&self, pairs: &[(usize, usize)]) -> Result<f64> {
        let mut mask = 0u64;
        for &(i, j) in pairs {
            for idx in [i, j] {
                if idx >= self.n {
                    return Err(Error::IndexOutOfRange {
                        index: idx,
                        n: self.n,
                    });
                }
            }
            mask ^= pair_mask(i, j);
        }
        self.expectation_of_mask(mask)
    }
}

/// Exact `⟨σ_S⟩` for every even subset `S` with `|S| ≤ order`.
pub fn accumulate_higher_moments(ctx: &GibbsContext, order: usize) -> Result<CorrelationAccessor> {
    let n = ctx.n();
    let cap = match order {
        2 => TWO_POINT_CAP,
        4 => ORDER4_CAP,
        6 => ORDER6_CAP,
        _ => {
            return Err(Error::Domain {
                what: "correlation order (2, 4 or 6)",
                value: order as f64,
            })
        }
    };
    capacity("correlation tensor", n, cap)?;
    let summary = enumerate(ctx, 2, true)?;
    let masks = even_subsets(n, order);
    let log_z = log_partition(ctx)?;
    let beta = ctx.beta();
    let parts = ctx.kernel().chunked(
        || vec![0.0f64; masks.len()],
        |acc, bits, e, _| {
            let w = (-beta * e - log_z).exp();
            let down = !bits;
            for (slot, &m) in acc.iter_mut().zip(&masks) {
                if (m & down).count_ones() % 2 == 0 {
                    *slot += w;
                } else {
                    *slot -= w;
                }
            }
        },
    );
    let mut sums = vec![0.0; masks.len()];
    for part in parts {
        sums.iter_mut().zip(&part).for_each(|(s, p)| *s += p);
    }
    let values = masks.into_iter().zip(sums).collect();
    Ok(CorrelationAccessor {
        n,
        order,
        values,
        summary,
    })
}

fn even_subsets(n: usize, order: usize) -> Vec<u64> {
    let mut out = Vec::new();
    fn rec(start: usize, n: usize, left: usize, mask: u64, out: &mut Vec<u64>) {
        if left == 0 {
            out.push(mask);
            return;
        }
        for i in start..n {
            rec(i + 1, n, left - 1, mask | (1u64 << i), out);
        }
    }
    for size in (2..=order.min(n)).step_by(2) {
        rec(0, n, size, 0, &mut out);
    }
    out
}

/// Set partitions of `0..k`, each block listed in increasing order.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(item: usize, k: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if item == k {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(item);
            rec(item + 1, k, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![item]);
        rec(item + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Largest number of pairs for which the connected correlation is defined here.
pub const MAX_CONNECTED_PAIRS: usize = 3;

/// Pairwise connected correlation `⟨σ_{i_1}σ_{j_1}, …, σ_{i_k}σ_{j_k}⟩_c`,
/// evaluated by its recursive definition: the full moment minus, over every
/// partition of the pairs into at least two blocks, the product of the
/// blocks' lower-order connected correlations.
pub fn connected_correlation(acc: &CorrelationAccessor, pairs: &[(usize, usize)]) -> Result<f64> {
    if pairs.is_empty() || pairs.len() > MAX_CONNECTED_PAIRS {
        return Err(Error::Domain {
            what: "number of pairs (1 to 3)",
            value: pairs.len() as f64,
        });
    }
    for &(i, j) in pairs {
        for idx in [i, j] {
            if idx >= acc.n {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    n: acc.n,
                });
            }
        }
    }
    let masks: Vec<u64> = pairs.iter().map(|&(i, j)| pair_mask(i, j)).collect();
    connected_recursive(acc, &masks)
}

fn connected_recursive(acc: &CorrelationAccessor, masks: &[u64]) -> Result<f64> {
    let full = acc.expectation_of_mask(masks.iter().fold(0, |a, m| a ^ m))?;
    if masks.len() == 1 {
        return Ok(full);
    }
    let mut value = full;
    for partition in set_partitions(masks.len()) {
        if partition.len() < 2 {
            continue;
        }
        let mut product = 1.0;
        for block in &partition {
            let sub: Vec<u64> = block.iter().map(|&b| masks[b]).collect();
            product *= connected_recursive(acc, &sub)?;
        }
        value -= product;
    }
    Ok(value)
}

/// The connected correlation of `k` pairs written as a signed combination of
/// products of full moments, one term per set partition of the pairs.
/// Obtained by unfolding the recursive definition symbolically.
pub fn moment_expansion(k: usize) -> Vec<(Vec<Vec<usize>>, i64)> {
    fn expand(items: &[usize]) -> HashMap<Vec<Vec<usize>>, i64> {
        let mut out: HashMap<Vec<Vec<usize>>, i64> = HashMap::new();
        out.insert(vec![items.to_vec()], 1);
        if items.len() == 1 {
            return out;
        }
        for partition in set_partitions(items.len()) {
            if partition.len() < 2 {
                continue;
            }
            // Product of the blocks' expansions: every combination of one
            // term per block yields a finer partition of `items`.
            let mut terms: Vec<(Vec<Vec<usize>>, i64)> = vec![(Vec::new(), 1)];
            for block in &partition {
                let sub: Vec<usize> = block.iter().map(|&b| items[b]).collect();
                let mut next = Vec::new();
                for (blocks, coeff) in &terms {
                    for (sub_blocks, sub_coeff) in expand(&sub) {
                        let mut merged = blocks.clone();
                        merged.extend(sub_blocks);
                        next.push((merged, coeff * sub_coeff));
                    }
                }
                terms = next;
            }
            for (mut blocks, coeff) in terms {
                blocks.iter_mut().for_each(|b| b.sort_unstable());
                blocks.sort();
                *out.entry(blocks).or_insert(0) -= coeff;
            }
        }
        out
    }
    let items: Vec<usize> = (0..k).collect();
    let mut terms: Vec<_> = expand(&items)
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .collect();
    terms.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    terms
}

/// Which evaluation path [`factorization_gap`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMethod {
    /// Literal quadruple loops over the restricted index sets, using the
    /// exact four-point tensor.
    Oracle,
    /// Inclusion-exclusion over index coincidences using only energy
    /// moments, the two-point matrix and `J²`.
    Contraction,
}

/// `|(1/N²) Σ_{(i,j,l,m) ∉ D₄} J_ij J_lm ⟨σ_iσ_jσ_lσ_m⟩
///   − (1/N²) Σ_{(i,j) ∉ D₂, (l,m) ∉ D₂} J_ij J_lm ⟨σ_iσ_j⟩⟨σ_lσ_m⟩|`.
pub fn factorization_gap(ctx: &GibbsContext, method: GapMethod) -> Result<f64> {
    match method {
        GapMethod::Oracle => {
            capacity("factorization gap (oracle)", ctx.n(), ORACLE_CAP)?;
            let acc = accumulate_higher_moments(ctx, 4)?;
            factorization_gap_oracle(&acc, ctx.matrix())
        }
        GapMethod::Contraction => {
            capacity("factorization gap (contraction)", ctx.n(), CONTRACTION_CAP)?;
            let summary = enumerate(ctx, 2, true)?;
            factorization_gap_contraction(ctx, &summary)
        }
    }
}

pub fn factorization_gap_oracle(
    acc: &CorrelationAccessor,
    matrix: &InteractionMatrix,
) -> Result<f64> {
    let n = acc.n();
    if acc.order() < 4 {
        return Err(Error::MissingTensor { order: 4 });
    }
    let fat4 = FatDiagonalSpec::new(4, n)?;
    let fat2 = FatDiagonalSpec::new(2, n)?;
    let mut four = 0.0;
    let mut product = 0.0;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                for m in 0..n {
                    let coupling = matrix.get(i, j) * matrix.get(l, m);
                    if !fat4.contains(&[i, j, l, m]) {
                        four += coupling * acc.expectation(&[i, j, l, m])?;
                    }
                    if !fat2.contains(&[i, j]) && !fat2.contains(&[l, m]) {
                        product +=
                            coupling * acc.expectation(&[i, j])? * acc.expectation(&[l, m])?;
                    }
                }
            }
        }
    }
    Ok((four - product).abs() / (n * n) as f64)
}

/// Contraction route.
///
/// With `Q = Σ_{i≠j} J_ij σ_i σ_j`, the restricted four-point sum is
/// `⟨Q²⟩` minus the index-coincidence terms:
/// four single coincidences (`i=l`, `i=m`, `j=l`, `j=m`), each equal to
/// `S₁ = Σ_{a≠b} [(J²)_ab − J_aa J_ab − J_ab J_bb] ⟨σ_aσ_b⟩`, and two double
/// coincidences, each `Σ_{i≠j} J_ij²`. The product term is `⟨Q⟩²`.
/// `Q = −2(H − c)` where `c` collects the diagonal and shift constants, so
/// `⟨Q⟩` and `⟨Q²⟩` follow from the first two energy moments.
pub fn factorization_gap_contraction(ctx: &GibbsContext, summary: &EnsembleSummary) -> Result<f64> {
    let matrix = ctx.matrix();
    let n = matrix.n();
    let two_point = summary
        .two_point
        .as_ref()
        .ok_or(Error::MissingTensor { order: 2 })?;
    let (h1, h2) = match (summary.moment(1), summary.moment(2)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InsufficientMoments {
                requested: 2,
                available: summary.moments.len(),
            })
        }
    };
    let nf = n as f64;
    let c = matrix.diagonal_energy() + ctx.shift();
    let q1 = -2.0 * (nf * h1 - c);
    let q2 = 4.0 * (nf * nf * h2 - 2.0 * c * nf * h1 + c * c);

    let square = matrix.square();
    let mut single = 0.0;
    let mut double = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let jab = matrix.get(a, b);
            let weight = square[(a, b)] - matrix.get(a, a) * jab - jab * matrix.get(b, b);
            single += weight * two_point[(a, b)];
            double += jab * jab;
        }
    }
    let four = q2 - 4.0 * single - 2.0 * double;
    Ok((four - q1 * q1).abs() / (nf * nf))
}

/// `|(1/N²) Σ_{i,l,m} J_ii J_lm ⟨σ_lσ_m⟩|`.
pub fn lemma_trace_term(ctx: &GibbsContext) -> Result<f64> {
    capacity("lemma terms", ctx.n(), TWO_POINT_CAP)?;
    lemma_terms_from_summary(ctx.matrix(), &enumerate(ctx, 1, true)?).map(|t| t.trace_term)
}

/// `(1/N²) Σ_{i,j,m} J_ij J_jm ⟨σ_iσ_m⟩`.
pub fn lemma_resolvent_term(ctx: &GibbsContext) -> Result<f64> {
    capacity("lemma terms", ctx.n(), TWO_POINT_CAP)?;
    lemma_terms_from_summary(ctx.matrix(), &enumerate(ctx, 1, true)?).map(|t| t.resolvent_term)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaTerms {
    pub trace_term: f64,
    pub resolvent_term: f64,
}

pub fn lemma_terms_from_summary(
    matrix: &InteractionMatrix,
    summary: &EnsembleSummary,
) -> Result<LemmaTerms> {
    let two_point = summary
        .two_point
        .as_ref()
        .ok_or(Error::MissingTensor { order: 2 })?;
    let n = matrix.n();
    let nf2 = (n * n) as f64;
    let mut pair_sum = 0.0;
    let mut resolvent = 0.0;
    for i in 0..n {
        for m in 0..n {
            pair_sum += matrix.get(i, m) * two_point[(i, m)];
            let jj: f64 = (0..n).map(|j| matrix.get(i, j) * matrix.get(j, m)).sum();
            resolvent += jj * two_point[(i, m)];
        }
    }
    Ok(LemmaTerms {
        trace_term: (matrix.trace() * pair_sum).abs() / nf2,
        resolvent_term: resolvent / nf2,
    })
}

/// `(1/N^k) Σ_{all i, j} J_{i_1j_1}⋯J_{i_kj_k} ⟨σ_{i_1}σ_{j_1}, …⟩_c` via the
/// energy cumulants. Summing connected correlations over all indices is the
/// joint cumulant of `σᵀJσ = −2H + const`, hence `(−2)^k κ_k(h)` for `k ≥ 2`.
pub fn weighted_cumulant_sum(ctx: &GibbsContext, order: usize) -> Result<f64> {
    check_order(order)?;
    capacity("weighted cumulant sum", ctx.n(), TWO_POINT_CAP)?;
    let summary = enumerate(ctx, order, false)?;
    let kappa = cumulants(&summary, order)?.order(order);
    Ok((-2.0f64).powi(order as i32) * kappa)
}

/// Same quantity by direct summation of connected correlations over all
/// `N^{2k}` index tuples.
pub fn weighted_cumulant_sum_direct(
    acc: &CorrelationAccessor,
    matrix: &InteractionMatrix,
    order: usize,
) -> Result<f64> {
    check_order(order)?;
    if acc.order() < 2 * order {
        return Err(Error::MissingTensor { order: 2 * order });
    }
    let n = acc.n();
    let mut idx = vec![0usize; 2 * order];
    let mut total = 0.0;
    loop {
        let mut coupling = 1.0;
        let mut pairs = Vec::with_capacity(order);
        for p in 0..order {
            let (i, j) = (idx[2 * p], idx[2 * p + 1]);
            coupling *= matrix.get(i, j);
            pairs.push((i, j));
        }
        if coupling != 0.0 {
            total += coupling * connected_correlation(acc, &pairs)?;
        }
        // Odometer increment over [0, n)^{2k}.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(total / (n as f64).powi(order as i32));
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 2 || order == 3 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "weighted sum order (2 or 3)",
            value: order as f64,
        })
    }
}

/// `Σ_{2k distinct indices} J_{i_1j_1}⋯J_{i_kj_k} ⟨σ_{i_1}σ_{j_1}⋯σ_{i_k}σ_{j_k}⟩`.
pub fn restricted_block_sum(
    acc: &CorrelationAccessor,
    matrix: &InteractionMatrix,
    pairs: usize,
) -> Result<f64> {
    if acc.order() < 2 * pairs {
        return Err(Error::MissingTensor { order: 2 * pairs });
    }
    let fat = FatDiagonalSpec::new(2 * pairs, acc.n())?;
    let mut total = 0.0;
    let mut err = None;
    fat.for_each_outside(|t| {
        let mut coupling = 1.0;
        let mut mask = 0u64;
        for p in t.chunks_exact(2) {
            coupling *= matrix.get(p[0], p[1]);
            mask |= pair_mask(p[0], p[1]);
        }
        match acc.expectation_of_mask(mask) {
            Ok(v) => total += coupling * v,
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// The starred sum: the connected correlation of `order` pairs is expanded
/// into products of moments, and each moment's indices are summed only over
/// pairwise distinct values within that moment. Returns
/// `(1/N^k) Σ* J⋯J ⟨…⟩_c` (signed).
pub fn starred_sum(ctx: &GibbsContext, order: usize) -> Result<f64> {
    check_order(order)?;
    let cap = if order == 2 { ORDER4_CAP } else { ORDER6_CAP };
    capacity("starred sum", ctx.n(), cap)?;
    let acc = accumulate_higher_moments(ctx, 2 * order)?;
    starred_sum_from(&acc, ctx.matrix(), order)
}

pub fn starred_sum_from(
    acc: &CorrelationAccessor,
    matrix: &InteractionMatrix,
    order: usize,
) -> Result<f64> {
    check_order(order)?;
    // Restrictions act within each moment only, so the sum over a product
    // of moments factorises into per-block restricted sums that depend on
    // the block size alone.
    let blocks = (1..=order)
        .map(|k| restricted_block_sum(acc, matrix, k))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = moment_expansion(order)
        .iter()
        .map(|(partition, coeff)| {
            *coeff as f64
                * partition
                    .iter()
                    .map(|b| blocks[b.len() - 1])
                    .product::<f64>()
        })
        .sum();
    Ok(total / (acc.n() as f64).powi(order as i32))
}

/// Full `⟨σ_iσ_j⟩` matrix from an accessor (unit diagonal).
pub fn two_point_matrix(acc: &CorrelationAccessor) -> Result<DMatrix<f64>> {
    let n = acc.n();
    let mut m = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = acc.expectation(&[i, j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}
