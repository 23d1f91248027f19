//! Exact Gibbs computations by full enumeration of `{-1, +1}^n`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::value::RawValue;

use crate::enumeration::{Kernel, LogSumExp};
use crate::error::{capacity, Error, Result};
use crate::format::json_number;
use crate::interactions::{InteractionMatrix, MatrixKind, SelfInteraction};
use crate::spin::SpinConfiguration;

/// Hard cap: configuration indices must fit a machine word comfortably.
pub const ENUMERATION_CAP: usize = 30;
/// Cap when the two-point matrix is accumulated (O(n² 2ⁿ) work).
pub const TWO_POINT_CAP: usize = 24;
/// Cap for the characteristic-function and energy-range scans.
pub const SCAN_CAP: usize = 24;
/// Highest energy-density moment that is exposed.
pub const MAX_MOMENT_ORDER: usize = 6;
/// Above this value of `β·n` moments are accumulated in a second pass with
/// weights already normalised by `Z`.
pub const TWO_PASS_THRESHOLD: f64 = 50.0;

/// Couplings, inverse temperature and the optional `+½` energy shift.
#[derive(Debug, Clone)]
pub struct GibbsContext {
    matrix: Arc<InteractionMatrix>,
    beta: f64,
    shifted: bool,
}

impl GibbsContext {
    pub fn new(matrix: InteractionMatrix, beta: f64) -> Result<Self> {
        Self::from_shared(Arc::new(matrix), beta)
    }

    pub fn from_shared(matrix: Arc<InteractionMatrix>, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Domain {
                what: "inverse temperature",
                value: beta,
            });
        }
        Ok(Self {
            matrix,
            beta,
            shifted: false,
        })
    }

    /// Adds `+½` to every energy. Only constants move; correlations do not.
    pub fn with_shift(mut self, shifted: bool) -> Self {
        self.shifted = shifted;
        self
    }

    /// Same couplings at another temperature.
    pub fn at_beta(&self, beta: f64) -> Result<Self> {
        Ok(Self::from_shared(self.matrix.clone(), beta)?.with_shift(self.shifted))
    }

    pub fn matrix(&self) -> &InteractionMatrix {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> Arc<InteractionMatrix> {
        self.matrix.clone()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn shifted(&self) -> bool {
        self.shifted
    }

    pub(crate) fn shift(&self) -> f64 {
        if self.shifted {
            0.5
        } else {
            0.0
        }
    }

    pub(crate) fn kernel(&self) -> Kernel<'_> {
        Kernel::new(&self.matrix, self.shift())
    }
}

/// Energy of one configuration, summed from scratch.
pub fn energy(ctx: &GibbsContext, sigma: &SpinConfiguration) -> Result<f64> {
    let j = ctx.matrix();
    let n = j.n();
    if sigma.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sigma.n(),
        });
    }
    let s = sigma.to_f64();
    let h = match j.self_interaction() {
        SelfInteraction::ZeroDiagonal => {
            let mut acc = 0.0;
            for a in 0..n {
                for b in (a + 1)..n {
                    acc += j.get(a, b) * s[a] * s[b];
                }
            }
            -acc
        }
        SelfInteraction::KeepDiagonal => {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    acc += j.get(a, b) * s[a] * s[b];
                }
            }
            -0.5 * acc
        }
    };
    Ok(h + ctx.shift())
}

/// Exact ensemble averages at one `(J, β)`.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub n: usize,
    pub beta: f64,
    pub model: MatrixKind,
    /// Natural log of the partition function.
    pub log_z: f64,
    /// `moments[k-1] = ⟨h^k⟩` with `h = H/n`.
    pub moments: Vec<f64>,
    /// `⟨σ_i σ_j⟩`, unit diagonal; present when requested.
    pub two_point: Option<DMatrix<f64>>,
    /// `⟨σ_i⟩`; present alongside `two_point`.
    pub one_point: Option<Vec<f64>>,
    /// `(⟨M⟩, ⟨M²⟩)` for the total magnetization `M = Σ σ_i`.
    pub magnetization_moments: (f64, f64),
}

impl EnsembleSummary {
    /// `⟨h^k⟩`, `k ≥ 1`.
    pub fn moment(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.moments.get(i)).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Record<'a> {
            n: usize,
            beta: Box<RawValue>,
            model: &'a str,
            log_z: Box<RawValue>,
            moments: Vec<Box<RawValue>>,
            #[serde(skip_serializing_if = "Option::is_none")]
            two_point: Option<Vec<Box<RawValue>>>,
        }
        let two_point = self.two_point.as_ref().map(|m| {
            // Row-major; the matrix is symmetric so column-major order coincides.
            m.as_slice().iter().map(|&x| json_number(x)).collect()
        });
        let record = Record {
            n: self.n,
            beta: json_number(self.beta),
            model: self.model.as_str(),
            log_z: json_number(self.log_z),
            moments: self.moments.iter().map(|&x| json_number(x)).collect(),
            two_point,
        };
        Ok(serde_json::to_string(&record)?)
    }
}

struct SummaryAcc {
    shift: f64,
    z: f64,
    powers: Vec<f64>,
    mag: [f64; 2],
    one: Vec<f64>,
    /// Upper triangle, row-major, `i < j`.
    two: Vec<f64>,
}

/// Weights are kept within `e^RESCALE_MARGIN` of the running shift.
const RESCALE_MARGIN: f64 = 20.0;

impl SummaryAcc {
    fn new(k_max: usize, n: usize, two_point: bool, shift: f64) -> Self {
        Self {
            shift,
            z: 0.0,
            powers: vec![0.0; k_max],
            mag: [0.0; 2],
            one: if two_point { vec![0.0; n] } else { Vec::new() },
            two: if two_point {
                vec![0.0; n * (n - 1) / 2]
            } else {
                Vec::new()
            },
        }
    }

    fn scale(&mut self, factor: f64) {
        self.z *= factor;
        self.powers.iter_mut().for_each(|x| *x *= factor);
        self.mag.iter_mut().for_each(|x| *x *= factor);
        self.one.iter_mut().for_each(|x| *x *= factor);
        self.two.iter_mut().for_each(|x| *x *= factor);
    }

    fn rescale_to(&mut self, shift: f64) {
        if self.z != 0.0 {
            self.scale((self.shift - shift).exp());
        }
        self.shift = shift;
    }

    #[inline]
    fn push(&mut self, log_w: f64, h: f64, spins: &[f64], streaming: bool) {
        if streaming && (self.z == 0.0 || log_w > self.shift + RESCALE_MARGIN) {
            self.rescale_to(log_w);
        }
        let w = (log_w - self.shift).exp();
        self.z += w;
        let mut p = w;
        for slot in self.powers.iter_mut() {
            p *= h;
            *slot += p;
        }
        let m: f64 = spins.iter().sum();
        self.mag[0] += w * m;
        self.mag[1] += w * m * m;
        if !self.one.is_empty() {
            let n = spins.len();
            let mut idx = 0;
            for i in 0..n {
                let ws = w * spins[i];
                self.one[i] += ws;
                for &sj in &spins[i + 1..] {
                    self.two[idx] += ws * sj;
                    idx += 1;
                }
            }
        }
    }

    fn merge(mut self, mut other: Self) -> Self {
        if other.z == 0.0 {
            return self;
        }
        if self.z == 0.0 {
            return other;
        }
        let shift = self.shift.max(other.shift);
        self.rescale_to(shift);
        other.rescale_to(shift);
        self.z += other.z;
        let add = |a: &mut Vec<f64>, b: &[f64]| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.powers, &other.powers);
        self.mag[0] += other.mag[0];
        self.mag[1] += other.mag[1];
        add(&mut self.one, &other.one);
        add(&mut self.two, &other.two);
        self
    }
}

/// `ln Z` at the context's temperature.
pub fn log_partition(ctx: &GibbsContext) -> Result<f64> {
    log_partition_at(ctx, ctx.beta())
}

/// `ln Z(β)` for the context's couplings at an arbitrary finite `β`
/// (negative values are allowed; they arise in `Z(β + λ/n)`).
pub fn log_partition_at(ctx: &GibbsContext, beta: f64) -> Result<f64> {
    capacity("exact enumeration", ctx.n(), ENUMERATION_CAP)?;
    if !beta.is_finite() {
        return Err(Error::Domain {
            what: "inverse temperature",
            value: beta,
        });
    }
    let parts = ctx
        .kernel()
        .chunked(LogSumExp::default, |acc, _, e, _| acc.push(-beta * e));
    Ok(parts
        .into_iter()
        .fold(LogSumExp::default(), LogSumExp::merge)
        .value())
}

/// Order in which [`log_partition_in_order`] visits configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationOrder {
    /// Incremental Gray-code walk (the production path).
    Gray,
    /// Plain binary counting with every energy recomputed from scratch.
    Natural,
}

/// Sequential `ln Z` in a chosen visiting order; a reference for the
/// parallel incremental path.
pub fn log_partition_in_order(ctx: &GibbsContext, order: EnumerationOrder) -> Result<f64> {
    let n = ctx.n();
    capacity("sequential enumeration", n, SCAN_CAP)?;
    let mut lse = LogSumExp::default();
    match order {
        EnumerationOrder::Gray => {
            let kernel = ctx.kernel();
            kernel.walk(0, kernel.total(), |_, e, _| lse.push(-ctx.beta() * e));
        }
        EnumerationOrder::Natural => {
            for index in 0..(1u64 << n) {
                let sigma = SpinConfiguration::from_index(n, index)?;
                lse.push(-ctx.beta() * energy(ctx, &sigma)?);
            }
        }
    }
    Ok(lse.value())
}

/// Full enumeration: `ln Z`, `⟨h^k⟩` for `k ≤ k_max`, magnetization
/// moments and, optionally, `⟨σ_i⟩` and `⟨σ_i σ_j⟩`.
pub fn enumerate(
    ctx: &GibbsContext,
    k_max: usize,
    want_two_point: bool,
) -> Result<EnsembleSummary> {
    let n = ctx.n();
    capacity("exact enumeration", n, ENUMERATION_CAP)?;
    if want_two_point {
        capacity("two-point enumeration", n, TWO_POINT_CAP)?;
    }
    if k_max > MAX_MOMENT_ORDER {
        return Err(Error::Domain {
            what: "moment order",
            value: k_max as f64,
        });
    }
    let beta = ctx.beta();
    let inv_n = 1.0 / n as f64;
    let kernel = ctx.kernel();

    let two_pass = beta * n as f64 > TWO_PASS_THRESHOLD;
    let fixed_shift = if two_pass {
        log_partition(ctx)?
    } else {
        f64::NEG_INFINITY
    };
    let parts = kernel.chunked(
        || SummaryAcc::new(k_max, n, want_two_point, fixed_shift),
        |acc, _, e, spins| acc.push(-beta * e, e * inv_n, spins, !two_pass),
    );
    let acc = parts
        .into_iter()
        .reduce(SummaryAcc::merge)
        .expect("at least one chunk");

    let log_z = if two_pass {
        fixed_shift
    } else {
        acc.shift + acc.z.ln()
    };
    let norm = 1.0 / acc.z;
    let moments = acc.powers.iter().map(|x| x * norm).collect();
    let (two_point, one_point) = if want_two_point {
        let mut m = DMatrix::identity(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = acc.two[idx] * norm;
                m[(i, j)] = v;
                m[(j, i)] = v;
                idx += 1;
            }
        }
        (Some(m), Some(acc.one.iter().map(|x| x * norm).collect()))
    } else {
        (None, None)
    };
    Ok(EnsembleSummary {
        n,
        beta,
        model: ctx.matrix().kind(),
        log_z,
        moments,
        two_point,
        one_point,
        magnetization_moments: (acc.mag[0] * norm, acc.mag[1] * norm),
    })
}

/// `⟨f⟩` under the Gibbs measure, `f(bits, energy)` evaluated on every
/// configuration (bit `i` set means `σ_{i+1} = +1`).
pub fn thermal_average<F>(ctx: &GibbsContext, f: F) -> Result<f64>
where
    F: Fn(u64, f64) -> f64 + Sync + Send,
{
    let log_z = log_partition(ctx)?;
    let beta = ctx.beta();
    let parts = ctx.kernel().chunked(
        || 0.0f64,
        |acc, bits, e, _| *acc += (-beta * e - log_z).exp() * f(bits, e),
    );
    Ok(parts.into_iter().sum())
}

/// `⟨h⟩`.
pub fn mean_energy_density(summary: &EnsembleSummary) -> Result<f64> {
    summary.moment(1).ok_or(Error::InsufficientMoments {
        requested: 1,
        available: 0,
    })
}

/// Cumulants `κ_1..κ_K` of the energy density.
#[derive(Debug, Clone, PartialEq)]
pub struct Cumulants(Vec<f64>);

impl Cumulants {
    /// `κ_k`, `1 ≤ k ≤ max_order`.
    pub fn order(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    pub fn max_order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Moment-to-cumulant recursion
/// `κ_k = m_k − Σ_{j<k} C(k−1, j−1) κ_j m_{k−j}`.
pub fn cumulants(summary: &EnsembleSummary, n_max: usize) -> Result<Cumulants> {
    cumulants_from_moments(&summary.moments, n_max)
}

pub fn cumulants_from_moments(moments: &[f64], n_max: usize) -> Result<Cumulants> {
    if n_max > moments.len() {
        return Err(Error::InsufficientMoments {
            requested: n_max,
            available: moments.len(),
        });
    }
    let mut kappa: Vec<f64> = Vec::with_capacity(n_max);
    for k in 1..=n_max {
        let mut value = moments[k - 1];
        for j in 1..k {
            value -= binomial(k - 1, j - 1) * kappa[j - 1] * moments[k - j - 1];
        }
        kappa.push(value);
    }
    Ok(Cumulants(kappa))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfCheck {
    /// `⟨e^{−λh}⟩` averaged over configurations.
    pub lhs: f64,
    /// `Z(β + λ/n) / Z(β)`.
    pub rhs: f64,
}

impl MgfCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Both sides of `⟨e^{−λ h}⟩ = Z(β + λ/n) / Z(β)`.
pub fn mgf_check(ctx: &GibbsContext, lambda: f64) -> Result<MgfCheck> {
    let n = ctx.n();
    capacity("characteristic-function check", n, SCAN_CAP)?;
    let beta = ctx.beta();
    let log_z = log_partition(ctx)?;
    let inv_n = 1.0 / n as f64;
    // Numerator and denominator share weights and summation order, so the
    // ratio is exactly 1 at λ = 0.
    let parts = ctx.kernel().chunked(
        || (0.0f64, 0.0f64),
        |acc, _, e, _| {
            let w = (-beta * e - log_z).exp();
            acc.0 += w * (-lambda * e * inv_n).exp();
            acc.1 += w;
        },
    );
    let (num, den) = parts
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let shifted = log_partition_at(ctx, beta + lambda * inv_n)?;
    Ok(MgfCheck {
        lhs: num / den,
        rhs: (shifted - log_z).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRange {
    pub min: f64,
    pub max: f64,
}

/// Exhaustive minimum and maximum of `H`.
pub fn energy_bounds_check(ctx: &GibbsContext) -> Result<EnergyRange> {
    capacity("energy range scan", ctx.n(), SCAN_CAP)?;
    let parts = ctx.kernel().chunked(
        || (f64::INFINITY, f64::NEG_INFINITY),
        |acc, _, e, _| {
            acc.0 = acc.0.min(e);
            acc.1 = acc.1.max(e);
        },
    );
    let (min, max) = parts
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| {
            (a.0.min(b.0), a.1.max(b.1))
        });
    Ok(EnergyRange { min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::{build_curie_weiss, build_random_orthogonal, build_sine};

    fn ctx(matrix: InteractionMatrix, beta: f64) -> GibbsContext {
        GibbsContext::new(matrix, beta).unwrap()
    }

    #[test]
    fn energy_examples() {
        let c = ctx(build_curie_weiss(2).unwrap(), 1.0);
        let up = SpinConfiguration::all_up(2);
        assert!((energy(&c, &up).unwrap() + 0.5).abs() < 1e-15);
        // CW: H = −M²/(2n) + 1/2.
        let c = ctx(build_curie_weiss(7).unwrap(), 1.0);
        for index in 0..(1u64 << 7) {
            let s = SpinConfiguration::from_index(7, index).unwrap();
            let m = s.magnetization() as f64;
            assert!((energy(&c, &s).unwrap() - (-m * m / 14.0 + 0.5)).abs() < 1e-12);
        }
        let all_up = SpinConfiguration::all_up(7);
        assert!((energy(&c, &all_up).unwrap() + 3.0).abs() < 1e-12);
        assert!(matches!(
            energy(&c, &SpinConfiguration::new(3)),
            Err(Error::DimensionMismatch {
                expected: 7,
                got: 3
            })
        ));
    }

    #[test]
    fn shift_adds_half() {
        let c = ctx(build_sine(5).unwrap(), 0.4);
        let s = SpinConfiguration::from_index(5, 0b10110).unwrap();
        let plain = energy(&c, &s).unwrap();
        let shifted = energy(&c.clone().with_shift(true), &s).unwrap();
        assert!((shifted - plain - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_spin_curie_weiss_by_hand() {
        for beta in [0.0, 0.3, 1.7, 5.0] {
            let s = enumerate(&ctx(build_curie_weiss(2).unwrap(), beta), 2, true).unwrap();
            assert!((s.log_z - (4.0 * (beta / 2.0).cosh()).ln()).abs() < 1e-13);
            let tp = s.two_point.unwrap();
            assert!((tp[(0, 1)] - (beta / 2.0).tanh()).abs() < 1e-13);
        }
    }

    #[test]
    fn infinite_temperature() {
        for matrix in [build_sine(9).unwrap(), build_curie_weiss(8).unwrap()] {
            let n = matrix.n();
            let s = enumerate(&ctx(matrix, 0.0), 4, true).unwrap();
            assert!((s.log_z - n as f64 * 2f64.ln()).abs() < 1e-12);
            let tp = s.two_point.as_ref().unwrap();
            for i in 0..n {
                assert_eq!(tp[(i, i)], 1.0);
                for j in 0..n {
                    if i != j {
                        assert!(tp[(i, j)].abs() < 1e-15);
                    }
                }
            }
        }
        // ZeroDiagonal: ⟨h⟩ = 0 at β = 0.
        let s = enumerate(&ctx(build_curie_weiss(6).unwrap(), 0.0), 1, false).unwrap();
        assert!(mean_energy_density(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn curie_weiss_variance_at_infinite_temperature() {
        // h = −(1/n²) Σ_{i<j} σ_iσ_j; the C(n,2) pair products are
        // independent unit-variance signs under the product measure.
        let n = 4;
        let s = enumerate(&ctx(build_curie_weiss(n).unwrap(), 0.0), 2, false).unwrap();
        let k = cumulants(&s, 2).unwrap();
        assert!((k.order(2) - 6.0 / 256.0).abs() < 1e-15);
        assert_eq!(k.order(1), s.moments[0]);
    }

    #[test]
    fn curie_weiss_mean_energy_matches_pair_correlation() {
        for (n, beta) in [(6, 0.5), (10, 1.2)] {
            let s = enumerate(&ctx(build_curie_weiss(n).unwrap(), beta), 1, true).unwrap();
            let pair = s.two_point.as_ref().unwrap()[(0, 1)];
            let expected = -((n - 1) as f64 / (2.0 * n as f64)) * pair;
            assert!((mean_energy_density(&s).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_mean_energy_near_limit() {
        let s = enumerate(&ctx(build_sine(20).unwrap(), 0.5), 1, false).unwrap();
        let limit = -0.5 / (1.0 + 2f64.sqrt());
        assert!((mean_energy_density(&s).unwrap() - limit).abs() < 0.05);
    }

    #[test]
    fn variance_matches_second_derivative_of_log_z() {
        for (matrix, beta) in [
            (build_sine(12).unwrap(), 0.6),
            (build_curie_weiss(12).unwrap(), 0.5),
        ] {
            let n = matrix.n() as f64;
            let c = ctx(matrix, beta);
            let s = enumerate(&c, 2, false).unwrap();
            let step = 1e-3;
            let second = (log_partition_at(&c, beta + step).unwrap() - 2.0 * s.log_z
                + log_partition_at(&c, beta - step).unwrap())
                / (step * step);
            let var = cumulants(&s, 2).unwrap().order(2);
            assert!(
                ((second / (n * n)) - var).abs() <= 1e-6 * var,
                "{} vs {var}",
                second / (n * n)
            );
        }
    }

    #[test]
    fn cumulant_recursion_on_known_distribution() {
        // Bernoulli(p) on {0, 1}: all raw moments equal p.
        let p: f64 = 0.3;
        let k = cumulants_from_moments(&[p; 4], 4).unwrap();
        assert!((k.order(2) - p * (1.0 - p)).abs() < 1e-15);
        assert!((k.order(3) - p * (1.0 - p) * (1.0 - 2.0 * p)).abs() < 1e-15);
        assert!((k.order(4) - p * (1.0 - p) * (1.0 - 6.0 * p * (1.0 - p))).abs() < 1e-15);
        assert!(matches!(
            cumulants_from_moments(&[p; 2], 3),
            Err(Error::InsufficientMoments {
                requested: 3,
                available: 2
            })
        ));
    }

    #[test]
    fn mgf_identity() {
        let c = ctx(build_curie_weiss(10).unwrap(), 0.5);
        let m = mgf_check(&c, 0.0).unwrap();
        assert_eq!((m.lhs, m.rhs), (1.0, 1.0));
        assert!(mgf_check(&c, 1.0).unwrap().discrepancy() <= 1e-10);
        let c = ctx(build_sine(12).unwrap(), 0.8);
        assert!(mgf_check(&c, -2.0).unwrap().discrepancy() <= 1e-10);
    }

    #[test]
    fn energy_ranges() {
        let r = energy_bounds_check(&ctx(build_curie_weiss(6).unwrap(), 0.0)).unwrap();
        assert!((r.min + 2.5).abs() < 1e-12 && (r.max - 0.5).abs() < 1e-12);
        let r = energy_bounds_check(&ctx(build_curie_weiss(2).unwrap(), 0.0)).unwrap();
        assert!((r.min + 0.5).abs() < 1e-12 && (r.max - 0.5).abs() < 1e-12);
        let r = energy_bounds_check(&ctx(build_sine(10).unwrap(), 0.0)).unwrap();
        assert!(r.min >= -5.0 - 1e-12 && r.max <= 5.0 + 1e-12);
    }

    #[test]
    fn gray_and_natural_orders_agree() {
        for beta in [0.3, 2.0] {
            let c = ctx(
                build_random_orthogonal(12, &[1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, 1], 5).unwrap(),
                beta,
            );
            let gray = log_partition_in_order(&c, EnumerationOrder::Gray).unwrap();
            let natural = log_partition_in_order(&c, EnumerationOrder::Natural).unwrap();
            let parallel = log_partition(&c).unwrap();
            assert!((gray - natural).abs() < 1e-10);
            assert!((parallel - natural).abs() < 1e-10);
            assert!(gray.is_finite());
        }
    }

    #[test]
    fn two_pass_and_streaming_agree() {
        // β·n = 60 selects the two-pass path; compare against the streaming
        // path evaluated just below the threshold and extrapolated via a
        // direct average.
        let matrix = build_sine(12).unwrap();
        let c = ctx(matrix, 5.0);
        let s = enumerate(&c, 2, true).unwrap();
        let mean = thermal_average(&c, |_, e| e / 12.0).unwrap();
        assert!((s.moments[0] - mean).abs() < 1e-12);
        assert!(
            (s.log_z - log_partition_in_order(&c, EnumerationOrder::Natural).unwrap()).abs()
                < 1e-10
        );
        let streaming = enumerate(&c.at_beta(4.0).unwrap(), 2, false).unwrap();
        let direct = thermal_average(&c.at_beta(4.0).unwrap(), |_, e| e / 12.0).unwrap();
        assert!((streaming.moments[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn large_beta_does_not_overflow() {
        let c = ctx(build_curie_weiss(16).unwrap(), 400.0);
        let s = enumerate(&c, 2, true).unwrap();
        // Two ground states at H = −(n−1)/2 dominate.
        assert!((s.log_z - (400.0 * 7.5 + 2f64.ln())).abs() < 1e-9);
        assert!((s.two_point.unwrap()[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shift_cancels_in_correlations() {
        let c = ctx(build_sine(8).unwrap(), 0.7);
        let a = enumerate(&c, 2, true).unwrap();
        let b = enumerate(&c.clone().with_shift(true), 2, true).unwrap();
        assert!((a.log_z - b.log_z - 0.35).abs() < 1e-12);
        assert!((b.moments[0] - a.moments[0] - 0.5 / 8.0).abs() < 1e-13);
        let diff = (a.two_point.as_ref().unwrap() - b.two_point.as_ref().unwrap())
            .abs()
            .max();
        assert!(diff < 1e-13);
        let ka = cumulants(&a, 2).unwrap();
        let kb = cumulants(&b, 2).unwrap();
        assert!((ka.order(2) - kb.order(2)).abs() < 1e-13);
    }

    #[test]
    fn capacity_errors() {
        let c = ctx(build_curie_weiss(25).unwrap(), 0.1);
        assert!(matches!(
            enumerate(&c, 1, true),
            Err(Error::Capacity { cap: 24, .. })
        ));
        let c = ctx(build_curie_weiss(31).unwrap(), 0.1);
        assert!(matches!(
            log_partition(&c),
            Err(Error::Capacity { cap: 30, .. })
        ));
        let c = ctx(build_curie_weiss(4).unwrap(), 0.1);
        assert!(matches!(enumerate(&c, 7, false), Err(Error::Domain { .. })));
        assert!(GibbsContext::new(build_curie_weiss(4).unwrap(), -0.1).is_err());
    }

    #[test]
    fn json_record() {
        let s = enumerate(&ctx(build_curie_weiss(3).unwrap(), 0.5), 2, true).unwrap();
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n"], 3);
        assert_eq!(v["model"], "curie_weiss");
        assert_eq!(v["two_point"].as_array().unwrap().len(), 9);
        assert_eq!(v["log_z"].as_f64().unwrap(), s.log_z);
        assert!(text.contains("\"beta\":0.5"));
    }
}
