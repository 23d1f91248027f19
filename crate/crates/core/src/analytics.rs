//! Closed-form limits, finite-size free energies and decay fits.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{capacity, Error, Result};
use crate::gibbs::{enumerate, log_partition, GibbsContext, ENUMERATION_CAP};
use crate::interactions::{
    build_curie_weiss_with, CwCoupling, InteractionMatrix, MatrixKind, ModelSpec, SelfInteraction,
};

/// Slack allowed on the positive side of subadditivity.
pub const SUBADDITIVITY_TOLERANCE: f64 = 1e-12;
pub const MIN_FIT_POINTS: usize = 4;

fn check_high_temperature(what: &'static str, beta: f64) -> Result<()> {
    if beta.is_finite() && (0.0..1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Domain { what, value: beta })
    }
}

/// `−β/2 − ln √(1−β)`, the Curie-Weiss limit of `log Z_N − N ln 2`.
pub fn cw_free_energy_limit(beta: f64) -> Result<f64> {
    check_high_temperature("Curie-Weiss limit needs 0 <= beta < 1", beta)?;
    Ok(-beta / 2.0 - 0.5 * (-beta).ln_1p())
}

/// Partial sum `Σ_{k=2}^{K} β^k / (2k)` of the same limit.
pub fn cw_free_energy_series(beta: f64, k_max: usize) -> f64 {
    (2..=k_max)
        .map(|k| beta.powi(k as i32) / (2 * k) as f64)
        .sum()
}

/// Tail bound `β^{K+1} / (2(K+1)(1−β))` on the truncated series.
pub fn cw_series_tail_bound(beta: f64, k_max: usize) -> f64 {
    beta.powi(k_max as i32 + 1) / (2.0 * (k_max + 1) as f64 * (1.0 - beta))
}

/// `−ln √(1−β)`, the limit when the diagonal `J_ii = 1/N` is kept.
pub fn cw_self_interaction_limit(beta: f64) -> Result<f64> {
    check_high_temperature("Curie-Weiss limit needs 0 <= beta < 1", beta)?;
    Ok(-0.5 * (-beta).ln_1p())
}

/// Curie-Weiss couplings `1/N` with the diagonal kept, `H = −M²/(2N)`.
pub fn cw_with_self_interaction(n: usize) -> Result<InteractionMatrix> {
    if n < 2 {
        return Err(Error::InvalidSize {
            n,
            reason: "Curie-Weiss needs at least 2 spins",
        });
    }
    InteractionMatrix::custom(
        DMatrix::from_element(n, n, 1.0 / n as f64),
        SelfInteraction::KeepDiagonal,
    )
}

/// `G(β) = ¼ [√(1+4β²) − ln((1+√(1+4β²))/2) − 1]`.
pub fn om_free_energy_limit(beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::Domain {
            what: "orthogonal-model limit needs beta >= 0",
            value: beta,
        });
    }
    let root = (1.0 + 4.0 * beta * beta).sqrt();
    Ok(0.25 * (root - ((1.0 + root) / 2.0).ln() - 1.0))
}

/// `−G′(β) = −β / (1 + √(1+4β²))`.
pub fn om_mean_energy_limit(beta: f64) -> Result<f64> {
    check_high_temperature("orthogonal-model energy limit needs 0 <= beta < 1", beta)?;
    Ok(-beta / (1.0 + (1.0 + 4.0 * beta * beta).sqrt()))
}

/// Finite-size counterpart of the free-energy limits: `log Z_N − N ln 2`
/// for Curie-Weiss, `(log Z_N − N ln 2)/N` for every other family.
pub fn finite_size_free_energy(ctx: &GibbsContext) -> Result<f64> {
    Ok(free_energy_from_log_z(
        ctx.matrix().kind(),
        ctx.n(),
        log_partition(ctx)?,
    ))
}

/// [`finite_size_free_energy`] for an already computed `log Z_N`.
pub fn free_energy_from_log_z(kind: MatrixKind, n: usize, log_z: f64) -> f64 {
    let excess = log_z - n as f64 * std::f64::consts::LN_2;
    match kind {
        MatrixKind::CurieWeiss => excess,
        _ => excess / n as f64,
    }
}

/// The large-`N` value of [`finite_size_free_energy`] for `kind`, when the
/// closed form applies (`0 ≤ β < 1`, Curie-Weiss or orthogonal couplings).
pub fn free_energy_limit(kind: MatrixKind, beta: f64) -> Option<f64> {
    match kind {
        MatrixKind::CurieWeiss => cw_free_energy_limit(beta).ok(),
        MatrixKind::Sine | MatrixKind::RandomOrthogonal if (0.0..1.0).contains(&beta) => {
            om_free_energy_limit(beta).ok()
        }
        _ => None,
    }
}

/// `(log Z_N − N ln 2)/N` regardless of family.
pub fn free_energy_density_excess(ctx: &GibbsContext) -> Result<f64> {
    let n = ctx.n() as f64;
    Ok((log_partition(ctx)? - n * std::f64::consts::LN_2) / n)
}

/// Least-squares line through `(ln n, ln |value|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSeries {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingSeries {
    /// Number of points that entered the fit.
    pub fn n_points(&self) -> usize {
        self.points.iter().filter(|(_, v)| usable(*v)).count()
    }
}

fn usable(v: f64) -> bool {
    v.is_finite() && v != 0.0
}

pub fn fit_decay(points: &[(usize, f64)]) -> Result<ScalingSeries> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    if let Some(w) = ns.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Domain {
            what: "fit needs distinct sizes",
            value: w[0] as f64,
        });
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, v)| *n > 0 && usable(*v))
        .map(|&(n, v)| ((n as f64).ln(), v.abs().ln()))
        .collect();
    if xy.len() < MIN_FIT_POINTS {
        return Err(Error::NotEnoughPoints { got: xy.len() });
    }
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // A perfectly flat series has nothing to explain; call the fit exact.
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingSeries {
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubadditivityRow {
    pub beta: f64,
    pub n: usize,
    /// `(1/2n) log Z_{2n}`.
    pub doubled: f64,
    /// `(1/n) log Z_n`.
    pub single: f64,
}

impl SubadditivityRow {
    /// Positive values violate the inequality.
    pub fn difference(&self) -> f64 {
        self.doubled - self.single
    }

    pub fn holds(&self) -> bool {
        self.difference() <= SUBADDITIVITY_TOLERANCE
    }
}

/// Subadditivity rows for Curie-Weiss with couplings `1/N`.
pub fn subadditivity_report(betas: &[f64], ns: &[usize]) -> Result<Vec<SubadditivityRow>> {
    subadditivity_report_with(betas, ns, |n| build_curie_weiss_with(n, CwCoupling::OverN))
}

/// Rows in `(β, n)` grid order for any family built by `build`.
pub fn subadditivity_report_with<B>(
    betas: &[f64],
    ns: &[usize],
    build: B,
) -> Result<Vec<SubadditivityRow>>
where
    B: Fn(usize) -> Result<InteractionMatrix> + Sync,
{
    for &n in ns {
        capacity("subadditivity (doubled system)", 2 * n, ENUMERATION_CAP)?;
    }
    let grid: Vec<(f64, usize)> = betas
        .iter()
        .flat_map(|&b| ns.iter().map(move |&n| (b, n)))
        .collect();
    grid.par_iter()
        .map(|&(beta, n)| {
            let small = GibbsContext::new(build(n)?, beta)?;
            let large = GibbsContext::new(build(2 * n)?, beta)?;
            Ok(SubadditivityRow {
                beta,
                n,
                doubled: log_partition(&large)? / (2 * n) as f64,
                single: log_partition(&small)? / n as f64,
            })
        })
        .collect()
}

/// Largest violation over all configurations of `2N` spins of
/// `H_{2N} = (1/P_N) Σ_p (H_N^l(p) + H_N^r(p))`, where the average runs over
/// the splits of the indices into two halves of `N`, both sides use the
/// Curie-Weiss Hamiltonian `−Σ_{i<j} J σ_i σ_j` at their own size.
pub fn bipartition_identity_defect(n_half: usize, coupling: CwCoupling) -> Result<f64> {
    capacity("bipartition identity", 2 * n_half, 12)?;
    let full = build_curie_weiss_with(2 * n_half, coupling)?.get(0, 1);
    let half = build_curie_weiss_with(n_half, coupling)?.get(0, 1);
    let total = 2 * n_half;
    let pair_energy = |bits: u64, members: u64, j: f64| {
        let mut acc = 0.0;
        for a in 0..total {
            for b in (a + 1)..total {
                if members >> a & 1 == 1 && members >> b & 1 == 1 {
                    let s = if (bits >> a & 1) == (bits >> b & 1) {
                        1.0
                    } else {
                        -1.0
                    };
                    acc += j * s;
                }
            }
        }
        -acc
    };
    let all = (1u64 << total) - 1;
    let halves: Vec<u64> = (0..=all)
        .filter(|m| m.count_ones() as usize == n_half)
        .collect();
    let mut worst: f64 = 0.0;
    for bits in 0..=all {
        let lhs = pair_energy(bits, all, full);
        let avg = halves
            .iter()
            .map(|&l| pair_energy(bits, l, half) + pair_energy(bits, all & !l, half))
            .sum::<f64>()
            / halves.len() as f64;
        worst = worst.max((lhs - avg).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSeries {
    pub beta: f64,
    pub series: ScalingSeries,
}

/// `Var h_N` over `ns` for each β, with its decay fit.
pub fn variance_vanishing_report(
    model: &ModelSpec,
    betas: &[f64],
    ns: &[usize],
) -> Result<Vec<VarianceSeries>> {
    for &n in ns {
        capacity("variance series", n, ENUMERATION_CAP)?;
    }
    betas
        .iter()
        .map(|&beta| {
            let points = ns
                .iter()
                .map(|&n| {
                    let ctx = GibbsContext::new(model.build(n)?, beta)?;
                    let s = enumerate(&ctx, 2, false)?;
                    Ok((n, s.moments[1] - s.moments[0] * s.moments[0]))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(VarianceSeries {
                beta,
                series: fit_decay(&points)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::build_curie_weiss;

    #[test]
    fn curie_weiss_limit_values() {
        assert_eq!(cw_free_energy_limit(0.0).unwrap(), 0.0);
        assert!((cw_free_energy_limit(0.5).unwrap() - 0.09657359027997264).abs() < 1e-15);
        let closed = cw_free_energy_limit(0.9).unwrap();
        assert!((closed - cw_free_energy_series(0.9, 200)).abs() < 1e-10);
        assert!((closed - cw_free_energy_series(0.9, 200)).abs() <= cw_series_tail_bound(0.9, 200));
        assert!(matches!(
            cw_free_energy_limit(1.0),
            Err(Error::Domain { .. })
        ));
        assert!(cw_free_energy_limit(-0.1).is_err());
        for beta in [0.1, 0.4, 0.7] {
            let d = cw_self_interaction_limit(beta).unwrap() - cw_free_energy_limit(beta).unwrap();
            assert!((d - beta / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn orthogonal_limit_values() {
        assert_eq!(om_free_energy_limit(0.0).unwrap(), 0.0);
        let g = om_free_energy_limit(0.5).unwrap();
        let r2 = 2f64.sqrt();
        assert!((g - 0.25 * (r2 - ((1.0 + r2) / 2.0).ln() - 1.0)).abs() < 1e-16);
        assert!((g - 0.0564967889783744).abs() < 1e-15);
        assert!((om_free_energy_limit(0.1).unwrap() - 0.0025).abs() < 5e-5);
        assert!(om_free_energy_limit(-1.0).is_err());
        assert_eq!(om_mean_energy_limit(0.0).unwrap(), 0.0);
        assert!((om_mean_energy_limit(0.5).unwrap() + 0.20710678118654752).abs() < 1e-15);
        let eps = 1e-5;
        let deriv = (om_free_energy_limit(0.3 + eps).unwrap()
            - om_free_energy_limit(0.3 - eps).unwrap())
            / (2.0 * eps);
        assert!((om_mean_energy_limit(0.3).unwrap() + deriv).abs() <= 1e-8);
    }

    #[test]
    fn fit_recovers_power_laws() {
        let ns = [8usize, 12, 16, 20];
        for alpha in [-0.5, -1.0, -2.0] {
            let pts: Vec<_> = ns
                .iter()
                .map(|&n| (n, 3.0 * (n as f64).powf(alpha)))
                .collect();
            let fit = fit_decay(&pts).unwrap();
            assert!((fit.slope - alpha).abs() < 1e-9);
            assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
            assert!((fit.r_squared - 1.0).abs() < 1e-12);
        }
        let fit = fit_decay(&ns.iter().map(|&n| (n, 1.0 / n as f64)).collect::<Vec<_>>()).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-10);
        let flat = fit_decay(&ns.iter().map(|&n| (n, 0.37)).collect::<Vec<_>>()).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        // Signs are ignored, exact zeros are skipped.
        let mixed = [
            (8, -0.125),
            (10, 0.0),
            (12, 1.0 / 12.0),
            (16, -0.0625),
            (20, 0.05),
        ];
        let fit = fit_decay(&mixed).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-10);
        assert_eq!(fit.n_points(), 4);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(
            fit_decay(&[(4, 1.0), (5, 2.0), (6, 0.0), (7, 1.0)]),
            Err(Error::NotEnoughPoints { got: 3 })
        ));
        assert!(fit_decay(&[(4, 1.0), (4, 2.0), (6, 1.0), (7, 1.0)]).is_err());
    }

    #[test]
    fn subadditivity_at_infinite_temperature() {
        for row in subadditivity_report(&[0.0], &[3, 5]).unwrap() {
            assert!((row.doubled - std::f64::consts::LN_2).abs() < 1e-15);
            assert!(row.difference().abs() < 1e-15);
        }
    }

    #[test]
    fn subadditivity_moderate_temperature() {
        let rows = subadditivity_report(&[0.5], &[8]).unwrap();
        assert!(rows[0].holds(), "{:?}", rows[0]);
        let rows = subadditivity_report_with(&[0.5, 2.0], &[3, 4, 6], |n| {
            build_curie_weiss_with(n, CwCoupling::OverNMinusOne)
        })
        .unwrap();
        assert!(rows.iter().all(SubadditivityRow::holds), "{rows:?}");
        assert!(subadditivity_report(&[0.5], &[16]).is_err());
    }

    #[test]
    fn bipartition_identity_under_both_couplings() {
        for half in [2, 3] {
            assert!(bipartition_identity_defect(half, CwCoupling::OverNMinusOne).unwrap() < 1e-12);
            assert!(bipartition_identity_defect(half, CwCoupling::OverN).unwrap() > 1e-3);
        }
    }

    #[test]
    fn self_interaction_shifts_log_z_by_half_beta() {
        for n in [6, 11] {
            for beta in [0.3, 0.8] {
                let plain =
                    log_partition(&GibbsContext::new(build_curie_weiss(n).unwrap(), beta).unwrap())
                        .unwrap();
                let diag = log_partition(
                    &GibbsContext::new(cw_with_self_interaction(n).unwrap(), beta).unwrap(),
                )
                .unwrap();
                assert!((diag - plain - beta / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_temperature_variance_matches_pair_counting() {
        // Under the product measure the pair products σ_iσ_j (i<j) are
        // pairwise uncorrelated with unit variance, so Var h = C(n,2)/n⁴
        // for couplings 1/n.
        let report =
            variance_vanishing_report(&ModelSpec::CurieWeiss, &[0.0], &[4, 5, 6, 7]).unwrap();
        for &(n, v) in &report[0].series.points {
            let nf = n as f64;
            assert!((v - nf * (nf - 1.0) / 2.0 / nf.powi(4)).abs() < 1e-12);
        }
        assert!(report[0].series.points.iter().all(|p| p.1 >= 0.0));
    }

    #[test]
    fn curie_weiss_free_energy_increases_to_its_limit() {
        for beta in [0.2, 0.5, 0.8] {
            let values: Vec<f64> = [8, 12, 16, 20]
                .iter()
                .map(|&n| {
                    finite_size_free_energy(
                        &GibbsContext::new(build_curie_weiss(n).unwrap(), beta).unwrap(),
                    )
                    .unwrap()
                })
                .collect();
            assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
            assert!(values[3] < cw_free_energy_limit(beta).unwrap());
        }
    }

    #[test]
    fn sine_free_energy_approaches_limit() {
        let g = |n| {
            finite_size_free_energy(
                &GibbsContext::new(crate::interactions::build_sine(n).unwrap(), 0.5).unwrap(),
            )
            .unwrap()
        };
        let limit = om_free_energy_limit(0.5).unwrap();
        assert!((g(20) - limit).abs() < (g(10) - limit).abs());
    }

    #[test]
    fn sine_mean_energy_moves_towards_limit() {
        let mean = |n| {
            let ctx = GibbsContext::new(crate::interactions::build_sine(n).unwrap(), 0.5).unwrap();
            crate::gibbs::mean_energy_density(&enumerate(&ctx, 1, false).unwrap()).unwrap()
        };
        let limit = om_mean_energy_limit(0.5).unwrap();
        assert!((mean(20) - limit).abs() < (mean(10) - limit).abs());
    }
}
