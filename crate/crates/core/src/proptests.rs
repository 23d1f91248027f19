use nalgebra::DMatrix;
use proptest::prelude::*;

use crate::analytics::fit_decay;
use crate::correlations::{accumulate_higher_moments, factorization_gap, GapMethod};
use crate::format::g17;
use crate::gibbs::{
    cumulants_from_moments, energy, log_partition, log_partition_in_order, EnumerationOrder,
};
use crate::interactions::build_random_orthogonal;
use crate::montecarlo::{Estimate, Method};
use crate::report::{read_csv, write_csv, ResultRow};
use crate::{GibbsContext, InteractionMatrix, SelfInteraction, SpinConfiguration};

fn symmetric(n: usize, upper: &[f64], keep_diagonal: bool) -> InteractionMatrix {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let v = if i == j && !keep_diagonal {
                0.0
            } else {
                upper[k]
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    let mode = if keep_diagonal {
        SelfInteraction::KeepDiagonal
    } else {
        SelfInteraction::ZeroDiagonal
    };
    InteractionMatrix::custom(m, mode).unwrap()
}

fn matrix_strategy() -> impl Strategy<Value = InteractionMatrix> {
    (2usize..=8, any::<bool>())
        .prop_flat_map(|(n, keep)| {
            (
                Just(n),
                Just(keep),
                prop::collection::vec(-1.0f64..1.0, n * (n + 1) / 2),
            )
        })
        .prop_map(|(n, keep, upper)| symmetric(n, &upper, keep))
}

fn brute_log_z(ctx: &GibbsContext) -> f64 {
    let n = ctx.n();
    let logs: Vec<f64> = (0..1u64 << n)
        .map(|b| -ctx.beta() * energy(ctx, &SpinConfiguration::from_index(n, b).unwrap()).unwrap())
        .collect();
    let max = logs.iter().cloned().fold(f64::MIN, f64::max);
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_partition_matches_brute_force(matrix in matrix_strategy(), beta in 0.0f64..3.0) {
        let ctx = GibbsContext::new(matrix, beta).unwrap();
        let fast = log_partition(&ctx).unwrap();
        let natural = log_partition_in_order(&ctx, EnumerationOrder::Natural).unwrap();
        let brute = brute_log_z(&ctx);
        prop_assert!((fast - brute).abs() <= 1e-10 * brute.abs().max(1.0));
        prop_assert!((fast - natural).abs() <= 1e-10 * brute.abs().max(1.0));
    }

    #[test]
    fn orthogonal_energies_stay_within_half_n(seed in any::<u64>(), n in 2usize..=12, bits in any::<u64>()) {
        let signs: Vec<i8> = (0..n).map(|i| if (seed >> i) & 1 == 1 { 1 } else { -1 }).collect();
        let j = build_random_orthogonal(n, &signs, seed).unwrap();
        let ctx = GibbsContext::new(j, 1.0).unwrap();
        let e = energy(&ctx, &SpinConfiguration::from_index(n, bits).unwrap()).unwrap();
        prop_assert!(e.abs() <= n as f64 / 2.0 + 1e-9);
    }

    #[test]
    fn correlations_bounded_and_reduced(matrix in matrix_strategy(), beta in 0.0f64..2.0, idx in prop::collection::vec(0usize..8, 4)) {
        let n = matrix.n();
        let acc = accumulate_higher_moments(&GibbsContext::new(matrix, beta).unwrap(), 4).unwrap();
        let t: Vec<usize> = idx.iter().map(|i| i % n).collect();
        let v = acc.expectation(&t).unwrap();
        prop_assert!(v.abs() <= 1.0 + 1e-12);
        // Repeating an index twice deletes it.
        prop_assert!((acc.expectation(&[t[2], t[3], t[0], t[0]]).unwrap() - acc.expectation(&[t[2], t[3]]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gap_routes_agree_for_arbitrary_couplings(matrix in matrix_strategy(), beta in 0.0f64..1.5) {
        let ctx = GibbsContext::new(matrix, beta).unwrap();
        let a = factorization_gap(&ctx, GapMethod::Oracle).unwrap();
        let b = factorization_gap(&ctx, GapMethod::Contraction).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn cumulants_beyond_first_are_shift_invariant(xs in prop::collection::vec(-2.0f64..2.0, 3..12), c in -3.0f64..3.0) {
        let moments = |shift: f64| -> Vec<f64> {
            (1..=4).map(|k| xs.iter().map(|x| (x + shift).powi(k)).sum::<f64>() / xs.len() as f64).collect()
        };
        let a = cumulants_from_moments(&moments(0.0), 4).unwrap();
        let b = cumulants_from_moments(&moments(c), 4).unwrap();
        prop_assert!((b.order(1) - a.order(1) - c).abs() < 1e-9);
        for k in 2..=4 {
            prop_assert!((b.order(k) - a.order(k)).abs() < 1e-8);
        }
        prop_assert!(a.order(2) >= -1e-12);
    }

    #[test]
    fn fit_recovers_planted_exponent(alpha in -3.0f64..0.5, scale in 1e-3f64..1e3, start in 2usize..20) {
        let pts: Vec<(usize, f64)> = (0..6).map(|k| {
            let n = start + 3 * k;
            (n, scale * (n as f64).powf(alpha))
        }).collect();
        let fit = fit_decay(&pts).unwrap();
        prop_assert!((fit.slope - alpha).abs() < 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() < 1e-8);
    }

    #[test]
    fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn spin_index_round_trip(n in 1usize..=64, bits in any::<u64>(), k in 0usize..64) {
        let mut s = SpinConfiguration::from_index(n, bits).unwrap();
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        prop_assert_eq!(s.index(), bits & mask);
        let before = s.clone();
        s.flip(k % n);
        prop_assert_ne!(&s, &before);
        s.flip(k % n);
        prop_assert_eq!(s, before);
    }

    #[test]
    fn csv_rows_round_trip(value in any::<f64>().prop_filter("finite", |x| x.is_finite()), se in 0.0f64..1.0, beta in 0.0f64..5.0, n in 1usize..200) {
        let rows = vec![
            ResultRow::exact("sine", beta, n, "log_z", value),
            ResultRow::from_estimate("curie_weiss", beta, n, "h_mean", &Estimate { value, std_error: se, n_samples: 10, method: Method::MC }),
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }
}
