use ndarray::Array2;
use osr_core::beta_evidential::{beta_loss, dirichlet_binary_loss, LabelMatrix};
use osr_core::hsic::hsic;
use osr_core::metrics::{binary_curve_metrics, ScoredSet};
use osr_core::optimizer::{Averaging, RunningMean};
use osr_core::subjective_logic::comultiply;
use osr_core::{novelty_scores, EvidencePair, Opinion, OpinionParams};
use proptest::prelude::*;

fn evidence() -> impl Strategy<Value = f64> {
    1.0..100.0f64
}

fn evidence_pair(max_k: usize) -> impl Strategy<Value = EvidencePair> {
    (1..=max_k).prop_flat_map(|k| {
        (
            prop::collection::vec(evidence(), k),
            prop::collection::vec(evidence(), k),
        )
            .prop_map(|(a, b)| EvidencePair::new(a, b).unwrap())
    })
}

fn scored_set(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                // Coarse grid so that ties actually occur.
                prop::collection::vec((0..40i32).prop_map(|v| f64::from(v) / 8.0), n),
                prop::collection::vec(0..=1u8, n),
            )
        })
        .prop_filter("both classes present", |(_, t)| {
            t.contains(&0) && t.contains(&1)
        })
}

fn concordance(scores: &[f64], truths: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &ti) in truths.iter().enumerate() {
        for (j, &tj) in truths.iter().enumerate() {
            if ti == 1 && tj == 0 {
                pairs += 1.0;
                wins += match scores[i].total_cmp(&scores[j]) {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    wins / pairs
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #[test]
    fn additive_opinions_sum_to_one(alpha in evidence(), beta in evidence()) {
        let o = Opinion::from_evidence(alpha, beta, OpinionParams::additive()).unwrap();
        prop_assert!((o.belief + o.disbelief + o.uncertainty - 1.0).abs() < 1e-12);
        prop_assert!((o.expected_probability() - alpha / (alpha + beta)).abs() < 1e-12);
    }

    #[test]
    fn novelty_scores_lie_in_range(ev in evidence_pair(8)) {
        let s = novelty_scores(&ev, OpinionParams::default());
        // The open ends are reached only through floating-point saturation.
        prop_assert!((0.0..=1.0).contains(&s.pe));
        prop_assert!((0.0..=1.0).contains(&s.ne));
        if ev.beta().iter().sum::<f64>() - (ev.num_classes() as f64) < 30.0 {
            prop_assert!(s.ne < 1.0);
        }
        prop_assert!(s.pne > 0.0 && s.pne <= 1.0);
        prop_assert!((0.0..=1.0).contains(&s.belief));
    }

    #[test]
    fn evidence_moves_scores_monotonically(ev in evidence_pair(6), class in 0usize..6, extra in 0.0..50.0f64) {
        let class = class % ev.num_classes();
        let params = OpinionParams::default();
        let base = novelty_scores(&ev, params);

        let mut alpha = ev.alpha().to_vec();
        alpha[class] += extra;
        let more_alpha = novelty_scores(&EvidencePair::new(alpha, ev.beta().to_vec()).unwrap(), params);
        prop_assert!(more_alpha.pe <= base.pe);
        if extra > 0.0 && ev.alpha().iter().sum::<f64>() < 30.0 {
            prop_assert!(more_alpha.pe < base.pe);
        }
        prop_assert!(more_alpha.pne <= base.pne);
        prop_assert!(more_alpha.belief <= base.belief + 1e-15);

        let mut beta = ev.beta().to_vec();
        beta[class] += extra;
        let more_beta = novelty_scores(&EvidencePair::new(ev.alpha().to_vec(), beta).unwrap(), params);
        prop_assert!(more_beta.ne >= base.ne);
        if extra > 0.0 && ev.beta().iter().sum::<f64>() < 30.0 {
            prop_assert!(more_beta.ne > base.ne);
        }
        prop_assert!(more_beta.pne <= base.pne);
    }

    #[test]
    fn comultiplication_is_associative_and_commutative(a in 0.0..=1.0f64, b in 0.0..=1.0f64, c in 0.0..=1.0f64) {
        let left = comultiply(comultiply(a, b).unwrap(), c).unwrap();
        let right = comultiply(a, comultiply(b, c).unwrap()).unwrap();
        prop_assert!((left - right).abs() < 1e-15);
        prop_assert_eq!(comultiply(a, b).unwrap(), comultiply(b, a).unwrap());
        prop_assert!(comultiply(a, b).unwrap() >= a.max(b) - 1e-15);
    }

    #[test]
    fn single_class_loss_equals_binary_dirichlet(alpha in evidence(), beta in evidence(), y in 0..=1u8) {
        let labels = LabelMatrix::new(Array2::from_elem((1, 1), f64::from(y))).unwrap();
        let a = Array2::from_elem((1, 1), alpha);
        let b = Array2::from_elem((1, 1), beta);
        let loss = beta_loss(a.view(), b.view(), &labels).unwrap().total;
        prop_assert!((loss - dirichlet_binary_loss(alpha, beta, y).unwrap()).abs() < 1e-12);
        prop_assert!(loss >= 0.0);
    }

    #[test]
    fn loss_falls_as_correct_evidence_grows(alpha in evidence(), beta in evidence(), extra in 0.1..50.0f64) {
        let positive = LabelMatrix::new(Array2::ones((1, 1))).unwrap();
        let loss = |a: f64| beta_loss(Array2::from_elem((1, 1), a).view(), Array2::from_elem((1, 1), beta).view(), &positive).unwrap().total;
        prop_assert!(loss(alpha + extra) < loss(alpha));
    }

    #[test]
    fn hsic_is_symmetric_and_permutation_invariant(
        (z, x, perm) in (3usize..24).prop_flat_map(|n| (matrix(n, 2), matrix(n, 3), Just((0..n).collect::<Vec<_>>()).prop_shuffle()))
    ) {
        let forward = hsic(z.view(), x.view()).unwrap();
        prop_assert!(forward >= 0.0);
        prop_assert!((forward - hsic(x.view(), z.view()).unwrap()).abs() < 1e-12);
        let zp = z.select(ndarray::Axis(0), &perm);
        let xp = x.select(ndarray::Axis(0), &perm);
        prop_assert!((forward - hsic(zp.view(), xp.view()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auroc_is_the_concordance_probability((scores, truths) in scored_set(300)) {
        let m = binary_curve_metrics(&ScoredSet::new(scores.clone(), truths.clone()).unwrap());
        prop_assert!((m.auroc - concordance(&scores, &truths)).abs() < 1e-9);
        prop_assert!(m.detection_error >= 0.0 && m.detection_error <= 0.5 * 0.05 + 0.5);
        prop_assert!(m.operating_tpr >= 0.95);
    }

    #[test]
    fn curve_metrics_ignore_monotone_transforms_and_order(
        ((scores, truths), perm) in scored_set(120).prop_flat_map(|st| {
            let n = st.0.len();
            (Just(st), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let base = binary_curve_metrics(&ScoredSet::new(scores.clone(), truths.clone()).unwrap());
        let squashed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        let transformed = binary_curve_metrics(&ScoredSet::new(squashed, truths.clone()).unwrap());
        prop_assert!((base.auroc - transformed.auroc).abs() < 1e-12);
        prop_assert!((base.aupr - transformed.aupr).abs() < 1e-12);
        prop_assert_eq!(base.fpr_at_95tpr, transformed.fpr_at_95tpr);

        let shuffled = binary_curve_metrics(&ScoredSet::new(
            perm.iter().map(|&i| scores[i]).collect(),
            perm.iter().map(|&i| truths[i]).collect(),
        ).unwrap());
        prop_assert!((base.auroc - shuffled.auroc).abs() < 1e-12);
        prop_assert!((base.aupr - shuffled.aupr).abs() < 1e-12);
        prop_assert!((base.detection_error - shuffled.detection_error).abs() < 1e-12);
    }

    #[test]
    fn running_mean_matches_recomputation(rows in prop::collection::vec(prop::collection::vec(-1e3..1e3f64, 3), 1..200)) {
        let mut mean = RunningMean::new(3, Averaging::Proper, true);
        for r in &rows {
            mean.push(r);
        }
        let direct = mean.recompute().unwrap();
        for (a, b) in mean.mean().iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
