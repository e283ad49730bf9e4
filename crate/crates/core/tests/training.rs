mod common;

use std::collections::BTreeSet;

use common::bilinear;
use ndarray::Array2;
use transda::datamodel::{synth_blobs, SynthConfig};
use transda::features::ArchKind;
use transda::metric::{self, MetricMatrix};
use transda::trainer::{self, adagrad_step, TrainConfig};
use transda::{Checkpoint, SourceDataset, TargetDataset};

fn small_data(per_class: usize, seed: u64) -> (SourceDataset, TargetDataset) {
    synth_blobs(&SynthConfig {
        per_class,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        max_iters: 30,
        learning_rate: 0.01,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_iterations_returns_the_initial_checkpoint() {
    let (s, t) = small_data(20, 1);
    let cfg = TrainConfig {
        max_iters: 0,
        ..quick_config()
    };
    let (ckpt, report) = trainer::train(&s, &t, &cfg).unwrap();
    assert_eq!(ckpt, Checkpoint::initial(cfg, s.dim()).unwrap());
    assert_eq!(ckpt.iteration, 0);
    assert!(report.records.is_empty());
    assert!(report.final_accuracy.is_some());
}

#[test]
fn identical_runs_are_bit_identical() {
    let (s, t) = small_data(20, 2);
    for arch in [ArchKind::Precomputed, ArchKind::Linear, ArchKind::Mlp1] {
        let cfg = TrainConfig {
            arch,
            d_out: 3,
            d_hidden: 4,
            ..quick_config()
        };
        let (a, ra) = trainer::train(&s, &t, &cfg).unwrap();
        let (b, rb) = trainer::train(&s, &t, &cfg).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        assert_eq!(ra, rb);
        let round = Checkpoint::from_bytes(&a.to_bytes().unwrap()).unwrap();
        assert_eq!(round, a);
    }
}

#[test]
fn different_seeds_differ() {
    let (s, t) = small_data(20, 2);
    let a = trainer::train(&s, &t, &quick_config()).unwrap().0;
    let b = trainer::train(&s, &t, &TrainConfig { seed: 9, ..quick_config() }).unwrap().0;
    assert_ne!(a.features.params(), b.features.params());
}

#[test]
fn frozen_features_leave_theta_untouched() {
    let (s, t) = small_data(20, 3);
    for arch in [ArchKind::Linear, ArchKind::Mlp1] {
        let cfg = TrainConfig {
            arch,
            feature_learning: false,
            ..quick_config()
        };
        let init = Checkpoint::initial(cfg.clone(), s.dim()).unwrap();
        let (ckpt, _) = trainer::train(&s, &t, &cfg).unwrap();
        assert_eq!(ckpt.features.params(), init.features.params());
        assert!(ckpt.optimizer.theta.iter().all(|&a| a == 0.0));
        assert_ne!(ckpt.metric, init.metric);
    }
}

#[test]
fn no_propagation_means_nn_energy() {
    let (s, t) = small_data(20, 4);
    let cfg = TrainConfig {
        label_propagation: false,
        ..quick_config()
    };
    let (_, report) = trainer::train(&s, &t, &cfg).unwrap();
    assert_eq!(report.records.len(), cfg.max_iters);
    for r in &report.records {
        assert_eq!(r.energy, r.nn_energy);
    }
}

#[test]
fn propagated_energy_is_never_worse() {
    let (s, t) = small_data(20, 5);
    let (_, report) = trainer::train(&s, &t, &quick_config()).unwrap();
    for r in &report.records {
        assert!(r.energy <= r.nn_energy, "iteration {}", r.iteration);
    }
}

#[test]
fn skip_rule_and_gradient_from_trace() {
    let (s, t) = small_data(20, 6);
    let cfg = TrainConfig {
        arch: ArchKind::Precomputed,
        lambda_w: 0.0,
        max_iters: 20,
        ..quick_config()
    };
    let mut seen = 0;
    let (_, report) = trainer::train_observed(&s, &t, &cfg, |tr| {
        let b = cfg.batch_size;
        let present: BTreeSet<usize> = tr.transduced.labels.iter().copied().collect();

        // every batch source is either skipped or anchors exactly one triplet
        let mut anchors: Vec<usize> = tr.triplets.iter().map(|t| t.source).collect();
        anchors.extend_from_slice(tr.skipped);
        anchors.sort_unstable();
        assert_eq!(anchors, (0..b).collect::<Vec<_>>());
        for &i in tr.skipped {
            let y = tr.source_labels[i];
            assert!(!present.contains(&y) || present.iter().all(|&c| c == y));
        }
        for trip in tr.triplets {
            let y = tr.source_labels[trip.source];
            assert_eq!(tr.transduced.labels[trip.positive], y);
            assert_ne!(tr.transduced.labels[trip.negative], y);
        }

        // W is the identity before the first update
        if tr.iteration == 0 {
            let d = tr.source_features.ncols();
            let eye: Vec<f64> = MetricMatrix::identity(d).entries().to_vec();
            for trip in tr.triplets {
                let sf = tr.source_features.row(trip.source).to_vec();
                let y = tr.source_labels[trip.source];
                let scores: Vec<f64> = tr
                    .target_features
                    .rows()
                    .into_iter()
                    .map(|r| bilinear(&eye, d, &sf, &r.to_vec()))
                    .collect();
                let best = |same: bool| {
                    (0..scores.len())
                        .filter(|&j| (tr.transduced.labels[j] == y) == same)
                        .map(|j| scores[j])
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                assert_eq!(scores[trip.positive], best(true));
                assert_eq!(scores[trip.negative], best(false));
            }
        }

        // λ_W = 0: the W gradient is the sum over active triplets only
        let d = tr.source_features.ncols();
        let mut g = Array2::<f64>::zeros((d, d));
        for trip in tr.triplets.iter().filter(|t| t.is_active()) {
            let sf = tr.source_features.row(trip.source);
            let pos = tr.target_features.row(trip.positive);
            let neg = tr.target_features.row(trip.negative);
            for a in 0..d {
                for c in 0..d {
                    g[(a, c)] += sf[a] * (neg[c] - pos[c]);
                }
            }
        }
        let diff = (&g - tr.grad_w).mapv(f64::abs).iter().fold(0.0f64, |m, &v| m.max(v));
        assert!(diff < 1e-9, "grad mismatch {diff}");
        assert!(tr.grad_theta.is_empty());
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, report.records.len());
    for r in &report.records {
        assert!(r.active_triplets + r.skipped_sources <= cfg.batch_size);
    }
}

#[test]
fn accumulators_never_decrease() {
    let (s, t) = small_data(20, 7);
    let mut prev: Option<Checkpoint> = None;
    for iters in 1..=5 {
        let cfg = TrainConfig {
            max_iters: iters,
            arch: ArchKind::Mlp1,
            d_out: 3,
            d_hidden: 4,
            ..quick_config()
        };
        let (ckpt, _) = trainer::train(&s, &t, &cfg).unwrap();
        assert_eq!(ckpt.iteration, iters as u64);
        if let Some(p) = &prev {
            for (a, b) in p.optimizer.w.iter().zip(&ckpt.optimizer.w) {
                assert!(b >= a);
            }
            for (a, b) in p.optimizer.theta.iter().zip(&ckpt.optimizer.theta) {
                assert!(b >= a);
            }
        }
        assert!(ckpt.optimizer.w.iter().chain(&ckpt.optimizer.theta).all(|&a| a >= 0.0));
        prev = Some(ckpt);
    }
}

#[test]
fn small_step_lowers_the_batch_loss() {
    let (s, t) = small_data(20, 8);
    let cfg = TrainConfig {
        arch: ArchKind::Precomputed,
        learning_rate: 1e-6,
        max_iters: 1,
        // similarities are in the tens here; a wide margin keeps hinges active
        margin: 50.0,
        ..quick_config()
    };
    let mut captured = None;
    let (ckpt, _) = trainer::train_observed(&s, &t, &cfg, |tr| {
        captured = Some((tr.triplets.to_vec(), tr.source_features.clone(), tr.target_features.clone()));
    })
    .unwrap();
    let (triplets, sf, tf) = captured.unwrap();
    let active: Vec<_> = triplets.iter().copied().filter(|t| t.is_active()).collect();
    assert!(!active.is_empty(), "fixture should produce active triplets");

    let before = MetricMatrix::identity(sf.ncols());
    let l0 = metric::triplet_loss(&before, &active, &sf, &tf, cfg.margin, cfg.lambda_w).unwrap();
    let l1 = metric::triplet_loss(&ckpt.metric, &active, &sf, &tf, cfg.margin, cfg.lambda_w).unwrap();
    assert!(l1 < l0, "{l1} !< {l0}");
}

#[test]
fn one_step_on_one_triplet_lowers_its_hinge() {
    let sf = Array2::from_shape_vec((1, 2), vec![1.0, 0.5]).unwrap();
    let tf = Array2::from_shape_vec((2, 2), vec![0.2, 1.0, 1.0, 0.1]).unwrap();
    let mut w = MetricMatrix::identity(2);
    let trip = metric::select_triplet(&w, 0, 0, &[1.0, 0.5], &tf, &[0, 1], 0.5).unwrap().unwrap();
    assert!(trip.is_active());
    let h0 = metric::triplet_loss(&w, &[trip], &sf, &tf, 0.5, 0.0).unwrap();
    let g = metric::grad_w(&w, &[trip], &sf, &tf, 0.5, 0.0).unwrap();
    let mut acc = vec![0.0; 4];
    adagrad_step(w.entries_mut(), g.as_slice().unwrap(), &mut acc, 1e-6, 1e-8).unwrap();
    let h1 = metric::triplet_loss(&w, &[trip], &sf, &tf, 0.5, 0.0).unwrap();
    assert!(h1 < h0);
}

#[test]
fn oversized_batch_warns_and_samples_with_replacement() {
    let (s, t) = small_data(5, 9);
    let cfg = TrainConfig {
        batch_size: 32,
        max_iters: 3,
        ..quick_config()
    };
    let (_, report) = trainer::train(&s, &t, &cfg).unwrap();
    assert_eq!(report.warnings.len(), 2);
    assert!(report.warnings.iter().all(|w| w.contains("exceeds")));
    assert_eq!(report.records.len(), 3);
}

#[test]
fn evaluation_needs_ground_truth() {
    let (s, t) = small_data(10, 10);
    let cfg = TrainConfig {
        max_iters: 0,
        ..quick_config()
    };
    let ckpt = Checkpoint::initial(cfg.clone(), 2).unwrap();
    assert!(trainer::evaluate(&ckpt, &s, &t.unlabeled(), trainer::EvalMode::Nn).is_err());
    let (_, report) = trainer::train(&s, &t.unlabeled(), &cfg).unwrap();
    assert_eq!(report.final_accuracy, None);
}

#[test]
fn mismatched_dimensions_rejected() {
    let (s, _) = small_data(10, 11);
    let t = TargetDataset::new(Array2::zeros((5, 3))).unwrap();
    assert!(trainer::train(&s, &t, &quick_config()).is_err());
}
