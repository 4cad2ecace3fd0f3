use polytrinity_core::polygen::{ConeLabels, PolymerRecord, Provenance};
use polytrinity_core::rng::rng_from_seed;
use polytrinity_core::twophase::{
    loss_and_gradient, loss_value, run_splits, train, Activation, Head, Loss, MlpModel, Target,
    TrainConfig, TwoPhaseConfig,
};
use proptest::prelude::*;
use rand::Rng as _;

fn data(n: usize, d: usize, head: Head, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys = xs
        .iter()
        .map(|x| {
            let s: f64 = x.iter().sum();
            match head {
                Head::Identity => 2.0 + s.sin(),
                Head::Sigmoid => f64::from(u8::from(s > 0.0)),
            }
        })
        .collect();
    (xs, ys)
}

fn gradient_mismatch(sizes: &[usize], act: Activation, head: Head, loss: Loss, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut model = MlpModel::new(sizes, act, head, 1.0, &mut rng).unwrap();
    // nonzero biases so every parameter is exercised
    let mut p = model.params_flat();
    for v in &mut p {
        *v += rng.gen_range(-0.1..0.1);
    }
    model.set_params_flat(&p).unwrap();
    let (xs, ys) = data(7, sizes[0], head, seed + 1);
    let (_, g) = loss_and_gradient(&model, &xs, &ys, loss).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] = p[i] + h;
        let mut m = model.clone();
        m.set_params_flat(&q).unwrap();
        let up = loss_value(&m, &xs, &ys, loss).unwrap();
        q[i] = p[i] - h;
        m.set_params_flat(&q).unwrap();
        let down = loss_value(&m, &xs, &ys, loss).unwrap();
        let fd = (up - down) / (2.0 * h);
        let err = (g[i] - fd).abs() / (g[i].abs() + fd.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn analytic_gradients_match_central_differences() {
    let cases = [
        (
            vec![3, 5, 1],
            Activation::Tanh,
            Head::Identity,
            Loss::RelativeMse,
        ),
        (
            vec![4, 6, 3, 1],
            Activation::Tanh,
            Head::Identity,
            Loss::RelativeMseSum,
        ),
        (vec![2, 4, 1], Activation::Tanh, Head::Sigmoid, Loss::Bce),
        (
            vec![5, 3, 1],
            Activation::Relu,
            Head::Identity,
            Loss::RelativeMse,
        ),
    ];
    for (k, (sizes, act, head, loss)) in cases.into_iter().enumerate() {
        for seed in 0..5 {
            let e = gradient_mismatch(&sizes, act, head, loss, 100 * k as u64 + seed);
            assert!(e <= 1e-5, "{sizes:?} {act:?} {loss:?} seed {seed}: {e}");
        }
    }
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        hidden: vec![8],
        batch_size: 4,
        learning_rate: 1e-2,
        seed: 3,
        ..Default::default()
    }
}

#[test]
fn zero_epochs_is_a_no_op() {
    let (xs, ys) = data(20, 3, Head::Identity, 1);
    let init = MlpModel::new(
        &[3, 8, 1],
        Activation::Tanh,
        Head::Identity,
        1.0,
        &mut rng_from_seed(2),
    )
    .unwrap();
    let (m, rep) = train(&init, &xs, &ys, None, &small_cfg(0), Loss::RelativeMse).unwrap();
    let bits = |m: &MlpModel| {
        m.params_flat()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&m), bits(&init));
    assert_eq!(rep.best_epoch, 0);
}

fn labeled_records(n: usize) -> Vec<PolymerRecord> {
    let mut rng = rng_from_seed(8);
    (0..n)
        .map(|i| {
            let smiles = format!("*{}O*", "C".repeat(i + 1));
            let mut r = PolymerRecord::new(smiles, Provenance::Experimental);
            r.labels = Some(ConeLabels {
                t_ig: rng.gen_range(20.0..300.0),
                phrr: rng.gen_range(100.0..1500.0),
                ignitable: true,
            });
            r
        })
        .collect()
}

#[test]
fn zero_epoch_finetune_returns_the_pretrained_model() {
    let recs = labeled_records(20);
    let cfg = TwoPhaseConfig {
        phase2: small_cfg(0),
        fingerprint_bits: 64,
        ..Default::default()
    };
    let init = MlpModel::new(
        &[64, 8, 1],
        Activation::Tanh,
        Head::Identity,
        1.0,
        &mut rng_from_seed(5),
    )
    .unwrap();
    let out = run_splits(&recs, Target::TIg, Some(&init), &cfg).unwrap();
    assert_eq!(out.best_model, init);
    assert_eq!(out.rows.len(), cfg.phase2.n_splits);
}

#[test]
fn fixed_seed_training_is_bitwise_reproducible() {
    let recs = labeled_records(24);
    let cfg = TwoPhaseConfig {
        phase2: small_cfg(20),
        fingerprint_bits: 64,
        ..Default::default()
    };
    let a = run_splits(&recs, Target::Phrr, None, &cfg).unwrap();
    let b = run_splits(&recs, Target::Phrr, None, &cfg).unwrap();
    assert_eq!(a.mean_test.to_bits(), b.mean_test.to_bits());
    let bits = |m: &MlpModel| {
        m.params_flat()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a.best_model), bits(&b.best_model));
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.test_rel_mse.to_bits(), y.test_rel_mse.to_bits());
    }
    let c = run_splits(
        &recs,
        Target::Phrr,
        None,
        &TwoPhaseConfig {
            phase2: TrainConfig {
                seed: 4,
                ..small_cfg(20)
            },
            ..cfg
        },
    )
    .unwrap();
    assert_ne!(bits(&a.best_model), bits(&c.best_model));
}

#[test]
fn training_never_ends_worse_than_it_started() {
    let (xs, ys) = data(40, 3, Head::Identity, 4);
    let mut init = MlpModel::new(
        &[3, 8, 1],
        Activation::Tanh,
        Head::Identity,
        1.0,
        &mut rng_from_seed(6),
    )
    .unwrap();
    init.fit_output_affine(&ys);
    let before = loss_value(&init, &xs, &ys, Loss::RelativeMse).unwrap();
    let (m, rep) = train(&init, &xs, &ys, None, &small_cfg(50), Loss::RelativeMse).unwrap();
    let after = loss_value(&m, &xs, &ys, Loss::RelativeMse).unwrap();
    assert!(after <= before);
    assert!(rep.best_loss <= before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_tanh_networks_pass_the_gradient_check(d in 1usize..5, h in 1usize..6, seed in any::<u64>()) {
        let e = gradient_mismatch(&[d, h, 1], Activation::Tanh, Head::Identity, Loss::RelativeMse, seed);
        prop_assert!(e <= 1e-5, "{}", e);
    }
}
