mod common;

use common::{synthetic_set, tiny_unet};
use thoraxseg::archzoo::scores_from_tensor;
use thoraxseg::dataset::FoldSplit;
use thoraxseg::losses::{self, LossKind, LossSpec};
use thoraxseg::trainer::{batch_loss_and_grad, train, train_two_fold, Checkpoint, ClassMode, Trainer};
use thoraxseg::{Error, Segmenter, Structure, TrainConfig, TrainSample};

fn config(classes: usize) -> TrainConfig {
    let mut c = TrainConfig::new("tiny", tiny_unet(classes));
    c.epochs = 2;
    c.batch_size = 2;
    c.seed = 5;
    c
}

fn param_bits(t: &Trainer) -> Vec<(String, Vec<u32>)> {
    let store = t.model().params();
    store
        .names()
        .into_iter()
        .map(|n| {
            let v = store.get(&n).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
            (n, v.into_iter().map(f32::to_bits).collect())
        })
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_bit_equal() {
    let data = synthetic_set(2, 32);
    let mut t = Trainer::new(&config(3)).unwrap();
    t.set_learning_rate(0.0);
    let before = param_bits(&t);
    let batch: Vec<&TrainSample> = data.iter().collect();
    t.step(&batch).unwrap();
    assert_eq!(before, param_bits(&t));
}

#[test]
fn nonzero_learning_rate_moves_parameters() {
    let data = synthetic_set(2, 32);
    let mut t = Trainer::new(&config(3)).unwrap();
    let before = param_bits(&t);
    let batch: Vec<&TrainSample> = data.iter().collect();
    t.step(&batch).unwrap();
    assert_ne!(before, param_bits(&t));
}

#[test]
fn training_loss_matches_loss_module() {
    let data = synthetic_set(3, 32);
    for kind in [LossKind::Dsc, LossKind::Jsc, LossKind::Tversky, LossKind::Bce] {
        let mut cfg = config(3);
        cfg.loss = LossSpec::new(kind);
        let t = Trainer::new(&cfg).unwrap();
        let batch: Vec<&TrainSample> = data.iter().collect();
        let trained = t.batch_loss(&batch).unwrap();

        let inputs: Vec<_> = data.iter().map(|s| &s.input).collect();
        let x = thoraxseg::archzoo::inputs_to_tensor(&inputs, t.model().device()).unwrap();
        let y = t.model().forward_t(&x, true).unwrap();
        let scores = scores_from_tensor(&y, &inputs, &Structure::ALL).unwrap();
        let classes = thoraxseg::ClassSet::all();
        let expected: f64 = scores
            .iter()
            .zip(&data)
            .map(|(s, d)| losses::total_loss(s, &d.masks, &cfg.loss, &classes).unwrap())
            .sum::<f64>()
            / data.len() as f64;
        assert!((trained - expected).abs() < 1e-9, "{kind:?}: {trained} vs {expected}");

        let targets: Vec<_> = data.iter().map(|d| &d.masks).collect();
        let (l, g) = batch_loss_and_grad(&y, &targets, &cfg.loss, &classes).unwrap();
        assert_eq!(l, trained);
        assert_eq!(g.dims(), y.dims());
    }
}

#[test]
fn epochs_zero_is_config_error() {
    let mut c = config(3);
    c.epochs = 0;
    assert!(matches!(train(&c, &synthetic_set(2, 32)), Err(Error::Config(_))));
}

#[test]
fn empty_training_set_rejected() {
    assert!(train(&config(3), &[]).is_err());
}

#[test]
fn reruns_are_bit_identical() {
    let data = synthetic_set(3, 32);
    let c = config(3);
    let a = train(&c, &data).unwrap();
    let b = train(&c, &data).unwrap();
    assert_eq!(a.meta.loss_history.len(), 2);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.meta.loss_history), bits(&b.meta.loss_history));

    let mut other = c.clone();
    other.seed = 6;
    let d = train(&other, &data).unwrap();
    assert_ne!(bits(&a.meta.loss_history), bits(&d.meta.loss_history));
}

#[test]
fn loss_descends_on_a_healthy_run() {
    let data = synthetic_set(4, 32);
    let mut c = config(3);
    c.epochs = 25;
    c.lr = 1e-3;
    c.batch_size = 4;
    c.augment = None;
    let ckpt = train(&c, &data).unwrap();
    let h = &ckpt.meta.loss_history;
    assert!(h.iter().all(|v| v.is_finite()));
    assert!(h.last().unwrap() < h.first().unwrap(), "{h:?}");
}

#[test]
fn single_class_mode() {
    let mut c = config(1);
    c.class_mode = ClassMode::Single(Structure::Heart);
    c.epochs = 1;
    let data = synthetic_set(2, 32);
    let ckpt = train(&c, &data).unwrap();
    let scores = ckpt.model.predict(&data[0].input).unwrap();
    assert_eq!(scores.classes(), &[Structure::Heart]);
    assert_eq!(ckpt.model.classes(), &[Structure::Heart]);
}

#[test]
fn two_fold_partitions_and_round_trips() {
    let data = synthetic_set(5, 32);
    let ids: Vec<String> = data.iter().map(|s| s.case_id.clone()).collect();
    let split = FoldSplit {
        fold1: ids[..3].to_vec(),
        fold2: ids[3..].to_vec(),
    };
    let mut c = config(3);
    c.epochs = 1;
    let (a, b) = train_two_fold(&c, &split, &data).unwrap();
    assert_eq!(a.meta.train_fold(), 1);
    assert_eq!(b.meta.train_fold(), 2);
    assert_eq!(a.meta.train_case_ids, split.fold1);
    assert_eq!(b.meta.train_case_ids, split.fold2);
    let mut evaluated: Vec<String> = b.meta.train_case_ids.iter().chain(&a.meta.train_case_ids).cloned().collect();
    evaluated.sort();
    assert_eq!(evaluated, ids);

    let dir = tempfile::tempdir().unwrap();
    let run = Checkpoint::run_dir(dir.path(), "tiny", 1);
    assert!(run.ends_with("tiny/fold1"));
    a.save(&run).unwrap();
    let log = std::fs::read_to_string(run.join("train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,mean_loss,wall_time_s\n1,"));
    let back = Checkpoint::load(&run).unwrap();
    assert_eq!(back.meta, a.meta);
    let p = a.model.predict(&data[4].input).unwrap();
    let q = back.model.predict(&data[4].input).unwrap();
    assert_eq!(p, q);
}

#[test]
fn overlapping_folds_are_leakage() {
    let data = synthetic_set(4, 32);
    let ids: Vec<String> = data.iter().map(|s| s.case_id.clone()).collect();
    let split = FoldSplit {
        fold1: ids[..3].to_vec(),
        fold2: ids[2..].to_vec(),
    };
    let mut c = config(3);
    c.epochs = 1;
    assert!(matches!(train_two_fold(&c, &split, &data), Err(Error::FoldLeakage(_))));
}
