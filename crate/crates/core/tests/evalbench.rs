mod common;

use std::collections::BTreeMap;

use common::{synthetic_set, tiny_unet};
use thoraxseg::evalbench::{
    aggregate, emit_report, evaluate, evaluate_cases, overlay_classes, render_overlay, EvalCase, EvalOptions, Layout,
    OverlayClass, Provenance, ReportRow,
};
use thoraxseg::trainer::train;
use thoraxseg::{Error, Grid, Mask, MaskSet, ModelInput, Radiograph, ScoreMaps, Segmenter, Structure, TrainConfig};

/// Predicts the stored masks, optionally blanking one structure.
struct Fixed {
    masks: BTreeMap<String, MaskSet>,
    blank: Option<Structure>,
}

impl Segmenter for Fixed {
    fn classes(&self) -> &[Structure] {
        &Structure::ALL
    }

    fn predict(&self, input: &ModelInput) -> thoraxseg::Result<ScoreMaps> {
        let m = &self.masks[&input.case_id];
        let maps = Structure::ALL
            .iter()
            .map(|&s| {
                let g = m.get(s).unwrap().to_f32();
                if Some(s) == self.blank {
                    g.map(|_| 0.0)
                } else {
                    g
                }
            })
            .collect();
        ScoreMaps::new(input.case_id.clone(), Structure::ALL.to_vec(), maps)
    }
}

fn cases(n: usize) -> Vec<EvalCase> {
    synthetic_set(n, 64).into_iter().map(Into::into).collect()
}

fn oracle(cases: &[EvalCase], blank: Option<Structure>) -> Fixed {
    Fixed {
        masks: cases
            .iter()
            .map(|c| (c.case_id.clone(), c.truth.clone().unwrap()))
            .collect(),
        blank,
    }
}

fn loose() -> EvalOptions {
    EvalOptions {
        post: thoraxseg::PostprocParams::threshold_only(),
        ..EvalOptions::default()
    }
}

#[test]
fn ground_truth_as_prediction_is_perfect() {
    let cs = cases(5);
    let res = evaluate_cases(&oracle(&cs, None), &Provenance::none(), Some(1), &cs, &EvalOptions::default()).unwrap();
    let recs: Vec<_> = res.iter().flat_map(|r| r.records.clone()).collect();
    assert_eq!(recs.len(), 15);
    for r in &recs {
        assert_eq!((r.dice, r.jaccard, r.macd_mm), (1.0, 1.0, Some(0.0)), "{r:?}");
    }
}

#[test]
fn empty_heart_prediction() {
    let cs = cases(2);
    let res = evaluate_cases(&oracle(&cs, Some(Structure::Heart)), &Provenance::none(), None, &cs, &loose()).unwrap();
    for r in res.iter().flat_map(|r| &r.records) {
        if r.structure == Structure::Heart {
            assert_eq!(r.dice, 0.0);
            assert_eq!(r.jaccard, 0.0);
            assert_eq!(r.macd_mm, None);
        } else {
            assert_eq!(r.dice, 1.0);
        }
    }
    let agg = aggregate(&res.into_iter().flat_map(|r| r.records).collect::<Vec<_>>()).unwrap();
    assert_eq!(agg.structures[&Structure::Heart].macd_undefined, 2);
    assert_eq!(agg.structures[&Structure::Heart].macd_mm, None);
}

#[test]
fn record_count_audit_with_skips() {
    let mut cs = cases(5);
    cs[1].truth = None;
    let t = cs[3].truth.clone().unwrap();
    let partial: BTreeMap<_, _> = t.iter().filter(|(s, _)| *s != Structure::Clavicles).map(|(s, m)| (s, m.clone())).collect();
    cs[3].truth = Some(MaskSet::partial(t.case_id.clone(), partial).unwrap());
    let res = evaluate_cases(&oracle(&cases(5), None), &Provenance::none(), None, &cs, &loose()).unwrap();
    let n: usize = res.iter().map(|r| r.records.len()).sum();
    assert_eq!(n, 3 * 5 - 3 - 1);
}

#[test]
fn prediction_is_resampled_to_truth_resolution() {
    let cs = cases(1);
    let fine_truth = cs[0].truth.clone().unwrap().map_masks(|_, m| thoraxseg::dataset::resample_nearest(m, 128, 128)).unwrap();
    let fine = vec![EvalCase {
        truth: Some(fine_truth),
        ..cs[0].clone()
    }];
    let res = evaluate_cases(&oracle(&cs, None), &Provenance::none(), None, &fine, &loose()).unwrap();
    for r in &res[0].records {
        assert_eq!(r.dice, 1.0);
        assert_eq!(r.macd_mm, Some(0.0));
    }
}

#[test]
fn checkpoint_cannot_be_scored_on_its_training_fold() {
    let data = synthetic_set(3, 32);
    let mut c = TrainConfig::new("t", tiny_unet(3));
    c.epochs = 1;
    c.train_fold = 1;
    let ckpt = train(&c, &data[..2]).unwrap();
    let held_out: Vec<EvalCase> = data[2..].iter().cloned().map(Into::into).collect();
    let seen: Vec<EvalCase> = data[..1].iter().cloned().map(Into::into).collect();
    let post = thoraxseg::PostprocParams::default();
    assert!(matches!(evaluate(&ckpt, 1, &held_out, &post), Err(Error::FoldLeakage(_))));
    assert!(matches!(evaluate(&ckpt, 2, &seen, &post), Err(Error::FoldLeakage(_))));
    assert_eq!(evaluate(&ckpt, 2, &held_out, &post).unwrap().len(), 3);
}

#[test]
fn overlay_partition() {
    let cs = cases(3);
    for (a, b) in [(0, 1), (1, 2), (2, 2)] {
        let gt = cs[a].truth.as_ref().unwrap();
        let pred = cs[b].truth.as_ref().unwrap();
        for s in Structure::ALL {
            let (g, p) = (gt.get(s).unwrap(), pred.get(s).unwrap());
            let k = overlay_classes(g, p).unwrap();
            for i in 0..g.len() {
                let (gi, pi) = (g.as_slice()[i], p.as_slice()[i]);
                let expected = match (gi, pi) {
                    (true, true) => Some(OverlayClass::Both),
                    (true, false) => Some(OverlayClass::TruthOnly),
                    (false, true) => Some(OverlayClass::PredOnly),
                    (false, false) => None,
                };
                assert_eq!(k.as_slice()[i], expected);
            }
        }
    }
}

#[test]
fn overlay_of_perfect_and_empty_predictions() {
    let img = Radiograph::new("x", Grid::from_fn(256, 256, |r, c| ((r * c) % 4096) as u16), 0.175).unwrap();
    let gt = cases(1).remove(0).truth.unwrap();
    let top = thoraxseg::evalbench::overlay::header_height(64) as u32;

    let same = render_overlay(&img, &gt, &gt, Structure::Lungs).unwrap();
    let empty_masks: BTreeMap<Structure, Mask> = Structure::ALL.iter().map(|&s| (s, Grid::filled(64, 64, false))).collect();
    let empty = MaskSet::new("x", empty_masks).unwrap();
    let none = render_overlay(&img, &gt, &empty, Structure::Lungs).unwrap();
    let lungs = gt.get(Structure::Lungs).unwrap();
    for r in 0..64 {
        for c in 0..64 {
            let a = same.get_pixel(c, r + top).0;
            let b = none.get_pixel(c, r + top).0;
            if *lungs.get(r as usize, c as usize) {
                assert!(a[1] > a[0] && a[1] > a[2], "green expected at ({r},{c})");
                assert!(b[2] > b[0] && b[2] > b[1], "blue expected at ({r},{c})");
            } else {
                assert!(a[0] == a[1] && a[1] == a[2]);
            }
        }
    }
}

#[test]
fn report_from_evaluation() {
    let cs = cases(4);
    let res = evaluate_cases(&oracle(&cs, None), &Provenance::none(), None, &cs, &loose()).unwrap();
    let recs: Vec<_> = res.into_iter().flat_map(|r| r.records).collect();
    let agg = aggregate(&recs).unwrap();
    assert_eq!(agg.n_cases, 4);
    let row = ReportRow {
        key: "unet_vgg16".into(),
        label: "U-Net (VGG16)".into(),
        fine_tuned: Some(false),
        report: agg,
    };
    let a = emit_report(std::slice::from_ref(&row), Layout::ArchTable);
    let b = emit_report(&[row], Layout::ArchTable);
    assert_eq!(a.markdown, b.markdown);
    assert_eq!(a.csv, b.csv);
    assert_eq!(a.csv.lines().count(), 2);
    assert!(a.csv.lines().nth(1).unwrap().starts_with("unet_vgg16,false,1.000000,1.000000,0.000000"));
}
