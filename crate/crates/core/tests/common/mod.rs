#![allow(dead_code)]

use std::collections::BTreeMap;

use thoraxseg::{ArchName, ArchSpec, Grid, Mask, MaskSet, ModelInput, Structure, TrainSample};

/// A small U-Net that builds and runs in milliseconds.
pub fn tiny_unet(num_classes: usize) -> ArchSpec {
    let mut spec = ArchSpec::new(ArchName::UnetVgg16, false);
    spec.num_classes = num_classes;
    spec.input_size = 32;
    spec.width_divisor = 16;
    spec
}

/// Synthetic chest-like case: two lung fields, a heart between them and two
/// clavicle bars, drawn brighter than the background with a case-dependent
/// offset.
pub fn synthetic_sample(i: usize, n: usize) -> TrainSample {
    let s = n as f64 / 32.0;
    let o = (i % 3) as f64;
    let within = |v: usize, lo: f64, hi: f64| (v as f64) >= lo * s && (v as f64) < hi * s;
    let lungs: Mask = Grid::from_fn(n, n, |r, c| within(r, 6.0 + o, 27.0) && (within(c, 3.0, 13.0) || within(c, 19.0, 29.0 - o)));
    let heart: Mask = Grid::from_fn(n, n, |r, c| within(r, 16.0, 26.0) && within(c, 12.0 + o, 20.0));
    let clav: Mask = Grid::from_fn(n, n, |r, c| within(r, 3.0, 5.0) && (within(c, 4.0, 14.0) || within(c, 18.0, 28.0)));
    let plane = Grid::from_fn(n, n, |r, c| {
        let mut v = -1.0f32;
        if *lungs.get(r, c) {
            v += 2.0;
        }
        if *heart.get(r, c) {
            v += 1.0;
        }
        if *clav.get(r, c) {
            v += 1.5;
        }
        v + ((r * 7 + c * 3 + i) % 5) as f32 * 0.05
    });
    let id = format!("case{i:03}");
    let masks = MaskSet::new(
        id.clone(),
        BTreeMap::from([(Structure::Lungs, lungs), (Structure::Heart, heart), (Structure::Clavicles, clav)]),
    )
    .unwrap();
    TrainSample {
        case_id: id.clone(),
        input: ModelInput::new(id, plane, 0.0, 1.0),
        masks,
    }
}

pub fn synthetic_set(n_cases: usize, side: usize) -> Vec<TrainSample> {
    (0..n_cases).map(|i| synthetic_sample(i, side)).collect()
}
