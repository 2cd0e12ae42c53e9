//! Self-checks of the numerical core that need no data: loss identities,
//! finite-difference gradient checks, a brute-force MACD oracle, pixel
//! scaling, and post-processing fixtures.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, Mask};
use crate::losses::{self, LossKind, LossSpec};
use crate::metrics::{dice_coeff, jaccard_index, macd, mm_scale};
use crate::postproc::{self, PostprocParams};
use crate::structure::{ScoreMaps, Structure};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Run every suite.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut out = vec![
        tversky_matches_dice(seed, 1000),
        jaccard_from_dice(seed, 1000),
        zero_at_identity(seed),
    ];
    out.extend(gradient_checks(seed, 100));
    out.push(macd_oracle(seed, 500));
    out.push(mm_scaling());
    out.push(postproc_fixtures());
    out
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let s = (0..n).map(|_| rng.gen::<f64>()).collect();
    let g = (0..n).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
    (s, g)
}

/// Tversky with `alpha = beta = 0.5` equals the Dice loss (unsmoothed).
pub fn tversky_matches_dice(seed: u64, trials: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    for _ in 0..trials {
        let n = rng.gen_range(1..=256);
        let (s, g) = random_pair(&mut rng, n);
        let t = losses::tversky_loss(&s, &g, 0.5, 0.5, 0.0).expect("valid pair");
        let d = losses::dsc_loss(&s, &g, 0.0).expect("valid pair");
        worst = worst.max((t - d).abs());
    }
    CheckResult::new(
        "loss identity tversky(0.5, 0.5) = dice",
        worst <= 1e-9,
        format!("{trials} pairs, max |diff| {worst:.2e}"),
    )
}

/// `J = D / (2 - D)` on binary masks.
pub fn jaccard_from_dice(seed: u64, trials: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut worst = 0f64;
    let mut checked = 0;
    for _ in 0..trials {
        let (h, w) = (rng.gen_range(1..=24), rng.gen_range(1..=24));
        let p = rng.gen_range(0.05..0.95);
        let a: Mask = Grid::from_fn(h, w, |_, _| rng.gen_bool(p));
        let b: Mask = Grid::from_fn(h, w, |_, _| rng.gen_bool(p));
        let (Ok(d), Ok(j)) = (dice_coeff(&a, &b), jaccard_index(&a, &b)) else {
            continue;
        };
        worst = worst.max((j - d / (2.0 - d)).abs());
        checked += 1;
    }
    CheckResult::new(
        "metric identity J = D/(2-D)",
        worst <= 1e-9 && checked > 0,
        format!("{checked} pairs, max |diff| {worst:.2e}"),
    )
}

/// Every loss is near zero when the prediction equals the ground truth.
pub fn zero_at_identity(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut worst = 0f64;
    for _ in 0..50 {
        let n = rng.gen_range(200..=2000);
        let mut g: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        for v in g.iter_mut().take(100) {
            *v = 1.0;
        }
        for kind in [LossKind::Dsc, LossKind::Jsc, LossKind::Tversky, LossKind::Bce] {
            let l = LossSpec::new(kind).loss(&g, &g).expect("valid pair");
            worst = worst.max(l.abs());
        }
    }
    CheckResult::new(
        "every loss ~ 0 at S = G",
        worst <= 1e-6,
        format!("max |loss| {worst:.2e}"),
    )
}

/// Largest componentwise relative error between the analytic gradient and a
/// central difference with step `h`.
pub fn gradient_error(spec: &LossSpec, s: &[f64], g: &[f64], h: f64) -> f64 {
    let (_, analytic) = spec.loss_and_grad(s, g).expect("valid pair");
    let mut probe = s.to_vec();
    let mut worst = 0f64;
    for i in 0..s.len() {
        probe[i] = s[i] + h;
        let up = spec.loss(&probe, g).expect("valid pair");
        probe[i] = s[i] - h;
        let down = spec.loss(&probe, g).expect("valid pair");
        probe[i] = s[i];
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

/// Analytic vs finite-difference gradients at random interior points.
pub fn gradient_checks(seed: u64, points: usize) -> Vec<CheckResult> {
    [LossKind::Dsc, LossKind::Jsc, LossKind::Tversky, LossKind::Bce]
        .into_iter()
        .map(|kind| {
            let spec = LossSpec::new(kind);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
            let mut worst = 0f64;
            for _ in 0..points {
                let n = rng.gen_range(4..=48);
                let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
                let g: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
                worst = worst.max(gradient_error(&spec, &s, &g, 1e-4));
            }
            CheckResult::new(
                &format!("gradient check {}", kind.name()),
                worst < 1e-4,
                format!("{points} points, max relative error {worst:.2e}"),
            )
        })
        .collect()
}

/// Contour pixels and all-pairs distances in floating point.
fn brute_macd(a: &Mask, b: &Mask) -> f64 {
    let contour = |m: &Mask| -> Vec<(f64, f64)> {
        let (h, w) = m.shape();
        let inside = |r: isize, c: isize| {
            r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && *m.get(r as usize, c as usize)
        };
        let mut pts = Vec::new();
        for r in 0..h as isize {
            for c in 0..w as isize {
                if inside(r, c)
                    && [(-1, 0), (1, 0), (0, -1), (0, 1)]
                        .iter()
                        .any(|(dr, dc)| !inside(r + dr, c + dc))
                {
                    pts.push((r as f64, c as f64));
                }
            }
        }
        pts
    };
    let directed = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|a| q.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / p.len() as f64
    };
    let (ca, cb) = (contour(a), contour(b));
    0.5 * (directed(&ca, &cb) + directed(&cb, &ca))
}

/// The contour distance against an all-pairs brute force, plus symmetry and
/// self-distance.
pub fn macd_oracle(seed: u64, trials: usize) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
    let mut worst = 0f64;
    let mut asym = 0f64;
    let mut self_dist = 0f64;
    for _ in 0..trials {
        let (h, w) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let p = rng.gen_range(0.05..0.9);
        let mut a: Mask = Grid::from_fn(h, w, |_, _| rng.gen_bool(p));
        let mut b: Mask = Grid::from_fn(h, w, |_, _| rng.gen_bool(p));
        a.set(rng.gen_range(0..h), rng.gen_range(0..w), true);
        b.set(rng.gen_range(0..h), rng.gen_range(0..w), true);
        let ab = macd(&a, &b, 1.0).expect("nonempty masks");
        let ba = macd(&b, &a, 1.0).expect("nonempty masks");
        worst = worst.max((ab - brute_macd(&a, &b)).abs());
        asym = asym.max((ab - ba).abs());
        self_dist = self_dist.max(macd(&a, &a, 1.0).expect("nonempty mask").abs());
    }
    CheckResult::new(
        "macd brute-force oracle",
        worst <= 1e-9 && asym <= 1e-12 && self_dist == 0.0,
        format!("{trials} pairs, max |diff| {worst:.2e}, asymmetry {asym:.2e}, macd(A,A) {self_dist}"),
    )
}

pub fn mm_scaling() -> CheckResult {
    let v = mm_scale(0.175, 2048, 224);
    CheckResult::new("mm scale 0.175 * 2048 / 224", v == 1.6, format!("{v}"))
}

/// A ring whose hole must fill, speckles that must go, and idempotence.
pub fn postproc_fixtures() -> CheckResult {
    let n = 64;
    // Ring: square annulus rows/cols 10..30 with a 6x6 hole at 17..23.
    let ring = |r: usize, c: usize| {
        (10..30).contains(&r) && (10..30).contains(&c) && !((17..23).contains(&r) && (17..23).contains(&c))
    };
    let disk = |r: usize, c: usize| (10..30).contains(&r) && (10..30).contains(&c);
    // Isolated 2x2 speckles far from the ring, below floor(0.005 * 64 * 64) = 20 pixels.
    let speckle = |r: usize, c: usize| (50..52).contains(&r) && (5..7).contains(&c) || (40..42).contains(&r) && (50..52).contains(&c);
    let scores = Grid::from_fn(n, n, |r, c| if ring(r, c) || speckle(r, c) { 0.9f32 } else { 0.1 });
    let maps = ScoreMaps::new("fixture", vec![Structure::Heart], vec![scores]).expect("one map");
    let p = PostprocParams::default();
    let out = postproc::apply(&maps, &p).expect("valid params");
    let mask = out.get(Structure::Heart).expect("heart");
    let expected: Mask = Grid::from_fn(n, n, disk);
    let exact = mask == &expected;
    let again = postproc::apply(&ScoreMaps::new("fixture", vec![Structure::Heart], vec![mask.to_f32()]).expect("one map"), &p)
        .expect("valid params");
    let idempotent = again.get(Structure::Heart) == Some(mask);
    CheckResult::new(
        "post-processing fixtures",
        exact && idempotent,
        format!("ring->disk with speckles removed: {exact}, idempotent: {idempotent}"),
    )
}
