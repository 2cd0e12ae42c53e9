//! Deterministic inputs shared by the benchmarks.

use thoraxseg::dataset::{JSRT_SIDE, JSRT_SPACING_MM};
use thoraxseg::{Grid, Mask, Radiograph, ScoreMaps, Structure};

/// A filled ellipse centred in an `n`x`n` frame, with radii as fractions of `n`.
pub fn ellipse(n: usize, ry: f64, rx: f64, shift: f64) -> Mask {
    let c = n as f64 / 2.0 + shift;
    Grid::from_fn(n, n, |r, col| {
        let dy = (r as f64 - c) / (ry * n as f64);
        let dx = (col as f64 - c) / (rx * n as f64);
        dy * dy + dx * dx <= 1.0
    })
}

/// Score maps for all three structures with ellipses, pinholes and specks.
pub fn noisy_scores(n: usize) -> ScoreMaps {
    let maps = Structure::ALL
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let base = ellipse(n, 0.3 - 0.05 * i as f64, 0.25, i as f64);
            Grid::from_fn(n, n, |r, c| {
                let speck = (r * 31 + c * 17 + i) % 97 == 0;
                let hole = (r * 13 + c * 7) % 89 == 0;
                if (*base.get(r, c) && !hole) || speck {
                    0.9
                } else {
                    0.1
                }
            })
        })
        .collect();
    ScoreMaps::new("bench", Structure::ALL.to_vec(), maps).expect("valid score maps")
}

/// Soft scores and a binary target of length `n`.
pub fn loss_vectors(n: usize) -> (Vec<f64>, Vec<f64>) {
    let s = (0..n).map(|i| 0.05 + 0.9 * ((i * 7919) % 1000) as f64 / 1000.0).collect();
    let g = (0..n).map(|i| if (i * 104_729) % 3 == 0 { 1.0 } else { 0.0 }).collect();
    (s, g)
}

/// A full-size radiograph with a smooth 12-bit gradient.
pub fn radiograph() -> Radiograph {
    let pixels = Grid::from_fn(JSRT_SIDE, JSRT_SIDE, |r, c| ((r + c) % 4096) as u16);
    Radiograph::new("bench", pixels, JSRT_SPACING_MM).expect("valid radiograph")
}
