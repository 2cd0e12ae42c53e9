use super::{ModelInput, Radiograph};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Side length of the square network input.
pub const WORKING_SIZE: usize = 224;

/// Bilinear resampling with pixel-center alignment (a source pixel `i` covers
/// `[i, i+1)` and is sampled at `i + 0.5`); coordinates are clamped at the
/// borders.
pub fn resize_bilinear(src: &Grid<f32>, height: usize, width: usize) -> Grid<f32> {
    let (sh, sw) = src.shape();
    let rows: Vec<(usize, usize, f32)> = (0..height).map(|i| taps(i, height, sh)).collect();
    let cols: Vec<(usize, usize, f32)> = (0..width).map(|j| taps(j, width, sw)).collect();
    Grid::from_fn(height, width, |r, c| {
        let (r0, r1, fr) = rows[r];
        let (c0, c1, fc) = cols[c];
        let top = *src.get(r0, c0) * (1.0 - fc) + *src.get(r0, c1) * fc;
        let bottom = *src.get(r1, c0) * (1.0 - fc) + *src.get(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    })
}

fn taps(i: usize, dst: usize, src: usize) -> (usize, usize, f32) {
    let x = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64);
    let x0 = x.floor() as usize;
    let x1 = (x0 + 1).min(src - 1);
    (x0, x1, (x - x0 as f64) as f32)
}

/// Standardize a grid by its own mean and population standard deviation.
pub fn normalize(grid: &Grid<f32>) -> Result<(Grid<f32>, f64, f64)> {
    let n = grid.len() as f64;
    let mean = grid.as_slice().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = grid
        .as_slice()
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let std = var.sqrt();
    if !(std > 1e-12) {
        return Err(Error::DegenerateInput(format!(
            "constant image (mean {mean}), standard deviation is zero"
        )));
    }
    let out = grid.map(|&v| ((v as f64 - mean) / std) as f32);
    Ok((out, mean, std))
}

/// Resize to 224x224, standardize, replicate to three channels.
pub fn preprocess(r: &Radiograph) -> Result<ModelInput> {
    preprocess_to(r, WORKING_SIZE)
}

pub fn preprocess_to(r: &Radiograph, size: usize) -> Result<ModelInput> {
    let src = r.pixels.map(|&v| v as f32);
    let small = resize_bilinear(&src, size, size);
    let (plane, mean, std) = normalize(&small)?;
    Ok(ModelInput::new(r.case_id.clone(), plane, mean, std))
}
