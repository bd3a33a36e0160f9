//! Image quality measures on Cartesian rasters.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Side length of the square SSIM window.
pub const SSIM_WINDOW: usize = 8;

/// Row-major raster, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "image of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("image value {i} is not finite")));
        }
        Ok(Image { rows, cols, data })
    }

    pub fn square(data: Vec<f64>) -> Result<Self> {
        let n = data.len().isqrt();
        Image::new(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

fn check_pair(a: &Image, b: &Image) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::input(format!(
            "image shapes differ: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    if a.data.is_empty() {
        return Err(Error::input("images are empty"));
    }
    Ok(())
}

pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.data.len() as f64).sqrt())
}

pub fn area_average(a: &Image) -> Result<f64> {
    if a.data.is_empty() {
        return Err(Error::input("image is empty"));
    }
    Ok(a.data.iter().sum::<f64>() / a.data.len() as f64)
}

/// Dynamic range used by [`ssim`] when none is given: the reference's
/// max minus min, or 1 for a constant reference.
pub fn default_range(reference: &Image) -> f64 {
    let (lo, hi) = reference.min_max();
    if hi > lo {
        hi - lo
    } else {
        1.0
    }
}

/// Mean SSIM over all 8x8 windows at stride 1, population statistics.
pub fn ssim(reference: &Image, test: &Image, range: Option<f64>) -> Result<f64> {
    check_pair(reference, test)?;
    let w = SSIM_WINDOW;
    if reference.rows < w || reference.cols < w {
        return Err(Error::input(format!(
            "SSIM window {w}x{w} is larger than the {}x{} image",
            reference.rows, reference.cols
        )));
    }
    let range = range.unwrap_or_else(|| default_range(reference));
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::input(format!("SSIM dynamic range must be positive, got {range}")));
    }
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let (wr, wc) = (reference.rows - w + 1, reference.cols - w + 1);
    let count = (w * w) as f64;
    let total: f64 = (0..wr)
        .into_par_iter()
        .map(|r0| {
            let mut row_sum = 0.0;
            for c0 in 0..wc {
                let (mut sa, mut sb) = (0.0, 0.0);
                for r in r0..r0 + w {
                    for c in c0..c0 + w {
                        sa += reference.get(r, c);
                        sb += test.get(r, c);
                    }
                }
                let (ma, mb) = (sa / count, sb / count);
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for r in r0..r0 + w {
                    for c in c0..c0 + w {
                        let da = reference.get(r, c) - ma;
                        let db = test.get(r, c) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                }
                let (va, vb, cov) = (va / count, vb / count, cov / count);
                row_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
            row_sum
        })
        .sum();
    Ok(total / (wr * wc) as f64)
}

/// Derivative along one axis: central differences inside, one-sided at the
/// ends.
fn diff(values: impl Fn(usize) -> f64, len: usize, i: usize) -> f64 {
    if i == 0 {
        values(1) - values(0)
    } else if i == len - 1 {
        values(len - 1) - values(len - 2)
    } else {
        0.5 * (values(i + 1) - values(i - 1))
    }
}

/// Mean gradient magnitude.
pub fn sharpness(a: &Image) -> Result<f64> {
    if a.rows < 2 || a.cols < 2 {
        return Err(Error::input(format!("sharpness needs at least 2x2 pixels, got {}x{}", a.rows, a.cols)));
    }
    let mut sum = 0.0;
    for r in 0..a.rows {
        for c in 0..a.cols {
            let gx = diff(|j| a.get(r, j), a.cols, c);
            let gy = diff(|i| a.get(i, c), a.rows, r);
            sum += gx.hypot(gy);
        }
    }
    Ok(sum / a.data.len() as f64)
}

pub fn intensity_profile(a: &Image, row: usize) -> Result<Vec<f64>> {
    if row >= a.rows {
        return Err(Error::input(format!("row {row} out of range for {} rows", a.rows)));
    }
    Ok(a.data[row * a.cols..(row + 1) * a.cols].to_vec())
}

/// Scores two stacks of slices with `metric` and averages the results.
pub fn slice_average(
    reference: &[Image],
    test: &[Image],
    metric: impl Fn(&Image, &Image) -> Result<f64> + Sync,
) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::input(format!(
            "volumes have {} and {} slices",
            reference.len(),
            test.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::input("volumes are empty"));
    }
    let scores: Vec<f64> = reference
        .par_iter()
        .zip(test)
        .map(|(a, b)| metric(a, b))
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// All scalar metrics for a pair of volumes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    pub ssim: f64,
    pub area_average_reference: f64,
    pub area_average_test: f64,
    pub sharpness_reference: f64,
    pub sharpness_test: f64,
}

impl MetricReport {
    /// SSIM uses one dynamic range for all slices, taken from the whole
    /// reference volume unless given.
    pub fn compute(reference: &[Image], test: &[Image], range: Option<f64>) -> Result<Self> {
        let range = match range {
            Some(r) => r,
            None => {
                let (lo, hi) = reference
                    .iter()
                    .map(Image::min_max)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)));
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            }
        };
        let single = |f: fn(&Image) -> Result<f64>, v: &[Image]| slice_average(v, v, move |a, _| f(a));
        Ok(MetricReport {
            mae: slice_average(reference, test, mae)?,
            rmse: slice_average(reference, test, rmse)?,
            ssim: slice_average(reference, test, |a, b| ssim(a, b, Some(range)))?,
            area_average_reference: single(area_average, reference)?,
            area_average_test: single(area_average, test)?,
            sharpness_reference: single(sharpness, reference)?,
            sharpness_test: single(sharpness, test)?,
        })
    }
}
