//! Static PNG figures: principal-component scatter and histograms.

use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::CliError;

const WIDTH: u32 = 640;
const HEIGHT: u32 = 480;
const MARGIN: u32 = 40;
const BINS: usize = 30;

fn canvas() -> RgbImage {
    let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([255, 255, 255]));
    let axis = Rgb([40, 40, 40]);
    for x in MARGIN..=WIDTH - MARGIN {
        img.put_pixel(x, HEIGHT - MARGIN, axis);
    }
    for y in MARGIN..=HEIGHT - MARGIN {
        img.put_pixel(MARGIN, y, axis);
    }
    img
}

fn save(img: &RgbImage, path: &Path) -> Result<(), CliError> {
    img.save(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Blue for low values through red for high ones.
fn ramp(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    Rgb([
        (255.0 * t) as u8,
        (80.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
        (255.0 * (1.0 - t)) as u8,
    ])
}

fn bounds(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = xs
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    (lo <= hi).then_some({
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    })
}

/// Projection of standardized rows onto their two leading principal axes.
pub fn principal_components(rows: &[[f64; 8]]) -> Vec<[f64; 2]> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let mut x = DMatrix::from_fn(n, 8, |i, j| rows[i][j]);
    for j in 0..8 {
        let mean = x.column(j).mean();
        let sd = (x.column(j).map(|v| (v - mean).powi(2)).sum() / n as f64).sqrt();
        for i in 0..n {
            x[(i, j)] = if sd > 0.0 {
                (x[(i, j)] - mean) / sd
            } else {
                0.0
            };
        }
    }
    let cov = x.transpose() * &x / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let axes = [
        eig.eigenvectors.column(order[0]),
        eig.eigenvectors.column(order[1]),
    ];
    (0..n)
        .map(|i| {
            let row = x.row(i);
            [row.dot(&axes[0].transpose()), row.dot(&axes[1].transpose())]
        })
        .collect()
}

/// Scatter of the first two principal components of `props`, colored by `color`.
pub fn pca_scatter(props: &[[f64; 8]], color: &[f64], path: &Path) -> Result<(), CliError> {
    let pts = principal_components(props);
    let mut img = canvas();
    let (Some((x0, x1)), Some((y0, y1))) = (
        bounds(pts.iter().map(|p| p[0])),
        bounds(pts.iter().map(|p| p[1])),
    ) else {
        return save(&img, path);
    };
    let (c0, c1) = bounds(color.iter().copied()).unwrap_or((0.0, 1.0));
    let w = f64::from(WIDTH - 2 * MARGIN - 4);
    let h = f64::from(HEIGHT - 2 * MARGIN - 4);
    for (p, c) in pts.iter().zip(color) {
        let px = MARGIN + 2 + ((p[0] - x0) / (x1 - x0) * w) as u32;
        let py = HEIGHT - MARGIN - 2 - ((p[1] - y0) / (y1 - y0) * h) as u32;
        let rgb = ramp((c - c0) / (c1 - c0));
        for dx in 0..3 {
            for dy in 0..3 {
                img.put_pixel(px + dx - 1, py + dy - 1, rgb);
            }
        }
    }
    save(&img, path)
}

pub fn bin_counts(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if let Some((lo, hi)) = bounds(values.iter().copied()) {
        for v in values.iter().filter(|v| v.is_finite()) {
            let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
    }
    counts
}

pub fn histogram(values: &[f64], path: &Path) -> Result<(), CliError> {
    let counts = bin_counts(values, BINS);
    let mut img = canvas();
    let top = counts.iter().copied().max().unwrap_or(0).max(1);
    let bar = (WIDTH - 2 * MARGIN) / BINS as u32;
    let h = f64::from(HEIGHT - 2 * MARGIN);
    for (b, &c) in counts.iter().enumerate() {
        let height = (c as f64 / top as f64 * h) as u32;
        let x0 = MARGIN + 1 + b as u32 * bar;
        for x in x0..x0 + bar - 1 {
            for y in HEIGHT - MARGIN - height..HEIGHT - MARGIN {
                img.put_pixel(x, y, Rgb([70, 110, 170]));
            }
        }
    }
    save(&img, path)
}
